"""Lane-Emden models: polytropes, reaction BVPs, and the coupled system."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from impasse.geometry import classify_semilinear, unstable_seed
from impasse.integrator import EventNotFound, StepControl, integrate_until
from impasse.lane_emden import (
    DEFAULT_CONTROL,
    OXYGEN_SETS,
    BiocatalystModel,
    CatalystSystemModel,
    LaneEmdenModel,
    OxygenModel,
    ParametricSolution,
    PolytropeModel,
    bessel_j0,
    catalyst_field,
    catalyst_seed_state,
    desingularized_field,
    effectiveness_factor,
    effectiveness_surface,
    exact_polytrope,
    first_zero,
    le_bvp,
    le_ivp,
    le_system_bvp,
    max_ode_residual,
    oxygen_bvp,
    semilinear_problem,
    unstable_seed_state,
)
from impasse.solvers import variational_jacobian

J0_FIRST_ROOT = 2.404825557695773  # first positive root of the Bessel J0
J0_AT_ONE = 0.7651976865579666  # classical tabulated J0(1)


def sup_profile_error(sol: ParametricSolution, exact, x_lo: float, x_hi: float) -> float:
    worst = 0.0
    for x in np.linspace(x_lo, x_hi, 120):
        u, _ = sol.at_x(float(x))
        worst = max(worst, abs(u - exact(float(x))))
    return worst


def test_model_validation():
    with pytest.raises(ValueError):
        LaneEmdenModel(0.0, lambda x, u: -u)
    with pytest.raises(ValueError):
        PolytropeModel(4, 1.0)
    with pytest.raises(ValueError):
        PolytropeModel(3, -0.5)
    with pytest.raises(ValueError):
        BiocatalystModel(0.0, 1.0)
    with pytest.raises(ValueError):
        BiocatalystModel(1.0, -0.1)
    with pytest.raises(ValueError):
        OxygenModel(-1.0, 0.1, 5.0)
    with pytest.raises(ValueError):
        CatalystSystemModel(mu_u=-1.0)


def test_seed_matches_eigen_route():
    # closed-form seed vs the generic classification/eigen pipeline
    model = PolytropeModel(3, 1).to_model()
    fast = unstable_seed_state(model, 1.0, 1e-3)
    analysis = classify_semilinear(semilinear_problem(model), (0.0, 1.0, 0.0))
    assert analysis.unique_solution
    generic = unstable_seed(analysis, epsilon=1e-3)
    assert np.allclose(fast, generic, atol=1e-9)


def test_seed_u_prime_stays_small():
    model = PolytropeModel(3, 1).to_model()
    seed = unstable_seed_state(model, 1.0, 1e-3)
    assert seed[0] > 0
    assert abs(seed[2]) <= 1e-3


def test_seed_validation():
    model = PolytropeModel(3, 1).to_model()
    with pytest.raises(ValueError):
        unstable_seed_state(model, 1.0, 0.0)
    bad = LaneEmdenModel(2.0, lambda x, u: math.nan)
    with pytest.raises(ValueError):
        unstable_seed_state(bad, 1.0, 1e-3)
    with pytest.raises(ValueError):
        le_ivp(model, 1.0, x_max=1e-9)


def test_polytrope_n0_profile():
    model = PolytropeModel(3, 0).to_model()
    sol = le_ivp(model, 1.0, x_max=2.6)
    exact = exact_polytrope(3, 0)
    assert sup_profile_error(sol, exact, 0.05, math.sqrt(6.0)) <= 1e-5
    u, up = sol.at_x(1.0)
    assert abs(up - (-1.0 / 3.0)) <= 1e-5


def test_polytrope_n1_profile():
    model = PolytropeModel(3, 1).to_model()
    sol = le_ivp(model, 1.0, x_max=3.5)
    assert sup_profile_error(sol, exact_polytrope(3, 1), 0.05, math.pi) <= 1e-5


def test_polytrope_n5_profile():
    model = PolytropeModel(3, 5).to_model()
    sol = le_ivp(model, 1.0, x_max=10.5)
    assert sup_profile_error(sol, exact_polytrope(3, 5), 0.05, 10.0) <= 1e-5


def test_first_zero_sphere_n0():
    xi1, up1, r = first_zero(PolytropeModel(3, 0).to_model())
    assert abs(xi1 - math.sqrt(6.0)) / math.sqrt(6.0) <= 1e-5
    assert abs(up1 - (-math.sqrt(6.0) / 3.0)) <= 1e-5
    assert abs(r - 1.0) <= 1e-5


def test_first_zero_sphere_n1():
    xi1, _, r = first_zero(PolytropeModel(3, 1).to_model())
    assert abs(xi1 - math.pi) / math.pi <= 1e-5
    assert abs(r - math.pi**2 / 3.0) / (math.pi**2 / 3.0) <= 1e-5


def test_first_zero_sphere_n5_unbounded():
    with pytest.raises(EventNotFound):
        first_zero(PolytropeModel(3, 5).to_model())


def test_cylinder_n0():
    xi1, _, _ = first_zero(PolytropeModel(2, 0).to_model())
    assert abs(xi1 - 2.0) <= 2e-5
    sol = le_ivp(PolytropeModel(2, 0).to_model(), 1.0, x_max=2.2)
    assert sup_profile_error(sol, exact_polytrope(2, 0), 0.05, 2.0) <= 1e-5


def test_cylinder_n1_bessel():
    xi1, _, _ = first_zero(PolytropeModel(2, 1).to_model())
    assert abs(xi1 - J0_FIRST_ROOT) / J0_FIRST_ROOT <= 1e-5
    sol = le_ivp(PolytropeModel(2, 1).to_model(), 1.0, x_max=2.6)
    assert sup_profile_error(sol, bessel_j0, 0.05, 2.4) <= 1e-5


def test_cylinder_n2_self_convergence():
    # no closed form here: tolerance- and epsilon-halving must agree
    model = PolytropeModel(2, 2).to_model()
    xi_a, _, r_a = first_zero(model)
    tight = StepControl(rel_tol=1e-10, abs_tol=1e-13)
    xi_b, _, r_b = first_zero(model, ctrl=tight)
    xi_c, _, _ = first_zero(model, epsilon=5e-4)
    assert abs(xi_a - xi_b) <= 1e-6
    assert abs(r_a - r_b) <= 1e-6
    assert abs(xi_a - xi_c) <= 1e-6


def test_fractional_index_halts_at_zero():
    model = PolytropeModel(3, 1.5).to_model()
    assert model.halt_at_u_zero
    sol = le_ivp(model, 1.0)
    assert sol.boundary_state is not None
    assert abs(sol.boundary_state[1]) <= 1e-10
    # first zero sits between the n=1 and n=2 values
    xi1, _, _ = first_zero(model)
    assert math.pi < xi1 < 4.5
    assert abs(sol.boundary_state[0] - xi1) <= 1e-6


def test_epsilon_insensitivity_first_zero():
    model = PolytropeModel(3, 1).to_model()
    xi_a, _, _ = first_zero(model, epsilon=1e-3)
    xi_b, _, _ = first_zero(model, epsilon=1e-4)
    assert abs(xi_a - xi_b) <= 1e-7


def test_exponential_fiber_identity():
    sol = le_ivp(PolytropeModel(3, 1).to_model(), 1.0, x_max=3.0)
    traj = sol.trajectory
    xs = traj.states[:, 0]
    ss = traj.s_nodes
    pred = xs[0] * np.exp(ss - ss[0])
    assert np.max(np.abs(xs - pred) / xs) <= 1e-6


def test_ode_residual_substitution():
    model = PolytropeModel(3, 1).to_model()
    sol = le_ivp(model, 1.0, x_max=3.0)
    assert max_ode_residual(sol, model) <= 1e-4


def test_parametric_solution_accessors():
    sol = le_ivp(PolytropeModel(3, 0).to_model(), 1.0, x_max=2.0)
    u, up = sol.at_x(1.0)
    assert abs(u - (1.0 - 1.0 / 6.0)) <= 1e-6
    rows = sol.sample([0.5, 1.0, 1.5])
    assert rows.shape == (3, 3)
    assert np.all(np.diff(rows[:, 0]) > 0)
    assert sol.x_start < 0.01 and sol.x_end >= 2.0


def test_parametric_solution_validation():
    sol = le_ivp(PolytropeModel(3, 0).to_model(), 1.0, x_max=2.0)
    with pytest.raises(ValueError):
        ParametricSolution(sol.trajectory, 3, 1e-3, 1e-8, 1e-12)


def test_bvp_constant_solution():
    model = LaneEmdenModel(2.0, lambda x, u: 0.0)
    sol = le_bvp(model, (1.0, 0.0, 1.0))
    u, up = sol.at_x(0.5)
    assert abs(u - 1.0) <= 1e-9
    assert abs(up) <= 1e-9


def test_bvp_linear_reaction_sinh():
    model = LaneEmdenModel(2.0, lambda x, u: u, lambda x, u: 1.0)
    sol = le_bvp(model, (1.0, 0.0, 1.0))
    u0 = sol.trajectory.states[0, 1]
    assert abs(u0 - 1.0 / math.sinh(1.0)) <= 1e-6

    def exact(x: float) -> float:
        return math.sinh(x) / (x * math.sinh(1.0))

    assert sup_profile_error(sol, exact, 0.05, 1.0) <= 1e-6


def test_bvp_requires_usable_condition():
    model = LaneEmdenModel(2.0, lambda x, u: 0.0)
    with pytest.raises(ValueError):
        le_bvp(model, (0.0, 0.0, 1.0))


def test_oxygen_all_sets_converge():
    for model in OXYGEN_SETS.values():
        sol = oxygen_bvp(model)
        x1, u1, up1 = sol.boundary_state
        residual = model.alpha * u1 + up1 - model.alpha
        assert abs(residual) <= 1e-7
        assert 0.0 < sol.trajectory.states[0, 1] < 1.0


def test_oxygen_methods_agree():
    # uniqueness: two root-finding routes land on the same center value
    for model in OXYGEN_SETS.values():
        a = oxygen_bvp(model, method="steffensen")
        b = oxygen_bvp(model, method="bisection")
        assert abs(a.trajectory.states[0, 1] - b.trajectory.states[0, 1]) <= 1e-6


def test_oxygen_profile_stable_under_tightening():
    model = OXYGEN_SETS[3]
    a = oxygen_bvp(model, tol=1e-7)
    b = oxygen_bvp(model, tol=1e-9, ctrl=StepControl(rel_tol=1e-10, abs_tol=1e-13))
    assert abs(a.trajectory.states[0, 1] - b.trajectory.states[0, 1]) <= 5e-7
    for x in (0.25, 0.5, 0.75):
        ua, _ = a.at_x(x)
        ub, _ = b.at_x(x)
        assert abs(ua - ub) <= 5e-7


def test_oxygen_residual_invariant():
    model = OXYGEN_SETS[1]
    sol = oxygen_bvp(model)
    assert max_ode_residual(sol, model.to_model()) <= 1e-4


def test_effectiveness_small_thiele_limit():
    eta = effectiveness_factor(BiocatalystModel(1e-3, 1.0))
    assert 0.999 <= eta <= 1.0005


def test_effectiveness_cross_checked_against_bisection():
    eta = effectiveness_factor(BiocatalystModel(10.0, 1.0))
    oracle = effectiveness_factor(
        BiocatalystModel(10.0, 1.0), tol=1e-10, method="bisection"
    )
    assert 0.0 < eta < 1.0
    assert abs(eta - oracle) <= 1e-4


def test_effectiveness_monotone_in_thiele():
    assert effectiveness_factor(BiocatalystModel(20.0, 1.0)) < effectiveness_factor(
        BiocatalystModel(5.0, 1.0)
    )


def test_surface_single_cell_matches_point_solver():
    rows = effectiveness_surface([10.0], [1.0])
    assert len(rows) == 1
    phi2, big_k, eta, err = rows[0]
    assert (phi2, big_k, err) == (10.0, 1.0, "")
    from impasse.lane_emden import SWEEP_CONTROL

    assert math.isclose(eta, effectiveness_factor(BiocatalystModel(10.0, 1.0), ctrl=SWEEP_CONTROL), rel_tol=1e-12)


def test_surface_row_major_and_bounded():
    p2s = [0.5, 5.0, 25.0]
    ks = [0.1, 2.0, 20.0]
    rows = effectiveness_surface(p2s, ks)
    assert len(rows) == 9
    assert [r[0] for r in rows[:3]] == [0.5, 0.5, 0.5]
    assert [r[1] for r in rows[:3]] == ks
    for _, _, eta, err in rows:
        assert err == ""
        assert 0.0 < eta < 1.01


def test_surface_isolates_cell_failures():
    # an unreachable shooting tolerance fails the cell, not the sweep
    rows = effectiveness_surface([10.0], [1.0], tol=1e-16)
    assert len(rows) == 1
    assert math.isnan(rows[0][2])
    assert rows[0][3] != ""
    with pytest.raises(ValueError):
        effectiveness_surface([], [1.0])


def test_catalyst_decoupled_limit():
    model = CatalystSystemModel(mu_u=0.0, mu_v=0.0, mu_w=0.0)
    sol = le_system_bvp(model)
    assert np.allclose(sol.trajectory.states[0, 1:4], 1.0, atol=1e-9)
    u, up = sol.at_x(0.5)
    assert np.allclose(u, 1.0, atol=1e-9)
    assert np.allclose(up, 0.0, atol=1e-9)


def test_catalyst_reference_parameters():
    model = CatalystSystemModel()
    sol = le_system_bvp(model, tol=1e-6)
    x1, u1, v1, w1 = sol.boundary_state[:4]
    assert max(abs(u1 - 1.0), abs(v1 - 1.0), abs(w1 - 1.0)) <= 1e-6
    assert max_ode_residual(sol, model) <= 1e-4
    rows = sol.sample(np.linspace(0.05, 0.999, 40))
    assert np.all(np.diff(rows[:, 1]) > 0)  # u grows outward
    assert np.all(np.diff(rows[:, 3]) > 0)  # w grows outward


def test_catalyst_variational_matches_finite_differences():
    model = CatalystSystemModel()
    field = catalyst_field(model)
    from impasse.integrator import EventSpec

    stop = EventSpec(lambda y: y[0] - 1.0, direction="rising")

    def seed_map(p):
        return catalyst_seed_state(model, p, 1e-3)

    def boundary_map(y):
        return (y[1] - 1.0, y[2] - 1.0, y[3] - 1.0)

    residual_fn, jacobian_fn = variational_jacobian(
        field, field.jacobian, seed_map, stop, boundary_map, DEFAULT_CONTROL
    )
    p0 = np.array([0.5, 0.5, 0.5])
    j_var = jacobian_fn(p0)
    j_fd = np.zeros((3, 3))
    step = 1e-4
    for j in range(3):
        dp = np.zeros(3)
        dp[j] = step
        j_fd[:, j] = (residual_fn(p0 + dp) - residual_fn(p0 - dp)) / (2.0 * step)
    assert np.max(np.abs(j_var - j_fd) / np.maximum(1.0, np.abs(j_fd))) <= 1e-4


def test_bessel_j0_series():
    assert bessel_j0(0.0) == 1.0
    assert abs(bessel_j0(1.0) - J0_AT_ONE) <= 1e-12
    assert abs(bessel_j0(J0_FIRST_ROOT)) <= 1e-12


def test_exact_polytrope_coverage():
    assert exact_polytrope(2, 2) is None
    assert exact_polytrope(3, 2) is None
    assert exact_polytrope(3, 5)(0.0) == 1.0
    assert exact_polytrope(2, 1) is bessel_j0


@settings(max_examples=20, deadline=None)
@given(
    u0=st.floats(min_value=0.5, max_value=2.0),
    n=st.integers(min_value=0, max_value=3),
)
def test_fiber_identity_property(u0, n):
    model = PolytropeModel(3, float(n)).to_model()
    sol = le_ivp(model, u0, x_max=1.5)
    traj = sol.trajectory
    xs = traj.states[:, 0]
    pred = xs[0] * np.exp(traj.s_nodes - traj.s_nodes[0])
    assert np.max(np.abs(xs - pred) / xs) <= 1e-6
