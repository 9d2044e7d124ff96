"""Neutral-atom screening equation via its first-order reduction.

The substitution t = 144^{-1/6} x^{1/2} u^{1/6}, v = -(16/3)^{1/3} u^{-4/3} u'
turns sqrt(x) u'' = sqrt(u^3) into a planar quasi-linear equation whose
parametric form is the reduced field

    (t, v) |-> (t^2 v - 1, 8 (1 - t v^2)).

Its unique stationary point (1, 1) is a saddle; the branch of the unstable
manifold running to t = 0 carries the decaying solution of the original
problem, and the value v(s0) at the t = 0 event yields the critical slope
omega = -(3/16)^{1/3} v(s0).  Back-transformation uses the accumulated
integral I' = -t v:

    x = 144^{1/3} t^2 e^{2I},  u = e^{-6I},  u' = -(3/16)^{1/3} v e^{-8I},

with I shifted so that I = 0 where t = 0, which pins u(0) = 1.  Solution
families with prescribed initial slope integrate the reversed field from
(t, v) = (0, v0) instead, and two-sided boundary conditions are solved by
bisection on v0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .integrator import (
    AutonomousField,
    EventHit,
    EventSpec,
    NotAttained,
    StepControl,
    Trajectory,
    integrate_until,
    integrate_with_events,
    quadrature_extend,
)
from .solvers import MaxIter, NoBracket

SQRT73 = math.sqrt(73.0)
CBRT144 = 144.0 ** (1.0 / 3.0)
# (3/16)^{1/3}; equals 3 / 144^{1/3}, the factor of the slope map
SLOPE_FACTOR = 3.0 / CBRT144
UNSTABLE_EIGENVALUE = -7.0 + SQRT73
STABLE_EIGENVALUE = -7.0 - SQRT73

# controls: the reduced plane is O(1), so abs floors sit just below rel
CRITICAL_CONTROL = StepControl(rel_tol=1e-11, abs_tol=1e-14)
FAMILY_CONTROL = StepControl(rel_tol=1e-8, abs_tol=1e-11)

U_FLOOR_DEFAULT = 1e-8


class DomainError(ValueError):
    """Input outside the transformation's domain (needs x >= 0, u > 0)."""


@dataclass(frozen=True)
class ReducedState:
    """Point of the reduced plane plus the accumulated integral."""

    t: float
    v: float
    i: float = 0.0


@dataclass(frozen=True)
class MajoranaSeries:
    """Expansion coefficients a_0..a_N of the reduced solution about t=1."""

    coeffs: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.coeffs or self.coeffs[0] != 1.0:
            raise ValueError("series must start with a_0 = 1")
        if len(self.coeffs) > 1 and abs(self.coeffs[1] - (9.0 - SQRT73)) > 1e-15:
            raise ValueError("a_1 must equal 9 - sqrt(73)")

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1


def reduced_field() -> AutonomousField:
    """Planar field (t, v) |-> (t^2 v - 1, 8 (1 - t v^2))."""

    def rhs(y: Sequence[float]) -> tuple[float, float]:
        t, v = y[0], y[1]
        return (t * t * v - 1.0, 8.0 * (1.0 - t * v * v))

    def jacobian(y: Sequence[float]) -> list[list[float]]:
        t, v = y[0], y[1]
        return [[2.0 * t * v, t * t], [-8.0 * v * v, -16.0 * t * v]]

    return AutonomousField(2, rhs, jacobian=jacobian)


def majorana_forward(x: float, u: float, uprime: float) -> tuple[float, float]:
    """Map a graph point (x, u, u') to the reduced plane (t, v)."""
    if x < 0.0:
        raise DomainError(f"need x >= 0, got {x!r}")
    if u <= 0.0:
        raise DomainError(f"need u > 0, got {u!r}")
    t = CBRT144 ** -0.5 * math.sqrt(x) * u ** (1.0 / 6.0)
    v = -uprime / (SLOPE_FACTOR * u ** (4.0 / 3.0))
    return t, v


def saddle_seed(epsilon: float = 1e-3, direction: int = -1) -> list[float]:
    """(1,1) displaced epsilon along the unit unstable eigenvector.

    direction -1 selects the branch with t < 1 that runs to t = 0.
    """
    if not epsilon > 0:
        raise ValueError(f"need epsilon > 0, got {epsilon!r}")
    if direction not in (-1, 1):
        raise ValueError("direction must be +1 or -1")
    # eigenvector (1, lambda - 2) of the saddle Jacobian [[2,1],[-8,-16]]
    w = UNSTABLE_EIGENVALUE - 2.0
    nrm = math.hypot(1.0, w)
    return [1.0 + direction * epsilon / nrm, 1.0 + direction * epsilon * w / nrm]


def _t_zero_event() -> EventSpec:
    return EventSpec(lambda y: y[0], direction="falling", terminal=True)


def _slope_control(tol: float) -> StepControl:
    rel = max(tol / 30.0, 2.5e-14)
    return StepControl(rel_tol=rel, abs_tol=rel * 1e-2, max_steps=400_000)


@lru_cache(maxsize=64)
def critical_slope(tol: float = 1e-10, epsilon: float = 1e-3) -> float:
    """Slope u'(0) of the decaying solution, to ~tol relative accuracy.

    Integrates the reduced field from the unstable seed to the t = 0
    event and applies the slope map.  The result is insensitive to
    epsilon (the event, not the flow time, defines the endpoint), so
    accuracy is governed by the step tolerance alone.
    """
    if tol < 1e-13:
        raise ValueError(f"tol={tol!r} below the double-precision floor 1e-13")
    ctrl = _slope_control(tol)
    seed = saddle_seed(epsilon, direction=-1)
    _, _, y_end = integrate_until(reduced_field(), seed, ctrl, _t_zero_event(), 100.0)
    return float(-SLOPE_FACTOR * y_end[1])


def critical_v0(tol: float = 1e-10) -> float:
    """v value at t = 0 on the critical branch (= -omega / (3/16)^{1/3})."""
    return -critical_slope(tol) / SLOPE_FACTOR


def majorana_coeffs(n_terms: int) -> MajoranaSeries:
    """Coefficients a_0..a_N of the reduced-solution expansion about t=1.

    a_0 = 1 and a_1 = 9 - sqrt(73) (the root selecting the unstable
    direction); higher coefficients follow the three-term recursion with
    denominator 2(i+8) - (i+1) a_1.
    """
    if n_terms < 1:
        raise ValueError(f"need at least one term, got {n_terms!r}")
    a1 = 9.0 - SQRT73
    a = [1.0, a1]
    for i in range(2, n_terms + 1):
        acc = (i + 6.0) * a1 * a[i - 2] + ((i + 7.0) - 2.0 * (i + 3.0) * a1) * a[i - 1]
        for j in range(1, i - 1):
            acc += (
                (j + 1.0) * a[j + 1]
                - 2.0 * (j + 4.0) * a[j]
                + (j + 7.0) * a[j - 1]
            ) * a[i - j]
        a.append(acc / (2.0 * (i + 8.0) - (i + 1.0) * a1))
    return MajoranaSeries(tuple(a))


def slope_from_series(n_terms: int) -> float:
    """Truncated-series slope -(3/16)^{1/3} * sum(a_0..a_N)."""
    if n_terms < 0:
        raise ValueError(f"need n_terms >= 0, got {n_terms!r}")
    if n_terms == 0:
        return -SLOPE_FACTOR
    return -SLOPE_FACTOR * math.fsum(majorana_coeffs(n_terms).coeffs)


def _parametric(y: Sequence[float], i_shift: float) -> tuple[float, float, float]:
    t, v = y[0], y[1]
    i_val = y[2] - i_shift
    x = CBRT144 * t * t * math.exp(2.0 * i_val)
    u = math.exp(-6.0 * i_val)
    uprime = -SLOPE_FACTOR * v * math.exp(-8.0 * i_val)
    return x, u, uprime


@dataclass(frozen=True)
class TFSolution:
    """One solution curve: reduced trajectory plus the graph parametrization.

    The trajectory runs over (t, v, I); the physical curve is obtained
    pointwise through the back-transform with the stored I shift.  branch
    is "critical" for the decaying solution and "slope_family" for curves
    started at (t, v) = (0, v0); x is monotone along s either way.
    """

    trajectory: Trajectory
    i_shift: float
    branch: str
    v0: float | None
    s_terminal: float
    terminal_state: tuple[float, float, float]
    epsilon: float | None
    rel_tol: float
    abs_tol: float
    termination: str = "t_zero"

    @property
    def slope(self) -> float:
        """u'(0): the slope map applied at the x = 0 end of the curve."""
        if self.branch == "critical":
            return -SLOPE_FACTOR * self.terminal_state[1]
        return -SLOPE_FACTOR * float(self.v0)

    def parametric_at_s(self, s: float) -> tuple[float, float, float]:
        """(x, u, u') at flow parameter s."""
        if s == self.s_terminal:
            return _parametric(self.terminal_state, self.i_shift)
        return _parametric(self.trajectory.refined_state(s), self.i_shift)

    def reduced_at_s(self, s: float) -> ReducedState:
        y = self.trajectory.refined_state(s)
        return ReducedState(y[0], y[1], y[2] - self.i_shift)

    @property
    def x_end(self) -> float:
        """Largest abscissa on the curve (x = 0 is always the other end)."""
        s_far = 0.0 if self.branch == "critical" else self.s_terminal
        return self.parametric_at_s(s_far)[0]

    def at_x(self, x_target: float) -> tuple[float, float]:
        """(u, u') at a given abscissa; x is monotone in s on the curve."""
        if x_target < 0.0:
            raise NotAttained(f"x={x_target!r} negative")
        if x_target == 0.0:
            return 1.0, self.slope
        s_zero_end = self.s_terminal if self.branch == "critical" else 0.0
        s_far_end = 0.0 if self.branch == "critical" else self.s_terminal
        x_far = self.parametric_at_s(s_far_end)[0]
        if x_target > x_far:
            raise NotAttained(f"x={x_target!r} beyond the computed range {x_far!r}")
        lo, hi = (s_zero_end, s_far_end) if s_zero_end < s_far_end else (s_far_end, s_zero_end)
        increasing = self.parametric_at_s(hi)[0] > self.parametric_at_s(lo)[0]
        for _ in range(90):
            mid = 0.5 * (lo + hi)
            x_mid = self.parametric_at_s(mid)[0]
            if (x_mid < x_target) == increasing:
                lo = mid
            else:
                hi = mid
        _, u, uprime = self.parametric_at_s(0.5 * (lo + hi))
        return u, uprime

    def parametric_nodes(self) -> np.ndarray:
        """Rows (x, u, u') at the trajectory nodes, ascending in x."""
        rows = []
        for s, y in zip(self.trajectory.s_nodes, self.trajectory.states):
            if s > self.s_terminal:
                break
            rows.append(_parametric(y, self.i_shift))
        rows.append(_parametric(self.terminal_state, self.i_shift))
        rows.sort(key=lambda r: r[0])
        return np.asarray(rows)


def evaluate_at_x(sol: TFSolution, x_target: float) -> tuple[float, float]:
    """(u, u') of a solution at the requested abscissa."""
    return sol.at_x(x_target)


def critical_solution(
    ctrl: StepControl | None = None, epsilon: float = 1e-3
) -> TFSolution:
    """The decaying solution as a parametric curve from the unstable seed.

    The reduced field is extended by the quadrature I' = -t v; after the
    t = 0 event at s0 the integral is rebased so I(s0) = 0, which makes
    u(0) = 1 exact by construction.
    """
    ctrl = ctrl or CRITICAL_CONTROL
    field = quadrature_extend(reduced_field(), lambda y: -y[0] * y[1])
    seed = [*saddle_seed(epsilon, direction=-1), 0.0]
    traj, s0, y_end = integrate_until(field, seed, ctrl, _t_zero_event(), 100.0)
    return TFSolution(
        trajectory=traj,
        i_shift=float(y_end[2]),
        branch="critical",
        v0=None,
        s_terminal=s0,
        terminal_state=(float(y_end[0]), float(y_end[1]), float(y_end[2])),
        epsilon=epsilon,
        rel_tol=ctrl.rel_tol,
        abs_tol=ctrl.abs_tol,
    )


def _reversed_family_field() -> AutonomousField:
    def rhs(y: Sequence[float]) -> tuple[float, float, float]:
        t, v = y[0], y[1]
        return (1.0 - t * t * v, 8.0 * (t * v * v - 1.0), t * v)

    return AutonomousField(3, rhs)


def _x_of_state(y: Sequence[float]) -> float:
    return CBRT144 * y[0] * y[0] * math.exp(2.0 * y[2])


def _family_run(
    v0: float,
    ctrl: StepControl,
    events: Sequence[EventSpec],
    s_max: float,
) -> tuple[Trajectory, EventHit | None]:
    field = _reversed_family_field()
    return integrate_with_events(field, [0.0, v0, 0.0], (0.0, s_max), ctrl, events)


def _family_solution(
    v0: float,
    traj: Trajectory,
    hit: EventHit | None,
    ctrl: StepControl,
    labels: Sequence[str] = (),
) -> TFSolution:
    if hit is not None:
        s_term, y_term = hit.s, tuple(hit.state)
        label = labels[hit.index] if hit.index < len(labels) else "event"
    else:
        s_term = traj.span[1]
        y_term = tuple(traj.states[-1])
        label = "s_max"
    return TFSolution(
        trajectory=traj,
        i_shift=0.0,
        branch="slope_family",
        v0=v0,
        s_terminal=s_term,
        terminal_state=(float(y_term[0]), float(y_term[1]), float(y_term[2])),
        epsilon=None,
        rel_tol=ctrl.rel_tol,
        abs_tol=ctrl.abs_tol,
        termination=label,
    )


def solution_with_slope(
    v0: float,
    ctrl: StepControl | None = None,
    u_floor: float = U_FLOOR_DEFAULT,
    x_max: float = 1e3,
    s_max: float = 60.0,
    u_ceiling: float = 1e8,
) -> TFSolution:
    """Curve with initial data u(0) = 1, u'(0) = -(3/16)^{1/3} v0.

    Integrates the reversed reduced field from (t, v, I) = (0, v0, 0).
    Terminates when u falls to u_floor (decaying curves reach u = 0 only
    asymptotically), when x exceeds x_max, or when u grows past
    u_ceiling: curves below the critical slope blow up at a finite
    abscissa, where x stalls under x_max while u diverges.
    """
    ctrl = ctrl or FAMILY_CONTROL
    i_cap = -math.log(u_ceiling) / 6.0
    events = (
        _u_floor_event(u_floor),
        EventSpec(
            lambda y: _x_of_state(y) - x_max,
            direction="rising",
            terminal=True,
            root_tol=1e-3,
        ),
        EventSpec(
            lambda y: y[2] - i_cap, direction="falling", terminal=True, root_tol=1e-6
        ),
    )
    traj, hit = _family_run(v0, ctrl, events, s_max)
    return _family_solution(v0, traj, hit, ctrl, ("u_floor", "x_max", "u_ceiling"))


def _u_floor_event(u_floor: float) -> EventSpec:
    # v blows up in finite s as u -> 0, so the integral accumulates at a
    # rate ~1e8 there and float spacing in s floors |g| near 1e-8; a loose
    # root_tol on I still pins the abscissa far below any zero tolerance
    # (|g| = 1e-6 shifts the located zero by ~1e-11).
    i_stop = -math.log(u_floor) / 6.0
    return EventSpec(
        lambda y: y[2] - i_stop, direction="rising", terminal=True, root_tol=1e-6
    )


def _ion_zero(v0: float, ctrl: StepControl, u_floor: float, s_max: float) -> float:
    """Abscissa where the slope-v0 curve meets u = 0 (threshold located).

    Returns inf when the curve leaves x_max-range before decaying, which
    the bisection reads as "zero lies further out than any finite target".
    """
    events = (
        _u_floor_event(u_floor),
        EventSpec(
            lambda y: _x_of_state(y) - 5e4,
            direction="rising",
            terminal=True,
            root_tol=1e-3,
        ),
    )
    traj, hit = _family_run(v0, ctrl, events, s_max)
    if hit is None or hit.index != 0:
        return math.inf
    x, u, uprime = _parametric(hit.state, 0.0)
    # one Newton step along the graph from the threshold to the zero
    if uprime < 0.0:
        return x - u / uprime
    return x


def solve_bc_ion(
    a: float,
    tol: float = 1e-6,
    ctrl: StepControl | None = None,
    u_floor: float = U_FLOOR_DEFAULT,
    s_max: float = 60.0,
) -> TFSolution:
    """Solution with u(0) = 1 and u(a) = 0, by bisection on the slope.

    The located zero moves monotonically (larger v0, steeper decay,
    smaller zero), so a bracket around the critical slope pins it.
    """
    if not 0.0 < a <= 27.0:
        raise ValueError(f"need 0 < a <= 27, got {a!r}")
    ctrl = ctrl or FAMILY_CONTROL
    v_crit = critical_v0()

    def zero_of(v0: float) -> float:
        return _ion_zero(v0, ctrl, u_floor, s_max)

    lo, hi = v_crit + 1e-6, v_crit * 10.0
    for _ in range(4):
        if zero_of(hi) < a:
            break
        hi *= 10.0
    else:
        raise NoBracket(f"no slope steep enough for a={a!r}")
    for _ in range(4):
        if zero_of(lo) > a:
            break
        lo = v_crit + (lo - v_crit) * 0.1
    else:
        raise NoBracket(f"no slope shallow enough for a={a!r}")
    v_root = _bisect_to_target(zero_of, a, lo, hi, tol)
    traj, hit = _family_run(v_root, ctrl, (_u_floor_event(u_floor),), s_max)
    return _family_solution(v_root, traj, hit, ctrl, ("u_floor",))


def _crystal_locus(v0: float, ctrl: StepControl, s_max: float) -> tuple[float, EventHit | None, Trajectory]:
    """Abscissa where x u' = u holds, i.e. the curve meets 3 t^2 v = -1."""
    events = (
        EventSpec(
            lambda y: 3.0 * y[0] * y[0] * y[1] + 1.0,
            direction="falling",
            terminal=True,
            root_tol=1e-10,
        ),
        EventSpec(
            lambda y: _x_of_state(y) - 5e3,
            direction="rising",
            terminal=True,
            root_tol=1e-3,
        ),
    )
    traj, hit = _family_run(v0, ctrl, events, s_max)
    if hit is None or hit.index != 0:
        return math.inf, hit, traj
    return _x_of_state(hit.state), hit, traj


def solve_bc_crystal(
    b: float,
    tol: float = 1e-6,
    ctrl: StepControl | None = None,
    s_max: float = 60.0,
) -> TFSolution:
    """Solution with u(0) = 1 and b u'(b) = u(b), by bisection on the slope.

    Such curves pass through a positive minimum and grow; they exist for
    initial slopes above the critical one (v0 below critical).  The
    boundary locus is 3 t^2 v = -1 in the reduced plane.
    """
    if not 0.0 < b <= 30.0:
        raise ValueError(f"need 0 < b <= 30, got {b!r}")
    ctrl = ctrl or FAMILY_CONTROL
    v_crit = critical_v0()

    def locus_of(v0: float) -> float:
        return _crystal_locus(v0, ctrl, s_max)[0]

    lo, hi = v_crit * 0.1, v_crit - 1e-6
    for _ in range(4):
        if locus_of(hi) > b:
            break
        hi = v_crit - (v_crit - hi) * 0.1
    else:
        raise NoBracket(f"no slope close enough to critical for b={b!r}")
    for _ in range(4):
        if locus_of(lo) < b:
            break
        lo *= 0.1
    else:
        raise NoBracket(f"no slope far enough from critical for b={b!r}")
    v_root = _bisect_to_target(locus_of, b, lo, hi, tol)
    _, hit, traj = _crystal_locus(v_root, ctrl, s_max)
    return _family_solution(v_root, traj, hit, ctrl, ("boundary", "x_max"))


def _bisect_to_target(
    fn: Callable[[float], float],
    target: float,
    lo: float,
    hi: float,
    tol: float,
    max_iter: int = 200,
) -> float:
    """Bisection on a monotone map until |fn(v) - target| <= tol."""
    f_lo, f_hi = fn(lo), fn(hi)
    if abs(f_lo - target) <= tol:
        return lo
    if abs(f_hi - target) <= tol:
        return hi
    if (f_lo > target) == (f_hi > target):
        raise NoBracket(
            f"target {target!r} not between fn(lo)={f_lo!r} and fn(hi)={f_hi!r}"
        )
    above_at_lo = f_lo > target
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        f_mid = fn(mid)
        if abs(f_mid - target) <= tol:
            return mid
        if (f_mid > target) == above_at_lo:
            lo = mid
        else:
            hi = mid
    raise MaxIter(f"bisection exhausted without |fn - {target!r}| <= {tol!r}")


def stable_branch_curve(
    direction: int = -1,
    ctrl: StepControl | None = None,
    epsilon: float = 1e-3,
    s_max: float = 20.0,
    t_max: float = 3.0,
    v_max: float = 8.0,
) -> Trajectory:
    """Phase-portrait trace of one side of the saddle's stable manifold.

    Integrates the time-reversed reduced field from a displacement along
    the stable eigenvector.  Both sides leave every bounded window in
    finite time, so the trace stops at the window edge (t or |v| cap) or
    at t = 0.  Exploratory only: no reference values exist for this
    branch, so no accuracy is claimed.
    """
    if direction not in (-1, 1):
        raise ValueError("direction must be +1 or -1")
    ctrl = ctrl or FAMILY_CONTROL
    w = STABLE_EIGENVALUE - 2.0
    nrm = math.hypot(1.0, w)
    seed = [1.0 + direction * epsilon / nrm, 1.0 + direction * epsilon * w / nrm]
    base = reduced_field()

    def rhs(y: Sequence[float]) -> tuple[float, float]:
        ft, fv = base.rhs(y)
        return (-ft, -fv)

    events = (
        EventSpec(lambda y: y[0], direction="falling", terminal=True, root_tol=1e-9),
        EventSpec(
            lambda y: y[0] - t_max, direction="rising", terminal=True, root_tol=1e-6
        ),
        EventSpec(
            lambda y: abs(y[1]) - v_max,
            direction="rising",
            terminal=True,
            root_tol=1e-6,
        ),
    )
    traj, _ = integrate_with_events(
        AutonomousField(2, rhs), seed, (0.0, s_max), ctrl, events
    )
    return traj
