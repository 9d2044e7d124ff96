"""Singular ODE initial and boundary value problems via desingularized fields.

Second-order problems whose leading coefficient vanishes at an endpoint are
rewritten as autonomous first-order fields on which the troublesome point
becomes an ordinary stationary point.  The solution through it is the
one-dimensional unstable manifold, so integrating from a point displaced
slightly along the unstable eigenvector yields the smooth solution without
any series patching at the singularity.
"""
from __future__ import annotations

from .geometry import (
    GeometryError,
    ImpasseAnalysis,
    SemiLinearProblem,
    classify_semilinear,
    stationary_jacobian,
    unstable_eigenpair,
    unstable_seed,
)
from .integrator import (
    AutonomousField,
    EventHit,
    EventNotFound,
    EventSpec,
    IntegrationError,
    MaxStepsExceeded,
    NonFiniteState,
    NotAttained,
    OutOfSpan,
    StepControl,
    StepUnderflow,
    Trajectory,
    eval_dense,
    integrate,
    integrate_until,
    integrate_until_any,
    integrate_with_events,
    invert_component,
    quadrature_extend,
)
from .lane_emden import (
    BiocatalystModel,
    CatalystSystemModel,
    LaneEmdenModel,
    OxygenModel,
    ParametricSolution,
    PolytropeModel,
    effectiveness_factor,
    effectiveness_surface,
    first_zero,
    le_bvp,
    le_ivp,
    le_system_bvp,
    oxygen_bvp,
)
from .solvers import (
    ScalarRootProblem,
    SolverError,
    VectorRootProblem,
    bisection,
    newton,
    shoot_scalar,
    steffensen,
    variational_jacobian,
)
from .thomas_fermi import (
    MajoranaSeries,
    TFSolution,
    critical_slope,
    critical_solution,
    evaluate_at_x,
    majorana_coeffs,
    majorana_forward,
    slope_from_series,
    solution_with_slope,
    solve_bc_crystal,
    solve_bc_ion,
)

__version__ = "0.1.0"
