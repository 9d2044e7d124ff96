"""Desingularized vector fields and impasse-point analysis.

A second-order scalar problem g(x)u'' = f(x, u, u') is rewritten as the
autonomous field (x, u, u') -> (g, g*u', f).  Where g vanishes the explicit
form blows up, but the field is smooth; a point with g = 0 and f = 0 is a
stationary point of the field (a proper impasse point), and the smooth
solution through it is the one-dimensional unstable manifold.  With
delta = g'(x*) and gamma = f_{u'} at the point, nonzero and of opposite
sign, the stationary point is hyperbolic enough for a unique smooth
solution: the Jacobian spectrum is {delta, 0, gamma}.

Fully implicit equations F(x, u, u', u'') = 0 get the four-dimensional
field (F_{u''}, u'F_{u''}, u''F_{u''}, -F_x - u'F_u - u''F_{u'}), which is
tangent to the equation manifold, so F is a first integral along it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .integrator import AutonomousField

__all__ = [
    "SemiLinearProblem",
    "ImplicitProblem2",
    "FirstOrderSemiLinearSystem",
    "ImpasseAnalysis",
    "SingularityClass",
    "GeometryError",
    "NotOnEquation",
    "NotStationary",
    "NoUnstable",
    "MultipleUnstable",
    "NoUnstableDirection",
    "NonTransversal",
    "NOT_SINGULAR",
    "PROPER_IMPASSE",
    "IMPROPER_IMPASSE",
    "REGULAR_POINT",
    "REGULAR_SINGULARITY",
    "IRREGULAR_SINGULARITY",
    "projected_field",
    "vessiot_field_implicit",
    "projected_field_sys1",
    "classify_semilinear",
    "classify_implicit",
    "stationary_jacobian",
    "unstable_eigenpair",
    "unstable_seed",
]

ZERO_TOL = 1e-12


class GeometryError(Exception):
    """Base class for classification and seeding failures."""


class NotOnEquation(GeometryError):
    """The supplied point does not satisfy F = 0."""


class NotStationary(GeometryError):
    """Jacobian requested at a point where the field does not vanish."""


class NoUnstable(GeometryError):
    """No eigenvalue with positive real part."""


class MultipleUnstable(GeometryError):
    """More than one eigenvalue with positive real part."""


class NoUnstableDirection(GeometryError):
    """Analysis carries no unstable eigenpair to seed from."""


class NonTransversal(GeometryError):
    """Unstable eigenvector has no component along the base coordinate."""


NOT_SINGULAR = "not_singular"
PROPER_IMPASSE = "proper_impasse"
IMPROPER_IMPASSE = "improper_impasse"

REGULAR_POINT = "regular_point"
REGULAR_SINGULARITY = "regular_singularity"
IRREGULAR_SINGULARITY = "irregular_singularity"


@dataclass(frozen=True)
class SemiLinearProblem:
    """Scalar problem g(x) u'' = f(x, u, u').

    dg is the derivative of g and df_dup the slope partial of f; both are
    required analytically because the impasse test reads delta and gamma
    from them.  df_du is optional and only informs finite-difference checks.
    """

    g: Callable[[float], float]
    dg: Callable[[float], float]
    f: Callable[[float, float, float], float]
    df_dup: Callable[[float, float, float], float]
    df_du: Callable[[float, float, float], float] | None = None


@dataclass(frozen=True)
class ImplicitProblem2:
    """Fully implicit second-order equation F(x, u, u', u'') = 0."""

    F: Callable[[float, float, float, float], float]
    dF_dx: Callable[[float, float, float, float], float]
    dF_du: Callable[[float, float, float, float], float]
    dF_dup: Callable[[float, float, float, float], float]
    dF_dupp: Callable[[float, float, float, float], float]


@dataclass(frozen=True)
class FirstOrderSemiLinearSystem:
    """Vector problem g(x) u' = f(x, u) with u in R^dim."""

    dim: int
    g: Callable[[float], float]
    dg: Callable[[float], float]
    f_vec: Callable[[float, Sequence[float]], Sequence[float]]
    f_jac: Callable[[float, Sequence[float]], Sequence[Sequence[float]]] | None = None


@dataclass(frozen=True)
class ImpasseAnalysis:
    """Classification of a point of a semi-linear problem.

    delta = g'(x*), gamma = f_{u'} at the point.  unique_solution is true
    exactly when the point is a proper impasse with delta and gamma nonzero
    of opposite sign.  jacobian and the unstable eigenpair are filled only
    when the point is stationary and the pair exists.
    """

    point: tuple
    kind: str
    delta: float
    gamma: float
    jacobian: np.ndarray | None = None
    unstable_eigenvalue: float | None = None
    unstable_eigenvector: np.ndarray | None = None
    unique_solution: bool = False


@dataclass(frozen=True)
class SingularityClass:
    """Implicit-point classification with the two deciding coefficients.

    fiber_coefficient is F_{u''} at the point; companion is
    F_x + u'F_u + u''F_{u'}.  regular_singularity means the first vanishes
    and the second does not.
    """

    kind: str
    fiber_coefficient: float
    companion: float


def projected_field(problem: SemiLinearProblem) -> AutonomousField:
    """Autonomous field (x, u, u') -> (g, g*u', f) of the scalar problem."""
    g, f = problem.g, problem.f

    def rhs(y):
        gv = g(y[0])
        return (gv, gv * y[2], f(y[0], y[1], y[2]))

    return AutonomousField(3, rhs)


def vessiot_field_implicit(problem: ImplicitProblem2) -> AutonomousField:
    """Field on (x, u, u', u'') tangent to the manifold F = 0."""
    Fx, Fu = problem.dF_dx, problem.dF_du
    Fup, Fupp = problem.dF_dup, problem.dF_dupp

    def rhs(y):
        x, u, up, upp = y
        a = Fupp(x, u, up, upp)
        c = Fx(x, u, up, upp) + up * Fu(x, u, up, upp) + upp * Fup(x, u, up, upp)
        return (a, up * a, upp * a, -c)

    return AutonomousField(4, rhs)


def projected_field_sys1(problem: FirstOrderSemiLinearSystem) -> AutonomousField:
    """Autonomous field (x, u) -> (g, f_vec) of a first-order system."""
    g, f_vec = problem.g, problem.f_vec
    d = problem.dim

    def rhs(y):
        out = [g(y[0])]
        out.extend(f_vec(y[0], y[1:]))
        return out

    return AutonomousField(1 + d, rhs)


def _try_eval(fn, *args) -> float:
    try:
        v = fn(*args)
    except (ZeroDivisionError, ValueError, OverflowError):
        return math.nan
    return float(v)


def classify_semilinear(
    problem: SemiLinearProblem,
    point: Sequence[float],
    zero_tol: float = ZERO_TOL,
) -> ImpasseAnalysis:
    """Classify (x*, u0, u1) as not singular, proper or improper impasse.

    Proper means both g and f vanish there, so the whole derivative fiber
    of the implicit form lies on the equation and the projected field is
    stationary.  g = 0 with f != 0 leaves no point of the equation over
    (x*, u0, u1): improper, no solution reaches it smoothly.
    """
    x, u0, u1 = (float(point[0]), float(point[1]), float(point[2]))
    gv = problem.g(x)
    delta = _try_eval(problem.dg, x)
    gamma = _try_eval(problem.df_dup, x, u0, u1)
    if abs(gv) > zero_tol:
        return ImpasseAnalysis((x, u0, u1), NOT_SINGULAR, delta, gamma)
    fv = problem.f(x, u0, u1)
    if abs(fv) > zero_tol:
        return ImpasseAnalysis((x, u0, u1), IMPROPER_IMPASSE, delta, gamma)
    unique = (
        math.isfinite(delta)
        and math.isfinite(gamma)
        and abs(delta) > zero_tol
        and abs(gamma) > zero_tol
        and delta * gamma < 0.0
    )
    jac = None
    lam = None
    vec = None
    try:
        jac = stationary_jacobian(projected_field(problem), (x, u0, u1))
        lam, vec = unstable_eigenpair(jac)
    except GeometryError:
        pass
    return ImpasseAnalysis(
        (x, u0, u1),
        PROPER_IMPASSE,
        delta,
        gamma,
        jacobian=jac,
        unstable_eigenvalue=lam,
        unstable_eigenvector=vec,
        unique_solution=unique,
    )


def classify_implicit(
    problem: ImplicitProblem2,
    point: Sequence[float],
    zero_tol: float = ZERO_TOL,
    on_equation_tol: float = 1e-9,
) -> SingularityClass:
    """Classify a point of F = 0 as regular point or regular/irregular singularity."""
    x, u, up, upp = (float(v) for v in point)
    Fv = problem.F(x, u, up, upp)
    if abs(Fv) > on_equation_tol:
        raise NotOnEquation(f"|F(point)| = {abs(Fv):.3e} exceeds {on_equation_tol:.1e}")
    a = problem.dF_dupp(x, u, up, upp)
    c = (
        problem.dF_dx(x, u, up, upp)
        + up * problem.dF_du(x, u, up, upp)
        + upp * problem.dF_dup(x, u, up, upp)
    )
    if abs(a) > zero_tol:
        kind = REGULAR_POINT
    elif abs(c) > zero_tol:
        kind = REGULAR_SINGULARITY
    else:
        kind = IRREGULAR_SINGULARITY
    return SingularityClass(kind, float(a), float(c))


def stationary_jacobian(field: AutonomousField, point: Sequence[float]) -> np.ndarray:
    """Jacobian of the field at a stationary point.

    Uses the field's analytic jacobian when present, otherwise central
    finite differences with per-coordinate step 1e-6*(1+|coordinate|).
    """
    p = [float(v) for v in point]
    fv = field.rhs(p)
    nrm = math.sqrt(sum(v * v for v in fv))
    if nrm > 1e-9:
        raise NotStationary(f"|field(point)| = {nrm:.3e} exceeds 1e-9")
    n = field.dim
    if field.jacobian is not None:
        return np.asarray(field.jacobian(p), dtype=float)
    J = np.empty((n, n), dtype=float)
    for j in range(n):
        h = 1e-6 * (1.0 + abs(p[j]))
        hi = list(p)
        lo = list(p)
        hi[j] += h
        lo[j] -= h
        fhi = field.rhs(hi)
        flo = field.rhs(lo)
        for i in range(n):
            J[i, j] = (fhi[i] - flo[i]) / (2.0 * h)
    return J


def _eigenpair_2x2(J: np.ndarray) -> tuple[float, np.ndarray]:
    a, b = J[0, 0], J[0, 1]
    c, d = J[1, 0], J[1, 1]
    tr = a + d
    disc = tr * tr - 4.0 * (a * d - b * c)
    if disc < 0.0:
        # complex pair: either zero or two unstable eigenvalues
        if 0.5 * tr > 1e-10:
            raise MultipleUnstable("complex pair with positive real part")
        raise NoUnstable("complex pair with nonpositive real part")
    root = math.sqrt(disc)
    lam_hi = 0.5 * (tr + root)
    lam_lo = 0.5 * (tr - root)
    unstable = [lam for lam in (lam_hi, lam_lo) if lam > 1e-10]
    if not unstable:
        raise NoUnstable("no eigenvalue with real part above 1e-10")
    if len(unstable) > 1:
        raise MultipleUnstable("both eigenvalues positive")
    lam = unstable[0]
    # null vector of J - lam I from the better-conditioned row
    r1 = (a - lam, b)
    r2 = (c, d - lam)
    row = r1 if abs(r1[0]) + abs(r1[1]) >= abs(r2[0]) + abs(r2[1]) else r2
    v = np.array([-row[1], row[0]], dtype=float)
    return lam, v


def unstable_eigenpair(J: Sequence[Sequence[float]]) -> tuple[float, np.ndarray]:
    """The unique eigenvalue with positive real part and its eigenvector.

    The eigenvector is unit length with its first nonzero component
    positive, and the pair satisfies |J v - lam v| <= 1e-10 |v|.
    """
    A = np.asarray(J, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or n > 16:
        raise ValueError("need a square matrix of dimension <= 16")
    if n == 2:
        lam, v = _eigenpair_2x2(A)
    else:
        vals, vecs = np.linalg.eig(A)
        idx = [i for i in range(n) if vals[i].real > 1e-10]
        if not idx:
            raise NoUnstable("no eigenvalue with real part above 1e-10")
        if len(idx) > 1:
            raise MultipleUnstable(f"{len(idx)} eigenvalues with positive real part")
        i = idx[0]
        if abs(vals[i].imag) > 1e-10 * (1.0 + abs(vals[i].real)):
            raise NoUnstable("unstable eigenvalue is not real")
        lam = float(vals[i].real)
        v = np.real(vecs[:, i])
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        raise GeometryError("degenerate eigenvector")
    v = v / nv
    for comp in v:
        if comp != 0.0:
            if comp < 0.0:
                v = -v
            break
    res = float(np.linalg.norm(A @ v - lam * v))
    if res > 1e-10:
        raise GeometryError(f"eigenpair residual {res:.3e} exceeds 1e-10")
    return float(lam), v


def unstable_seed(
    analysis: ImpasseAnalysis, epsilon: float = 1e-3, direction: int = 1
) -> list[float]:
    """Start state displaced from the stationary point along the unstable ray.

    The eigenvector is normalized to unit length with positive component
    along the base coordinate, so the default direction moves toward
    increasing x (or t); direction=-1 selects the opposite branch.
    """
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    if analysis.unstable_eigenvalue is None or analysis.unstable_eigenvector is None:
        raise NoUnstableDirection("analysis carries no unstable eigenpair")
    v = np.asarray(analysis.unstable_eigenvector, dtype=float)
    v = v / float(np.linalg.norm(v))
    if abs(v[0]) <= 1e-12:
        raise NonTransversal("unstable eigenvector has zero base component")
    if v[0] < 0.0:
        v = -v
    point = np.asarray(analysis.point, dtype=float)
    return list(point + (direction * epsilon) * v)
