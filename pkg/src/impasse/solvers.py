"""Root finding and shooting drivers for the boundary value problems.

Scalar shooting uses a Steffensen iteration with Aitken acceleration; when
an intermediate guess leaves the domain where the residual makes sense
(signalled by ResidualUndefined) and a bracket is available, the driver
falls back to bisection, which only ever evaluates inside the bracket.
Vector shooting uses a damped Newton method whose Jacobian comes from
integrating the variational equation d(Phi)/ds = J(y(s))*Phi alongside the
state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .integrator import (
    AutonomousField,
    EventSpec,
    StepControl,
    integrate,
    integrate_until,
)

__all__ = [
    "ScalarRootProblem",
    "VectorRootProblem",
    "SolverError",
    "Diverged",
    "MaxIter",
    "ResidualUndefined",
    "NoBracket",
    "SingularJacobian",
    "steffensen",
    "bisection",
    "newton",
    "shoot_scalar",
    "variational_jacobian",
]


class SolverError(Exception):
    """Base class for solver failures."""


class Diverged(SolverError):
    """Iterates left any plausible neighbourhood of a root."""


class MaxIter(SolverError):
    """Iteration budget exhausted without meeting the tolerance."""


class ResidualUndefined(SolverError):
    """The residual cannot be evaluated at the requested point.

    Raised by residual callables themselves (e.g. a shooting residual whose
    trajectory blows up for a negative concentration guess); root finders
    let it propagate so the caller can switch strategy.
    """


class NoBracket(SolverError):
    """Bisection was given endpoints whose residuals share a sign."""


class SingularJacobian(SolverError):
    """Newton step could not be solved."""


@dataclass(frozen=True)
class ScalarRootProblem:
    residual: Callable[[float], float]
    x0: float = 0.5
    bracket: tuple[float, float] | None = None
    tol: float = 1e-10
    max_iter: int = 60

    def __post_init__(self) -> None:
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class VectorRootProblem:
    residual: Callable[[Sequence[float]], Sequence[float]]
    jacobian: Callable[[Sequence[float]], Sequence[Sequence[float]]]
    x0: Sequence[float] = ()
    tol: float = 1e-10
    max_iter: int = 40

    def __post_init__(self) -> None:
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")


def _checked(residual, x) -> float:
    r = residual(x)
    if not math.isfinite(r):
        raise ResidualUndefined(f"residual({x!r}) is not finite")
    return r


def steffensen(p: ScalarRootProblem) -> float:
    """Derivative-free quadratic iteration x -> x - r(x)^2 / (r(x+r(x)) - r(x)).

    Aitken delta-squared extrapolation is applied to the iterate sequence
    every third step.  Stops when |residual| <= tol.
    """
    x = float(p.x0)
    scale = 1.0 + abs(x)
    window: list[float] = [x]
    for _ in range(p.max_iter):
        r = _checked(p.residual, x)
        if abs(r) <= p.tol:
            return x
        probe = _checked(p.residual, x + r)
        denom = probe - r
        if denom == 0.0:
            raise Diverged(f"flat residual near x={x!r}")
        x = x - r * r / denom
        if not math.isfinite(x) or abs(x) > 1e12 * scale:
            raise Diverged(f"iterates unbounded (x={x!r})")
        window.append(x)
        if len(window) == 3:
            d1 = window[1] - window[0]
            d2 = window[2] - 2.0 * window[1] + window[0]
            if d2 != 0.0:
                acc = window[0] - d1 * d1 / d2
                if math.isfinite(acc):
                    x = acc
            window = [x]
    if abs(_checked(p.residual, x)) <= p.tol:
        return x
    raise MaxIter(f"no root within {p.max_iter} Steffensen iterations")


def bisection(p: ScalarRootProblem) -> float:
    """Bracket halving until the bracket is narrower than tol."""
    if p.bracket is None:
        raise NoBracket("bisection requires a bracket")
    lo, hi = (float(p.bracket[0]), float(p.bracket[1]))
    if lo > hi:
        lo, hi = hi, lo
    r_lo = _checked(p.residual, lo)
    if r_lo == 0.0:
        return lo
    r_hi = _checked(p.residual, hi)
    if r_hi == 0.0:
        return hi
    if (r_lo < 0.0) == (r_hi < 0.0):
        raise NoBracket(f"no sign change on [{lo!r}, {hi!r}]")
    neg_lo = r_lo < 0.0
    while hi - lo > p.tol:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        r_mid = _checked(p.residual, mid)
        if r_mid == 0.0:
            return mid
        if (r_mid < 0.0) == neg_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def newton(p: VectorRootProblem) -> np.ndarray:
    """Damped Newton iteration; stops when the max-norm residual meets tol."""
    x = np.asarray(p.x0, dtype=float).copy()
    r = np.asarray(p.residual(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise ResidualUndefined("residual not finite at the initial guess")
    nrm = float(np.max(np.abs(r))) if r.size else 0.0
    for _ in range(p.max_iter):
        if nrm <= p.tol:
            return x
        J = np.asarray(p.jacobian(x), dtype=float)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from exc
        if not np.all(np.isfinite(step)):
            raise SingularJacobian("non-finite Newton step")
        lam = 1.0
        for _halve in range(9):
            x_new = x + lam * step
            r_new = np.asarray(p.residual(x_new), dtype=float)
            if np.all(np.isfinite(r_new)):
                nrm_new = float(np.max(np.abs(r_new)))
                if nrm_new < nrm or nrm_new <= p.tol:
                    break
            lam *= 0.5
        else:
            raise Diverged(f"no residual decrease from |R|={nrm:.3e}")
        x, r, nrm = x_new, r_new, nrm_new
    if nrm <= p.tol:
        return x
    raise MaxIter(f"|R|={nrm:.3e} after {p.max_iter} Newton iterations")


def shoot_scalar(
    ivp_solver: Callable[[float], tuple[float, float]],
    bc: tuple[float, float, float],
    method: str = "steffensen",
    tol: float = 1e-7,
    x0: float = 0.5,
    bracket: tuple[float, float] | None = None,
    max_iter: int = 60,
) -> float:
    """Scalar shooting on the center value against alpha*u(1)+beta*u'(1)=gamma.

    ivp_solver maps a center-value guess to the boundary pair (u(1), u'(1)).
    With method="steffensen" and a bracket supplied, a guess for which the
    trajectory cannot be evaluated triggers an automatic bisection fallback.
    The bisection path itself iterates until the boundary residual (not just
    the bracket width) meets tol.
    """
    alpha, beta, gamma = bc
    if alpha == 0.0 and beta == 0.0:
        raise ValueError("bc weights alpha, beta must not both vanish")

    def residual(u0: float) -> float:
        u1, up1 = ivp_solver(u0)
        return alpha * u1 + beta * up1 - gamma

    if method == "steffensen":
        try:
            return steffensen(
                ScalarRootProblem(residual, x0=x0, tol=tol, max_iter=max_iter)
            )
        except ResidualUndefined:
            if bracket is None:
                raise
    elif method != "bisection":
        raise ValueError("method must be 'steffensen' or 'bisection'")
    if bracket is None:
        raise NoBracket(f"method {method!r} requires a bracket")

    lo, hi = (float(bracket[0]), float(bracket[1]))
    r_lo = _checked(residual, lo)
    if abs(r_lo) <= tol:
        return lo
    r_hi = _checked(residual, hi)
    if abs(r_hi) <= tol:
        return hi
    if (r_lo < 0.0) == (r_hi < 0.0):
        raise NoBracket(f"no sign change on [{lo!r}, {hi!r}]")
    neg_lo = r_lo < 0.0
    mid = 0.5 * (lo + hi)
    while True:
        r_mid = _checked(residual, mid)
        if abs(r_mid) <= tol:
            return mid
        if (r_mid < 0.0) == neg_lo:
            lo = mid
        else:
            hi = mid
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
    # bracket exhausted at float resolution; report the better endpoint
    raise MaxIter(
        f"residual {min(abs(r_lo), abs(r_hi)):.3e} still above {tol:.1e} "
        "at float-resolution bracket"
    )


def _fd_columns(fn, x, out_len: int) -> np.ndarray:
    """Central finite-difference Jacobian of an algebraic map."""
    x = np.asarray(x, dtype=float)
    k = x.size
    J = np.empty((out_len, k), dtype=float)
    for j in range(k):
        h = 1e-6 * (1.0 + abs(float(x[j])))
        hi = x.copy()
        lo = x.copy()
        hi[j] += h
        lo[j] -= h
        f_hi = np.asarray(fn(hi), dtype=float)
        f_lo = np.asarray(fn(lo), dtype=float)
        J[:, j] = (f_hi - f_lo) / (2.0 * h)
    return J


def variational_jacobian(
    field: AutonomousField,
    field_u_jacobian: Callable[[Sequence[float]], Sequence[Sequence[float]]],
    seed_map: Callable[[Sequence[float]], Sequence[float]],
    stop: EventSpec | float,
    boundary_map: Callable[[Sequence[float]], Sequence[float]],
    ctrl: StepControl | None = None,
) -> tuple[Callable, Callable]:
    """Residual and Jacobian of a shooting map, by variational integration.

    The unknown vector p seeds the state through seed_map; the flow runs to
    a fixed endpoint s or to an event; boundary_map turns the final state
    into the residual.  jacobian_fn integrates the dim x k sensitivity
    Phi alongside the state, starting from d(seed)/dp, and chains through
    the derivative of boundary_map.  When the stop is an event, the shift
    of the hitting time with p is accounted for:
    ds*/dp = -(grad g . Phi) / (grad g . ydot).
    """
    dim = field.dim
    ctrl = ctrl or StepControl()

    def final_state(p) -> np.ndarray:
        y0 = list(seed_map(p))
        if isinstance(stop, EventSpec):
            _, _, y_end = integrate_until(field, y0, ctrl, stop, math.inf)
            return np.asarray(y_end, dtype=float)
        traj = integrate(field, y0, (0.0, float(stop)), ctrl)
        return np.asarray(traj.states[-1], dtype=float)

    def residual_fn(p) -> np.ndarray:
        return np.asarray(boundary_map(final_state(p)), dtype=float)

    def jacobian_fn(p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        k = p.size
        y0 = [float(v) for v in seed_map(p)]
        r_len = np.asarray(boundary_map(y0), dtype=float).size
        if k == 0:
            return np.zeros((r_len, 0))
        phi0 = _fd_columns(seed_map, p, dim)

        def aug_rhs(z):
            y = z[:dim]
            f = field.rhs(y)
            J = field_u_jacobian(y)
            # Phi is stored row-major after the state: z[dim + i*k + j]
            out = list(f)
            for i in range(dim):
                Ji = J[i]
                for j in range(k):
                    acc = 0.0
                    for l in range(dim):
                        acc += Ji[l] * z[dim + l * k + j]
                    out.append(acc)
            return out

        z0 = y0 + [float(phi0[i, j]) for i in range(dim) for j in range(k)]
        aug = AutonomousField(dim + dim * k, aug_rhs)
        if isinstance(stop, EventSpec):
            ev = EventSpec(
                lambda z: stop.event_fn(z[:dim]),
                direction=stop.direction,
                terminal=True,
                root_tol=stop.root_tol,
            )
            _, _, z_end = integrate_until(aug, z0, ctrl, ev, math.inf)
        else:
            traj = integrate(aug, z0, (0.0, float(stop)), ctrl)
            z_end = traj.states[-1]
        y_end = [float(v) for v in z_end[:dim]]
        phi = np.asarray(z_end[dim:], dtype=float).reshape(dim, k)
        if isinstance(stop, EventSpec):
            ydot = np.asarray(field.rhs(y_end), dtype=float)
            grad_g = _fd_columns(
                lambda y: (stop.event_fn(y),), np.asarray(y_end), 1
            )[0]
            denom = float(grad_g @ ydot)
            if denom == 0.0:
                raise Diverged("event is tangential; hitting time not differentiable")
            ds_dp = -(grad_g @ phi) / denom
            phi = phi + np.outer(ydot, ds_dp)
        B = _fd_columns(boundary_map, np.asarray(y_end), r_len)
        return B @ phi

    return residual_fn, jacobian_fn
