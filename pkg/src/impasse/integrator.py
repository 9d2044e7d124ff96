"""Adaptive embedded Runge-Kutta integration for autonomous vector fields.

The stepper is the classical Fehlberg 4(5) pair.  The error estimate is the
difference between the fourth- and fifth-order results and the fifth-order
state is the one propagated.  Step size follows

    h_new = h * min(5, max(0.2, 0.9 * (tol/err)^(1/5)))

Dense output is a per-step quartic built from the endpoint states and
derivatives plus one internal stage evaluation at the step midpoint; it is
constructed lazily because most steps are never interpolated.  Events are
located by sign change at the step nodes, bisection on the dense output,
and a final polish that re-integrates a partial step from the left node
(fifth-order accurate, below the interpolant's error floor).

States cross the public boundary as numpy arrays; the hot loop works on
plain float lists, which on one core is several times faster for the small
dimensions this package uses.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "AutonomousField",
    "StepControl",
    "EventSpec",
    "Trajectory",
    "IntegrationError",
    "StepUnderflow",
    "MaxStepsExceeded",
    "NonFiniteState",
    "EventNotFound",
    "OutOfSpan",
    "NotAttained",
    "integrate",
    "integrate_until",
    "integrate_until_any",
    "eval_dense",
    "invert_component",
    "quadrature_extend",
]


class IntegrationError(Exception):
    """Base class for integrator failures."""


class StepUnderflow(IntegrationError):
    """Error control pushed the step size below h_min."""


class MaxStepsExceeded(IntegrationError):
    """Step budget exhausted before reaching the end of the span."""


class NonFiniteState(IntegrationError):
    """A state or error estimate stopped being finite; blow-up is not retried."""


class EventNotFound(IntegrationError):
    """No qualifying sign change before the end of the span."""


class OutOfSpan(IntegrationError):
    """Dense evaluation requested outside the integrated span."""


class NotAttained(IntegrationError):
    """A requested component value is never reached along the trajectory."""


@dataclass(frozen=True)
class AutonomousField:
    """A vector field y' = rhs(y) on R^dim with no explicit flow parameter.

    rhs takes an indexable of dim floats and returns dim floats.  jacobian,
    when present, returns the dim x dim derivative and is used instead of
    finite differences by stationary-point analysis and variational runs.
    """

    dim: int
    rhs: Callable[[Sequence[float]], Sequence[float]]
    jacobian: Callable[[Sequence[float]], Sequence[Sequence[float]]] | None = None

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("field dimension must be >= 1")


@dataclass(frozen=True)
class StepControl:
    """Error-control parameters.  err <= max(abs_tol, rel_tol*|y|) per component."""

    rel_tol: float = 1e-6
    abs_tol: float = 1e-7
    h_init: float = 1e-3
    h_min: float = 1e-13
    h_max: float = 1.0
    max_steps: int = 200_000

    def __post_init__(self) -> None:
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise ValueError("tolerances must be positive")
        if not (0.0 < self.h_min <= self.h_init <= self.h_max):
            raise ValueError("need 0 < h_min <= h_init <= h_max")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class EventSpec:
    """Scalar event g(y) = 0 detected along the flow.

    direction restricts the sign change: "rising" fires on - to +,
    "falling" on + to -, "any" on both.  terminal stops the integration at
    the first hit; otherwise the hit is recorded and the run continues.
    root_tol bounds |g| at the reported event state.  A start point with
    |g(y0)| <= root_tol is treated as already at the event and does not
    re-trigger until g leaves that band.
    """

    event_fn: Callable[[Sequence[float]], float]
    direction: str = "any"
    terminal: bool = True
    root_tol: float = 1e-12

    def __post_init__(self) -> None:
        if self.direction not in ("any", "rising", "falling"):
            raise ValueError("direction must be 'any', 'rising' or 'falling'")
        if not self.root_tol > 0.0:
            raise ValueError("root_tol must be positive")


# Fehlberg 4(5) tableau.  Stage abscissae 0, 1/4, 3/8, 12/13, 1, 1/2.
_A21 = 1.0 / 4.0
_A31, _A32 = 3.0 / 32.0, 9.0 / 32.0
_A41, _A42, _A43 = 1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0
_A51, _A52, _A53, _A54 = 439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0
_A61, _A62, _A63, _A64, _A65 = (
    -8.0 / 27.0,
    2.0,
    -3544.0 / 2565.0,
    1859.0 / 4104.0,
    -11.0 / 40.0,
)
_B1, _B3, _B4, _B5, _B6 = (
    16.0 / 135.0,
    6656.0 / 12825.0,
    28561.0 / 56430.0,
    -9.0 / 50.0,
    2.0 / 55.0,
)
# error weights: fifth-order minus fourth-order row
_E1 = _B1 - 25.0 / 216.0
_E3 = _B3 - 1408.0 / 2565.0
_E4 = _B4 - 2197.0 / 4104.0
_E5 = _B5 + 1.0 / 5.0
_E6 = _B6


def _rk_step(rhs, y, k1, h, dim):
    """One 4(5) step from y with derivative k1.  Returns (y5, err, k6_state)."""
    r = range(dim)
    t = h * _A21
    k2 = rhs([y[j] + t * k1[j] for j in r])
    t1, t2 = h * _A31, h * _A32
    k3 = rhs([y[j] + (t1 * k1[j] + t2 * k2[j]) for j in r])
    t1, t2, t3 = h * _A41, h * _A42, h * _A43
    k4 = rhs([y[j] + (t1 * k1[j] + t2 * k2[j] + t3 * k3[j]) for j in r])
    t1, t2, t3, t4 = h * _A51, h * _A52, h * _A53, h * _A54
    k5 = rhs([y[j] + (t1 * k1[j] + t2 * k2[j] + t3 * k3[j] + t4 * k4[j]) for j in r])
    t1, t2, t3, t4, t5 = h * _A61, h * _A62, h * _A63, h * _A64, h * _A65
    k6 = rhs(
        [y[j] + (t1 * k1[j] + t2 * k2[j] + t3 * k3[j] + t4 * k4[j] + t5 * k5[j]) for j in r]
    )
    y1 = [
        y[j] + h * (_B1 * k1[j] + _B3 * k3[j] + _B4 * k4[j] + _B5 * k5[j] + _B6 * k6[j])
        for j in r
    ]
    err = [
        h * (_E1 * k1[j] + _E3 * k3[j] + _E4 * k4[j] + _E5 * k5[j] + _E6 * k6[j])
        for j in r
    ]
    return y1, err


class Trajectory:
    """Result of one integration: strictly increasing nodes plus dense output.

    Nodes store (s, state, rhs(state)).  eval(s) returns the quartic
    interpolant value, exact at the nodes.  refined_state(s) re-integrates a
    partial step from the enclosing node and is one order more accurate than
    the interpolant; use it when a headline scalar depends on the value.
    """

    __slots__ = ("_field", "_s", "_y", "_f", "_coeffs")

    def __init__(self, field: AutonomousField, s_nodes, states, rhs_nodes):
        self._field = field
        self._s = s_nodes
        self._y = states
        self._f = rhs_nodes
        self._coeffs: list = [None] * (len(s_nodes) - 1)

    # -- basic accessors -------------------------------------------------
    @property
    def field(self) -> AutonomousField:
        return self._field

    @property
    def dim(self) -> int:
        return self._field.dim

    @property
    def span(self) -> tuple[float, float]:
        return (self._s[0], self._s[-1])

    @property
    def n_steps(self) -> int:
        return len(self._s) - 1

    @property
    def s_nodes(self) -> np.ndarray:
        return np.asarray(self._s, dtype=float)

    @property
    def states(self) -> np.ndarray:
        return np.asarray(self._y, dtype=float)

    @property
    def rhs_nodes(self) -> np.ndarray:
        return np.asarray(self._f, dtype=float)

    # -- dense output ----------------------------------------------------
    def _step_index(self, s: float) -> int:
        s0, s1 = self._s[0], self._s[-1]
        slack = 1e-12 * (abs(s0) + abs(s1) + 1.0)
        if s < s0 - slack or s > s1 + slack:
            raise OutOfSpan(f"s={s!r} outside [{s0!r}, {s1!r}]")
        i = bisect_right(self._s, s) - 1
        return min(max(i, 0), len(self._s) - 2)

    def _coeffs_for(self, i: int):
        c = self._coeffs[i]
        if c is None:
            c = self._build_coeffs(i)
            self._coeffs[i] = c
        return c

    def _build_coeffs(self, i: int):
        # Quartic with p(0)=y0, p'(0)=h f0, p(1)=y1, p'(1)=h f1 and the
        # midpoint value from a genuine half step of the same scheme, so the
        # interpolant error matches the order of the nodes.  A midpoint
        # derivative cannot be used instead: p'(1/2) of a quartic is already
        # determined by the endpoint data.
        y0, y1 = self._y[i], self._y[i + 1]
        f0, f1 = self._f[i], self._f[i + 1]
        h = self._s[i + 1] - self._s[i]
        dim = len(y0)
        ymid_v, _ = _rk_step(self._field.rhs, y0, f0, 0.5 * h, dim)
        out = []
        for j in range(dim):
            c0 = y0[j]
            c1 = h * f0[j]
            d1 = ymid_v[j] - c0 - 0.5 * c1
            d2 = y1[j] - c0 - c1
            d3 = h * f1[j] - c1
            out.append(
                (
                    c0,
                    c1,
                    16.0 * d1 - 5.0 * d2 + d3,
                    -32.0 * d1 + 14.0 * d2 - 3.0 * d3,
                    16.0 * d1 - 8.0 * d2 + 2.0 * d3,
                )
            )
        return out

    def _eval_list(self, s: float) -> list[float]:
        i = self._step_index(s)
        if s == self._s[i]:
            return list(self._y[i])
        if s == self._s[i + 1]:
            return list(self._y[i + 1])
        th = (s - self._s[i]) / (self._s[i + 1] - self._s[i])
        return [
            c0 + th * (c1 + th * (c2 + th * (c3 + th * c4)))
            for (c0, c1, c2, c3, c4) in self._coeffs_for(i)
        ]

    def eval(self, s: float) -> np.ndarray:
        return np.asarray(self._eval_list(s), dtype=float)

    def eval_component(self, s: float, j: int) -> float:
        i = self._step_index(s)
        if s == self._s[i]:
            return self._y[i][j]
        if s == self._s[i + 1]:
            return self._y[i + 1][j]
        th = (s - self._s[i]) / (self._s[i + 1] - self._s[i])
        c0, c1, c2, c3, c4 = self._coeffs_for(i)[j]
        return c0 + th * (c1 + th * (c2 + th * (c3 + th * c4)))

    def derivative(self, s: float) -> np.ndarray:
        """d(state)/ds from the interpolant (independent of the field rhs)."""
        i = self._step_index(s)
        h = self._s[i + 1] - self._s[i]
        th = (s - self._s[i]) / h
        out = [
            (c1 + th * (2.0 * c2 + th * (3.0 * c3 + th * 4.0 * c4))) / h
            for (_, c1, c2, c3, c4) in self._coeffs_for(i)
        ]
        return np.asarray(out, dtype=float)

    def refined_state(self, s: float) -> list[float]:
        """State at s from a partial RK step off the enclosing left node."""
        i = self._step_index(s)
        if s == self._s[i]:
            return list(self._y[i])
        if s == self._s[i + 1]:
            return list(self._y[i + 1])
        h = s - self._s[i]
        y1, _ = _rk_step(self._field.rhs, self._y[i], self._f[i], h, self.dim)
        return y1

    def invert_component(self, component: int, target: float) -> float:
        """Smallest s at which the given state component equals target."""
        ys = self._y
        v0 = ys[0][component] - target
        if v0 == 0.0:
            return self._s[0]
        for i in range(len(self._s) - 1):
            v1 = ys[i + 1][component] - target
            if v1 == 0.0:
                return self._s[i + 1]
            if (v0 < 0.0) != (v1 < 0.0):
                return self._bisect_component(i, component, target, v0)
            v0 = v1
        raise NotAttained(
            f"component {component} never reaches {target!r} on {self.span}"
        )

    def _bisect_component(self, i, component, target, v_lo) -> float:
        lo, hi = self._s[i], self._s[i + 1]
        neg_lo = v_lo < 0.0
        for _ in range(90):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            vm = self.eval_component(mid, component) - target
            if vm == 0.0:
                return mid
            if (vm < 0.0) == neg_lo:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


@dataclass(frozen=True)
class EventHit:
    """One located event: which spec fired, where, and the state there."""

    index: int
    s: float
    state: list[float]


_UNARMED = object()


def _locate_event(traj: Trajectory, step: int, spec: EventSpec, g_lo: float, g_hi: float):
    """Localize a sign change inside one step; polish on refined states.

    The interpolant bisection only seeds the polish: its root can sit a
    few interpolation errors away from the refined-state root, so the
    secant keeps the whole step as its bracket (node states are exact).
    """
    gfn = spec.event_fn
    s_lo, s_hi = traj._s[step], traj._s[step + 1]
    if g_hi == 0.0:
        return s_hi, list(traj._y[step + 1])
    neg_lo = g_lo < 0.0
    lo, hi = s_lo, s_hi
    for _ in range(20):
        mid = 0.5 * (lo + hi)
        gm = gfn(traj._eval_list(mid))
        if gm == 0.0:
            lo = hi = mid
            break
        if (gm < 0.0) == neg_lo:
            lo = mid
        else:
            hi = mid
    blo, bhi = s_lo, s_hi
    s = 0.5 * (lo + hi)
    state = traj.refined_state(s)
    g = gfn(state)
    s_prev, g_prev = blo, g_lo
    best_s, best_state, best_g = s, state, abs(g)
    for _ in range(80):
        if abs(g) <= spec.root_tol:
            return s, state
        if (g < 0.0) == neg_lo:
            blo = s
        else:
            bhi = s
        if g != g_prev and math.isfinite(g) and math.isfinite(g_prev):
            s_new = s - g * (s - s_prev) / (g - g_prev)
        else:
            s_new = math.nan
        if not (blo < s_new < bhi):
            s_new = 0.5 * (blo + bhi)
            if s_new <= blo or s_new >= bhi:
                break
        s_prev, g_prev = s, g
        s = s_new
        state = traj.refined_state(s)
        g = gfn(state)
        if abs(g) < best_g:
            best_s, best_state, best_g = s, state, abs(g)
    if best_g <= spec.root_tol:
        return best_s, best_state
    raise EventNotFound(
        f"event localized but |g|={best_g:.3e} exceeds root_tol={spec.root_tol:.3e}"
    )


def _run(field, y0, s0, s_end, ctrl, events):
    if s_end <= s0:
        raise ValueError("span must be increasing: s_end > s0")
    dim = field.dim
    y = list(map(float, y0))
    if len(y) != dim:
        raise ValueError(f"state has length {len(y)}, field.dim is {dim}")
    for v in y:
        if not math.isfinite(v):
            raise NonFiniteState("initial state is not finite")
    rhs = field.rhs
    rel, atol = ctrl.rel_tol, ctrl.abs_tol
    h_min, h_max, max_steps = ctrl.h_min, ctrl.h_max, ctrl.max_steps

    s_nodes = [s0]
    states = [y]
    f = list(map(float, rhs(y)))
    rhs_nodes = [f]

    n_ev = len(events)
    g_prev = [None] * n_ev
    for m in range(n_ev):
        g0 = events[m].event_fn(y)
        g_prev[m] = _UNARMED if abs(g0) <= events[m].root_tol else g0

    first_hit = None
    traj = Trajectory(field, s_nodes, states, rhs_nodes)

    s = s0
    h = min(ctrl.h_init, s_end - s0, h_max)
    attempts = 0
    while s < s_end:
        if attempts >= max_steps:
            raise MaxStepsExceeded(f"exceeded {max_steps} step attempts at s={s!r}")
        attempts += 1
        clipped = False
        if s + h >= s_end:
            h = s_end - s
            clipped = True
        y1, err = _rk_step(rhs, y, f, h, dim)
        ratio = 0.0
        finite = True
        for j in range(dim):
            a, b = abs(y[j]), abs(y1[j])
            scale = rel * (a if a > b else b)
            if scale < atol:
                scale = atol
            rj = abs(err[j]) / scale
            if rj > ratio:
                ratio = rj
        for v in y1:
            if not math.isfinite(v):
                finite = False
                break
        if not finite or not math.isfinite(ratio):
            raise NonFiniteState(f"state blew up near s={s!r} (h={h!r})")
        if ratio <= 1.0:
            # accept
            s_new = s_end if clipped else s + h
            f_new = rhs(y1)
            s_nodes.append(s_new)
            states.append(y1)
            rhs_nodes.append(list(map(float, f_new)))
            traj._coeffs.append(None)
            step_idx = len(s_nodes) - 2
            stop = False
            if n_ev:
                cands = []
                for m in range(n_ev):
                    spec = events[m]
                    g_new = spec.event_fn(y1)
                    gp = g_prev[m]
                    if gp is _UNARMED:
                        if abs(g_new) > spec.root_tol:
                            g_prev[m] = g_new
                        continue
                    d = spec.direction
                    crossed = (
                        (gp < 0.0 <= g_new) if d == "rising"
                        else (gp > 0.0 >= g_new) if d == "falling"
                        else (gp < 0.0 <= g_new) or (gp > 0.0 >= g_new)
                    )
                    if crossed:
                        cands.append((m, gp, g_new))
                    g_prev[m] = g_new
                if cands:
                    located = []
                    for (m, glo, ghi) in cands:
                        s_ev, y_ev = _locate_event(traj, step_idx, events[m], glo, ghi)
                        located.append(EventHit(m, s_ev, y_ev))
                    hit = min(located, key=lambda e: e.s)
                    if first_hit is None or hit.s < first_hit.s:
                        first_hit = hit
                    if any(events[e.index].terminal for e in located):
                        stop = True
            s, y, f = s_new, y1, rhs_nodes[-1]
            if stop:
                break
            if ratio > 0.0:
                fac = 0.9 * ratio ** -0.2
                if fac > 5.0:
                    fac = 5.0
            else:
                fac = 5.0
            h = min(h * fac, h_max)
        else:
            fac = 0.9 * ratio ** -0.2
            if fac < 0.2:
                fac = 0.2
            h = h * fac
            if h < h_min:
                raise StepUnderflow(
                    f"step size {h!r} below h_min={h_min!r} at s={s!r}"
                )
    return traj, first_hit


def integrate(
    field: AutonomousField,
    y0: Sequence[float],
    s_span: tuple[float, float],
    ctrl: StepControl | None = None,
) -> Trajectory:
    """Integrate the field over s_span=(s0, s_end), s_end > s0."""
    traj, _ = _run(field, y0, s_span[0], s_span[1], ctrl or StepControl(), ())
    return traj


def integrate_with_events(
    field: AutonomousField,
    y0: Sequence[float],
    s_span: tuple[float, float],
    ctrl: StepControl | None = None,
    events: Sequence[EventSpec] = (),
) -> tuple[Trajectory, EventHit | None]:
    """Integrate over s_span, stopping early on a terminal event.

    Unlike integrate_until_any this does not treat a quiet run as an
    error: the hit slot is simply None when no event fired before the
    end of the span.
    """
    return _run(field, y0, s_span[0], s_span[1], ctrl or StepControl(), tuple(events))


def integrate_until(
    field: AutonomousField,
    y0: Sequence[float],
    ctrl: StepControl | None,
    event: EventSpec,
    s_max: float,
    s0: float = 0.0,
) -> tuple[Trajectory, float, np.ndarray]:
    """Integrate from s0 until the event fires; raises EventNotFound at s_max."""
    traj, idx, s_ev, y_ev = integrate_until_any(field, y0, ctrl, (event,), s_max, s0)
    return traj, s_ev, y_ev


def integrate_until_any(
    field: AutonomousField,
    y0: Sequence[float],
    ctrl: StepControl | None,
    events: Sequence[EventSpec],
    s_max: float,
    s0: float = 0.0,
) -> tuple[Trajectory, int, float, np.ndarray]:
    """Like integrate_until for several events; returns the first hit and its index."""
    if not events:
        raise ValueError("need at least one EventSpec")
    traj, hit = _run(field, y0, s0, s_max, ctrl or StepControl(), tuple(events))
    if hit is None:
        raise EventNotFound(
            f"no event before s_max={s_max!r} (span covered {traj.span})"
        )
    return traj, hit.index, hit.s, np.asarray(hit.state, dtype=float)


def eval_dense(traj: Trajectory, s: float) -> np.ndarray:
    """Interpolated state at s; exact at stored nodes."""
    return traj.eval(s)


def invert_component(traj: Trajectory, component: int, target: float) -> float:
    """Smallest s with state[component] == target along the trajectory."""
    return traj.invert_component(component, target)


def quadrature_extend(
    field: AutonomousField, integrand: Callable[[Sequence[float]], float]
) -> AutonomousField:
    """Append a component integrating integrand(y) along the flow."""
    dim = field.dim
    base = field.rhs

    def rhs(y):
        out = list(base(y[:dim]))
        out.append(integrand(y[:dim]))
        return out

    return AutonomousField(dim + 1, rhs)
