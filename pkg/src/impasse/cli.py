"""Command-line front end: every experiment as a CSV table plus a summary.

Each subcommand runs one solver family and writes a deterministic CSV
(UTF-8, LF, comma-separated, shortest round-trip float rendering) via a
temp-file rename, so a failed run never leaves a partial table.  Headline
scalars go to standard output as `name = value` lines.

Exit codes: 0 success, 1 solver failure, 2 usage error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from typing import Callable, Sequence

import numpy as np

from . import lane_emden as le
from . import thomas_fermi as tf
from .geometry import GeometryError, classify_semilinear
from .integrator import EventNotFound, IntegrationError, StepControl
from .solvers import SolverError


class UsageError(Exception):
    """Bad flag combination; the message names the offending flags."""


class StageError(Exception):
    """A solver stage failed; carries the stage name for the diagnostic."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


_SOLVER_ERRORS = (SolverError, IntegrationError, GeometryError, tf.DomainError)

# default evaluation points: the large-x profile table plus the origin
TF_POINTS_DEFAULT = (0.0, 10.0, 50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 350.0, 400.0)

PROFILE_POINTS = 201


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    """Atomically write one rectangular table; never leaves partial files."""
    for row in rows:
        if len(row) != len(header):
            raise ValueError("row width does not match header")
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    data = "\n".join(lines) + "\n"
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".csv-tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _control(args) -> StepControl | None:
    """Explicit tolerance flags build a control; otherwise solver defaults."""
    if args.tol_rel is None and args.tol_abs is None:
        return None
    rel = args.tol_rel if args.tol_rel is not None else 1e-6
    abs_ = args.tol_abs if args.tol_abs is not None else 1e-7
    return StepControl(rel_tol=rel, abs_tol=abs_)


def _epsilon(args, fallback: float = 1e-3) -> float:
    return args.epsilon if args.epsilon is not None else fallback


def _parse_grid(text: str, flag: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"{flag} expects lo:hi:count, got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise UsageError(f"{flag}: {exc}") from None
    if count < 1:
        raise UsageError(f"{flag}: count must be >= 1")
    return np.linspace(lo, hi, count)


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        values = [float(p) for p in text.split(",") if p.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"{flag}: {exc}") from None
    if not values:
        raise UsageError(f"{flag}: no values given")
    return values


_EXPR_NAMES = {
    name: getattr(math, name)
    for name in (
        "exp", "log", "log10", "sqrt", "sin", "cos", "tan",
        "sinh", "cosh", "tanh", "asin", "acos", "atan", "pi", "e",
    )
}
_EXPR_NAMES["abs"] = abs
_EXPR_NAMES["min"] = min
_EXPR_NAMES["max"] = max


def _parse_model_spec(spec: str, big_n: int) -> le.LaneEmdenModel:
    """--model value: power:<n> for h = -u^n, or custom:<expression in x, u>."""
    kind, sep, rest = spec.partition(":")
    if kind == "power" and sep:
        try:
            n = float(rest)
        except ValueError:
            raise UsageError(f"--model power: bad exponent {rest!r}") from None
        if big_n in (2, 3):
            return le.PolytropeModel(big_n, n).to_model()
        return le.LaneEmdenModel(m=float(big_n - 1), h=lambda x, u: -max(u, 0.0) ** n)
    if kind == "custom" and sep:
        try:
            code = compile(rest, "<--model custom>", "eval")
        except SyntaxError as exc:
            raise UsageError(f"--model custom: {exc}") from None

        def h(x: float, u: float) -> float:
            return float(eval(code, {"__builtins__": {}}, {**_EXPR_NAMES, "x": x, "u": u}))

        try:
            h(0.5, 0.5)
        except Exception as exc:
            raise UsageError(f"--model custom expression failed on (0.5, 0.5): {exc}")
        return le.LaneEmdenModel(m=float(big_n - 1), h=h)
    raise UsageError(f"--model expects power:<n> or custom:<expr>, got {spec!r}")


def _scalar_profile(
    sol: le.ParametricSolution, x_stop: float, u_center: float
) -> list[tuple[float, float, float]]:
    rows = [(0.0, u_center, 0.0)]
    for x in np.linspace(0.0, x_stop, PROFILE_POINTS)[1:]:
        if x < sol.x_start or x > sol.x_end:
            continue
        u, uprime = sol.at_x(float(x))
        rows.append((float(x), float(u), float(uprime)))
    return rows


def _cmd_polytrope(args):
    if args.n < 0:
        raise UsageError("--n must be nonnegative")
    try:
        model = le.PolytropeModel(args.N, args.n).to_model()
    except ValueError as exc:
        raise UsageError(f"--N/--n: {exc}") from None
    ctrl = _control(args)
    eps = _epsilon(args)
    x_cap = args.x_max if args.x_max is not None else le.X_MAX_DEFAULT
    zero = None
    try:
        zero = le.first_zero(model, 1.0, ctrl, eps, x_cap)
    except EventNotFound:
        pass
    except _SOLVER_ERRORS as exc:
        raise StageError("polytrope zero location", exc)
    x_stop = zero[0] if zero is not None else x_cap
    try:
        sol = le.le_ivp(model, 1.0, ctrl, eps, x_stop)
    except _SOLVER_ERRORS as exc:
        raise StageError("polytrope profile integration", exc)
    rows = _scalar_profile(sol, x_stop, 1.0)
    summary = [f"N = {args.N}", f"n = {_fmt(args.n)}"]
    if zero is not None:
        x1, up1, ratio = zero
        summary += [
            f"xi1 = {_fmt(x1)}",
            f"uprime_xi1 = {_fmt(up1)}",
            f"r = {_fmt(ratio)}",
        ]
    else:
        summary.append(f"no zero within x_max = {_fmt(x_stop)}")
    return ["x", "u", "uprime"], rows, summary


def _cmd_le_bvp(args):
    model = _parse_model_spec(args.model, args.N)
    bc = (args.alpha, args.beta, args.gamma)
    ctrl = _control(args)
    try:
        sol = le.le_bvp(model, bc, ctrl=ctrl, epsilon=_epsilon(args))
    except ValueError as exc:
        raise UsageError(f"--alpha/--beta/--gamma: {exc}") from None
    except _SOLVER_ERRORS as exc:
        raise StageError("boundary-value shooting", exc)
    u_center = float(sol.trajectory.states[0][1])
    x1, u1, up1 = sol.boundary_state
    residual = args.alpha * u1 + args.beta * up1 - args.gamma
    rows = _scalar_profile(sol, x1, u_center)
    summary = [
        f"u0 = {_fmt(u_center)}",
        f"boundary_residual = {_fmt(residual)}",
    ]
    return ["x", "u", "uprime"], rows, summary


def _cmd_biocatalyst(args):
    if (args.phi2 is None) == (args.phi2_grid is None):
        raise UsageError("give exactly one of --phi2 / --phi2-grid")
    if (args.K is None) == (args.K_grid is None):
        raise UsageError("give exactly one of --K / --K-grid")
    phi2s = (
        np.array([args.phi2]) if args.phi2 is not None
        else _parse_grid(args.phi2_grid, "--phi2-grid")
    )
    ks = (
        np.array([args.K]) if args.K is not None
        else _parse_grid(args.K_grid, "--K-grid")
    )
    for phi2 in phi2s:
        if phi2 <= 0:
            raise UsageError("--phi2/--phi2-grid: values must be positive")
    for k in ks:
        if k < 0:
            raise UsageError("--K/--K-grid: values must be nonnegative")
    try:
        cells = le.effectiveness_surface(
            phi2s, ks, ctrl=_control(args), epsilon=_epsilon(args)
        )
    except _SOLVER_ERRORS as exc:
        raise StageError("effectiveness sweep", exc)
    rows = [(phi2, k, eta) for phi2, k, eta, _err in cells]
    failures = sum(1 for _, _, _, err in cells if err)
    etas = [eta for _, _, eta, err in cells if not err]
    summary = [f"cells = {len(rows)}", f"failures = {failures}"]
    if len(rows) == 1 and failures == 0:
        summary.append(f"eta = {_fmt(rows[0][2])}")
    elif etas:
        summary.append(f"eta_min = {_fmt(min(etas))}")
        summary.append(f"eta_max = {_fmt(max(etas))}")
    return ["phi2", "K", "eta"], rows, summary


def _cmd_oxygen(args):
    explicit = [v is not None for v in (args.a, args.K, args.alpha)]
    if args.set is not None:
        if any(explicit):
            raise UsageError("--set conflicts with --a/--K/--alpha")
        model = le.OXYGEN_SETS[args.set]
    else:
        if not all(explicit):
            raise UsageError("give --set or all of --a/--K/--alpha")
        try:
            model = le.OxygenModel(args.a, args.K, args.alpha)
        except ValueError as exc:
            raise UsageError(f"--a/--K/--alpha: {exc}") from None
    try:
        sol = le.oxygen_bvp(model, ctrl=_control(args), epsilon=_epsilon(args))
    except _SOLVER_ERRORS as exc:
        raise StageError("oxygen uptake shooting", exc)
    u_center = float(sol.trajectory.states[0][1])
    x1, u1, up1 = sol.boundary_state
    residual = model.alpha * u1 + up1 - model.alpha
    rows = _scalar_profile(sol, x1, u_center)
    summary = [
        f"a = {_fmt(model.a)}",
        f"K = {_fmt(model.K)}",
        f"alpha = {_fmt(model.alpha)}",
        f"u0 = {_fmt(u_center)}",
        f"boundary_residual = {_fmt(residual)}",
    ]
    return ["x", "u", "uprime"], rows, summary


def _cmd_catalyst_system(args):
    try:
        model = le.CatalystSystemModel(
            mu_u=args.mu_u,
            mu_v=args.mu_v,
            mu_w=args.mu_w,
            lam_u=args.lambda_u,
            lam_v=args.lambda_v,
            lam_w=args.lambda_w,
        )
    except ValueError as exc:
        raise UsageError(f"catalyst parameters: {exc}") from None
    try:
        sol = le.le_system_bvp(model, ctrl=_control(args), epsilon=_epsilon(args))
    except _SOLVER_ERRORS as exc:
        raise StageError("catalyst-system Newton shooting", exc)
    centers = [float(c) for c in sol.trajectory.states[0][1:4]]
    bs = sol.boundary_state
    residual = max(abs(bs[1 + i] - 1.0) for i in range(3))
    rows = [(0.0, *centers, 0.0, 0.0, 0.0)]
    for x in np.linspace(0.0, 1.0, PROFILE_POINTS)[1:]:
        if x < sol.x_start or x > sol.x_end:
            continue
        u_vec, up_vec = sol.at_x(float(x))
        rows.append((float(x), *map(float, u_vec), *map(float, up_vec)))
    summary = [
        f"u0 = {_fmt(centers[0])}",
        f"v0 = {_fmt(centers[1])}",
        f"w0 = {_fmt(centers[2])}",
        f"boundary_residual = {_fmt(residual)}",
    ]
    header = ["x", "u", "v", "w", "uprime", "vprime", "wprime"]
    return header, rows, summary


def _cmd_tf_slope(args):
    if args.tol < 1e-13:
        raise UsageError("--tol below the double-precision floor 1e-13")
    try:
        omega = tf.critical_slope(args.tol, epsilon=_epsilon(args))
    except _SOLVER_ERRORS as exc:
        raise StageError("critical-slope integration", exc)
    rows = [(args.tol, omega)]
    return ["tol", "omega"], rows, [f"omega = {_fmt(omega)}"]


def _cmd_tf_series(args):
    if args.terms < 1:
        raise UsageError("--terms must be >= 1")
    try:
        coeffs = tf.majorana_coeffs(args.terms).coeffs
        omega_dyn = tf.critical_slope(1e-10)
    except _SOLVER_ERRORS as exc:
        raise StageError("series evaluation", exc)
    rows = []
    partial = 0.0
    for i, a in enumerate(coeffs):
        partial = math.fsum(coeffs[: i + 1])
        rows.append((i, a, -tf.SLOPE_FACTOR * partial))
    omega_series = -tf.SLOPE_FACTOR * partial
    gap = abs(omega_series - omega_dyn) / abs(omega_dyn)
    summary = [
        f"terms = {args.terms}",
        f"omega_series = {_fmt(omega_series)}",
        f"omega_dynamics = {_fmt(omega_dyn)}",
        f"rel_gap = {_fmt(gap)}",
    ]
    return ["i", "a_i", "slope"], rows, summary


def _cmd_tf_solution(args):
    if args.points is not None:
        points = _parse_float_list(args.points, "--points")
    else:
        points = list(TF_POINTS_DEFAULT)
    if any(x < 0 for x in points):
        raise UsageError("--points: abscissae must be nonnegative")
    points = sorted(set(points))
    # evaluations far out need the smaller displacement to stay on the branch
    eps = _epsilon(args, 1e-4 if max(points) > 200.0 else 1e-3)
    try:
        sol = tf.critical_solution(ctrl=_control(args), epsilon=eps)
        rows = []
        for x in points:
            u, uprime = tf.evaluate_at_x(sol, x)
            rows.append((x, u, uprime))
    except _SOLVER_ERRORS as exc:
        raise StageError("decaying-solution evaluation", exc)
    summary = [f"omega = {_fmt(sol.slope)}", f"points = {len(rows)}"]
    return ["x", "u", "uprime"], rows, summary


def _cmd_tf_phase(args):
    if args.v0_list is not None and args.count is not None:
        raise UsageError("give only one of --v0-list / --count")
    try:
        v_crit = tf.critical_v0()
        if args.v0_list is not None:
            v0s = _parse_float_list(args.v0_list, "--v0-list")
        else:
            count = args.count if args.count is not None else 7
            if count < 1:
                raise UsageError("--count must be >= 1")
            v0s = [float(f) * v_crit for f in np.linspace(0.8, 1.2, count)]
        x_cap = args.x_max if args.x_max is not None else 40.0
        rows = []
        summary = [f"v_critical = {_fmt(v_crit)}"]
        for v0 in v0s:
            sol = tf.solution_with_slope(v0, ctrl=_control(args), x_max=x_cap)
            for s, y in zip(sol.trajectory.s_nodes, sol.trajectory.states):
                if s > sol.s_terminal:
                    break
                x, u, uprime = sol.parametric_at_s(float(s))
                rows.append((v0, float(y[0]), float(y[1]), x, u, uprime))
            x_t, u_t, up_t = sol.parametric_at_s(sol.s_terminal)
            y_t = sol.terminal_state
            rows.append((v0, y_t[0], y_t[1], x_t, u_t, up_t))
            summary.append(
                f"v0 = {_fmt(v0)}: termination = {sol.termination}, x_end = {_fmt(x_t)}"
            )
    except _SOLVER_ERRORS as exc:
        raise StageError("slope-family sweep", exc)
    return ["v0", "t", "v", "x", "u", "uprime"], rows, summary


def _cmd_tf_bvp(args):
    if (args.ion_a is None) == (args.crystal_b is None):
        raise UsageError("give exactly one of --ion-a / --crystal-b")
    ctrl = _control(args)
    if args.ion_a is not None:
        a = args.ion_a
        if not 0.0 < a <= 27.0:
            raise UsageError("--ion-a must be in (0, 27]")
        try:
            sol = tf.solve_bc_ion(a, tol=1e-8, ctrl=ctrl)
        except _SOLVER_ERRORS as exc:
            raise StageError("ion boundary shooting", exc)
        x_stop = min(a, sol.x_end)
        residual = sol.at_x(x_stop)[0]
        summary = [
            f"ion_a = {_fmt(a)}",
            f"v0 = {_fmt(sol.v0)}",
            f"uprime0 = {_fmt(sol.slope)}",
            f"residual = {_fmt(residual)}",
        ]
    else:
        b = args.crystal_b
        if not 0.0 < b <= 30.0:
            raise UsageError("--crystal-b must be in (0, 30]")
        try:
            sol = tf.solve_bc_crystal(b, tol=1e-8, ctrl=ctrl)
        except _SOLVER_ERRORS as exc:
            raise StageError("crystal boundary shooting", exc)
        x_stop = min(b, sol.x_end)
        ub, upb = sol.at_x(x_stop)
        residual = b * upb - ub
        summary = [
            f"crystal_b = {_fmt(b)}",
            f"v0 = {_fmt(sol.v0)}",
            f"uprime0 = {_fmt(sol.slope)}",
            f"residual = {_fmt(residual)}",
        ]
    rows = []
    for x in np.linspace(0.0, x_stop, PROFILE_POINTS):
        u, uprime = sol.at_x(float(x))
        rows.append((float(x), u, uprime))
    return ["x", "u", "uprime"], rows, summary


_CATALOG: list[tuple[str, Callable[[], le.LaneEmdenModel]]] = [
    ("polytrope-3-0", lambda: le.PolytropeModel(3, 0.0).to_model()),
    ("polytrope-3-1", lambda: le.PolytropeModel(3, 1.0).to_model()),
    ("polytrope-3-5", lambda: le.PolytropeModel(3, 5.0).to_model()),
    ("cylinder-2-1", lambda: le.PolytropeModel(2, 1.0).to_model()),
    ("biocatalyst-1-1", lambda: le.BiocatalystModel(1.0, 1.0).to_model()),
    ("oxygen-set-1", lambda: le.OXYGEN_SETS[1].to_model()),
    ("oxygen-set-2", lambda: le.OXYGEN_SETS[2].to_model()),
    ("oxygen-set-3", lambda: le.OXYGEN_SETS[3].to_model()),
    ("oxygen-set-4", lambda: le.OXYGEN_SETS[4].to_model()),
]


def _cmd_classify(args):
    entries: list[tuple[str, le.LaneEmdenModel]] = []
    if args.model is not None:
        if args.N is None:
            raise UsageError("--model needs --N")
        entries.append((f"user-{args.N}", _parse_model_spec(args.model, args.N)))
    elif args.N is not None:
        raise UsageError("--N needs --model")
    else:
        entries.extend((name, build()) for name, build in _CATALOG)
    rows = []
    summary = []
    for name, model in entries:
        try:
            analysis = classify_semilinear(
                le.semilinear_problem(model), (0.0, 1.0, 0.0)
            )
        except GeometryError as exc:
            raise StageError(f"classification of {name}", exc)
        lam = analysis.unstable_eigenvalue
        vec = analysis.unstable_eigenvector
        rows.append(
            (
                name,
                analysis.kind,
                analysis.delta,
                analysis.gamma,
                lam if lam is not None else math.nan,
                vec[0] if vec is not None else math.nan,
                vec[1] if vec is not None else math.nan,
                vec[2] if vec is not None else math.nan,
                analysis.unique_solution,
            )
        )
        summary.append(
            f"{name}: {analysis.kind}, delta = {_fmt(analysis.delta)}, "
            f"gamma = {_fmt(analysis.gamma)}, unique = {int(analysis.unique_solution)}"
        )
    header = [
        "model", "kind", "delta", "gamma",
        "lambda", "vec_x", "vec_u", "vec_uprime", "unique",
    ]
    return header, rows, summary


_HANDLERS = {
    "polytrope": _cmd_polytrope,
    "le-bvp": _cmd_le_bvp,
    "biocatalyst": _cmd_biocatalyst,
    "oxygen": _cmd_oxygen,
    "catalyst-system": _cmd_catalyst_system,
    "tf-slope": _cmd_tf_slope,
    "tf-series": _cmd_tf_series,
    "tf-solution": _cmd_tf_solution,
    "tf-phase": _cmd_tf_phase,
    "tf-bvp": _cmd_tf_bvp,
    "classify": _cmd_classify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-rel", type=float, default=None,
                        help="step control relative tolerance (default 1e-6 when given alone; otherwise each solver's tuned default)")
    common.add_argument("--tol-abs", type=float, default=None,
                        help="step control absolute tolerance (default 1e-7 when given alone)")
    common.add_argument("--epsilon", type=float, default=None,
                        help="displacement along the unstable direction (default 1e-3)")
    common.add_argument("--out", type=str, default=None,
                        help="CSV output path (default <command>.csv)")
    common.add_argument("--x-max", type=float, default=None,
                        help="integration cap on the abscissa")

    parser = argparse.ArgumentParser(
        prog="impasse",
        description="Singular ODE problems solved through their stationary-point geometry.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("polytrope", parents=[common],
                       help="density profile, first zero and mass ratio")
    p.add_argument("--N", type=int, choices=(2, 3), required=True)
    p.add_argument("--n", type=float, required=True)

    p = sub.add_parser("le-bvp", parents=[common],
                       help="two-point problem alpha*u(1) + beta*u'(1) = gamma")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--model", type=str, required=True,
                   help="power:<n> or custom:<expression in x, u>")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=1.0)

    p = sub.add_parser("biocatalyst", parents=[common],
                       help="effectiveness factor, single pellet or grid sweep")
    p.add_argument("--phi2", type=float, default=None)
    p.add_argument("--phi2-grid", type=str, default=None, help="lo:hi:count")
    p.add_argument("--K", type=float, default=None)
    p.add_argument("--K-grid", type=str, default=None, help="lo:hi:count")

    p = sub.add_parser("oxygen", parents=[common],
                       help="oxygen uptake profile with mixed boundary condition")
    p.add_argument("--set", type=int, choices=(1, 2, 3, 4), default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--K", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)

    p = sub.add_parser("catalyst-system", parents=[common],
                       help="three-species pellet via Newton-variational shooting")
    p.add_argument("--mu-u", type=float, default=30.0)
    p.add_argument("--mu-v", type=float, default=0.01)
    p.add_argument("--mu-w", type=float, default=0.01)
    p.add_argument("--lambda-u", type=float, default=3.0)
    p.add_argument("--lambda-v", type=float, default=0.1)
    p.add_argument("--lambda-w", type=float, default=0.1)

    p = sub.add_parser("tf-slope", parents=[common],
                       help="critical slope of the decaying screening solution")
    p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("tf-series", parents=[common],
                       help="expansion coefficients and truncated-series slopes")
    p.add_argument("--terms", type=int, default=100)

    p = sub.add_parser("tf-solution", parents=[common],
                       help="decaying solution values at requested abscissae")
    p.add_argument("--points", type=str, default=None,
                   help="comma-separated x values (default: the large-x table)")

    p = sub.add_parser("tf-phase", parents=[common],
                       help="slope-family curves for a phase portrait")
    p.add_argument("--v0-list", type=str, default=None)
    p.add_argument("--count", type=int, default=None,
                   help="curves spread over [0.8, 1.2] * critical (default 7)")

    p = sub.add_parser("tf-bvp", parents=[common],
                       help="two-sided screening conditions by slope bisection")
    p.add_argument("--ion-a", type=float, default=None)
    p.add_argument("--crystal-b", type=float, default=None)

    p = sub.add_parser("classify", parents=[common],
                       help="stationary-point analysis of the model catalog")
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--model", type=str, default=None,
                   help="power:<n> or custom:<expression in x, u>")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        header, rows, summary = _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"solver failure in {exc.stage}: {exc.cause}", file=sys.stderr)
        return 1
    out = args.out if args.out is not None else f"{args.command}.csv"
    try:
        write_csv(out, header, rows)
    except OSError as exc:
        print(f"i/o error writing {out!r}: {exc}", file=sys.stderr)
        return 3
    for line in summary:
        print(line)
    print(f"csv = {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
