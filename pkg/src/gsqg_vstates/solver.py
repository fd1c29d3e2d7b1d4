"""Newton and continuation solver for finite-size co-rotating patch states.

The unknowns are the permitted cosine coefficients of the three patch shapes
plus ``(Omega, gamma2)``. The residuals are the sine coefficients of the
boundary functional for the same ``(patch, mode)`` pairs plus the mode-1
residuals of patches 1 and 2.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .contour import PatchShape, VState, curvature, evaluate_functional, quadrature_tolerance
from .equilibria import ConfigParams, build_configuration, nondegeneracy_report, solve_equilibrium
from .errors import (
    ConfigurationError,
    DegeneracyError,
    DomainError,
    GeometryError,
    NumericalError,
    SolverError,
)
from .specfun import disc_mode_spectrum, kernel_constants, xi_constant

FloatArray = NDArray[np.float64]

JACOBIAN_MODES = ("fd", "frozen")


@dataclass(frozen=True)
class SolveOptions:
    """Discretization and iteration controls for the Newton solver."""

    n_modes: int = 64
    n_quad: int = 512
    tol: float = 1e-10
    max_iter: int = 20
    continuation_steps: int = 6
    jacobian: str = "fd"
    fd_step: float = 1e-6

    def __post_init__(self) -> None:
        if int(self.n_modes) != self.n_modes or self.n_modes < 2:
            raise ConfigurationError(f"n_modes must be an integer >= 2, got {self.n_modes!r}")
        if int(self.n_quad) != self.n_quad or self.n_quad < 4 * self.n_modes:
            raise ConfigurationError(
                f"n_quad must be an integer >= 4 * n_modes = {4 * self.n_modes}, got {self.n_quad!r}"
            )
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise ConfigurationError(f"tol must be positive, got {self.tol!r}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be a positive integer, got {self.max_iter!r}")
        if int(self.continuation_steps) != self.continuation_steps or self.continuation_steps < 1:
            raise ConfigurationError(
                f"continuation_steps must be a positive integer, got {self.continuation_steps!r}"
            )
        if self.jacobian not in JACOBIAN_MODES:
            raise ConfigurationError(f"jacobian must be one of {JACOBIAN_MODES}, got {self.jacobian!r}")
        if not (0 < self.fd_step < 1e-2):
            raise ConfigurationError(f"fd_step must lie in (0, 1e-2), got {self.fd_step!r}")

    def quad_nodes(self, m: int) -> int:
        """``n_quad`` rounded up to a multiple of ``2m`` so the grid is ``m``-fold symmetric."""
        step = 2 * m
        return -(-int(self.n_quad) // step) * step


@dataclass(frozen=True)
class SolveResult:
    state: VState
    iterations: int
    residual: float
    history: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class JacobianReport:
    matrix: FloatArray
    condition: float
    analytic: bool


@dataclass(frozen=True)
class ContinuationResult:
    states: list[VState]
    results: list[SolveResult]
    failed_target: float | None = None
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None


@dataclass(frozen=True)
class AsymptoticReport:
    """Small-``eps`` diagnostics of a solved family.

    ``h1``/``h2`` are the closed-form sums with the denominator as printed,
    which may be negative (then NaN). ``h1_distance``/``h2_distance`` use the
    squared inter-vortex distance instead. ``linear_response_slope`` is the
    first-order mode-2 slope predicted from the point-vortex strain and the
    linearized self-interaction.
    """

    h1: float
    h2: float
    h1_distance: float
    h2_distance: float
    xi: float
    predicted_slope: tuple[float, float]
    measured_slope: tuple[float, float, float]
    linear_response_slope: tuple[float, float, float]
    leading_mode: tuple[int, int, int]
    lambda_drift_order: float
    lambda_drift_residual: float
    ring_amplitude_order: tuple[float, float]
    ring_amplitude_residual: tuple[float, float]
    central_amplitude_order: float
    central_to_ring_ratio: float

    def to_dict(self) -> dict:
        out = {}
        for key, value in self.__dict__.items():
            out[key] = _json_safe(value)
        return out


def _json_safe(value):
    if isinstance(value, tuple | list):
        return [_json_safe(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return _json_safe(float(value))
    return value


def worker_count() -> int:
    """Thread cap from ``GSQG_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("GSQG_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"GSQG_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise ConfigurationError(f"GSQG_THREADS must be >= 0, got {n}")
    return n if n > 0 else (os.cpu_count() or 1)


def unknown_layout(params: ConfigParams, n_modes: int) -> list[tuple[int, int]]:
    """``(patch, mode)`` pairs of the shape unknowns, in vector order."""
    out = []
    for j in range(3):
        fold = params.m if j == 0 else 1
        out.extend((j, n) for n in range(2, n_modes + 1) if n % fold == 0)
    return out


def pack_state(state: VState, params: ConfigParams) -> FloatArray:
    layout = unknown_layout(params, state.n_max)
    vec = [state.shapes[j].coeffs[n - 2] for j, n in layout]
    return np.array(vec + [state.omega, state.gamma2], dtype=float)


def unpack_state(vec: FloatArray, epsilon: float, params: ConfigParams, n_modes: int) -> VState:
    layout = unknown_layout(params, n_modes)
    coeffs = np.zeros((3, n_modes - 1))
    for value, (j, n) in zip(vec, layout):
        coeffs[j, n - 2] = value
    shapes = tuple(PatchShape(j, coeffs[j], params.m if j == 0 else 1) for j in range(3))
    return VState(epsilon=epsilon, shapes=shapes, omega=float(vec[-2]), gamma2=float(vec[-1]))


def residual_vector(state: VState, params: ConfigParams, n_quad: int) -> FloatArray:
    """Residuals paired with ``pack_state``: shape modes, then ``A_1`` of patches 1 and 2."""
    sine = evaluate_functional(state, params, n_quad).sine
    layout = unknown_layout(params, state.n_max)
    vec = [sine[j, n - 1] for j, n in layout]
    return np.array(vec + [sine[1, 0], sine[2, 0]])


@lru_cache(maxsize=32)
def _tolerance_floor(params: ConfigParams, n_modes: int, n_quad: int) -> float:
    return quadrature_tolerance(params, n_modes, n_quad)


def check_tolerance(params: ConfigParams, opts: SolveOptions) -> float:
    """Return the quadrature tolerance and reject a ``tol`` below ten times it."""
    tau = _tolerance_floor(params, opts.n_modes, opts.quad_nodes(params.m))
    if opts.tol < 10.0 * tau:
        raise ConfigurationError(f"tol = {opts.tol:.3g} is below 10 * quadrature tolerance {tau:.3g}")
    return tau


def check_disjoint(epsilon: float, params: ConfigParams) -> None:
    """Reject ``eps`` for which the undeformed discs would touch."""
    cfg = build_configuration(params)
    pts = np.asarray(cfg.positions)
    scales = [params.b[0]] + [params.b[1]] * params.m + [params.b[2]] * params.m
    for i in range(len(pts)):
        for k in range(i + 1, len(pts)):
            gap = float(np.hypot(*(pts[i] - pts[k]))) - abs(epsilon) * (scales[i] + scales[k])
            if gap <= 0:
                raise GeometryError(f"patches {i} and {k} overlap at eps = {epsilon:g}")


def analytic_jacobian(params: ConfigParams, n_modes: int) -> FloatArray:
    """Exact Jacobian at ``(0, 0, lambda*)``.

    Shape block: ``-gamma_j n (sigma_n - sigma_1)`` on the diagonal, the
    linearized self-induced normal velocity of a disc. Lambda block: the
    point-vortex balance Jacobian. All other entries vanish.
    """
    from .contour import jacobian_lambda

    eq = solve_equilibrium(params)
    spec = disc_mode_spectrum(params.alpha, n_modes)
    strengths = (params.gamma0, params.gamma1, eq.gamma2_star)
    layout = unknown_layout(params, n_modes)
    size = len(layout) + 2
    jac = np.zeros((size, size))
    for i, (j, n) in enumerate(layout):
        jac[i, i] = -strengths[j] * n * spec[n - 1]
    jac[-2:, -2:] = jacobian_lambda(params)
    return jac


def _fd_jacobian(vec: FloatArray, epsilon: float, params: ConfigParams, opts: SolveOptions) -> FloatArray:
    n_quad = opts.quad_nodes(params.m)

    def column(i: int) -> FloatArray:
        h = opts.fd_step * max(1.0, abs(vec[i]))
        up, dn = vec.copy(), vec.copy()
        up[i] += h
        dn[i] -= h
        r_up = residual_vector(unpack_state(up, epsilon, params, opts.n_modes), params, n_quad)
        r_dn = residual_vector(unpack_state(dn, epsilon, params, opts.n_modes), params, n_quad)
        return (r_up - r_dn) / (2.0 * h)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        cols = list(pool.map(column, range(len(vec))))
    return np.stack(cols, axis=1)


def _is_trivial(state: VState, params: ConfigParams) -> bool:
    if state.epsilon != 0.0 or any(np.any(s.coeffs) for s in state.shapes):
        return False
    eq = solve_equilibrium(params)
    return state.omega == eq.omega_star and state.gamma2 == eq.gamma2_star


def newton_jacobian(
    state: VState, params: ConfigParams, opts: SolveOptions, mode: str = "auto"
) -> JacobianReport:
    """Jacobian of ``residual_vector`` with respect to ``pack_state``.

    ``mode`` is ``analytic`` (exact block form, only at the trivial state),
    ``fd`` (central differences) or ``auto`` (analytic at the trivial state).
    """
    if mode not in ("auto", "analytic", "fd"):
        raise DomainError(f"mode must be auto, analytic or fd, got {mode!r}")
    analytic = mode == "analytic" or (mode == "auto" and _is_trivial(state, params))
    if analytic:
        if not _is_trivial(state, params):
            raise DomainError("the analytic Jacobian is only available at (0, 0, lambda*)")
        jac = analytic_jacobian(params, state.n_max)
    else:
        jac = _fd_jacobian(pack_state(state, params), state.epsilon, params, opts)
    cond = float(np.linalg.cond(jac))
    if not math.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
        det = nondegeneracy_report(params).det
        raise NumericalError(
            f"Jacobian singular to working precision (cond = {cond:.3g}); "
            f"lambda-block determinant is {det:.6g}"
        )
    return JacobianReport(matrix=jac, condition=cond, analytic=analytic)


def newton_solve(
    epsilon: float,
    params: ConfigParams,
    opts: SolveOptions,
    initial: VState | None = None,
    *,
    frozen: FloatArray | None = None,
) -> SolveResult:
    """Newton iteration for the state at ``epsilon``.

    ``frozen`` replaces the per-iteration finite-difference Jacobian by a fixed
    matrix (quasi-Newton). Raises ``SolverError`` carrying the residual history
    when ``max_iter`` is exhausted.
    """
    report = nondegeneracy_report(params)
    if not report.ok:
        raise DegeneracyError(
            f"degenerate configuration: nondeg_lhs = {report.nondeg_lhs:.6g}, det = {report.det:.6g}"
        )
    check_disjoint(epsilon, params)
    check_tolerance(params, opts)
    n_quad = opts.quad_nodes(params.m)
    if initial is None:
        state = VState.trivial(params, opts.n_modes, epsilon)
    else:
        if initial.n_max != opts.n_modes:
            raise DomainError(f"initial state has n_max = {initial.n_max}, expected {opts.n_modes}")
        state = VState(epsilon, initial.shapes, initial.omega, initial.gamma2)
    if frozen is None and opts.jacobian == "frozen":
        frozen = analytic_jacobian(params, opts.n_modes)
    vec = pack_state(state, params)
    history: list[float] = []
    for it in range(opts.max_iter + 1):
        res = residual_vector(unpack_state(vec, epsilon, params, opts.n_modes), params, n_quad)
        norm = float(np.max(np.abs(res)))
        history.append(norm)
        if not math.isfinite(norm):
            raise SolverError(f"non-finite residual at iteration {it}", history)
        if norm <= opts.tol:
            final = unpack_state(vec, epsilon, params, opts.n_modes)
            return SolveResult(state=final, iterations=it, residual=norm, history=history)
        if it == opts.max_iter:
            break
        jac = frozen if frozen is not None else _fd_jacobian(vec, epsilon, params, opts)
        try:
            vec = vec - np.linalg.solve(jac, res)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular Jacobian at iteration {it}", history) from exc
    raise SolverError(
        f"Newton did not converge in {opts.max_iter} iterations at eps = {epsilon:g} "
        f"(last residual {history[-1]:.3g})",
        history,
    )


def solve_vstate(
    epsilon: float, params: ConfigParams, opts: SolveOptions, initial: VState | None = None
) -> VState:
    """Solved state at ``epsilon`` with sup-norm residual at most ``opts.tol``."""
    return newton_solve(epsilon, params, opts, initial).state


def geometric_ladder(eps_max: float, steps: int) -> list[float]:
    """Targets ``eps_max * 2^(k - steps)`` for ``k = 1..steps``."""
    if not (math.isfinite(eps_max) and eps_max > 0):
        raise DomainError(f"eps_max must be positive, got {eps_max!r}")
    if int(steps) != steps or steps < 1:
        raise DomainError(f"steps must be a positive integer, got {steps!r}")
    return [eps_max * 2.0 ** (k - steps) for k in range(1, int(steps) + 1)]


def continuation(
    eps_targets: Sequence[float], params: ConfigParams, opts: SolveOptions
) -> ContinuationResult:
    """Warm-started solves along increasing ``eps_targets``.

    Each start is the linear extrapolation of the two previous solutions in
    ``eps`` (the first uses the trivial state). A failed target stops the run
    and is reported with all earlier states.
    """
    targets = [float(t) for t in eps_targets]
    if not targets:
        raise DomainError("eps_targets is empty")
    if any(abs(b) <= abs(a) for a, b in zip(targets, targets[1:])):
        raise DomainError("eps_targets must be strictly increasing in magnitude")
    states: list[VState] = []
    results: list[SolveResult] = []
    known: list[tuple[float, FloatArray]] = [(0.0, pack_state(VState.trivial(params, opts.n_modes), params))]
    for eps in targets:
        if len(known) >= 2:
            (e0, v0), (e1, v1) = known[-2], known[-1]
            guess = v1 + (eps - e1) / (e1 - e0) * (v1 - v0)
        else:
            guess = known[-1][1]
        start = unpack_state(guess, eps, params, opts.n_modes)
        try:
            result = newton_solve(eps, params, opts, start)
        except (SolverError, GeometryError, NumericalError) as exc:
            return ContinuationResult(states, results, failed_target=eps, failure=str(exc))
        states.append(result.state)
        results.append(result)
        if eps != known[-1][0]:
            known.append((eps, pack_state(result.state, params)))
    return ContinuationResult(states, results)


def _loglog_fit(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    if not np.all(np.isfinite(ly)):
        return float("nan"), float("nan")
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    return float(slope), float(np.sqrt(np.mean(resid**2)))


def _replica_offsets(params: ConfigParams, j: int, ell: int) -> list[float]:
    first = 1 if ell == j else 0
    shift = ((ell == 2) - (j == 2)) * params.vartheta * math.pi / params.m
    return [2 * k * math.pi / params.m - shift for k in range(first, params.m)]


def shape_sums(params: ConfigParams, gamma2: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Closed-form sums ``H_1, H_2``: as printed, and with the squared distance.

    The printed denominator ``d_l^2 + 2 d_j d_l cos - d_j^2`` can be negative;
    a fractional power of it is reported as NaN.
    """
    a = params.alpha
    gammas = (params.gamma0, params.gamma1, gamma2)
    printed, distance = [], []
    for j in (1, 2):
        dj = params.radii[j]
        lit = dist = gammas[0]
        for ell in (1, 2):
            dl = params.radii[ell]
            for phi in _replica_offsets(params, j, ell):
                lit_num = 2 * dj * dl * math.cos(phi) - dj**2 - dl**2 * math.cos(
                    2 * (phi + ((ell == 2) - (j == 2)) * params.vartheta * math.pi / params.m)
                    - 2 * ((ell == 2) - (j == 2))
                )
                lit_den = dl**2 + 2 * dj * dl * math.cos(phi) - dj**2
                lit += gammas[ell] * (lit_num / lit_den ** (a / 2 + 2) if lit_den > 0 else math.nan)
                num = 2 * dj * dl * math.cos(phi) - dj**2 - dl**2 * math.cos(2 * phi)
                den = dl**2 - 2 * dj * dl * math.cos(phi) + dj**2
                dist += gammas[ell] * num / den ** (a / 2 + 2)
        printed.append(lit)
        distance.append(dist)
    return (printed[0], printed[1]), (distance[0], distance[1])


def strain_forcing(params: ConfigParams, gamma2: float) -> tuple[float, float, float]:
    """``sin(2x)`` coefficient of the first-order-in-``eps`` residual of each patch.

    Each patch feels the point-vortex strain of all the others.
    """
    a = params.alpha
    _, c_hat = kernel_constants(a)
    cfg = build_configuration(params, gamma2)
    pts = np.asarray(cfg.positions)
    z = pts[:, 0] + 1j * pts[:, 1]
    strengths = np.asarray(cfg.strengths)
    out = []
    for j, idx in enumerate((0, 1, 1 + params.m)):
        beta = params.replica_angle(j, 0) if j else 0.0
        total = 0.0
        for s in range(len(z)):
            if s == idx:
                continue
            dz = z[idx] - z[s]
            total += strengths[s] * abs(dz) ** (-a - 2) * math.cos(2 * beta - 2 * np.angle(dz))
        out.append(params.b[j] * c_hat * (a + 2) / 4 * total)
    return out[0], out[1], out[2]


def asymptotic_report(family: Sequence[VState], params: ConfigParams) -> AsymptoticReport:
    """Fit the small-``eps`` behaviour of a solved family and tabulate closed forms."""
    states = [s for s in family if s.epsilon != 0.0]
    if len(states) < 3:
        raise DomainError(f"need at least 3 states at nonzero eps, got {len(states)}")
    states.sort(key=lambda s: abs(s.epsilon))
    eps = [abs(s.epsilon) for s in states]
    eq = solve_equilibrium(params)
    drift = [max(abs(s.omega - eq.omega_star), abs(s.gamma2 - eq.gamma2_star)) for s in states]
    drift_order, drift_res = _loglog_fit(eps, drift)

    smallest = states[0]
    leading = tuple(
        int(np.argmax(np.abs(sh.coeffs))) + 2 if np.any(sh.coeffs) else 0 for sh in smallest.shapes
    )
    # Secant slope at the smallest eps, the best available estimate of d a_n / d eps at 0.
    measured = [
        float(smallest.shapes[j].coeffs[n - 2] / smallest.epsilon) if n else 0.0
        for j, n in enumerate(leading)
    ]
    ring_orders, ring_res = [], []
    for j in (1, 2):
        amp = [float(np.max(np.abs(s.shapes[j].coeffs))) for s in states]
        o, r = _loglog_fit(eps, amp)
        ring_orders.append(o)
        ring_res.append(r)
    central_amp = [float(np.max(np.abs(s.shapes[0].coeffs))) for s in states]
    central_order, _ = _loglog_fit(eps, central_amp) if all(central_amp) else (float("inf"), 0.0)
    ring_small = max(float(np.max(np.abs(smallest.shapes[j].coeffs))) for j in (1, 2))
    ratio = central_amp[0] / ring_small if ring_small > 0 else float("nan")

    (h1, h2), (h1d, h2d) = shape_sums(params, eq.gamma2_star)
    xi = xi_constant(params.alpha)
    gammas = (params.gamma0, params.gamma1, eq.gamma2_star)
    predicted = tuple(
        xi * params.b[j] * h / (gammas[j] * params.radii[j] ** (params.alpha + 2))
        for j, h in ((1, h1), (2, h2))
    )
    spec2 = disc_mode_spectrum(params.alpha, 2)[1]
    forcing = strain_forcing(params, eq.gamma2_star)
    linear = tuple(forcing[j] / (gammas[j] * 2.0 * spec2) for j in range(3))
    return AsymptoticReport(
        h1=h1,
        h2=h2,
        h1_distance=h1d,
        h2_distance=h2d,
        xi=xi,
        predicted_slope=predicted,
        measured_slope=tuple(measured),
        linear_response_slope=linear,
        leading_mode=leading,
        lambda_drift_order=drift_order,
        lambda_drift_residual=drift_res,
        ring_amplitude_order=tuple(ring_orders),
        ring_amplitude_residual=tuple(ring_res),
        central_amplitude_order=central_order,
        central_to_ring_ratio=ratio,
    )


def convexity_sweep(family: Sequence[VState], params: ConfigParams, nodes: int = 256) -> list[dict]:
    """Minimum curvature of every patch for each state; negative values are reported, not raised."""
    if not family:
        raise DomainError("family is empty")
    rows = []
    for s in family:
        mins = [
            float(np.min(curvature(s.shapes[j], s.epsilon, params.b[j], params.alpha, nodes)))
            for j in range(3)
        ]
        rows.append({"epsilon": s.epsilon, "min_curvature": mins, "convex": all(v > 0 for v in mins)})
    return rows


def vstate_to_dict(state: VState, params: ConfigParams) -> dict:
    return {
        "epsilon": state.epsilon,
        "lambda": {"omega": state.omega, "gamma2": state.gamma2},
        "patches": [
            {"j": sh.j, "b": params.b[sh.j], "fold": sh.fold, "coeffs": [float(c) for c in sh.coeffs]}
            for sh in state.shapes
        ],
    }


def vstate_from_dict(doc: dict) -> VState:
    try:
        shapes = tuple(
            PatchShape(int(p["j"]), np.asarray(p["coeffs"], dtype=float), int(p["fold"]))
            for p in sorted(doc["patches"], key=lambda p: p["j"])
        )
        return VState(
            epsilon=float(doc["epsilon"]),
            shapes=shapes,
            omega=float(doc["lambda"]["omega"]),
            gamma2=float(doc["lambda"]["gamma2"]),
        )
    except (KeyError, TypeError) as exc:
        raise DomainError(f"malformed VState document: {exc}") from exc


def write_vstate_json(path: str | Path, state: VState, params: ConfigParams) -> None:
    Path(path).write_text(json.dumps(vstate_to_dict(state, params), indent=2) + "\n", encoding="utf-8")


def read_vstate_json(path: str | Path) -> VState:
    return vstate_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
