"""Finite-size patch boundaries and the desingularized boundary functional.

Each patch family ``j`` has radius function ``R_j(x) = 1 + delta_j f_j(x)`` with
``delta_j = eps |eps|^alpha b_j^(1+alpha)`` and ``f_j = sum_{n>=2} a_n cos(n x)``.
Replica ``k`` of family ``j`` is the curve

    z(x) = c_jk + eps b_j R_j(x) exp(i (x + beta_jk)),

where ``c_jk = d_j exp(i beta_jk)`` and ``beta_jk`` is the replica angle.

The functional measures the normal velocity of each boundary in the frame
rotating at ``Omega``. It is divided by ``eps b_j`` so that it stays finite as
``eps -> 0``. The self-interaction is further divided by ``delta_j`` and
expanded so that no term cancels catastrophically. At ``eps = 0`` the functional
reduces to the point-vortex balance times ``sin x`` plus a linear operator on
the shapes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from ._quadrature import circulant_gather, offset_weights, signed_offsets
from .equilibria import ConfigParams, lambda_jacobian, solve_equilibrium
from .errors import DomainError, GeometryError, NumericalError
from .specfun import kernel_constants, sigma_spectrum

FloatArray = NDArray[np.float64]
ComplexArray = NDArray[np.complex128]

MIN_RADIUS = 0.1
MIN_GAP = 1e-8


def shape_scale(epsilon: float, b: float, alpha: float) -> float:
    """Signed amplitude ``eps |eps|^alpha b^(1+alpha)`` of the radial perturbation."""
    return epsilon * abs(epsilon) ** alpha * b ** (1.0 + alpha)


@dataclass(frozen=True, eq=False)
class PatchShape:
    """Cosine coefficients ``a_n`` (``n = 2..n_max``) of one patch family's shape."""

    j: int
    coeffs: FloatArray
    fold: int = 1

    def __post_init__(self) -> None:
        if self.j not in (0, 1, 2):
            raise DomainError(f"patch index must be 0, 1 or 2, got {self.j!r}")
        if int(self.fold) != self.fold or self.fold < 1:
            raise DomainError(f"fold must be a positive integer, got {self.fold!r}")
        a = np.array(self.coeffs, dtype=float).reshape(-1)
        if not np.all(np.isfinite(a)):
            raise DomainError("shape coefficients must be finite")
        bad = [n for n, v in zip(range(2, len(a) + 2), a) if v != 0.0 and n % self.fold]
        if bad:
            raise DomainError(f"mode(s) {bad} violate the {self.fold}-fold symmetry of patch {self.j}")
        a.flags.writeable = False
        object.__setattr__(self, "coeffs", a)
        object.__setattr__(self, "fold", int(self.fold))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PatchShape):
            return NotImplemented
        return self.j == other.j and self.fold == other.fold and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self) -> int:
        return hash((self.j, self.fold, self.coeffs.tobytes()))

    @classmethod
    def zero(cls, j: int, n_max: int, fold: int = 1) -> PatchShape:
        return cls(j=j, coeffs=np.zeros(max(n_max - 1, 0)), fold=fold)

    @property
    def n_max(self) -> int:
        return len(self.coeffs) + 1

    @property
    def modes(self) -> NDArray[np.int64]:
        return np.arange(2, self.n_max + 1)

    @property
    def permitted_modes(self) -> NDArray[np.int64]:
        mds = self.modes
        return mds[mds % self.fold == 0]

    def evaluate(self, x: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
        """Return ``f, f', f''`` at the points ``x``."""
        x = np.asarray(x, dtype=float)
        if len(self.coeffs) == 0:
            z = np.zeros_like(x)
            return z, z.copy(), z.copy()
        n = self.modes.astype(float)
        arg = np.multiply.outer(x, n)
        c, s = np.cos(arg), np.sin(arg)
        a = self.coeffs
        return c @ a, -(s @ (n * a)), -(c @ (n * n * a))


@dataclass(frozen=True)
class VState:
    """Three patch shapes plus ``(Omega, gamma2)`` at a given ``eps``."""

    epsilon: float
    shapes: tuple[PatchShape, PatchShape, PatchShape]
    omega: float
    gamma2: float

    def __post_init__(self) -> None:
        shapes = tuple(self.shapes)
        if len(shapes) != 3 or [s.j for s in shapes] != [0, 1, 2]:
            raise DomainError("a VState needs shapes for patches 0, 1, 2 in order")
        if len({s.n_max for s in shapes}) != 1:
            raise DomainError("all patch shapes must share the same truncation")
        if not all(math.isfinite(v) for v in (self.epsilon, self.omega, self.gamma2)):
            raise DomainError("epsilon, omega and gamma2 must be finite")
        object.__setattr__(self, "shapes", shapes)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "gamma2", float(self.gamma2))

    @property
    def lam(self) -> tuple[float, float]:
        return (self.omega, self.gamma2)

    @property
    def n_max(self) -> int:
        return self.shapes[0].n_max

    @classmethod
    def trivial(cls, params: ConfigParams, n_max: int, epsilon: float = 0.0) -> VState:
        """Circular patches at the point-vortex equilibrium."""
        eq = solve_equilibrium(params)
        shapes = (
            PatchShape.zero(0, n_max, params.m),
            PatchShape.zero(1, n_max),
            PatchShape.zero(2, n_max),
        )
        return cls(epsilon=epsilon, shapes=shapes, omega=eq.omega_star, gamma2=eq.gamma2_star)

    def strengths(self, params: ConfigParams) -> tuple[float, float, float]:
        return (params.gamma0, params.gamma1, self.gamma2)


@dataclass(frozen=True)
class ResidualSpectrum:
    """Fourier projection of the pointwise functional for patches 0, 1, 2.

    ``sine[j, n - 1]`` is the coefficient of ``sin(n x)`` for ``n = 1..n_max``.
    ``cosine[j, n]`` is the coefficient of ``cos(n x)`` for ``n = 0..n_max``.
    """

    sine: FloatArray
    cosine: FloatArray
    pointwise: FloatArray = field(repr=False)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.sine)))

    def cosine_energy(self) -> FloatArray:
        return np.sum(self.cosine**2, axis=1)


@dataclass(frozen=True)
class _Curve:
    center: complex
    scale: float
    w: ComplexArray
    wp: ComplexArray
    strength: float


def _grid(n: int) -> FloatArray:
    return 2.0 * math.pi * np.arange(n) / n


def _family_grid(
    state: VState, params: ConfigParams, j: int, x: FloatArray
) -> tuple[FloatArray, FloatArray, FloatArray, float]:
    shape = state.shapes[j]
    f, fp, _ = shape.evaluate(x)
    delta = shape_scale(state.epsilon, params.b[j], params.alpha)
    r = 1.0 + delta * f
    if np.min(r) < MIN_RADIUS:
        i = int(np.argmin(r))
        raise GeometryError(
            f"patch {j}: radius {r[i]:.3g} below {MIN_RADIUS} at x = {x[i]:.6g} (shape invalid)"
        )
    return f, fp, r, delta


def _curves(state: VState, params: ConfigParams, n: int) -> dict[tuple[int, int], _Curve]:
    x = _grid(n)
    e = np.exp(1j * x)
    strengths = state.strengths(params)
    out: dict[tuple[int, int], _Curve] = {}
    for j in range(3):
        _, fp, r, delta = _family_grid(state, params, j, x)
        w_loc = r * e
        wp_loc = (delta * fp + 1j * r) * e
        for k in range(params.n_replicas(j)):
            beta = params.replica_angle(j, k)
            rot = complex(math.cos(beta), math.sin(beta))
            out[(j, k)] = _Curve(
                center=params.radii[j] * rot,
                scale=state.epsilon * params.b[j],
                w=w_loc * rot,
                wp=wp_loc * rot,
                strength=strengths[j],
            )
    return out


def _cross_velocity(
    targets: ComplexArray, src: _Curve, alpha: float, c_alpha: float
) -> ComplexArray:
    """Velocity at ``targets`` induced by one source patch.

    The point-vortex part is separated analytically so the expression stays
    regular as the patch radius goes to zero.
    """
    dz = targets[:, None] - src.center
    dist2 = (dz * dz.conjugate()).real
    w = src.w[None, :]
    u = (-2.0 * (dz * w.conjugate()).real + src.scale * (w * w.conjugate()).real) / dist2
    t = src.scale * u
    one_plus = 1.0 + t
    if np.min(one_plus * dist2) < MIN_GAP**2:
        raise GeometryError("patch boundaries overlap or touch")
    c = -alpha / 2.0
    if src.scale == 0.0:
        psi = np.full_like(t, c)
    else:
        with np.errstate(invalid="ignore", divide="ignore"):
            psi = np.where(t == 0.0, c, np.expm1(c * np.log1p(t)) / np.where(t == 0.0, 1.0, t))
    kern = dist2 ** (-alpha / 2.0) * u * psi
    return c_alpha * src.strength * np.mean(src.wp[None, :] * kern, axis=1)


def check_overlap(state: VState, params: ConfigParams, curves: dict[tuple[int, int], _Curve]) -> None:
    """Raise if any node of one patch lies inside, or within ``MIN_GAP`` of, another patch.

    Each patch is star-shaped about its centre, so containment reduces to
    comparing a node's polar radius with the boundary radius at its angle.
    """
    if state.epsilon == 0.0:
        return
    reach = {key: abs(c.scale) * float(np.max(np.abs(c.w))) for key, c in curves.items()}
    for (j, k), src in curves.items():
        beta = params.replica_angle(j, k)
        frame = src.scale * complex(math.cos(beta), math.sin(beta))
        delta = shape_scale(state.epsilon, params.b[j], params.alpha)
        for key, tgt in curves.items():
            if key == (j, k) or abs(tgt.center - src.center) > reach[(j, k)] + reach[key] + MIN_GAP:
                continue
            local = (tgt.center + tgt.scale * tgt.w - src.center) / frame
            f, _, _ = state.shapes[j].evaluate(np.angle(local))
            if np.any(np.abs(local) < 1.0 + delta * f + MIN_GAP / abs(src.scale)):
                raise GeometryError(f"patches {(j, k)} and {key} overlap or touch")


def _self_term(
    f: FloatArray, fp: FloatArray, delta: float, alpha: float, corrected: bool = True
) -> FloatArray:
    """Self-induced normal velocity divided by ``C gamma``, for one patch family.

    The disc part integrates to zero and is removed exactly. What is left is
    of order one in ``delta``. The integrand behaves like ``|theta|^(1-alpha)``
    at the target node. The corrected punctured trapezoid in ``_quadrature``
    handles that singularity.
    """
    n = len(f)
    theta = signed_offsets(n)
    chord = np.abs(2.0 * np.sin(theta / 2.0))
    chord[0] = 1.0
    four_s2 = chord * chord
    kern = chord ** (-alpha)
    kern[0] = 0.0
    fy = circulant_gather(f, n)
    fpy = circulant_gather(fp, n)
    fx = f[:, None]
    fpx = fp[:, None]
    ssum = fx + fy
    q2 = (fx - fy) ** 2 / four_s2
    p1 = ssum + delta * (fx * fy + fpx * fpy)
    q1 = ssum + delta * (fx * fy + q2)
    if delta == 0.0:
        e_term = p1 - alpha / 2.0 * q1
        phi = 1.0
        tang = fpx - fpy
    else:
        lp = np.log1p(delta * p1)
        lq = np.log1p(delta * q1)
        e_term = np.expm1(lp - alpha / 2.0 * lq) / delta
        phi = np.exp(-alpha / 2.0 * lq)
        tang = (1.0 + delta * fy) * fpx - (1.0 + delta * fx) * fpy
    integrand = kern[None, :] * (np.sin(theta)[None, :] * e_term + np.cos(theta)[None, :] * tang * phi)
    weights = offset_weights(n, alpha, corrected)
    return integrand @ weights / n


def functional_values(
    state: VState, params: ConfigParams, n_quad: int, *, corrected: bool = True
) -> FloatArray:
    """Pointwise functional ``F_j(x_i)`` at ``n_quad`` equispaced nodes, shape ``(3, n_quad)``."""
    if n_quad < 8 or n_quad % 2:
        raise DomainError(f"n_quad must be an even integer >= 8, got {n_quad}")
    alpha = params.alpha
    c_alpha, _ = kernel_constants(alpha)
    x = _grid(n_quad)
    curves = _curves(state, params, n_quad)
    check_overlap(state, params, curves)
    strengths = state.strengths(params)
    out = np.empty((3, n_quad))
    for j in range(3):
        tgt = curves[(j, 0)]
        pts = tgt.center + tgt.scale * tgt.w
        vel = np.zeros(n_quad, dtype=complex)
        for key, src in curves.items():
            if key == (j, 0):
                continue
            vel += _cross_velocity(pts, src, alpha, c_alpha)
        normal = (vel * tgt.wp.conjugate()).imag
        rigid = -state.omega * (pts * tgt.wp.conjugate()).real
        f, fp, _ = state.shapes[j].evaluate(x)
        delta = shape_scale(state.epsilon, params.b[j], alpha)
        self_part = c_alpha * strengths[j] * _self_term(f, fp, delta, alpha, corrected)
        out[j] = normal + rigid + self_part
    if not np.all(np.isfinite(out)):
        j, i = np.argwhere(~np.isfinite(out))[0]
        raise NumericalError(f"non-finite functional value on patch {j} at x = {x[i]:.6g}")
    return out


def project(values: FloatArray, n_max: int) -> ResidualSpectrum:
    """Sine and cosine coefficients ``1..n_max`` (cosine also ``0``) of sampled rows."""
    n = values.shape[-1]
    if n_max > n // 2 - 1:
        raise DomainError(f"n_max = {n_max} not resolved by {n} samples")
    spec = np.fft.rfft(values, axis=-1)
    sine = -2.0 * spec[:, 1 : n_max + 1].imag / n
    cosine = 2.0 * spec[:, : n_max + 1].real / n
    cosine[:, 0] /= 2.0
    return ResidualSpectrum(sine=sine, cosine=cosine, pointwise=values)


def evaluate_functional(
    state: VState, params: ConfigParams, n_quad: int, *, corrected: bool = True
) -> ResidualSpectrum:
    """Sine-mode residual of the boundary functional for all three patch families."""
    if n_quad < 4 * state.n_max:
        raise DomainError(f"n_quad = {n_quad} must be at least 4 * n_max = {4 * state.n_max}")
    return project(functional_values(state, params, n_quad, corrected=corrected), state.n_max)


def quadrature_tolerance(params: ConfigParams, n_max: int, n_quad: int) -> float:
    """Ten times the residual floor measured at the exact zero ``(0, 0, lambda*)``.

    The floor is bounded below by one ulp of the largest balance term, so the
    tolerance never collapses to exactly zero.
    """
    state = VState.trivial(params, n_max)
    floor = evaluate_functional(state, params, n_quad).max_abs()
    scale = max(abs(state.omega) * params.d2, 1.0)
    return 10.0 * max(floor, np.finfo(float).eps * scale)


def linearized_diag(alpha: float, gamma_j: float, n: int) -> float:
    """Closed-form shape-block entry ``gamma_j n sigma_n``."""
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    return gamma_j * n * sigma_spectrum(alpha, max(n, 2))[n]


def jacobian_lambda(params: ConfigParams) -> FloatArray:
    """Derivative of the mode-1 residuals of patches 1, 2 with respect to ``(Omega, gamma2)``."""
    return lambda_jacobian(params)


def sample_boundary(state: VState, params: ConfigParams, j: int, k: int, nodes: int) -> FloatArray:
    """Equispaced-in-``x`` samples of replica ``k`` of patch family ``j``, shape ``(nodes, 2)``."""
    if nodes < 8:
        raise DomainError(f"need at least 8 nodes, got {nodes}")
    if not 0 <= k < params.n_replicas(j):
        raise DomainError(f"replica {k} does not exist for patch {j}")
    x = _grid(nodes)
    _, _, r, _ = _family_grid(state, params, j, x)
    beta = params.replica_angle(j, k)
    scale = state.epsilon * params.b[j]
    cx = params.radii[j] * math.cos(beta)
    cy = params.radii[j] * math.sin(beta)
    return np.stack([cx + scale * r * np.cos(x + beta), cy + scale * r * np.sin(x + beta)], axis=1)


def curvature(shape: PatchShape, epsilon: float, b: float, alpha: float, nodes: int) -> FloatArray:
    """Dimensionless curvature ``(R^2 + 2R'^2 - R R'') / (R^2 + R'^2)^(3/2)`` at the nodes."""
    x = _grid(nodes)
    f, fp, fpp = shape.evaluate(x)
    delta = shape_scale(epsilon, b, alpha)
    r, rp, rpp = 1.0 + delta * f, delta * fp, delta * fpp
    if np.min(r) <= 0:
        raise GeometryError("non-positive radius: shape is not star-shaped")
    return (r * r + 2.0 * rp * rp - r * rpp) / (r * r + rp * rp) ** 1.5


def patch_area(shape: PatchShape, epsilon: float, b: float, alpha: float) -> float:
    """Enclosed area ``pi (eps b)^2 (1 + delta^2 sum a_n^2 / 2)`` by Parseval."""
    delta = shape_scale(epsilon, b, alpha)
    return math.pi * (epsilon * b) ** 2 * (1.0 + 0.5 * delta * delta * float(np.sum(shape.coeffs**2)))


def write_boundary_csv(path: str | Path, state: VState, params: ConfigParams, nodes: int) -> None:
    """Write every patch replica as rows ``patch,replica,x,px,py``."""
    x = _grid(nodes)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["patch", "replica", "x", "px", "py"])
        for j in range(3):
            for k in range(params.n_replicas(j)):
                pts = sample_boundary(state, params, j, k, nodes)
                for xi, (px, py) in zip(x, pts):
                    writer.writerow([j, k, f"{xi:.17g}", f"{px:.17g}", f"{py:.17g}"])
