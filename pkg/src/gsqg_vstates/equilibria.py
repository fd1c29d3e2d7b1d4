"""Nested-polygon point-vortex configurations and their rigidly rotating equilibria.

Strength convention: a vortex of strength ``gamma`` induces a counterclockwise
speed ``C_hat * gamma / (2 r^(1 + alpha))`` at distance ``r``. This is the far
field of a patch of area ``pi (eps b)^2`` and amplitude ``gamma / (eps b)^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigurationError, DegeneracyError, DomainError, GeometryError
from .specfun import check_alpha, interaction_sum, kernel_constants, polygon_sum

FloatArray = NDArray[np.float64]

DEGENERACY_RTOL = 1e-10


@dataclass(frozen=True)
class ConfigParams:
    """Physical and geometric parameters of the nested configuration.

    Ring 1 sits at radius ``d1`` and angles ``2k pi/m``. Ring 2 sits at radius
    ``d2`` and angles ``(2k + vartheta) pi/m``. ``b0, b1, b2`` scale the patch
    radii ``eps * b_j``.
    """

    alpha: float
    m: int
    vartheta: int
    d1: float
    d2: float
    gamma0: float
    gamma1: float
    b0: float = 1.0
    b1: float = 1.0
    b2: float = 1.0

    def __post_init__(self) -> None:
        try:
            check_alpha(self.alpha)
        except DomainError as exc:
            raise ConfigurationError(str(exc)) from None
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 2:
            raise ConfigurationError(f"m must be an integer >= 2, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))
        if self.vartheta not in (0, 1):
            raise ConfigurationError(f"vartheta must be 0 or 1, got {self.vartheta!r}")
        object.__setattr__(self, "vartheta", int(self.vartheta))
        for name in ("d1", "d2", "gamma0", "gamma1", "b0", "b1", "b2"):
            value = getattr(self, name)
            if not math.isfinite(float(value)):
                raise ConfigurationError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.d1 <= 0:
            raise ConfigurationError(f"d1 must be positive, got {self.d1}")
        if self.d2 == self.d1 and self.vartheta == 0:
            raise ConfigurationError("rings intersect: d2 = d1 with aligned rings (vartheta = 0)")
        if self.d2 < self.d1:
            raise ConfigurationError(f"d2 must not be smaller than d1, got d1={self.d1}, d2={self.d2}")
        if self.gamma0 == 0 or self.gamma1 == 0:
            raise ConfigurationError("gamma0 and gamma1 must be nonzero")
        for name in ("b0", "b1", "b2"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")

    @property
    def d(self) -> float:
        """Ring radius ratio ``d2 / d1``."""
        return self.d2 / self.d1

    @property
    def b(self) -> tuple[float, float, float]:
        return (self.b0, self.b1, self.b2)

    @property
    def radii(self) -> tuple[float, float, float]:
        """Orbit radius of each patch family (0 for the central patch)."""
        return (0.0, self.d1, self.d2)

    def replica_angle(self, j: int, k: int) -> float:
        """Polar angle of replica ``k`` of patch family ``j``."""
        if j == 0:
            return 0.0
        if j == 1:
            return 2.0 * k * math.pi / self.m
        if j == 2:
            return (2.0 * k + self.vartheta) * math.pi / self.m
        raise DomainError(f"patch index must be 0, 1 or 2, got {j!r}")

    def n_replicas(self, j: int) -> int:
        return 1 if j == 0 else self.m


@dataclass(frozen=True)
class Configuration:
    """Point vortices of the nested configuration.

    Index 0 is the centre, then ring 1 (``k = 0..m-1``), then ring 2.
    """

    positions: FloatArray
    strengths: FloatArray
    alpha: float


@dataclass(frozen=True)
class Equilibrium:
    """Closed-form point-vortex equilibrium and its diagnostic sums."""

    omega_star: float
    gamma2_star: float
    s_alpha: float
    t_plus: float
    t_minus: float
    det_jacobian: float
    nondeg_lhs: float

    @property
    def lam(self) -> tuple[float, float]:
        return (self.omega_star, self.gamma2_star)


@dataclass(frozen=True)
class NondegeneracyReport:
    nondeg_lhs: float
    nondeg_nonzero: bool
    det: float
    det_nonzero: bool

    @property
    def ok(self) -> bool:
        return self.nondeg_nonzero and self.det_nonzero


@dataclass(frozen=True)
class _Sums:
    c_hat: float
    s: float
    t_plus: float
    t_minus: float


def _sums(params: ConfigParams) -> _Sums:
    _, c_hat = kernel_constants(params.alpha)
    return _Sums(
        c_hat=c_hat,
        s=polygon_sum(params.m, params.alpha),
        t_plus=interaction_sum(params.d, params.vartheta, params.m, params.alpha, +1),
        t_minus=interaction_sum(params.d, params.vartheta, params.m, params.alpha, -1),
    )


def build_configuration(params: ConfigParams, gamma2: float | None = None) -> Configuration:
    """Place the ``2m + 1`` vortices. ``gamma2`` defaults to the equilibrium value."""
    if gamma2 is None:
        gamma2 = solve_equilibrium(params).gamma2_star
    m = params.m
    pos = np.zeros((2 * m + 1, 2))
    strengths = np.empty(2 * m + 1)
    strengths[0] = params.gamma0
    for k in range(m):
        for j, g, offset in ((1, params.gamma1, 1), (2, gamma2, 1 + m)):
            ang = params.replica_angle(j, k)
            r = params.radii[j]
            pos[offset + k] = (r * math.cos(ang), r * math.sin(ang))
            strengths[offset + k] = g
    return Configuration(positions=pos, strengths=strengths, alpha=params.alpha)


def point_vortex_residual(lam: tuple[float, float], params: ConfigParams) -> tuple[float, float]:
    """Azimuthal balance ``P_j = Omega d_j - (induced azimuthal speed)`` on each ring.

    A vortex's own ring contributes ``gamma_j S / 2``. The factor one half comes
    from the pairwise chord geometry and is confirmed by brute-force summation.
    """
    omega, gamma2 = float(lam[0]), float(lam[1])
    sm = _sums(params)
    a = params.alpha
    g0, g1 = params.gamma0, params.gamma1
    p1 = omega * params.d1 - sm.c_hat / (2.0 * params.d1 ** (1 + a)) * (
        g0 + g1 * sm.s / 2.0 + gamma2 * sm.t_plus
    )
    p2 = omega * params.d2 - sm.c_hat / (2.0 * params.d2 ** (1 + a)) * (
        g0 + gamma2 * sm.s / 2.0 + g1 * sm.t_minus
    )
    return p1, p2


def _nondeg_terms(params: ConfigParams, sm: _Sums) -> tuple[float, float]:
    a = params.alpha
    da = params.d ** (a + 2)
    terms = ((da - 1.0) * params.gamma0, sm.s / 2.0 * da * params.gamma1, -sm.t_minus * params.gamma1)
    return sum(terms), max(abs(t) for t in terms)


def _det_terms(params: ConfigParams, sm: _Sums) -> tuple[float, float, float]:
    a = params.alpha
    da = params.d ** (a + 2)
    den = sm.s / 2.0 - da * sm.t_plus
    scale = max(abs(sm.s / 2.0), abs(da * sm.t_plus))
    det = -sm.c_hat * params.d1 / (2.0 * params.d2 ** (a + 1)) * den
    return den, scale, det


def solve_equilibrium(params: ConfigParams) -> Equilibrium:
    """Closed-form ``(Omega*, gamma2*)`` solving both ring balances."""
    sm = _sums(params)
    a = params.alpha
    den, scale, det = _det_terms(params, sm)
    if abs(den) <= DEGENERACY_RTOL * scale:
        raise DegeneracyError(
            f"degenerate configuration: Jacobian determinant vanishes (S/2 - d^(a+2) T+ = {den:.3e})"
        )
    num, _ = _nondeg_terms(params, sm)
    gamma2 = num / den
    half_s = sm.s / 2.0
    omega = (
        sm.c_hat
        / (2.0 * (params.d1 ** (a + 2) + params.d2 ** (a + 2)))
        * (2.0 * params.gamma0 + params.gamma1 * (half_s + sm.t_minus) + gamma2 * (sm.t_plus + half_s))
    )
    return Equilibrium(
        omega_star=omega,
        gamma2_star=gamma2,
        s_alpha=sm.s,
        t_plus=sm.t_plus,
        t_minus=sm.t_minus,
        det_jacobian=det,
        nondeg_lhs=num,
    )


def nondegeneracy_report(params: ConfigParams, eq: Equilibrium | None = None) -> NondegeneracyReport:
    """Report both non-degeneracy quantities with a relative zero test.

    ``eq`` is accepted for symmetry with the CLI flow; the quantities depend
    only on ``params``.
    """
    sm = _sums(params)
    lhs, lhs_scale = _nondeg_terms(params, sm)
    den, den_scale, det = _det_terms(params, sm)
    return NondegeneracyReport(
        nondeg_lhs=lhs,
        nondeg_nonzero=abs(lhs) > DEGENERACY_RTOL * lhs_scale,
        det=det,
        det_nonzero=abs(den) > DEGENERACY_RTOL * den_scale,
    )


def lambda_jacobian(params: ConfigParams) -> FloatArray:
    """Derivative of ``(P1, P2)`` with respect to ``(Omega, gamma2)``."""
    sm = _sums(params)
    a = params.alpha
    return np.array(
        [
            [params.d1, -sm.c_hat / 2.0 * sm.t_plus / params.d1 ** (1 + a)],
            [params.d2, -sm.c_hat / 2.0 * sm.s / (2.0 * params.d2 ** (1 + a))],
        ]
    )


def _pairwise_velocity(pos: FloatArray, strengths: FloatArray, c_hat: float, alpha: float) -> FloatArray:
    diff = pos[:, None, :] - pos[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(r2, np.inf)
    w = 0.5 * c_hat * strengths[None, :] * r2 ** (-(alpha + 2) / 2.0)
    # (x, y) -> (-y, x) rotates the separation counterclockwise.
    vx = -np.sum(w * diff[:, :, 1], axis=1)
    vy = np.sum(w * diff[:, :, 0], axis=1)
    return np.stack([vx, vy], axis=1)


def induced_velocity(
    point: FloatArray | tuple[float, float],
    config: Configuration,
    alpha: float | None = None,
    exclude: int | None = None,
) -> FloatArray:
    """Velocity at ``point`` induced by all vortices (optionally skipping one index)."""
    a = config.alpha if alpha is None else check_alpha(alpha)
    _, c_hat = kernel_constants(a)
    p = np.asarray(point, dtype=float)
    vel = np.zeros(2)
    for i, (src, g) in enumerate(zip(config.positions, config.strengths)):
        if i == exclude:
            continue
        dx, dy = p[0] - src[0], p[1] - src[1]
        r2 = dx * dx + dy * dy
        if r2 <= 1e-20:
            raise GeometryError(f"velocity requested at vortex {i} location {tuple(src)}")
        w = 0.5 * c_hat * g * r2 ** (-(a + 2) / 2.0)
        vel[0] -= w * dy
        vel[1] += w * dx
    return vel


def rotate(points: FloatArray, angle: float) -> FloatArray:
    """Rotate planar points (last axis of length 2) counterclockwise by ``angle``."""
    c, s = math.cos(angle), math.sin(angle)
    pts = np.asarray(points, dtype=float)
    out = np.empty_like(pts)
    out[..., 0] = c * pts[..., 0] - s * pts[..., 1]
    out[..., 1] = s * pts[..., 0] + c * pts[..., 1]
    return out


def rigid_rotation_check(config: Configuration, eq: Equilibrium, t_final: float, dt: float) -> float:
    """Integrate the point-vortex ODE with RK4 and measure the drift from rigid rotation.

    Returns the maximum over steps and vortices of ``|z_i(t) - Q(Omega* t) z_i(0)|``.
    """
    if t_final == 0:
        return 0.0
    if dt <= 0 or t_final < 0:
        raise DomainError("need dt > 0 and t_final >= 0")
    if t_final < 10 * dt:
        raise DomainError("t_final must be at least 10 * dt")
    steps = int(math.ceil(t_final / dt - 1e-9))
    h = t_final / steps
    _, c_hat = kernel_constants(config.alpha)
    z0 = np.array(config.positions, dtype=float)
    g = np.asarray(config.strengths, dtype=float)
    radii = np.linalg.norm(z0, axis=1)
    min_gap = 1e-6 * float(np.min(radii[radii > 0])) if np.any(radii > 0) else 1e-6

    def rhs(z: FloatArray) -> FloatArray:
        return _pairwise_velocity(z, g, c_hat, config.alpha)

    z = z0.copy()
    worst = 0.0
    for n in range(1, steps + 1):
        k1 = rhs(z)
        k2 = rhs(z + 0.5 * h * k1)
        k3 = rhs(z + 0.5 * h * k2)
        k4 = rhs(z + h * k3)
        z = z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        diff = z[:, None, :] - z[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        np.fill_diagonal(dist, np.inf)
        if dist.min() < min_gap:
            raise GeometryError(f"vortex collision at t = {n * h:.6g}")
        ref = rotate(z0, eq.omega_star * n * h)
        worst = max(worst, float(np.max(np.linalg.norm(z - ref, axis=1))))
    return worst
