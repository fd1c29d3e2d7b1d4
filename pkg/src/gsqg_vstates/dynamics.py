"""Contour dynamics for a set of uniform patches, used as an independent check.

Each curve is a closed counterclockwise polygon sampled on a uniform parameter
grid. Node velocity is

    v(x) = C/(2 pi) sum_q amp_q  closed-integral  z_q'(t) / |x - z_q(t)|^alpha dt.

On the curve carrying ``x`` the integrand is replaced by
``(z'(t) - z'(s)) / |z(s) - z(t)|^alpha``. The subtracted piece is tangent to
the curve at ``x`` and only reparametrizes it. Curve derivatives are spectral.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize_scalar

from ._quadrature import circulant_gather, offset_weights
from .contour import VState, sample_boundary
from .equilibria import ConfigParams
from .errors import DomainError, GeometryError, NumericalError
from .specfun import check_alpha, kernel_constants

FloatArray = NDArray[np.float64]
ComplexArray = NDArray[np.complex128]

CFL_FRACTION = 0.2
MIN_GAP = 1e-8


@dataclass(frozen=True)
class CurveEnsemble:
    """Closed boundary curves with uniform vorticity amplitudes.

    ``nodes`` has shape ``(n_curves, n_nodes, 2)``. ``patch`` and ``replica``
    label each curve; ``amplitude`` is the vorticity inside it.
    """

    nodes: FloatArray
    amplitude: FloatArray
    patch: NDArray[np.int64]
    replica: NDArray[np.int64]

    def __post_init__(self) -> None:
        z = np.array(self.nodes, dtype=float)
        if z.ndim != 3 or z.shape[2] != 2:
            raise DomainError(f"nodes must have shape (curves, nodes, 2), got {z.shape}")
        if z.shape[1] < 8:
            raise DomainError(f"need at least 8 nodes per curve, got {z.shape[1]}")
        if not np.all(np.isfinite(z)):
            raise NumericalError("non-finite node coordinates")
        amp = np.array(self.amplitude, dtype=float).reshape(-1)
        patch = np.array(self.patch, dtype=np.int64).reshape(-1)
        replica = np.array(self.replica, dtype=np.int64).reshape(-1)
        if not (len(amp) == len(patch) == len(replica) == z.shape[0]):
            raise DomainError("amplitude, patch and replica need one entry per curve")
        for arr in (z, amp, patch, replica):
            arr.flags.writeable = False
        object.__setattr__(self, "nodes", z)
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "patch", patch)
        object.__setattr__(self, "replica", replica)

    @property
    def n_curves(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[1]

    def complex_nodes(self) -> ComplexArray:
        return self.nodes[..., 0] + 1j * self.nodes[..., 1]

    def with_nodes(self, z: ComplexArray | FloatArray) -> CurveEnsemble:
        z = np.asarray(z)
        pts = np.stack([z.real, z.imag], axis=-1) if np.iscomplexobj(z) else z
        return CurveEnsemble(pts, self.amplitude, self.patch, self.replica)

    def rotated(self, angle: float) -> CurveEnsemble:
        return self.with_nodes(self.complex_nodes() * complex(math.cos(angle), math.sin(angle)))


def ensemble_from_vstate(state: VState, params: ConfigParams, nodes: int) -> CurveEnsemble:
    """Sample every patch replica of ``state``; amplitude is ``gamma_j / (eps b_j)^2``."""
    if state.epsilon == 0.0:
        raise DomainError("a point-vortex state (eps = 0) has no boundary to evolve")
    curves, amp, patch, replica = [], [], [], []
    strengths = state.strengths(params)
    for j in range(3):
        for k in range(params.n_replicas(j)):
            curves.append(sample_boundary(state, params, j, k, nodes))
            amp.append(strengths[j] / (state.epsilon * params.b[j]) ** 2)
            patch.append(j)
            replica.append(k)
    return CurveEnsemble(np.stack(curves), np.array(amp), np.array(patch), np.array(replica))


def spectral_derivative(z: ComplexArray) -> ComplexArray:
    """``dz/dt`` of periodic samples along the last axis, ``t`` in ``[0, 2 pi)``."""
    k = _wavenumbers(z.shape[-1])
    return np.fft.ifft(1j * k * np.fft.fft(z, axis=-1), axis=-1)


def enclosed_areas(ensemble: CurveEnsemble) -> FloatArray:
    """Signed area of each curve (positive for counterclockwise)."""
    z = ensemble.complex_nodes()
    zp = spectral_derivative(z)
    return 0.5 * np.mean((z.conjugate() * zp).imag, axis=-1) * 2.0 * math.pi


def angular_impulse(ensemble: CurveEnsemble) -> float:
    """``sum amp * integral |x|^2 dA`` over all patches."""
    z = ensemble.complex_nodes()
    zp = spectral_derivative(z)
    moments = 0.25 * np.mean(np.abs(z) ** 2 * (z.conjugate() * zp).imag, axis=-1) * 2.0 * math.pi
    return float(np.sum(ensemble.amplitude * moments))


def check_geometry(ensemble: CurveEnsemble) -> None:
    """Raise if a curve is not counterclockwise or two curves touch."""
    areas = enclosed_areas(ensemble)
    if np.any(areas <= 0):
        raise GeometryError(f"curve {int(np.argmin(areas))} is not counterclockwise or is degenerate")
    z = ensemble.complex_nodes()
    centre = np.mean(z, axis=1)
    reach = np.max(np.abs(z - centre[:, None]), axis=1)
    for p in range(ensemble.n_curves):
        for q in range(p + 1, ensemble.n_curves):
            if abs(centre[p] - centre[q]) > reach[p] + reach[q] + MIN_GAP:
                continue
            gap = float(np.min(np.abs(z[p][:, None] - z[q][None, :])))
            if gap < MIN_GAP or np.any(_inside(z[p], z[q])) or np.any(_inside(z[q], z[p])):
                raise GeometryError(f"curves {p} and {q} intersect")


def _inside(points: ComplexArray, polygon: ComplexArray) -> NDArray[np.bool_]:
    """Winding-number test of ``points`` against the closed polygon through ``polygon``."""
    d = polygon[None, :] - points[:, None]
    winding = np.sum(np.angle(np.roll(d, -1, axis=1) / d), axis=1)
    return np.abs(winding) > math.pi


def cde_velocity(ensemble: CurveEnsemble, alpha: float, *, cross_only: bool = False) -> FloatArray:
    """Velocity at every node, shape ``(n_curves, n_nodes, 2)``."""
    a = check_alpha(alpha)
    c_alpha, _ = kernel_constants(a)
    z = ensemble.complex_nodes()
    zp = spectral_derivative(z)
    n_c, n = z.shape
    flat, flat_p = z.reshape(-1), zp.reshape(-1)
    dist = np.abs(flat[:, None] - flat[None, :])
    owner = np.repeat(np.arange(n_c), n)
    same = owner[:, None] == owner[None, :]
    if np.any(dist[~same] < MIN_GAP):
        raise GeometryError("patch boundaries intersect")
    dist[same] = 1.0
    src_weight = np.repeat(ensemble.amplitude, n) / n
    kern = np.where(same, 0.0, dist ** (-a))
    vel = kern @ (src_weight * flat_p)
    vel = vel.reshape(n_c, n)
    if not cross_only:
        weights = offset_weights(n, a)
        for p in range(n_c):
            dz = np.abs(circulant_gather(z[p], n) - z[p][:, None])
            dz[:, 0] = 1.0
            dzp = circulant_gather(zp[p], n) - zp[p][:, None]
            vel[p] += ensemble.amplitude[p] / n * ((dz ** (-a) * dzp) @ weights)
    vel *= c_alpha
    return np.stack([vel.real, vel.imag], axis=-1)


def _wavenumbers(n: int) -> FloatArray:
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    return k


def arclength_velocity(z: ComplexArray, v: ComplexArray) -> ComplexArray:
    """Keep the normal part of ``v`` and replace the tangential part.

    The new tangential speed keeps ``|dz/dt|`` uniform in time up to a common
    factor, so nodes neither bunch nor spread. Shapes evolve exactly as
    under ``v`` because only the parametrization changes.
    """
    n = z.shape[-1]
    k = _wavenumbers(n)
    zp = spectral_derivative(z)
    zpp = spectral_derivative(zp)
    speed = np.abs(zp)
    tangent = zp / speed
    normal = -1j * tangent
    kappa = (zp.conjugate() * zpp).imag / speed**3
    u_n = (v * normal.conjugate()).real
    stretch = kappa * speed * u_n
    rate = np.mean(stretch, axis=-1, keepdims=True) - stretch
    coef = np.fft.fft(rate, axis=-1)
    safe_k = np.where(k == 0, 1.0, k)
    u_t = np.fft.ifft(np.where(k == 0, 0.0, coef / (1j * safe_k)), axis=-1).real
    return u_n * normal + u_t * tangent


def spectral_filter(z: ComplexArray, order: int = 36) -> ComplexArray:
    """Exponential filter ``exp(-36 (|k| / k_max)^order)`` along the last axis.

    Modes below half the Nyquist wavenumber pass unchanged to roundoff. The
    Nyquist mode, which the spectral derivative cannot see, is removed.
    """
    n = z.shape[-1]
    k = np.abs(np.fft.fftfreq(n, d=1.0 / n))
    sigma = np.exp(-36.0 * (k / (n / 2.0)) ** order)
    return np.fft.ifft(np.fft.fft(z, axis=-1) * sigma, axis=-1)


def _min_spacing(z: ComplexArray) -> float:
    return float(np.min(np.abs(np.roll(z, -1, axis=-1) - z)))


@dataclass(frozen=True)
class EvolutionResult:
    final: CurveEnsemble
    times: FloatArray
    areas: FloatArray
    snapshots: list[tuple[float, CurveEnsemble]] = field(default_factory=list, repr=False)

    def area_drift(self) -> float:
        """Largest relative change of any patch area over the run."""
        return float(np.max(np.abs(self.areas - self.areas[0]) / np.abs(self.areas[0])))


def evolve(
    ensemble: CurveEnsemble,
    alpha: float,
    t_final: float,
    dt: float,
    *,
    snapshot_every: int = 0,
    tangential: str = "arclength",
    filter_order: int = 36,
) -> EvolutionResult:
    """Classical RK4 with a fixed step no larger than ``dt``.

    Every step checks ``dt * max|v| <= 0.2 * min node spacing`` and curve
    disjointness. ``snapshot_every > 0`` stores every that-many steps.
    ``tangential = "arclength"`` moves nodes with ``arclength_velocity``;
    ``"raw"`` uses ``cde_velocity`` unchanged, whose tangential part is
    parametrization dependent and drives node clustering.
    After each step the node coordinates pass through ``spectral_filter``,
    which removes the undifferentiable Nyquist mode (0 disables it).
    """
    if tangential not in ("arclength", "raw"):
        raise DomainError(f"tangential must be 'arclength' or 'raw', got {tangential!r}")
    if not (dt > 0 and math.isfinite(dt)):
        raise DomainError(f"dt must be positive, got {dt!r}")
    if not (t_final >= 0 and math.isfinite(t_final)):
        raise DomainError(f"t_final must be non-negative, got {t_final!r}")
    check_geometry(ensemble)
    steps = math.ceil(t_final / dt - 1e-9) if t_final > 0 else 0
    h = t_final / steps if steps else 0.0
    areas = [enclosed_areas(ensemble)]
    times = [0.0]
    snaps = [(0.0, ensemble)] if snapshot_every else []

    def rhs(z: ComplexArray) -> ComplexArray:
        v = cde_velocity(ensemble.with_nodes(z), alpha)
        vz = v[..., 0] + 1j * v[..., 1]
        return arclength_velocity(z, vz) if tangential == "arclength" else vz

    z = ensemble.complex_nodes()
    for step in range(steps):
        t = step * h
        k1 = rhs(z)
        limit = CFL_FRACTION * _min_spacing(z)
        if h * float(np.max(np.abs(k1))) > limit:
            raise NumericalError(
                f"step guard violated at t = {t:.6g}: dt * max|v| = {h * np.max(np.abs(k1)):.3g} "
                f"> {limit:.3g}; use a smaller dt"
            )
        try:
            k2 = rhs(z + 0.5 * h * k1)
            k3 = rhs(z + 0.5 * h * k2)
            k4 = rhs(z + h * k3)
        except GeometryError as exc:
            raise GeometryError(f"{exc} at t = {t:.6g}") from exc
        z = z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if filter_order:
            z = spectral_filter(z, filter_order)
        current = ensemble.with_nodes(z)
        try:
            check_geometry(current)
        except GeometryError as exc:
            raise GeometryError(f"{exc} at t = {t + h:.6g}") from exc
        areas.append(enclosed_areas(current))
        times.append((step + 1) * h)
        if snapshot_every and (step + 1) % snapshot_every == 0:
            snaps.append(((step + 1) * h, current))
    final = ensemble.with_nodes(z)
    return EvolutionResult(final=final, times=np.array(times), areas=np.array(areas), snapshots=snaps)


def _fourier(z: ComplexArray) -> tuple[ComplexArray, FloatArray]:
    return np.fft.fft(z, axis=-1) / z.shape[-1], _wavenumbers(z.shape[-1])


def _closest_distances(initial: ComplexArray, points: ComplexArray) -> FloatArray:
    """Distance from each point to the trigonometric interpolant of its own curve."""
    coef, k = _fourier(initial)
    n_c, n = initial.shape
    t0 = 2.0 * math.pi * np.arange(n) / n
    nearest = np.argmin(np.abs(points[:, :, None] - initial[:, None, :]), axis=2)
    t = t0[nearest]
    for _ in range(8):
        e = np.exp(1j * t[:, :, None] * k)
        z = np.sum(coef[:, None, :] * e, axis=2)
        z1 = np.sum(coef[:, None, :] * (1j * k) * e, axis=2)
        z2 = np.sum(coef[:, None, :] * (-(k**2)) * e, axis=2)
        g = ((z - points) * z1.conjugate()).real
        gp = np.abs(z1) ** 2 + ((z - points) * z2.conjugate()).real
        t = t - g / np.where(gp > 0, gp, np.abs(z1) ** 2)
    e = np.exp(1j * t[:, :, None] * k)
    z = np.sum(coef[:, None, :] * e, axis=2)
    return np.abs(z - points)


def rotation_fit(
    initial: CurveEnsemble, final: CurveEnsemble, t: float, method: str = "closest"
) -> tuple[float, float]:
    """Best rigid rotation taking ``initial`` to ``final``: ``(omega_fit, rms deviation)``.

    ``nodes`` matches node to node (closed form). ``closest`` measures each
    final node against the whole rotated initial curve, so tangential drift of
    the nodes along the boundary does not count as deviation.
    """
    if t == 0:
        raise DomainError("rotation_fit needs t != 0")
    if initial.nodes.shape != final.nodes.shape:
        raise DomainError("initial and final ensembles must have matching node counts")
    if method not in ("nodes", "closest"):
        raise DomainError(f"method must be 'nodes' or 'closest', got {method!r}")
    z0, z1 = initial.complex_nodes(), final.complex_nodes()
    phi = float(np.angle(np.sum(z1 * z0.conjugate())))
    if method == "nodes":
        dev = float(np.sqrt(np.mean(np.abs(z1 - np.exp(1j * phi) * z0) ** 2)))
        return phi / t, dev

    def objective(angle: float) -> float:
        return float(np.mean(_closest_distances(z0, z1 * np.exp(-1j * angle)) ** 2))

    half_width = 0.5 * math.pi / max(1, int(np.max(final.replica)) + 1)
    res = minimize_scalar(
        objective, bounds=(phi - half_width, phi + half_width), method="bounded", options={"xatol": 1e-12}
    )
    return float(res.x) / t, math.sqrt(float(res.fun))


def write_trajectory_csv(path: str | Path, snapshots: list[tuple[float, CurveEnsemble]]) -> None:
    """Rows ``t,patch,replica,node,px,py`` for every stored snapshot."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "patch", "replica", "node", "px", "py"])
        for t, ens in snapshots:
            for c in range(ens.n_curves):
                for i, (px, py) in enumerate(ens.nodes[c]):
                    writer.writerow(
                        [f"{t:.17g}", int(ens.patch[c]), int(ens.replica[c]), i, f"{px:.17g}", f"{py:.17g}"]
                    )


def write_summary_json(path: str | Path, omega_fit: float, deviation: float, area_drift: float) -> None:
    doc = {"omega_fit": omega_fit, "deviation": deviation, "area_drift": area_drift}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
