"""Special constants, mode spectra and lattice sums used throughout the package.

All functions are pure. Lattice sums run left to right in the summation index
so results are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigurationError, DomainError, NumericalError

FloatArray = NDArray[np.float64]

COINCIDENCE_TOL = 1e-12


def check_alpha(alpha: float, *, solver_range: bool = True) -> float:
    """Validate the kernel exponent.

    ``solver_range`` selects [1, 2); otherwise the open interval (0, 2).
    """
    a = float(alpha)
    if not math.isfinite(a):
        raise DomainError(f"alpha must be finite, got {alpha!r}")
    if solver_range and not (1.0 <= a < 2.0):
        raise DomainError(f"alpha must lie in [1, 2), got {a}")
    if not solver_range and not (0.0 < a < 2.0):
        raise DomainError(f"alpha must lie in (0, 2), got {a}")
    return a


def gamma_fn(x: float) -> float:
    """Euler Gamma function with an explicit pole check."""
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise DomainError(f"Gamma has a pole at x = {x:g}")
    return math.gamma(x)


def kernel_constants(alpha: float) -> tuple[float, float]:
    """Return ``(C, C_hat)`` for the kernel ``C/(2 pi) |x|^-alpha``.

    ``C_hat = alpha * C`` sets the point-vortex speed ``C_hat * gamma / (2 r^(1+alpha))``.
    """
    a = check_alpha(alpha, solver_range=False)
    c = gamma_fn(a / 2.0) / (2.0 ** (1.0 - a) * gamma_fn(1.0 - a / 2.0))
    return c, a * c


@dataclass(frozen=True)
class SpectrumTable:
    """Mode spectrum ``sigma_n`` for ``n = 1..n_max`` (``values[n - 1]``)."""

    alpha: float
    values: FloatArray

    def __getitem__(self, n: int) -> float:
        if n < 1 or n > len(self.values):
            raise IndexError(f"mode {n} outside 1..{len(self.values)}")
        return float(self.values[n - 1])

    @property
    def n_max(self) -> int:
        return len(self.values)


def sigma_spectrum(alpha: float, n_max: int) -> SpectrumTable:
    """Closed-form spectrum of the linearized self-interaction.

    For ``alpha = 1`` this is the harmonic-type sum ``(2/pi) sum_{i<=n} 1/(2i-1)``.
    For ``alpha in (1, 2)`` it is the Gamma-ratio form, whose ``n``-dependent ratio
    is advanced by its exact recurrence instead of evaluating large Gammas.
    """
    a = check_alpha(alpha)
    if int(n_max) != n_max or n_max < 2:
        raise DomainError(f"n_max must be an integer >= 2, got {n_max!r}")
    n_max = int(n_max)
    out = np.empty(n_max)
    if a == 1.0:
        acc = 0.0
        for i in range(1, n_max + 1):
            acc += 1.0 / (2 * i - 1)
            out[i - 1] = 2.0 / math.pi * acc
    else:
        # r_n / r_1 = prod_{i<n} (i + 1/2 + e/2) / (i + 1/2 - e/2) with e = alpha - 1, so
        # r_1 - r_n = -r_1 expm1(sum log1p(e / (i + 1/2 - e/2))) stays accurate as alpha -> 1.
        pref = 2.0 ** (a - 1.0) * gamma_fn(1.0 - a) / gamma_fn(1.0 - a / 2.0) ** 2
        r1 = gamma_fn(1.0 + a / 2.0) / gamma_fn(2.0 - a / 2.0)
        e = a - 1.0
        log_ratio = 0.0
        for n in range(1, n_max + 1):
            out[n - 1] = -pref * r1 * math.expm1(log_ratio)
            log_ratio += math.log1p(e / (n + 0.5 - e / 2.0))
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"non-finite spectrum entry at alpha = {a}")
    out.flags.writeable = False
    return SpectrumTable(alpha=a, values=out)


def disc_mode_spectrum(alpha: float, n_max: int) -> FloatArray:
    """Spectrum of the self-interaction operator measured relative to mode 1.

    A mode-1 shape change is a translation of the patch and induces no normal
    velocity, so the physically meaningful multiplier is ``sigma_n - sigma_1``.
    For ``alpha > 1`` this equals ``sigma_n``; at ``alpha = 1`` it drops the
    ``i = 1`` term of the harmonic-type sum.
    """
    table = sigma_spectrum(alpha, n_max)
    return np.asarray(table.values - table.values[0])


def polygon_sum(m: int, alpha: float) -> float:
    """Self-ring lattice sum ``sum_{k=1}^{m-1} (2 sin(k pi/m))^-alpha``."""
    if int(m) != m or m < 2:
        raise DomainError(f"m must be an integer >= 2, got {m!r}")
    a = check_alpha(alpha, solver_range=False)
    total = 0.0
    for k in range(1, int(m)):
        total += (2.0 * math.sin(k * math.pi / m)) ** (-a)
    return total


def interaction_sum(d: float, vartheta: int, m: int, alpha: float, sign: int) -> float:
    """Cross-ring lattice sum ``T^+`` (``sign = +1``) or ``T^-`` (``sign = -1``).

    ``T^+`` is the azimuthal pull of the outer ring on an inner-ring vortex in
    units of ``1/d1^(1+alpha)``; ``T^-`` is the reverse, with ``d`` inverted.
    """
    if sign not in (1, -1):
        raise DomainError(f"sign must be +1 or -1, got {sign!r}")
    if vartheta not in (0, 1):
        raise DomainError(f"vartheta must be 0 or 1, got {vartheta!r}")
    if int(m) != m or m < 2:
        raise DomainError(f"m must be an integer >= 2, got {m!r}")
    if not (d > 0 and math.isfinite(d)):
        raise DomainError(f"d must be positive and finite, got {d!r}")
    a = check_alpha(alpha, solver_range=False)
    q = float(d) ** sign
    total = 0.0
    for k in range(int(m)):
        c = math.cos((2 * k + sign * vartheta) * math.pi / m)
        den = 1.0 + q * q - 2.0 * q * c
        if den < COINCIDENCE_TOL:
            raise ConfigurationError(
                f"rings intersect: coincident vortices at k = {k} (d = {d}, vartheta = {vartheta})"
            )
        total += (1.0 - q * c) / den ** (a / 2.0 + 1.0)
    return total


def xi_constant(alpha: float) -> float:
    """Prefactor ``(a+2) G(1-a/2) G(3-a/2) / (4 G(2-a))`` of the first-order shape law."""
    a = check_alpha(alpha)
    return (a + 2.0) * gamma_fn(1.0 - a / 2.0) * gamma_fn(3.0 - a / 2.0) / (4.0 * gamma_fn(2.0 - a))
