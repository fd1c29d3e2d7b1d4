"""Periodic quadrature for integrands with an ``|theta|^-alpha`` point singularity.

The integrands handled here have the form ``K(theta) = |theta|^-alpha g(theta)``
near ``theta = 0`` with ``g`` smooth and ``g(0) = 0``. The odd part of ``K``
cancels on a symmetric grid. The even part behaves like ``|theta|^(2-alpha)``
and the punctured trapezoid rule misses it at order ``h^(3-alpha)``.
The generalized Euler-Maclaurin expansion for such integrands gives that
error as a series in ``zeta(alpha - 2 - 2j) g^(2j+2)(0) h^(3-alpha+2j)``.
The first two terms are removed by reweighting the four nodes nearest the
singularity, with derivatives estimated from those same nodes.
What remains is ``O(h^(7-alpha))``.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray
from scipy.special import zeta

FloatArray = NDArray[np.float64]


@lru_cache(maxsize=64)
def near_weights(alpha: float) -> tuple[float, float]:
    """Relative weight corrections at offsets ``+-h`` and ``+-2h``."""
    z2 = float(zeta(alpha - 2.0))
    z4 = float(zeta(alpha - 4.0))
    # The punctured sum overshoots the integral by these terms, so subtract them.
    c1 = -(16.0 * z2 - 4.0 * z4) / 12.0
    c2 = -(2.0**alpha) * (z4 - z2) / 12.0
    return c1, c2


def offset_weights(n: int, alpha: float, corrected: bool = True) -> FloatArray:
    """Trapezoid weights (in units of ``h``) indexed by node offset ``k = 0..n-1``.

    Offset 0 is the singular node and gets weight 0. Offsets ``k`` and ``n - k``
    are the mirror pair ``+-k h``.
    """
    if n < 8:
        raise ValueError(f"need at least 8 nodes for the corrected rule, got {n}")
    w = np.ones(n)
    w[0] = 0.0
    if corrected:
        c1, c2 = near_weights(float(alpha))
        w[1] += c1
        w[n - 1] += c1
        w[2] += c2
        w[n - 2] += c2
    return w


def signed_offsets(n: int) -> FloatArray:
    """Angles ``theta_k`` in ``(-pi, pi]`` for offsets ``k = 0..n-1``."""
    k = np.arange(n)
    k = np.where(k > n // 2, k - n, k)
    return 2.0 * math.pi * k / n


def circulant_gather(values: FloatArray, n: int) -> FloatArray:
    """Return ``out[i, k] = values[(i + k) % n]`` for a length-``n`` array (or stack)."""
    idx = (np.arange(n)[:, None] + np.arange(n)[None, :]) % n
    return values[..., idx]
