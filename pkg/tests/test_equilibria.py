from __future__ import annotations

import dataclasses
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from gsqg_vstates import (
    ConfigParams,
    ConfigurationError,
    DegeneracyError,
    GeometryError,
    build_configuration,
    induced_velocity,
    nondegeneracy_report,
    point_vortex_residual,
    rigid_rotation_check,
    solve_equilibrium,
)
from gsqg_vstates.equilibria import lambda_jacobian, rotate
from gsqg_vstates.specfun import interaction_sum, kernel_constants, polygon_sum

GRID = list(itertools.product((2, 3, 4, 5), (1.0, 1.25, 1.5, 1.75), (1.5, 2.0, 3.0), (0, 1)))

# (m, vartheta, d1, d2, alpha, gamma0, gamma1) -> (Omega*, gamma2*), from a 30-digit
# multiprecision brute-force summation of azimuthal velocities followed by a 2x2 solve.
MULTIPRECISION_REFERENCE = [
    ((2, 1, 1.0, 2.0, 1.0, 1.0, 1.0), (0.051810662675296751, -6.4084516111804696)),
    ((3, 0, 1.0, 2.0, 1.5, 1.0, 1.0), (0.25245583771513, 0.84693150531821511)),
    ((4, 1, 1.0, 3.0, 1.25, 1.0, -0.5), (0.077273199040746108, 8.4671812326610621)),
    ((5, 1, 1.0, 1.5, 1.75, 2.0, 1.0), (0.51851621328023548, 1.9197497755574522)),
]


def _params(m, alpha, d2, vartheta, **kw) -> ConfigParams:
    base = dict(alpha=alpha, m=m, vartheta=vartheta, d1=1.0, d2=d2, gamma0=1.0, gamma1=1.0)
    return ConfigParams(**(base | kw))


def _azimuthal_speed(target: complex, sources: list[tuple[complex, float]], c_hat: float, alpha: float) -> float:
    total = 0.0
    for z, g in sources:
        sep = target - z
        if abs(sep) == 0.0:
            continue
        vel = 1j * sep * c_hat * g / (2.0 * abs(sep) ** (alpha + 2))
        total += (vel * target.conjugate()).imag / abs(target)
    return total


def dense_oracle(p: ConfigParams) -> tuple[float, float]:
    """Solve both ring balances from pairwise sums; the balance is affine in ``gamma2``."""
    _, c_hat = kernel_constants(p.alpha)
    ring1 = [p.d1 * np.exp(1j * p.replica_angle(1, k)) for k in range(p.m)]
    ring2 = [p.d2 * np.exp(1j * p.replica_angle(2, k)) for k in range(p.m)]
    fixed = [(0j, p.gamma0)] + [(z, p.gamma1) for z in ring1]
    unit = [(z, 1.0) for z in ring2]
    rows, rhs = [], []
    for target, radius in ((ring1[0], p.d1), (ring2[0], p.d2)):
        rows.append([radius, -_azimuthal_speed(target, unit, c_hat, p.alpha)])
        rhs.append(_azimuthal_speed(target, fixed, c_hat, p.alpha))
    omega, gamma2 = np.linalg.solve(np.array(rows), np.array(rhs))
    return float(omega), float(gamma2)


@pytest.mark.parametrize("m, alpha, d2, vartheta", GRID)
def test_equilibrium_matches_dense_oracle(m, alpha, d2, vartheta):
    p = _params(m, alpha, d2, vartheta)
    eq = solve_equilibrium(p)
    omega, gamma2 = dense_oracle(p)
    assert eq.omega_star == pytest.approx(omega, rel=1e-12)
    assert eq.gamma2_star == pytest.approx(gamma2, rel=1e-12)
    p1, p2 = point_vortex_residual(eq.lam, p)
    assert abs(p1) <= 1e-12 and abs(p2) <= 1e-12


@pytest.mark.parametrize("args, expected", MULTIPRECISION_REFERENCE)
def test_equilibrium_multiprecision_reference(args, expected):
    m, vartheta, d1, d2, alpha, g0, g1 = args
    p = ConfigParams(alpha=alpha, m=m, vartheta=vartheta, d1=d1, d2=d2, gamma0=g0, gamma1=g1)
    eq = solve_equilibrium(p)
    assert eq.omega_star == pytest.approx(expected[0], rel=1e-13)
    assert eq.gamma2_star == pytest.approx(expected[1], rel=1e-13)


def test_reference_diagnostics():
    eq = solve_equilibrium(_params(3, 1.5, 2.0, 0))
    assert eq.s_alpha == pytest.approx(0.8773826753016616, rel=1e-14)
    assert eq.t_plus == pytest.approx(-0.8672182398614052, rel=1e-13)
    assert eq.t_minus == pytest.approx(6.595763079611239, rel=1e-13)
    assert eq.det_jacobian == pytest.approx(-0.6495820740401403, rel=1e-13)
    assert eq.nondeg_lhs == pytest.approx(8.681171334584722, rel=1e-13)


@pytest.mark.parametrize("m, alpha, d2, vartheta", GRID[::7])
def test_every_vortex_moves_rigidly(m, alpha, d2, vartheta):
    p = _params(m, alpha, d2, vartheta)
    eq = solve_equilibrium(p)
    cfg = build_configuration(p)
    speed_scale = abs(eq.omega_star) * p.d2
    for i, pos in enumerate(cfg.positions):
        vel = induced_velocity(pos, cfg, exclude=i)
        expected = eq.omega_star * np.array([-pos[1], pos[0]])
        assert np.max(np.abs(vel - expected)) <= 1e-12 * max(speed_scale, 1.0)


def test_central_vortex_is_at_rest():
    p = _params(4, 1.25, 2.0, 1)
    cfg = build_configuration(p)
    assert np.max(np.abs(induced_velocity((0.0, 0.0), cfg, exclude=0))) < 1e-14


def test_configuration_is_m_fold_symmetric():
    p = _params(5, 1.5, 3.0, 1)
    cfg = build_configuration(p)
    rotated = rotate(cfg.positions, 2.0 * math.pi / p.m)
    for q in rotated:
        assert np.min(np.linalg.norm(cfg.positions - q, axis=1)) < 1e-14


def test_lambda_jacobian_matches_finite_differences():
    p = _params(3, 1.5, 2.0, 0)
    eq = solve_equilibrium(p)
    h = 1e-6
    fd = np.empty((2, 2))
    for col in range(2):
        up, dn = list(eq.lam), list(eq.lam)
        up[col] += h
        dn[col] -= h
        fd[:, col] = (np.array(point_vortex_residual(up, p)) - np.array(point_vortex_residual(dn, p))) / (2 * h)
    assert np.allclose(fd, lambda_jacobian(p), rtol=0, atol=1e-9)
    assert np.linalg.det(lambda_jacobian(p)) == pytest.approx(eq.det_jacobian, rel=1e-13)


@settings(max_examples=40, deadline=None)
@given(scale=st.floats(0.1, 10.0), m=st.integers(2, 5), alpha=st.floats(1.0, 1.9), vartheta=st.sampled_from([0, 1]))
def test_strength_scaling(scale, m, alpha, vartheta):
    p = _params(m, alpha, 2.5, vartheta)
    q = dataclasses.replace(p, gamma0=scale, gamma1=scale)
    eq_p, eq_q = solve_equilibrium(p), solve_equilibrium(q)
    assert eq_q.omega_star == pytest.approx(scale * eq_p.omega_star, rel=1e-11, abs=1e-14)
    assert eq_q.gamma2_star == pytest.approx(scale * eq_p.gamma2_star, rel=1e-11, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(length=st.floats(0.2, 5.0), alpha=st.floats(1.0, 1.9))
def test_length_scaling(length, alpha):
    p = _params(3, alpha, 2.0, 0)
    q = dataclasses.replace(p, d1=length, d2=2.0 * length)
    eq_p, eq_q = solve_equilibrium(p), solve_equilibrium(q)
    assert eq_q.omega_star == pytest.approx(eq_p.omega_star * length ** (-(alpha + 2)), rel=1e-12)
    assert eq_q.gamma2_star == pytest.approx(eq_p.gamma2_star, rel=1e-12)


@pytest.mark.parametrize("m, alpha", [(3, 1.5), (4, 1.0), (5, 1.5)])
def test_determinant_root_raises_degeneracy(m, alpha):
    half_s = polygon_sum(m, alpha) / 2.0

    def den(d: float) -> float:
        return half_s - d ** (alpha + 2) * interaction_sum(d, 1, m, alpha, +1)

    grid = np.linspace(1.01, 8.0, 4000)
    values = np.array([den(d) for d in grid])
    idx = np.where(np.diff(np.sign(values)))[0]
    assert len(idx) == 1
    root = brentq(den, grid[idx[0]], grid[idx[0] + 1], xtol=1e-15)
    p = _params(m, alpha, root, 1)
    assert not nondegeneracy_report(p).det_nonzero
    with pytest.raises(DegeneracyError, match="determinant"):
        solve_equilibrium(p)


def test_vanishing_outer_strength_is_reported():
    p = _params(3, 1.5, 2.0, 0)
    eq = solve_equilibrium(p)
    da = p.d ** (p.alpha + 2)
    gamma1 = -(da - 1.0) / (eq.s_alpha / 2.0 * da - eq.t_minus)
    q = dataclasses.replace(p, gamma1=gamma1)
    report = nondegeneracy_report(q)
    assert not report.nondeg_nonzero
    assert report.det_nonzero
    assert not report.ok
    assert abs(solve_equilibrium(q).gamma2_star) < 1e-12


def test_rigid_rotation_is_fourth_order():
    p = _params(3, 1.5, 1.5, 0)
    eq = solve_equilibrium(p)
    cfg = build_configuration(p)
    period = 2.0 * math.pi / abs(eq.omega_star)
    devs = [rigid_rotation_check(cfg, eq, period / 4, period / n) for n in (128, 256)]
    assert devs[0] / devs[1] == pytest.approx(16.0, rel=0.1)
    assert rigid_rotation_check(cfg, eq, 0.0, 1.0) == 0.0


def test_rigid_rotation_detects_wrong_strength():
    p = _params(3, 1.5, 1.5, 0)
    eq = solve_equilibrium(p)
    period = 2.0 * math.pi / abs(eq.omega_star)
    good = rigid_rotation_check(build_configuration(p), eq, period / 4, period / 1024)
    bad = rigid_rotation_check(build_configuration(p, eq.gamma2_star * 1.01), eq, period / 4, period / 1024)
    assert bad > 100.0 * good


def test_velocity_at_vortex_raises():
    cfg = build_configuration(_params(2, 1.5, 2.0, 1))
    with pytest.raises(GeometryError):
        induced_velocity(cfg.positions[1], cfg)


@pytest.mark.parametrize(
    "bad",
    [
        dict(alpha=2.0),
        dict(alpha=0.5),
        dict(m=1),
        dict(m=2.5),
        dict(vartheta=2),
        dict(d1=0.0),
        dict(d2=0.5),
        dict(d2=1.0, vartheta=0),
        dict(gamma0=0.0),
        dict(b1=-1.0),
        dict(gamma1=float("inf")),
    ],
)
def test_config_params_validation(bad):
    base = dict(alpha=1.5, m=3, vartheta=0, d1=1.0, d2=2.0, gamma0=1.0, gamma1=1.0)
    with pytest.raises(ConfigurationError):
        ConfigParams(**(base | bad))


def test_equal_radii_allowed_when_staggered():
    eq = solve_equilibrium(_params(3, 1.5, 1.0, 1))
    assert math.isfinite(eq.omega_star)
