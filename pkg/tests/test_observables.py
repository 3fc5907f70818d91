"""Martingale observables, exponents, Schwarzian and conditioning weight."""

import math

import numpy as np
import pytest

from hsle.errors import DomainError, SwallowedError
from hsle.loewner import HalfPlaneCurve, HullMapState, evolve_points
from hsle.observables import (HsleMartingaleSpec, RestrictionExponents,
                              conditioning_weight, mart_hsle_path,
                              mart_sle_rho_path, mobius_jet,
                              poisson_kernel_series, poisson_kernel_weight,
                              schwarzian, stopped_index)
from hsle.sde import RngSeed, simulate_sle
from hsle.specialfn import HsleFunction


def tracked_sle(kappa, T, dt, seed, x=1.0, y=2.0):
    d = simulate_sle(kappa, T, dt, seed)
    return evolve_points(d, [x, y], names=["x", "y"])


def test_m0_formula():
    spec = HsleMartingaleSpec(3.0, 0.0, 1.0, 2.0)
    fn = HsleFunction(3.0, 0.0)
    want = (0.5 ** spec.a) * 1.0 * fn.value(0.5)
    assert spec.m0() == pytest.approx(want, rel=1e-12)


def test_mart_path_initial_value():
    spec = HsleMartingaleSpec(3.0, 0.0, 1.0, 2.0)
    d = tracked_sle(3.0, 0.1, 1e-3, RngSeed(1))
    m = mart_hsle_path(d, spec)
    # F enters through the interpolation table: agreement at its accuracy
    assert m[0] == pytest.approx(spec.m0(), rel=2e-4)


def test_mart_path_rho_minus_two_constant_one():
    spec = HsleMartingaleSpec(3.0, -2.0, 1.0, 2.0)
    d = tracked_sle(3.0, 0.2, 1e-3, RngSeed(2))
    m = mart_hsle_path(d, spec)
    assert np.allclose(m, 1.0, atol=1e-10)


def test_mart_path_requires_tracks():
    spec = HsleMartingaleSpec(3.0, 0.0, 1.0, 2.0)
    d = simulate_sle(3.0, 0.1, 1e-3, RngSeed(3))
    with pytest.raises(DomainError):
        mart_hsle_path(d, spec)


def test_mart_flatness_small_ensemble():
    spec = HsleMartingaleSpec(3.0, 0.0, 1.0, 2.0)
    vals = []
    for s in range(300):
        d = tracked_sle(3.0, 0.5, 2e-3, RngSeed(4, s))
        m = mart_hsle_path(d, spec)
        j, z, _ = poisson_kernel_series(d, 1.0, 2.0)
        vals.append(m[stopped_index(j, z)])
    vals = np.array(vals)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - spec.m0()) <= 3.0 * se


def test_mart_sle_rho_trivial():
    d = tracked_sle(4.0, 0.1, 1e-3, RngSeed(5))
    m = mart_sle_rho_path(d, 4.0, 0.0, 0.0, 1.0, 2.0)
    assert np.allclose(m, 1.0, atol=1e-12)


def test_mart_sle_rho_initial_value():
    d = tracked_sle(4.0, 0.1, 1e-3, RngSeed(6))
    rho, nu, x, y = 2.0, -1.0, 1.0, 2.0
    m = mart_sle_rho_path(d, 4.0, rho, nu, x, y)
    want = x ** (rho / 4.0) * y ** (nu / 4.0) \
        * (y - x) ** (rho * nu / (2.0 * 4.0))
    assert m[0] == pytest.approx(want, rel=1e-12)


def test_mart_sle_rho_flatness():
    kappa, rho, nu = 4.0, 2.0, -2.0
    x, y = 1.0, 2.0
    vals = []
    for s in range(400):
        d = tracked_sle(kappa, 0.3, 2e-3, RngSeed(7, s))
        m = mart_sle_rho_path(d, kappa, rho, nu, x, y)
        j, z, _ = poisson_kernel_series(d, x, y)
        vals.append(m[stopped_index(j, z)])
    vals = np.array(vals)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    m0 = x ** (rho / kappa) * y ** (nu / kappa) \
        * (y - x) ** (rho * nu / (2 * kappa))
    assert abs(vals.mean() - m0) <= 3.0 * se


def test_poisson_weight_empty_curve():
    c = HalfPlaneCurve(np.array([0.0 + 0.0j]))
    assert poisson_kernel_weight(c, 1.0, 2.0, 1.0) == pytest.approx(1.0)


def test_poisson_weight_vertical_slit():
    h = 1.0
    t = h * h / 4.0
    seg = 1j * np.linspace(0.0, h, 500)
    c = HalfPlaneCurve(seg)
    gx = math.sqrt(1.0 + 4.0 * t)
    gy = math.sqrt(4.0 + 4.0 * t)
    dx = 1.0 / gx
    dy = 2.0 / gy
    want = dx * dy / (gx - gy) ** 2
    got = poisson_kernel_weight(c, 1.0, 2.0, 1.0)
    assert got == pytest.approx(want, rel=1e-9)


def test_poisson_weight_swallowed_raises():
    # curve that arches over x=0.2: the point is absorbed
    th = np.linspace(0.0, math.pi, 400)
    arc = 0.25 + 0.24 * np.exp(1j * th[::-1])
    pts = np.concatenate(([0.01 + 0j], arc))
    pts[0] = complex(pts[0].real, 0.0)
    c = HalfPlaneCurve(pts)
    with pytest.raises(SwallowedError):
        poisson_kernel_weight(c, 0.25, 3.0, 1.0)


def test_exponent_identity_restriction_vs_martingale():
    for kappa in (2.0, 3.0, 4.0, 16.0 / 3.0, 6.0):
        for rho in (-1.5, 0.0, 1.0):
            ms = HsleMartingaleSpec(kappa, rho, 1.0, 2.0)
            re = RestrictionExponents(kappa, rho)
            assert abs(ms.b - re.b) < 1e-15


def test_restriction_exponent_values():
    re = RestrictionExponents(3.0, 0.0)
    assert re.b1 == pytest.approx(0.5)
    assert re.b2 == 0.0
    assert re.b3 == 0.0
    assert re.c == pytest.approx(0.5)
    assert re.b == pytest.approx(0.5)


def test_schwarzian_identity_and_mobius():
    ident = mobius_jet(1.0, 0.0, 0.0, 1.0)
    assert schwarzian(ident, 0.7) == 0.0
    mob = mobius_jet(2.0, 1.0, 1.0, 3.0)
    assert abs(schwarzian(mob, 0.4)) < 1e-12


def test_schwarzian_slit_map_vs_fd():
    state = HullMapState(c=np.array([0.0]), dt=np.array([0.09]))
    x0 = 1.3
    got = schwarzian(state.jet, x0)

    def g(x):
        return state.transport_real(x)[0]

    h = 1e-2
    xs = np.array([-3, -2, -1, 0, 1, 2, 3], dtype=float) * h + x0
    vals = np.array([g(v) for v in xs])
    d1 = (-vals[0] + 9 * vals[1] - 45 * vals[2] + 45 * vals[4]
          - 9 * vals[5] + vals[6]) / (60 * h)
    d2 = (2 * vals[0] - 27 * vals[1] + 270 * vals[2] - 490 * vals[3]
          + 270 * vals[4] - 27 * vals[5] + 2 * vals[6]) / (180 * h * h)
    d3 = (vals[0] - 8 * vals[1] + 13 * vals[2] - 13 * vals[4]
          + 8 * vals[5] - vals[6]) / (8 * h ** 3)
    fd = d3 / d1 - 1.5 * (d2 / d1) ** 2
    assert got == pytest.approx(fd, rel=1e-6)


def test_conditioning_weight_initial_and_kappa4_limit():
    d = simulate_sle(16.0 / 3.0, 0.2, 1e-3, RngSeed(8))
    d = evolve_points(d, [1.0], names=["one"])
    w = conditioning_weight(d, 16.0 / 3.0)
    assert w[0] == pytest.approx(1.0)
    w4 = conditioning_weight(d, 4.0 + 1e-12)
    assert np.allclose(w4[np.isfinite(w4)], 1.0, atol=1e-9)


def test_conditioning_weight_zero_after_swallowing():
    # a driving jump across the point forces contact (reflection rule)
    from hsle.loewner import DrivingPath, TimeGrid
    w = np.array([0.0, 2.0, 2.05, 2.1, 2.12])
    d = DrivingPath(grid=TimeGrid(np.linspace(0, 4e-4, w.size)), w=w)
    d = evolve_points(d, [1.0], names=["one"])
    assert d.swallowed["one"] is not None
    wts = conditioning_weight(d, 16.0 / 3.0)
    assert np.all(wts[d.swallowed["one"]:] == 0.0)


def test_conditioning_weight_needs_kappa_range():
    d = tracked_sle(3.0, 0.1, 1e-3, RngSeed(9))
    with pytest.raises(DomainError):
        conditioning_weight(d, 3.0)
