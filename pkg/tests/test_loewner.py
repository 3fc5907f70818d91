"""Discrete Loewner machinery: traces, tracks, zipper, transport, reversal."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsle.errors import DomainError, NumericalError
from hsle.loewner import (DrivingPath, HalfPlaneCurve, HullMapState, TimeGrid,
                          conformal_transport, evolve_points, extract_driving,
                          forward_trace, mobius_reverse, trace_tips,
                          transport_series)
from hsle.sde import RngSeed, simulate_sle


def uniform_path(w_values, T=None):
    w = np.asarray(w_values, dtype=float)
    T = T if T is not None else 1.0
    return DrivingPath(grid=TimeGrid(np.linspace(0.0, T, w.size)), w=w)


def test_zero_driving_vertical_segment():
    n = 10_000
    d = uniform_path(np.zeros(n + 1), T=1.0)
    c = forward_trace(d)
    assert abs(c.points[-1] - 2.0j) < 1e-3
    # interior vertices stay on the imaginary axis
    assert np.max(np.abs(c.points.real)) < 1e-12


def test_constant_driving_translates():
    n = 500
    d0 = uniform_path(np.zeros(n + 1))
    d1 = uniform_path(np.full(n + 1, 0.7))
    c0 = forward_trace(d0)
    c1 = forward_trace(d1)
    assert np.allclose(c1.points[1:], c0.points[1:] + 0.7, atol=1e-12)


def test_trace_tips_matches_full_trace():
    d = simulate_sle(3.0, 0.5, 1e-3, RngSeed(4))
    c = forward_trace(d)
    idx = np.array([10, 100, 250, 499, 500])
    tips = trace_tips(d, idx)
    assert np.allclose(tips, c.points[idx], atol=1e-10)


def test_evolve_points_sqrt_law():
    # W = 0: Y_t = sqrt(1 + 4t), exact for the slit scheme
    n = 1000
    d = uniform_path(np.zeros(n + 1), T=1.0)
    d = evolve_points(d, [1.0], names=["y"])
    t = d.grid.times
    assert np.max(np.abs(d.tracks["y"] - np.sqrt(1.0 + 4.0 * t))) < 1e-12


def test_evolve_points_far_field():
    y = 1e6
    n = 200
    d = uniform_path(np.zeros(n + 1), T=1.0)
    d = evolve_points(d, [y], names=["far"])
    drift = d.tracks["far"][-1] - y
    assert abs(drift - 2.0 * 1.0 / y) < 1e-3


def test_evolve_points_ordering_preserved():
    for s in range(10):
        d = simulate_sle(4.0, 1.0, 1e-3, RngSeed(77, s))
        d = evolve_points(d, [0.5, 1.5], names=["a", "b"])
        w, a, b = d.w, d.tracks["a"], d.tracks["b"]
        assert np.all(a >= w)
        assert np.all(b >= a - 1e-12)


def test_reflection_rule_left_track():
    d = simulate_sle(6.0, 1.0, 1e-3, RngSeed(5))
    d = evolve_points(d, [-0.05, 0.05], names=["l", "r"])
    assert np.all(d.tracks["l"] <= d.w)
    assert np.all(d.tracks["r"] >= d.w)


def test_roundtrip_machine_exact():
    d = simulate_sle(3.0, 1.0, 1e-3, RngSeed(11))
    c = forward_trace(d)
    dd = extract_driving(c)
    assert dd.n_steps == d.n_steps
    assert np.max(np.abs(dd.w - d.w)) < 1e-8
    assert np.max(np.abs(dd.grid.times - d.grid.times)) < 1e-8
    # forward_trace of the extraction reproduces the vertices
    c2 = forward_trace(dd)
    assert np.max(np.abs(c2.points - c.points)) < 1e-8


def test_roundtrip_coarse_polyline():
    """Extraction of a coarsened polyline recovers the fine driving within
    the documented sup tolerance."""
    sub = 8
    n_fine = 8000
    d = simulate_sle(3.0, 0.005, 0.005 / n_fine, RngSeed(12))
    idx = np.arange(sub, n_fine + 1, sub)
    tips = trace_tips(d, idx)
    curve = HalfPlaneCurve(np.concatenate(([0j], tips)))
    dd = extract_driving(curve)
    w_ref = np.interp(dd.grid.times, d.grid.times, d.w)
    assert np.max(np.abs(dd.w - w_ref)) <= 5e-2


def test_angled_segment_driving_exponent():
    # straight segment at angle: W(t) = c sqrt(t); fitted exponent 0.5 +- .02
    alpha = 0.35  # angle pi*(1-alpha) from the positive real axis
    n = 4000
    seg = np.exp(1j * math.pi * (1.0 - alpha)) * np.linspace(0, 1.0, n + 1)
    d = extract_driving(HalfPlaneCurve(seg))
    t = d.grid.times[1:]
    w = np.abs(d.w[1:])
    sel = (t > t[-1] * 1e-3) & (w > 0)
    slope, _ = np.polyfit(np.log(t[sel]), np.log(w[sel]), 1)
    assert abs(slope - 0.5) < 0.02


def test_conformal_transport_identity_on_empty_curve():
    c = HalfPlaneCurve(np.array([0.0 + 0.0j]))
    out = conformal_transport(c, [1.0, -2.0])
    assert out[0] == (1.0, 1.0, None)
    assert out[1] == (-2.0, 1.0, None)


def test_conformal_transport_vertical_slit_closed_form():
    h = 0.8
    t = h * h / 4.0
    n = 400
    seg = 1j * np.linspace(0.0, h, n + 1)
    c = HalfPlaneCurve(seg)
    for x in (0.5, 2.0, -1.3):
        img, deriv, sw = conformal_transport(c, [x])[0]
        want = math.copysign(math.sqrt(x * x + 4.0 * t), x)
        assert sw is None
        assert abs(img - want) < 1e-10
        assert abs(deriv - abs(x) / math.sqrt(x * x + 4.0 * t)) < 1e-10


def test_transport_base_point_raises():
    c = HalfPlaneCurve(np.array([0.0 + 0j, 0.1 + 0.4j]))
    with pytest.raises(DomainError):
        conformal_transport(c, [0.0])


def test_j_monotone_along_zipper():
    from hsle.observables import poisson_kernel_series
    d = simulate_sle(3.0, 0.5, 1e-3, RngSeed(21))
    d = evolve_points(d, [1.0, 2.0], names=["x", "y"])
    j, z, cut = poisson_kernel_series(d, 1.0, 2.0)
    assert cut is None
    assert np.all(np.diff(j) <= 1e-12)
    assert j[0] == pytest.approx(1.0)


def test_capacity_additivity():
    d = simulate_sle(2.0, 0.8, 1e-3, RngSeed(31))
    state = HullMapState.from_driving(d)
    assert state.total_time == pytest.approx(0.8, abs=1e-12)
    assert state.capacity == pytest.approx(1.6, abs=1e-12)
    # concatenation: capacities add
    d2 = simulate_sle(2.0, 0.4, 1e-3, RngSeed(32))
    joint = HullMapState(c=np.concatenate((state.c, d2.w[1:])),
                         dt=np.concatenate((state.dt, d2.grid.dt)))
    assert joint.total_time == pytest.approx(1.2, abs=1e-12)


def test_far_field_normalization():
    d = simulate_sle(3.0, 1.0, 1e-3, RngSeed(33))
    state = HullMapState.from_driving(d)
    for z in (1000.0 + 0j, 700j, -900.0 + 300j):
        img = state.apply(np.array([z]))[0]
        assert abs(img - z) <= 10.0 * state.capacity / abs(z)


def test_mobius_reverse_vertical_fixed():
    seg = 1j * np.linspace(0.0, 2.0, 300)
    rev = mobius_reverse(HalfPlaneCurve(seg), 1.0, 2.0)
    assert np.max(np.abs(rev.points.real)) < 1e-12


def test_mobius_reverse_involution():
    d = simulate_sle(3.0, 0.5, 2e-3, RngSeed(41))
    c = forward_trace(d)
    pts = c.points.copy()
    pts[0] = 0.0  # base at the origin as required
    c = HalfPlaneCurve(pts)
    rev2 = mobius_reverse(mobius_reverse(c, 1.0, 2.0), 1.0, 2.0)
    assert np.max(np.abs(rev2.points - c.points)) < 1e-9


def test_mobius_reverse_requires_marks():
    seg = 1j * np.linspace(0.0, 1.0, 10)
    with pytest.raises(DomainError):
        mobius_reverse(HalfPlaneCurve(seg), 2.0, 1.0)


def test_forward_trace_needs_two_points():
    with pytest.raises(DomainError):
        forward_trace(DrivingPath(grid=TimeGrid(np.array([0.0])),
                                  w=np.array([0.0])))


def test_extract_driving_rejects_sunken_vertex():
    pts = np.array([0j, 0.2 + 0.5j, 0.3 - 0.4j])
    with pytest.raises(DomainError):
        HalfPlaneCurve(pts)  # invariant catches it at construction


def test_transport_series_matches_hullmap():
    d = simulate_sle(3.0, 0.3, 1e-3, RngSeed(51))
    images, logd, swallowed = transport_series(d, [1.5])
    state = HullMapState.from_driving(d)
    img, deriv, sw = state.transport_real(1.5)
    assert images[-1, 0] == pytest.approx(img, abs=1e-12)
    assert math.exp(logd[-1, 0]) == pytest.approx(deriv, rel=1e-12)
    assert swallowed[0] == sw


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-0.5, 0.5), min_size=3, max_size=30))
def test_roundtrip_property(increments):
    w = np.concatenate(([0.0], np.cumsum(increments)))
    d = uniform_path(w, T=0.2)
    c = forward_trace(d)
    dd = extract_driving(c)
    assert np.max(np.abs(dd.w - d.w)) < 1e-7


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 3.0), st.integers(0, 10_000))
def test_evolve_keeps_side_property(pt, seed):
    d = simulate_sle(3.0, 0.2, 2e-3, RngSeed(1234, seed))
    d = evolve_points(d, [pt], names=["p"])
    assert np.all(d.tracks["p"] >= d.w)
