import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stefankpp import geometry as ge
from stefankpp.errors import ConfigError

coord = st.floats(-50, 50, allow_nan=False)
angle = st.floats(0.05, math.pi - 0.05)


def brute_distance(phi, x, n=200_001, s_max=200.0):
    s = np.linspace(0.0, s_max, n)
    ray = np.stack([s * math.sin(phi), s * math.cos(phi)], axis=1)
    pts = np.concatenate([ray, ray * np.array([-1.0, 1.0])])
    return float(np.min(np.linalg.norm(pts - np.asarray(x), axis=1)))


def test_cone_membership_examples():
    half = ge.ConeSpec(math.pi / 2)
    assert ge.cone_contains(half, [0.0, 1.0])
    assert not ge.cone_contains(half, [0.0, -1.0])
    assert ge.cone_contains(ge.ConeSpec(3 * math.pi / 4), [1.0, 0.0])
    assert not ge.cone_contains(half, [0.0, 0.0])  # vertex excluded


def test_distance_examples():
    assert ge.dist_to_cone(ge.ConeSpec(math.pi / 2), [0.0, -3.0]) == pytest.approx(3.0)
    R = 4.0
    wide = ge.ConeSpec(3 * math.pi / 4)
    assert ge.dist_to_cone(wide, [0.0, -R]) == pytest.approx(R * math.sin(3 * math.pi / 4))
    narrow = ge.ConeSpec(math.pi / 4)
    d = ge.dist_to_cone(narrow, [0.0, -R])
    assert d == pytest.approx(R)
    assert d == pytest.approx(brute_distance(math.pi / 4, [0.0, -R]), abs=1e-6)


def test_spec_validation():
    with pytest.raises(ConfigError):
        ge.ConeSpec(0.0)
    with pytest.raises(ConfigError):
        ge.ConeSpec(math.pi)
    with pytest.raises(ConfigError):
        ge.cone_contains(ge.ConeSpec(1.0, N=3), [0.0, 1.0])
    with pytest.raises(ConfigError):
        ge.neighborhood_contains(ge.ConeSpec(1.0), -1.0, [0.0, 0.0])


def test_neighbourhood_examples():
    narrow = ge.ConeSpec(math.pi / 4)
    assert ge.neighborhood_contains(narrow, 2.0, [0.0, -1.0])
    assert not ge.neighborhood_contains(narrow, 2.0, [0.0, -2.5])
    # R = 0: the open cone itself
    assert ge.neighborhood_contains(narrow, 0.0, [0.0, 1.0])
    assert not ge.neighborhood_contains(narrow, 0.0, [0.0, 0.0])
    assert not ge.neighborhood_contains(narrow, 0.0, [1.0, 1.0])


def test_neighbourhood_is_shifted_cone_random_points():
    rng = np.random.default_rng(7)
    x = rng.uniform(-30, 30, size=(10_000, 2))
    for phi in (math.pi / 2, 3 * math.pi / 4, 0.9 * math.pi):
        spec = ge.ConeSpec(phi)
        for R in (0.5, 3.0, 11.0):
            lhs = ge.neighborhood_contains(spec, R, x)
            rhs = ge.cone_contains(spec.shifted(-R / math.sin(phi)), x)
            assert np.array_equal(lhs, rhs)


def test_three_dimensional_axial_reduction():
    spec = ge.ConeSpec(math.pi / 3, N=3)
    x = np.array([[3.0, 4.0, 1.0]])
    flat = ge.ConeSpec(math.pi / 3, N=2)
    assert ge.dist_to_cone(spec, x)[0] == pytest.approx(ge.dist_to_cone(flat, [[5.0, 1.0]])[0])


@settings(max_examples=200, deadline=None)
@given(phi=angle, x=coord, y=coord)
def test_distance_matches_brute_force(phi, x, y):
    d = float(ge.dist_to_cone(ge.ConeSpec(phi), [x, y]))
    if ge.cone_contains(ge.ConeSpec(phi), [x, y]):
        assert d == 0.0
    else:
        assert d == pytest.approx(brute_distance(phi, [x, y]), abs=2e-3)


@settings(max_examples=200, deadline=None)
@given(phi=angle, p=st.tuples(coord, coord), q=st.tuples(coord, coord))
def test_distance_is_1_lipschitz(phi, p, q):
    spec = ge.ConeSpec(phi)
    dp, dq = ge.dist_to_cone(spec, p), ge.dist_to_cone(spec, q)
    assert abs(dp - dq) <= math.dist(p, q) + 1e-9


@settings(max_examples=200, deadline=None)
@given(phi=angle, r1=st.floats(0, 20), r2=st.floats(0, 20), x=coord, y=coord)
def test_neighbourhoods_nested(phi, r1, r2, x, y):
    lo, hi = sorted((r1, r2))
    spec = ge.ConeSpec(phi)
    if ge.neighborhood_contains(spec, lo, [x, y]):
        assert ge.neighborhood_contains(spec, hi, [x, y])


@settings(max_examples=200, deadline=None)
@given(phi=angle, R=st.floats(0.1, 20), x=coord, y=coord)
def test_neighbourhood_set_signed_distance_consistent(phi, R, x, y):
    ns = ge.NeighborhoodSet(ge.ConeSpec(phi), R)
    sd = float(ns.signed_distance(np.array([x, y])))
    inside = bool(ns.contains(np.array([x, y])))
    if abs(sd) > 1e-9:
        assert inside == (sd < 0)


def test_sandwich_check_conventions():
    spec = ge.ConeSpec(math.pi / 2)
    inner = ge.ConeSet(spec.shifted(1.0))
    outer = ge.ConeSet(spec.shifted(-1.0))
    on_inner = np.array([[0.0, 1.0], [3.0, 1.0]])
    assert ge.sandwich_check(on_inner, inner, outer).ok
    beyond = np.array([[0.0, -1.25], [2.0, -1.25]])
    rep = ge.sandwich_check(beyond, inner, outer)
    assert rep.violations_out == 2 and rep.max_violation_dist == pytest.approx(0.25)
    deep = np.array([[0.0, 3.0]])
    rep = ge.sandwich_check(deep, inner, outer)
    assert rep.violations_in == 1 and rep.max_violation_dist == pytest.approx(2.0)
    assert "ok=false" in rep.to_text()
    with pytest.raises(ConfigError):
        ge.sandwich_check(np.empty((0, 2)), inner, outer)


def test_cone_sandwich_shapes():
    c = 0.36
    wide = ge.cone_sandwich(ge.ConeSpec(3 * math.pi / 4), c, 10.0, 0.05)
    s = math.sin(3 * math.pi / 4)
    assert wide.inner.spec.xi == pytest.approx(-(c / s - 0.05) * 10.0)
    assert wide.outer.spec.xi == pytest.approx(-(c / s + 0.05) * 10.0)
    narrow = ge.cone_sandwich(ge.ConeSpec(math.pi / 4), c, 10.0, 0.05)
    assert narrow.inner.R == pytest.approx(3.1) and narrow.outer.R == pytest.approx(4.1)
