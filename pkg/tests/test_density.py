import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erf

import feederflow as ff
from feederflow.density import Category, PointInjection

from conftest import EPSILON, single_segment


@pytest.fixture
def grid():
    return ff.discretize(single_segment(), 0.002)


def test_single_injection_mass(grid):
    inj = [PointInjection("f", 2.0, -0.2)]
    d = ff.coarse_grain(inj, ff.CoarseGrainSpec(0.05), grid, EPSILON)
    # truncated Gaussian mass: erf(8/sqrt 2) is 1 to double precision
    expected = -0.2 * erf(8 / math.sqrt(2))
    mp, mq = ff.total_mass(d)
    assert mp == pytest.approx(expected, abs=1e-3)
    assert mq == 0.0
    assert d.p.min() == pytest.approx(-0.2 / math.sqrt(2 * math.pi * 0.05 ** 2), rel=1e-12)


def test_simple_feeder_total_injection(simple):
    _, _, density = simple
    mp, _ = ff.total_mass(density)
    assert mp == pytest.approx(3 * -0.133 + 2 * -0.2, abs=1e-3)


def test_empty_injections(grid):
    d = ff.coarse_grain([], ff.CoarseGrainSpec(0.05), grid, EPSILON)
    assert not d.p.any() and not d.q.any()
    assert ff.total_mass(d) == (0.0, 0.0)


def test_truncation_support(grid):
    d = ff.coarse_grain([PointInjection("f", 2.0, -1.0)], ff.CoarseGrainSpec(0.05, 6.0), grid, 1.0)
    x = grid.x["f"]
    assert not d.p[np.abs(x - 2.0) > 0.3 + 1e-12].any()
    assert d.p[np.abs(x - 2.0) < 0.29].all()


def test_scaled_density_times_epsilon_is_physical(grid):
    inj = [PointInjection("f", 1.0, -0.3, 0.05)]
    spec = ff.CoarseGrainSpec(0.05)
    a = ff.coarse_grain(inj, spec, grid, 0.1)
    b = ff.coarse_grain(inj, spec, grid, 1e-4)
    assert np.allclose(a.p, b.p, rtol=1e-13, atol=0)
    assert np.allclose(a.p_tilde * 1e3, b.p_tilde, rtol=1e-13)
    c = a.with_epsilon(1e-4)
    assert np.allclose(c.p, a.p, rtol=1e-13)
    x = np.linspace(0.5, 1.5, 7)
    assert np.allclose(c.evaluate("f", x)[0], a.evaluate("f", x)[0], rtol=1e-13)


def test_off_grid_evaluation_matches_samples(grid):
    d = ff.coarse_grain([PointInjection("f", 2.0, -0.2, -0.1)], ff.CoarseGrainSpec(0.05), grid, 0.1)
    p, q = d.evaluate("f", grid.x["f"])
    assert np.allclose(p, d.p, rtol=1e-14, atol=1e-15)
    assert np.allclose(q, d.q, rtol=1e-14, atol=1e-15)
    mp, _ = d.mass_to_end("f", np.array([0.0, 2.0, 5.0]))
    assert mp[0] == pytest.approx(-0.2, rel=1e-12)
    assert mp[1] == pytest.approx(-0.1, rel=1e-12)
    assert mp[2] == 0.0


def test_spline_fallback_without_injections(grid):
    d = ff.coarse_grain([PointInjection("f", 2.0, -0.2)], ff.CoarseGrainSpec(0.25), grid, 1.0)
    bare = ff.DensityProfile(grid, d.p_tilde, d.q_tilde, 1.0)
    x = np.linspace(1.0, 3.0, 11)
    assert np.allclose(bare.evaluate("f", x)[0], d.evaluate("f", x)[0], atol=1e-8)
    assert bare.mass_to_end("f", np.array([0.0]))[0][0] == pytest.approx(-0.2, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(P1=st.floats(-1, 1), P2=st.floats(-1, 1), a=st.floats(-3, 3),
       x1=st.floats(0.5, 4.5), x2=st.floats(0.5, 4.5))
def test_linearity(P1, P2, a, x1, x2):
    grid = ff.discretize(single_segment(), 0.01)
    spec = ff.CoarseGrainSpec(0.05)
    one = ff.coarse_grain([PointInjection("f", x1, P1)], spec, grid, 1.0)
    two = ff.coarse_grain([PointInjection("f", x2, P2)], spec, grid, 1.0)
    both = ff.coarse_grain([PointInjection("f", x1, a * P1), PointInjection("f", x2, P2)],
                           spec, grid, 1.0)
    assert np.allclose(both.p, a * one.p + two.p, rtol=1e-12, atol=1e-12)


def test_segment_locality():
    from feederflow.io import load_case
    case = load_case("branched.json")
    grid = ff.discretize(case.network, 0.002)
    d = ff.coarse_grain([PointInjection("B", 0.25, -1.0)], ff.CoarseGrainSpec(0.015), grid, 1.0)
    outside = np.ones(grid.size, bool)
    outside[grid.slice("B")] = False
    assert not d.p[outside].any()


def test_under_resolved_sigma_rejected(grid):
    with pytest.raises(ValueError, match="under-resolved"):
        ff.coarse_grain([], ff.CoarseGrainSpec(0.003), grid, 1.0)


@pytest.mark.parametrize("kw", [dict(sigma=0.0), dict(sigma=-1.0), dict(sigma=0.05, truncation_radius=4)])
def test_bad_coarse_grain_spec(kw):
    with pytest.raises(ValueError):
        ff.CoarseGrainSpec(**kw)


@pytest.mark.parametrize("xi", [0.0, 5.0, -1.0, 6.0])
def test_injection_outside_segment(grid, xi):
    with pytest.raises(ValueError, match="outside"):
        ff.coarse_grain([PointInjection("f", xi, -1.0)], ff.CoarseGrainSpec(0.05), grid, 1.0)


def test_unknown_segment(grid):
    with pytest.raises(ValueError, match="unknown segment"):
        ff.coarse_grain([PointInjection("g", 1.0, -1.0)], ff.CoarseGrainSpec(0.05), grid, 1.0)


def test_split_shares(simple):
    _, _, d = simple
    injections = d.injections
    ev, load = ff.split(d, injections, 0.04, 0.06)
    assert ev.epsilon == 0.04 and load.epsilon == 0.06
    assert np.allclose(ev.p + load.p, d.p, rtol=1e-14)
    assert np.array_equal(ev.p_tilde, d.p_tilde)
    ev0, load0 = ff.split(d, injections, 0.0, EPSILON)
    assert not ev0.p.any() and np.array_equal(load0.p, d.p)
    assert {i.category for i in injections} == {Category.EV, Category.LOAD}


@pytest.mark.parametrize("shares", [(0.05, 0.06), (-0.01, 0.11)])
def test_split_rejects_bad_shares(simple, shares):
    _, _, d = simple
    with pytest.raises(ValueError):
        ff.split(d, d.injections, *shares)


def test_density_shape_checked(grid):
    with pytest.raises(ValueError, match="shape"):
        ff.DensityProfile(grid, np.zeros(3), grid.zeros(), 1.0)
    with pytest.raises(ValueError, match="non-finite"):
        ff.DensityProfile(grid, grid.zeros() + np.nan, grid.zeros(), 1.0)
