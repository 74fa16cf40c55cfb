import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import feederflow as ff
from feederflow.io import load_case
from feederflow.network import InvalidNetwork, Node, NodeKind, Segment, require_valid

from conftest import single_segment


def kinds(network):
    return sorted(v.kind for v in ff.validate(network))


@pytest.mark.parametrize("name", ["simple5km.json", "branched.json", "branched_svr.json"])
def test_shipped_networks_are_valid(name):
    assert ff.validate(load_case(name).network) == []


def test_tree_queries_on_branched():
    net = load_case("branched.json").network
    assert net.root.id == "bank"
    order = [s.id for s in net.preorder()]
    assert order[0] == "A"
    for seg in net.segments:
        if net.node(seg.upstream).kind is not NodeKind.ROOT:
            (parent,) = net.upstream_of(seg.upstream)
            assert order.index(parent.id) < order.index(seg.id)
    assert [s.id for s in net.path_to_root("D")] == ["A", "C", "D"]
    assert net.far_leaf_segment().id == "D"
    assert math.isclose(net.total_length, 2.52)
    assert math.isclose(net.distance_from_root()["E"], 1.4)


def test_every_violation_reported_at_once():
    segs = (Segment("a", -1.0, 0.0, 0.0, "r", "x"), Segment("a", 1.0, 1.0, 1.0, "x", "x"))
    nodes = (Node("r", NodeKind.ROOT), Node("j", NodeKind.JUNCTION, 1.1))
    found = set(kinds(ff.FeederNetwork(segs, nodes)))
    assert {"DuplicateId", "NonPositiveLength", "ZeroAdmittance", "UnknownNode", "SelfLoop",
            "JunctionDegree", "UnexpectedTurnRatio"} <= found


@pytest.mark.parametrize("nodes,expected", [
    ((Node("r", NodeKind.LEAF), Node("e", NodeKind.LEAF)), "NoRoot"),
    ((Node("r", NodeKind.ROOT), Node("e", NodeKind.ROOT)), "MultipleRoots"),
    ((Node("r", NodeKind.ROOT), Node("e", NodeKind.SVR, 0.0)), "BadTurnRatio"),
])
def test_node_kind_violations(nodes, expected):
    seg = Segment("f", 1.0, 1.0, 1.0, "r", "e")
    assert expected in kinds(ff.FeederNetwork((seg,), nodes))


def test_cycle_and_disconnected():
    nodes = (Node("r", NodeKind.ROOT), Node("a", NodeKind.SVR, 1.0), Node("b", NodeKind.SVR, 1.0),
             Node("c", NodeKind.LEAF), Node("d", NodeKind.LEAF))
    segs = (Segment("1", 1, 1, 1, "r", "a"), Segment("2", 1, 1, 1, "a", "b"),
            Segment("3", 1, 1, 1, "b", "a"), Segment("4", 1, 1, 1, "c", "d"))
    found = kinds(ff.FeederNetwork(segs, nodes))
    assert "Disconnected" in found


def test_require_valid_raises():
    net = ff.FeederNetwork((Segment("f", 0.0, 1, 1, "r", "e"),),
                           (Node("r", NodeKind.ROOT), Node("e", NodeKind.LEAF)))
    with pytest.raises(InvalidNetwork) as info:
        require_valid(net)
    assert info.value.violations[0].kind == "NonPositiveLength"


@pytest.mark.parametrize("h,n", [(0.01, 501), (0.25, 21), (0.002, 2501), (0.3, 18)])
def test_sample_counts(h, n):
    grid = ff.discretize(single_segment(), h)
    x = grid.x["f"]
    assert len(x) == n
    assert x[0] == 0.0 and x[-1] == 5.0
    assert grid.h["f"] <= h + 1e-15
    assert np.allclose(np.diff(x), grid.h["f"])


def test_two_segment_grid_has_five_samples_each_end_exact():
    grid = ff.discretize(single_segment(length=1.0), 0.25)
    assert grid.n_samples("f") == 5


def test_too_coarse_grid_rejected():
    with pytest.raises(ValueError, match="too coarse"):
        ff.discretize(single_segment(length=1.0), 0.5)
    with pytest.raises(ValueError):
        ff.discretize(single_segment(), 0.0)


def test_discretize_invalid_network():
    net = ff.FeederNetwork((Segment("f", 1, 1, 1, "r", "e"),),
                           (Node("r", NodeKind.ROOT), Node("e", NodeKind.JUNCTION)))
    with pytest.raises(InvalidNetwork):
        ff.discretize(net, 0.1)


def test_grid_layout_and_distance():
    net = load_case("branched.json").network
    grid = ff.discretize(net, 0.01)
    assert grid.size == sum(grid.n_samples(s) for s in grid)
    d = grid.distance()
    assert d[grid.last("A")] == pytest.approx(0.8)
    assert d[grid.first("C")] == pytest.approx(0.8)
    assert d[grid.last("D")] == pytest.approx(1.72)
    flat = np.arange(grid.size, dtype=float)
    assert np.array_equal(grid.concat(grid.split(flat)), flat)
    assert grid == ff.discretize(net, 0.01)
    assert grid != ff.discretize(net, 0.02)


@settings(max_examples=60, deadline=None)
@given(length=st.floats(0.05, 50.0), frac=st.floats(1e-3, 0.49))
def test_discretize_properties(length, frac):
    h = length * frac
    net = single_segment(length=length)
    g1 = ff.discretize(net, h)
    g2 = ff.discretize(net, h)
    x = g1.x["f"]
    assert g1 == g2
    assert len(x) >= 3
    assert x[0] == 0.0 and x[-1] == length
    assert np.all(np.diff(x) > 0)
    assert g1.h["f"] <= h * (1 + 1e-9)
    # one sample fewer would exceed the target spacing
    assert length / (len(x) - 2) > h * (1 - 1e-9)
