from __future__ import annotations

import pytest

import feederflow as ff
from feederflow.io import load_case

SIMPLE_H = 0.002
SIMPLE_SIGMA = 0.05
EPSILON = 0.1

_acceptance_lines: list[str] = []


def record_acceptance(line: str) -> None:
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


def build_case(name, h, sigma=None, epsilon=EPSILON):
    case = load_case(name)
    grid = ff.discretize(case.network, h)
    sigma = sigma or case.sigma_km
    density = ff.coarse_grain(case.injections, ff.CoarseGrainSpec(sigma), grid, epsilon)
    return case, grid, density


@pytest.fixture(scope="session")
def simple():
    return build_case("simple5km.json", SIMPLE_H, SIMPLE_SIGMA)


@pytest.fixture(scope="session")
def simple_solution(simple):
    case, grid, density = simple
    return ff.solve_tpbv(case.network, density, grid)


@pytest.fixture(scope="session")
def simple_coarse():
    return build_case("simple5km.json", 0.01, SIMPLE_SIGMA)


@pytest.fixture(scope="session")
def branched():
    return build_case("branched.json", 0.002)


@pytest.fixture(scope="session")
def branched_svr():
    return build_case("branched_svr.json", 0.002)


def single_segment(length=5.0, G=3.881, B=6.856):
    seg = ff.Segment("f", length, G, B, "r", "e")
    return ff.FeederNetwork((seg,), (ff.Node("r", ff.NodeKind.ROOT), ff.Node("e", ff.NodeKind.LEAF)))
