"""Tree-structured feeder networks and their discretization.

A network is a rooted tree. Nodes are the root (substation bank), junctions
(bifurcation points), step voltage regulators and leaves (unloaded feeder
ends). Segments connect an upstream node to a downstream node and always
point away from the root, so junction conditions have a fixed sign
convention: the upstream value equals the sum of the downstream values.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np


class NodeKind(enum.Enum):
    ROOT = "root"
    JUNCTION = "junction"
    SVR = "svr"
    LEAF = "leaf"


@dataclass(frozen=True)
class Segment:
    """One feeder section with constant per-unit conductance and susceptance."""

    id: str
    length: float
    G: float
    B: float
    upstream: str
    downstream: str

    @property
    def admittance_sq(self) -> float:
        return self.G * self.G + self.B * self.B


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    turn_ratio: float | None = None


@dataclass(frozen=True)
class Violation:
    """A broken network invariant. ``kind`` is a stable machine-readable tag."""

    kind: str
    entity: str | None = None
    detail: str = ""

    def __str__(self):
        where = f" [{self.entity}]" if self.entity is not None else ""
        return f"{self.kind}{where}: {self.detail}" if self.detail else f"{self.kind}{where}"


class InvalidNetwork(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(frozen=True)
class FeederNetwork:
    segments: tuple[Segment, ...]
    nodes: tuple[Node, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "nodes", tuple(self.nodes))

    # lookups -------------------------------------------------------------
    def segment(self, sid: str) -> Segment:
        for seg in self.segments:
            if seg.id == sid:
                return seg
        raise KeyError(sid)

    def node(self, nid: str) -> Node:
        for nd in self.nodes:
            if nd.id == nid:
                return nd
        raise KeyError(nid)

    @property
    def root(self) -> Node:
        roots = [n for n in self.nodes if n.kind is NodeKind.ROOT]
        if len(roots) != 1:
            raise InvalidNetwork([Violation("MultipleRoots" if roots else "NoRoot")])
        return roots[0]

    def downstream_of(self, nid: str) -> list[Segment]:
        return [s for s in self.segments if s.upstream == nid]

    def upstream_of(self, nid: str) -> list[Segment]:
        return [s for s in self.segments if s.downstream == nid]

    def preorder(self) -> list[Segment]:
        """Segments in root-to-leaf order (a parent always precedes its children)."""
        order: list[Segment] = []
        stack = list(reversed(self.downstream_of(self.root.id)))
        while stack:
            seg = stack.pop()
            order.append(seg)
            stack.extend(reversed(self.downstream_of(seg.downstream)))
        return order

    def path_to_root(self, sid: str) -> list[Segment]:
        path = [self.segment(sid)]
        while True:
            ups = self.upstream_of(path[-1].upstream)
            if not ups:
                return path[::-1]
            path.append(ups[0])

    def distance_from_root(self) -> dict[str, float]:
        """Arclength of each segment's upstream end measured from the root."""
        dist: dict[str, float] = {}
        for seg in self.preorder():
            ups = self.upstream_of(seg.upstream)
            dist[seg.id] = dist[ups[0].id] + ups[0].length if ups else 0.0
        return dist

    def far_leaf_segment(self) -> Segment:
        """The leaf segment whose downstream end lies farthest from the root."""
        dist = self.distance_from_root()
        leaves = [s for s in self.preorder() if self.node(s.downstream).kind is NodeKind.LEAF]
        return max(leaves, key=lambda s: dist[s.id] + s.length)

    @property
    def total_length(self) -> float:
        return math.fsum(s.length for s in self.segments)


def validate(network: FeederNetwork) -> list[Violation]:
    """Return every violated invariant; an empty list means the network is usable."""
    out: list[Violation] = []
    node_ids = [n.id for n in network.nodes]
    seg_ids = [s.id for s in network.segments]
    for ids, what in ((node_ids, "node"), (seg_ids, "segment")):
        seen = set()
        for i in ids:
            if i in seen:
                out.append(Violation("DuplicateId", i, f"duplicate {what} id"))
            seen.add(i)
    known = set(node_ids)

    for seg in network.segments:
        if not seg.length > 0 or not math.isfinite(seg.length):
            out.append(Violation("NonPositiveLength", seg.id, f"length={seg.length}"))
        if not (math.isfinite(seg.G) and math.isfinite(seg.B)) or seg.admittance_sq <= 0:
            out.append(Violation("ZeroAdmittance", seg.id, "G^2 + B^2 must be positive"))
        for end in (seg.upstream, seg.downstream):
            if end not in known:
                out.append(Violation("UnknownNode", seg.id, f"node {end!r} not declared"))
        if seg.upstream == seg.downstream:
            out.append(Violation("SelfLoop", seg.id))

    roots = [n for n in network.nodes if n.kind is NodeKind.ROOT]
    if not roots:
        out.append(Violation("NoRoot"))
    elif len(roots) > 1:
        out.append(Violation("MultipleRoots", None, ", ".join(n.id for n in roots)))

    for nd in network.nodes:
        n_up = len(network.upstream_of(nd.id))
        n_down = len(network.downstream_of(nd.id))
        if nd.kind is NodeKind.ROOT:
            if n_up:
                out.append(Violation("RootHasUpstream", nd.id))
            if not n_down:
                out.append(Violation("RootHasNoFeeder", nd.id))
        elif nd.kind is NodeKind.JUNCTION:
            if n_up != 1 or n_down < 2:
                out.append(Violation("JunctionDegree", nd.id,
                                     f"needs 1 upstream and >=2 downstream, has {n_up}/{n_down}"))
        elif nd.kind is NodeKind.SVR:
            if n_up != 1 or n_down != 1:
                out.append(Violation("SvrDegree", nd.id,
                                     f"needs 1 upstream and 1 downstream, has {n_up}/{n_down}"))
            r = nd.turn_ratio
            if r is None or not math.isfinite(r) or r <= 0:
                out.append(Violation("BadTurnRatio", nd.id, f"turn_ratio={r}"))
        elif nd.kind is NodeKind.LEAF:
            if n_down:
                out.append(Violation("LeafHasDownstream", nd.id))
            if n_up != 1:
                out.append(Violation("LeafDegree", nd.id, f"has {n_up} upstream segments"))
        if nd.kind is not NodeKind.SVR and nd.turn_ratio is not None:
            out.append(Violation("UnexpectedTurnRatio", nd.id))

    # Connectivity and acyclicity, only meaningful with a unique root.
    if len(roots) == 1 and not any(v.kind in ("UnknownNode", "DuplicateId") for v in out):
        reached: set[str] = {roots[0].id}
        frontier = [roots[0].id]
        visited_segs: set[str] = set()
        while frontier:
            nid = frontier.pop()
            for seg in network.downstream_of(nid):
                if seg.id in visited_segs:
                    continue
                visited_segs.add(seg.id)
                if seg.downstream in reached:
                    out.append(Violation("Cycle", seg.id, f"revisits node {seg.downstream!r}"))
                    continue
                reached.add(seg.downstream)
                frontier.append(seg.downstream)
        for nd in network.nodes:
            if nd.id not in reached:
                out.append(Violation("Disconnected", nd.id, "not reachable from the root"))
        if len(network.segments) != len(network.nodes) - 1 and not any(
                v.kind in ("Cycle", "Disconnected") for v in out):
            out.append(Violation("NotATree", None,
                                 f"{len(network.segments)} segments for {len(network.nodes)} nodes"))
    return out


def require_valid(network: FeederNetwork) -> None:
    problems = validate(network)
    if problems:
        raise InvalidNetwork(problems)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform per-segment sampling.

    ``x[sid]`` holds segment-local abscissae from 0 (upstream end) to the
    segment length (downstream end). Fields defined on the grid are stored as
    one flat array, segments concatenated in root-to-leaf order; ``slice(sid)``
    selects one segment.
    """

    segment_ids: tuple[str, ...]
    x: dict[str, np.ndarray]
    h: dict[str, float]
    offset: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        starts, pos = {}, 0
        for sid in self.segment_ids:
            n = len(self.x[sid])
            starts[sid] = slice(pos, pos + n)
            pos += n
        object.__setattr__(self, "_slices", starts)
        object.__setattr__(self, "size", pos)

    def slice(self, sid: str) -> slice:
        return self._slices[sid]

    def n_samples(self, sid: str) -> int:
        return len(self.x[sid])

    def first(self, sid: str) -> int:
        return self._slices[sid].start

    def last(self, sid: str) -> int:
        return self._slices[sid].stop - 1

    def concat(self, per_segment) -> np.ndarray:
        return np.concatenate([np.asarray(per_segment[sid], dtype=float) for sid in self.segment_ids])

    def split(self, flat: np.ndarray) -> dict[str, np.ndarray]:
        return {sid: flat[self._slices[sid]] for sid in self.segment_ids}

    def distance(self) -> np.ndarray:
        """Flat array of arclength from the root for every sample."""
        return self.concat({sid: self.offset.get(sid, 0.0) + self.x[sid] for sid in self.segment_ids})

    def zeros(self) -> np.ndarray:
        return np.zeros(self.size)

    def subgrid(self, sids) -> "Grid":
        sids = tuple(sids)
        return Grid(sids, {s: self.x[s] for s in sids}, {s: self.h[s] for s in sids},
                    {s: self.offset.get(s, 0.0) for s in sids})

    def __iter__(self) -> Iterator[str]:
        return iter(self.segment_ids)

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.segment_ids == other.segment_ids
                and all(np.array_equal(self.x[s], other.x[s]) for s in self.segment_ids))

    __hash__ = None


def _sample_count(length: float, target_h: float) -> int:
    ratio = length / target_h
    n_int = math.ceil(ratio - 1e-9 * max(1.0, ratio))
    return max(n_int, 1) + 1


def discretize(network: FeederNetwork, target_h: float) -> Grid:
    """Sample every segment uniformly with spacing no larger than ``target_h``.

    Segment ends are hit exactly. Raises ``ValueError`` when ``target_h`` is
    at least half of some segment length (fewer than three samples).
    """
    require_valid(network)
    if not target_h > 0:
        raise ValueError(f"target_h must be positive, got {target_h}")
    order = network.preorder()
    for seg in order:
        if target_h >= seg.length / 2:
            raise ValueError(f"target_h={target_h} km too coarse for segment {seg.id!r} "
                             f"(length {seg.length} km); need target_h < length/2")
    xs, hs = {}, {}
    for seg in order:
        n = _sample_count(seg.length, target_h)
        x = np.linspace(0.0, seg.length, n)
        x[-1] = seg.length
        xs[seg.id] = x
        hs[seg.id] = seg.length / (n - 1)
    return Grid(tuple(s.id for s in order), xs, hs, network.distance_from_root())
