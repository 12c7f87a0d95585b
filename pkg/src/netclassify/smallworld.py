"""Watts-Strogatz small-world graphs and household-based edge weights."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    BadDegree,
    ConfigError,
    ConstantValues,
    DuplicateEdge,
    GraphError,
    MalformedLine,
    NonpositiveWeight,
    SelfLoop,
)

WEIGHT_EPSILON = 0.1
MAX_REWIRE_TRIES = 100


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes ``0..n-1``.

    Edges are stored canonically (``u < v``, sorted); ``weights`` is either
    ``None`` or aligned with ``edges``.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n < 0:
            raise GraphError("negative node count")
        weights = self.weights
        if weights is not None and len(weights) != len(self.edges):
            raise GraphError("weights and edges differ in length")
        pairs = []
        for idx, (u, v) in enumerate(self.edges):
            u, v = int(u), int(v)
            if u == v:
                raise SelfLoop(f"self loop on node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge ({u}, {v}) outside 0..{self.n - 1}")
            w = None if weights is None else float(weights[idx])
            if w is not None and not w > 0:
                raise NonpositiveWeight(f"edge ({u}, {v}) has weight {w}")
            pairs.append(((min(u, v), max(u, v)), w))
        pairs.sort(key=lambda p: p[0])
        for a, b in zip(pairs, pairs[1:]):
            if a[0] == b[0]:
                raise DuplicateEdge(f"duplicate edge {a[0]}")
        object.__setattr__(self, "edges", tuple(p[0] for p in pairs))
        if weights is not None:
            object.__setattr__(self, "weights", tuple(p[1] for p in pairs))

    @property
    def weighted(self) -> bool:
        return self.weights is not None

    def edge_weights(self) -> tuple[float, ...]:
        return self.weights if self.weights is not None else (1.0,) * len(self.edges)

    def adjacency(self) -> list[list[tuple[int, float]]]:
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for (u, v), w in zip(self.edges, self.edge_weights()):
            adj[u].append((v, w))
            adj[v].append((u, w))
        return adj

    def neighbor_sets(self) -> list[set[int]]:
        nbrs: list[set[int]] = [set() for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].add(v)
            nbrs[v].add(u)
        return nbrs

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def mean_degree(self) -> float:
        return 2.0 * len(self.edges) / self.n if self.n else 0.0

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Node ``i`` becomes ``perm[i]``."""
        return Graph(self.n, tuple((perm[u], perm[v]) for u, v in self.edges), self.weights)


@dataclass(frozen=True)
class SmallWorldConfig:
    n: int
    k_l: int = 4
    p_w: float = 0.5
    seed: int = 0

    def __post_init__(self):
        _check_degree(self.n, self.k_l)
        if not 0.0 <= self.p_w <= 1.0:
            raise ConfigError(f"rewiring probability {self.p_w} outside [0, 1]")


def _check_degree(n: int, k_l: int) -> None:
    if k_l % 2 or k_l < 2:
        raise BadDegree(f"lattice degree must be even and >= 2, got {k_l}")
    if k_l > n - 1:
        raise BadDegree(f"lattice degree {k_l} too large for {n} nodes")


def ring_lattice(n: int, k_l: int) -> Graph:
    """Ring of ``n`` nodes, each joined to its ``k_l/2`` neighbours on either side."""
    _check_degree(n, k_l)
    edges = [(i, (i + j) % n) for j in range(1, k_l // 2 + 1) for i in range(n)]
    return Graph(n, tuple(edges))


def lattice_clustering(k_l: int) -> float:
    """Mean local clustering of a ring lattice with even degree ``k_l``."""
    if k_l % 2 or k_l < 2:
        raise BadDegree(f"lattice degree must be even and >= 2, got {k_l}")
    return 0.75 * (k_l - 2) / (k_l - 1)


def _owner(u: int, v: int, n: int) -> tuple[int, int, int]:
    """(owner, far endpoint, ring offset) with the far endpoint clockwise of the owner."""
    fwd = (v - u) % n
    if fwd <= n - fwd:
        return u, v, fwd
    return v, u, n - fwd


def rewire(g: Graph, p_w: float, seed: int, max_tries: int = MAX_REWIRE_TRIES) -> Graph:
    """Watts-Strogatz rewiring.

    Edges are visited by ring offset, then owner.  A selected edge keeps its
    owner and moves its far endpoint to a uniformly drawn node; loops and
    duplicates are rejected and redrawn up to ``max_tries`` times, after which
    the edge is left in place.  Weights, if any, travel with their edge.
    """
    if not 0.0 <= p_w <= 1.0:
        raise ConfigError(f"rewiring probability {p_w} outside [0, 1]")
    rng = np.random.default_rng(seed)
    n = g.n
    nbrs = g.neighbor_sets()
    weight = dict(zip(g.edges, g.edge_weights()))
    visits = sorted((_owner(u, v, n) for u, v in g.edges), key=lambda t: (t[2], t[0]))

    for owner, far, _ in visits:
        if rng.random() >= p_w:
            continue
        for _ in range(max_tries):
            target = int(rng.integers(n))
            if target != owner and target not in nbrs[owner]:
                break
        else:
            continue
        nbrs[owner].discard(far)
        nbrs[far].discard(owner)
        nbrs[owner].add(target)
        nbrs[target].add(owner)
        w = weight.pop((min(owner, far), max(owner, far)))
        weight[(min(owner, target), max(owner, target))] = w

    edges = tuple(weight)
    weights = tuple(weight.values()) if g.weighted else None
    return Graph(n, edges, weights)


def generate(cfg: SmallWorldConfig) -> Graph:
    return rewire(ring_lattice(cfg.n, cfg.k_l), cfg.p_w, cfg.seed)


def zscores(values: Sequence[float]) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    sd = float(np.std(x, ddof=1)) if len(x) > 1 else 0.0
    if not sd > 0:
        raise ConstantValues("node values have zero spread")
    return (x - x.mean()) / sd


def weight_edges(g: Graph, node_values: Sequence[float], epsilon: float = WEIGHT_EPSILON) -> Graph:
    """Weight each edge by the mean z-score of its endpoints, shifted to be >= ``epsilon``."""
    if len(node_values) != g.n:
        raise GraphError(f"{len(node_values)} node values for {g.n} nodes")
    if not epsilon > 0:
        raise ConfigError("weight epsilon must be positive")
    z = zscores(node_values)
    if not g.edges:
        return Graph(g.n, (), ())
    raw = np.array([(z[u] + z[v]) / 2.0 for u, v in g.edges])
    w = raw - raw.min() + epsilon
    return Graph(g.n, g.edges, tuple(float(x) for x in w))


def export_edges(g: Graph) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if g.weighted:
        w.writerow(["ID_1", "ID_2", "WEIGHT"])
        for (u, v), x in zip(g.edges, g.weights):
            w.writerow([u, v, repr(x)])
    else:
        w.writerow(["ID_1", "ID_2"])
        w.writerows(g.edges)
    return buf.getvalue()


def import_edges(csv_text: str, n: int | None = None) -> Graph:
    """Parse an edge list written by :func:`export_edges`.

    The file does not carry the node count; without ``n`` it is taken as
    ``max id + 1``, so trailing isolated nodes need ``n`` to survive a round trip.
    """
    lines = csv_text.splitlines()
    if not lines:
        raise MalformedLine("empty edge list")
    header = [h.strip() for h in lines[0].split(",")]
    if header not in (["ID_1", "ID_2"], ["ID_1", "ID_2", "WEIGHT"]):
        raise MalformedLine(f"bad header {lines[0]!r}")
    weighted = len(header) == 3
    edges, weights, seen = [], [], set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != len(header):
            raise MalformedLine(f"line {lineno}: {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2]) if weighted else None
        except ValueError:
            raise MalformedLine(f"line {lineno}: {line!r}") from None
        if u < 0 or v < 0 or (w is not None and not math.isfinite(w)):
            raise MalformedLine(f"line {lineno}: {line!r}")
        if u == v:
            raise SelfLoop(f"line {lineno}: self loop on node {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise DuplicateEdge(f"line {lineno}: duplicate edge {key}")
        seen.add(key)
        edges.append(key)
        weights.append(w)
    if n is None:
        n = max((v for _, v in edges), default=-1) + 1
    return Graph(n, tuple(edges), tuple(weights) if weighted else None)
