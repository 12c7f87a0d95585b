"""Per-node centrality metrics and global graph diagnostics.

Edge weights are read as distances for closeness, betweenness and path
lengths, and as connection strengths for weighted degree and eigenvector
centrality.  Unweighted graphs use unit weights throughout.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import sparse
from scipy.sparse import csgraph

from .errors import NoConvergence, NonpositiveWeight
from .smallworld import Graph

METRIC_NAMES = ("clustering_coef", "degree", "weighted_degree", "closeness", "betweenness",
                "eigenvector")

# relative slack for treating two float path lengths as equal
_TIE_RTOL = 1e-12


def _check_weights(g: Graph) -> None:
    if g.weights is not None and any(not w > 0 for w in g.weights):
        raise NonpositiveWeight("shortest-path metrics need positive edge weights")


def local_clustering(g: Graph) -> np.ndarray:
    """Fraction of each node's neighbour pairs that are adjacent; 0 below degree 2."""
    nbrs = g.neighbor_sets()
    out = np.zeros(g.n)
    for v, nv in enumerate(nbrs):
        d = len(nv)
        if d < 2:
            continue
        links = sum(len(nv & nbrs[u]) for u in nv) / 2
        out[v] = links / (d * (d - 1) / 2)
    return out


def degree_metrics(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """(degree, weighted degree); unit weights when the graph is unweighted."""
    deg = np.zeros(g.n, dtype=np.int64)
    wdeg = np.zeros(g.n)
    for (u, v), w in zip(g.edges, g.edge_weights()):
        deg[u] += 1
        deg[v] += 1
        wdeg[u] += w
        wdeg[v] += w
    return deg, wdeg


@njit(cache=True)
def _push(hd, hv, size, d, v):
    i = size
    hd[i] = d
    hv[i] = v
    while i > 0:
        parent = (i - 1) // 2
        if (hd[parent], hv[parent]) <= (hd[i], hv[i]):
            break
        hd[i], hd[parent] = hd[parent], hd[i]
        hv[i], hv[parent] = hv[parent], hv[i]
        i = parent
    return size + 1


@njit(cache=True)
def _pop(hd, hv, size):
    d, v = hd[0], hv[0]
    size -= 1
    hd[0] = hd[size]
    hv[0] = hv[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        c = left
        if left + 1 < size and (hd[left + 1], hv[left + 1]) < (hd[left], hv[left]):
            c = left + 1
        if (hd[i], hv[i]) <= (hd[c], hv[c]):
            break
        hd[i], hd[c] = hd[c], hd[i]
        hv[i], hv[c] = hv[c], hv[i]
        i = c
    return d, v, size


@njit(cache=True)
def _all_sources(indptr, indices, lengths, n, want_betweenness, close, between):
    """Dijkstra from every node, with Brandes accumulation when asked.

    Two path lengths count as equal when they agree to ``_TIE_RTOL``.
    Distance sums use Neumaier compensation.
    """
    m2 = len(indices)
    hd = np.empty(m2 + 1)
    hv = np.empty(m2 + 1, dtype=np.int64)
    sigma = np.empty(n)
    delta = np.empty(n)
    done = np.empty(n, dtype=np.bool_)
    npred = np.empty(n, dtype=np.int64)
    preds = np.empty(m2, dtype=np.int64)  # preds of w live in preds[indptr[w]:indptr[w+1]]
    order = np.empty(n, dtype=np.int64)
    dist = np.empty(n)
    for s in range(n):
        dist[:] = np.inf
        sigma[:] = 0.0
        done[:] = False
        npred[:] = 0
        dist[s] = 0.0
        sigma[s] = 1.0
        size = _push(hd, hv, 0, 0.0, s)
        settled = 0
        while size > 0:
            d, v, size = _pop(hd, hv, size)
            if done[v]:
                continue
            done[v] = True
            order[settled] = v
            settled += 1
            sv = sigma[v]
            for k in range(indptr[v], indptr[v + 1]):
                w = indices[k]
                if done[w]:
                    continue
                nd = d + lengths[k]
                dw = dist[w]
                if dw == np.inf or dw - nd > _TIE_RTOL * dw:
                    dist[w] = nd
                    sigma[w] = sv
                    preds[indptr[w]] = v
                    npred[w] = 1
                    size = _push(hd, hv, size, nd, w)
                elif abs(nd - dw) <= _TIE_RTOL * dw:
                    sigma[w] += sv
                    preds[indptr[w] + npred[w]] = v
                    npred[w] += 1
        if settled > 1:
            total = 0.0
            comp = 0.0
            for t in range(1, settled):
                x = dist[order[t]]
                u = total + x
                if abs(total) >= abs(x):
                    comp += (total - u) + x
                else:
                    comp += (x - u) + total
                total = u
            total += comp
            reached = settled - 1
            close[s] = (reached / (n - 1)) * (reached / total)
        if want_betweenness:
            delta[:] = 0.0
            for t in range(settled - 1, -1, -1):
                w = order[t]
                coeff = (1.0 + delta[w]) / sigma[w]
                for k in range(indptr[w], indptr[w] + npred[w]):
                    v = preds[k]
                    delta[v] += sigma[v] * coeff
                if w != s:
                    between[w] += delta[w]


def _paths(g: Graph, want_betweenness: bool):
    _check_weights(g)
    n = g.n
    if n == 0:
        return np.zeros(0), np.zeros(0)
    a = adjacency_matrix(g)
    a.sort_indices()
    close = np.zeros(n)
    between = np.zeros(n)
    _all_sources(a.indptr.astype(np.int64), a.indices.astype(np.int64), a.data.astype(float),
                 n, want_betweenness, close, between)
    return close, between / 2.0


def closeness(g: Graph) -> np.ndarray:
    """Closeness scaled by the reachable fraction: ``(r/(n-1)) * (r/S)``.

    ``r`` is the number of other nodes reachable from the node and ``S`` the
    sum of their shortest-path distances; nodes reaching nobody score 0.
    """
    return _paths(g, want_betweenness=False)[0]


def betweenness(g: Graph) -> np.ndarray:
    """Unnormalized betweenness, each unordered pair counted once."""
    return _paths(g, want_betweenness=True)[1]


def closeness_betweenness(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """Both path metrics from one pass of single-source searches."""
    return _paths(g, want_betweenness=True)


def adjacency_matrix(g: Graph) -> sparse.csr_matrix:
    if not g.edges:
        return sparse.csr_matrix((g.n, g.n))
    u, v = np.array(g.edges).T
    w = np.asarray(g.edge_weights(), dtype=float)
    return sparse.coo_matrix((np.r_[w, w], (np.r_[u, v], np.r_[v, u])), shape=(g.n, g.n)).tocsr()


def eigenvector(g: Graph, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Dominant eigenvector of the weighted adjacency matrix, scaled to max 1.

    Power iteration on ``A + I`` from the uniform vector.  The shift leaves the
    eigenvectors alone but breaks the +/- lambda tie of bipartite graphs (stars,
    even cycles), where plain iteration on ``A`` oscillates.
    """
    if g.n == 0:
        raise ValueError("eigenvector centrality of an empty graph")
    a = adjacency_matrix(g)
    x = np.ones(g.n)
    for _ in range(max_iter):
        y = a @ x + x
        y /= y.max()
        if np.max(np.abs(y - x)) < tol:
            return y
        x = y
    raise NoConvergence(f"power iteration did not converge in {max_iter} iterations")


def global_diagnostics(g: Graph) -> tuple[float, float]:
    """(average shortest path over reachable unordered pairs, mean local clustering)."""
    _check_weights(g)
    if g.n < 2 or not g.edges:
        return 0.0, float(local_clustering(g).mean()) if g.n else 0.0
    dist = csgraph.dijkstra(adjacency_matrix(g), directed=False)
    iu = np.triu_indices(g.n, k=1)
    d = dist[iu]
    d = d[np.isfinite(d)]
    apl = float(d.mean()) if d.size else 0.0
    return apl, float(local_clustering(g).mean())


@dataclass(frozen=True)
class NodeMetrics:
    clustering_coef: np.ndarray
    degree: np.ndarray
    weighted_degree: np.ndarray
    closeness: np.ndarray
    betweenness: np.ndarray
    eigenvector: np.ndarray

    def __len__(self):
        return len(self.degree)

    def columns(self) -> dict[str, np.ndarray]:
        return {name: np.asarray(getattr(self, name), dtype=float) for name in METRIC_NAMES}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("node_id",) + METRIC_NAMES)
        for i in range(len(self)):
            w.writerow([i, repr(float(self.clustering_coef[i])), int(self.degree[i]),
                        repr(float(self.weighted_degree[i])), repr(float(self.closeness[i])),
                        repr(float(self.betweenness[i])), repr(float(self.eigenvector[i]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "NodeMetrics":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(h.strip() for h in rows[0]) != ("node_id",) + METRIC_NAMES:
            raise ValueError("metrics CSV has an unexpected header")
        body = [r for r in rows[1:] if r]
        ids = [int(r[0]) for r in body]
        if ids != list(range(len(body))):
            raise ValueError("metrics CSV node ids must run 0..n-1 in order")
        cols = list(zip(*[r[1:] for r in body])) if body else [()] * len(METRIC_NAMES)
        return cls(
            clustering_coef=np.array(cols[0], dtype=float),
            degree=np.array(cols[1], dtype=np.int64),
            weighted_degree=np.array(cols[2], dtype=float),
            closeness=np.array(cols[3], dtype=float),
            betweenness=np.array(cols[4], dtype=float),
            eigenvector=np.array(cols[5], dtype=float),
        )


def node_metrics(g: Graph) -> NodeMetrics:
    deg, wdeg = degree_metrics(g)
    close, between = closeness_betweenness(g)
    return NodeMetrics(local_clustering(g), deg, wdeg, close, between, eigenvector(g))
