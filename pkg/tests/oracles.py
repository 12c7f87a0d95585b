"""Independent reference implementations used only by the tests.

Each oracle is deliberately naive (brute force or textbook closed form) so
that agreement with the library is evidence rather than shared bugs.
"""
import itertools
import math

import numpy as np


# -- graphs ---------------------------------------------------------------------

def floyd_warshall(n, edges, weights=None):
    d = np.full((n, n), math.inf)
    np.fill_diagonal(d, 0.0)
    weights = weights or [1.0] * len(edges)
    for (u, v), w in zip(edges, weights):
        d[u, v] = d[v, u] = min(d[u, v], w)
    for k in range(n):
        d = np.minimum(d, d[:, [k]] + d[[k], :])
    return d


def closeness_oracle(n, edges, weights=None):
    d = floyd_warshall(n, edges, weights)
    out = []
    for v in range(n):
        reach = [d[v, u] for u in range(n) if u != v and math.isfinite(d[v, u])]
        out.append(0.0 if not reach else (len(reach) / (n - 1)) * (len(reach) / sum(reach)))
    return np.array(out)


def _simple_paths(adj, s, t):
    stack = [(s, [s], 0.0)]
    while stack:
        v, path, length = stack.pop()
        if v == t:
            yield path, length
            continue
        for w, wt in adj[v]:
            if w not in path:
                stack.append((w, path + [w], length + wt))


def betweenness_oracle(n, edges, weights=None, rtol=1e-12):
    """Enumerate every simple s-t path, keep the shortest ones, count visits."""
    weights = weights or [1.0] * len(edges)
    adj = [[] for _ in range(n)]
    for (u, v), w in zip(edges, weights):
        adj[u].append((v, w))
        adj[v].append((u, w))
    b = np.zeros(n)
    for s, t in itertools.combinations(range(n), 2):
        paths = list(_simple_paths(adj, s, t))
        if not paths:
            continue
        best = min(length for _, length in paths)
        shortest = [p for p, length in paths if length <= best * (1 + rtol)]
        for p in shortest:
            for v in p[1:-1]:
                b[v] += 1.0 / len(shortest)
    return b


def avg_path_oracle(n, edges, weights=None):
    d = floyd_warshall(n, edges, weights)
    vals = [d[i, j] for i, j in itertools.combinations(range(n), 2) if math.isfinite(d[i, j])]
    return sum(vals) / len(vals)


def clustering_oracle(n, edges):
    a = np.zeros((n, n))
    for u, v in edges:
        a[u, v] = a[v, u] = 1
    tri = np.diag(a @ a @ a) / 2
    deg = a.sum(1)
    pairs = deg * (deg - 1) / 2
    return np.where(deg >= 2, tri / np.where(pairs > 0, pairs, 1), 0.0)


# -- quadratic program ------------------------------------------------------------

def _project(v, y, c):
    """Euclidean projection onto {0 <= a <= c, y.a = 0}.

    ``g(lam) = y . clip(v - lam y, 0, c)`` is piecewise linear and
    non-increasing in ``lam``; evaluate it at every breakpoint and interpolate.
    """
    bps = np.unique(np.r_[v * y, (v - c) * y])
    g = (np.clip(v[None, :] - bps[:, None] * y[None, :], 0.0, c) * y).sum(axis=1)
    k = np.searchsorted(-g, 0.0)  # first breakpoint with g <= 0
    if k == 0:
        lam = bps[0]
    elif k == len(bps):
        lam = bps[-1]
    else:
        g0, g1 = g[k - 1], g[k]
        lam = bps[k - 1] + (bps[k] - bps[k - 1]) * g0 / (g0 - g1)
    return np.clip(v - lam * y, 0.0, c)


def _primal(a, y, K, Q, c):
    """Soft-margin primal value at the w implied by ``a`` and the best bias.

    The hinge sum is convex and piecewise linear in b, so its minimum sits at
    one of the breakpoints ``b = y_i - f0(x_i)``.
    """
    f0 = K @ (a * y)
    bs = y - f0
    hinge = np.maximum(0.0, 1.0 - y[None, :] * (f0[None, :] + bs[:, None])).sum(axis=1)
    return 0.5 * float(a @ Q @ a) + c * float(hinge.min())


def svm_dual_oracle(K, y, c, iters=200000, gap_rtol=1e-9):
    """Maximize sum(a) - a'Qa/2 over the SVM dual feasible set.

    Accelerated projected gradient with adaptive restart, stopped once the
    primal-dual gap certifies ``gap_rtol`` relative accuracy.  Returns
    (dual objective, alpha, certified gap).
    """
    y = np.asarray(y, dtype=float)
    Q = (y[:, None] * y[None, :]) * K
    L = max(np.linalg.eigvalsh(Q).max(), 1e-12)
    obj = lambda a: float(a.sum() - 0.5 * a @ Q @ a)
    a = np.zeros(len(y))
    z, t = a.copy(), 1.0
    gap = math.inf
    for it in range(iters):
        a_new = _project(z + (1.0 - Q @ z) / L, y, c)
        if obj(a_new) < obj(a):
            if z is a:  # even a plain projected step fails: a is a fixed point
                break
            z, t = a, 1.0  # restart momentum
            continue
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        z = a_new + ((t - 1) / t_new) * (a_new - a)
        a, t = a_new, t_new
        if it % 25 == 0:
            d = obj(a)
            gap = _primal(a, y, K, Q, c) - d
            if gap <= gap_rtol * max(1.0, abs(d)):
                break
    d = obj(a)
    return d, a, _primal(a, y, K, Q, c) - d


# -- statistics ---------------------------------------------------------------------

def pairwise_auc(scores, labels):
    """(concordant + ties / 2) / (P N) by enumerating every positive-negative pair."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    num = 0.0
    for p in pos:
        for q in neg:
            num += 1.0 if p > q else 0.5 if p == q else 0.0
    return num / (len(pos) * len(neg))


def woolf_se(a, b, c, d):
    """Standard error of the log odds ratio of a 2x2 table."""
    return math.sqrt(1 / a + 1 / b + 1 / c + 1 / d)


def numeric_gradient(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g
