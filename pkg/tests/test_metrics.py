import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import (avg_path_oracle, betweenness_oracle, closeness_oracle, clustering_oracle)

from netclassify.errors import NoConvergence, NonpositiveWeight
from netclassify.metrics import (NodeMetrics, betweenness, closeness, degree_metrics, eigenvector,
                                 global_diagnostics, local_clustering, node_metrics)
from netclassify.smallworld import Graph, SmallWorldConfig, generate, ring_lattice, weight_edges

TRIANGLE = Graph(3, ((0, 1), (1, 2), (0, 2)))
PATH3 = Graph(3, ((0, 1), (1, 2)))
CYCLE4 = Graph(4, ((0, 1), (1, 2), (2, 3), (0, 3)))


def star(leaves, w=None):
    edges = tuple((0, i) for i in range(1, leaves + 1))
    return Graph(leaves + 1, edges, None if w is None else (w,) * leaves)


def random_connected(rng, n, integer_weights=False):
    """Random spanning tree plus extra edges; weights continuous or small integers."""
    edges = {(int(rng.integers(v)), v) for v in range(1, n)}
    for _ in range(int(rng.integers(0, n * (n - 1) // 2))):
        u, v = sorted(rng.choice(n, 2, replace=False).tolist())
        edges.add((u, v))
    edges = sorted(edges)
    if integer_weights:
        w = rng.integers(1, 4, len(edges)).astype(float)
    else:
        w = rng.uniform(0.1, 3.0, len(edges))
    return Graph(n, tuple(edges), tuple(w.tolist()))


def test_local_clustering_examples():
    assert list(local_clustering(TRIANGLE)) == [1, 1, 1]
    assert list(local_clustering(PATH3)) == [0, 0, 0]
    assert list(local_clustering(CYCLE4)) == [0, 0, 0, 0]


def test_degree_examples():
    deg, wdeg = degree_metrics(star(3))
    assert deg[0] == 3
    assert degree_metrics(star(3, 2.0))[1][0] == 6.0
    deg, wdeg = degree_metrics(Graph(3, ((0, 1),)))
    assert (deg[2], wdeg[2]) == (0, 0.0)


def test_closeness_examples():
    np.testing.assert_allclose(closeness(PATH3), [2 / 3, 1.0, 2 / 3], rtol=1e-15)
    assert closeness(Graph(3, PATH3.edges, (2.0, 2.0)))[1] == 0.5
    w = 1.5
    c = closeness(Graph(4, ((0, 1), (2, 3)), (w, w)))
    np.testing.assert_allclose(c, (1 / 3) * (1 / w), rtol=1e-15)
    assert closeness(Graph(3, ((0, 1),)))[2] == 0.0


def test_betweenness_examples():
    assert list(betweenness(PATH3)) == [0.0, 1.0, 0.0]
    np.testing.assert_allclose(betweenness(CYCLE4), 0.5)
    b = betweenness(star(4))
    assert b[0] == 6.0 and (b[1:] == 0).all()


def test_eigenvector_examples():
    for n in (3, 4, 7):
        g = Graph(n, tuple((i, (i + 1) % n) for i in range(n)))
        np.testing.assert_allclose(eigenvector(g), 1.0, atol=1e-9)
    e = eigenvector(star(3))
    # dense eigensolver oracle
    a = np.zeros((4, 4))
    a[0, 1:] = a[1:, 0] = 1
    vals, vecs = np.linalg.eigh(a)
    ref = np.abs(vecs[:, -1]) / np.abs(vecs[:, -1]).max()
    np.testing.assert_allclose(e, ref, atol=1e-8)
    assert e[1] == pytest.approx(1 / math.sqrt(3), abs=1e-8)
    np.testing.assert_allclose(eigenvector(Graph(2, ((0, 1),), (7.0,))), [1.0, 1.0])


def test_eigenvector_budget():
    with pytest.raises(NoConvergence):
        eigenvector(generate(SmallWorldConfig(60, 4, 0.5, 1)), max_iter=2)


def test_global_diagnostics_examples():
    assert global_diagnostics(PATH3) == (pytest.approx(4 / 3), 0.0)
    assert global_diagnostics(TRIANGLE) == (1.0, 1.0)
    assert global_diagnostics(Graph(5, tuple((i, j) for i in range(5) for j in range(i + 1, 5))))[0] == 1.0


def test_nonpositive_weights_rejected_by_path_metrics():
    g = object.__new__(Graph)
    object.__setattr__(g, "n", 2)
    object.__setattr__(g, "edges", ((0, 1),))
    object.__setattr__(g, "weights", (-1.0,))
    with pytest.raises(NonpositiveWeight):
        closeness(g)


@pytest.mark.parametrize("integer_weights", [False, True])
def test_oracle_agreement(integer_weights):
    rng = np.random.default_rng(2024 + integer_weights)
    for _ in range(100):
        n = int(rng.integers(2, 8))
        g = random_connected(rng, n, integer_weights)
        w = list(g.weights)
        np.testing.assert_allclose(closeness(g), closeness_oracle(n, g.edges, w), rtol=0, atol=1e-9)
        np.testing.assert_allclose(betweenness(g), betweenness_oracle(n, g.edges, w), rtol=0, atol=1e-9)
        assert abs(global_diagnostics(g)[0] - avg_path_oracle(n, g.edges, w)) < 1e-9
        np.testing.assert_allclose(local_clustering(g), clustering_oracle(n, g.edges), atol=1e-15)


def _residual(g):
    x = eigenvector(g)
    a = np.zeros((g.n, g.n))
    for (u, v), w in zip(g.edges, g.edge_weights()):
        a[u, v] = a[v, u] = w
    lam = x @ a @ x / (x @ x)
    return np.linalg.norm(a @ x - lam * x) / np.linalg.norm(x)


def test_eigen_residual_random():
    rng = np.random.default_rng(5)
    for _ in range(100):
        g = random_connected(rng, int(rng.integers(2, 8)))
        assert _residual(g) < 1e-6


def test_disconnected_closeness_scaling():
    g = Graph(5, ((0, 1), (1, 2), (3, 4)))
    c = closeness(g)
    assert c[1] == pytest.approx((2 / 4) * (2 / 2))
    assert c[3] == pytest.approx((1 / 4) * 1.0)
    np.testing.assert_allclose(c, closeness_oracle(5, g.edges))


@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_uniform_weight_scaling(seed, c):
    rng = np.random.default_rng(seed)
    g = random_connected(rng, int(rng.integers(3, 9)))
    h = Graph(g.n, g.edges, tuple(c * w for w in g.weights))
    mg, mh = node_metrics(g), node_metrics(h)
    assert (mg.degree == mh.degree).all()
    np.testing.assert_array_equal(mg.clustering_coef, mh.clustering_coef)
    np.testing.assert_allclose(mh.weighted_degree, c * mg.weighted_degree, rtol=1e-12)
    np.testing.assert_allclose(mh.closeness, mg.closeness / c, rtol=1e-12)
    np.testing.assert_allclose(mh.betweenness, mg.betweenness, atol=1e-9)
    np.testing.assert_allclose(mh.eigenvector, mg.eigenvector, atol=1e-8)


@given(st.integers(0, 10_000))
def test_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    g = random_connected(rng, int(rng.integers(3, 9)))
    perm = rng.permutation(g.n)
    h = g.relabel(perm.tolist())
    mg, mh = node_metrics(g).columns(), node_metrics(h).columns()
    for name in mg:
        np.testing.assert_allclose(mh[name][perm], mg[name], atol=1e-8, err_msg=name)


def test_metrics_csv_roundtrip_and_header():
    g = weight_edges(generate(SmallWorldConfig(30, 4, 0.5, 3)), np.arange(30) % 5)
    m = node_metrics(g)
    text = m.to_csv()
    assert text.splitlines()[0] == ("node_id,clustering_coef,degree,weighted_degree,closeness,"
                                    "betweenness,eigenvector")
    back = NodeMetrics.from_csv(text)
    for name, col in m.columns().items():
        np.testing.assert_array_equal(back.columns()[name], col)


def test_ring_lattice_clustering_at_survey_size():
    g = ring_lattice(1284, 4)
    assert abs(global_diagnostics(g)[1] - 0.5) < 1e-12
