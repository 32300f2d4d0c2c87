import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphlogit.graph import (
    GraphError,
    SbmConfig,
    from_edge_list,
    neighbor_covariate_sum,
    neighbor_feature_sum,
    default_sbm_config,
    sbm_generate,
    validate_graph,
)

from conftest import random_graph


class TestFromEdgeList:
    def test_empty(self):
        g = from_edge_list([], 3)
        assert g.n == 3
        assert g.edge_count == 0
        np.testing.assert_array_equal(g.degrees(), [0, 0, 0])

    def test_symmetric_duplicates_collapse(self):
        g = from_edge_list([(0, 1), (1, 0)], 2)
        assert g.edge_count == 1
        np.testing.assert_array_equal(g.neighbors(0), [1])
        np.testing.assert_array_equal(g.neighbors(1), [0])

    def test_repeated_lines_collapse(self):
        g = from_edge_list([(0, 2), (0, 2), (2, 0), (1, 2)], 3)
        assert g.edge_count == 2
        np.testing.assert_array_equal(g.edges(), [[0, 2], [1, 2]])

    def test_self_loop_rejected(self):
        with pytest.raises(GraphError, match="self-loop"):
            from_edge_list([(0, 0)], 1)

    @pytest.mark.parametrize("edge", [(0, 3), (-1, 0)])
    def test_out_of_range(self, edge):
        with pytest.raises(GraphError):
            from_edge_list([edge], 3)

    def test_neighbors_sorted(self):
        g = from_edge_list([(0, 4), (0, 2), (0, 3), (1, 0)], 5)
        np.testing.assert_array_equal(g.neighbors(0), [1, 2, 3, 4])

    def test_equality(self):
        a = from_edge_list([(0, 1), (1, 2)], 3)
        b = from_edge_list([(2, 1), (1, 0)], 3)
        assert a == b
        assert a != from_edge_list([(0, 1)], 3)


class TestNeighborSums:
    def test_empty_graph_zero(self):
        g = from_edge_list([], 4)
        X = np.arange(8.0).reshape(4, 2)
        np.testing.assert_array_equal(neighbor_feature_sum(g, X, [1.0, -2.0]), 0.0)

    def test_path_exchange(self):
        g = from_edge_list([(0, 1)], 2)
        X = np.array([[2.0], [5.0]])
        np.testing.assert_allclose(neighbor_feature_sum(g, X, [1.0]), [5.0, 2.0])

    def test_dense_oracle(self):
        # independent dense A built from the edge list
        rng = np.random.default_rng(3)
        g = random_graph(6, 0.5, rng)
        A = np.zeros((6, 6))
        for i, j in g.edges():
            A[i, j] = A[j, i] = 1.0
        X = rng.normal(size=(6, 2))
        beta = np.array([0.7, -1.3])
        expected = A @ (X @ beta)
        np.testing.assert_allclose(neighbor_feature_sum(g, X, beta), expected, atol=1e-12)
        np.testing.assert_allclose(neighbor_covariate_sum(g, X), A @ X, atol=1e-12)

    def test_dimension_mismatch(self):
        g = from_edge_list([(0, 1)], 2)
        with pytest.raises(ValueError):
            neighbor_feature_sum(g, np.ones((3, 2)), [1.0, 1.0])
        with pytest.raises(ValueError):
            neighbor_feature_sum(g, np.ones((2, 2)), [1.0])

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(2, 25))
    def test_linear_in_beta(self, seed, n):
        rng = np.random.default_rng(seed)
        g = random_graph(n, 0.3, rng)
        X = rng.normal(size=(n, 3))
        b1, b2 = rng.normal(size=3), rng.normal(size=3)
        lhs = neighbor_feature_sum(g, X, b1 + b2)
        rhs = neighbor_feature_sum(g, X, b1) + neighbor_feature_sum(g, X, b2)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)


class TestSbm:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            SbmConfig(block_sizes=(2, 2), P=np.ones((3, 3)))
        with pytest.raises(ValueError):
            SbmConfig(block_sizes=(2,), P=[[1.5]])
        with pytest.raises(ValueError):
            SbmConfig(block_sizes=(2, 2), P=[[0.1, 0.2], [0.3, 0.1]])

    def test_zero_probability(self):
        g = sbm_generate(SbmConfig((4, 3), np.zeros((2, 2))), np.random.default_rng(0))
        assert g.edge_count == 0

    def test_complete_graph(self):
        g = sbm_generate(SbmConfig((3,), [[1.0]]), np.random.default_rng(0))
        assert g.edge_count == 3
        validate_graph(g)
        np.testing.assert_array_equal(g.degrees(), [2, 2, 2])

    def test_block_structure_respected(self):
        cfg = SbmConfig((5, 5), [[1.0, 0.0], [0.0, 1.0]])
        g = sbm_generate(cfg, np.random.default_rng(1))
        memb = cfg.membership()
        e = g.edges()
        assert np.all(memb[e[:, 0]] == memb[e[:, 1]])
        assert g.edge_count == 20

    def test_default_config_values(self):
        cfg = default_sbm_config()
        assert cfg.block_sizes == (500, 500, 400, 400, 200)
        assert cfg.n == 2000
        np.testing.assert_allclose(np.diag(cfg.P), [0.01, 0.10, 0.05, 0.15, 0.10])
        off = cfg.P[~np.eye(5, dtype=bool)]
        np.testing.assert_allclose(off, 1e-4)

    def test_edge_count_binomial_oracle(self):
        cfg = default_sbm_config()
        sizes = np.array(cfg.block_sizes)
        # expected count summed over unordered block pairs
        mean = 0.0
        var = 0.0
        for k in range(5):
            for l in range(k, 5):
                pairs = sizes[k] * (sizes[k] - 1) / 2 if k == l else sizes[k] * sizes[l]
                mean += pairs * cfg.P[k, l]
                var += pairs * cfg.P[k, l] * (1 - cfg.P[k, l])
        assert cfg.expected_edges() == pytest.approx(mean)
        counts = [sbm_generate(cfg, np.random.default_rng(s)).edge_count for s in range(20)]
        # the average of 20 draws has standard deviation sqrt(var / 20)
        assert abs(np.mean(counts) - mean) < 4 * np.sqrt(var / 20)
        for c in counts:
            assert abs(c - mean) < 4 * np.sqrt(var)

    def test_reproducible(self):
        cfg = default_sbm_config()
        a = sbm_generate(cfg, np.random.default_rng(42))
        b = sbm_generate(cfg, np.random.default_rng(42))
        assert a == b
        validate_graph(a)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_generated_graphs_valid(self, seed):
        cfg = SbmConfig((4, 6, 3), [[0.5, 0.1, 0.0], [0.1, 0.3, 0.2], [0.0, 0.2, 0.9]])
        g = sbm_generate(cfg, np.random.default_rng(seed))
        validate_graph(g)
        A = g.adjacency.toarray()
        np.testing.assert_array_equal(A, A.T)
        assert np.all(np.diag(A) == 0)
