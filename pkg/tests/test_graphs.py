import numpy as np
import pytest
from hypothesis import given, strategies as st

from gblab.graphs import (
    Graph,
    alpha_max,
    ba_graph,
    er_graph,
    knn_graph,
    laplacian,
    quad_kernel,
)


def pairwise_quad(w, stack, theta, a_mu, alpha):
    # independent double-sum oracle: a_mu*alpha*(1/2)*sum_ij W_ij (<x_i,t>-<x_j,t>)^2
    scores = stack @ theta
    total = 0.0
    n = w.shape[0]
    for i in range(n):
        for j in range(n):
            total += w[i, j] * (scores[i] - scores[j]) ** 2
    return a_mu * alpha * 0.5 * total


class TestErGraph:
    def test_p_zero_empty(self):
        g = er_graph(4, 0.0, np.random.default_rng(0))
        assert g.edge_count == 0
        assert np.array_equal(laplacian(g), np.zeros((4, 4)))

    def test_p_one_complete(self):
        g = er_graph(4, 1.0, np.random.default_rng(0))
        assert g.edge_count == 6

    def test_edge_count_within_binomial_band(self):
        # mean 0.3*4950 = 1485, sd = sqrt(4950*0.3*0.7) = 32.24
        g = er_graph(100, 0.3, np.random.default_rng(7))
        assert abs(g.edge_count - 1485) <= 4 * np.sqrt(4950 * 0.3 * 0.7)

    def test_p_out_of_range(self):
        with pytest.raises(ValueError):
            er_graph(4, 1.5, np.random.default_rng(0))

    def test_deterministic_given_seed(self):
        a = er_graph(30, 0.4, np.random.default_rng(11))
        b = er_graph(30, 0.4, np.random.default_rng(11))
        assert a.edges == b.edges


class TestBaGraph:
    def test_n3_m2_complete(self):
        g = ba_graph(3, 2, np.random.default_rng(0))
        assert g.edges == ((0, 1), (0, 2), (1, 2))

    def test_edge_count_formula(self):
        # complete seed on 2 nodes (1 edge) plus 2 per each of 8 added nodes
        g = ba_graph(10, 2, np.random.default_rng(3))
        assert g.edge_count == 1 + 8 * 2

    def test_m_equal_n_rejected(self):
        with pytest.raises(ValueError):
            ba_graph(4, 4, np.random.default_rng(0))

    def test_deterministic_given_seed(self):
        a = ba_graph(25, 3, np.random.default_rng(5))
        b = ba_graph(25, 3, np.random.default_rng(5))
        assert a.edges == b.edges


class TestKnnGraph:
    def test_collinear_path(self):
        pts = np.array([[0.0], [1.0], [2.0]])
        g = knn_graph(pts, 1)
        assert g.edges == ((0, 1), (1, 2))

    def test_k_n_minus_one_complete(self):
        pts = np.random.default_rng(2).normal(size=(6, 3))
        g = knn_graph(pts, 5)
        assert g.edge_count == 15

    def test_duplicate_points_tie_to_lower_index(self):
        pts = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
        g = knn_graph(pts, 1)
        # every node's nearest is the lowest-indexed other node
        assert (0, 1) in g.edges and (0, 2) in g.edges and (1, 2) not in g.edges

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            knn_graph(np.zeros((3, 2)), 3)


class TestLaplacian:
    def test_path_on_three(self):
        g = Graph(3, ((0, 1), (1, 2)))
        expected = np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
        assert np.array_equal(laplacian(g), expected)

    def test_complete_graph_entries(self):
        g = er_graph(5, 1.0, np.random.default_rng(0))
        lap = laplacian(g)
        assert np.all(np.diag(lap) == 4.0)
        off = lap[~np.eye(5, dtype=bool)]
        assert np.all(off == -1.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_invariants_random_graphs(self, seed):
        rng = np.random.default_rng(seed)
        g = er_graph(20, 0.3, rng)
        lap = laplacian(g)
        assert np.allclose(lap, lap.T)
        assert np.max(np.abs(lap.sum(axis=1))) == 0.0
        eig = np.linalg.eigvalsh(lap)
        assert eig.min() >= -1e-10
        assert abs(eig.min()) <= 1e-10
        max_deg = max(np.diag(lap).max(), 0)
        assert eig.max() <= 2 * max_deg + 1e-10
        assert eig.max() <= 2 * (g.n - 1) + 1e-10


class TestQuadKernel:
    def test_alpha_zero_kernel_vanishes(self):
        stack = np.random.default_rng(0).normal(size=(4, 6))
        lap = laplacian(er_graph(4, 0.5, np.random.default_rng(1)))
        kern = quad_kernel(stack, lap, 1.0, 0.0)
        assert np.array_equal(kern.K, np.zeros((6, 6)))
        assert kern.quad(np.ones(6)) == 0.0

    def test_single_edge_hand_case(self):
        # x1 = e1, x2 = e2, one edge: K = [[1,-1],[-1,1]], q((1,1)) = 0
        stack = np.eye(2)
        lap = laplacian(Graph(2, ((0, 1),)))
        kern = quad_kernel(stack, lap, 1.0, 1.0)
        assert np.allclose(kern.K, np.array([[1.0, -1.0], [-1.0, 1.0]]))
        assert abs(kern.quad(np.array([1.0, 1.0]))) < 1e-15

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_double_sum_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n, d = 12, 5
        g = er_graph(n, 0.4, rng)
        w = g.adjacency()
        stack = rng.normal(size=(n, d))
        kern = quad_kernel(stack, laplacian(g), 1.7, 0.3)
        for _ in range(10):
            theta = rng.normal(size=d)
            assert kern.quad(theta) == pytest.approx(
                pairwise_quad(w, stack, theta, 1.7, 0.3), abs=1e-10
            )

    def test_psd_on_random_thetas(self):
        rng = np.random.default_rng(9)
        g = er_graph(15, 0.5, rng)
        stack = rng.normal(size=(15, 8))
        kern = quad_kernel(stack, laplacian(g), 1.0, 0.9)
        for _ in range(100):
            theta = rng.normal(size=8)
            assert kern.quad(theta) >= -1e-12

    def test_sigma_max_matches_dense(self):
        rng = np.random.default_rng(4)
        g = er_graph(10, 0.6, rng)
        lap = laplacian(g)
        stack = rng.normal(size=(10, 4))
        kern = quad_kernel(stack, lap, 2.0, 0.5)
        assert kern.sigma_max_l == pytest.approx(np.linalg.norm(lap, 2), rel=1e-6)
        assert kern.sigma_max_k == pytest.approx(
            np.linalg.norm(stack.T @ lap @ stack, 2), rel=1e-6
        )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            quad_kernel(np.zeros((3, 2)), np.zeros((4, 4)), 1.0, 1.0)


class TestAlphaMax:
    def test_lambda_one_gives_zero(self):
        assert alpha_max(1.0, 3.0, 17) == 0.0

    def test_plug_in_values(self):
        assert alpha_max(0.5, 1.0, 10) == pytest.approx(0.5 / 360, rel=1e-12)
        assert alpha_max(0.9, 4.0, 100) == pytest.approx(0.1 / 158400, rel=1e-12)

    @given(st.floats(min_value=1.0000001, max_value=50.0))
    def test_lambda_above_one_rejected(self, lam):
        with pytest.raises(ValueError):
            alpha_max(lam, 1.0, 5)


def test_graph_adjacency_symmetric_zero_diagonal():
    for seed in range(3):
        rng = np.random.default_rng(seed)
        for g in (er_graph(12, 0.5, rng), ba_graph(12, 2, rng)):
            w = g.adjacency()
            assert np.array_equal(w, w.T)
            assert np.all(np.diag(w) == 0.0)
