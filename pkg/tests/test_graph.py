from __future__ import annotations

import numpy as np
import pytest

from graphshot import (
    ConvergenceError,
    NormalizedAdjacency,
    PropagationParams,
    SimilarityMatrix,
    ValidationError,
    build_episode_graph,
    cosine_similarity_matrix,
    knn_sparsify,
    laplacian_embedding,
    propagate,
    symmetric_normalize,
)


# ---------------------------------------------------------------------------
# Independent oracles (written before the implementations they check)


def dense_diffusion_oracle(E: np.ndarray, alpha: float, kappa: int, V: np.ndarray):
    """Brute force: materialize (alpha*I + E)^kappa and multiply once."""
    m = E.shape[0]
    return np.linalg.matrix_power(alpha * np.eye(m) + E, kappa) @ V


def power_iteration_radius(E: np.ndarray, iters: int = 400) -> float:
    """Largest |eigenvalue| of a symmetric matrix by plain power iteration."""
    rng = np.random.default_rng(123)
    x = rng.standard_normal(E.shape[0])
    x /= np.linalg.norm(x)
    radius = 0.0
    for _ in range(iters):
        y = E @ x
        norm = np.linalg.norm(y)
        if norm == 0:
            return 0.0
        radius = norm
        x = y / norm
    return radius


def random_graph(rng: np.random.Generator, m: int) -> NormalizedAdjacency:
    V = rng.uniform(0, 1, (m, rng.integers(2, 7)))
    sim = cosine_similarity_matrix(V)
    sparsified = knn_sparsify(sim, int(rng.integers(1, m)))
    return symmetric_normalize(sparsified)


# ---------------------------------------------------------------------------


class TestCosineSimilarity:
    def test_orthogonal_rows(self):
        sim = cosine_similarity_matrix(np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert sim.values[0, 1] == 0.0

    def test_colinear_rows_scale_invariant(self):
        sim = cosine_similarity_matrix(np.array([[2.0, 2.0], [5.0, 5.0]]))
        assert sim.values[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_hand_computed_value(self):
        sim = cosine_similarity_matrix(np.array([[3.0, 4.0], [4.0, 3.0]]))
        assert sim.values[0, 1] == pytest.approx(24 / 25, abs=1e-12)

    def test_zero_row_is_isolated(self):
        sim = cosine_similarity_matrix(np.array([[0.0, 0.0], [1.0, 2.0], [2.0, 1.0]]))
        assert np.all(sim.values[0] == 0.0)
        assert np.all(sim.values[:, 0] == 0.0)

    def test_rejects_single_row(self):
        with pytest.raises(ValidationError):
            cosine_similarity_matrix(np.array([[1.0, 2.0]]))

    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError):
            cosine_similarity_matrix(np.array([[1.0, np.inf], [1.0, 1.0]]))

    def test_symmetry_zero_diag_range_property(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            m = int(rng.integers(2, 12))
            V = rng.uniform(0, 5, (m, int(rng.integers(1, 8))))
            vals = cosine_similarity_matrix(V).values
            np.testing.assert_array_equal(vals, vals.T)
            assert np.all(np.diag(vals) == 0)
            assert vals.min() >= 0 and vals.max() <= 1

    def test_row_scaling_leaves_matrix_unchanged(self):
        rng = np.random.default_rng(1)
        V = rng.uniform(0, 2, (6, 4))
        base = cosine_similarity_matrix(V).values
        for row, scale in [(0, 7.5), (3, 0.03)]:
            W = V.copy()
            W[row] *= scale
            np.testing.assert_allclose(
                cosine_similarity_matrix(W).values, base, atol=1e-12
            )


class TestKnnSparsify:
    def test_keep_all_when_k_large(self):
        rng = np.random.default_rng(2)
        sim = cosine_similarity_matrix(rng.uniform(0, 1, (5, 3)))
        out = knn_sparsify(sim, 4)
        np.testing.assert_array_equal(out.values, sim.values)
        out2 = knn_sparsify(sim, 17)
        np.testing.assert_array_equal(out2.values, sim.values)

    def test_union_keep_rule_hand_case(self):
        vals = np.zeros((3, 3))
        vals[0, 1] = vals[1, 0] = 0.9
        vals[0, 2] = vals[2, 0] = 0.1
        vals[1, 2] = vals[2, 1] = 0.8
        out = knn_sparsify(SimilarityMatrix(vals), 1).values
        assert out[0, 1] == 0.9 and out[1, 2] == 0.8
        assert out[0, 2] == 0.0 and out[2, 0] == 0.0

    def test_tie_break_prefers_smaller_index(self):
        vals = np.zeros((3, 3))
        vals[0, 1] = vals[1, 0] = 0.5
        vals[0, 2] = vals[2, 0] = 0.5
        out = knn_sparsify(SimilarityMatrix(vals), 1).values
        # row 1's top entry is (1,0) and row 2's is (2,0), so both columns of
        # row 0 survive through the union; the row-0 tie itself picks column 1.
        assert out[0, 1] == 0.5
        rows = np.zeros((4, 4))
        rows[0, 1] = rows[1, 0] = 0.5
        rows[0, 2] = rows[2, 0] = 0.5
        rows[1, 2] = rows[2, 1] = 0.7
        rows[1, 3] = rows[3, 1] = 0.7
        rows[2, 3] = rows[3, 2] = 0.9
        out = knn_sparsify(SimilarityMatrix(rows), 1).values
        # row 0 ties at columns 1 and 2 -> keeps (0,1); no other row rescues (0,2)
        assert out[0, 1] == 0.5
        assert out[0, 2] == 0.0

    def test_rejects_bad_k(self):
        sim = cosine_similarity_matrix(np.ones((3, 2)))
        with pytest.raises(ValidationError):
            knn_sparsify(sim, 0)

    def test_symmetry_support_idempotence_property(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            m = int(rng.integers(3, 12))
            sim = cosine_similarity_matrix(rng.uniform(0, 3, (m, int(rng.integers(2, 6)))))
            k = int(rng.integers(1, m))
            out = knn_sparsify(sim, k)
            np.testing.assert_array_equal(out.values, out.values.T)
            # support contains every row's top-k strictly positive entries
            for i in range(m):
                row = sim.values[i]
                order = np.argsort(-row, kind="stable")
                for j in order[:k]:
                    if row[j] > 0:
                        assert out.values[i, j] == row[j]
            again = knn_sparsify(out, k)
            np.testing.assert_array_equal(again.values, out.values)


class TestSymmetricNormalize:
    def test_two_vertex_unit_graph(self):
        vals = np.array([[0.0, 1.0], [1.0, 0.0]])
        adj = symmetric_normalize(SimilarityMatrix(vals))
        np.testing.assert_array_equal(adj.degrees, [1.0, 1.0])
        assert adj.values[0, 1] == 1.0

    def test_path_graph_hand_case(self):
        vals = np.zeros((3, 3))
        vals[0, 1] = vals[1, 0] = 1.0
        vals[1, 2] = vals[2, 1] = 1.0
        adj = symmetric_normalize(SimilarityMatrix(vals))
        np.testing.assert_array_equal(adj.degrees, [1.0, 2.0, 1.0])
        assert adj.values[0, 1] == pytest.approx(1 / np.sqrt(2), abs=1e-15)
        assert adj.values[1, 2] == pytest.approx(1 / np.sqrt(2), abs=1e-15)

    def test_all_zero_graph(self):
        adj = symmetric_normalize(SimilarityMatrix(np.zeros((3, 3))))
        assert np.all(adj.values == 0) and np.all(adj.degrees == 0)

    def test_spectral_radius_bound_property(self):
        rng = np.random.default_rng(4)
        for _ in range(60):
            adj = random_graph(rng, int(rng.integers(3, 12)))
            assert power_iteration_radius(adj.values) <= 1 + 1e-9


class TestPropagate:
    def test_kappa_zero_returns_input(self):
        rng = np.random.default_rng(5)
        adj = random_graph(rng, 6)
        V = rng.uniform(0, 1, (6, 3))
        out = propagate(V, adj, PropagationParams(k=3, kappa=0, alpha=0.7))
        np.testing.assert_array_equal(out, V)
        assert out is not V

    def test_two_vertex_swap(self):
        vals = np.array([[0.0, 1.0], [1.0, 0.0]])
        adj = symmetric_normalize(SimilarityMatrix(vals))
        V = np.eye(2)
        out = propagate(V, adj, PropagationParams(k=1, kappa=1, alpha=0.0))
        np.testing.assert_array_equal(out, np.array([[0.0, 1.0], [1.0, 0.0]]))

    def test_identity_limit_alpha_one_no_edges(self):
        adj = symmetric_normalize(SimilarityMatrix(np.zeros((4, 4))))
        V = np.random.default_rng(6).uniform(0, 1, (4, 3))
        out = propagate(V, adj, PropagationParams(k=1, kappa=3, alpha=1.0))
        np.testing.assert_array_equal(out, V)

    def test_matches_dense_power_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            m = int(rng.integers(3, 11))
            adj = random_graph(rng, m)
            V = rng.uniform(0, 2, (m, int(rng.integers(1, 7))))
            kappa = int(rng.integers(1, 6))
            alpha = float(rng.choice([0.0, 0.25, 0.5, 1.0]))
            got = propagate(V, adj, PropagationParams(k=2, kappa=kappa, alpha=alpha))
            want = dense_diffusion_oracle(adj.values, alpha, kappa, V)
            np.testing.assert_allclose(got, want, atol=1e-9)

    def test_shape_mismatch_rejected(self):
        adj = symmetric_normalize(SimilarityMatrix(np.zeros((3, 3))))
        with pytest.raises(ValidationError):
            propagate(np.ones((4, 2)), adj, PropagationParams())


class TestBuildEpisodeGraph:
    def test_composition_is_bit_exact(self):
        rng = np.random.default_rng(8)
        V = rng.uniform(0, 1, (16, 5))
        params = PropagationParams(k=10, kappa=3, alpha=0.5)
        sim, adj = build_episode_graph(V, params)
        expect_sim = knn_sparsify(cosine_similarity_matrix(V), 10)
        expect_adj = symmetric_normalize(expect_sim)
        np.testing.assert_array_equal(sim.values, expect_sim.values)
        np.testing.assert_array_equal(adj.values, expect_adj.values)

    def test_rows_keep_at_least_k_when_similarities_positive(self):
        rng = np.random.default_rng(9)
        V = rng.uniform(0.1, 1, (16, 5))  # strictly positive -> strictly positive sims
        sim, _ = build_episode_graph(V, PropagationParams(k=10, kappa=1, alpha=0.5))
        nonzeros = (sim.values > 0).sum(axis=1)
        assert np.all(nonzeros >= 10)

    def test_k_clamped_to_m_minus_one(self):
        rng = np.random.default_rng(10)
        V = rng.uniform(0, 1, (16, 5))
        big, _ = build_episode_graph(V, PropagationParams(k=100, kappa=1, alpha=0.5))
        clamped, _ = build_episode_graph(V, PropagationParams(k=15, kappa=1, alpha=0.5))
        np.testing.assert_array_equal(big.values, clamped.values)


class TestLaplacianEmbedding:
    def test_two_cliques_separated_by_sign(self):
        vals = np.zeros((8, 8))
        vals[:4, :4] = 0.8
        vals[4:, 4:] = 0.8
        np.fill_diagonal(vals, 0.0)
        adj = symmetric_normalize(SimilarityMatrix(vals))
        emb = laplacian_embedding(adj, dims=1)
        first = emb.coordinates[:, 0]
        assert np.all(np.sign(first[:4]) == np.sign(first[0]))
        assert np.all(np.sign(first[4:]) == -np.sign(first[0]))

    def test_eigenvalues_within_laplacian_range(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            adj = random_graph(rng, int(rng.integers(5, 10)))
            emb = laplacian_embedding(adj, dims=2)
            assert np.all(emb.eigenvalues >= -1e-9)
            assert np.all(emb.eigenvalues <= 2 + 1e-9)

    def test_matches_dense_eigensolver_oracle(self):
        rng = np.random.default_rng(12)
        checked = 0
        for _ in range(40):
            m = int(rng.integers(5, 9))
            adj = random_graph(rng, m)
            laplacian = np.eye(m) - adj.values
            eigvals, eigvecs = np.linalg.eigh(laplacian)
            dims = 2
            # only compare on instances where every matched eigenvalue is
            # simple: eigenvectors of clustered pairs are not identifiable
            gaps = np.diff(eigvals)
            if np.any(gaps[: dims + 1] < 5e-3):
                continue
            emb = laplacian_embedding(adj, dims=dims, tol=1e-9)
            checked += 1
            np.testing.assert_allclose(
                emb.eigenvalues, eigvals[1 : dims + 1], atol=1e-5
            )
            for col in range(dims):
                want = eigvecs[:, col + 1]
                got = emb.coordinates[:, col]
                agreement = min(
                    np.max(np.abs(got - want)), np.max(np.abs(got + want))
                )
                assert agreement <= 1e-5
        assert checked >= 10

    def test_unit_norm_and_sign_convention(self):
        rng = np.random.default_rng(13)
        adj = random_graph(rng, 8)
        emb = laplacian_embedding(adj, dims=3)
        for col in range(3):
            vec = emb.coordinates[:, col]
            assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-9)
            assert vec[np.argmax(np.abs(vec))] > 0

    def test_residuals_meet_tolerance(self):
        rng = np.random.default_rng(14)
        adj = random_graph(rng, 9)
        emb = laplacian_embedding(adj, dims=2)
        laplacian = np.eye(9) - adj.values
        for col in range(2):
            vec = emb.coordinates[:, col]
            resid = np.linalg.norm(laplacian @ vec - emb.eigenvalues[col] * vec)
            assert resid <= 1e-6 + 1e-12

    def test_budget_exhaustion_reports_residual(self):
        rng = np.random.default_rng(15)
        adj = random_graph(rng, 10)
        with pytest.raises(ConvergenceError) as info:
            laplacian_embedding(adj, dims=3, max_iters=2)
        assert info.value.residual is not None

    def test_dims_validation(self):
        rng = np.random.default_rng(16)
        adj = random_graph(rng, 4)
        with pytest.raises(ValidationError):
            laplacian_embedding(adj, dims=0)
        with pytest.raises(ValidationError):
            laplacian_embedding(adj, dims=4)


class TestPropagationParams:
    def test_ranges(self):
        with pytest.raises(ValidationError):
            PropagationParams(k=0)
        with pytest.raises(ValidationError):
            PropagationParams(kappa=-1)
        with pytest.raises(ValidationError):
            PropagationParams(alpha=1.5)
        PropagationParams(k=1, kappa=0, alpha=0.0)  # boundary values admitted
