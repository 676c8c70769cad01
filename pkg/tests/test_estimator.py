import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcmm.errors import DcmmError, EmptyGraph, IllConditionedSimplex, RankDeficient, VertexHuntingStarved
from dcmm.estimator import (
    B1_FLOOR,
    NodeFlag,
    PrePcaMode,
    ScoreEmbedding,
    SimplexEstimate,
    all_nodes,
    b1_from_vertices,
    barycentric,
    delta_hat_statistic,
    membership_from_embedding,
    mixed_score_laplacian,
    orthodox_mixed_score,
    reconstruct_memberships,
    score_embedding,
    score_from_eigen,
    successive_projection,
    trim_sets,
)
from dcmm.metrics import loss
from dcmm.model import build_omega, mixing_matrix, sample_adjacency
from dcmm.oracle import population_pipeline
from dcmm.rng import RandomSeed
from dcmm.spectral import EigenPairs

from _oracles import max_volume_subset, random_dcmm


def _planted(n=400, t=0.5, beta=0.5, seed=0):
    pi = np.repeat(np.eye(2), n // 2, axis=0)
    theta = np.full(n, t)
    omega = build_omega(theta, pi, mixing_matrix(2, beta))
    return theta, pi, omega, sample_adjacency(omega, seed)


def _assert_pmf_rows(pi_hat):
    assert np.all(pi_hat >= 0)
    np.testing.assert_allclose(pi_hat.sum(axis=1), 1.0, atol=1e-12, rtol=0)


class TestDeltaHat:
    def test_formula(self):
        assert delta_hat_statistic([1.0, 0.4], 2) == pytest.approx(min(math.sqrt(2) * 0.6, 0.8))
        assert delta_hat_statistic([1.0, 0.9, -0.05], 3) == pytest.approx(0.15)

    def test_clamped(self):
        assert delta_hat_statistic([0.5, 0.7], 2) == 0.0


class TestScoreEmbedding:
    def test_planted_clusters_match_population(self):
        theta, pi, omega, a = _planted()
        emb = score_embedding(a, 2)
        assert emb.r_hat.shape == (400, 1)
        pop = population_pipeline(theta, pi, mixing_matrix(2, 0.5))
        # the second eigenvector's sign is arbitrary, so compare the sorted cluster centres
        centres = sorted(np.median(emb.r_hat[block, 0]) for block in (slice(0, 200), slice(200, 400)))
        np.testing.assert_allclose(centres, np.sort(pop.vertices[:, 0]), atol=0.1)

    def test_identity_mode_rescales(self):
        _, _, _, a = _planted()
        lap = score_embedding(a, 2)
        ident = score_embedding(a, 2, PrePcaMode.identity())
        assert ident.r_hat.shape == lap.r_hat.shape
        assert not np.allclose(ident.eigen.values, lap.eigen.values)
        # leading eigenvalue of A is on the degree scale, of L below one
        assert ident.eigen.values[0] > 10 * lap.eigen.values[0]

    def test_isolated_node_degenerate(self):
        _, _, _, a = _planted(n=100)
        a[7, :] = 0
        a[:, 7] = 0
        emb = score_embedding(a, 2)
        assert emb.degenerate[7] and emb.degenerate.sum() == 1
        assert np.all(emb.r_hat[7] == 0)
        est = membership_from_embedding(emb, a.sum(axis=1))
        assert est.flags[7] == NodeFlag.DEGENERATE_XI1
        np.testing.assert_array_equal(est.pi_hat[7], [0.5, 0.5])

    def test_empty(self):
        with pytest.raises(EmptyGraph):
            score_embedding(np.zeros((4, 4)), 2)
        with pytest.raises(EmptyGraph):
            score_embedding(np.zeros((4, 4)), 2, PrePcaMode.identity())

    def test_k_one_rejected(self):
        with pytest.raises(DcmmError):
            score_embedding(np.ones((3, 3)) - np.eye(3), 1)

    def test_mode_validation(self):
        with pytest.raises(DcmmError):
            PrePcaMode("spectral")
        with pytest.raises(DcmmError):
            PrePcaMode.laplacian(-0.5)


class TestTrimSets:
    def test_worked_example(self):
        d = np.array([50.0, 1.0, 20.0])
        # threshold 0.1 * 8 * log 3 = 0.879; mean degree 23.67
        ts = trim_sets(d, 1.0, 0.1, 0.5, 2)
        assert ts.keep.tolist() == [0, 1, 2]
        assert ts.vh.tolist() == [0, 2]

    def test_starved(self):
        with pytest.raises(VertexHuntingStarved):
            trim_sets(np.array([50.0, 1.0, 20.0]), 1.0, 0.1, 0.9, 2)

    def test_zero_delta_all_uniform(self):
        d = np.array([5.0, 6.0, 7.0, 8.0])
        assert trim_sets(d, 0.0, 0.1, 0.05, 2).keep.size == 0
        eig = EigenPairs(np.array([0.5, 0.5]), np.linalg.qr(np.random.default_rng(0).normal(size=(4, 2)))[0])
        emb = score_from_eigen(eig)
        assert emb.delta_hat == 0.0
        est = membership_from_embedding(emb, d)
        np.testing.assert_array_equal(est.pi_hat, np.full((4, 2), 0.5))
        assert np.all(est.flags == NodeFlag.TRIMMED_UNIFORM)

    def test_defaults_accepted(self):
        ts = trim_sets(np.full(10, 100.0), 1.0, 0.1, 0.05, 2)
        assert ts.keep.size == 10 and ts.vh.size == 10

    def test_adjacency_input_and_exclusion(self):
        a = np.ones((6, 6)) - np.eye(6)
        ts = trim_sets(a, 2.0, 0.1, 0.05, 2, exclude=np.array([1, 0, 0, 0, 0, 0], dtype=bool))
        assert ts.keep.tolist() == [1, 2, 3, 4, 5]

    @pytest.mark.parametrize("c,gamma", [(0.0, 0.05), (0.1, 0.0), (0.1, 1.0)])
    def test_bad_constants(self, c, gamma):
        with pytest.raises(DcmmError):
            trim_sets(np.ones(3), 1.0, c, gamma, 2)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(0.0, 100.0), min_size=3, max_size=30), st.floats(0.0, 2.0))
    def test_exact_inequalities(self, degrees, delta):
        d = np.array(degrees)
        try:
            ts = trim_sets(d, delta, 0.1, 0.3, 2)
        except VertexHuntingStarved:
            return
        thr = 0.1 * 8 * math.log(d.size)
        assert set(ts.keep) == {i for i in range(d.size) if d[i] * delta ** 2 >= thr}
        assert set(ts.vh) == {i for i in ts.keep if d[i] >= 0.3 * d.mean()}


class TestSuccessiveProjection:
    def test_tie_to_lowest(self):
        sx = successive_projection(np.array([1.0, -1.0, 0.0]), [0, 1, 2], 2)
        assert sx.vertex_indices.tolist() == [0, 1]
        assert max_volume_subset(np.array([1.0, -1.0, 0.0]), 2) == {0, 1}

    @pytest.mark.parametrize("seed", range(15))
    def test_recovers_simplex(self, seed):
        rng = np.random.default_rng(seed)
        K = int(rng.integers(2, 5))
        verts = rng.normal(size=(K, K - 1)) * 3
        w = rng.dirichlet(np.ones(K), size=20)
        pts = np.vstack([w @ verts, verts])
        order = rng.permutation(len(pts))
        pts = pts[order]
        truth = {int(np.flatnonzero(order == 20 + k)[0]) for k in range(K)}
        sx = successive_projection(pts, np.arange(len(pts)), K)
        assert set(sx.vertex_indices.tolist()) == truth

    @pytest.mark.parametrize("seed", range(15))
    def test_agrees_with_volume_oracle_on_small_sets(self, seed):
        rng = np.random.default_rng(100 + seed)
        K = int(rng.integers(2, 4))
        verts = np.eye(K)[:, 1:] * 2 - 0.5 + rng.normal(scale=0.05, size=(K, K - 1))
        pts = np.vstack([verts, rng.dirichlet(np.ones(K), size=6) @ verts])
        sx = successive_projection(pts, np.arange(len(pts)), K)
        assert set(sx.vertex_indices.tolist()) == max_volume_subset(pts, K)

    def test_exactly_k_candidates(self):
        pts = np.array([[0.0], [5.0], [1.0], [-2.0]])
        sx = successive_projection(pts, [2, 3], 2)
        assert sorted(sx.vertex_indices.tolist()) == [2, 3]
        np.testing.assert_array_equal(sx.vertices, pts[sx.vertex_indices])

    def test_candidate_order_invariant(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(30, 2))
        cand = np.arange(0, 30, 2)
        a = successive_projection(pts, cand, 3).vertex_indices
        b = successive_projection(pts, rng.permutation(cand), 3).vertex_indices
        np.testing.assert_array_equal(a, b)

    def test_rank_deficient(self):
        with pytest.raises(RankDeficient):
            successive_projection(np.zeros((4, 1)) + 0.3, [0, 1, 2, 3], 2)

    def test_too_few(self):
        with pytest.raises(VertexHuntingStarved):
            successive_projection(np.zeros((4, 1)), [1], 2)


class TestReconstruction:
    def _embedding(self, r, values):
        n, km1 = r.shape
        vecs = np.zeros((n, km1 + 1))
        return ScoreEmbedding(EigenPairs(np.asarray(values, float), vecs), r, 1.0, np.zeros(n, dtype=bool))

    def test_vertex_and_barycenter(self):
        verts = np.array([[-1.0], [1.0]])
        r = np.array([[-1.0], [1.0], [0.0]])
        # lambda_2 = 0 gives equal b1 entries
        emb = self._embedding(r, [1.0, 0.0])
        est = reconstruct_memberships(emb, SimplexEstimate(verts, np.array([0, 1])), all_nodes(3))
        np.testing.assert_allclose(est.pi_hat, [[1, 0], [0, 1], [0.5, 0.5]], atol=1e-15)
        assert np.all(est.flags == NodeFlag.ESTIMATED)

    def test_vertex_nodes_are_basis(self):
        rng = np.random.default_rng(0)
        K = 4
        verts = rng.normal(size=(K, K - 1))
        r = np.vstack([verts, rng.dirichlet(np.ones(K), 10) @ verts])
        emb = self._embedding(r, [1.0, 0.3, -0.2, 0.1])
        est = reconstruct_memberships(emb, SimplexEstimate(verts, np.arange(K)), all_nodes(len(r)))
        np.testing.assert_allclose(est.pi_hat[:K], np.eye(K), atol=1e-12)
        _assert_pmf_rows(est.pi_hat)

    def test_clipped_negative_weights(self):
        verts = np.array([[-1.0], [1.0]])
        emb = self._embedding(np.array([[3.0]]), [1.0, 0.0])
        est = reconstruct_memberships(emb, SimplexEstimate(verts, np.array([0, 0])), all_nodes(1))
        np.testing.assert_allclose(est.pi_hat, [[0.0, 1.0]])

    def test_ill_conditioned(self):
        with pytest.raises(IllConditionedSimplex):
            barycentric(np.zeros((2, 1)), np.array([[0.5], [0.5]]))

    def test_b1_floor(self):
        b1, clamped = b1_from_vertices([0.1, -1.0], np.array([[0.1], [2.0]]))
        assert clamped.tolist() == [False, True]
        assert b1[1] == pytest.approx(B1_FLOOR ** -0.5)
        assert b1[0] == pytest.approx((0.1 - 0.01) ** -0.5)


class TestPipeline:
    @pytest.mark.parametrize("seed", range(5))
    def test_planted_sbm_small_loss(self, seed):
        # near-separated blocks; the default c trims everything here, see test below
        theta, pi, omega, a = _planted(n=800, t=1.0, beta=0.97, seed=RandomSeed(seed))
        est = mixed_score_laplacian(a, 2, c=0.01)
        assert loss(est.pi_hat, pi).value < 0.05

    def test_default_c_trim_cascade(self):
        _, pi, _, a = _planted(n=800, t=1.0, beta=0.97, seed=RandomSeed(0))
        est = mixed_score_laplacian(a, 2)
        assert np.all(est.flags == NodeFlag.TRIMMED_UNIFORM)
        assert loss(est.pi_hat, pi).value == pytest.approx(1.0)

    @pytest.mark.parametrize("K", [2, 3])
    def test_population_input_exact(self, K):
        theta, pi, p = random_dcmm(np.random.default_rng(K), 200, K)
        est = mixed_score_laplacian(build_omega(theta, pi, p), K, trim=False)
        assert loss(est.pi_hat, pi).nodewise.max() <= 1e-6

    def test_oms_constant_theta_population(self):
        theta = np.full(120, 0.4)
        _, pi, p = random_dcmm(np.random.default_rng(1), 120, 3)
        est = orthodox_mixed_score(build_omega(theta, pi, p), 3)
        assert loss(est.pi_hat, pi).nodewise.max() <= 1e-6

    def test_rows_are_pmfs_and_label_covariant(self):
        rng = np.random.default_rng(4)
        theta, pi, p = random_dcmm(rng, 300, 3, beta=0.7)
        a = sample_adjacency(build_omega(theta, pi, p), 4)
        est = mixed_score_laplacian(a, 3)
        _assert_pmf_rows(est.pi_hat)
        sigma = rng.permutation(300)
        est2 = mixed_score_laplacian(a[np.ix_(sigma, sigma)], 3)
        np.testing.assert_allclose(est2.pi_hat, est.pi_hat[sigma], atol=1e-8)

    def test_failure_carries_step(self):
        with pytest.raises(EmptyGraph) as info:
            mixed_score_laplacian(np.zeros((5, 5)), 2)
        assert info.value.step == "embedding"

    def test_deterministic(self):
        _, _, _, a = _planted(seed=3)
        np.testing.assert_array_equal(mixed_score_laplacian(a, 2).pi_hat, mixed_score_laplacian(a, 2).pi_hat)

    def test_backends_agree(self):
        _, _, _, a = _planted(n=150, seed=1)
        x = mixed_score_laplacian(a, 2, method="lapack").pi_hat
        y = mixed_score_laplacian(a, 2, method="householder").pi_hat
        np.testing.assert_allclose(x, y, atol=1e-8)
