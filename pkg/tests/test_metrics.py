import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcmm.errors import DcmmError, KTooLargeForExhaustive
from dcmm.metrics import (
    UNWEIGHTED,
    WEIGHTED,
    LossSpec,
    align_permutation,
    assignment_cost,
    exhaustive_permutation,
    loglog_slope,
    loss,
    node_weights,
    nodewise_errors,
)

from _oracles import brute_force_alignment


def _pmfs(rng, n, K):
    return rng.dirichlet(np.ones(K), size=n)


class TestAlignment:
    def test_identity(self):
        pi = _pmfs(np.random.default_rng(0), 20, 3)
        res = loss(pi, pi)
        assert res.value == 0.0
        assert res.permutation.tolist() == [0, 1, 2]

    def test_swapped(self):
        pi = _pmfs(np.random.default_rng(1), 20, 2)
        res = loss(pi[:, ::-1], pi)
        assert res.value == 0.0
        assert res.permutation.tolist() == [1, 0]

    @pytest.mark.parametrize("K", [2, 3, 4, 5, 6])
    def test_hungarian_equals_enumeration(self, K):
        rng = np.random.default_rng(K)
        for _ in range(20):
            pi, pi_hat = _pmfs(rng, 30, K), _pmfs(rng, 30, K)
            theta = rng.uniform(0.1, 2, 30)
            for spec in (UNWEIGHTED, WEIGHTED):
                w = node_weights(theta, 30, spec.p)
                perm = align_permutation(pi_hat, pi, spec, theta)
                got = float(w @ np.abs(pi_hat[:, perm] - pi).sum(axis=1))
                assert got == brute_force_alignment(pi_hat, pi, w)

    def test_decomposition_identity(self):
        rng = np.random.default_rng(2)
        pi, pi_hat = _pmfs(rng, 25, 4), _pmfs(rng, 25, 4)
        w = rng.uniform(0.5, 2, 25)
        cost = assignment_cost(pi_hat, pi, w)
        for perm in itertools.permutations(range(4)):
            direct = w @ np.abs(pi_hat[:, list(perm)] - pi).sum(axis=1)
            assert direct == pytest.approx(sum(cost[perm[l], l] for l in range(4)), rel=1e-13)

    @pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
    def test_exhaustive_q(self, q):
        rng = np.random.default_rng(int(q * 10))
        pi, pi_hat = _pmfs(rng, 15, 4), _pmfs(rng, 15, 4)
        spec = LossSpec(0.0, q)
        perm = align_permutation(pi_hat, pi, spec)
        got = float((np.abs(pi_hat[:, perm] - pi) ** q).sum())
        assert got == pytest.approx(brute_force_alignment(pi_hat, pi, np.ones(15), q), rel=1e-14)
        np.testing.assert_array_equal(perm, exhaustive_permutation(pi_hat, pi, np.ones(15), q))

    def test_k_too_large(self):
        pi = np.full((3, 9), 1 / 9)
        with pytest.raises(KTooLargeForExhaustive):
            align_permutation(pi, pi, LossSpec(0, 2))
        assert loss(pi, pi).value == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(DcmmError):
            loss(np.ones((3, 2)) / 2, np.ones((4, 2)) / 2)


class TestLoss:
    def test_uniform_vs_pure(self):
        pi = np.repeat(np.eye(2), 5, axis=0)
        assert loss(np.full((10, 2), 0.5), pi).value == pytest.approx(1.0)

    def test_weighted_equals_unweighted_for_constant_theta(self):
        rng = np.random.default_rng(3)
        pi, pi_hat = _pmfs(rng, 40, 3), _pmfs(rng, 40, 3)
        assert loss(pi_hat, pi, np.full(40, 0.7), WEIGHTED).value == pytest.approx(loss(pi_hat, pi).value, rel=1e-14)

    def test_theta_required(self):
        pi = np.ones((2, 2)) / 2
        with pytest.raises(DcmmError):
            loss(pi, pi, None, WEIGHTED)

    def test_formula(self):
        rng = np.random.default_rng(4)
        pi, pi_hat = _pmfs(rng, 10, 2), _pmfs(rng, 10, 2)
        theta = rng.uniform(0.2, 3, 10)
        spec = LossSpec(0.5, 2.0)
        res = loss(pi_hat, pi, theta, spec)
        aligned = pi_hat[:, res.permutation]
        w = (theta / theta.mean()) ** 0.5
        ref = np.sqrt(np.mean(w * ((aligned - pi) ** 2).sum(axis=1)))
        assert res.value == pytest.approx(ref, rel=1e-13)

    @pytest.mark.parametrize("seed", range(20))
    def test_invariant_under_joint_column_permutation(self, seed):
        rng = np.random.default_rng(seed)
        K = int(rng.integers(2, 6))
        pi, pi_hat = _pmfs(rng, 30, K), _pmfs(rng, 30, K)
        theta = rng.uniform(0.1, 2, 30)
        sigma = rng.permutation(K)
        for spec in (UNWEIGHTED, WEIGHTED):
            a = loss(pi_hat, pi, theta, spec).value
            b = loss(pi_hat[:, sigma], pi[:, sigma], theta, spec).value
            assert a == pytest.approx(b, rel=1e-13)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 30), st.integers(2, 5), st.integers(0, 2 ** 32))
    def test_symmetric_and_bounded(self, n, K, seed):
        rng = np.random.default_rng(seed)
        pi, pi_hat = _pmfs(rng, n, K), _pmfs(rng, n, K)
        a = loss(pi_hat, pi).value
        assert 0 <= a <= 2
        assert a == pytest.approx(loss(pi, pi_hat).value, rel=1e-12, abs=1e-15)

    def test_bad_spec(self):
        with pytest.raises(DcmmError):
            LossSpec(-1, 1)
        with pytest.raises(DcmmError):
            LossSpec(0, 0.5)


class TestNodewise:
    def test_constant_theta(self):
        rng = np.random.default_rng(0)
        pi, pi_hat = _pmfs(rng, 12, 2), _pmfs(rng, 12, 2)
        nw = nodewise_errors(loss(pi_hat, pi), np.full(12, 0.4))
        assert np.all(nw.theta == 0.4) and nw.nodes.size == 12

    def test_cap(self):
        theta = np.array([1.0, 2.0, 3.0, 10.0])
        pi = np.repeat(np.eye(2), 2, axis=0)
        nw = nodewise_errors(loss(pi, pi), theta)
        assert nw.nodes.tolist() == [0, 1, 2]
        assert nodewise_errors(loss(pi, pi), theta, theta_cap=False).nodes.size == 4

    def test_zero_errors_excluded_from_fit(self):
        fit = loglog_slope([1.0, 2.0, 3.0, 4.0], [0.0, 0.5, 0.0, 0.25])
        assert fit.excluded_zero == 2 and fit.used == 2
        assert fit.slope == pytest.approx(-1.0)

    def test_all_zero_undefined(self):
        fit = loglog_slope([1.0, 2.0], [0.0, 0.0])
        assert not fit.defined

    def test_power_law(self):
        x = np.linspace(0.1, 3, 50)
        fit = loglog_slope(x, 2 * x ** -0.5)
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)
        assert fit.intercept == pytest.approx(np.log(2), abs=1e-12)
