import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcmm.errors import DcmmError, InvalidPerturbation, PackingStarved
from dcmm.lower_bounds import (
    VARIANTS,
    build_lfc,
    kl_divergence,
    lfc_report,
    perturbation_blocks,
    varshamov_gilbert,
)
from dcmm.profiles import sample_degrees

from _oracles import brute_force_kl


def _theta(n=400, norm=10.0, seed=1):
    return sample_degrees("uniform(0.3,5)", n, norm, seed)


class TestKl:
    def test_single_pair_value(self):
        a = np.array([[0, 0.5], [0.5, 0]])
        b = np.array([[0, 0.25], [0.25, 0]])
        assert kl_divergence(a, b) == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(0.5 / 0.75), abs=1e-15)
        assert kl_divergence(a, b) == pytest.approx(0.14384, abs=5e-6)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_brute_force(self, n):
        rng = np.random.default_rng(n)
        for _ in range(10):
            a = rng.uniform(0.01, 0.99, (n, n))
            b = rng.uniform(0.01, 0.99, (n, n))
            a, b = (a + a.T) / 2, (b + b.T) / 2
            assert kl_divergence(a, b) == pytest.approx(brute_force_kl(a, b), abs=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 12), st.integers(0, 2 ** 32))
    def test_zero_self_nonnegative(self, n, seed):
        rng = np.random.default_rng(seed)
        a = rng.uniform(0.01, 0.99, (n, n))
        b = rng.uniform(0.01, 0.99, (n, n))
        a, b = (a + a.T) / 2, (b + b.T) / 2
        assert kl_divergence(a, a) == 0.0
        assert kl_divergence(a, b) >= 0.0

    def test_support_mismatch_is_infinite(self):
        a = np.array([[0, 0.5], [0.5, 0]])
        assert kl_divergence(a, np.zeros((2, 2))) == math.inf

    def test_shape_mismatch(self):
        with pytest.raises(DcmmError):
            kl_divergence(np.zeros((2, 2)), np.zeros((3, 3)))


class TestPackingCode:
    @pytest.mark.parametrize("s,j", [(8, 2), (64, 16), (40, 9)])
    def test_distance(self, s, j):
        code = varshamov_gilbert(s, j, seed=3)
        assert code.words.shape == (j, s)
        assert not code.words[0].any()
        assert code.min_distance() >= s / 8
        assert code.J == j - 1

    def test_single_word(self):
        code = varshamov_gilbert(16, 1)
        assert code.J == 0 and code.min_distance() == 16

    def test_deterministic(self):
        np.testing.assert_array_equal(varshamov_gilbert(32, 8, 5).words, varshamov_gilbert(32, 8, 5).words)

    def test_starved(self):
        # distance >= 1 on {0,1}^8 caps the code at 256 words
        with pytest.raises(PackingStarved) as info:
            varshamov_gilbert(8, 300, seed=0)
        assert info.value.code.min_distance() >= 1

    def test_short_code(self):
        with pytest.raises(DcmmError):
            varshamov_gilbert(7, 2)

    def test_blocks_row_sums_zero(self):
        code = varshamov_gilbert(12, 4, 0)
        for g in perturbation_blocks(code, 30, 4, 6):
            np.testing.assert_array_equal(g.sum(axis=1), 0)
            np.testing.assert_array_equal(g[12:], 0)
            np.testing.assert_array_equal(g[:6], -g[6:12])


class TestEnsemble:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_variants_build(self, variant):
        ens = build_lfc(_theta(), 2, 0.5, variant=variant, seed=1)
        rep = lfc_report(ens)
        assert rep.members_valid and rep.J == 8
        assert rep.kl_ratio_defined and rep.kl_ratio > 0
        assert rep.min_pairwise_loss > 0

    def test_base_and_tail(self):
        ens = build_lfc(_theta(), 2, 0.5, seed=2)
        np.testing.assert_array_equal(ens.members[0], ens.pi_star)
        for mem in ens.members:
            np.testing.assert_array_equal(mem[ens.n0:], ens.pi_star[ens.n0:])
            np.testing.assert_allclose(mem.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(ens.pi_star[: ens.n0] == 0.5)

    def test_order_is_permutation(self):
        theta = _theta()
        ens = build_lfc(theta, 2, 0.5, seed=0)
        assert sorted(ens.order.tolist()) == list(range(theta.size))
        np.testing.assert_array_equal(ens.theta, theta[ens.order])

    def test_vanishing_c0(self):
        ens = build_lfc(_theta(), 2, 0.5, c0=1e-14, seed=0)
        for mem in ens.members:
            np.testing.assert_allclose(mem, ens.pi_star, atol=1e-12)

    def test_auto_halve_and_strict(self):
        theta = _theta()
        ens = build_lfc(theta, 2, 0.5, c0=50.0, seed=0)
        assert ens.c0_halvings > 0 and ens.c0 == 50.0 / 2 ** ens.c0_halvings
        with pytest.raises(InvalidPerturbation):
            build_lfc(theta, 2, 0.5, c0=50.0, seed=0, auto_halve=False)

    @pytest.mark.parametrize("j,J", [(1, 0), (2, 1)])
    def test_small_ensembles(self, j, J):
        rep = lfc_report(build_lfc(_theta(), 2, 0.5, j_target=j, seed=0))
        assert rep.J == J and not rep.kl_ratio_defined and math.isnan(rep.kl_ratio)
        assert math.isnan(rep.min_pairwise_loss) == (J == 0)

    def test_violated_reference(self):
        ens = build_lfc(_theta(), 2, 0.5, variant="unweighted_violated", seed=0)
        rep = lfc_report(ens)
        assert rep.reference_rate == ens.n0 / ens.theta.size

    def test_bad_inputs(self):
        with pytest.raises(DcmmError):
            build_lfc(_theta(), 2, 0.5, variant="nope")
        with pytest.raises(DcmmError):
            build_lfc(_theta(), 1, 0.5)
        with pytest.raises(DcmmError):
            build_lfc(_theta(), 2, 1.5)

    def test_kl_scales_with_c0_squared(self):
        theta = _theta()
        ratios = []
        for c0 in (0.2, 0.1, 0.05):
            rep = lfc_report(build_lfc(theta, 2, 0.5, c0=c0, seed=4))
            assert rep.c0_halvings == 0
            ratios.append(rep.kl_ratio / c0 ** 2)
        assert max(ratios) / min(ratios) < 1.1
