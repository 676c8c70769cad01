"""Least-favorable membership ensembles and the DCMM Kullback-Leibler divergence.

An ensemble shares ``theta`` and ``P* = beta I + (1 - beta) 11'`` and perturbs a
base membership matrix ``Pi*`` (``n0`` uniform rows followed by ``K`` pure
blocks) by block matrices built from a binary packing code.  Three scalings of
the perturbation are supported:

``weighted``
    ``Pi* + gamma_n Theta^{-1/2} Gamma``
``unweighted``
    ``Pi* + gamma_n Theta~^{-1/2} Gamma`` with ``theta~ = min(theta, mean(theta))``
``unweighted_violated``
    ``Pi* + (c0 / K) Gamma``

with ``gamma_n = c0 sqrt(K) / sqrt(n * mean(theta) * beta^2)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import rel_entr

from dcmm.errors import DcmmError, InfeasibleConfiguration, InvalidPerturbation, PackingStarved
from dcmm.metrics import UNWEIGHTED, WEIGHTED, loss
from dcmm.model import build_omega, check_theta, mixing_matrix
from dcmm.profiles import (
    EmpiricalCdf,
    RateInputs,
    baseline_rate,
    compute_G,
    delta_n,
    optimal_rate_integral,
)
from dcmm.rng import as_seed

VARIANTS = ("weighted", "unweighted", "unweighted_violated")
PMF_TOL = 1e-12


@dataclass(frozen=True)
class PackingCode:
    s: int
    words: np.ndarray

    @property
    def J(self) -> int:
        """Number of nonzero words."""
        return self.words.shape[0] - 1

    def min_distance(self) -> int:
        if self.words.shape[0] < 2:
            return self.s
        return int(min(np.count_nonzero(a != b) for a, b in itertools.combinations(self.words, 2)))


def varshamov_gilbert(s: int, j_target: int, seed=None) -> PackingCode:
    """Greedy random packing of ``{0, 1}^s`` with pairwise Hamming distance ``>= s/8``.

    ``j_target`` counts every word, the all-zero word included.  Sampling stops
    once ``j_target`` words are kept or after ``100 * j_target`` rejections, in
    which case :class:`PackingStarved` is raised with the partial code attached.
    """
    if s < 8:
        raise DcmmError(f"code length s={s} must be at least 8")
    if j_target < 1:
        raise DcmmError("j_target must be positive")
    rng = as_seed(seed).generator()
    words = [np.zeros(s, dtype=np.int8)]
    rejections = 0
    while len(words) < j_target:
        cand = rng.integers(0, 2, size=s, dtype=np.int8)
        kept = np.array(words)
        if np.all(np.count_nonzero(kept != cand, axis=1) >= s / 8):
            words.append(cand)
        else:
            rejections += 1
            if rejections >= 100 * j_target:
                code = PackingCode(s, np.array(words))
                raise PackingStarved(f"found {len(words)} of {j_target} words", code=code)
    return PackingCode(s, np.array(words))


def perturbation_blocks(code: PackingCode, n: int, K: int, m: int) -> list[np.ndarray]:
    """``Gamma`` matrices: ``[H, -H, 0]`` on rows ``0..m-1`` and ``[-H, H, 0]`` on rows ``m..2m-1``."""
    r = K // 2
    out = []
    for word in code.words:
        h = word.reshape(m, r).astype(float)
        g = np.zeros((n, K))
        g[:m, :r] = h
        g[:m, r:2 * r] = -h
        g[m:2 * m, :r] = -h
        g[m:2 * m, r:2 * r] = h
        out.append(g)
    return out


@dataclass(frozen=True)
class LfcEnsemble:
    variant: str
    theta: np.ndarray
    order: np.ndarray
    p_star: np.ndarray
    pi_star: np.ndarray
    members: list
    gamma_n: float
    c0: float
    c0_halvings: int
    n0: int
    err_n: float
    code: PackingCode
    notes: dict = field(default_factory=dict)

    @property
    def J(self) -> int:
        return len(self.members) - 1


def _round_robin_blocks(nodes_desc: np.ndarray, K: int) -> list[np.ndarray]:
    """Deal nodes (sorted by decreasing theta) to communities in turn."""
    return [nodes_desc[k::K] for k in range(K)]


def _provisional_err(theta, K, p_star, pure_count):
    """Baseline rate for a base matrix whose pure nodes are the ``pure_count`` largest theta."""
    n = theta.size
    order = np.argsort(-theta, kind="stable")
    pi = np.full((n, K), 1.0 / K)
    pure = order[:pure_count]
    for k, block in enumerate(_round_robin_blocks(pure, K)):
        pi[block] = 0.0
        pi[block, k] = 1.0
    return _err_for(theta, pi, p_star)


def _err_for(theta, pi, p_star):
    omega = build_omega(theta, pi, p_star, clip=True)
    s = delta_n(p_star, compute_G(theta, pi, omega))
    err = baseline_rate(RateInputs(theta.size, pi.shape[1], float(theta.mean()), s.delta, s.alpha, s.beta))
    return err, s


def _partition(theta, K, beta_n, variant, c_check, c_n):
    """Choose the perturbed set and the pure blocks; returns ``(m0, blocks, notes)``."""
    n = theta.size
    p_star = mixing_matrix(K, beta_n)
    eta = theta / theta.mean()
    desc = np.argsort(-theta, kind="stable")
    notes = {}
    if variant == "weighted":
        c = (1.0 + c_check) / 2.0
        n1 = int(math.floor(c * n / K))
        n0 = n - K * n1
        err, _ = _provisional_err(theta, K, p_star, K * n1)
        notes["F_n(err^2)"] = float(np.mean(eta <= err ** 2))
        if notes["F_n(err^2)"] > c_check:
            raise InfeasibleConfiguration(f"F_n(err_n^2) = {notes['F_n(err^2)']:.3f} exceeds {c_check}")
        top = desc[: int(math.floor((c - c_check) * n))]
        low = np.flatnonzero(eta < err ** 2)
        forced = np.union1d(top, low)
        if forced.size > K * n1:
            raise InfeasibleConfiguration("too many nodes forced into the pure blocks")
        rest = desc[~np.isin(desc, forced)]
        pure = np.union1d(forced, rest[: K * n1 - forced.size])
        m0 = np.setdiff1d(np.arange(n), pure)
    else:
        err, _ = _provisional_err(theta, K, p_star, n)
        eta_t = np.minimum(eta, 1.0)
        if variant == "unweighted":
            m0 = np.flatnonzero((eta_t >= err ** 2) & (eta_t < c_n))
        else:
            m0 = np.flatnonzero(eta <= err ** 2)
        pure = np.setdiff1d(np.arange(n), m0)
    notes["provisional_err_n"] = float(err)
    pure_desc = pure[np.argsort(-theta[pure], kind="stable")]
    return m0, _round_robin_blocks(pure_desc, K), notes


def build_lfc(theta, K: int, beta_n: float, c0: float = 0.1, j_target: int = 9, variant: str = "weighted",
              seed=None, c_check: float = 0.5, c_n: float = 1.0, auto_halve: bool = True,
              max_halvings: int = 30) -> LfcEnsemble:
    """Build a least-favorable ensemble of ``j_target`` membership matrices.

    Nodes are re-ordered: the perturbed set comes first (original index
    order), then the pure blocks.  ``order[i]`` is the original index of new
    node ``i`` and ``theta`` in the result is already re-ordered.

    Parameters
    ----------
    theta : (n,) array_like
        Degree parameters.
    K : int
        Number of communities, at least 2.
    beta_n : float
        Off-diagonal gap of ``P*``, in ``(0, 1]``.
    c0 : float
        Perturbation constant.  With ``auto_halve`` it is halved until every
        member is a valid membership matrix; otherwise an invalid member raises
        :class:`InvalidPerturbation`.
    j_target : int
        Ensemble size including the base member.
    variant : {"weighted", "unweighted", "unweighted_violated"}
    c_check : float
        Upper bound on ``F_n(err_n^2)`` required by the weighted variant.
    c_n : float
        Upper cut of the perturbed ``min(eta, 1)`` band for the unweighted variant.
    """
    theta = check_theta(theta)
    if variant not in VARIANTS:
        raise DcmmError(f"unknown variant {variant!r}")
    if K < 2 or not 0 < beta_n <= 1:
        raise DcmmError("need K >= 2 and 0 < beta_n <= 1")
    n = theta.size
    m0, blocks, notes = _partition(theta, K, beta_n, variant, c_check, c_n)
    order = np.concatenate([m0] + blocks)
    theta = theta[order]
    n0 = m0.size
    m = n0 // 2
    s = m * (K // 2)
    if s < 8:
        raise InfeasibleConfiguration(f"code length m*r = {s} is below 8 (n0={n0})")
    p_star = mixing_matrix(K, beta_n)
    pi_star = np.zeros((n, K))
    pi_star[:n0] = 1.0 / K
    start = n0
    for k, block in enumerate(blocks):
        pi_star[start:start + block.size, k] = 1.0
        start += block.size
    err_n, _ = _err_for(theta, pi_star, p_star)

    code = varshamov_gilbert(s, j_target, as_seed(seed).child("lfc-code"))
    gammas = perturbation_blocks(code, n, K, m)
    theta_bar = theta.mean()
    halvings = 0
    while True:
        gamma_n = c0 * math.sqrt(K) / math.sqrt(n * theta_bar * beta_n ** 2)
        if variant == "weighted":
            scale = gamma_n / np.sqrt(theta)
        elif variant == "unweighted":
            scale = gamma_n / np.sqrt(np.minimum(theta, theta_bar))
        else:
            scale = np.full(n, c0 / K)
        members = [pi_star + scale[:, None] * g for g in gammas]
        violation = max(max(-mem.min(), mem.max() - 1.0) for mem in members)
        if violation <= PMF_TOL:
            break
        if not auto_halve or halvings >= max_halvings:
            raise InvalidPerturbation(f"member rows leave the simplex by {violation:.3g}", max_violation=violation)
        c0 /= 2.0
        halvings += 1
    members = [np.clip(mem, 0.0, 1.0) for mem in members]
    return LfcEnsemble(variant, theta, order, p_star, pi_star, members, gamma_n, c0, halvings, n0,
                       err_n, code, notes)


def kl_divergence(omega_a, omega_b) -> float:
    """``KL(P_a || P_b)`` in nats between two edge-independent graph laws.

    Sums the Bernoulli divergence over unordered pairs ``i < j``.  A pair with
    ``omega_b = 0`` (or ``1``) where ``omega_a`` differs contributes ``inf``.
    """
    a = np.asarray(omega_a, dtype=float)
    b = np.asarray(omega_b, dtype=float)
    if a.shape != b.shape:
        raise DcmmError("shape mismatch")
    iu = np.triu_indices(a.shape[0], 1)
    p, q = a[iu], b[iu]
    return float(np.sum(rel_entr(p, q) + rel_entr(1.0 - p, 1.0 - q)))


@dataclass(frozen=True)
class LfcReport:
    variant: str
    J: int
    n0: int
    c0_used: float
    c0_halvings: int
    gamma_n: float
    err_n: float
    reference_rate: float
    min_pairwise_loss: float
    min_loss_ratio: float
    kl_sum: float
    kl_ratio: float
    kl_ratio_defined: bool
    min_beta_ratio: float
    perron_positive: bool
    members_valid: bool

    def lines(self) -> list[str]:
        return [f"{k} {v}" for k, v in self.__dict__.items()]


def lfc_report(ens: LfcEnsemble) -> LfcReport:
    """Measured pairwise separation, KL spread and regularity of an ensemble.

    The reference rate is ``err_n`` for the weighted variant, the optimal-rate
    integral for ``unweighted`` and ``n0 / n`` for ``unweighted_violated``.
    """
    theta = ens.theta
    n = theta.size
    spec = WEIGHTED if ens.variant == "weighted" else UNWEIGHTED
    if ens.variant == "weighted":
        ref = ens.err_n
    elif ens.variant == "unweighted":
        ref = optimal_rate_integral(EmpiricalCdf.from_theta(theta), ens.err_n)
    else:
        ref = ens.n0 / n
    pair_losses = [loss(a, b, theta, spec).value for a, b in itertools.combinations(ens.members, 2)]
    min_loss = min(pair_losses) if pair_losses else math.nan

    omegas = [build_omega(theta, mem, ens.p_star) for mem in ens.members]
    kl_sum = float(sum(kl_divergence(om, omegas[0]) for om in omegas[1:]))
    J = ens.J
    defined = J >= 2
    kl_ratio = kl_sum / (J * math.log(J)) if defined else math.nan

    betas, perron_ok = [], True
    for mem, om in zip(ens.members, omegas):
        s = delta_n(ens.p_star, compute_G(theta, mem, om))
        betas.append(s.beta)
        perron_ok &= s.conditions["perron_positive"]
    beta_n = 1.0 - ens.p_star[0, 1]
    valid = all(np.all(mem >= 0) and np.allclose(mem.sum(axis=1), 1.0, atol=PMF_TOL, rtol=0)
                for mem in ens.members)
    return LfcReport(ens.variant, J, ens.n0, ens.c0, ens.c0_halvings, ens.gamma_n, ens.err_n, ref, min_loss,
                     min_loss / ref if pair_losses else math.nan, kl_sum, kl_ratio, defined,
                     min(betas) / beta_n, bool(perron_ok), bool(valid))
