"""Permutation-aligned membership losses and node-wise errors."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from dcmm.errors import DcmmError, KTooLargeForExhaustive

MAX_EXHAUSTIVE_K = 8


@dataclass(frozen=True)
class LossSpec:
    """``p`` is the degree-weight exponent, ``q`` the norm exponent."""

    p: float = 0.0
    q: float = 1.0

    def __post_init__(self):
        if self.p < 0 or self.q < 1:
            raise DcmmError("need p >= 0 and q >= 1")

    @property
    def name(self) -> str:
        return f"p{self.p:g}_q{self.q:g}"


UNWEIGHTED = LossSpec(0.0, 1.0)
WEIGHTED = LossSpec(0.5, 1.0)


@dataclass(frozen=True)
class AlignedLoss:
    value: float
    permutation: np.ndarray
    nodewise: np.ndarray


def node_weights(theta, n: int, p: float) -> np.ndarray:
    if p == 0:
        return np.ones(n)
    if theta is None:
        raise DcmmError("theta is required when p > 0")
    theta = np.asarray(theta, dtype=float)
    return (theta / theta.mean()) ** p


def assignment_cost(pi_hat, pi, weights) -> np.ndarray:
    """``C[k, l] = sum_i w_i |pi_hat[i, k] - pi[i, l]|``."""
    diff = np.abs(pi_hat[:, :, None] - pi[:, None, :])
    return np.einsum("i,ikl->kl", weights, diff)


def _objective(pi_hat, pi, weights, q, perm):
    # column l of the truth is matched with column perm[l] of the estimate
    err = (np.abs(pi_hat[:, perm] - pi) ** q).sum(axis=1)
    return float(weights @ err), err


def align_permutation(pi_hat, pi, spec: LossSpec = UNWEIGHTED, theta=None) -> np.ndarray:
    """Column permutation ``perm`` minimizing the loss of ``pi_hat[:, perm]`` against ``pi``.

    ``q == 1`` decomposes over columns and is solved exactly as an assignment
    problem; other ``q`` are searched exhaustively for ``K <= 8``.
    """
    pi_hat = np.asarray(pi_hat, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if pi_hat.shape != pi.shape:
        raise DcmmError(f"shape mismatch {pi_hat.shape} vs {pi.shape}")
    n, K = pi.shape
    w = node_weights(theta, n, spec.p)
    if spec.q == 1:
        cost = assignment_cost(pi_hat, pi, w)
        rows, cols = linear_sum_assignment(cost)
        perm = np.empty(K, dtype=int)
        perm[cols] = rows
        return perm
    if K > MAX_EXHAUSTIVE_K:
        raise KTooLargeForExhaustive(f"K={K} exceeds {MAX_EXHAUSTIVE_K} for q={spec.q:g}")
    return exhaustive_permutation(pi_hat, pi, w, spec.q)


def exhaustive_permutation(pi_hat, pi, weights, q: float = 1.0) -> np.ndarray:
    """Brute force over all ``K!`` permutations; ties go to the first in lexicographic order."""
    K = pi.shape[1]
    best, best_val = None, math.inf
    for perm in itertools.permutations(range(K)):
        val, _ = _objective(pi_hat, pi, weights, q, list(perm))
        if val < best_val:
            best, best_val = perm, val
    return np.array(best, dtype=int)


def loss(pi_hat, pi, theta=None, spec: LossSpec = UNWEIGHTED) -> AlignedLoss:
    """``(mean_i (theta_i / theta_bar)^p ||pi_hat_i - pi_i||_q^q)^(1/q)`` after alignment.

    ``nodewise`` holds the unweighted per-node ``||.||_q^q`` errors.
    """
    pi_hat = np.asarray(pi_hat, dtype=float)
    pi = np.asarray(pi, dtype=float)
    perm = align_permutation(pi_hat, pi, spec, theta)
    w = node_weights(theta, pi.shape[0], spec.p)
    total, err = _objective(pi_hat, pi, w, spec.q, perm)
    value = (total / pi.shape[0]) ** (1.0 / spec.q)
    return AlignedLoss(value, perm, err)


@dataclass(frozen=True)
class NodewiseErrors:
    theta: np.ndarray
    error: np.ndarray
    nodes: np.ndarray


def nodewise_errors(aligned: AlignedLoss, theta, theta_cap: bool = True) -> NodewiseErrors:
    """Per-node ``(theta_i, error_i)``, restricted to ``theta_i <= mean(theta)`` when capped."""
    theta = np.asarray(theta, dtype=float)
    nodes = np.arange(theta.size)
    if theta_cap:
        nodes = nodes[theta <= theta.mean()]
    return NodewiseErrors(theta[nodes], aligned.nodewise[nodes], nodes)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    used: int
    excluded_zero: int

    @property
    def defined(self) -> bool:
        return math.isfinite(self.slope)


def loglog_slope(x, y) -> SlopeFit:
    """Least-squares slope of ``log y`` on ``log x``; nonpositive ``y`` are excluded and counted."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (y > 0) & (x > 0)
    excluded = int(np.count_nonzero(~ok))
    if np.count_nonzero(ok) < 2 or np.ptp(np.log(x[ok])) == 0:
        return SlopeFit(math.nan, math.nan, int(np.count_nonzero(ok)), excluded)
    slope, intercept = np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)
    return SlopeFit(float(slope), float(intercept), int(np.count_nonzero(ok)), excluded)
