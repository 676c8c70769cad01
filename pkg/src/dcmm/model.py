"""The degree-corrected mixed membership (DCMM) model.

Parameters are a triple ``(theta, pi, p)``: positive degree parameters, an
``n x K`` row-stochastic membership matrix and a symmetric ``K x K`` mixing
matrix with unit diagonal.  Edges are independent Bernoulli draws with
``P(A[i, j] = 1) = theta[i] * theta[j] * pi[i] @ p @ pi[j]`` for ``i < j``.

Arrays are plain :class:`numpy.ndarray`; validation helpers raise subclasses of
:class:`dcmm.errors.DcmmError`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from dcmm.errors import DcmmError, InvalidFraction, OmegaOutOfRange
from dcmm.rng import as_seed

PMF_TOL = 1e-12
SYMMETRY_TOL = 1e-12
SINGULAR_RTOL = 1e-10


def check_theta(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size == 0:
        raise DcmmError("theta must be a non-empty vector")
    if not np.all(np.isfinite(theta)) or np.any(theta <= 0):
        raise DcmmError("theta entries must be finite and strictly positive")
    return theta


def check_membership(pi, require_pure: bool = False, tol: float = PMF_TOL) -> np.ndarray:
    """Validate that every row of ``pi`` is a probability mass function."""
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 2:
        raise DcmmError("membership matrix must be 2-dimensional")
    if np.any(pi < -tol) or np.any(pi > 1 + tol):
        raise DcmmError("membership entries must lie in [0, 1]")
    sums = pi.sum(axis=1)
    if np.max(np.abs(sums - 1.0), initial=0.0) > tol:
        raise DcmmError("membership rows must sum to 1")
    if require_pure and not pure_nodes_present(pi):
        raise DcmmError("every community needs at least one pure node")
    return pi


def pure_nodes_present(pi) -> bool:
    return all(len(idx) > 0 for idx in pure_node_indices(pi))


def pure_node_indices(pi, tol: float = 1e-12) -> list[np.ndarray]:
    """Indices of the pure nodes of each community."""
    pi = np.asarray(pi, dtype=float)
    return [np.flatnonzero(pi[:, k] >= 1.0 - tol) for k in range(pi.shape[1])]


@dataclass(frozen=True)
class IdentifiabilityReport:
    ok: bool
    reasons: list[str] = field(default_factory=list)
    singular_values: np.ndarray | None = None

    def __bool__(self):
        return self.ok


def validate_identifiability(p) -> IdentifiabilityReport:
    """Check that ``p`` is symmetric, non-singular and has a unit diagonal.

    Never raises; failures are listed in ``reasons``.
    """
    reasons = []
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        return IdentifiabilityReport(False, ["mixing matrix is not square"])
    if not np.all(np.isfinite(p)):
        return IdentifiabilityReport(False, ["mixing matrix has non-finite entries"])
    if np.max(np.abs(p - p.T), initial=0.0) > SYMMETRY_TOL:
        reasons.append("mixing matrix is not symmetric")
    if np.any(p < 0):
        reasons.append("mixing matrix has negative entries")
    if np.max(np.abs(np.diag(p) - 1.0)) > PMF_TOL:
        reasons.append("mixing matrix diagonal is not all ones")
    sv = np.linalg.svd(p, compute_uv=False)
    if sv[-1] <= SINGULAR_RTOL * sv[0]:
        reasons.append(f"mixing matrix is singular (smallest/largest singular value {sv[-1] / sv[0]:.3g})")
    return IdentifiabilityReport(not reasons, reasons, sv)


def mixing_matrix(K: int, beta: float) -> np.ndarray:
    """``beta * I + (1 - beta) * 11'``, the mixing matrix used in the simulations."""
    return beta * np.eye(K) + (1.0 - beta) * np.ones((K, K))


def build_omega(theta, pi, p, clip: bool = False) -> np.ndarray:
    """Expected adjacency ``Omega = Theta Pi P Pi' Theta``.

    Only off-diagonal entries are range checked; the diagonal is kept because
    the population Laplacian uses it, but it is never sampled.  With
    ``clip=True`` entries above one are truncated instead of raising
    :class:`OmegaOutOfRange`.
    """
    theta = check_theta(theta)
    pi = check_membership(pi)
    p = np.asarray(p, dtype=float)
    n, K = pi.shape
    if theta.shape[0] != n or p.shape != (K, K):
        raise DcmmError(f"dimension mismatch: theta {theta.shape}, pi {pi.shape}, p {p.shape}")
    report = validate_identifiability(p)
    if not report.ok:
        raise DcmmError("; ".join(report.reasons))
    tp = theta[:, None] * pi
    omega = tp @ p @ tp.T
    omega = np.triu(omega) + np.triu(omega, 1).T
    off = omega[~np.eye(n, dtype=bool)]
    top = off.max(initial=0.0)
    if top > 1.0:
        if not clip:
            raise OmegaOutOfRange(f"off-diagonal Omega entry {top:.6g} exceeds 1")
        omega = np.minimum(omega, 1.0)
    return omega


def clipped_entries(theta, pi, p) -> int:
    """Number of unordered pairs whose expected edge probability exceeds one."""
    tp = np.asarray(theta, dtype=float)[:, None] * np.asarray(pi, dtype=float)
    omega = tp @ np.asarray(p, dtype=float) @ tp.T
    return int(np.count_nonzero(np.triu(omega, 1) > 1.0))


def sample_adjacency(omega, seed=None) -> np.ndarray:
    """Draw a symmetric 0/1 adjacency matrix with zero diagonal."""
    omega = np.asarray(omega, dtype=float)
    n = omega.shape[0]
    rng = as_seed(seed).generator()
    iu = np.triu_indices(n, 1)
    probs = omega[iu]
    if np.any(probs < 0) or np.any(probs > 1):
        raise OmegaOutOfRange("edge probabilities must lie in [0, 1]")
    hits = rng.random(probs.size) < probs
    a = np.zeros((n, n))
    a[iu] = hits
    return a + a.T


def check_adjacency(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DcmmError("adjacency must be square")
    if not np.array_equal(a, a.T):
        raise DcmmError("adjacency must be symmetric")
    if np.any(np.diag(a) != 0):
        raise DcmmError("adjacency must have a zero diagonal")
    if not np.all((a == 0) | (a == 1)):
        raise DcmmError("adjacency entries must be 0 or 1")
    return a


def generate_membership(n: int, K: int, pure_frac: float = 0.15, seed=None) -> np.ndarray:
    """Membership matrix with ``floor(pure_frac * n)`` leading pure nodes per community.

    The pure blocks come first, in community order.  Remaining rows are
    ``(t, 1 - t)`` with ``t ~ Uniform(0, 1)`` when ``K == 2`` and symmetric
    Dirichlet(1) draws otherwise.  The last coordinate of each mixed row is
    one minus the others so rows sum to one.
    """
    if n < 1 or K < 1:
        raise DcmmError("n and K must be positive")
    if pure_frac < 0 or K * pure_frac > 1:
        raise InvalidFraction(f"K * pure_frac = {K * pure_frac:g} exceeds 1")
    n_pure = int(np.floor(pure_frac * n))
    if K * n_pure > n:
        raise InvalidFraction("pure blocks exceed n")
    rng = as_seed(seed).generator()
    pi = np.zeros((n, K))
    for k in range(K):
        pi[k * n_pure:(k + 1) * n_pure, k] = 1.0
    n_mixed = n - K * n_pure
    if n_mixed:
        if K == 1:
            mixed = np.ones((n_mixed, 1))
        elif K == 2:
            t = rng.random(n_mixed)
            mixed = np.column_stack([t, 1.0 - t])
        else:
            mixed = rng.dirichlet(np.ones(K), size=n_mixed)
            mixed[:, -1] = 1.0 - mixed[:, :-1].sum(axis=1)
            mixed = np.maximum(mixed, 0.0)
        pi[K * n_pure:] = mixed
    return pi


@dataclass(frozen=True)
class DcmmParams:
    """Ground-truth triple plus the derived expected adjacency."""

    theta: np.ndarray
    pi: np.ndarray
    p: np.ndarray

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @property
    def K(self) -> int:
        return self.pi.shape[1]

    @property
    def theta_bar(self) -> float:
        return float(self.theta.mean())

    @cached_property
    def omega(self) -> np.ndarray:
        return build_omega(self.theta, self.pi, self.p)

    def sample(self, seed=None) -> np.ndarray:
        return sample_adjacency(self.omega, seed)
