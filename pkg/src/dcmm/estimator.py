"""Mixed membership estimation by SCORE embedding, vertex hunting and
barycentric reconstruction.

The pipeline has four steps, each of which is also exposed on its own:

1. ``score_embedding``: top-``K`` eigenpairs of the pre-PCA normalized matrix
   (regularized Laplacian or the raw adjacency) and the entrywise ratio matrix
   ``R[i, k] = xi_{k+1}(i) / xi_1(i)``.
2. ``trim_sets``: low-degree nodes are excluded from estimation and from vertex
   hunting.
3. ``successive_projection``: greedy vertex hunting on the kept rows.
4. ``reconstruct_memberships``: barycentric coordinates, reweighted by ``b1``,
   clipped and renormalized.

Every :class:`DcmmError` raised inside :func:`mixed_score_laplacian` and
:func:`orthodox_mixed_score` carries the name of the failing step in ``.step``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from dcmm.errors import (
    DcmmError,
    EmptyGraph,
    IllConditionedSimplex,
    RankDeficient,
    VertexHuntingStarved,
)
from dcmm.spectral import EigenPairs, regularized_laplacian, top_k_eigen

DEGENERATE_RTOL = 1e-10
SPA_RESIDUAL_TOL = 1e-12
SPA_TIE_RTOL = 1e-12
CONDITION_LIMIT = 1e10
B1_FLOOR = 1e-8
PMF_TOL = 1e-12
ORACLE_TOL = 1e-6


class NodeFlag(enum.IntEnum):
    ESTIMATED = 0
    TRIMMED_UNIFORM = 1
    DEGENERATE_XI1 = 2
    ALL_CLIPPED = 3

    @property
    def label(self) -> str:
        return {0: "estimated", 1: "trimmed_uniform", 2: "degenerate_xi1", 3: "all_clipped"}[int(self)]


@dataclass(frozen=True)
class PrePcaMode:
    """Pre-PCA normalization: ``"laplacian"`` with weight ``tau`` or ``"identity"``."""

    kind: str = "laplacian"
    tau: float = 1.0

    def __post_init__(self):
        if self.kind not in ("laplacian", "identity"):
            raise DcmmError(f"unknown pre-PCA mode {self.kind!r}")
        if self.tau < 0:
            raise DcmmError("tau must be nonnegative")

    @classmethod
    def laplacian(cls, tau: float = 1.0) -> "PrePcaMode":
        return cls("laplacian", tau)

    @classmethod
    def identity(cls) -> "PrePcaMode":
        return cls("identity", 0.0)

    def normalize(self, a) -> np.ndarray:
        if self.kind == "laplacian":
            return regularized_laplacian(a, self.tau)
        a = np.asarray(a, dtype=float)
        if not np.any(a):
            raise EmptyGraph("graph has no edges")
        return a


@dataclass(frozen=True)
class ScoreEmbedding:
    eigen: EigenPairs
    r_hat: np.ndarray
    delta_hat: float
    degenerate: np.ndarray

    @property
    def K(self) -> int:
        return self.eigen.k


@dataclass(frozen=True)
class TrimSets:
    keep: np.ndarray
    vh: np.ndarray


@dataclass(frozen=True)
class SimplexEstimate:
    vertices: np.ndarray
    vertex_indices: np.ndarray
    b1_hat: np.ndarray | None = None
    b1_clamped: np.ndarray | None = None


@dataclass(frozen=True)
class MembershipEstimate:
    pi_hat: np.ndarray
    flags: np.ndarray
    embedding: ScoreEmbedding | None = None
    trims: TrimSets | None = None
    simplex: SimplexEstimate | None = None

    def flag_labels(self) -> list[str]:
        return [NodeFlag(f).label for f in self.flags]


def delta_hat_statistic(values, K: int) -> float:
    """``min(sqrt(K) * (lambda_1 - lambda_2), K * |lambda_K|)`` clamped at zero."""
    values = np.asarray(values, dtype=float)
    gap = math.sqrt(K) * (values[0] - values[1]) if K > 1 else math.inf
    stat = min(gap, K * abs(values[K - 1]))
    return max(float(stat), 0.0)


def score_from_eigen(eigen: EigenPairs) -> ScoreEmbedding:
    """Entrywise ratios of eigenvectors 2..K to the leading one."""
    xi = eigen.vectors
    K = eigen.k
    xi1 = xi[:, 0]
    degenerate = np.abs(xi1) < DEGENERATE_RTOL * np.abs(xi1).max()
    r = np.zeros((xi.shape[0], K - 1))
    ok = ~degenerate
    r[ok] = xi[ok, 1:] / xi1[ok, None]
    return ScoreEmbedding(eigen, r, delta_hat_statistic(eigen.values, K), degenerate)


def score_embedding(a, K: int, mode: PrePcaMode | None = None, method: str = "lapack") -> ScoreEmbedding:
    """Eigen-decompose the normalized matrix and build the ratio matrix ``R``."""
    if K < 2:
        raise DcmmError("K must be at least 2")
    mode = mode or PrePcaMode.laplacian()
    m = mode.normalize(a)
    return score_from_eigen(top_k_eigen(m, K, method=method))


def trim_sets(degrees, delta_hat: float, c: float, gamma: float, K: int, exclude=None) -> TrimSets:
    """``keep = {d_i delta^2 >= c K^3 log n}``, ``vh = keep & {d_i >= gamma * mean(d)}``.

    ``degrees`` may be a degree vector or an adjacency matrix.  ``exclude`` is
    an optional boolean mask of nodes removed from both sets.  An empty
    ``keep`` is allowed (every node is then reported as uniform); otherwise
    fewer than ``K`` vertex-hunting candidates raise
    :class:`VertexHuntingStarved`.
    """
    if c <= 0 or not 0 < gamma < 1:
        raise DcmmError("need c > 0 and 0 < gamma < 1")
    d = np.asarray(degrees, dtype=float)
    if d.ndim == 2:
        d = d.sum(axis=1)
    n = d.size
    threshold = c * K ** 3 * math.log(n)
    keep_mask = d * delta_hat ** 2 >= threshold
    if exclude is not None:
        keep_mask &= ~np.asarray(exclude, dtype=bool)
    vh_mask = keep_mask & (d >= gamma * d.mean())
    keep, vh = np.flatnonzero(keep_mask), np.flatnonzero(vh_mask)
    if keep.size and vh.size < K:
        raise VertexHuntingStarved(f"{vh.size} vertex-hunting candidates for K={K}")
    return TrimSets(keep, vh)


def all_nodes(n: int, exclude=None) -> TrimSets:
    """Trim sets with trimming disabled."""
    mask = np.ones(n, dtype=bool)
    if exclude is not None:
        mask &= ~np.asarray(exclude, dtype=bool)
    idx = np.flatnonzero(mask)
    return TrimSets(idx, idx)


def successive_projection(points, candidates, K: int) -> SimplexEstimate:
    """Greedy vertex hunting on affinely augmented rows ``(1, r_i)``.

    Each step picks the candidate whose residual, after projecting out the
    previously picked augmented rows, has the largest norm.  Near-ties (within
    a relative ``1e-12``) go to the lowest node index.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    cand = np.unique(np.asarray(candidates, dtype=int))
    if cand.size < K:
        raise VertexHuntingStarved(f"{cand.size} candidates for K={K}")
    if not np.all(np.isfinite(points[cand])):
        raise DcmmError("candidate points must be finite")
    y = np.column_stack([np.ones(cand.size), points[cand]])
    picks = []
    for _ in range(K):
        norms = np.sqrt(np.einsum("ij,ij->i", y, y))
        top = norms.max()
        if top < SPA_RESIDUAL_TOL:
            raise RankDeficient(f"residual {top:.3g} after {len(picks)} picks")
        j = int(np.flatnonzero(norms >= top * (1 - SPA_TIE_RTOL))[0])
        picks.append(j)
        u = y[j] / norms[j]
        y = y - np.outer(y @ u, u)
    idx = cand[picks]
    return SimplexEstimate(points[idx].copy(), idx)


def b1_from_vertices(values, vertices):
    """``(lambda_1 + v_k' diag(lambda_2..K) v_k)^{-1/2}`` with the argument floored."""
    values = np.asarray(values, dtype=float)
    arg = values[0] + np.einsum("kj,j,kj->k", vertices, values[1:], vertices)
    clamped = arg < B1_FLOOR
    return 1.0 / np.sqrt(np.maximum(arg, B1_FLOOR)), clamped


def barycentric(points, vertices) -> np.ndarray:
    """Solve ``sum_k w(k) v_k = r``, ``sum_k w(k) = 1`` for each row ``r``."""
    vertices = np.asarray(vertices, dtype=float)
    K = vertices.shape[0]
    system = np.vstack([np.ones(K), vertices.T])
    cond = np.linalg.cond(system)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise IllConditionedSimplex(f"vertex system condition number {cond:.3g}")
    rhs = np.vstack([np.ones(len(points)), np.asarray(points, dtype=float).T])
    return np.linalg.solve(system, rhs).T


def reconstruct_memberships(emb: ScoreEmbedding, simplex: SimplexEstimate, trims: TrimSets) -> MembershipEstimate:
    """Turn barycentric coordinates into memberships; trimmed nodes get ``1/K``."""
    n = emb.r_hat.shape[0]
    K = emb.K
    b1, clamped = b1_from_vertices(emb.eigen.values, simplex.vertices)
    pi_hat = np.full((n, K), 1.0 / K)
    flags = np.full(n, NodeFlag.TRIMMED_UNIFORM, dtype=np.int8)
    flags[emb.degenerate] = NodeFlag.DEGENERATE_XI1
    keep = np.asarray(trims.keep, dtype=int)
    if keep.size:
        w = barycentric(emb.r_hat[keep], simplex.vertices)
        star = np.maximum(w / b1, 0.0)
        sums = star.sum(axis=1)
        good = sums > 0
        pi_hat[keep[good]] = star[good] / sums[good, None]
        flags[keep[good]] = NodeFlag.ESTIMATED
        flags[keep[~good]] = NodeFlag.ALL_CLIPPED
    simplex = SimplexEstimate(simplex.vertices, simplex.vertex_indices, b1, clamped)
    return MembershipEstimate(pi_hat, flags, emb, trims, simplex)


def _step(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except DcmmError as exc:
        if exc.step is None:
            exc.step = name
        raise


def membership_from_embedding(emb: ScoreEmbedding, degrees=None, c: float = 0.1, gamma: float = 0.05,
                              trim: bool = True) -> MembershipEstimate:
    """Steps 2 to 4 on a ready embedding."""
    K = emb.K
    n = emb.r_hat.shape[0]
    if trim:
        trims = _step("trim", trim_sets, degrees, emb.delta_hat, c, gamma, K, exclude=emb.degenerate)
    else:
        trims = all_nodes(n, exclude=emb.degenerate)
    if trims.keep.size == 0:
        flags = np.full(n, NodeFlag.TRIMMED_UNIFORM, dtype=np.int8)
        flags[emb.degenerate] = NodeFlag.DEGENERATE_XI1
        return MembershipEstimate(np.full((n, K), 1.0 / K), flags, emb, trims, None)
    simplex = _step("vertex_hunting", successive_projection, emb.r_hat, trims.vh, K)
    return _step("reconstruct", reconstruct_memberships, emb, simplex, trims)


def _pipeline(a, K, mode, c, gamma, trim, method):
    a = np.asarray(a, dtype=float)
    emb = _step("embedding", score_embedding, a, K, mode, method)
    return membership_from_embedding(emb, a.sum(axis=1), c, gamma, trim)


def mixed_score_laplacian(a, K: int, c: float = 0.1, gamma: float = 0.05, tau: float = 1.0,
                          method: str = "lapack", trim: bool = True) -> MembershipEstimate:
    """Mixed-SCORE on the regularized Laplacian (MSL).

    Parameters
    ----------
    a : (n, n) array_like
        Adjacency matrix, or a noiseless expected adjacency.
    K : int
        Number of communities.
    c, gamma : float
        Trimming constants for the estimation and vertex-hunting sets.
    tau : float
        Laplacian regularization weight.
    method : {"lapack", "householder"}
        Eigensolver backend.
    trim : bool
        Set to False to estimate every node and hunt vertices among all of them.
    """
    return _pipeline(a, K, PrePcaMode.laplacian(tau), c, gamma, trim, method)


def orthodox_mixed_score(a, K: int, c: float = 0.1, gamma: float = 0.05, trim: bool = False,
                         method: str = "lapack") -> MembershipEstimate:
    """The same pipeline on the raw adjacency (OMS); trimming is off unless ``trim=True``."""
    return _pipeline(a, K, PrePcaMode.identity(), c, gamma, trim, method)
