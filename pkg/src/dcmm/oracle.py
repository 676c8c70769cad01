"""Noiseless simplex geometry of the population Laplacian.

Given ``(theta, pi, p)`` the population Laplacian
``L0 = H0^{-1/2} Omega H0^{-1/2}`` has rank ``K``.  Its leading eigenvectors
satisfy ``Xi = H0^{-1/2} Theta Pi B`` with ``B = diag(b1) [1, V]``, so the
ratio rows ``r_i`` are convex combinations of the vertex rows ``v_k`` with
weights ``w_i = (pi_i * b1) / ||pi_i * b1||_1``.  This module computes that
geometry along two independent paths and checks it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from dcmm.errors import MissingPureNode
from dcmm.estimator import (
    MembershipEstimate,
    b1_from_vertices,
    barycentric,
    membership_from_embedding,
    score_from_eigen,
)
from dcmm.model import check_membership, check_theta, pure_node_indices
from dcmm.profiles import expected_degree_normalizer
from dcmm.spectral import EigenPairs, population_laplacian, top_k_eigen


@dataclass(frozen=True)
class PopulationGeometry:
    r: np.ndarray
    vertices: np.ndarray
    b1: np.ndarray
    w: np.ndarray
    eigen: EigenPairs
    vertex_nodes: np.ndarray
    vertices_from_b: np.ndarray
    b1_from_b: np.ndarray


def expected_adjacency(theta, pi, p) -> np.ndarray:
    """``Theta Pi P Pi' Theta`` without the Bernoulli range check."""
    tp = np.asarray(theta, dtype=float)[:, None] * np.asarray(pi, dtype=float)
    omega = tp @ np.asarray(p, dtype=float) @ tp.T
    return np.triu(omega) + np.triu(omega, 1).T


def population_pipeline(theta, pi, p, tau: float = 1.0, method: str = "lapack") -> PopulationGeometry:
    """Population ratio rows, simplex vertices, ``b1`` and barycentric weights.

    Raises
    ------
    MissingPureNode
        If some community has no pure node.
    """
    theta = check_theta(theta)
    pi = check_membership(pi)
    K = pi.shape[1]
    pure = pure_node_indices(pi)
    missing = [k for k, idx in enumerate(pure) if idx.size == 0]
    if missing:
        raise MissingPureNode(f"communities without a pure node: {missing}")
    omega = expected_adjacency(theta, pi, p)
    eigen = top_k_eigen(population_laplacian(omega, tau), K, method=method)
    emb = score_from_eigen(eigen)
    vertex_nodes = np.array([idx[0] for idx in pure])
    vertices = emb.r_hat[vertex_nodes]
    b1, _ = b1_from_vertices(eigen.values, vertices)

    # second path: solve Xi = H0^{-1/2} Theta Pi B for B
    h0 = expected_degree_normalizer(omega, tau)
    design = (theta / np.sqrt(h0))[:, None] * pi
    b, *_ = np.linalg.lstsq(design, eigen.vectors, rcond=None)
    b1_from_b = b[:, 0]
    vertices_from_b = b[:, 1:] / b1_from_b[:, None]

    weighted = pi * b1
    w = weighted / weighted.sum(axis=1, keepdims=True)
    return PopulationGeometry(emb.r_hat, vertices, b1, w, eigen, vertex_nodes, vertices_from_b, b1_from_b)


def hull_residual(points, vertices) -> np.ndarray:
    """Euclidean distance from each row of ``points`` to the convex hull of ``vertices``.

    Exact active-set search: for every nonempty vertex subset the affine
    least-squares fit is computed, and the best fit with nonnegative weights
    is kept.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    vertices = np.asarray(vertices, dtype=float)
    K = vertices.shape[0]
    best = np.full(points.shape[0], np.inf)
    for size in range(1, K + 1):
        for subset in itertools.combinations(range(K), size):
            vs = vertices[list(subset)]
            if size == 1:
                dist = np.linalg.norm(points - vs[0], axis=1)
                best = np.minimum(best, dist)
                continue
            # weights on vs[1:] relative to vs[0]; the first weight is one minus their sum
            basis = (vs[1:] - vs[0]).T
            coef, *_ = np.linalg.lstsq(basis, (points - vs[0]).T, rcond=None)
            weights = np.vstack([1.0 - coef.sum(axis=0), coef])
            feasible = np.all(weights >= -1e-12, axis=0)
            proj = vs[0] + (basis @ coef).T
            dist = np.linalg.norm(points - proj, axis=1)
            best = np.where(feasible, np.minimum(best, dist), best)
    return best


@dataclass(frozen=True)
class SimplexReport:
    max_vertex_deviation: float
    max_hull_residual: float
    max_membership_error: float
    max_weight_error: float
    b_path_vertex_gap: float
    b_path_b1_gap: float
    tol: float

    @property
    def ok(self) -> bool:
        return max(self.max_vertex_deviation, self.max_hull_residual, self.max_membership_error,
                   self.max_weight_error, self.b_path_vertex_gap, self.b_path_b1_gap) <= self.tol

    def lines(self) -> list[str]:
        return [
            f"max_vertex_deviation {self.max_vertex_deviation:.3e}",
            f"max_hull_residual {self.max_hull_residual:.3e}",
            f"max_membership_error {self.max_membership_error:.3e}",
            f"max_weight_error {self.max_weight_error:.3e}",
            f"b_path_vertex_gap {self.b_path_vertex_gap:.3e}",
            f"b_path_b1_gap {self.b_path_b1_gap:.3e}",
            f"tolerance {self.tol:.1e}",
            f"status {'PASS' if self.ok else 'FAIL'}",
        ]


def verify_simplex(geom: PopulationGeometry, pi, tol: float = 1e-6) -> SimplexReport:
    """Check vertex coincidence for pure nodes, hull membership for the rest and
    exact membership recovery from the barycentric weights."""
    pi = np.asarray(pi, dtype=float)
    K = pi.shape[1]
    dev = 0.0
    for k, idx in enumerate(pure_node_indices(pi)):
        if idx.size:
            dev = max(dev, float(np.linalg.norm(geom.r[idx] - geom.vertices[k], axis=1).max()))
    pure_mask = np.zeros(pi.shape[0], dtype=bool)
    for idx in pure_node_indices(pi):
        pure_mask[idx] = True
    mixed = ~pure_mask
    hull = float(hull_residual(geom.r[mixed], geom.vertices).max()) if mixed.any() else 0.0
    w = barycentric(geom.r, geom.vertices)
    star = w / geom.b1
    pi_rec = star / star.sum(axis=1, keepdims=True)
    mem_err = float(np.abs(pi_rec - pi).sum(axis=1).max())
    w_err = float(np.abs(w - geom.w).max())
    v_gap = float(np.abs(geom.vertices - geom.vertices_from_b).max()) if K > 1 else 0.0
    b1_gap = float(np.abs(geom.b1 - geom.b1_from_b).max())
    return SimplexReport(dev, hull, mem_err, w_err, v_gap, b1_gap, tol)


def closed_loop(geom: PopulationGeometry) -> MembershipEstimate:
    """Feed the exact population eigenpairs through the estimator, trimming off."""
    return membership_from_embedding(score_from_eigen(geom.eigen), trim=False)
