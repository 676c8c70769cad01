"""Regularized graph Laplacian and a dense top-``k`` symmetric eigensolver.

Two eigensolver backends share one selection and sign convention:

``"lapack"`` (default)
    LAPACK Householder tridiagonalization (``dsytrd``), MRRR on the
    tridiagonal for the ``k`` largest and ``k`` smallest eigenvalues only,
    then back-transformation of those vectors (``dormqr``).
``"householder"``
    The in-package numba kernels: Householder tridiagonalization with
    accumulated transforms and implicit-shift QL over the full spectrum.

Pairs are ordered by ``|lambda|`` descending, ties by signed value descending,
then by position in the ascending spectrum.  Each vector is flipped so its
largest-magnitude entry is positive; the leading vector is then flipped again
if needed so that its entries sum to a positive number.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.linalg.lapack import dormqr, dsytrd

from dcmm._tridiag import householder_tridiagonalize, implicit_ql
from dcmm.errors import ConvergenceFailure, DcmmError, EmptyGraph

SYMMETRY_TOL = 1e-10
SIGN_TIE_RTOL = 1e-12
METHODS = ("lapack", "householder")


def regularized_laplacian(a, tau: float = 1.0) -> np.ndarray:
    """``H^{-1/2} A H^{-1/2}`` with ``H = diag(d) + tau * mean(d) * I``.

    Parameters
    ----------
    a : (n, n) array_like
        Symmetric adjacency matrix.  A noiseless ``Omega`` may be passed
        instead; its diagonal then counts towards the degrees.
    tau : float
        Regularization weight, ``tau >= 0``.
    """
    if tau < 0:
        raise DcmmError("tau must be nonnegative")
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if n < 2:
        raise DcmmError("need at least two nodes")
    d = a.sum(axis=1)
    h = d + tau * d.mean()
    if np.any(h <= 0):
        raise EmptyGraph("normalizer has a zero entry; the graph has no edges where it needs them")
    s = 1.0 / np.sqrt(h)
    out = a * s[:, None] * s[None, :]
    # any diagonal is kept so that noiseless input (Omega) stays rank K
    return np.triu(out) + np.triu(out, 1).T


def population_laplacian(omega, tau: float = 1.0) -> np.ndarray:
    """``H0^{-1/2} Omega H0^{-1/2}`` with ``H0 = E[diag(d)] + tau * E[mean(d)] * I``.

    The diagonal of ``Omega`` is kept in the product, so the result has rank at
    most ``K``; it is excluded from the expected degrees.
    """
    omega = np.asarray(omega, dtype=float)
    d0 = omega.sum(axis=1) - np.diag(omega)
    h0 = d0 + tau * d0.mean()
    if np.any(h0 <= 0):
        raise EmptyGraph("expected degrees vanish")
    s = 1.0 / np.sqrt(h0)
    out = omega * s[:, None] * s[None, :]
    upper = np.triu(out)
    return upper + np.triu(out, 1).T


@dataclass(frozen=True)
class EigenPairs:
    """``k`` eigenpairs sorted by decreasing magnitude; ``vectors`` has them as columns."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def k(self) -> int:
        return self.values.size


def _check_symmetric(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DcmmError("matrix must be square")
    if not np.all(np.isfinite(m)):
        raise DcmmError("matrix has non-finite entries")
    scale = max(np.abs(m).max(initial=0.0), 1.0)
    if np.abs(m - m.T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise DcmmError("matrix is not symmetric")
    return (m + m.T) / 2


def _lapack_candidates(m: np.ndarray, k: int):
    """Ascending eigenvalues and vectors covering both ends of the spectrum."""
    n = m.shape[0]
    c, d, e, tau, info = dsytrd(m, lower=1, lwork=max(1, 64 * n))
    if info != 0:
        raise ConvergenceFailure(f"dsytrd failed with info={info}")
    if 2 * k >= n:
        ranges = [(0, n - 1)]
    else:
        ranges = [(0, k - 1), (n - k, n - 1)]
    vals, vecs = [], []
    for lo, hi in ranges:
        w, z = eigh_tridiagonal(d, e, select="i", select_range=(lo, hi), lapack_driver="stemr")
        vals.append(w)
        vecs.append(z)
    w = np.concatenate(vals)
    z = np.concatenate(vecs, axis=1)
    if n > 1:
        # reflectors live below the first subdiagonal; row 0 is untouched
        qz, _, info = dormqr("L", "N", c[1:, : n - 1], tau, z[1:], lwork=max(1, 64 * z.shape[1]))
        if info != 0:
            raise ConvergenceFailure(f"dormqr failed with info={info}")
        z = np.vstack([z[:1], qz])
    return w, z


def _householder_candidates(m: np.ndarray):
    n = m.shape[0]
    z = np.ascontiguousarray(m, dtype=np.float64).copy()
    d = np.zeros(n)
    e = np.zeros(n)
    householder_tridiagonalize(z, d, e)
    sweeps = implicit_ql(d, e, z, 50 * n)
    if sweeps < 0:
        raise ConvergenceFailure(f"implicit QL exceeded {50 * n} sweeps")
    order = np.argsort(d, kind="stable")
    return d[order], z[:, order]


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    vectors = vectors.copy()
    for j in range(vectors.shape[1]):
        v = vectors[:, j]
        mag = np.abs(v)
        top = mag.max()
        idx = int(np.flatnonzero(mag >= top * (1 - SIGN_TIE_RTOL))[0])
        if v[idx] < 0:
            vectors[:, j] = -v
    if vectors.shape[1]:
        total = vectors[:, 0].sum()
        if total < -SIGN_TIE_RTOL * np.abs(vectors[:, 0]).sum():
            vectors[:, 0] = -vectors[:, 0]
    return vectors


def top_k_eigen(m, k: int, method: str = "lapack") -> EigenPairs:
    """The ``k`` eigenpairs of symmetric ``m`` with largest ``|lambda|``."""
    m = _check_symmetric(m)
    n = m.shape[0]
    if not 1 <= k <= n:
        raise DcmmError(f"k={k} must be between 1 and n={n}")
    if method == "lapack":
        w, z = _lapack_candidates(m, k)
    elif method == "householder":
        w, z = _householder_candidates(m)
    else:
        raise DcmmError(f"unknown eigen method {method!r}")
    order = np.lexsort((np.arange(w.size), -w, -np.abs(w)))[:k]
    return EigenPairs(w[order].copy(), _fix_signs(z[:, order]))
