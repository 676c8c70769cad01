"""Degree-parameter profiles, the empirical CDF of ``theta / mean(theta)`` and
the rate calculators built on it.

Profiles are written as short strings, case-insensitive::

    uniform(0.3, 5)
    pareto(10, 0.3)          # scale, shape; inverse CDF scale * U**(-1/shape)
    gamma(0.25, 1)           # shape, rate
    mixture(0.5, 1, 0.5, 3)  # weight, atom pairs
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from dcmm.errors import DegenerateDraw, InvalidProfile, SingularPG
from dcmm.model import build_omega, check_membership, check_theta
from dcmm.rng import as_seed

SINGULAR_PG_TOL = 1e-12

_PROFILE_RE = re.compile(r"^\s*([a-z]+)\s*\((.*)\)\s*$")


@dataclass(frozen=True)
class DegreeProfile:
    """A distribution for the unnormalized degree parameters ``theta0``."""

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        kind = self.kind.lower()
        params = tuple(float(x) for x in self.params)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", params)
        if not all(math.isfinite(x) for x in params):
            raise InvalidProfile(f"non-finite parameter in {self}")
        if kind == "uniform":
            a, b = self._expect(2)
            if not 0 < a < b:
                raise InvalidProfile("uniform(a, b) needs 0 < a < b")
        elif kind == "pareto":
            scale, shape = self._expect(2)
            if scale <= 0 or shape <= 0:
                raise InvalidProfile("pareto(scale, shape) needs positive parameters")
        elif kind == "gamma":
            shape, rate = self._expect(2)
            if shape <= 0 or rate <= 0:
                raise InvalidProfile("gamma(shape, rate) needs positive parameters")
        elif kind == "mixture":
            if not params or len(params) % 2:
                raise InvalidProfile("mixture needs (weight, atom) pairs")
            w, x = self.weights, self.atoms
            if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
                raise InvalidProfile("mixture weights must be positive and sum to 1")
            if np.any(x <= 0):
                raise InvalidProfile("mixture atoms must be positive")
        else:
            raise InvalidProfile(f"unknown degree profile kind {self.kind!r}")

    def _expect(self, count):
        if len(self.params) != count:
            raise InvalidProfile(f"{self.kind} takes {count} parameters, got {len(self.params)}")
        return self.params

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.params[0::2])

    @property
    def atoms(self) -> np.ndarray:
        return np.asarray(self.params[1::2])

    @classmethod
    def parse(cls, text: str) -> "DegreeProfile":
        m = _PROFILE_RE.match(text.strip().lower())
        if m is None:
            raise InvalidProfile(f"cannot parse degree profile {text!r}")
        kind, body = m.groups()
        try:
            params = tuple(float(tok) for tok in body.split(",") if tok.strip())
        except ValueError as exc:
            raise InvalidProfile(f"bad number in {text!r}") from exc
        return cls(kind, params)

    def __str__(self):
        return f"{self.kind}({','.join(f'{x:g}' for x in self.params)})"

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Raw ``theta0`` draws, before normalization."""
        if self.kind == "uniform":
            a, b = self.params
            return rng.uniform(a, b, size=n)
        if self.kind == "pareto":
            scale, shape = self.params
            # 1 - U lies in (0, 1], so the power never divides by zero
            return scale * (1.0 - rng.random(n)) ** (-1.0 / shape)
        if self.kind == "gamma":
            shape, rate = self.params
            return rng.gamma(shape, 1.0 / rate, size=n)
        return rng.choice(self.atoms, size=n, p=self.weights)


def sample_degrees(profile, n: int, target_norm: float, seed=None) -> np.ndarray:
    """Draw ``theta0`` i.i.d. from ``profile`` and rescale to ``||theta||_2 = target_norm``."""
    if isinstance(profile, str):
        profile = DegreeProfile.parse(profile)
    if target_norm <= 0:
        raise InvalidProfile("target_norm must be positive")
    rng = as_seed(seed).generator()
    for _ in range(2):
        theta0 = profile.draw(n, rng)
        if np.all(theta0 > 0) and np.all(np.isfinite(theta0)):
            break
    else:
        raise DegenerateDraw(f"{profile} produced non-positive or non-finite draws twice")
    # rescale by the max first so the norm cannot overflow on heavy tails
    theta0 = theta0 / theta0.max()
    theta = target_norm * theta0 / np.linalg.norm(theta0)
    return theta


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous step CDF of ``eta_i = theta_i / theta_bar``."""

    eta: np.ndarray

    @classmethod
    def from_theta(cls, theta) -> "EmpiricalCdf":
        theta = check_theta(theta)
        return cls(np.sort(theta / theta.mean()))

    def __call__(self, t):
        return np.searchsorted(self.eta, t, side="right") / self.eta.size


def empirical_cdf(theta) -> EmpiricalCdf:
    return EmpiricalCdf.from_theta(theta)


@dataclass(frozen=True)
class RateInputs:
    n: int
    K: int
    theta_bar: float
    delta_n: float
    alpha_n: float | None = None
    beta_n: float | None = None

    def __post_init__(self):
        if self.n < 1 or self.K < 1 or self.theta_bar <= 0 or self.delta_n <= 0:
            raise ValueError("rate inputs must be positive")


def baseline_rate(inputs: RateInputs) -> float:
    """``K^{3/2} / (delta_n * sqrt(n * theta_bar^2))``."""
    return inputs.K ** 1.5 / (inputs.delta_n * math.sqrt(inputs.n * inputs.theta_bar ** 2))


def optimal_rate_integral(cdf: EmpiricalCdf, err_n: float) -> float:
    """Average of ``min(err_n / sqrt(min(eta_i, 1)), 1)`` over the atoms of ``cdf``."""
    if err_n <= 0:
        raise ValueError("err_n must be positive")
    eta = np.minimum(cdf.eta, 1.0)
    return float(np.mean(np.minimum(err_n / np.sqrt(eta), 1.0)))


def expected_degree_normalizer(omega, tau: float = 1.0) -> np.ndarray:
    """Diagonal of ``H0``: expected degree plus ``tau`` times the expected mean degree."""
    omega = np.asarray(omega, dtype=float)
    d0 = omega.sum(axis=1) - np.diag(omega)
    return d0 + tau * d0.mean()


def compute_G(theta, pi, omega, tau: float = 1.0) -> np.ndarray:
    """``K * Pi' Theta H0^{-1} Theta Pi``."""
    theta = check_theta(theta)
    pi = check_membership(pi)
    h0 = expected_degree_normalizer(omega, tau)
    tp = theta[:, None] * pi
    g = pi.shape[1] * (tp.T / h0) @ tp
    return (g + g.T) / 2


@dataclass(frozen=True)
class SignalStrength:
    """Eigen-summary of ``PG`` with the regularity checks used in the rate theory."""

    alpha: float
    beta: float
    delta: float
    eigenvalues: np.ndarray
    perron: np.ndarray
    conditions: dict = field(default_factory=dict)


def delta_n(p, g) -> SignalStrength:
    """``alpha = lambda_1(PG)``, ``beta = |lambda_K(PG)|``, ``delta = min(alpha/sqrt(K), beta)``.

    Eigenvalues are sorted by decreasing magnitude.  ``PG`` is similar to the
    symmetric ``G^{1/2} P G^{1/2}`` so its spectrum is real; tiny imaginary
    parts from the non-symmetric solver are discarded.
    """
    p = np.asarray(p, dtype=float)
    g = np.asarray(g, dtype=float)
    K = p.shape[0]
    pg = p @ g
    vals, vecs = np.linalg.eig(pg)
    vals, vecs = vals.real, vecs.real
    order = np.lexsort((-vals, -np.abs(vals)))
    vals, vecs = vals[order], vecs[:, order]
    if abs(vals[-1]) < SINGULAR_PG_TOL:
        raise SingularPG(f"|lambda_K(PG)| = {abs(vals[-1]):.3g}")
    alpha = float(vals[0])
    beta = float(abs(vals[-1]))
    perron = vecs[:, 0] / np.linalg.norm(vecs[:, 0])
    if perron.sum() < 0:
        perron = -perron
    conditions = {
        "alpha_in_1_K": bool(1.0 - 1e-9 <= alpha <= K + 1e-9),
        "perron_min": float(perron.min()),
        "perron_positive": bool(perron.min() > 0),
        "g_min_eigenvalue": float(np.linalg.eigvalsh((g + g.T) / 2).min()),
        "g_max_eigenvalue": float(np.linalg.eigvalsh((g + g.T) / 2).max()),
    }
    return SignalStrength(alpha, beta, min(alpha / math.sqrt(K), beta), vals, perron, conditions)


def rate_inputs(theta, pi, p, tau: float = 1.0, omega=None) -> RateInputs:
    """Assemble :class:`RateInputs` for a DCMM triple."""
    theta = check_theta(theta)
    if omega is None:
        omega = build_omega(theta, pi, p, clip=True)
    s = delta_n(p, compute_G(theta, pi, omega, tau))
    return RateInputs(theta.size, pi.shape[1], float(theta.mean()), s.delta, s.alpha, s.beta)
