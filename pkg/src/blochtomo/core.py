"""Bloch-vector algebra, single-qubit state functionals and the count model.

A qubit state is rho = (1 + r . sigma) / 2 with r = (x, y, z); the Pauli
matrices are never built explicitly.  Every function here is pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np
from scipy.special import gammaln, xlog1py

PHYSICAL_TOL = 1e-12


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericalError(ArithmeticError):
    """A numerical procedure could not produce a finite result."""


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    @classmethod
    def from_array(cls, a) -> "BlochVector":
        a = np.asarray(a, dtype=float).reshape(3)
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def __iter__(self) -> Iterator[float]:
        return iter((self.x, self.y, self.z))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @property
    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    @property
    def physical(self) -> bool:
        return self.x * self.x + self.y * self.y + self.z * self.z - 1.0 <= PHYSICAL_TOL

    def scaled(self, factor: float) -> "BlochVector":
        return BlochVector(factor * self.x, factor * self.y, factor * self.z)


VectorLike = Union[BlochVector, Sequence[float], np.ndarray]


def as_vector(r: VectorLike) -> np.ndarray:
    if isinstance(r, BlochVector):
        return r.as_array()
    a = np.asarray(r, dtype=float)
    if a.shape != (3,):
        raise DomainError(f"expected a 3-vector, got shape {a.shape}")
    return a


def _checked_norm(r: VectorLike) -> float:
    n = float(np.linalg.norm(as_vector(r)))
    if n * n - 1.0 > PHYSICAL_TOL:
        raise DomainError(f"|r| = {n:.15g} exceeds 1 (unphysical state)")
    return min(n, 1.0)


def trace_distance(a: VectorLike, b: VectorLike) -> float:
    """Half the Euclidean distance between two Bloch vectors."""
    return 0.5 * float(np.linalg.norm(as_vector(a) - as_vector(b)))


def schatten_distance(a: VectorLike, b: VectorLike, p: float) -> float:
    """Schatten p-norm of rho_a - rho_b, which is 2**(1/p) * |a - b| / 2 for qubits."""
    if not p >= 1:
        raise DomainError(f"Schatten distance needs p >= 1, got {p}")
    return 2.0 ** (1.0 / p) * trace_distance(a, b)


def entropy_radial(rnorm):
    """Von Neumann entropy as a function of |r|, vectorised; 0 ln 0 = 0."""
    r = np.clip(np.asarray(rnorm, dtype=float), 0.0, 1.0)
    p = 0.5 * (1.0 + r)
    q = 0.5 * (1.0 - r)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = -np.where(p > 0, p * np.log(p), 0.0) - np.where(q > 0, q * np.log(q), 0.0)
    return s


def entropy(r: VectorLike) -> float:
    return float(entropy_radial(_checked_norm(r)))


def purity(r: VectorLike) -> float:
    n = _checked_norm(r)
    return 0.5 * (1.0 + n * n)


def quantum_fisher_information(r: VectorLike) -> float:
    n = _checked_norm(r)
    return n * n


def wigner(r: VectorLike, theta: float, phi: float) -> float:
    """Spherical Wigner function of the state at polar angle theta, azimuth phi."""
    v = as_vector(r)
    n = np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
    return float((1.0 + math.sqrt(3.0) * n @ v) / math.sqrt(8.0 * math.pi))


def log_binomial(n, k):
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def log_likelihood_terms(counts, r):
    """Sum over axes of n_up*ln(1+r_a) + n_down*ln(1-r_a) for count arrays.

    ``counts`` has trailing shape 6 in the order (x_up, x_down, y_up, y_down,
    z_up, z_down); ``r`` has trailing shape 3.  No binomial coefficients and
    no ln 2 offsets; zero counts never contribute, even at r_a = +-1.
    """
    c = np.asarray(counts, dtype=float)
    r = np.asarray(r, dtype=float)
    up = c[..., 0::2]
    down = c[..., 1::2]
    return np.sum(xlog1py(up, r) + xlog1py(down, -r), axis=-1)


def log_outcome_probability_array(counts, r, eta: float = 1.0):
    """Vectorised log-probability of count records given Bloch vectors.

    No physicality check is made, so this also evaluates the formal
    probability at an unphysical direct-inversion point.
    """
    c = np.asarray(counts, dtype=float)
    up = c[..., 0::2]
    down = c[..., 1::2]
    total = up + down
    logc = np.sum(log_binomial(total, up), axis=-1) - math.log(2.0) * np.sum(total, axis=-1)
    return logc + log_likelihood_terms(c, eta * np.asarray(r, dtype=float))


def _check_eta(eta: float) -> None:
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta must lie in [0, 1], got {eta}")


def log_outcome_probability(counts, r: VectorLike, eta: float = 1.0) -> float:
    """Log-probability of a count record for state r measured with fidelity eta."""
    _checked_norm(r)
    _check_eta(eta)
    c = counts.as_array() if hasattr(counts, "as_array") else np.asarray(counts)
    return float(log_outcome_probability_array(c, as_vector(r), eta))


def outcome_probability(counts, r: VectorLike, eta: float = 1.0) -> float:
    return math.exp(log_outcome_probability(counts, r, eta))
