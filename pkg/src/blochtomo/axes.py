"""Weighted measurement-axis sets: spherical-harmonic moments, the
uniformity condition on them, and the flat-prior MLE variance at the
maximally mixed state for arbitrary axis sets."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy.special import gammaln, sph_harm_y

from .core import DomainError
from .estimators import OK, general_axes_batch

K_MAX = 8
MAX_OUTCOMES = 1_000_000


class EnumerationTooLarge(DomainError):
    """An exhaustive enumeration would exceed the configured outcome budget."""


@dataclass(frozen=True)
class AxisSet:
    """Unit axes given by polar angle theta and azimuth phi, with weights c_n summing to 1."""

    thetas: Tuple[float, ...]
    phis: Tuple[float, ...]
    weights: Tuple[float, ...]

    def __post_init__(self):
        th = tuple(float(v) for v in self.thetas)
        ph = tuple(float(v) for v in self.phis)
        w = tuple(float(v) for v in self.weights)
        if not (len(th) == len(ph) == len(w)) or not th:
            raise DomainError("an axis set needs matching, non-empty theta, phi and weight lists")
        if any(not v > 0 for v in w):
            raise DomainError("axis weights must be positive")
        if abs(sum(w) - 1.0) > 1e-12:
            raise DomainError(f"axis weights must sum to 1, got {sum(w)!r}")
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "phis", ph)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_vectors(cls, vectors, weights=None, normalize: bool = True) -> "AxisSet":
        v = np.asarray(vectors, dtype=float).reshape(-1, 3)
        norms = np.linalg.norm(v, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise DomainError("axis vectors must have unit norm")
        w = np.full(len(v), 1.0 / len(v)) if weights is None else np.asarray(weights, dtype=float)
        if normalize:
            w = w / w.sum()
        theta = np.arccos(np.clip(v[:, 2], -1.0, 1.0))
        phi = np.arctan2(v[:, 1], v[:, 0])
        return cls(tuple(theta), tuple(phi), tuple(w))

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def vectors(self) -> np.ndarray:
        th = np.asarray(self.thetas)
        ph = np.asarray(self.phis)
        return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=1)

    def rotated(self, rotation) -> "AxisSet":
        R = np.asarray(rotation, dtype=float)
        v = self.vectors @ R.T
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return AxisSet.from_vectors(v, self.weights, normalize=False)

    def to_json_obj(self) -> list:
        return [{"theta": t, "phi": p, "weight": w} for t, p, w in zip(self.thetas, self.phis, self.weights)]

    @classmethod
    def from_json_obj(cls, obj, normalize: bool = False) -> "AxisSet":
        try:
            th = [float(e["theta"]) for e in obj]
            ph = [float(e["phi"]) for e in obj]
            w = [float(e["weight"]) for e in obj]
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError("axis file must be a JSON array of {theta, phi, weight} objects") from exc
        if normalize and w:
            total = sum(w)
            w = [x / total for x in w]
        return cls(tuple(th), tuple(ph), tuple(w))

    @classmethod
    def from_json(cls, text: str, normalize: bool = False) -> "AxisSet":
        return cls.from_json_obj(json.loads(text), normalize)


def cartesian() -> AxisSet:
    return AxisSet.from_vectors(np.eye(3))


def tetrahedron() -> AxisSet:
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / math.sqrt(3.0)
    return AxisSet.from_vectors(v)


def single_axis(vector=(0.0, 0.0, 1.0)) -> AxisSet:
    return AxisSet.from_vectors([vector])


def z_biased(w: float) -> AxisSet:
    """Cartesian axes with weights {x: w, y: w, z: 1 - 2w}; quadrupole-free at w = 1/3."""
    if not 0.0 < w < 0.5:
        raise DomainError(f"z-biased weight must lie in (0, 1/2), got {w}")
    return AxisSet.from_vectors(np.eye(3), [w, w, 1.0 - 2.0 * w], normalize=False)


def fibonacci(n: int) -> AxisSet:
    """Near-uniform spherical point set with equal weights."""
    if n < 1:
        raise DomainError("need at least one point")
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    rho = np.sqrt(1.0 - z * z)
    v = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    return AxisSet.from_vectors(v / np.linalg.norm(v, axis=1, keepdims=True))


# ---------------------------------------------------------------------------
# spherical-harmonic moments


def harmonic(k: int, q: int, theta, phi):
    """Orthonormal Y_k^q with the Condon-Shortley phase."""
    return sph_harm_y(k, q, theta, phi)


def moments(axes: AxisSet, k_max: int = 4) -> Dict[Tuple[int, int], complex]:
    """s_kq = sum_n c_n conj(Y_k^q(theta_n, phi_n)) for 0 <= k <= k_max."""
    if isinstance(k_max, bool) or int(k_max) != k_max or not 0 <= k_max <= K_MAX:
        raise DomainError(f"k_max must be an integer in [0, {K_MAX}], got {k_max!r}")
    th = np.asarray(axes.thetas)
    ph = np.asarray(axes.phis)
    c = np.asarray(axes.weights)
    out = {}
    for k in range(int(k_max) + 1):
        for q in range(-k, k + 1):
            out[(k, q)] = complex(np.sum(c * np.conj(harmonic(k, q, th, ph))))
    return out


def moment_power(s: Dict[Tuple[int, int], complex], k: int) -> float:
    """Rotation-invariant sum over q of |s_kq|^2."""
    return float(sum(abs(s[(k, q)]) ** 2 for q in range(-k, k + 1)))


@dataclass(frozen=True)
class UniformityReport:
    spin_j: float
    tol: float
    max_abs: Dict[int, float]

    @property
    def per_k(self) -> Dict[int, bool]:
        return {k: v <= self.tol for k, v in self.max_abs.items()}

    @property
    def passed(self) -> bool:
        return all(self.per_k.values())

    @property
    def first_failure(self):
        for k, ok in sorted(self.per_k.items()):
            if not ok:
                return k
        return None

    def to_json_obj(self) -> dict:
        return {"spin": self.spin_j, "tol": self.tol, "passed": self.passed,
                "orders": [{"k": k, "max_abs_s": v, "passed": v <= self.tol}
                           for k, v in sorted(self.max_abs.items())]}


def uniformity_check(axes: AxisSet, spin_j: float = 0.5, tol: float = 1e-10) -> UniformityReport:
    """Check s_kq = 0 for every even k from 2 to 4j."""
    two_j = 2.0 * spin_j
    if abs(two_j - round(two_j)) > 1e-12 or round(two_j) < 1:
        raise DomainError(f"spin must be a positive half-integer, got {spin_j}")
    k_top = 2 * int(round(two_j))
    if k_top > K_MAX:
        raise DomainError(f"spin {spin_j} needs harmonics up to k = {k_top} > {K_MAX}")
    s = moments(axes, k_top)
    max_abs = {k: max(abs(s[(k, q)]) for q in range(-k, k + 1)) for k in range(2, k_top + 1, 2)}
    return UniformityReport(float(spin_j), float(tol), max_abs)


# ---------------------------------------------------------------------------
# flat-prior MLE variance at r = 0


def _compositions(total: int, parts: int):
    for bars in combinations(range(total + parts - 1), parts - 1):
        prev = -1
        comp = []
        for b in bars:
            comp.append(b - prev - 1)
            prev = b
        comp.append(total + parts - 2 - prev)
        yield comp


def outcome_count(n_axes: int, shots_per_axis: int) -> int:
    """Number of (allocation, up-count) outcomes: the x**T coefficient of (1 - x)**(-2M)."""
    total = n_axes * shots_per_axis
    return math.comb(total + 2 * n_axes - 1, 2 * n_axes - 1)


@lru_cache(maxsize=8)
def _origin_table(vec_key: bytes, n_axes: int, shots_per_axis: int):
    A = np.frombuffer(vec_key).reshape(n_axes, 3)
    total = n_axes * shots_per_axis
    comps, ups = [], []
    for comp in _compositions(total, n_axes):
        grids = np.meshgrid(*[np.arange(n + 1) for n in comp], indexing="ij")
        u = np.stack([g.ravel() for g in grids], axis=1)
        ups.append(u)
        comps.append(np.broadcast_to(np.asarray(comp), u.shape))
    up = np.concatenate(ups).astype(float)
    alloc = np.concatenate(comps).astype(float)
    down = alloc - up
    r, status = general_axes_batch(A, up, down)
    sq = np.where(status == OK, np.sum(np.nan_to_num(r) ** 2, axis=1), 0.0)
    # weight-independent part of the log-probability at r = 0
    log_base = (gammaln(total + 1.0) - np.sum(gammaln(alloc + 1.0), axis=1)
                + np.sum(gammaln(alloc + 1.0) - gammaln(up + 1.0) - gammaln(down + 1.0), axis=1)
                - total * math.log(2.0))
    return alloc, log_base, sq, status == OK


def mle_variance_at_origin(axes: AxisSet, shots_per_axis: int, max_outcomes: int = MAX_OUTCOMES) -> float:
    """Probability-weighted mean of |r_MLE|^2 at the maximally mixed state.

    The ``M * shots_per_axis`` shots are assigned to axes independently with
    probabilities ``c_n``, and every (allocation, up-count) outcome is
    enumerated.  Outcomes whose measured axes do not span three dimensions
    have no unique MLE; they are excluded and the weights renormalised.
    """
    if shots_per_axis < 1:
        raise DomainError("shots_per_axis must be positive")
    n = axes.size
    count = outcome_count(n, shots_per_axis)
    if count > max_outcomes:
        raise EnumerationTooLarge(f"{count} outcomes exceed the budget of {max_outcomes}")
    A = np.ascontiguousarray(axes.vectors)
    alloc, log_base, sq, ok = _origin_table(A.tobytes(), n, int(shots_per_axis))
    logp = log_base + alloc @ np.log(np.asarray(axes.weights))
    p = np.exp(logp)
    valid = p[ok].sum()
    if not valid > 0:
        raise DomainError("no outcome of this axis set has a unique MLE")
    return float(np.sum(p[ok] * sq[ok]) / valid)


def weight_sweep(ws: Sequence[float], shots_per_axis: int = 10):
    """<|r_MLE|^2> at r = 0 over the z-biased family; returns (ws, values)."""
    ws = np.asarray(ws, dtype=float)
    vals = np.array([mle_variance_at_origin(z_biased(w), shots_per_axis) for w in ws])
    return ws, vals
