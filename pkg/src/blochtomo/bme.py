"""Bayesian mean estimation by product quadrature over the Bloch ball.

The posterior is prior density x outcome probability.  Grids are spherical
products: Gauss-Legendre in psi with r = sin(psi) (the Jacobian cos(psi)
cancels the (1 - r^2)^(-1/2) factor of the Bures and Chernoff densities),
Gauss-Legendre in cos(theta) and the trapezoid rule in phi.  The pure prior
integrates over the unit sphere only.

Batched evaluation reduces every count record to a canonical
representative (up >= down on each axis, axes sorted) using the isotropy of
the radial priors; the grid is invariant under the reflections, so
equivariance under axis relabelling and up/down swaps holds exactly.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .core import BlochVector, DomainError, NumericalError, VectorLike, as_vector, entropy_radial, log_binomial
from .data import CountRecord, canonicalize
from .priors import Prior

FUNCTIONALS = ("entropy", "purity", "qfi")
CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class QuadratureSpec:
    radial_nodes: int = 64
    polar_nodes: int = 64
    azimuthal_nodes: int = 128
    substitution: str = "sine"

    def __post_init__(self):
        for name in ("radial_nodes", "polar_nodes", "azimuthal_nodes"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 4:
                raise DomainError(f"{name} must be an integer >= 4, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.substitution not in ("sine", "none"):
            raise DomainError(f"substitution must be 'sine' or 'none', got {self.substitution!r}")

    @classmethod
    def parse(cls, text: str) -> "QuadratureSpec":
        """Parse ``radial,polar,azimuthal``."""
        try:
            parts = [int(p) for p in text.split(",")]
        except ValueError as exc:
            raise DomainError(f"bad quadrature spec {text!r}") from exc
        if len(parts) != 3:
            raise DomainError(f"quadrature spec needs three node counts, got {text!r}")
        return cls(*parts)

    @property
    def size(self) -> int:
        return self.radial_nodes * self.polar_nodes * self.azimuthal_nodes

    def refined(self, factor: int = 2) -> "QuadratureSpec":
        return QuadratureSpec(self.radial_nodes * factor, self.polar_nodes * factor,
                              self.azimuthal_nodes * factor, self.substitution)


REDUCED = QuadratureSpec(32, 32, 64)


@dataclass(frozen=True, eq=False)
class Posterior:
    mean: BlochVector
    covariance: np.ndarray
    log_evidence: float
    functional_means: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    eta: float = 1.0

    def positivist(self) -> BlochVector:
        return self.mean.scaled(self.eta)


# ---------------------------------------------------------------------------
# grids


def _angular_nodes(spec: QuadratureSpec):
    ct, wt = np.polynomial.legendre.leggauss(spec.polar_nodes)
    phi = 2.0 * math.pi * np.arange(spec.azimuthal_nodes) / spec.azimuthal_nodes
    wp = np.full(spec.azimuthal_nodes, 2.0 * math.pi / spec.azimuthal_nodes)
    st = np.sqrt(1.0 - ct * ct)
    dirs = np.stack([np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)),
                     np.outer(ct, np.ones_like(phi))], axis=-1).reshape(-1, 3)
    return dirs, np.outer(wt, wp).ravel()


@lru_cache(maxsize=32)
def ball_grid(spec: QuadratureSpec):
    """Nodes (G, 3), radii (G,) and volume weights (G,) integrating d^3 r over the unit ball."""
    x, w = np.polynomial.legendre.leggauss(spec.radial_nodes)
    if spec.substitution == "sine":
        psi = 0.25 * math.pi * (x + 1.0)
        r = np.sin(psi)
        wr = 0.25 * math.pi * w * r * r * np.cos(psi)
    else:
        r = 0.5 * (x + 1.0)
        wr = 0.5 * w * r * r
    dirs, wa = _angular_nodes(spec)
    pts = (r[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    radii = np.repeat(r, len(dirs))
    weights = np.outer(wr, wa).ravel()
    return pts, radii, weights


@lru_cache(maxsize=32)
def sphere_grid(spec: QuadratureSpec):
    dirs, wa = _angular_nodes(spec)
    return dirs, np.ones(len(dirs)), wa


@lru_cache(maxsize=32)
def prior_grid(prior: Prior, spec: QuadratureSpec):
    """Nodes, radii and log(prior density x quadrature weight) for a prior."""
    if prior.is_pure:
        pts, radii, w = sphere_grid(spec)
        logw = np.log(w) - math.log(4.0 * math.pi)
    else:
        pts, radii, w = ball_grid(spec)
        logw = np.log(w) + prior.log_radial_density(radii)
    keep = np.isfinite(logw)
    return pts[keep], radii[keep], logw[keep]


# ---------------------------------------------------------------------------
# canonical reduction


def _restore(mean_c, cov_c, signs, perm):
    n = len(mean_c)
    rows = np.arange(n)[:, None]
    mean = np.empty_like(mean_c)
    mean[rows, perm] = mean_c
    mean *= signs
    cov = np.empty_like(cov_c)
    # cov[perm[a], perm[b]] = cov_c[a, b], then conjugate by the sign flips
    cov[rows[:, :, None], perm[:, :, None], perm[:, None, :]] = cov_c
    cov *= signs[:, :, None] * signs[:, None, :]
    return mean, cov


# ---------------------------------------------------------------------------
# posterior moments


def _features(pts, eta):
    s = eta * pts
    return np.stack([np.log1p(s[:, 0]), np.log1p(-s[:, 0]), np.log1p(s[:, 1]),
                     np.log1p(-s[:, 1]), np.log1p(s[:, 2]), np.log1p(-s[:, 2])], axis=1)


def _moment_matrix(pts, radii, functionals):
    cols = [np.ones(len(pts)), pts[:, 0], pts[:, 1], pts[:, 2],
            pts[:, 0] ** 2, pts[:, 1] ** 2, pts[:, 2] ** 2,
            pts[:, 0] * pts[:, 1], pts[:, 0] * pts[:, 2], pts[:, 1] * pts[:, 2]]
    for name in functionals:
        if name == "entropy":
            f = entropy_radial(radii)
        elif name == "purity":
            f = 0.5 * (1.0 + radii * radii)
        elif name == "qfi":
            f = radii * radii
        else:
            raise DomainError(f"unknown functional {name!r}")
        cols += [f, f * f]
    return np.stack(cols, axis=1)


def resolve_threads(threads: Optional[int]) -> int:
    if threads is None:
        threads = int(os.environ.get("BLOCHTOMO_THREADS", "1") or 1)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return int(threads)


def _moments(counts, prior, spec, eta, functionals, threads):
    pts, radii, logw = prior_grid(prior, spec)
    F = _features(pts, eta)
    Mm = _moment_matrix(pts, radii, functionals)
    n = len(counts)
    out = np.empty((n, Mm.shape[1]))
    shift = np.empty(n)
    chunk = max(1, CHUNK_ELEMENTS // len(pts))
    starts = list(range(0, n, chunk))

    def work(start):
        c = counts[start:start + chunk]
        L = c @ F.T + logw
        m = np.max(L, axis=1, keepdims=True)
        w = np.exp(L - m)
        out[start:start + chunk] = w @ Mm
        shift[start:start + chunk] = m[:, 0]

    workers = resolve_threads(threads)
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(work, starts))
    else:
        for s in starts:
            work(s)
    return out, shift


def bme_batch(counts, prior: Prior, spec: QuadratureSpec = QuadratureSpec(), eta: float = 1.0,
              functionals: Sequence[str] = (), threads: Optional[int] = None, reduce: bool = True):
    """Posterior means (n, 3), covariances (n, 3, 3), log-evidences (n,) and
    functional (mean, variance) arrays for many count records."""
    if not 0.0 < eta <= 1.0:
        raise DomainError(f"bme needs 0 < eta <= 1, got {eta}")
    c = np.atleast_2d(np.asarray(counts, dtype=float))
    if c.shape[-1] != 6:
        raise DomainError("count arrays need a trailing dimension of 6")
    if np.any(c[:, 0::2] + c[:, 1::2] < 1):
        raise DomainError("every axis needs at least one measurement")
    functionals = tuple(functionals)
    if reduce:
        canon, signs, perm = canonicalize(c)
        uniq, inverse = np.unique(canon, axis=0, return_inverse=True)
        inverse = inverse.ravel()
    else:
        uniq = c
    mom, shift = _moments(uniq, prior, spec, eta, functionals, threads)
    z = mom[:, 0]
    if np.any(~(z > 0)) or np.any(~np.isfinite(mom)):
        raise NumericalError("posterior normalisation underflowed")
    mean = mom[:, 1:4] / z[:, None]
    sq = mom[:, 4:7] / z[:, None]
    cross = mom[:, 7:10] / z[:, None]
    cov = np.empty((len(uniq), 3, 3))
    cov[:, [0, 1, 2], [0, 1, 2]] = sq - mean ** 2
    for (i, j), col in zip(((0, 1), (0, 2), (1, 2)), range(3)):
        cov[:, i, j] = cov[:, j, i] = cross[:, col] - mean[:, i] * mean[:, j]
    up, down = uniq[:, 0::2], uniq[:, 1::2]
    log_const = np.sum(log_binomial(up + down, up), axis=1) - math.log(2.0) * np.sum(up + down, axis=1)
    log_ev = np.log(z) + shift + log_const
    fvals = {}
    for idx, name in enumerate(functionals):
        m1 = mom[:, 10 + 2 * idx] / z
        m2 = mom[:, 11 + 2 * idx] / z
        fvals[name] = (m1, np.maximum(m2 - m1 * m1, 0.0))
    if reduce:
        mean, cov = _restore(mean[inverse], cov[inverse], signs, perm)
        log_ev = log_ev[inverse]
        fvals = {k: (v[0][inverse], v[1][inverse]) for k, v in fvals.items()}
    return mean, cov, log_ev, fvals


def _record_array(counts) -> np.ndarray:
    if isinstance(counts, CountRecord):
        counts.require_totals()
        return counts.as_array()[None, :].astype(float)
    return np.atleast_2d(np.asarray(counts, dtype=float))


def bme(counts, prior: Prior, quad: QuadratureSpec = QuadratureSpec(), eta: float = 1.0,
        functionals: Sequence[str] = (), threads: Optional[int] = None) -> Posterior:
    """Posterior mean Bloch vector, covariance and evidence for one count record."""
    mean, cov, log_ev, fvals = bme_batch(_record_array(counts), prior, quad, eta, functionals, threads)
    fm = {k: (float(v[0][0]), float(v[1][0])) for k, v in fvals.items()}
    return Posterior(BlochVector.from_array(mean[0]), cov[0], float(log_ev[0]), fm, eta)


def functional_posterior(counts, prior: Prior, quad: QuadratureSpec = QuadratureSpec(),
                         functional: str = "entropy", axis: Optional[VectorLike] = None,
                         eta: float = 1.0) -> Tuple[float, float]:
    """Posterior mean and variance of a state functional.

    ``functional`` is ``entropy``, ``purity``, ``qfi`` or
    ``operator_expectation``; the latter needs a unit ``axis`` n and returns
    <n . sigma> with the quantum variance 1 - <n . sigma>**2 of the mean state.
    """
    if functional == "operator_expectation":
        if axis is None:
            raise DomainError("operator_expectation needs an axis")
        n = as_vector(axis)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise DomainError("operator axis must be a unit vector")
        post = bme(counts, prior, quad, eta)
        value = float(n @ post.mean.as_array())
        # <Tr(rho A)> over the posterior against Tr(mean rho A): linear, so equal up to rounding
        c = _record_array(counts)
        pts, _, logw = prior_grid(prior, quad)
        L = c[0] @ _features(pts, eta).T + logw
        w = np.exp(L - L.max())
        direct = float(w @ (pts @ n) / w.sum())
        if abs(direct - value) > 1e-9:
            raise NumericalError("operator expectation disagrees with the posterior mean")
        return value, 1.0 - value * value
    if functional not in FUNCTIONALS:
        raise DomainError(f"unknown functional {functional!r}")
    post = bme(counts, prior, quad, eta, functionals=(functional,))
    return post.functional_means[functional]
