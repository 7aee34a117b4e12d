"""Radial prior densities on the Bloch ball.

Families: the ancilla-dimension measures C_k (Hilbert-Schmidt is k=2, Bures
k=3/2), the pure-state surface measure, the Chernoff-information measure and
the large-k Gaussian form.  Any of them can carry a multiplicative entropy
weight, renormalised once at construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .core import DomainError, VectorLike, as_vector, entropy_radial


class Family(str, Enum):
    ANCILLA = "ancilla"
    PURE = "pure"
    CHERNOFF = "chernoff"
    GAUSSIAN = "gaussian"


class PriorClass(str, Enum):
    """Shape classes that decide how the prior-aware MLE searches the ridge."""

    PURE_PEAKED = "pure_peaked"
    MONOTONIC_PURE_BIASED = "monotonic_pure_biased"
    UNIFORM = "uniform"
    MONOTONIC_MIXED_BIASED = "monotonic_mixed_biased"
    NON_MONOTONIC = "non_monotonic"


def _default_class(family: Family, k: Optional[float], entropy_weighted: bool) -> PriorClass:
    if entropy_weighted:
        return PriorClass.NON_MONOTONIC
    if family in (Family.PURE, Family.CHERNOFF):
        return PriorClass.PURE_PEAKED
    if family is Family.GAUSSIAN:
        return PriorClass.MONOTONIC_MIXED_BIASED
    if k < 2:
        return PriorClass.PURE_PEAKED
    if k == 2:
        return PriorClass.UNIFORM
    return PriorClass.MONOTONIC_MIXED_BIASED


@dataclass(frozen=True)
class Prior:
    family: Family
    k: Optional[float] = None
    entropy_weighted: bool = False
    prior_class: Optional[PriorClass] = None
    _log_norm: float = field(default=0.0, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family is Family.ANCILLA:
            if self.k is None or not self.k > 1:
                raise DomainError(f"ancilla prior needs k > 1 (use the pure family for k = 1), got {self.k}")
        elif self.family is Family.GAUSSIAN:
            if self.k is None or not self.k > 0:
                raise DomainError(f"gaussian prior needs k > 0, got {self.k}")
        elif self.k is not None:
            raise DomainError(f"{self.family.value} prior takes no k")
        if self.prior_class is None:
            object.__setattr__(self, "prior_class", _default_class(self.family, self.k, self.entropy_weighted))
        else:
            object.__setattr__(self, "prior_class", PriorClass(self.prior_class))
        if self.entropy_weighted or self.family is Family.GAUSSIAN:
            # the entropy weight and the ball truncation of the Gaussian both need a quadrature normaliser
            total = radial_integral(self, lambda r: np.ones_like(r), normalised=False)
            object.__setattr__(self, "_log_norm", -math.log(total))

    @property
    def is_pure(self) -> bool:
        return self.family is Family.PURE

    @property
    def name(self) -> str:
        if self.family is Family.ANCILLA:
            base = {2.0: "hs", 1.5: "bures"}.get(float(self.k), f"ancilla:{self.k:g}")
        elif self.family is Family.GAUSSIAN:
            base = f"gaussian:{self.k:g}"
        else:
            base = self.family.value
        return base + ("+entropy" if self.entropy_weighted else "")

    def log_radial_density(self, rnorm) -> np.ndarray:
        """Log of the normalised density at radius |r| (vectorised).

        For the pure family this is the surface density 1/(4 pi) at |r| = 1.
        """
        r = np.asarray(rnorm, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.family is Family.PURE:
                out = np.where(np.isclose(r, 1.0, rtol=0, atol=1e-12), -math.log(4 * math.pi), -np.inf)
            else:
                inside = r < 1.0
                rr = np.where(inside, r, 0.0)
                out = np.where(inside, self._log_base(rr), -np.inf)
                if self.entropy_weighted:
                    out = out + np.log(entropy_radial(rr))
                out = np.where(inside, out + self._log_norm, -np.inf)
        return out

    def _log_base(self, r):
        one_minus = 1.0 - r * r
        if self.family is Family.ANCILLA:
            k = float(self.k)
            logc = gammaln(k + 0.5) - 1.5 * math.log(math.pi) - gammaln(k - 1.0)
            return logc + (k - 2.0) * np.log(one_minus)
        if self.family is Family.CHERNOFF:
            # ((1-r^2)^-1/2 - 1) / r^2 == 1 / (c (1 + c)) with c = sqrt(1-r^2); no cancellation at r=0
            c = np.sqrt(one_minus)
            return -math.log(2 * math.pi * (math.pi - 2)) - np.log(c * (1.0 + c))
        k = float(self.k)
        return 1.5 * math.log((k + 0.5) / math.pi) - (k + 0.5) * r * r

    def radial_density(self, rnorm) -> np.ndarray:
        return np.exp(self.log_radial_density(rnorm))


def density(prior: Prior, r: VectorLike) -> float:
    """Prior density at Bloch vector r (zero outside the ball)."""
    return float(prior.radial_density(float(np.linalg.norm(as_vector(r)))))


def radial_integral(prior: Prior, g: Callable[[np.ndarray], np.ndarray], normalised: bool = True) -> float:
    """Integral of 4 pi r^2 C(r) g(r) over 0 <= r <= 1 by adaptive quadrature.

    Ancilla families use the algebraic endpoint weight (1 - r)**(k - 2) so the
    boundary singularity is integrated exactly; the pure family returns g(1).
    """
    if prior.family is Family.PURE:
        return float(g(np.array(1.0)))
    log_norm = prior._log_norm if normalised else 0.0
    opts = dict(limit=400, epsabs=1e-14, epsrel=1e-13)

    if prior.family is Family.ANCILLA:
        k = float(prior.k)
        logc = gammaln(k + 0.5) - 1.5 * math.log(math.pi) - gammaln(k - 1.0)

        def f(r):
            val = 4 * math.pi * r * r * math.exp(logc + log_norm) * (1.0 + r) ** (k - 2.0) * float(g(np.array(r)))
            if prior.entropy_weighted:
                val *= float(entropy_radial(r))
            return val

        value, _ = integrate.quad(f, 0.0, 1.0, weight="alg", wvar=(0.0, k - 2.0), **opts)
        return float(value)

    # Chernoff and Gaussian: r = sin(psi) makes the Chernoff integrand smooth
    def f(psi):
        r = math.sin(psi)
        base = prior._log_base(np.array(r))
        val = 4 * math.pi * r * r * math.cos(psi) * math.exp(float(base) + log_norm) * float(g(np.array(r)))
        if prior.entropy_weighted:
            val *= float(entropy_radial(r))
        return val

    value, _ = integrate.quad(f, 0.0, math.pi / 2, **opts)
    return float(value)


def radial_cdf(prior: Prior, rnorm: float) -> float:
    """Prior probability of |r| <= rnorm."""
    if not 0.0 <= rnorm <= 1.0:
        raise DomainError(f"radius must lie in [0, 1], got {rnorm}")
    if prior.family is Family.PURE:
        return 1.0 if rnorm >= 1.0 else 0.0
    if rnorm >= 1.0:
        return radial_integral(prior, lambda r: np.ones_like(r))
    psi_max = math.asin(rnorm)

    def f(psi):
        r = math.sin(psi)
        return 4 * math.pi * r * r * math.cos(psi) * float(prior.radial_density(r))

    value, _ = integrate.quad(f, 0.0, psi_max, limit=400, epsabs=1e-14, epsrel=1e-13)
    return float(value)


def mean_squared_radius(prior: Prior, method: str = "analytic") -> float:
    """<|r|^2> under the prior; 3/(2k+1) in closed form for ancilla and pure."""
    if method == "analytic" and not prior.entropy_weighted:
        if prior.family is Family.PURE:
            return 1.0
        if prior.family is Family.ANCILLA:
            return 3.0 / (2.0 * float(prior.k) + 1.0)
    return radial_integral(prior, lambda r: r * r)


def bures_s_coordinate(rnorm: float) -> float:
    """Radial coordinate in which the Bures measure is flat on the unit ball."""
    if not 0.0 <= rnorm <= 1.0:
        raise DomainError(f"radius must lie in [0, 1], got {rnorm}")
    val = (2.0 / math.pi) * (math.asin(rnorm) - rnorm * math.sqrt(1.0 - rnorm * rnorm))
    return max(val, 0.0) ** (1.0 / 3.0)


def hs() -> Prior:
    return Prior(Family.ANCILLA, 2.0)


def bures() -> Prior:
    return Prior(Family.ANCILLA, 1.5)


def pure() -> Prior:
    return Prior(Family.PURE)


def chernoff() -> Prior:
    return Prior(Family.CHERNOFF)


def ancilla(k: float) -> Prior:
    return Prior(Family.ANCILLA, float(k))


def gaussian(k: float) -> Prior:
    return Prior(Family.GAUSSIAN, float(k))


def with_entropy(prior: Prior) -> Prior:
    if prior.family is Family.PURE:
        raise DomainError("the entropy weight vanishes on pure states")
    return Prior(prior.family, prior.k, entropy_weighted=True)


def parse_prior(name: str) -> Prior:
    """Parse ``hs``, ``bures``, ``pure``, ``chernoff``, ``ancilla:<k>`` or
    ``gaussian:<k>``, optionally suffixed with ``+entropy``."""
    text = name.strip().lower()
    weighted = text.endswith("+entropy")
    if weighted:
        text = text[: -len("+entropy")]
    if text == "hs":
        base = hs()
    elif text == "bures":
        base = bures()
    elif text == "pure":
        base = pure()
    elif text == "chernoff":
        base = chernoff()
    elif text.startswith("ancilla:") or text.startswith("gaussian:"):
        fam, _, kval = text.partition(":")
        try:
            k = float(kval)
        except ValueError as exc:
            raise DomainError(f"bad k in prior name {name!r}") from exc
        base = ancilla(k) if fam == "ancilla" else gaussian(k)
    else:
        raise DomainError(f"unknown prior {name!r}")
    return with_entropy(base) if weighted else base
