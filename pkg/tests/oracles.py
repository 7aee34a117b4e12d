"""Independent reference computations shared by the test modules.

The Monte Carlo posterior draws states directly from each prior with
closed-form samplers and weights them by the likelihood; it shares no code
with the quadrature grids it is checked against.
"""
import math

import numpy as np
from scipy.special import xlog1py

from blochtomo.core import entropy_radial
from blochtomo.priors import Family, Prior


def _directions(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _chernoff_radii(u):
    """Invert F(r) = 2 (asin r - r) / (pi - 2) through r = sin(psi)."""
    c = 0.5 * u * (math.pi - 2.0)
    psi = np.minimum(np.cbrt(6.0 * c), 0.5 * math.pi)
    for _ in range(40):
        g = psi - np.sin(psi) - c
        if np.max(np.abs(g)) < 1e-15:
            break
        dg = 1.0 - np.cos(psi)
        psi = np.clip(psi - np.where(dg > 1e-300, g / dg, 0.0), 0.0, 0.5 * math.pi)
    return np.sin(psi)


def sample_prior(prior: Prior, rng, n):
    """Draws from the base family (entropy weights are applied as importance weights)."""
    if prior.family is Family.PURE:
        r = np.ones(n)
    elif prior.family is Family.ANCILLA:
        r = np.sqrt(rng.beta(1.5, float(prior.k) - 1.0, n))
    elif prior.family is Family.CHERNOFF:
        r = _chernoff_radii(rng.random(n))
    else:
        raise ValueError(f"no sampler for {prior.name}")
    return r[:, None] * _directions(rng, n), r


def mc_posterior_means(counts, prior: Prior, samples=10_000_000, seed=0, chunk=1_000_000):
    """Posterior means and their standard errors (both (m, 3)) for count rows (m, 6)."""
    counts = np.atleast_2d(np.asarray(counts, dtype=float))
    up, down = counts[:, 0::2], counts[:, 1::2]
    t = (up - down) / (up + down)
    # the unconstrained maximum bounds the likelihood on the ball, so weights stay <= 1
    shift = np.sum(xlog1py(up, t) + xlog1py(down, -t), axis=1)
    rng = np.random.default_rng(seed)
    m = len(counts)
    sw = np.zeros(m)
    swr = np.zeros((m, 3))
    swr2 = np.zeros((m, 3))
    sw2 = np.zeros(m)
    sw2r = np.zeros((m, 3))
    for start in range(0, samples, chunk):
        k = min(chunk, samples - start)
        pts, radii = sample_prior(prior, rng, k)
        with np.errstate(divide="ignore", invalid="ignore"):
            feats = np.concatenate([np.log1p(pts), np.log1p(-pts)], axis=1)[:, [0, 3, 1, 4, 2, 5]]
            feats = np.where(np.isfinite(feats), feats, -1e300)
        w = np.exp(counts @ feats.T - shift[:, None])
        if prior.entropy_weighted:
            w = w * entropy_radial(radii)[None, :]
        sw += w.sum(axis=1)
        sw2 += (w * w).sum(axis=1)
        swr += w @ pts
        sw2r += (w * w) @ pts
        swr2 += (w * w) @ (pts * pts)
    mean = swr / sw[:, None]
    # delta-method variance of a self-normalised importance estimate
    var = (swr2 - 2 * mean * sw2r + mean * mean * sw2[:, None]) / sw[:, None] ** 2
    return mean, np.sqrt(var)
