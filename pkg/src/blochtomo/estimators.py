"""Point estimators for Cartesian-axis qubit tomography.

Every estimator has a vectorised ``*_batch`` form working on an (n, 6) count
array, which the evaluation harness uses over the full outcome enumeration,
and a single-record wrapper returning an :class:`Estimate`.

Measurement noise enters through ``eta``: counts are explained by the
measured vector s = eta * r, so estimators work on s inside the ball of
radius eta and report the platonic vector r = s / eta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.special import xlog1py

from .core import BlochVector, DomainError, NumericalError, VectorLike, as_vector, log_likelihood_terms
from .data import CountRecord, canonicalize, restore_vectors
from .priors import Prior, PriorClass


class Status(str, Enum):
    OK = "ok"
    FAILED_NOT_UNIQUE = "failed_not_unique"
    FAILED_NO_SOLUTION = "failed_no_solution"


# integer codes used by the batch routines
OK, NOT_UNIQUE, NO_SOLUTION = 0, 1, 2
STATUS_FROM_CODE = {OK: Status.OK, NOT_UNIQUE: Status.FAILED_NOT_UNIQUE, NO_SOLUTION: Status.FAILED_NO_SOLUTION}

SPHERE_TOL = 1e-10
SCAN_POINTS = 256
TIE_TOL = 1e-12


class BranchCutError(DomainError):
    """The MLE ridge is evaluated on the branch cut of a zero component."""


@dataclass(frozen=True, eq=False)
class Estimate:
    vector: BlochVector
    method: str
    status: Status = Status.OK
    alpha: Optional[float] = None
    covariance: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status is Status.OK


def _nan_vector() -> BlochVector:
    return BlochVector(math.nan, math.nan, math.nan)


# ---------------------------------------------------------------------------
# shared helpers


def _counts_array(counts) -> np.ndarray:
    if isinstance(counts, CountRecord):
        counts.require_totals()
        return counts.as_array()[None, :].astype(float)
    c = np.atleast_2d(np.asarray(counts, dtype=float))
    if c.shape[-1] != 6:
        raise DomainError("count arrays need a trailing dimension of 6")
    if np.any(c[:, 0::2] + c[:, 1::2] < 1):
        raise DomainError("every axis needs at least one measurement")
    return c


def direct_vectors(counts: np.ndarray):
    """Sample means t (n, 3), per-axis totals (n, 3) and binomial errors (n, 3)."""
    up = counts[:, 0::2]
    down = counts[:, 1::2]
    total = up + down
    t = (up - down) / total
    err = 2.0 * np.sqrt(up * down) / total ** 1.5
    return t, total, err


def _check_eta(eta: float) -> None:
    if not 0.0 < eta <= 1.0:
        raise DomainError(f"estimators need 0 < eta <= 1, got {eta}")


def _alpha_from_beta(beta):
    return beta / (1.0 - np.abs(beta))


def _bisect_radius(norm_fn, radius, lo, hi, iterations: int = 200):
    """Vectorised bisection for norm_fn(beta) == radius with norm decreasing in beta.

    Returns the bracket end with norm <= radius.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        active = (mid > lo) & (mid < hi)
        if not np.any(active):
            break
        big = norm_fn(mid) > radius
        lo = np.where(active & big, mid, lo)
        hi = np.where(active & ~big, mid, hi)
    return hi


# ---------------------------------------------------------------------------
# the constrained-likelihood ridge


def ridge_component(u, t):
    """Shell-constrained likelihood maximiser along one axis.

    Solves u x**3 - (1 + u) x + t = 0 for the root continuous with x = t at
    u = 0.  ``u`` is the Lagrange multiplier divided by the number of shots
    on the axis, ``t`` the sample mean.  On the branch cut (t == 0, u < -1)
    the positive root is returned; callers detect the cut separately.
    """
    u, t = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(t, dtype=float))
    out = np.zeros(u.shape)
    at = np.abs(t)
    sgn = np.where(t < 0, -1.0, 1.0)
    near_m1 = np.abs(u + 1.0) < 1e-6
    with np.errstate(all="ignore"):
        m = u == 0
        out[m] = t[m]

        m = (u > 0) & np.isfinite(u)
        if np.any(m):
            uu, tt = u[m], t[m]
            a = np.clip(1.5 * tt * np.sqrt(3 * uu / (uu + 1) ** 3), -1.0, 1.0)
            out[m] = 2 * np.sqrt((uu + 1) / (3 * uu)) * np.sin(np.arcsin(a) / 3)
        out[u == np.inf] = 0.0

        m = (u > -1) & (u < 0) & ~near_m1
        if np.any(m):
            uu, tt = u[m], t[m]
            a = 1.5 * tt * np.sqrt(-3 * uu / (uu + 1) ** 3)
            out[m] = 2 * np.sqrt((uu + 1) / (-3 * uu)) * np.sinh(np.arcsinh(a) / 3)

        m = (u < -1) & np.isfinite(u) & ~near_m1
        if np.any(m):
            uu, tt = u[m], at[m]
            a = 1.5 * tt * np.sqrt(3 * uu / (uu + 1) ** 3)
            pre = 2 * np.sqrt((uu + 1) / (3 * uu))
            core = np.where(a <= 1, np.cos(np.arccos(np.minimum(a, 1.0)) / 3),
                            np.cosh(np.arccosh(np.maximum(a, 1.0)) / 3))
            out[m] = sgn[m] * pre * core
        m = u == -np.inf
        out[m] = sgn[m]

        m = near_m1
        if np.any(m):
            # closed forms divide by (u + 1)**3 here; start at the u = -1 root and iterate
            uu, tt = u[m], t[m]
            x = np.cbrt(tt)
            x = np.where(tt == 0, np.where(uu < -1, np.sqrt(np.maximum((uu + 1) / uu, 0.0)), 0.0), x)
            for _ in range(40):
                g = uu * x ** 3 - (1 + uu) * x + tt
                dg = 3 * uu * x ** 2 - (1 + uu)
                step = np.where(np.abs(dg) > 1e-300, g / dg, 0.0)
                x = x - step
            out[m] = x

        # one safeguarded Newton polish on the cubic
        fin = np.isfinite(u) & (u != 0)
        if np.any(fin):
            uu, x, tt = u[fin], out[fin], t[fin]
            g = uu * x ** 3 - (1 + uu) * x + tt
            dg = 3 * uu * x ** 2 - (1 + uu)
            xn = np.where(np.abs(dg) > 1e-3, x - g / dg, x)
            gn = uu * xn ** 3 - (1 + uu) * xn + tt
            out[fin] = np.where(np.abs(gn) < np.abs(g), xn, x)
    return np.clip(out, -1.0, 1.0)


def _ridge(t, totals, alpha):
    """Ridge points for per-row multipliers alpha; shapes (n,3),(n,3),(n,...) -> (n,...,3)."""
    alpha = np.asarray(alpha, dtype=float)
    extra = alpha.ndim - 1
    tt = t.reshape(t.shape[:1] + (1,) * extra + (3,))
    nn = totals.reshape(tt.shape)
    return ridge_component(alpha[..., None] / nn, tt)


def _on_branch_cut(t, totals, alpha):
    alpha = np.asarray(alpha, dtype=float)
    return np.any((t == 0) & (alpha[..., None] / totals < -1), axis=-1)


def mle_ridge(counts: CountRecord, alpha: float) -> BlochVector:
    """Likelihood maximiser on the shell selected by Lagrange multiplier alpha."""
    c = _counts_array(counts)
    t, totals, _ = direct_vectors(c)
    if _on_branch_cut(t, totals, np.array([alpha]))[0]:
        raise BranchCutError("a zero sample mean with alpha below minus its shot count lies on the branch cut")
    return BlochVector.from_array(_ridge(t, totals, np.array([alpha]))[0])


# ---------------------------------------------------------------------------
# direct and scaled inversion


def direct_inversion(counts: CountRecord, eta: float = 1.0) -> Estimate:
    _check_eta(eta)
    t, _, _ = direct_vectors(_counts_array(counts))
    return Estimate(BlochVector.from_array(t[0] / eta), "direct")


def scaled_batch(counts: np.ndarray, eta: float = 1.0):
    t, _, _ = direct_vectors(counts)
    r = t / eta
    n = np.linalg.norm(r, axis=1, keepdims=True)
    r = np.where(n > 1.0, r / np.where(n > 0, n, 1.0), r)
    return r, np.zeros(len(r), dtype=np.int8), np.zeros(len(r))


def scaled_direct_inversion(counts: CountRecord, eta: float = 1.0) -> Estimate:
    _check_eta(eta)
    r, _, _ = scaled_batch(_counts_array(counts), eta)
    return Estimate(BlochVector.from_array(r[0]), "scaled")


# ---------------------------------------------------------------------------
# divergences


def kl_divergence(counts: CountRecord, r: VectorLike) -> float:
    """Kullback-Leibler divergence ln P(r_d) - ln P(r) of the count record."""
    c = _counts_array(counts)
    t, _, _ = direct_vectors(c)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = float(log_likelihood_terms(c[0], t[0]) - log_likelihood_terms(c[0], as_vector(r)))
    return max(value, 0.0) if math.isfinite(value) else math.inf


def fisher_distance(counts: CountRecord, r: VectorLike) -> float:
    """Quadratic approximation of the KL divergence with binomial error bars."""
    c = _counts_array(counts)
    t, _, err = direct_vectors(c)
    d = as_vector(r) - t[0]
    total = 0.0
    for di, ei in zip(d, err[0]):
        if ei == 0.0:
            if di != 0.0:
                return math.inf
        else:
            total += (di / ei) ** 2
    return 0.5 * total


# ---------------------------------------------------------------------------
# minimum Fisher-information distance


def fisher_batch(counts: np.ndarray, eta: float = 1.0):
    t, _, err = direct_vectors(counts)
    t = t / eta
    err = err / eta
    n = len(t)
    out = t.copy()
    status = np.zeros(n, dtype=np.int8)
    alpha = np.zeros(n)
    norms = np.linalg.norm(t, axis=1)
    outside = norms > 1.0
    pinned = err == 0.0
    pinned_norm = np.sqrt(np.sum(np.where(pinned, t, 0.0) ** 2, axis=1))

    fail = outside & (pinned_norm > 1.0 + 1e-12)
    status[fail] = NO_SOLUTION
    out[fail] = np.nan
    alpha[fail] = np.nan

    limit = outside & ~fail & (pinned_norm >= 1.0 - 1e-12)
    # the ridge only reaches the sphere as alpha -> infinity, where unpinned components vanish
    out[limit] = np.where(pinned[limit], t[limit], 0.0)
    alpha[limit] = np.inf

    solve = outside & ~fail & ~limit
    if np.any(solve):
        ts, es = t[solve], err[solve]

        def norm_fn(beta):
            a = _alpha_from_beta(beta)[:, None]
            return np.linalg.norm(ts / (1.0 + a * es * es), axis=1)

        m = len(ts)
        beta = _bisect_radius(norm_fn, 1.0, np.zeros(m), np.ones(m))
        a = _alpha_from_beta(beta)
        r = ts / (1.0 + a[:, None] * es * es)
        r /= np.linalg.norm(r, axis=1, keepdims=True)
        out[solve] = r
        alpha[solve] = a
    return out, status, alpha


def fisher_minimizer(counts: CountRecord, eta: float = 1.0) -> Estimate:
    _check_eta(eta)
    r, status, alpha = fisher_batch(_counts_array(counts), eta)
    st = STATUS_FROM_CODE[int(status[0])]
    vec = BlochVector.from_array(r[0]) if st is Status.OK else _nan_vector()
    return Estimate(vec, "fisher", st, float(alpha[0]))


# ---------------------------------------------------------------------------
# maximum likelihood with radial priors


def _scale(totals):
    return np.mean(totals, axis=1)


def _sphere_beta(t, totals, radius, lo, hi):
    scale = _scale(totals)

    def norm_fn(beta):
        a = _alpha_from_beta(beta) * scale
        return np.linalg.norm(_ridge(t, totals, a), axis=1)

    return _bisect_radius(norm_fn, radius, lo, hi)


def _ridge_objective(counts, t, totals, prior: Prior, eta, beta):
    """Log-likelihood plus log-prior along the ridge; beta has shape (n, G)."""
    a = _alpha_from_beta(beta) * _scale(totals)[:, None]
    s = _ridge(t, totals, a)
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = log_likelihood_terms(counts[:, None, :], s)
        # the shell end of the ridge lands on |s| = eta only to rounding; keep it inside the support
        lp = prior.log_radial_density(np.minimum(np.linalg.norm(s, axis=-1) / eta, 1.0 - 1e-15))
    val = ll + lp
    return np.where(np.isnan(val), -np.inf, val)


def _maximise_on_ridge(counts, t, totals, prior, eta, lo, hi):
    """Global 1-D maximisation of the ridge objective over beta in [lo, hi].

    A fixed scan locates the best bracket, golden-section search refines it.
    Near-ties (within TIE_TOL) resolve to the larger beta, i.e. the smaller
    radius; ``tie`` flags rows where that choice skipped a distinct maximum.
    """
    n = len(t)
    grid = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, SCAN_POINTS)[None, :]
    vals = _ridge_objective(counts, t, totals, prior, eta, grid)
    best = np.max(vals, axis=1)
    near = vals >= (best - TIE_TOL)[:, None]
    last = SCAN_POINTS - 1 - np.argmax(near[:, ::-1], axis=1)
    first = np.argmax(near, axis=1)
    tie = ((last - first) > 1) & np.isfinite(best)
    idx = last
    rows = np.arange(n)
    a = grid[rows, np.maximum(idx - 1, 0)]
    b = grid[rows, np.minimum(idx + 1, SCAN_POINTS - 1)]

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = _ridge_objective(counts, t, totals, prior, eta, c[:, None])[:, 0]
    fd = _ridge_objective(counts, t, totals, prior, eta, d[:, None])[:, 0]
    for _ in range(90):
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - inv_phi * (b - a)
        new_d = a + inv_phi * (b - a)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        f_new = _ridge_objective(counts, t, totals, prior, eta, np.where(left, new_c, new_d)[:, None])[:, 0]
        fc, fd = np.where(left, f_new, fd), np.where(left, fc, f_new)
        c, d = c_next, d_next
        if np.all(np.abs(b - a) < 1e-15):
            break
    refined = 0.5 * (a + b)
    f_ref = _ridge_objective(counts, t, totals, prior, eta, refined[:, None])[:, 0]
    beta = np.where(f_ref >= best, refined, grid[rows, idx])
    value = np.maximum(f_ref, best)
    return beta, value, tie


def mle_batch(counts: np.ndarray, prior: Prior, eta: float = 1.0, reduce: bool = True):
    """Prior-aware MLE for many count records.

    Returns platonic vectors (n, 3), status codes, multipliers alpha and the
    tie flags of the global search.  With ``reduce`` the search runs once per
    canonical record; priors are isotropic, so axis permutations and sign
    flips map estimates onto each other.
    """
    counts = np.atleast_2d(np.asarray(counts, dtype=float))
    if not reduce:
        return _mle_rows(counts, prior, eta)
    canon, signs, perm = canonicalize(counts)
    uniq, inverse = np.unique(canon, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    r, status, alpha, tie = _mle_rows(uniq, prior, eta)
    return restore_vectors(r[inverse], signs, perm), status[inverse], alpha[inverse], tie[inverse]


def _mle_rows(counts: np.ndarray, prior: Prior, eta: float):
    t, totals, _ = direct_vectors(counts)
    n = len(t)
    R = float(eta)
    norms = np.linalg.norm(t, axis=1)
    scale = _scale(totals)
    beta = np.zeros(n)
    status = np.zeros(n, dtype=np.int8)
    tie = np.zeros(n, dtype=bool)
    cls = prior.prior_class
    exact = np.abs(norms - R) <= 1e-15
    outside = (norms > R) & ~exact
    inside = (norms < R) & ~exact

    if cls is PriorClass.UNIFORM:
        if np.any(outside):
            beta[outside] = _sphere_beta(t[outside], totals[outside], R, np.zeros(outside.sum()),
                                         np.ones(outside.sum()))
    elif cls is PriorClass.PURE_PEAKED:
        if np.any(outside):
            beta[outside] = _sphere_beta(t[outside], totals[outside], R, np.zeros(outside.sum()),
                                         np.ones(outside.sum()))
        if np.any(inside):
            beta[inside] = _sphere_beta(t[inside], totals[inside], R, -np.ones(inside.sum()),
                                        np.zeros(inside.sum()))
        zeros = np.sum(t == 0, axis=1)
        status[zeros >= 2] = NOT_UNIQUE
    else:
        lo = np.zeros(n)
        hi = np.full(n, 1.0 - 1e-12)
        if np.any(outside):
            lo[outside] = _sphere_beta(t[outside], totals[outside], R, np.zeros(outside.sum()),
                                       np.ones(outside.sum()))
        search = np.ones(n, dtype=bool)
        if cls is PriorClass.MONOTONIC_PURE_BIASED:
            # outside: the sphere crossing; on the sphere: r_d; inside: alpha in [alpha_sphere, 0]
            search = inside
            if np.any(inside):
                lo[inside] = _sphere_beta(t[inside], totals[inside], R, -np.ones(inside.sum()),
                                          np.zeros(inside.sum()))
                hi[inside] = 0.0
            beta[outside] = lo[outside]
        elif cls is PriorClass.NON_MONOTONIC:
            if np.any(inside):
                lo[inside] = _sphere_beta(t[inside], totals[inside], R, -np.ones(inside.sum()),
                                          np.zeros(inside.sum()))
        if np.any(search):
            b, _, tie_s = _maximise_on_ridge(counts[search], t[search], totals[search], prior, eta,
                                             lo[search], hi[search])
            beta[search] = b
            tie[search] = tie_s

    alpha = _alpha_from_beta(beta) * scale
    cut = _on_branch_cut(t, totals, alpha)
    status[(status == OK) & cut] = NOT_UNIQUE
    s = _ridge(t, totals, alpha)
    # bisection leaves the shell solutions within rounding of |s| = R; snap them onto it
    on_sphere = outside.copy()
    if cls is PriorClass.PURE_PEAKED:
        on_sphere |= inside
    elif cls is not PriorClass.UNIFORM:
        on_sphere &= np.abs(beta - lo) <= 1e-13
    on_sphere &= status == OK
    if np.any(on_sphere):
        sn = np.linalg.norm(s[on_sphere], axis=1, keepdims=True)
        s[on_sphere] = s[on_sphere] * (R / sn)
    s[exact] = t[exact]
    alpha[exact] = 0.0
    r = s / eta
    bad = status != OK
    r[bad] = np.nan
    if np.any(~np.isfinite(r[~bad])):
        raise NumericalError("non-finite MLE result")
    return r, status, alpha, tie


def mle(counts: CountRecord, prior: Prior, eta: float = 1.0) -> Estimate:
    """Maximum of likelihood x prior, searched along the constrained ridge."""
    _check_eta(eta)
    c = _counts_array(counts)
    r, status, alpha, tie = mle_batch(c, prior, eta)
    st = STATUS_FROM_CODE[int(status[0])]
    vec = BlochVector.from_array(r[0]) if st is Status.OK else _nan_vector()
    diag = {"prior": prior.name, "prior_class": prior.prior_class.value}
    if tie[0]:
        diag["near_tie"] = True
    return Estimate(vec, "mle", st, float(alpha[0]), diagnostics=diag)


# ---------------------------------------------------------------------------
# MLE for arbitrary measurement axes


def _axes_objective(r, A, up, down, lam):
    p = r @ A.T
    bad = np.any(((up > 0) & (p <= -1.0)) | ((down > 0) & (p >= 1.0)), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sum(xlog1py(up, p) + xlog1py(down, -p), axis=1) - 0.5 * lam * np.sum(r * r, axis=1)
    return np.where(bad | np.isnan(val), -np.inf, val)


def _newton_penalised(r, A, up, down, lam, iterations, escape=np.inf):
    """Damped Newton ascent on loglik - lam |r|^2 / 2, vectorised over rows."""
    n = len(r)
    converged = np.zeros(n, dtype=bool)
    eye = np.eye(3)
    val = _axes_objective(r, A, up, down, lam)
    for _ in range(iterations):
        act = ~converged
        if not np.any(act):
            break
        ra, ua, da, la = r[act], up[act], down[act], lam[act]
        p = ra @ A.T
        with np.errstate(divide="ignore", invalid="ignore"):
            wu = np.where(ua > 0, ua / (1.0 + p), 0.0)
            wd = np.where(da > 0, da / (1.0 - p), 0.0)
            h = np.where(ua > 0, wu / (1.0 + p), 0.0) + np.where(da > 0, wd / (1.0 - p), 0.0)
        grad = (wu - wd) @ A - la[:, None] * ra
        H = np.einsum("nm,mi,mj->nij", h, A, A) + la[:, None, None] * eye
        # pinned data flatten the curvature along escaping directions; keep the system solvable
        H += (1e-12 * (1.0 + np.trace(H, axis1=1, axis2=2)))[:, None, None] * eye
        step = np.linalg.solve(H, grad[:, :, None])[:, :, 0]
        dec = np.sum(grad * step, axis=1)
        done = dec < 1e-24
        s = np.ones(len(ra))
        va = val[act]
        new_r = ra.copy()
        new_v = va.copy()
        pending = ~done
        for _ in range(60):
            if not np.any(pending):
                break
            cand = ra[pending] + s[pending, None] * step[pending]
            cv = _axes_objective(cand, A, ua[pending], da[pending], la[pending])
            okay = cv >= va[pending] + 1e-4 * s[pending] * dec[pending]
            idx = np.flatnonzero(pending)
            acc = idx[okay]
            new_r[acc] = cand[okay]
            new_v[acc] = cv[okay]
            pending[acc] = False
            s[pending] *= 0.5
        stalled = pending
        # unbounded directions only occur without the penalty; such rows end up on the sphere
        escaped = np.linalg.norm(new_r, axis=1) > escape
        r[act] = new_r
        val[act] = new_v
        conv = np.zeros(n, dtype=bool)
        # quadratic convergence: an accepted step below 1e-10 leaves an error near 1e-20
        small = np.max(np.abs(new_r - ra), axis=1) < 1e-10
        conv[act] = done | stalled | escaped | small
        converged |= conv
    return r, converged


def _flat_mle_frame(counts, radius):
    t, totals, _ = direct_vectors(counts)
    s = t.copy()
    out = np.linalg.norm(t, axis=1) > radius
    if np.any(out):
        beta = _sphere_beta(t[out], totals[out], radius, np.zeros(out.sum()), np.ones(out.sum()))
        ridge = _ridge(t[out], totals[out], _alpha_from_beta(beta) * _scale(totals[out]))
        s[out] = ridge * (radius / np.linalg.norm(ridge, axis=1, keepdims=True))
    return s


def general_axes_batch(A: np.ndarray, up: np.ndarray, down: np.ndarray, radius: float = 1.0):
    """Flat-prior MLE over |r| <= radius for arbitrary unit axes A (M, 3).

    The interior maximiser is found by Newton ascent; otherwise the ball
    constraint is active and the multiplier of the penalised problem
    loglik - lam |r|^2 / 2 is bisected until the maximiser has |r| = radius.
    Rows whose measured axes do not span three dimensions fail.
    """
    A = np.asarray(A, dtype=float)
    up = np.asarray(up, dtype=float)
    down = np.asarray(down, dtype=float)
    n = len(up)
    out = np.full((n, 3), np.nan)
    status = np.full(n, NO_SOLUTION, dtype=np.int8)
    measured = (up + down) > 0
    rank_ok = np.zeros(n, dtype=bool)
    for pattern in np.unique(measured, axis=0):
        rows = np.all(measured == pattern, axis=1)
        if pattern.any() and np.linalg.matrix_rank(A[pattern], tol=1e-9) == 3:
            rank_ok[rows] = True
    if not np.any(rank_ok):
        return out, status
    ua, da = up[rank_ok], down[rank_ok]
    if A.shape == (3, 3) and np.allclose(A @ A.T, np.eye(3), rtol=0, atol=1e-12):
        # orthonormal axes separate the likelihood: the Cartesian ridge solver is exact in that frame
        frame = np.empty((len(ua), 6))
        frame[:, 0::2] = ua
        frame[:, 1::2] = da
        r_frame = _flat_mle_frame(frame, radius)
        out[rank_ok] = r_frame @ A
        status[rank_ok] = OK
        return out, status
    m = len(ua)
    r0 = np.zeros((m, 3))
    r_int, conv = _newton_penalised(r0, A, ua, da, np.zeros(m), 200, escape=2.0 * radius)
    norms = np.linalg.norm(r_int, axis=1)
    interior = conv & (norms <= radius) & np.isfinite(norms)
    res = np.where(interior[:, None], r_int, np.nan)

    sph = ~interior
    if np.any(sph):
        us, ds = ua[sph], da[sph]
        k = len(us)
        total = np.sum(us + ds, axis=1)
        lo = np.log(total) - 40.0
        hi = np.log(total) + 40.0
        r_lo = np.zeros((k, 3))
        r_hi, _ = _newton_penalised(np.zeros((k, 3)), A, us, ds, np.exp(hi), 100)
        for _ in range(70):
            mid = 0.5 * (lo + hi)
            start = r_hi.copy()
            r_mid, _ = _newton_penalised(start, A, us, ds, np.exp(mid), 100)
            big = np.linalg.norm(r_mid, axis=1) > radius
            lo = np.where(big, mid, lo)
            hi = np.where(big, hi, mid)
            r_hi = np.where(big[:, None], r_hi, r_mid)
            r_lo = np.where(big[:, None], r_mid, r_lo)
        nn = np.linalg.norm(r_hi, axis=1, keepdims=True)
        res[sph] = r_hi * (radius / np.where(nn > 0, nn, 1.0))
    good = np.all(np.isfinite(res), axis=1)
    idx = np.flatnonzero(rank_ok)
    out[idx[good]] = res[good]
    status[idx[good]] = OK
    return out, status


def general_axes_mle(axes, counts_per_axis, eta: float = 1.0) -> Estimate:
    """Flat-prior MLE for counts ``[(up, down), ...]`` along ``axes.vectors``."""
    _check_eta(eta)
    A = np.asarray(axes.vectors, dtype=float)
    c = np.asarray(counts_per_axis, dtype=float)
    if c.shape != (len(A), 2):
        raise DomainError(f"need one (up, down) pair per axis, got shape {c.shape}")
    if np.any(c < 0):
        raise DomainError("counts must be non-negative")
    r, status = general_axes_batch(A, c[None, :, 0], c[None, :, 1], radius=eta)
    st = STATUS_FROM_CODE[int(status[0])]
    vec = BlochVector.from_array(r[0] / eta) if st is Status.OK else _nan_vector()
    return Estimate(vec, "mle_general", st)
