"""Slow reference computations used to check the fast paths.

* Gauss-Hermite product moments of a (at most bivariate) normal.
* Nested quadrature of the marginal likelihood for models with at most two
  coefficients: the coefficient integral is done exactly (Gaussian algebra
  plus a Gauss-Hermite moment), then tensor Gauss-Legendre over
  ``(log tau, log sigma2)``.
* Importance-sampling Monte Carlo estimate of the same marginal.
* Central finite differences with Richardson extrapolation.
* Monte Carlo checks of the chi-square tail bounds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import optimize, stats
from scipy.special import gammaln, logsumexp

from .data import Dataset, ModelIndex
from .errors import DimensionTooLarge, NonConvergedQuadrature
from .priors import LOG_2PI, HyperConfig, log_dk

MAX_EXACT_DIM = 2


class QuadratureAccuracyWarning(UserWarning):
    """Node doubling moved the quadrature estimate by more than the tolerance."""


@dataclass(frozen=True)
class QuadratureConfig:
    hermite_nodes: int = 64
    outer_nodes: int = 120
    log_box: float = 30.0
    mass_cut: float = 1e-12
    check_doubling: bool = False
    doubling_rtol: float = 1e-4

    def __post_init__(self):
        if self.hermite_nodes < 16 or self.outer_nodes < 16:
            raise ValueError("node counts must be >= 16")
        if not (0 < self.log_box < 700):
            raise ValueError("log_box must be finite and positive")


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    box: tuple
    rel_change: Optional[float] = None
    warning: Optional[str] = None


def _hermite(nodes: int):
    z, w = np.polynomial.hermite.hermgauss(nodes)
    return z * math.sqrt(2.0), np.log(w) - 0.5 * math.log(math.pi)


def _log_product_moment(mu, chol, r: int, nodes: int):
    """log E[prod beta_i^(2r)] for beta ~ N(mu, chol chol'), batched.

    ``mu`` has shape (..., k) and ``chol`` (..., k, k) with k in {1, 2}.  Sums
    run in linear space after dividing by a per-point scale.
    """
    z, lw = _hermite(nodes)
    w = np.exp(lw)
    k = mu.shape[-1]
    scale = np.max(np.abs(mu), axis=-1) + np.sqrt(np.sum(chol ** 2, axis=(-2, -1)))
    b1 = (mu[..., 0:1] + chol[..., 0, 0:1] * z) / scale[..., None]
    p1 = (b1 * b1) ** r
    if k == 1:
        total = p1 @ w
    else:
        c = (mu[..., 1:2] + chol[..., 1, 0:1] * z) / scale[..., None]
        d = chol[..., 1, 1] / scale
        b2 = c[..., :, None] + d[..., None, None] * z
        inner = ((b2 * b2) ** r) @ w
        total = np.sum(p1 * inner * w, axis=-1)
    with np.errstate(divide="ignore"):
        return np.log(total) + 2 * r * k * np.log(scale)


def gaussian_product_moment(mu, cov, r: int, nodes: int = 64) -> float:
    """E[prod_i beta_i^(2r)] under N(mu, cov) by tensor Gauss-Hermite."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if mu.size > MAX_EXACT_DIM:
        raise DimensionTooLarge(f"dimension {mu.size} > {MAX_EXACT_DIM}")
    if mu.size == 0:
        return 1.0
    chol = np.linalg.cholesky(cov)
    return float(np.exp(_log_product_moment(mu, chol, r, nodes)))


def normal_moment_1d(mu: float, var: float, r: int) -> float:
    """Closed-form E[beta^(2r)] for beta ~ N(mu, var) (binomial expansion)."""
    total = 0.0
    for j in range(0, r + 1):
        # E[Z^(2j)] = (2j-1)!!
        dfact = math.prod(range(2 * j - 1, 0, -2))
        total += math.comb(2 * r, 2 * j) * mu ** (2 * r - 2 * j) * var ** j * dfact
    return total


class _Integrand:
    """log of the (beta-integrated) joint density as a function of (log tau, log sigma2)."""

    def __init__(self, dataset: Dataset, model: ModelIndex, cfg: HyperConfig):
        self.cfg = cfg
        self.k = k = len(model)
        self.n = dataset.n
        xk = dataset.x[:, list(model)]
        self.xtx = xk.T @ xk
        self.xty = xk.T @ dataset.y
        self.yty = float(dataset.y @ dataset.y)

    def log_prior_tau(self, log_tau):
        n = self.n
        return 0.5 * math.log(n / 2.0) - gammaln(0.5) - 1.5 * log_tau - 0.5 * n * np.exp(-log_tau)

    def log_prior_sig(self, log_sig):
        a1, a2 = self.cfg.alpha1, self.cfg.alpha2
        return a1 * math.log(a2) - gammaln(a1) - (a1 + 1.0) * log_sig - a2 * np.exp(-log_sig)

    def __call__(self, log_tau, log_sig, hermite_nodes):
        """Grid evaluation; ``log_tau`` is 1-D (len T), ``log_sig`` 1-D (len S).

        Returns an array (T, S) including the Jacobian of the log transform.
        """
        k, n, r, cfg = self.k, self.n, self.cfg.r, self.cfg
        lt = np.atleast_1d(log_tau)[:, None]
        if not cfg.hierarchical:
            lt = np.full_like(lt, math.log(cfg.fixed_tau))
        ls = np.atleast_1d(log_sig)[None, :]
        out = (-0.5 * n * (LOG_2PI + ls) + self.log_prior_sig(ls) + ls)
        if cfg.hierarchical:
            out = out + self.log_prior_tau(lt) + lt
        if k == 0:
            return out - self.yty / (2.0 * np.exp(ls)) + 0.0 * lt
        tau = np.exp(lt[:, 0])
        eye = np.eye(k)
        c = self.xtx[None] + eye[None] / tau[:, None, None]
        cinv = np.linalg.inv(c)
        m = cinv @ self.xty
        resid_ss = self.yty - m @ self.xty
        _, logdet_c = np.linalg.slogdet(c)
        chol_cinv = np.linalg.cholesky(cinv)
        sig = np.exp(ls[0])
        # E over beta ~ N(m(tau), sigma2 * C(tau)^-1)
        mus = np.broadcast_to(m[:, None, :], (tau.size, sig.size, k))
        chols = chol_cinv[:, None] * np.sqrt(sig)[None, :, None, None]
        log_e = _log_product_moment(mus, chols, r, hermite_nodes)
        inner = (log_dk(k, r) - (r * k + 0.5 * k) * (lt + ls) + 0.5 * k * ls
                 - 0.5 * logdet_c[:, None] - resid_ss[:, None] / (2.0 * np.exp(ls)) + log_e)
        return out + inner


def _gauss_legendre(lo, hi, nodes):
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), np.log(w * half)


def _find_box(integrand, hier, cfg_q: QuadratureConfig, herm):
    """Bounding box (in log coordinates) of the region within 45 nats of the peak."""
    cut = 45.0
    lo_t, hi_t = (-cfg_q.log_box, cfg_q.log_box) if hier else (0.0, 0.0)
    lo_s, hi_s = -cfg_q.log_box, cfg_q.log_box
    for attempt in range(6):
        gt = np.linspace(lo_t, hi_t, 161) if hier else np.zeros(1)
        gs = np.linspace(lo_s, hi_s, 161)
        vals = integrand(gt, gs, herm)
        keep = vals >= np.nanmax(vals) - cut
        it, is_ = np.nonzero(keep)
        low_t = hier and it.min() == 0
        high_t = hier and it.max() == gt.size - 1
        low_s, high_s = is_.min() == 0, is_.max() == gs.size - 1
        if low_t or high_t or low_s or high_s:
            if attempt == 0:
                raise NonConvergedQuadrature("integrand mass reaches the widest box")
            wt, ws = 0.25 * (hi_t - lo_t), 0.25 * (hi_s - lo_s)
            lo_t, hi_t = lo_t - wt * low_t, hi_t + wt * high_t
            lo_s, hi_s = lo_s - ws * low_s, hi_s + ws * high_s
            continue
        step_t = (gt[1] - gt[0]) if hier else 0.0
        step_s = gs[1] - gs[0]
        box = (gt[it.min()] - step_t, gt[it.max()] + step_t,
               gs[is_.min()] - step_s, gs[is_.max()] + step_s)
        if attempt >= 2:
            return box
        lo_t, hi_t, lo_s, hi_s = box
    raise NonConvergedQuadrature("could not settle the integration box")


def _integrate(integrand, box, hier, outer, herm, mass_cut):
    lo_t, hi_t, lo_s, hi_s = box
    xs, lws = _gauss_legendre(lo_s, hi_s, outer)
    if hier:
        xt, lwt = _gauss_legendre(lo_t, hi_t, outer)
    else:
        xt, lwt = np.zeros(1), np.zeros(1)
    rows = []
    for i in range(xt.size):
        rows.append(integrand(xt[i:i + 1], xs, herm)[0] + lws + lwt[i])
    grid = np.array(rows)
    total = logsumexp(grid)
    edge = max(np.max(grid[:, [0, -1]]), np.max(grid[[0, -1], :]) if hier else -np.inf)
    if edge - total > math.log(mass_cut):
        raise NonConvergedQuadrature("integrand not negligible on the box boundary")
    return float(total)


def quadrature_log_marginal(dataset: Dataset, model: ModelIndex, cfg: HyperConfig,
                            qcfg: Optional[QuadratureConfig] = None,
                            full: bool = False):
    """Log marginal likelihood of a model with at most two coefficients by quadrature.

    With ``qcfg.check_doubling`` the computation is repeated with doubled node
    counts; a relative change above ``doubling_rtol`` attaches a warning.
    """
    qcfg = qcfg or QuadratureConfig()
    if len(model) > MAX_EXACT_DIM:
        raise DimensionTooLarge(f"model size {len(model)} > {MAX_EXACT_DIM}")
    integrand = _Integrand(dataset, model, cfg)
    hier = cfg.hierarchical
    if len(model) == 0:
        from .laplace import log_marginal_null
        value = log_marginal_null(dataset, cfg)
        return QuadratureResult(value, ()) if full else value
    box = _find_box(integrand, hier, qcfg, 2 * cfg.r + 1)
    value = _integrate(integrand, box, hier, qcfg.outer_nodes, qcfg.hermite_nodes, qcfg.mass_cut)
    rel, msg = None, None
    if qcfg.check_doubling:
        herm2 = qcfg.hermite_nodes * 2 if len(model) < 2 else qcfg.hermite_nodes
        value2 = _integrate(integrand, box, hier, qcfg.outer_nodes * 2, herm2, qcfg.mass_cut)
        rel = abs(value2 - value) / max(abs(value2), 1e-300)
        if rel > qcfg.doubling_rtol:
            msg = f"node doubling changed the log marginal by {rel:.2e} (relative)"
            warnings.warn(msg, QuadratureAccuracyWarning, stacklevel=2)
    if full:
        return QuadratureResult(value, box, rel, msg)
    return value


# ---------------------------------------------------------------------------
# Monte Carlo importance sampling


def _log_joint_batch(theta, xk, y, cfg: HyperConfig):
    """Log joint density in (beta, log tau, log sigma2) including the log Jacobian."""
    k = xk.shape[1]
    n = y.size
    beta = theta[:, :k]
    lt, ls = theta[:, k], theta[:, k + 1]
    tau, sig = np.exp(lt), np.exp(ls)
    resid = y[None, :] - beta @ xk.T
    rss = np.einsum("ij,ij->i", resid, resid)
    ss = np.einsum("ij,ij->i", beta, beta)
    r, a1, a2 = cfg.r, cfg.alpha1, cfg.alpha2
    with np.errstate(divide="ignore"):
        lbeta = 2 * r * np.sum(np.log(np.abs(beta)), axis=1)
    out = (log_dk(k, r) - 0.5 * k * LOG_2PI - (r * k + 0.5 * k) * (lt + ls)
           - ss / (2 * tau * sig) + lbeta
           - 0.5 * n * (LOG_2PI + ls) - rss / (2 * sig)
           + a1 * math.log(a2) - gammaln(a1) - (a1 + 1) * ls - a2 / sig
           + 0.5 * math.log(n / 2.0) - gammaln(0.5) - 1.5 * lt - n / (2 * tau)
           + lt + ls)
    return out


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: float
    stderr: float
    draws: int


def mc_log_marginal(dataset: Dataset, model: ModelIndex, cfg: HyperConfig,
                    draws: int = 1_000_000, seed: int = 0, df: float = 4.0,
                    batch: int = 200_000) -> MonteCarloEstimate:
    """Importance-sampling estimate of the log marginal (hierarchical tau only).

    The proposal is an equal mixture of multivariate t densities centred at
    the posterior mode of every sign orthant, with scale from a numerically
    differentiated Hessian.  ``stderr`` is the delta-method standard error of
    the log estimate.
    """
    if not cfg.hierarchical:
        raise ValueError("mc_log_marginal covers the hierarchical prior only")
    k = len(model)
    if k == 0 or k > MAX_EXACT_DIM:
        raise DimensionTooLarge("mc_log_marginal needs 1 <= |model| <= 2")
    xk = dataset.x[:, list(model)]
    y = dataset.y

    def neg(theta):
        return -_log_joint_batch(theta[None, :], xk, y, cfg)[0]

    beta0 = np.linalg.lstsq(xk, y, rcond=None)[0]
    comps = []
    for signs in np.array(np.meshgrid(*[[1.0, -1.0]] * k)).T.reshape(-1, k):
        start = np.concatenate([np.abs(beta0) * signs + 1e-3 * signs, [0.0, 0.0]])
        start[k + 1] = math.log(max(np.var(y - xk @ beta0), 1e-3))
        res = optimize.minimize(neg, start, method="Nelder-Mead",
                                options={"xatol": 1e-9, "fatol": 1e-11, "maxiter": 40000})
        mode = res.x
        hess = -fd_hessian(lambda t: -neg(t), mode)
        cov = np.linalg.inv(0.5 * (hess + hess.T))
        comps.append((mode, cov))
    rng = np.random.default_rng(seed)
    dim = k + 2
    dists = [stats.multivariate_t(loc=m, shape=c, df=df) for m, c in comps]
    sums = []
    done = 0
    while done < draws:
        m = min(batch, draws - done)
        which = rng.integers(len(dists), size=m)
        theta = np.empty((m, dim))
        for j, dist in enumerate(dists):
            sel = which == j
            if np.any(sel):
                theta[sel] = dist.rvs(size=int(sel.sum()), random_state=rng).reshape(-1, dim)
        log_q = logsumexp(np.stack([d.logpdf(theta) for d in dists]), axis=0) - math.log(len(dists))
        sums.append(_log_joint_batch(theta, xk, y, cfg) - log_q)
        done += m
    logw = np.concatenate(sums)
    shift = logw.max()
    w = np.exp(logw - shift)
    mean = w.mean()
    se = w.std(ddof=1) / math.sqrt(w.size)
    return MonteCarloEstimate(float(shift + math.log(mean)), float(se / mean), int(w.size))


# ---------------------------------------------------------------------------
# finite differences


def _fd_step(x, rel=1e-4):
    return rel * np.maximum(1.0, np.abs(x))


def fd_gradient(func: Callable, x, rel_step: float = 1e-4) -> np.ndarray:
    """Central differences with one Richardson extrapolation (error O(h^4))."""
    x = np.asarray(x, dtype=float)
    h = _fd_step(x, rel_step)
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        d1 = (func(x + e) - func(x - e)) / (2 * h[i])
        d2 = (func(x + e / 2) - func(x - e / 2)) / h[i]
        out[i] = (4 * d2 - d1) / 3
    return out


def fd_jacobian(func: Callable, x, rel_step: float = 1e-4) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    h = _fd_step(x, rel_step)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        d1 = (np.asarray(func(x + e)) - np.asarray(func(x - e))) / (2 * h[i])
        d2 = (np.asarray(func(x + e / 2)) - np.asarray(func(x - e / 2))) / h[i]
        cols.append((4 * d2 - d1) / 3)
    return np.column_stack(cols)


def fd_hessian(func: Callable, x, rel_step: float = 1e-3) -> np.ndarray:
    """Hessian of a scalar function from finite differences of its FD gradient."""
    jac = fd_jacobian(lambda z: fd_gradient(func, z, rel_step), x, rel_step)
    return 0.5 * (jac + jac.T)


def max_relative_deviation(analytic, numeric, floor: float = 1e-8) -> float:
    """Worst entrywise ``|a - b| / max(|a|, |b|, floor * max|b|, floor)``."""
    a = np.asarray(analytic, dtype=float)
    b = np.asarray(numeric, dtype=float)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor * max(np.max(np.abs(b)), 1.0))
    return float(np.max(np.abs(a - b) / scale))


def finite_difference_check(kind: str, func: Callable, x, analytic) -> float:
    """Compare an analytic derivative with finite differences.

    ``kind="gradient"``: ``func`` is the scalar function and ``analytic`` its
    gradient at ``x``.  ``kind="hessian"``: ``func`` is the gradient function
    and ``analytic`` the Hessian (Jacobian of ``func``).  Returns the worst
    relative deviation.
    """
    if kind == "gradient":
        numeric = fd_gradient(func, x)
    elif kind == "hessian":
        numeric = fd_jacobian(func, x)
    else:
        raise ValueError(f"kind must be 'gradient' or 'hessian', got {kind!r}")
    return max_relative_deviation(analytic, numeric)


# ---------------------------------------------------------------------------
# chi-square tails


@dataclass(frozen=True)
class TailCheckReport:
    dof: int
    noncentrality: float
    a: float
    empirical_prob: float
    bound: float
    stated_bound: Optional[float]
    draws: int

    @property
    def stderr(self) -> float:
        pr = self.empirical_prob
        return math.sqrt(max(pr * (1 - pr), 0.0) / self.draws)

    @property
    def passed(self) -> bool:
        return self.empirical_prob <= self.bound + 3 * self.stderr


def central_tail_bound(dof: int, a: float) -> float:
    """Two-sided bound ``2 exp(-a^2 / (4 (p + a)))`` proved by the Chernoff argument."""
    return 2.0 * math.exp(-a * a / (4.0 * (dof + a)))


def central_tail_bound_stated(dof: int, a: float) -> float:
    """The sharper ``2 exp(-a^2 / (4 p))`` form, reported for comparison only."""
    return 2.0 * math.exp(-a * a / (4.0 * dof))


def noncentral_tail_bound(dof: int, lam: float, a: float) -> float:
    """Upper-tail bound for ``chi2_p(lam) - (p + lam) > a``."""
    u = a / (dof + lam)
    return math.exp(-0.5 * dof * (u - math.log1p(u)))


def chisq_tail_check(dof: int, a: float, noncentrality: float = 0.0,
                     draws: int = 1_000_000, seed: int = 0) -> TailCheckReport:
    """Empirical exceedance probability against the chi-square tail bound.

    Central (``noncentrality == 0``): two-sided ``|X - p| > a``.
    Noncentral: upper tail ``X - (p + lam) > a``.
    """
    if draws < 100_000:
        raise ValueError("draws must be >= 1e5")
    if not a > 0:
        raise ValueError("a must be positive")
    rng = np.random.default_rng(seed)
    if noncentrality == 0:
        x = rng.chisquare(dof, size=draws)
        emp = float(np.mean(np.abs(x - dof) > a))
        bound = central_tail_bound(dof, a)
        stated = central_tail_bound_stated(dof, a)
    else:
        x = rng.noncentral_chisquare(dof, noncentrality, size=draws)
        emp = float(np.mean(x - (dof + noncentrality) > a))
        bound = noncentral_tail_bound(dof, noncentrality, a)
        stated = None
    return TailCheckReport(dof, float(noncentrality), float(a), emp, bound, stated, draws)
