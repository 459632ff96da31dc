"""Posterior mode, analytic derivatives and the Laplace log marginal likelihood.

The optimizer works in ``theta = (beta, log tau, log sigma2)`` (``log tau``
is absent when tau is fixed) so that the scales stay positive.  The Hessian
used in the Laplace formula is taken in the original ``(beta, tau, sigma2)``
coordinates.  Because the gradient vanishes at the mode, the two Hessians
differ only by the diagonal Jacobian ``diag(1, tau, sigma2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import gammaln

from .data import Dataset, ModelIndex
from .errors import (ModelTooLarge, NonConvergence, NonPositiveScale,
                     SingularDesign, ZeroCoefficient)
from . import _kernels
from .priors import (LOG_2PI, ZERO_COEF_TOL, HyperConfig, log_dk,
                     log_model_prior)

GRAD_TOL = 1e-6
MAX_ITER = 200
ARMIJO = 1e-4
RIDGE = 1e-6
BETA_NUDGE = 1e-3


@dataclass
class ParamPoint:
    beta: np.ndarray
    tau: float
    sigma2: float

    def __post_init__(self):
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if not self.tau > 0:
            raise NonPositiveScale(f"tau must be positive, got {self.tau}")
        if not self.sigma2 > 0:
            raise NonPositiveScale(f"sigma2 must be positive, got {self.sigma2}")
        if np.any(np.abs(self.beta) < ZERO_COEF_TOL):
            raise ZeroCoefficient(f"coefficient at the pMOM pole: {self.beta}")

    def as_tuple(self):
        return self.beta, self.tau, self.sigma2


@dataclass
class ModeResult:
    """Converged posterior mode of one model.

    ``hessian`` is minus the Hessian of the log joint in original coordinates
    (the matrix ``V`` of the Laplace formula), of size ``k + 2`` under the
    hierarchical prior and ``k + 1`` with tau fixed.
    """

    point: ParamPoint
    objective: float
    hessian: np.ndarray
    converged: bool
    iterations: int
    grad_norm: float
    tolerance: float
    history: List[float] = field(default_factory=list, repr=False)


@dataclass(frozen=True)
class ScoredModel:
    model: ModelIndex
    log_marginal: float
    log_prior: float

    @property
    def log_posterior_unnorm(self) -> float:
        return self.log_marginal + self.log_prior

    @property
    def size(self) -> int:
        return len(self.model)


class _Problem:
    """Sufficient statistics for one (dataset, model) and thin wrappers over the kernels."""

    def __init__(self, dataset: Dataset, model: ModelIndex, cfg: HyperConfig):
        self.cfg = cfg
        self.model = tuple(model)
        self.k = k = len(model)
        self.n = n = dataset.n
        self.xk = np.ascontiguousarray(dataset.x[:, list(model)])
        self.y = dataset.y
        self.xtx = self.xk.T @ self.xk
        self.xty = self.xk.T @ self.y
        self.hier = cfg.hierarchical
        self.r = r = cfg.r
        self.fixed_tau = 1.0 if self.hier else float(cfg.fixed_tau)
        self.a_tau = r * k + 0.5 * k + (1.5 if self.hier else 0.0)
        self.n_tau = float(n) if self.hier else 0.0
        self.a_sig = r * k + 0.5 * (n + k) + cfg.alpha1 + 1.0
        const = (log_dk(k, r) - 0.5 * (n + k) * LOG_2PI
                 + cfg.alpha1 * math.log(cfg.alpha2) - gammaln(cfg.alpha1))
        if self.hier:
            const += 0.5 * math.log(n / 2.0) - gammaln(0.5)
        else:
            const -= self.a_tau * math.log(cfg.fixed_tau)
        self.const = const
        self.dim = k + (2 if self.hier else 1)

    def _args(self):
        return self.r, self.a_tau, self.n_tau, self.a_sig, self.cfg.alpha2

    def unpack(self, theta):
        k = self.k
        beta = np.asarray(theta[:k], dtype=float)
        if self.hier:
            return beta, math.exp(theta[k]), math.exp(theta[k + 1])
        return beta, self.fixed_tau, math.exp(theta[k])

    def pack(self, beta, tau, sigma2):
        tail = [math.log(tau), math.log(sigma2)] if self.hier else [math.log(sigma2)]
        return np.concatenate([np.asarray(beta, dtype=float), tail])

    def value(self, beta, tau, sigma2):
        beta = np.asarray(beta, dtype=float)
        if np.any(np.abs(beta) < ZERO_COEF_TOL):
            raise ZeroCoefficient(f"coefficient at the pMOM pole: {beta}")
        return float(_kernels.log_joint_value(self.xk, self.y, beta, float(tau), float(sigma2),
                                              *self._args(), self.const, self.hier))

    def grad_original(self, beta, tau, sigma2):
        beta = np.asarray(beta, dtype=float)
        return _kernels.grad_original(self.xk, self.y, beta, float(tau), float(sigma2),
                                      *self._args(), self.hier)

    def hess_original(self, beta, tau, sigma2):
        """Hessian of the log joint (not its negative) in (beta, tau, sigma2)."""
        beta = np.asarray(beta, dtype=float)
        return _kernels.hess_original(self.xk, self.y, self.xtx, beta, float(tau), float(sigma2),
                                      *self._args(), self.hier)

    def jacobian_diag(self, tau, sigma2):
        tail = [tau, sigma2] if self.hier else [sigma2]
        return np.concatenate([np.ones(self.k), tail])

    def grad_theta(self, theta):
        point = self.unpack(theta)
        return self.grad_original(*point) * self.jacobian_diag(point[1], point[2])

    def initial_point(self):
        k, n = self.k, self.n
        try:
            beta = np.linalg.solve(self.xtx + RIDGE * n * np.eye(k), self.xty)
        except np.linalg.LinAlgError:
            raise SingularDesign(f"ridge system singular for model {self.model}") from None
        small = np.abs(beta) < BETA_NUDGE
        beta[small] = np.where(beta[small] < 0, -BETA_NUDGE, BETA_NUDGE)
        resid = self.y - self.xk @ beta
        sigma2 = float(resid @ resid) / max(n - k, 1)
        floor = 1e-6 * float(self.y @ self.y) / n + 1e-12
        return beta, 1.0, max(sigma2, floor)

    def newton(self, theta0, tol, max_iter):
        return _kernels.newton(self.xk, self.y, self.xtx, np.asarray(theta0, dtype=float),
                               *self._args(), self.const, self.hier, self.fixed_tau,
                               tol, max_iter, ARMIJO)


def _check_model(dataset: Dataset, model: ModelIndex, cfg: HyperConfig):
    cap = cfg.model_cap(dataset.n)
    if len(model) > cap:
        raise ModelTooLarge(f"model size {len(model)} exceeds cap {cap}")
    if len(model) != len(set(model)):
        raise ValueError(f"duplicate indices in {model}")


def _problem(dataset, model, cfg):
    if len(model) == 0:
        raise ValueError("the null model has no mode; use log_marginal")
    return _Problem(dataset, model, cfg)


def gradient(dataset: Dataset, model: ModelIndex, point, cfg: HyperConfig,
             coords: str = "working") -> np.ndarray:
    """Gradient of the log joint.

    ``coords="working"`` differentiates with respect to
    ``(beta, log tau, log sigma2)``; ``coords="original"`` with respect to
    ``(beta, tau, sigma2)``.  Under a fixed tau the tau entry is absent.
    """
    prob = _problem(dataset, model, cfg)
    pt = point if isinstance(point, ParamPoint) else ParamPoint(*point)
    tau = pt.tau if cfg.hierarchical else cfg.fixed_tau
    g = prob.grad_original(pt.beta, tau, pt.sigma2)
    if coords == "original":
        return g
    if coords == "working":
        return g * prob.jacobian_diag(tau, pt.sigma2)
    raise ValueError(f"unknown coords {coords!r}")


def hessian(dataset: Dataset, model: ModelIndex, point, cfg: HyperConfig) -> np.ndarray:
    """Minus the Hessian of the log joint in (beta, tau, sigma2) coordinates."""
    prob = _problem(dataset, model, cfg)
    pt = point if isinstance(point, ParamPoint) else ParamPoint(*point)
    tau = pt.tau if cfg.hierarchical else cfg.fixed_tau
    return -prob.hess_original(pt.beta, tau, pt.sigma2)


def find_mode(dataset: Dataset, model: ModelIndex, cfg: HyperConfig,
              init: Optional[ParamPoint] = None, max_iter: int = MAX_ITER,
              tol: float = GRAD_TOL) -> ModeResult:
    """Maximize the log joint of ``model`` by a safeguarded Newton method.

    Newton steps on theta with halving backtracking (Armijo constant 1e-4);
    when minus the Hessian is not positive definite the step falls back to
    steepest ascent.  Coefficients never change sign, so the run stays in the
    orthant of its starting point (the ridge estimate unless ``init`` is
    given).
    """
    _check_model(dataset, model, cfg)
    prob = _problem(dataset, model, cfg)
    if not _full_rank(prob.xtx):
        raise SingularDesign(f"design columns {model} are rank deficient")
    if init is None:
        start = prob.initial_point()
    else:
        start = (init.beta, init.tau if cfg.hierarchical else cfg.fixed_tau, init.sigma2)
    theta, f, it, gnorm, converged, history = prob.newton(prob.pack(*start), tol, max_iter)
    if not converged:
        raise NonConvergence(
            f"model {model}: gradient norm {gnorm:.3g} after {it} iterations")
    beta, tau, sigma2 = prob.unpack(theta)
    point = ParamPoint(beta.copy(), tau, sigma2)
    v = -prob.hess_original(beta, tau, sigma2)
    return ModeResult(point, float(f), 0.5 * (v + v.T), bool(converged), int(it), float(gnorm),
                      tol * (1.0 + abs(f)), list(history))


def _full_rank(xtx, rcond=1e-12):
    eig = np.linalg.eigvalsh(xtx)
    return eig[0] > rcond * max(eig[-1], 1e-300)


def log_marginal_null(dataset: Dataset, cfg: HyperConfig) -> float:
    """Exact log marginal likelihood of the empty model."""
    n, a1, a2 = dataset.n, cfg.alpha1, cfg.alpha2
    yty = float(dataset.y @ dataset.y)
    return (-0.5 * n * LOG_2PI + a1 * math.log(a2) - gammaln(a1)
            + gammaln(0.5 * n + a1) - (0.5 * n + a1) * math.log(0.5 * yty + a2))


def laplace_from_mode(mode: ModeResult) -> float:
    dim = mode.hessian.shape[0]
    sign, logdet = np.linalg.slogdet(mode.hessian)
    if sign <= 0:
        raise NonConvergence("Hessian at the mode is not positive definite")
    return 0.5 * dim * LOG_2PI + mode.objective - 0.5 * logdet


def log_marginal(dataset: Dataset, model: ModelIndex, cfg: HyperConfig) -> float:
    """Laplace-approximated log marginal likelihood of ``model``.

    Exact closed form for the null model.
    """
    if len(model) == 0:
        return log_marginal_null(dataset, cfg)
    return laplace_from_mode(find_mode(dataset, model, cfg))


def score_model(dataset: Dataset, model: ModelIndex, cfg: HyperConfig) -> ScoredModel:
    lp = log_model_prior(model, cfg.model_prior, dataset.p, cfg.model_cap(dataset.n))
    if lp == -math.inf:
        return ScoredModel(tuple(model), -math.inf, lp)
    return ScoredModel(tuple(model), log_marginal(dataset, model, cfg), lp)


def log_posterior_ratio(dataset: Dataset, model_k: ModelIndex, model_t: ModelIndex,
                        cfg: HyperConfig) -> float:
    """``log pi(k | y) - log pi(t | y)``."""
    if tuple(sorted(model_k)) == tuple(sorted(model_t)):
        return 0.0
    sk = score_model(dataset, tuple(sorted(model_k)), cfg)
    st = score_model(dataset, tuple(sorted(model_t)), cfg)
    return sk.log_posterior_unnorm - st.log_posterior_unnorm
