"""Log densities of the hyper-pMOM hierarchy and the model-space priors.

All densities use ``A_k = I`` and are evaluated in log space.  Boundary
inputs either raise (poles, non-positive scales) or return ``-inf``; nothing
here returns NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .data import Dataset, ModelIndex
from .errors import NonPositiveScale, ZeroCoefficient

LOG_2PI = math.log(2.0 * math.pi)
ZERO_COEF_TOL = 1e-300


@dataclass(frozen=True)
class ModelPriorSpec:
    """Prior over models.

    ``kind="uniform"`` puts equal mass on every model of size at most ``q_n``;
    ``kind="complexity"`` is proportional to ``c1**-k * p**(-c2 * k)`` with the
    same truncation.  Consistency results for the complexity prior need
    ``c2 > 1``.
    """

    kind: str = "uniform"
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "complexity"):
            raise ValueError(f"unknown model prior kind {self.kind!r}")
        if self.kind == "complexity" and not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("complexity prior needs c1 > 0 and c2 > 0")

    @classmethod
    def parse(cls, text: str) -> "ModelPriorSpec":
        """Parse ``uniform`` or ``complexity:<c1>,<c2>``."""
        if text == "uniform":
            return cls()
        if text.startswith("complexity:"):
            try:
                c1, c2 = (float(v) for v in text.split(":", 1)[1].split(","))
            except ValueError:
                raise ValueError(f"expected complexity:<c1>,<c2>, got {text!r}") from None
            return cls("complexity", c1, c2)
        raise ValueError(f"expected 'uniform' or 'complexity:<c1>,<c2>', got {text!r}")

    def __str__(self):
        if self.kind == "uniform":
            return "uniform"
        return f"complexity:{self.c1:g},{self.c2:g}"


@dataclass(frozen=True)
class HyperConfig:
    """Hyperparameters of the hierarchy.

    Parameters
    ----------
    r : int
        pMOM order.
    alpha1, alpha2 : float
        Inverse-Gamma shape and scale for sigma^2.
    fixed_tau : float or None
        ``None`` puts the Inverse-Gamma(1/2, n/2) prior on tau (hyper-pMOM);
        a positive value fixes tau (plain pMOM).
    model_prior : ModelPriorSpec
    q_n : int or None
        Largest admissible model size; ``None`` resolves to ``ceil(n / 2)``.
    """

    r: int = 2
    alpha1: float = 0.01
    alpha2: float = 0.01
    fixed_tau: Optional[float] = None
    model_prior: ModelPriorSpec = field(default_factory=ModelPriorSpec)
    q_n: Optional[int] = None

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 1:
            raise ValueError("r must be a positive integer")
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise ValueError("alpha1 and alpha2 must be positive")
        if self.fixed_tau is not None and not self.fixed_tau > 0:
            raise ValueError("fixed tau must be positive")
        if self.q_n is not None and self.q_n < 1:
            raise ValueError("q_n must be >= 1")

    @property
    def hierarchical(self) -> bool:
        return self.fixed_tau is None

    def size_cap(self, n: int) -> int:
        return self.q_n if self.q_n is not None else math.ceil(n / 2)

    def model_cap(self, n: int) -> int:
        """Largest admissible model: ``q_n``, and never more than ``n - 1`` columns."""
        return min(self.size_cap(n), n - 1)

    @property
    def tau_label(self) -> str:
        return "hier" if self.hierarchical else f"fixed:{self.fixed_tau:g}"


def double_factorial(m: int) -> int:
    return math.prod(range(m, 0, -2))


def log_dk(k: int, r: int) -> float:
    return -k * math.log(double_factorial(2 * r - 1))


def dk_normalizer(k: int, r: int) -> float:
    """pMOM normalizing constant ``((2r-1)!!)**-k`` for identity ``A_k``."""
    return double_factorial(2 * r - 1) ** (-float(k))


def _check_beta(beta) -> np.ndarray:
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if np.any(np.abs(beta) < ZERO_COEF_TOL):
        raise ZeroCoefficient(f"coefficient at the pMOM pole: {beta}")
    return beta


def _check_scale(name, value):
    if not value > 0:
        raise NonPositiveScale(f"{name} must be positive, got {value}")


def log_pmom_prior(beta, tau: float, sigma2: float, cfg: HyperConfig) -> float:
    """Log pMOM density of ``beta`` given ``tau`` and ``sigma2``."""
    beta = _check_beta(beta)
    _check_scale("tau", tau)
    _check_scale("sigma2", sigma2)
    k, r = beta.size, cfg.r
    return float(
        log_dk(k, r)
        - 0.5 * k * LOG_2PI
        - (r * k + 0.5 * k) * math.log(tau * sigma2)
        - beta @ beta / (2.0 * tau * sigma2)
        + 2 * r * np.sum(np.log(np.abs(beta)))
    )


def log_marginal_beta_prior(beta, sigma2: float, n: int, cfg: HyperConfig) -> float:
    """Log hyper-pMOM density of ``beta`` given ``sigma2`` with tau integrated out."""
    beta = _check_beta(beta)
    _check_scale("sigma2", sigma2)
    k, r = beta.size, cfg.r
    shape = r * k + 0.5 * k + 0.5
    return float(
        0.5 * math.log(n / 2.0)
        - gammaln(0.5)
        + gammaln(shape)
        - shape * math.log(n / 2.0 + beta @ beta / (2.0 * sigma2))
        + log_dk(k, r)
        - 0.5 * k * LOG_2PI
        - (r * k + 0.5 * k) * math.log(sigma2)
        + 2 * r * np.sum(np.log(np.abs(beta)))
    )


def log_inverse_gamma(x: float, shape: float, scale: float) -> float:
    _check_scale("argument", x)
    with np.errstate(over="ignore", divide="ignore"):
        tail = scale / x
    if not np.isfinite(tail):
        return -math.inf
    return shape * math.log(scale) - gammaln(shape) - (shape + 1.0) * math.log(x) - tail


def log_tau_prior(tau: float, n: int) -> float:
    """Inverse-Gamma(1/2, n/2) log density."""
    _check_scale("tau", tau)
    return log_inverse_gamma(tau, 0.5, n / 2.0)


def log_sigma2_prior(sigma2: float, alpha1: float, alpha2: float) -> float:
    """Inverse-Gamma(alpha1, alpha2) log density."""
    _check_scale("sigma2", sigma2)
    return log_inverse_gamma(sigma2, alpha1, alpha2)


def log_model_prior(model: ModelIndex, spec: ModelPriorSpec, p: int, q_n: int) -> float:
    """Unnormalized log prior of ``model``; ``-inf`` beyond the size cap."""
    k = len(model)
    if k > q_n:
        return -math.inf
    if spec.kind == "uniform" or k == 0:
        return 0.0
    return -k * (math.log(spec.c1) + spec.c2 * math.log(p))


def gaussian_loglik(dataset: Dataset, model: ModelIndex, beta, sigma2: float) -> float:
    _check_scale("sigma2", sigma2)
    resid = dataset.y - dataset.x[:, list(model)] @ np.asarray(beta, dtype=float)
    n = dataset.n
    return float(-0.5 * n * (LOG_2PI + math.log(sigma2)) - resid @ resid / (2.0 * sigma2))


def log_joint(dataset: Dataset, model: ModelIndex, point, cfg: HyperConfig) -> float:
    """Log of likelihood x pMOM x tau prior x sigma^2 prior at ``point``.

    ``point`` is a ``(beta, tau, sigma2)`` triple.  Under a fixed tau the
    supplied ``tau`` is ignored in favour of ``cfg.fixed_tau`` and the tau
    prior term is dropped.
    """
    beta, tau, sigma2 = point
    if len(model) != np.size(beta):
        raise ValueError("beta length must match the model size")
    if not cfg.hierarchical:
        tau = cfg.fixed_tau
    value = (
        log_pmom_prior(beta, tau, sigma2, cfg)
        + log_sigma2_prior(sigma2, cfg.alpha1, cfg.alpha2)
        + gaussian_loglik(dataset, model, beta, sigma2)
    )
    if cfg.hierarchical:
        value += log_tau_prior(tau, dataset.n)
    return value
