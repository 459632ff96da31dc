"""Self-checks of the fast paths against the oracles, on small built-in fixtures.

``run_checks`` is what ``nlselect verify`` executes.  Each check returns a
``CheckResult`` with the measured quantity and the threshold it was held to.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, List

import numpy as np
from scipy import integrate

from .data import Dataset
from .laplace import ParamPoint, _Problem, find_mode, log_marginal
from .oracle import (chisq_tail_check, finite_difference_check,
                     quadrature_log_marginal)
from .priors import HyperConfig, log_pmom_prior

CENTRAL_TAIL_GRID = tuple((d, a) for d in (5, 10, 50) for a in (d / 2, d, 2 * d))
NONCENTRAL_TAIL_GRID = ((5, 10.0, 50.0), (10, 5.0, 20.0), (50, 20.0, 40.0))


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "threshold", float(self.threshold))
        object.__setattr__(self, "passed", bool(self.passed))

    def as_dict(self):
        return asdict(self)


def fixture(n: int, p: int, beta, seed: int, sigma: float = 1.0) -> Dataset:
    """Isotropic Gaussian design with response ``x @ beta + noise``, standardized."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    y = x @ np.asarray(beta, dtype=float) + sigma * rng.standard_normal(n)
    return Dataset(x, y).standardize()


def random_point(k: int, rng: np.random.Generator, hier: bool = True) -> ParamPoint:
    signs = rng.choice([-1.0, 1.0], k)
    beta = signs * rng.uniform(0.2, 2.0, k)
    tau = float(np.exp(rng.uniform(-1.0, 1.5))) if hier else 1.0
    return ParamPoint(beta, tau, float(np.exp(rng.uniform(-1.0, 1.0))))


def derivative_deviations(dataset: Dataset, model, cfg: HyperConfig, point: ParamPoint):
    """Worst relative deviation of the analytic gradient and Hessian from finite differences.

    Both are checked in original ``(beta, tau, sigma2)`` coordinates; the
    Hessian is compared with the finite-difference Jacobian of the analytic
    gradient.
    """
    prob = _Problem(dataset, model, cfg)
    k = len(model)
    hier = cfg.hierarchical

    def split(z):
        return (z[:k], z[k], z[k + 1]) if hier else (z[:k], cfg.fixed_tau, z[k])

    x0 = np.concatenate([point.beta, [point.tau, point.sigma2] if hier else [point.sigma2]])
    g = prob.grad_original(*split(x0))
    h = prob.hess_original(*split(x0))
    dev_g = finite_difference_check("gradient", lambda z: prob.value(*split(z)), x0, g)
    dev_h = finite_difference_check("hessian", lambda z: prob.grad_original(*split(z)), x0, h)
    return dev_g, dev_h


def _check_derivatives() -> List[CheckResult]:
    rng = np.random.default_rng(11)
    out = []
    for k in (1, 2, 3, 5):
        data = fixture(60, k, np.linspace(1.0, 2.0, k), seed=k)
        worst_g = worst_h = 0.0
        for _ in range(5):
            dg, dh = derivative_deviations(data, tuple(range(k)), HyperConfig(), random_point(k, rng))
            worst_g, worst_h = max(worst_g, dg), max(worst_h, dh)
        out.append(CheckResult(f"gradient_fd_k{k}", worst_g, 1e-6, worst_g <= 1e-6))
        out.append(CheckResult(f"hessian_fd_k{k}", worst_h, 1e-5, worst_h <= 1e-5))
    return out


def _check_mode_pd() -> CheckResult:
    fails = 0
    for seed in range(10):
        data = fixture(80, 3, [1.5, -1.0, 0.8], seed=100 + seed)
        mode = find_mode(data, (0, 1, 2), HyperConfig())
        if np.linalg.eigvalsh(mode.hessian)[0] <= 0:
            fails += 1
    return CheckResult("mode_hessian_pd", float(fails), 0.0, fails == 0, "fits with non-PD V")


def _check_normalization() -> CheckResult:
    cfg = HyperConfig(r=2)
    val, _ = integrate.quad(lambda b: math.exp(log_pmom_prior([b], 0.5, 2.0, cfg)) if b else 0.0,
                            -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12)
    return CheckResult("pmom_normalization", abs(val - 1.0), 1e-6, abs(val - 1.0) <= 1e-6)


def _check_null_closed_form() -> CheckResult:
    data = fixture(40, 2, [1.0, 0.0], seed=5)
    cfg = HyperConfig()
    diff = abs(log_marginal(data, (), cfg) - quadrature_log_marginal(data, (), cfg))
    return CheckResult("null_model_exact", diff, 1e-12, diff <= 1e-12)


def _check_ranking() -> List[CheckResult]:
    data = fixture(100, 2, [1.0, 0.0], seed=7)
    cfg = HyperConfig()
    models = [(), (0,), (1,), (0, 1)]
    lap = [log_marginal(data, m, cfg) for m in models]
    quad = [quadrature_log_marginal(data, m, cfg) for m in models]
    same = list(np.argsort(lap)) == list(np.argsort(quad))
    err = max(abs(a - b) for a, b in zip(lap[1:], quad[1:]))
    return [CheckResult("laplace_ranking_matches_quadrature", float(same), 1.0, same,
                        f"largest |Laplace - quadrature| over the four models: {err:.3f}")]


def _check_tails(draws: int) -> List[CheckResult]:
    out = []
    for i, (dof, a) in enumerate(CENTRAL_TAIL_GRID):
        rep = chisq_tail_check(dof, a, 0.0, draws, seed=i)
        out.append(CheckResult(f"central_tail_p{dof}_a{a:g}", rep.empirical_prob,
                               rep.bound + 3 * rep.stderr, rep.passed,
                               f"stated-form bound {rep.stated_bound:.4g}"))
    for i, (dof, lam, a) in enumerate(NONCENTRAL_TAIL_GRID):
        rep = chisq_tail_check(dof, a, lam, draws, seed=100 + i)
        out.append(CheckResult(f"noncentral_tail_p{dof}_l{lam:g}_a{a:g}", rep.empirical_prob,
                               rep.bound + 3 * rep.stderr, rep.passed))
    return out


def run_checks(draws: int = 1_000_000) -> List[CheckResult]:
    steps: List[Callable[[], object]] = [
        _check_normalization, _check_null_closed_form, _check_derivatives,
        _check_mode_pd, _check_ranking, lambda: _check_tails(draws),
    ]
    results = []
    for step in steps:
        got = step()
        results.extend(got if isinstance(got, list) else [got])
    return results
