"""Simulation designs, posterior-ratio curves, selection metrics, ROC and MSPE.

Every repetition draws from its own generator, seeded by
``SeedSequence([seed, p, repetition])``, so repetitions can run in any order
or in parallel and still give the same tables.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import Executor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .data import Dataset, ModelIndex, make_model
from .errors import SingularDesign
from .laplace import log_posterior_ratio
from .priors import HyperConfig
from .search import ScoredModelSet, SearchConfig, map_model, run_search

LARGE_PATTERN = tuple(round(1.1 + 0.1 * i, 2) for i in range(10))
MIXED_PATTERN = (0.3, 0.35, 0.4, 0.45, 0.5, 1.1, 1.2, 1.3, 1.4, 1.5)
DESIGNS = ("iso", "cs", "ar1")
FIXED_TAU_BASELINE = 0.072

RATIO_HEADER = ("p", "scenario", "design", "mean_log_ratio", "stderr")
METRIC_HEADER = ("p", "design", "pattern", "method", "ppv", "tpr", "fpr")
ROC_HEADER = ("threshold", "fpr", "tpr")


@dataclass(frozen=True)
class Covariance:
    """Equicorrelated (``cs``), autoregressive (``ar1``) or identity (``iso``) covariance.

    Sampling is O(n p): compound symmetry uses one shared factor and AR(1) a
    sequential recursion, so no dense factorization is ever formed.
    """

    design: str
    p: int
    rho: float = 0.5

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ValueError(f"design must be one of {DESIGNS}, got {self.design!r}")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")

    def entry(self, i: int, j: int) -> float:
        if i == j:
            return 1.0
        if self.design == "iso":
            return 0.0
        if self.design == "cs":
            return self.rho
        return self.rho ** abs(i - j)

    def dense(self) -> np.ndarray:
        idx = np.arange(self.p)
        if self.design == "iso":
            return np.eye(self.p)
        if self.design == "cs":
            return np.full((self.p, self.p), self.rho) + (1.0 - self.rho) * np.eye(self.p)
        return self.rho ** np.abs(idx[:, None] - idx[None, :])

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        z = rng.standard_normal((n, self.p))
        if self.design == "iso":
            return z
        if self.design == "cs":
            shared = rng.standard_normal((n, 1))
            return math.sqrt(1.0 - self.rho) * z + math.sqrt(self.rho) * shared
        x = np.empty_like(z)
        x[:, 0] = z[:, 0]
        scale = math.sqrt(1.0 - self.rho ** 2)
        for j in range(1, self.p):
            x[:, j] = self.rho * x[:, j - 1] + scale * z[:, j]
        return x


def make_covariance(design: str, p: int, rho: float = 0.5) -> Covariance:
    return Covariance(design, p, rho)


@dataclass(frozen=True)
class SimSpec:
    """One simulation setting.

    ``beta_pattern`` is ``"large"``, ``"mixed"`` or a length-``p`` coefficient
    vector whose nonzero entries define the true model.  For the named
    patterns the ten active positions are drawn at random per repetition.
    ``n=None`` resolves to ``p // 5``.
    """

    p: int
    n: Optional[int] = None
    design: str = "iso"
    beta_pattern: Union[str, Tuple[float, ...]] = "large"
    sigma: float = 1.0
    sign_flip_prob: float = 0.5
    repetitions: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ValueError(f"design must be one of {DESIGNS}, got {self.design!r}")
        if not isinstance(self.beta_pattern, str):
            vec = tuple(float(v) for v in self.beta_pattern)
            if len(vec) != self.p:
                raise ValueError("custom coefficient vector must have length p")
            object.__setattr__(self, "beta_pattern", vec)
        elif self.beta_pattern not in ("large", "mixed"):
            raise ValueError(f"unknown beta pattern {self.beta_pattern!r}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 0.0 <= self.sign_flip_prob <= 1.0:
            raise ValueError("sign_flip_prob must lie in [0, 1]")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.n_resolved < self.support_size + 2:
            raise ValueError(f"n={self.n_resolved} is too small for {self.support_size} active columns")

    @property
    def n_resolved(self) -> int:
        return self.n if self.n is not None else self.p // 5

    @property
    def magnitudes(self) -> Tuple[float, ...]:
        if self.beta_pattern == "large":
            return LARGE_PATTERN
        if self.beta_pattern == "mixed":
            return MIXED_PATTERN
        return tuple(abs(v) for v in self.beta_pattern if v != 0.0)

    @property
    def support_size(self) -> int:
        return len(self.magnitudes)

    @property
    def pattern_label(self) -> str:
        return self.beta_pattern if isinstance(self.beta_pattern, str) else "custom"


@dataclass
class SimulatedData:
    dataset: Dataset
    truth: ModelIndex
    beta0: np.ndarray
    rng_state: Dict = field(repr=False, default_factory=dict)


def repetition_rng(seed: int, p: int, rep: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(p), int(rep), int(stream)]))


def sample_dataset(spec: SimSpec, rep: int = 0) -> SimulatedData:
    """Draw one standardized dataset together with its true model and coefficients."""
    rng = repetition_rng(spec.seed, spec.p, rep)
    state = rng.bit_generator.state
    p, n = spec.p, spec.n_resolved
    beta0 = np.zeros(p)
    if isinstance(spec.beta_pattern, str):
        support = np.sort(rng.choice(p, spec.support_size, replace=False))
        beta0[support] = spec.magnitudes
    else:
        beta0[:] = spec.beta_pattern
        support = np.flatnonzero(beta0)
    flips = rng.random(support.size) < spec.sign_flip_prob
    beta0[support] *= np.where(flips, -1.0, 1.0)
    x = make_covariance(spec.design, p).sample(rng, n)
    y = x @ beta0 + spec.sigma * rng.standard_normal(n)
    data = Dataset(x, y).standardize()
    return SimulatedData(data, make_model(support, p), beta0, state)


# posterior-ratio curves

def search_seed(seed: int, rep: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(rep)]).generate_state(1, np.uint64)[0])


def scenario_model(truth: ModelIndex, p: int, scenario: int,
                   rng: np.random.Generator) -> ModelIndex:
    """Non-true model for one of the four comparison scenarios.

    1: half-size subset of the truth; 2: double-size superset; 3: half-size
    model drawn from all columns; 4: double-size model drawn from all columns.
    """
    t = len(truth)
    if t < 2:
        raise ValueError("scenarios need a true model with at least two columns")
    if scenario == 1:
        return make_model(rng.choice(truth, t // 2, replace=False))
    if scenario == 2:
        rest = np.setdiff1d(np.arange(p), truth)
        return make_model(list(truth) + list(rng.choice(rest, t, replace=False)))
    if scenario == 3:
        return make_model(rng.choice(p, t // 2, replace=False))
    if scenario == 4:
        while True:
            model = make_model(rng.choice(p, 2 * t, replace=False))
            if not set(truth) <= set(model):
                return model
    raise ValueError(f"scenario must be 1, 2, 3 or 4, got {scenario}")


@dataclass(frozen=True)
class RatioRow:
    p: int
    scenario: int
    design: str
    mean_log_ratio: float
    stderr: float

    def as_tuple(self):
        return (self.p, self.scenario, self.design, self.mean_log_ratio, self.stderr)


def _ratio_cfg(cfg: HyperConfig, spec: SimSpec) -> HyperConfig:
    need = 2 * spec.support_size
    if cfg.size_cap(spec.n_resolved) >= need:
        return cfg
    return replace(cfg, q_n=need)


def _ratio_rep(args):
    spec, scenarios, cfg, rep = args
    sim = sample_dataset(spec, rep)
    out = []
    for s in scenarios:
        model = scenario_model(sim.truth, spec.p, s, repetition_rng(spec.seed, spec.p, rep, 100 + s))
        out.append(log_posterior_ratio(sim.dataset, model, sim.truth, cfg))
    return out


def ratio_experiment(base: SimSpec, scenarios: Sequence[int] = (1, 2, 3, 4),
                     p_values: Sequence[int] = (100, 200, 400),
                     cfg: Optional[HyperConfig] = None,
                     executor: Optional[Executor] = None) -> List[RatioRow]:
    """Mean log posterior ratio ``log pi(k|y) - log pi(t|y)`` across a sweep of p.

    ``base`` supplies design, pattern, repetitions and seed; ``n`` follows
    ``p // 5`` unless ``base.n`` is set.  ``q_n`` is raised to ``2|t|`` so the
    double-size scenarios are in the model space.  A scenario model with more
    than ``n - 1`` columns still has zero prior mass; its log ratio is ``-inf``
    and so is the mean, with a NaN standard error.
    """
    cfg = cfg or HyperConfig()
    rows = []
    for p in p_values:
        spec = SimSpec(p=p, n=base.n, design=base.design, beta_pattern=base.beta_pattern,
                       sigma=base.sigma, sign_flip_prob=base.sign_flip_prob,
                       repetitions=base.repetitions, seed=base.seed)
        rcfg = _ratio_cfg(cfg, spec)
        jobs = [(spec, tuple(scenarios), rcfg, rep) for rep in range(spec.repetitions)]
        mapper = executor.map if executor is not None else map
        values = np.array(list(mapper(_ratio_rep, jobs)))
        for col, s in enumerate(scenarios):
            v = values[:, col]
            if not np.all(np.isfinite(v)):
                rows.append(RatioRow(p, s, spec.design, float(np.mean(v)), math.nan))
                continue
            se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
            rows.append(RatioRow(p, s, spec.design, float(v.mean()), se))
    return rows


# selection metrics

@dataclass(frozen=True)
class MetricRow:
    ppv: float
    tpr: float
    fpr: float
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0


def selection_metrics(selected: ModelIndex, truth: ModelIndex, p: int) -> MetricRow:
    """PPV, TPR and FPR over all ``p`` coordinates.

    PPV of an empty selection is 0, except that it is 1 when the truth is
    empty as well.  TPR with an empty truth and FPR with a full truth are 0.
    """
    sel, tru = set(selected), set(truth)
    tp = len(sel & tru)
    fp = len(sel - tru)
    fn = len(tru - sel)
    tn = p - tp - fp - fn
    if tp + fp:
        ppv = tp / (tp + fp)
    else:
        ppv = 1.0 if not tru else 0.0
    tpr = tp / (tp + fn) if tp + fn else 0.0
    fpr = fp / (fp + tn) if fp + tn else 0.0
    return MetricRow(ppv, tpr, fpr, tp, fp, tn, fn)


@dataclass(frozen=True)
class Method:
    name: str
    cfg: HyperConfig


def default_methods(base: Optional[HyperConfig] = None) -> Tuple[Method, ...]:
    """Hyper-pMOM and the fixed-tau pMOM baseline sharing every other setting."""
    base = base or HyperConfig()
    return (Method("hyper-pMOM", replace(base, fixed_tau=None)),
            Method(f"tau={FIXED_TAU_BASELINE:g}", replace(base, fixed_tau=FIXED_TAU_BASELINE)))


@dataclass(frozen=True)
class MetricTableRow:
    p: int
    design: str
    pattern: str
    method: str
    ppv: float
    tpr: float
    fpr: float

    def as_tuple(self):
        return (self.p, self.design, self.pattern, self.method, self.ppv, self.tpr, self.fpr)


@dataclass(frozen=True)
class RepetitionResult:
    rep: int
    method: str
    selected: ModelIndex
    truth: ModelIndex
    metrics: MetricRow


def _selection_rep(args):
    spec, methods, scfg, rep = args
    sim = sample_dataset(spec, rep)
    out = []
    for m in methods:
        run_cfg = replace(scfg, seed=search_seed(scfg.seed, rep))
        best = map_model(run_search(sim.dataset, m.cfg, run_cfg))
        out.append(RepetitionResult(rep, m.name, best.model, sim.truth,
                                    selection_metrics(best.model, sim.truth, spec.p)))
    return out


def selection_experiment(spec: SimSpec, methods: Sequence[Method] = None,
                         scfg: Optional[SearchConfig] = None,
                         executor: Optional[Executor] = None):
    """Average PPV/TPR/FPR of the MAP model over repetitions, for each method.

    Returns ``(rows, details)``: one ``MetricTableRow`` per method and the
    per-repetition results.
    """
    methods = tuple(methods or default_methods())
    scfg = scfg or SearchConfig()
    jobs = [(spec, methods, scfg, rep) for rep in range(spec.repetitions)]
    mapper = executor.map if executor is not None else map
    details = [r for batch in mapper(_selection_rep, jobs) for r in batch]
    rows = []
    for m in methods:
        mine = [d.metrics for d in details if d.method == m.name]
        rows.append(MetricTableRow(spec.p, spec.design, spec.pattern_label, m.name,
                                   float(np.mean([r.ppv for r in mine])),
                                   float(np.mean([r.tpr for r in mine])),
                                   float(np.mean([r.fpr for r in mine]))))
    return rows, details


# ROC and prediction error

@dataclass(frozen=True)
class RocPoint:
    threshold: float
    fpr: float
    tpr: float

    def as_tuple(self):
        return (self.threshold, self.fpr, self.tpr)


def roc_points(dataset: Dataset, truth: ModelIndex, scored: ScoredModelSet) -> List[RocPoint]:
    """Sweep a threshold over posterior-weighted inclusion frequencies.

    A column is selected when its inclusion frequency is at least the
    threshold.  The sweep starts just above the largest frequency (nothing
    selected) and ends at 0 (everything selected), so FPR and TPR are both
    nondecreasing along the list.
    """
    incl = scored.inclusion_probabilities(dataset.p)
    levels = np.unique(incl)[::-1]
    thresholds = [float(np.nextafter(levels[0], np.inf))] + [float(v) for v in levels]
    if thresholds[-1] != 0.0:
        thresholds.append(0.0)
    out = []
    for thr in thresholds:
        chosen = tuple(int(j) for j in np.flatnonzero(incl >= thr))
        m = selection_metrics(chosen, truth, dataset.p)
        out.append(RocPoint(thr, m.fpr, m.tpr))
    return out


def roc_auc(points: Sequence[RocPoint]) -> float:
    fpr = np.array([pt.fpr for pt in points])
    tpr = np.array([pt.tpr for pt in points])
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def mspe(train: Dataset, test: Dataset, model: ModelIndex) -> float:
    """Mean squared test error of the least-squares fit of ``model`` on ``train``."""
    if train.p != test.p:
        raise ValueError("train and test must have the same columns")
    if not model:
        return float(np.mean(test.y ** 2))
    xk = train.x[:, list(model)]
    coef, _, rank, _ = np.linalg.lstsq(xk, train.y, rcond=None)
    if rank < len(model):
        raise SingularDesign(f"training design for {model} has rank {rank} < {len(model)}")
    resid = test.y - test.x[:, list(model)] @ coef
    return float(np.mean(resid ** 2))


# CSV emission

def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def to_csv(rows, header: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row.as_tuple()])
    return buf.getvalue()


def write_csv(path, rows, header: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(to_csv(rows, header))
