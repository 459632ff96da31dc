"""Shotgun stochastic search with screening over the model space.

At every step the current model's neighbours (additions from a screened
candidate set, deletions, and one-out-one-in swaps) are scored, and the next
model is drawn with probability proportional to ``exp(score / temperature)``.
Temperatures follow a decreasing ladder.  Every scored model is kept, and the
MAP model is the best of them.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data import Dataset, ModelIndex
from .errors import EmptySet, NLSelectError
from .laplace import ScoredModel, find_mode, laplace_from_mode, log_marginal_null
from .priors import HyperConfig, log_model_prior

log = logging.getLogger(__name__)


def default_ladder(n_temps: int = 10, hot: float = 3.0, cold: float = 1.0) -> Tuple[float, ...]:
    return tuple(float(t) for t in np.geomspace(hot, cold, n_temps))


def default_screen_size(n: int) -> int:
    return max(20, math.ceil(n / math.log(n)))


@dataclass(frozen=True)
class SearchConfig:
    """Tuning of the stochastic search.

    ``screen_size=None`` resolves to ``max(20, ceil(n / log n))``.
    ``path_start`` starts the chain from the best model on the greedy
    screening path instead of the best single column; ``polish`` finishes with
    a greedy ascent from the best model found.
    """

    temperature_ladder: Tuple[float, ...] = field(default_factory=default_ladder)
    iterations_per_temperature: int = 30
    screen_size: Optional[int] = None
    seed: int = 0
    path_start: bool = True
    polish: bool = True

    def __post_init__(self):
        ladder = tuple(float(t) for t in self.temperature_ladder)
        if not ladder or any(not t > 0 for t in ladder):
            raise ValueError("temperature ladder must be nonempty and strictly positive")
        object.__setattr__(self, "temperature_ladder", ladder)
        if self.iterations_per_temperature < 1:
            raise ValueError("iterations_per_temperature must be >= 1")
        if self.screen_size is not None and self.screen_size < 1:
            raise ValueError("screen_size must be >= 1")

    def resolved_screen_size(self, n: int) -> int:
        return self.screen_size if self.screen_size is not None else default_screen_size(n)


@dataclass
class ScoredModelSet:
    """Every model scored during a search, plus the sequence of visited models."""

    entries: Dict[ModelIndex, ScoredModel] = field(default_factory=dict)
    visits: List[ModelIndex] = field(default_factory=list)
    failures: Dict[ModelIndex, str] = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, model):
        return model in self.entries

    def top(self, m: int) -> List[ScoredModel]:
        return sorted(self.entries.values(), key=_rank_key)[:m]

    def inclusion_probabilities(self, p: int) -> np.ndarray:
        """Posterior-weighted inclusion frequency of each column over the set."""
        scored = [e for e in self.entries.values() if np.isfinite(e.log_posterior_unnorm)]
        if not scored:
            raise EmptySet("no finitely scored models")
        lp = np.array([e.log_posterior_unnorm for e in scored])
        w = np.exp(lp - lp.max())
        w /= w.sum()
        incl = np.zeros(p)
        for weight, entry in zip(w, scored):
            incl[list(entry.model)] += weight
        return np.clip(incl, 0.0, 1.0)


def _rank_key(entry: ScoredModel):
    return (-entry.log_posterior_unnorm, len(entry.model), entry.model)


def map_model(scored: ScoredModelSet) -> ScoredModel:
    """Entry with the largest posterior; ties go to the smaller, then lexicographically first, model."""
    if not scored.entries:
        raise EmptySet("cannot take the MAP of an empty set")
    return min(scored.entries.values(), key=_rank_key)


class ModelScorer:
    """Memoized model scoring for one dataset and hyperparameter set.

    Failed fits score ``-inf`` and are remembered in ``failures``.  Values are
    deterministic, so concurrent inserts of the same key are harmless.
    """

    def __init__(self, dataset: Dataset, cfg: HyperConfig):
        self.dataset = dataset
        self.cfg = cfg
        self.q_n = cfg.model_cap(dataset.n)
        self.scores: Dict[ModelIndex, ScoredModel] = {}
        self.betas: Dict[ModelIndex, np.ndarray] = {}
        self.failures: Dict[ModelIndex, str] = {}

    def _evaluate(self, model: ModelIndex):
        d, cfg = self.dataset, self.cfg
        lprior = log_model_prior(model, cfg.model_prior, d.p, self.q_n)
        if not model:
            return ScoredModel(model, log_marginal_null(d, cfg), lprior), np.zeros(0), None
        try:
            mode = find_mode(d, model, cfg)
            lm = laplace_from_mode(mode)
        except NLSelectError as exc:
            return ScoredModel(model, -math.inf, lprior), None, f"{type(exc).__name__}: {exc}"
        return ScoredModel(model, lm, lprior), mode.point.beta, None

    def score(self, model: ModelIndex) -> ScoredModel:
        hit = self.scores.get(model)
        if hit is not None:
            return hit
        entry, beta, err = self._evaluate(model)
        self._store(model, entry, beta, err)
        return entry

    def _store(self, model, entry, beta, err):
        self.scores[model] = entry
        if beta is not None:
            self.betas[model] = beta
        if err is not None:
            self.failures[model] = err
            log.debug("model %s failed: %s", model, err)

    def score_many(self, models: Sequence[ModelIndex],
                   executor: Optional[Executor] = None) -> List[ScoredModel]:
        missing = [m for m in dict.fromkeys(models) if m not in self.scores]
        if executor is not None and len(missing) > 1:
            for m, result in zip(missing, executor.map(self._evaluate, missing)):
                self._store(m, *result)
        else:
            for m in missing:
                self.score(m)
        return [self.scores[m] for m in models]


def screen(dataset: Dataset, model: ModelIndex, current_beta, screen_size: int) -> List[int]:
    """Columns outside ``model`` most correlated (in absolute value) with the residual.

    Ties are broken by the smaller column index.
    """
    if screen_size < 1:
        raise ValueError("screen_size must be >= 1")
    x, y = dataset.x, dataset.y
    resid = y - x[:, list(model)] @ np.asarray(current_beta, dtype=float) if model else y
    xc = x - x.mean(axis=0)
    rc = resid - resid.mean()
    denom = np.sqrt(np.sum(xc * xc, axis=0) * float(rc @ rc))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.abs(xc.T @ rc) / denom
    corr = np.nan_to_num(corr, nan=0.0)
    corr[list(model)] = -1.0
    order = np.lexsort((np.arange(dataset.p), -corr))
    out = [int(j) for j in order if corr[j] >= 0.0]
    return out[:screen_size]


def neighbors(model: ModelIndex, p: int, q_n: int, candidates=None):
    """Addition, deletion and swap neighbours of ``model``.

    ``candidates`` restricts the columns that may enter (all columns when
    ``None``).  Additions are only produced while ``|model| < q_n``.
    """
    members = set(model)
    pool = sorted({int(j) for j in (range(p) if candidates is None else candidates)} - members)
    additions = []
    if len(model) < q_n:
        additions = [tuple(sorted(model + (j,))) for j in pool]
    deletions = [model[:i] + model[i + 1:] for i in range(len(model))]
    swaps = []
    for i in range(len(model)):
        rest = model[:i] + model[i + 1:]
        swaps.extend(tuple(sorted(rest + (j,))) for j in pool)
    return additions, deletions, swaps


def start_model(dataset: Dataset) -> ModelIndex:
    """Single best column by absolute marginal correlation with the response."""
    return (screen(dataset, (), np.zeros(0), 1)[0],)


def screening_path(dataset: Dataset, max_size: int) -> List[ModelIndex]:
    """Nested models from greedy residual screening with least-squares refits.

    The first entry is ``start_model``; each later one adds the column most
    correlated with the current least-squares residual.
    """
    model: ModelIndex = ()
    beta = np.zeros(0)
    path = []
    limit = min(max_size, dataset.n - 1, dataset.p)
    while len(model) < limit:
        model = tuple(sorted(model + (screen(dataset, model, beta, 1)[0],)))
        xk = dataset.x[:, list(model)]
        beta = np.linalg.lstsq(xk, dataset.y, rcond=None)[0]
        path.append(model)
    return path


def _polish(dataset, scorer, model, screen_size, executor):
    """Greedy ascent over screened neighbourhoods until no neighbour improves."""
    current = scorer.score(model)
    scored = []
    while True:
        beta = scorer.betas.get(current.model, np.zeros(len(current.model)))
        cands = sum(neighbors(current.model, dataset.p, scorer.q_n,
                              screen(dataset, current.model, beta, screen_size)), [])
        if not cands:
            return scored
        entries = scorer.score_many(cands, executor)
        scored.extend(entries)
        best = min(entries, key=_rank_key)
        if _rank_key(best) >= _rank_key(current):
            return scored
        current = best


def run_search(dataset: Dataset, cfg: HyperConfig, scfg: SearchConfig,
               executor: Optional[Executor] = None,
               scorer: Optional[ModelScorer] = None) -> ScoredModelSet:
    """Seeded stochastic search; identical inputs give identical results."""
    if not dataset.standardized:
        raise ValueError("run_search expects a standardized dataset")
    scorer = scorer or ModelScorer(dataset, cfg)
    rng = np.random.Generator(np.random.Philox(scfg.seed))
    q_n = scorer.q_n
    screen_size = scfg.resolved_screen_size(dataset.n)

    current = start_model(dataset)
    first = scorer.score(current)
    if current in scorer.failures:
        raise NLSelectError(f"initial model {current} failed: {scorer.failures[current]}")
    seen = {current: first}
    if scfg.path_start:
        path = screening_path(dataset, q_n)
        for m, entry in zip(path, scorer.score_many(path, executor)):
            seen[m] = entry
        current = min((seen[m] for m in path), key=_rank_key).model
    visits = [current]
    for temp in scfg.temperature_ladder:
        for _ in range(scfg.iterations_per_temperature):
            beta = scorer.betas.get(current, np.zeros(len(current)))
            screened = screen(dataset, current, beta, screen_size)
            adds, dels, swaps = neighbors(current, dataset.p, q_n, screened)
            cands = adds + dels + swaps
            if not cands:
                break
            scored = scorer.score_many(cands, executor)
            for m, entry in zip(cands, scored):
                seen[m] = entry
            lp = np.array([e.log_posterior_unnorm for e in scored])
            if not np.any(np.isfinite(lp)):
                continue
            w = np.exp((lp - np.max(lp)) / temp)
            cdf = np.cumsum(w)
            pick = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            current = cands[min(pick, len(cands) - 1)]
            visits.append(current)
    if scfg.polish:
        best = min(seen.values(), key=_rank_key).model
        for entry in _polish(dataset, scorer, best, screen_size, executor):
            seen[entry.model] = entry
    failures = {m: scorer.failures[m] for m in seen if m in scorer.failures}
    return ScoredModelSet(entries=seen, visits=visits, failures=failures)
