import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlselect.data import Dataset
from nlselect.errors import SingularDesign
from nlselect.search import SearchConfig, run_search
from nlselect.simulation import (LARGE_PATTERN, MIXED_PATTERN, METRIC_HEADER, RATIO_HEADER,
                                 RatioRow, SimSpec, make_covariance, mspe, ratio_experiment,
                                 repetition_rng, roc_auc, roc_points, sample_dataset,
                                 scenario_model, selection_metrics, to_csv)
from nlselect.priors import HyperConfig


def test_covariance_entries():
    ar = make_covariance("ar1", 5)
    assert ar.dense()[0, 1] == 0.5 and ar.dense()[0, 2] == 0.25
    assert ar.entry(1, 3) == 0.25
    assert np.array_equal(make_covariance("iso", 4).dense(), np.eye(4))


@pytest.mark.parametrize("p", [2, 10, 200])
def test_compound_symmetry_eigenvalues(p):
    eig = np.linalg.eigvalsh(make_covariance("cs", p).dense())
    assert eig[0] == pytest.approx(0.5) and eig[-1] == pytest.approx(1 + (p - 1) * 0.5)


@pytest.mark.parametrize("design", ["iso", "cs", "ar1"])
def test_sampler_covariance_converges(design):
    cov = make_covariance(design, 5)
    x = cov.sample(np.random.default_rng(9), 20000)
    assert np.max(np.abs(np.cov(x, rowvar=False) - cov.dense())) <= 0.05


def test_sample_dataset_patterns():
    sim = sample_dataset(SimSpec(p=100), rep=0)
    assert sorted(np.abs(sim.beta0[list(sim.truth)])) == pytest.approx(sorted(LARGE_PATTERN))
    assert LARGE_PATTERN == pytest.approx(tuple(np.arange(1.1, 2.05, 0.1)))
    assert sim.dataset.check_standardized() and sim.dataset.n == 20
    mixed = sample_dataset(SimSpec(p=100, beta_pattern="mixed"), rep=0)
    assert sorted(np.abs(mixed.beta0[list(mixed.truth)])) == pytest.approx(sorted(MIXED_PATTERN))
    pos = sample_dataset(SimSpec(p=100, sign_flip_prob=0.0), rep=3)
    assert np.all(pos.beta0[list(pos.truth)] > 0)


def test_sample_dataset_custom_and_reproducible():
    beta = np.zeros(30)
    beta[[2, 7]] = [1.0, -2.0]
    spec = SimSpec(p=30, n=12, beta_pattern=tuple(beta), sign_flip_prob=0.0)
    sim = sample_dataset(spec, rep=1)
    assert sim.truth == (2, 7) and np.array_equal(sim.beta0, beta)
    again = sample_dataset(spec, rep=1)
    assert np.array_equal(sim.dataset.x, again.dataset.x)
    assert not np.array_equal(sim.dataset.x, sample_dataset(spec, rep=2).dataset.x)


def test_simspec_validation():
    with pytest.raises(ValueError):
        SimSpec(p=50)  # n = 10 < 12
    with pytest.raises(ValueError):
        SimSpec(p=100, design="toeplitz")
    with pytest.raises(ValueError):
        SimSpec(p=100, beta_pattern="huge")


@given(st.integers(1, 4), st.integers(0, 1000))
def test_scenario_models(scenario, seed):
    truth = tuple(range(3, 13))
    m = scenario_model(truth, 60, scenario, np.random.default_rng(seed))
    size = {1: 5, 2: 20, 3: 5, 4: 20}[scenario]
    assert len(m) == size and m != truth
    if scenario == 1:
        assert set(m) < set(truth)
    if scenario == 2:
        assert set(truth) < set(m)
    if scenario == 4:
        assert not set(truth) <= set(m)


def test_metric_examples():
    rates = lambda m: (m.ppv, m.tpr, m.fpr)
    assert rates(selection_metrics((0, 1), (0, 1), 5)) == (1.0, 1.0, 0.0)
    assert rates(selection_metrics((), (0, 1), 5)) == (0.0, 0.0, 0.0)
    assert selection_metrics((), (), 5).ppv == 1.0
    m = selection_metrics((1, 2), (0, 1), 5)
    assert (m.ppv, m.tpr) == (0.5, 0.5) and m.fpr == pytest.approx(1 / 3)


@given(st.integers(1, 40).flatmap(lambda p: st.tuples(
    st.just(p), st.sets(st.integers(0, p - 1)), st.sets(st.integers(0, p - 1)))))
def test_metric_identities(args):
    p, sel, tru = args
    m = selection_metrics(tuple(sorted(sel)), tuple(sorted(tru)), p)
    assert 0 <= m.ppv <= 1 and 0 <= m.tpr <= 1 and 0 <= m.fpr <= 1
    assert m.tp + m.fn == len(tru) and m.fp + m.tn == p - len(tru)


def test_roc_endpoints_and_monotone(small_data):
    res = run_search(small_data, HyperConfig(), SearchConfig((2.0, 1.0), 10))
    pts = roc_points(small_data, (0, 1), res)
    assert (pts[0].fpr, pts[0].tpr) == (0.0, 0.0)
    assert (pts[-1].threshold, pts[-1].fpr, pts[-1].tpr) == (0.0, 1.0, 1.0)
    assert all(a.fpr <= b.fpr and a.tpr <= b.tpr for a, b in zip(pts, pts[1:]))
    assert roc_auc(pts) >= 0.95


def test_mspe_cases():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((30, 4))
    y = x @ np.array([1.0, -2.0, 0.0, 0.0])
    train, test = Dataset(x[:20], y[:20]), Dataset(x[20:], y[20:])
    assert mspe(train, test, ()) == pytest.approx(np.mean(test.y ** 2))
    assert mspe(train, test, (0, 1)) <= 1e-20
    noisy = Dataset(x, y + rng.standard_normal(30))
    coef = np.linalg.lstsq(x, noisy.y, rcond=None)[0]
    assert mspe(noisy, noisy, (0, 1, 2, 3)) == pytest.approx(np.mean((noisy.y - x @ coef) ** 2))
    dup = Dataset(np.column_stack([x[:, 0], x[:, 0]]), y)
    with pytest.raises(SingularDesign):
        mspe(dup, dup, (0, 1))


def test_ratio_experiment_small_and_csv():
    base = SimSpec(p=60, n=30, repetitions=2, seed=4)
    rows = ratio_experiment(base, scenarios=(1, 3), p_values=(60,))
    assert [(r.p, r.scenario) for r in rows] == [(60, 1), (60, 3)]
    assert all(r.mean_log_ratio < 0 for r in rows)
    text = to_csv(rows, RATIO_HEADER)
    assert text.splitlines()[0] == "p,scenario,design,mean_log_ratio,stderr"
    assert text == to_csv(ratio_experiment(base, (1, 3), (60,)), RATIO_HEADER)


def test_repetition_streams_independent():
    a = repetition_rng(0, 100, 1).random(3)
    b = repetition_rng(0, 100, 2).random(3)
    assert not np.array_equal(a, b)
    assert METRIC_HEADER == ("p", "design", "pattern", "method", "ppv", "tpr", "fpr")


def test_ratio_inadmissible_double_size_is_minus_inf():
    # p=100 gives n=20, and a 20-column model exceeds the n-1 cap
    rows = ratio_experiment(SimSpec(p=100, repetitions=2, seed=4), scenarios=(1, 2), p_values=(100,))
    by = {r.scenario: r for r in rows}
    assert by[1].mean_log_ratio < 0 and np.isfinite(by[1].stderr)
    assert by[2].mean_log_ratio == -np.inf and np.isnan(by[2].stderr)
