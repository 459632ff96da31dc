import json

import numpy as np
import pytest

from nlselect.cli import build_parser, ingest_csv, main, resolve_seed, write_dataset_csv
from nlselect.errors import MalformedCsv, MissingColumn, ZeroVarianceColumn
from nlselect.verify import fixture


def _write(path, text):
    path.write_text(text)
    return path


def test_ingest_constant_column(tmp_path):
    f = _write(tmp_path / "c.csv", "a,b,y\n1,5,1\n2,5,3\n3,5,2\n")
    with pytest.raises(ZeroVarianceColumn, match="b"):
        ingest_csv(f, "y")


def test_ingest_standardizes(tmp_path):
    rng = np.random.default_rng(0)
    rows = "\n".join(",".join(f"{v:.6f}" for v in r) for r in rng.normal(3, 2, (12, 4)))
    f = _write(tmp_path / "d.csv", "a,b,c,y\n" + rows + "\n")
    data = ingest_csv(f, "y")
    assert data.columns == ("a", "b", "c")
    assert np.all(np.abs(data.x.mean(axis=0)) <= 1e-10) and abs(data.y.mean()) <= 1e-10
    assert data.check_standardized()


@pytest.mark.parametrize("text,err", [
    ("a,y\n1,2\n", MalformedCsv),
    ("a,y\n1,2\n3\n4,5\n", MalformedCsv),
    ("a,y\n1,x\n3,4\n", MalformedCsv),
    ("a,a,y\n1,2,3\n4,5,6\n", MalformedCsv),
    ("a,b\n1,2\n3,4\n", MissingColumn),
])
def test_ingest_errors(tmp_path, text, err):
    with pytest.raises(err):
        ingest_csv(_write(tmp_path / "e.csv", text), "y")


def test_roundtrip_idempotent(tmp_path, small_data):
    f = tmp_path / "s.csv"
    write_dataset_csv(f, small_data)
    again = ingest_csv(f, "y")
    assert np.allclose(again.x, small_data.x, atol=1e-12)
    assert np.allclose(again.y, small_data.y, atol=1e-12)


def test_seed_env_override(monkeypatch):
    args = build_parser().parse_args(["verify", "--seed", "3"])
    assert resolve_seed(args) == 3
    monkeypatch.setenv("NLSELECT_SEED", "17")
    assert resolve_seed(args) == 17


def test_parser_validation():
    p = build_parser()
    for bad in (["simulate", "--tau", "fixed:-1"], ["simulate", "--model-prior", "flat"],
                ["simulate", "--design", "toeplitz"], ["ratio", "--p", "1,a"]):
        with pytest.raises(SystemExit):
            p.parse_args(bad)
    args = p.parse_args(["simulate", "--tau", "fixed:0.072", "--model-prior", "complexity:1,2"])
    assert args.tau == 0.072 and str(args.model_prior) == "complexity:1,2"


def test_select_deterministic(tmp_path, monkeypatch):
    monkeypatch.delenv("NLSELECT_SEED", raising=False)
    data = fixture(80, 8, [2.0, -1.5, 0, 0, 0, 0, 0, 0], seed=1)
    f = tmp_path / "data.csv"
    write_dataset_csv(f, data)
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        code = main(["select", "--data", str(f), "--response", "y", "--holdout", "--iters", "5",
                     "--temps", "2,1", "--out", str(out)])
        assert code == 0
        outs.append(out)
    first = (outs[0] / "select.json").read_bytes()
    assert first == (outs[1] / "select.json").read_bytes()
    res = json.loads(first)
    assert res["map_columns"] == ["x0", "x1"] and res["mspe"] > 0
    assert (outs[0] / "top_models.csv").read_text().startswith("rank,model,size")
    manifest = json.loads((outs[0] / "manifest.json").read_text())
    assert manifest["seed"] == 0 and "numpy" in manifest["versions"]


def test_simulate_and_ratio_small(tmp_path):
    out = tmp_path / "sim"
    code = main(["simulate", "--p", "60", "--n", "30", "--reps", "1", "--iters", "3", "--temps", "1",
                 "--out", str(out)])
    assert code == 0
    lines = (out / "metrics.csv").read_text().splitlines()
    assert lines[0] == "p,design,pattern,method,ppv,tpr,fpr" and len(lines) == 3
    code = main(["ratio", "--p", "60", "--n", "30", "--reps", "2", "--scenarios", "1,2", "--out", str(out)])
    assert code == 0
    assert (out / "ratio.csv").read_text().splitlines()[0] == "p,scenario,design,mean_log_ratio,stderr"


def test_verify_exit_zero(tmp_path):
    assert main(["verify", "--draws", "100000", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["passed"] and all(c["passed"] for c in report["checks"])


def test_errors_give_exit_two(tmp_path):
    f = _write(tmp_path / "c.csv", "a,b,y\n1,5,1\n2,5,3\n3,5,2\n")
    assert main(["select", "--data", str(f), "--response", "y", "--out", str(tmp_path / "o")]) == 2
