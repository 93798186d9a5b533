import csv

import numpy as np
import pytest

from esvm.config import ExperimentConfig, apply_overrides, load_config_text, parse_config_text
from esvm.errors import ConfigError
from esvm.experiments import (
    build_experiment,
    emit_acf_report,
    evaluation_seed,
    mean_predictive_functional,
    run_pipeline,
    run_replicates,
    summarize_replicates,
)
from esvm.targets import LabeledDataset
from esvm.variance import make_lag_window, spectral_variance

SMALL_TOY = ["n_burn=200", "n_train=2000", "n_test=2000"]


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_constant_functional_none():
    cfg = load_config_text(preset="toy", overrides=SMALL_TOY + ["functional=constant", "constant=2.75", "method=none"])
    res = run_pipeline(cfg)
    assert res.estimate == 2.75 and res.fit is None


def test_empty_basis_matches_none():
    base = SMALL_TOY + ["basis=none"]
    a = run_pipeline(load_config_text(preset="toy", overrides=base + ["method=none"]))
    b = run_pipeline(load_config_text(preset="toy", overrides=base + ["method=esvm"]))
    assert a.estimate == pytest.approx(b.estimate, abs=1e-12)


def test_toy_pipeline_symmetry():
    res = run_pipeline(load_config_text(preset="toy", overrides=["method=none"]))
    assert np.isfinite(res.estimate)
    assert abs(res.estimate) <= 4 * np.sqrt(res.spectral_variance_raw / res.n_eval)


def test_replicates_deterministic():
    cfg = load_config_text(preset="toy", overrides=SMALL_TOY)
    a = run_replicates(cfg, 2)
    b = run_replicates(cfg, 2)
    for m in ("none", "evm", "esvm"):
        np.testing.assert_array_equal(a.estimates[m], b.estimates[m])
        assert a.summaries[m].row() == b.summaries[m].row()


def test_replicate_study_files(tmp_path):
    cfg = load_config_text(preset="toy", overrides=SMALL_TOY)
    summary, long = run_replicates(cfg, 2).write(tmp_path)
    rows = _read(summary)
    assert rows[0] == ["method", "mean", "var", "min", "q1", "median", "q3", "max"]
    assert [r[0] for r in rows[1:]] == ["none", "evm", "esvm"]
    assert len(_read(long)) == 1 + 3 * 2


def test_evaluation_seed_differs():
    assert evaluation_seed(0) != 0
    assert 0 <= evaluation_seed(2**64 - 1) < 2**64


def test_summary_odd_length():
    s = summarize_replicates([5, 1, 4, 2, 3])
    assert (s.median, s.q1, s.q3, s.min, s.max) == (3, 2, 4, 1, 5)
    assert s.var == pytest.approx(2.5)


def test_summary_constant():
    s = summarize_replicates(np.full(7, 1.5))
    assert s.var == 0.0 and s.q1 == s.median == s.q3 == 1.5


def test_summary_sort_oracle(rng):
    x = rng.normal(size=37)
    s = summarize_replicates(x)
    srt = np.sort(x)

    def q(p):
        pos = p * (len(srt) - 1)
        lo = int(np.floor(pos))
        hi = min(lo + 1, len(srt) - 1)
        return srt[lo] + (pos - lo) * (srt[hi] - srt[lo])

    for p, v in ((0.25, s.q1), (0.5, s.median), (0.75, s.q3)):
        assert v == pytest.approx(q(p), abs=1e-12)


def test_summary_needs_two():
    with pytest.raises(ValueError):
        summarize_replicates([1.0])


def test_acf_report_identical_and_constant(tmp_path, rng):
    w = make_lag_window(5)
    h = rng.normal(size=100)
    rows = _read(emit_acf_report(h, h, h, w, tmp_path / "a.csv"))
    assert rows[0] == ["lag", "rho_raw", "rho_evm", "rho_esvm"]
    assert len(rows) == 1 + 5
    assert all(r[1] == r[2] == r[3] for r in rows[1:])
    c = np.full(100, 4.0)
    rows = _read(emit_acf_report(c, c, c, w, tmp_path / "b.csv"))
    assert all(float(v) == 0.0 for r in rows[1:] for v in r[1:])


def test_mean_predictive_values():
    test = LabeledDataset(np.array([[1.0, 2.0], [-1.0, 0.5]]), np.array([1, -1]))
    f = mean_predictive_functional(test)
    assert f(np.zeros(2)) == 0.5
    vals = [f(np.array([t, 0.0])) for t in (1.0, 5.0, 20.0, 40.0)]
    # only one point: increasing score drives the value to 1
    single = mean_predictive_functional(LabeledDataset(np.array([[1.0, 0.0]]), np.array([1])))
    seq = [single(np.array([t, 0.0])) for t in (1.0, 5.0, 20.0, 40.0)]
    assert all(a < b for a, b in zip(seq, seq[1:])) and seq[-1] == pytest.approx(1.0)
    assert all(np.isfinite(vals))


def test_mean_predictive_chain_oracle(rng):
    X = rng.normal(size=(6, 3))
    y = np.where(rng.random(6) < 0.5, -1, 1)
    f = mean_predictive_functional(LabeledDataset(X, y))
    chain = rng.normal(size=(10, 3))
    oracle = [sum(1 / (1 + np.exp(-y[i] * (t @ X[i]))) for i in range(6)) / 6 for t in chain]
    np.testing.assert_allclose(f(chain), oracle, atol=1e-12)


def test_config_parsing_and_overrides(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nstep_size = 0.05\nseed = 0x10  # hex\nbn = 20\n")
    cfg = load_config_text(p, preset="toy", overrides=["n_train=5000"])
    assert (cfg.step_size, cfg.seed, cfg.bn, cfg.n_train, cfg.target) == (0.05, 16, 20, 5000, "toy")
    with pytest.raises(ConfigError, match="a_key"):
        parse_config_text("a_key = 1")
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("seed = 1\nno equals sign\n")
    with pytest.raises(ConfigError):
        load_config_text(overrides=["nonsense=1"])


@pytest.mark.parametrize("overrides", [
    ["step_size=0"], ["sampler=sgld"], ["batch_size=3"], ["bn=1"], ["functional=mean_predictive"],
    ["target=logistic", "sampler=sgld_fp", "batch_size=5", "functional=mean_predictive"],
    ["method=magic"], ["n_train=abc"],
])
def test_config_rejections(overrides):
    with pytest.raises(ConfigError):
        load_config_text(preset="toy", overrides=overrides)


def test_gmm_preset_truncation():
    exp = build_experiment(load_config_text(preset="gmm"))
    assert exp.window(100_000).truncation == 48


def test_logistic_from_csv(tmp_path):
    r = np.random.default_rng(0)
    X = np.column_stack([np.ones(300), r.normal(size=(300, 2))])
    y = np.where(X @ [0.2, 1.0, -1.0] + r.logistic(size=300) > 0, 1, 0)
    p = tmp_path / "data.csv"
    p.write_text("\n".join(f"{a}," + ",".join(map(repr, row.tolist())) for a, row in zip(y, X)) + "\n")
    cfg = load_config_text(preset="logreg", overrides=[f"data_path={p}", "n_test_points=50", "g=250",
                                                       "n_burn=200", "n_train=500", "n_test=500"])
    res = run_pipeline(cfg)
    assert 0 < res.estimate < 1
