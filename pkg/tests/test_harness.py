import json
import os

import numpy as np
import pytest
from scipy import linalg

from matsubara_pimd.estimators import CorrelationCurve, decay_rate_fit
from matsubara_pimd.harness import run_cli
from matsubara_pimd.harness.config import (
    ConfigError,
    OUTPUT_ENV,
    config_hash,
    default_config,
    resolve,
    total_steps,
)
from matsubara_pimd.harness.experiments import read_csv, run_experiment
from matsubara_pimd.modes import matsubara_frequencies
from matsubara_pimd.oracle import quantum_average_1d
from matsubara_pimd.estimators import get_observable
from matsubara_pimd.potentials import builtin_potential


def rows_of(path):
    comments, columns, rows = read_csv(path)
    return comments, columns, rows


# -- configuration -----------------------------------------------------------------


def test_hash_ignores_key_order():
    cfg = default_config("timeavg_error")
    shuffled = {k: dict(reversed(list(v.items()))) for k, v in reversed(list(cfg.items()))}
    assert config_hash(cfg) == config_hash(shuffled)
    cfg2 = json.loads(json.dumps(cfg))
    cfg2["sampler"]["seed"] += 1
    assert config_hash(cfg2) != config_hash(cfg)


def test_resolve_precedence(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"sampler": {"beta": 3.0, "seed": 1}}))
    cfg = resolve("sample", str(path), [("sampler.seed", 9)])
    assert cfg["sampler"]["beta"] == 3.0 and cfg["sampler"]["seed"] == 9
    assert cfg["sampler"]["potential"] == "model1d"
    assert total_steps(cfg) == round(1e4 * 16)
    cfg = resolve("sample", overrides=[("experiment.n_steps", 50)])
    assert total_steps(cfg) == 50


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="nope.json"):
        resolve("sample", str(tmp_path / "nope.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        resolve("sample", str(bad))
    with pytest.raises(ConfigError):
        resolve("sample", overrides=[("sampler.variant", "nope")])
    with pytest.raises(ConfigError):
        resolve("sample", overrides=[("experiment.replicas", 0)])
    with pytest.raises(ConfigError):
        resolve("sample", overrides=[("experiment.n_steps", 10), ("experiment.burn_in", 10)])
    with pytest.raises(ConfigError):
        resolve("sample", overrides=[("beta", 1.0)])
    with pytest.raises(ConfigError):
        resolve("sample", overrides=[("sampler.potential", "morse")])
    with pytest.raises(ConfigError):
        resolve("unknown")


def test_paper_scale_preset():
    cfg = default_config("timeavg_error", paper_scale=True)
    assert cfg["experiment"]["T"] == 5e6 and 129 in cfg["experiment"]["n_values"]
    assert default_config("timeavg_error")["experiment"]["T"] == 1e5


def test_output_dir_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "envout"))
    assert default_config("sample")["output"]["dir"] == str(tmp_path / "envout")


# -- CLI ---------------------------------------------------------------------------


def test_cli_reference(tmp_path, capsys):
    code = run_cli(["reference", "--potential", "model1d", "--beta", "2",
                    "--observable", "sinhalfpi", "--output-dir", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    expected = quantum_average_1d(builtin_potential("model1d"), get_observable("sinhalfpi"), 2.0)
    assert f"quantum={expected!r}" in out
    _, columns, rows = rows_of(tmp_path / "reference.csv")
    assert columns == ["potential", "beta", "observable", "quantum", "classical"]
    assert float(rows[0]["quantum"]) == expected


def test_cli_rates(capsys):
    assert run_cli(["rates", "--m1", "0", "--m2", "0", "--a", "1", "--beta", "1"]) == 0
    assert "lambda1=1.0 lambda2=0.2" in capsys.readouterr().out
    assert run_cli(["rates", "--m2", "1", "--beta", "1"]) == 0
    assert "lambda1=undefined" in capsys.readouterr().out


def test_cli_missing_config(tmp_path, capsys):
    missing = str(tmp_path / "missing.json")
    assert run_cli(["sample", "--config", missing]) == 2
    assert missing in capsys.readouterr().err


def test_cli_usage_errors(capsys):
    assert run_cli(["frobnicate"]) == 2
    assert run_cli(["sample", "--no-such-flag"]) == 2
    assert run_cli([]) == 2
    assert run_cli(["sample", "--set", "novalue"]) == 2
    assert run_cli(["rates", "--m1", "-1", "--beta", "1"]) == 2
    assert "usage" in capsys.readouterr().err


def test_cli_runtime_error_exit_code(tmp_path, capsys):
    # Too short to resolve the requested lags.
    code = run_cli(["correlation", "--n-steps", "40", "--output-dir", str(tmp_path),
                    "--set", "experiment.n_values=[3]", "--set", 'experiment.betas=[1]'])
    assert code == 1
    assert "InsufficientDataError" in capsys.readouterr().err


def test_cli_sample_writes_hashed_outputs(tmp_path, capsys):
    code = run_cli(["sample", "--n-steps", "2000", "--seed", "4", "--output-dir", str(tmp_path)])
    assert code == 0
    assert "sample: A=" in capsys.readouterr().out
    comments, columns, rows = rows_of(tmp_path / "sample.csv")
    record = json.loads((tmp_path / "sample.json").read_text())
    assert f"config_hash={record['config_hash']}" in comments
    assert columns == ["variant", "beta", "N", "T", "A", "stderr"]
    assert record["files"]["csv"].endswith("sample.csv") and record["wall_time"] > 0
    assert record["config"]["sampler"]["seed"] == 4


# -- experiments ---------------------------------------------------------------------


def small(name, **over):
    pairs = [(f"{k.split('__')[0]}.{k.split('__')[1]}", v) for k, v in over.items()]
    return resolve(name, overrides=pairs)


def test_determinism_and_worker_independence(tmp_path):
    cfg = small("timeavg_error", experiment__T=100.0, experiment__betas=[1.0],
                experiment__n_values=[3, 5], experiment__replicas=2)
    run_experiment(cfg, str(tmp_path / "a"))
    run_experiment(cfg, str(tmp_path / "b"))
    cfg["experiment"]["workers"] = 2
    run_experiment(cfg, str(tmp_path / "c"))
    a = (tmp_path / "a" / "timeavg_error.csv").read_bytes()
    assert a == (tmp_path / "b" / "timeavg_error.csv").read_bytes()
    assert a == (tmp_path / "c" / "timeavg_error.csv").read_bytes()


def test_csv_uses_full_precision(tmp_path):
    cfg = small("sample", experiment__n_steps=500)
    run_experiment(cfg, str(tmp_path))
    _, _, rows = rows_of(tmp_path / "sample.csv")
    text = rows[0]["A"]
    assert float(format(float(text), ".17g")) == float(text)
    assert len(text.lstrip("-").replace(".", "").lstrip("0")) >= 15


def test_timeavg_error_column_is_exact_difference(tmp_path):
    cfg = small("timeavg_error", experiment__T=200.0, experiment__betas=[2.0],
                experiment__n_values=[3])
    run_experiment(cfg, str(tmp_path))
    _, columns, rows = rows_of(tmp_path / "timeavg_error.csv")
    assert {"variant", "beta", "N", "T", "A", "reference", "error"} <= set(columns)
    for r in rows:
        assert float(r["error"]) == float(r["A"]) - float(r["reference"])


def test_timeavg_error_harmonic_sweep(tmp_path):
    # The harmonic target is Gaussian; sin(pi q / 2) is odd so the exact value is 0.
    cfg = small("timeavg_error", sampler__potential="harmonic", experiment__T=1e4,
                experiment__betas=[2.0])
    run_experiment(cfg, str(tmp_path))
    _, _, rows = rows_of(tmp_path / "timeavg_error.csv")
    assert len(rows) == 6
    for r in rows:
        assert abs(float(r["reference"])) < 1e-10
        assert abs(float(r["error"])) <= 0.02


def test_sample_harmonic_q2_matches_finite_n_gaussian(tmp_path):
    beta = 2.0
    w = matsubara_frequencies(9, beta).omegas
    exact = np.sum(1 / (w**2 + 1)) / beta
    cfg = small("sample", sampler__potential="harmonic", experiment__observable="q2",
                experiment__T=2e4)
    run_experiment(cfg, str(tmp_path))
    _, _, rows = rows_of(tmp_path / "sample.csv")
    # The run is short; compare within the reported batch-means error.
    assert abs(float(rows[0]["A"]) - exact) <= 4 * float(rows[0]["stderr"])


def exact_centroid_rate(gamma, threshold=0.1, dt=1 / 4):
    # Centroid of the harmonic system (a = 1): d xi = eta dt,
    # d eta = (-xi - gamma eta) dt + noise. Its stationary correlation is
    # the (0, 0) entry of expm(A t) applied to the identity covariance.
    a = np.array([[0.0, 1.0], [-1.0, -gamma]])
    lags = dt * np.arange(200)
    c = np.array([linalg.expm(a * t)[0, 0] for t in lags])
    return decay_rate_fit(CorrelationCurve(0, lags, c, len(lags)), threshold)


def test_correlation_harmonic_centroid_rate(tmp_path):
    cfg = small("correlation", sampler__potential="harmonic", experiment__T=2e4,
                experiment__betas=[2.0], experiment__variants=["matsubara_underdamped"])
    rec = run_experiment(cfg, str(tmp_path))
    _, columns, rows = rows_of(tmp_path / "correlation.csv")
    assert columns == ["variant", "beta", "N", "mode", "lag", "C"]
    assert all(float(r["C"]) == 1.0 for r in rows if float(r["lag"]) == 0.0)
    assert {int(r["mode"]) for r in rows} == {0, 1, 2, 3, 4}
    oracle = exact_centroid_rate(1.0)
    rates = [r["rate"] for r in rec.summary["rates"] if r["mode"] == 0]
    assert len(rates) == 3
    for rate in rates:
        assert rate == pytest.approx(oracle, rel=0.1)
    assert max(rates) / min(rates) < 1.1


def test_radial_density_columns_and_normalization(tmp_path):
    cfg = small("radial_density", experiment__T=100.0, experiment__n_values=[3],
                experiment__bins=20)
    run_experiment(cfg, str(tmp_path))
    _, columns, rows = rows_of(tmp_path / "radial_density.csv")
    assert columns == ["variant", "N", "r", "density", "stderr", "classical"]
    for v in ("matsubara_underdamped", "standard_underdamped"):
        dens = np.array([float(r["density"]) for r in rows if r["variant"] == v])
        assert len(dens) == 20
        assert np.sum(dens) * 4.0 / 20 == pytest.approx(1.0, abs=1e-3)
    classical = np.array([float(r["classical"]) for r in rows[:20]])
    assert np.sum(classical) * 0.2 == pytest.approx(1.0, abs=1e-3)


def test_module_entry_point(tmp_path):
    import subprocess
    import sys
    env = dict(os.environ, **{OUTPUT_ENV: str(tmp_path)})
    out = subprocess.run([sys.executable, "-m", "matsubara_pimd", "rates", "--m1", "0",
                          "--beta", "1"], capture_output=True, text=True, env=env)
    assert out.returncode == 0 and "lambda1=1.0" in out.stdout
