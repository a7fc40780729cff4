import json

import pytest

from rcinar import cli
from rcinar.engine import StationaryMode

SIMULATE = """\
experiment = "simulate"
n = 200
seed = 42
model.phi.kind = "degenerate"
model.phi.p = 0.5
model.z.kind = "poisson"
model.z.lambda = 2.0
"""

EXTREMES = """\
n = 1000
reps = 3000
seed = 11
model.phi.kind = "beta"
model.phi.a = 2.0
model.phi.b = 2.0
model.z.kind = "pareto"
model.z.alpha = 1.5
"""


def test_minimal_config_gets_defaults():
    cfg = cli.parse_config(SIMULATE)
    assert cfg.experiment == "simulate" and cfg.n == 200 and cfg.seed == 42
    assert cfg.sampler.epsilon == 1e-6 and cfg.sampler.mode is StationaryMode.TRUNCATED_SERIES
    assert cfg.sampler.resolved_gamma(cfg.model) == 1.0
    assert cfg.model.stationary_mean == 4.0


def test_phi_one_rejected_with_a1():
    with pytest.raises(ValueError, match=r"\(A1\)"):
        cli.parse_config(SIMULATE.replace("p = 0.5", "p = 1.0"))


def test_case_model_mismatch():
    text = EXTREMES + 'experiment = "sums"\ncase = "subcritical"\n'
    with pytest.raises(ValueError, match="mismatch"):
        cli.parse_config(text)


def test_unknown_key_is_named():
    with pytest.raises(cli.ConfigError, match="model.z.shape"):
        cli.parse_config(SIMULATE + "model.z.shape = 3\n")


def test_missing_required_key():
    with pytest.raises(cli.ConfigError, match="'reps'"):
        cli.parse_config(EXTREMES.replace("reps = 3000\n", "") + 'experiment = "extremes"\n')
    with pytest.raises(cli.ConfigError):
        cli.parse_config(SIMULATE.replace("n = 200", "n = 0"))


def test_malformed_document():
    with pytest.raises(cli.ConfigError, match="malformed"):
        cli.parse_config("n = = 3")


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_simulate_run_writes_artifacts(tmp_path):
    code = cli.main(["simulate", "--config", _write(tmp_path, SIMULATE), "--out", str(tmp_path / "o")])
    assert code == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["schema"] == 1 and summary["experiment"] == "simulate" and summary["seed"] == 42
    assert set(summary) == {"schema", "experiment", "model", "n", "reps", "seed", "estimates", "targets", "ks", "pass"}
    raw = (tmp_path / "o" / "data.csv").read_bytes()
    assert raw.startswith(b"step,x,survivors,z\n") and b"\r" not in raw
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["seed"] == 42 and manifest["stream_ids"] and manifest["config_hash"]


def test_same_seed_same_files(tmp_path):
    cfg = _write(tmp_path, SIMULATE)
    cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
    cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "b")])
    for f in ("summary.json", "data.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_seed_override_changes_output(tmp_path):
    cfg = _write(tmp_path, SIMULATE)
    cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
    cli.main(["simulate", "--config", cfg, "--seed", "43", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "data.csv").read_bytes() != (tmp_path / "b" / "data.csv").read_bytes()


def test_workers_and_manifest_reproduce_bytes(tmp_path):
    cfg = _write(tmp_path, EXTREMES)
    cli.main(["extremes", "--config", cfg, "--workers", "1", "--out", str(tmp_path / "w1")])
    cli.main(["extremes", "--config", cfg, "--workers", "3", "--out", str(tmp_path / "w3")])
    cli.main(["extremes", "--manifest", str(tmp_path / "w1" / "manifest.json"), "--out", str(tmp_path / "m")])
    for d in ("w3", "m"):
        for f in ("summary.json", "data.csv"):
            assert (tmp_path / "w1" / f).read_bytes() == (tmp_path / d / f).read_bytes()


def test_manifest_rejects_changed_config(tmp_path):
    cfg = _write(tmp_path, EXTREMES)
    cli.main(["extremes", "--config", cfg, "--out", str(tmp_path / "a")])
    code = cli.main(["extremes", "--manifest", str(tmp_path / "a" / "manifest.json"), "--reps", "1000",
                     "--out", str(tmp_path / "b")])
    assert code == 1


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.toml")]) == 1
    assert "missing.toml" in capsys.readouterr().err
    assert cli.main(["simulate", "--config", _write(tmp_path, SIMULATE.replace("p = 0.5", "p = 1.0"))]) == 1
    # an absurd tolerance forces the statistical verdict to fail
    lln = SIMULATE.replace("n = 200", "n = 1000") + "tolerance = 1e-12\n"
    assert cli.main(["lln", "--config", _write(tmp_path, lln), "--out", str(tmp_path / "l")]) == 2


def test_sample_cap(tmp_path):
    text = EXTREMES + "sample_cap = 10\n"
    cli.main(["extremes", "--config", _write(tmp_path, text), "--out", str(tmp_path / "o")])
    assert len((tmp_path / "o" / "data.csv").read_text().splitlines()) == 11


@pytest.mark.parametrize("experiment,extra", [
    ("stationary", "reps = 2000\n"),
    ("tails", "reps = 20000\nphi_value = 0.6\n"),
    ("regen", "reps = 10000\n"),
    ("ytail", "reps = 10000\ntarget_reps = 1000\n"),
    ("genealogy", "n = 30\nreps = 500\n"),
    ("sums", 'n = 50\nreps = 500\ncase = "midstable"\n'),
])
def test_every_experiment_runs(tmp_path, experiment, extra):
    text = "\n".join(line for line in EXTREMES.splitlines() if not line.startswith(("n =", "reps ="))) + "\n" + extra
    code = cli.main([experiment, "--config", _write(tmp_path, text), "--out", str(tmp_path / "o")])
    assert code in (0, 2)
    assert json.loads((tmp_path / "o" / "summary.json").read_text())["experiment"] == experiment


def test_verify_small_scale(tmp_path):
    text = "verify.scale = 0.02\nverify.only = [1, 7, 14]\n"
    code = cli.main(["verify", "--config", _write(tmp_path, text), "--out", str(tmp_path / "v")])
    summary = json.loads((tmp_path / "v" / "summary.json").read_text())
    assert code in (0, 2) and set(summary["estimates"]) == {"1", "7", "14"}
