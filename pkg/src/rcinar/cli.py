"""Command line runner: ``rcinar <experiment> --config file.toml``.

The config is TOML with dotted keys (``model.phi.kind = "beta"``).  Every
run writes ``summary.json``, a raw-data ``data.csv`` and ``manifest.json``
into the output directory.  Exit status: 0 pass, 2 statistical failure,
1 error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import itertools
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from . import distributions as D
from . import engine as E
from . import genealogy as G
from . import limitlab as L
from . import verify as V
from .engine import ModelSpec, StationaryConfig, StationaryMode
from .rng import RngStream, stream_id_for

SCHEMA = 1
EXPERIMENTS = ("simulate", "stationary", "tails", "extremes", "sums", "regen", "genealogy", "ytail", "lln", "verify")
DEFAULT_SAMPLE_CAP = 10**7

KNOWN_KEYS = {
    "experiment", "n", "reps", "seed", "case", "out_dir", "workers", "phi_value", "compare_n", "presample",
    "cycles", "target_reps", "sample_cap", "k", "tolerance",
    "model.phi.kind", "model.phi.p", "model.phi.atoms", "model.phi.weights", "model.phi.a", "model.phi.b",
    "model.z.kind", "model.z.alpha", "model.z.sigma", "model.z.lambda", "model.z.q",
    "sampler.mode", "sampler.epsilon", "sampler.gamma", "sampler.burn_in",
    "verify.scale", "verify.only",
}

# (needs model, needs n, needs reps)
REQUIREMENTS = {
    "simulate": (True, True, False),
    "stationary": (True, False, True),
    "tails": (True, False, True),
    "extremes": (True, True, True),
    "sums": (True, True, True),
    "regen": (True, False, True),
    "genealogy": (True, True, True),
    "ytail": (True, False, True),
    "lln": (True, True, False),
    "verify": (False, False, False),
}

DEFAULT_TOLERANCE = {"tails": 0.15, "ytail": 0.2, "lln": 0.02}


class ConfigError(ValueError):
    pass


def _flatten(doc: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in doc.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def build_phi(flat: dict):
    kind = flat.get("model.phi.kind")
    if kind == "degenerate":
        return D.Degenerate(float(flat["model.phi.p"]))
    if kind == "atoms":
        return D.DiscreteAtoms(tuple(flat["model.phi.atoms"]), tuple(flat["model.phi.weights"]))
    if kind == "beta":
        return D.BetaShape(float(flat["model.phi.a"]), float(flat["model.phi.b"]))
    raise ConfigError(f"model.phi.kind must be degenerate, atoms or beta, got {kind!r}")


def build_innovation(flat: dict):
    kind = flat.get("model.z.kind")
    if kind == "pareto":
        return D.DiscretePareto(float(flat["model.z.alpha"]), float(flat.get("model.z.sigma", 1.0)))
    if kind == "poisson":
        return D.Poisson(float(flat["model.z.lambda"]))
    if kind == "geometric":
        return D.Geometric(float(flat["model.z.q"]))
    raise ConfigError(f"model.z.kind must be pareto, poisson or geometric, got {kind!r}")


@dataclass
class ExperimentConfig:
    experiment: str
    model: ModelSpec | None = None
    n: int | None = None
    reps: int | None = None
    seed: int = 0
    case: L.SumsCase | None = None
    out_dir: str = "out"
    workers: int = 1
    sampler: StationaryConfig = field(default_factory=StationaryConfig)
    phi_value: float | None = None
    compare_n: int | None = None
    presample: int = 10**6
    cycles: int = 10**5
    target_reps: int = 10**6
    sample_cap: int = DEFAULT_SAMPLE_CAP
    k: int | None = None
    tolerance: float | None = None
    verify_scale: float = 1.0
    verify_only: tuple | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def canonical(self) -> str:
        """The flat key/value document that fully determines the numbers (no output paths)."""
        keep = {k: v for k, v in self.raw.items() if k not in ("out_dir", "workers")}
        return json.dumps(keep, sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()


def config_from_flat(flat: dict) -> ExperimentConfig:
    unknown = sorted(set(flat) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    exp = flat.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}, got {exp!r}")
    needs_model, needs_n, needs_reps = REQUIREMENTS[exp]
    for key, needed in (("n", needs_n), ("reps", needs_reps)):
        if needed and key not in flat:
            raise ConfigError(f"experiment {exp} requires key {key!r}")
        if key in flat and int(flat[key]) < 1:
            raise ConfigError(f"{key} must be >= 1, got {flat[key]}")
    model = None
    if needs_model or "model.z.kind" in flat:
        try:
            model = ModelSpec(build_phi(flat), build_innovation(flat))
        except KeyError as exc:
            raise ConfigError(f"missing model key {exc.args[0]!r}") from None
    mode = StationaryMode(flat.get("sampler.mode", StationaryMode.TRUNCATED_SERIES.value))
    sampler = StationaryConfig(
        mode=mode,
        epsilon=float(flat.get("sampler.epsilon", 1e-6)),
        gamma=None if "sampler.gamma" not in flat else float(flat["sampler.gamma"]),
        burn_in_steps=int(flat.get("sampler.burn_in", 10**5)),
    )
    if model is not None:
        sampler.resolved_gamma(model)
    case = None
    if "case" in flat:
        try:
            case = L.SumsCase(flat["case"])
        except ValueError:
            raise ConfigError(f"case must be one of {', '.join(c.value for c in L.SumsCase)}") from None
    if exp == "sums":
        if case is None:
            raise ConfigError("experiment sums requires key 'case'")
        L.check_case(model, case)
    seed = int(flat.get("seed", 0))
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    only = flat.get("verify.only")
    return ExperimentConfig(
        experiment=exp,
        model=model,
        n=None if "n" not in flat else int(flat["n"]),
        reps=None if "reps" not in flat else int(flat["reps"]),
        seed=seed,
        case=case,
        out_dir=str(flat.get("out_dir", "out")),
        workers=int(flat.get("workers", 1)),
        sampler=sampler,
        phi_value=None if "phi_value" not in flat else float(flat["phi_value"]),
        compare_n=None if "compare_n" not in flat else int(flat["compare_n"]),
        presample=int(flat.get("presample", 10**6)),
        cycles=int(flat.get("cycles", 10**5)),
        target_reps=int(flat.get("target_reps", 10**6)),
        sample_cap=int(flat.get("sample_cap", DEFAULT_SAMPLE_CAP)),
        k=None if "k" not in flat else int(flat["k"]),
        tolerance=float(flat.get("tolerance", DEFAULT_TOLERANCE.get(exp, math.nan))),
        verify_scale=float(flat.get("verify.scale", 1.0)),
        verify_only=None if only is None else tuple(int(i) for i in only),
        raw=dict(flat),
    )


def parse_config(text: str) -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return config_from_flat(_flatten(doc))


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    stream_ids: list
    version: str
    started: str
    finished: str
    config: dict

    def to_json(self) -> str:
        return json.dumps({"schema": SCHEMA, **self.__dict__}, indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path) -> "RunManifest":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        doc.pop("schema", None)
        return cls(**doc)


# ---------------------------------------------------------------------------
# experiments; each returns (estimates, targets, ks, passed, columns, rows)


def _fit_dict(fit):
    return None if fit is None else fit.to_dict()


def _run_simulate(cfg, rng):
    path = E.simulate_path(cfg.model, cfg.n, 0, rng)
    est = {"mean": float(path.x[1:].mean()), "max": int(path.x.max())}
    rows = zip(range(cfg.n + 1), path.x.tolist(), path.survivors.tolist(), path.z.tolist())
    return est, {}, {}, True, ["step", "x", "survivors", "z"], rows


def _run_stationary(cfg, rng):
    s = L.stationary_sample(cfg.model, cfg.reps, rng, cfg.sampler, cfg.workers)
    est = {"mean": float(s.mean()), "max": int(s.max())}
    tgt = {}
    if math.isfinite(cfg.model.innovation_law.mean):
        tgt["mean"] = cfg.model.stationary_mean
    return est, tgt, {}, True, ["x"], ((int(v),) for v in s)


def _run_tails(cfg, rng):
    r = L.stationary_tail_experiment(cfg.model, cfg.reps, rng, cfg.sampler, cfg.k, cfg.workers)
    est = {"fit": _fit_dict(r.fit), "rel_error": r.rel_error}
    tgt = {"c": r.target}
    passed = r.rel_error <= cfg.tolerance
    if cfg.phi_value is not None:
        t = L.thinning_tail_check(cfg.model, cfg.phi_value, cfg.reps, rng.spawn("thinned"), cfg.k, cfg.workers)
        est["thinned_c_hat"], est["thinned_rel_error"] = t.c_hat, t.rel_error
        tgt["thinned_c"] = t.target
        passed = passed and t.rel_error <= cfg.tolerance
    return est, tgt, {}, passed, ["x"], ((int(v),) for v in r.sample)


def _run_extremes(cfg, rng):
    r = L.extremes_experiment(cfg.model, cfg.n, cfg.reps, rng, cfg.workers)
    est = {"b_n": r.b_n, "oracle_limit_distance": r.oracle_limit_distance,
           "oracle_limit_distance_inverse_exponent": r.oracle_limit_distance_inverse}
    ks = {"oracle": r.ks_oracle.to_dict(), "limit": r.ks_limit.to_dict()}
    rows = ((int(m), repr(float(m) / r.b_n)) for m in r.maxima)
    return est, {}, ks, r.ks_oracle.passed, ["max", "scaled"], rows


def _run_sums(cfg, rng):
    r = L.partial_sums_experiment(cfg.model, cfg.case, cfg.n, cfg.reps, rng, cfg.compare_n, cfg.presample,
                                  cfg.cycles, cfg.workers)
    est = {"a_n": r.a_n, "a_compare": r.a_compare, "compare_n": r.compare_n, "min": r.min_value,
           "hill": _fit_dict(r.hill), "long_run_variance": r.long_run_variance}
    ks = {"self": r.ks_self.to_dict()}
    passed = r.ks_self.passed
    if r.ks_gaussian is not None:
        ks["gaussian"] = r.ks_gaussian.to_dict()
        passed = passed and r.ks_gaussian.passed
    if cfg.case is L.SumsCase.SUB_CRITICAL:
        passed = passed and r.min_value >= 0
    rows = ((1, repr(float(v))) for v in r.normalized)
    rows2 = ((2, repr(float(v))) for v in r.normalized_compare)
    return est, {}, ks, passed, ["horizon", "normalized"], itertools.chain(rows, rows2)


def _run_regen(cfg, rng):
    r = L.cycle_tail_experiment(cfg.model, cfg.reps, rng, cfg.k)
    est = {"slope": r.slope, "intercept": r.intercept, "r2": r.r2, "adjacent_corr": r.adjacent_corr,
           "degenerate": r.degenerate, "w_fit": _fit_dict(r.w_fit)}
    passed = r.degenerate or (r.slope < 0 and r.r2 > 0.9 and abs(r.adjacent_corr) <= 0.02)
    rows = zip(range(1, r.sigma.size + 1), r.sigma.tolist(), r.w.tolist())
    return est, {}, {}, bool(passed), ["cycle", "sigma", "w"], rows


def _run_genealogy(cfg, rng):
    tot, x = G.ledger_vs_path(cfg.model, cfg.n, cfg.reps, rng.spawn("ledger"))
    ks_ledger = L.ks_statistic(tot, x)
    ages = L.age_limit_experiment(cfg.model, cfg.n, cfg.reps, rng.spawn("ages"), cfg.workers)
    est = {"avg_age_gap": ages.eta_mean_gap, "avg_age_joint_se": ages.eta_joint_se,
           "avg_age_mean_n": float(ages.eta_n.mean())}
    ks = {"ledger_vs_path": ks_ledger.to_dict(), "max_age_n_vs_2n": ages.ks_lambda.to_dict()}
    passed = ks_ledger.passed and ages.ks_lambda.passed and ages.eta_mean_gap <= 3 * ages.eta_joint_se
    rows = zip(tot.tolist(), x.tolist(), ages.lam_n.tolist(), ages.lam_2n.tolist())
    return est, {}, ks, passed, ["ledger_x", "path_x", "max_age_n", "max_age_2n"], rows


def _run_ytail(cfg, rng):
    r = L.y_tail_constant_experiment(cfg.model, cfg.reps, rng, cfg.target_reps, cfg.k, cfg.workers)
    est = {"c_hat": r.c_hat, "rel_error": r.rel_error, "fit": _fit_dict(r.fit)}
    tgt = {"c": r.target, "c_se": r.target_se}
    return est, tgt, {}, r.rel_error <= cfg.tolerance, ["y"], ((int(v),) for v in r.sample)


def _run_lln(cfg, rng):
    r = L.lln_check(cfg.model, cfg.n, rng)
    return {"mean": r.mean, "rel_error": r.rel_error}, {"mean": r.target}, {}, r.rel_error <= cfg.tolerance, [], []


def _run_verify(cfg, rng):
    results = V.run_all(cfg.seed or V.VERIFY_SEED, cfg.verify_scale, cfg.workers, cfg.verify_only,
                        echo=lambda s: print(s, flush=True))
    est = {str(r.number): r.to_dict() for r in results}
    rows = ((r.number, r.name, int(r.passed)) for r in results)
    return est, {}, {}, all(r.passed for r in results), ["criterion", "name", "pass"], rows


RUNNERS = {
    "simulate": _run_simulate,
    "stationary": _run_stationary,
    "tails": _run_tails,
    "extremes": _run_extremes,
    "sums": _run_sums,
    "regen": _run_regen,
    "genealogy": _run_genealogy,
    "ytail": _run_ytail,
    "lln": _run_lln,
    "verify": _run_verify,
}


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not serializable: {type(obj)}")


def _model_dict(cfg: ExperimentConfig) -> dict:
    return {k: v for k, v in sorted(cfg.raw.items()) if k.startswith("model.")}


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> int:
    """Run one experiment and write its artifacts; returns the exit status."""
    out = Path(out_dir or cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    started = dt.datetime.now(dt.timezone.utc).isoformat()
    rng = RngStream(cfg.seed, stream_id_for(cfg.experiment, 0))
    est, tgt, ks, passed, columns, rows = RUNNERS[cfg.experiment](cfg, rng)
    if columns:
        with open(out / "data.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for i, row in enumerate(rows):
                if i >= cfg.sample_cap:
                    break
                w.writerow(row)
    summary = {
        "schema": SCHEMA, "experiment": cfg.experiment, "model": _model_dict(cfg), "n": cfg.n,
        "reps": cfg.reps, "seed": cfg.seed, "estimates": est, "targets": tgt, "ks": ks, "pass": bool(passed),
    }
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8"
    )
    manifest = RunManifest(
        config_hash=cfg.config_hash, seed=cfg.seed, stream_ids=[str(s) for s in [rng.stream_id, *rng.spawned]],
        version=__version__, started=started, finished=dt.datetime.now(dt.timezone.utc).isoformat(),
        config=dict(sorted(cfg.raw.items())),
    )
    (out / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return 0 if passed else 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rcinar", description="Random-coefficient thinning simulation lab")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--manifest", help="rerun exactly from a manifest.json")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.manifest:
            man = RunManifest.load(args.manifest)
            flat = dict(man.config)
        elif args.config:
            flat = _flatten(tomllib.loads(Path(args.config).read_text(encoding="utf-8")))
        else:
            flat = {}
        flat["experiment"] = args.experiment
        for key in ("seed", "reps", "workers"):
            if getattr(args, key) is not None:
                flat[key] = getattr(args, key)
        cfg = config_from_flat(flat)
        if args.manifest and cfg.config_hash != man.config_hash:
            raise ConfigError("command line overrides change the manifest's config hash")
        return run(cfg, args.out)
    except (ConfigError, D.ModelError, ValueError, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"rcinar: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
