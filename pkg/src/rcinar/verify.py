"""The acceptance suite: fourteen numerical checks with fixed tolerances.

Each check owns its own child stream of one master seed, fixed here before
any result was looked at.  ``scale`` shrinks sample sizes for smoke runs;
verdicts are only meaningful at ``scale=1``.
"""

from __future__ import annotations

import filecmp
import math
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import distributions as D
from . import engine as E
from . import genealogy as G
from . import limitlab as L
from .engine import ModelSpec, StationaryConfig, StationaryMode
from .parallel import replicate
from .rng import RngStream, stream_id_for

VERIFY_SEED = 20240917

HEAVY_15 = ModelSpec(D.BetaShape(2, 2), D.DiscretePareto(1.5))
HEAVY_07 = ModelSpec(D.BetaShape(2, 2), D.DiscretePareto(0.7))
LIGHT = ModelSpec(D.Degenerate(0.5), D.Poisson(2.0))
LIGHT_BETA = ModelSpec(D.BetaShape(2, 2), D.Poisson(2.0))


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "pass": self.passed, "details": self.details}


def _n(value: int, scale: float, floor: int = 1) -> int:
    return max(floor, int(round(value * scale)))


def _stream(seed: int, number: int) -> RngStream:
    return RngStream(seed, stream_id_for("verify", number))


def _within(x, lo, hi) -> bool:
    return x is not None and lo <= x <= hi


# ---------------------------------------------------------------------------


def thinning_exactness(rng, scale=1.0, workers=1) -> Criterion:
    draws = _n(10**6, scale, 1000)
    worst = 0.0
    rows = []
    for x in range(13):
        for phi in np.round(np.arange(1, 10) / 10, 1):
            got = D.thin(np.full(draws, x, dtype=np.int64), float(phi), rng)
            emp = np.bincount(got, minlength=x + 1) / draws
            pmf = np.array([math.comb(x, j) * phi**j * (1 - phi) ** (x - j) for j in range(x + 1)])
            tv = 0.5 * float(np.abs(emp - pmf).sum())
            worst = max(worst, tv)
            rows.append(tv)
    return Criterion(1, "thinning law matches the binomial pmf", worst < 0.005,
                     {"max_tv": worst, "tolerance": 0.005, "draws": draws, "cases": len(rows)})


def stationary_tail(rng, scale=1.0, workers=1) -> Criterion:
    draws = _n(10**6, scale, 10**4)
    main = L.stationary_tail_experiment(HEAVY_15, draws, rng.spawn("beta"), workers=workers)
    base = L.stationary_tail_experiment(
        ModelSpec(D.Degenerate(0.0), D.DiscretePareto(1.5)), draws, rng.spawn("zero"), workers=workers
    )
    ok = main.rel_error <= 0.15 and 0.9 <= base.fit.c_hat <= 1.1
    return Criterion(2, "stationary tail constant", ok, {
        "c_hat": main.fit.c_hat, "target": main.target, "rel_error": main.rel_error,
        "base_c_hat": base.fit.c_hat, "alpha_hat": main.fit.alpha_hat, "draws": draws,
    })


def thinned_tail(rng, scale=1.0, workers=1) -> Criterion:
    draws = _n(10**7, scale, 10**4)
    r = L.thinning_tail_check(HEAVY_15, 0.6, draws, rng, workers=workers)
    return Criterion(3, "thinned tail scales by phi^alpha", r.rel_error <= 0.10,
                     {"c_hat": r.c_hat, "target": r.target, "rel_error": r.rel_error, "draws": draws})


def extremes(rng, scale=1.0, workers=1) -> Criterion:
    n, reps = _n(10**4, scale, 1000), _n(10**4, scale, 1000)
    r = L.extremes_experiment(HEAVY_15, n, reps, rng, workers=workers)
    limit = L.oracle_limit_distance(HEAVY_15.innovation_law, 10**5)
    limit_inv = L.oracle_limit_distance(HEAVY_15.innovation_law, 10**5, inverse_exponent=True)
    ok = r.ks_oracle.statistic <= 0.03 and limit <= 0.01
    return Criterion(4, "maxima follow the innovation maxima", ok, {
        "ks_vs_oracle": r.ks_oracle.statistic, "oracle_vs_limit_n1e5": limit,
        "oracle_vs_inverse_exponent_limit_n1e5": limit_inv, "ks_sample_vs_limit": r.ks_limit.statistic,
        "n": n, "reps": reps,
    })


def regeneration(rng, scale=1.0, workers=1) -> Criterion:
    cycles = _n(10**5, scale, 10**4)
    r = L.cycle_tail_experiment(LIGHT, cycles, rng)
    ok = abs(r.adjacent_corr) <= 0.02 and r.slope < 0 and r.r2 > 0.9
    return Criterion(5, "regeneration cycles", ok, {
        "adjacent_corr": r.adjacent_corr, "slope": r.slope, "r2": r.r2, "cycles": cycles,
    })


def cycle_sum_tail(rng, scale=1.0, workers=1) -> Criterion:
    cycles = _n(10**5, scale, 10**4)
    r = L.cycle_tail_experiment(HEAVY_15, cycles, rng)
    a = None if r.w_fit is None else r.w_fit.alpha_hat
    return Criterion(6, "cycle sums keep the tail index", _within(a, 1.35, 1.65), {
        "alpha_hat": a, "k": None if r.w_fit is None else r.w_fit.k_used, "cycles": cycles,
    })


def lln(rng, scale=1.0, workers=1) -> Criterion:
    n = _n(10**6, scale, 10**4)
    r = L.lln_check(LIGHT, n, rng)
    return Criterion(7, "law of large numbers", r.rel_error <= 0.02,
                     {"mean": r.mean, "target": r.target, "rel_error": r.rel_error, "n": n})


def clt(rng, scale=1.0, workers=1) -> Criterion:
    n, reps = _n(10**4, scale, 100), _n(10**4, scale, 1000)
    r = L.partial_sums_experiment(LIGHT, L.SumsCase.GAUSSIAN, n, reps, rng, cycles=_n(10**5, scale, 10**4), workers=workers)
    return Criterion(8, "studentized sums are standard normal", r.ks_gaussian.passed, {
        "ks": r.ks_gaussian.statistic, "threshold": r.ks_gaussian.threshold,
        "long_run_variance": r.long_run_variance, "n": n, "reps": reps,
    })


def subcritical_sums(rng, scale=1.0, workers=1) -> Criterion:
    n, reps = _n(10**3, scale, 100), _n(10**4, scale, 1000)
    r = L.partial_sums_experiment(HEAVY_07, L.SumsCase.SUB_CRITICAL, n, reps, rng, compare_n=10 * n, workers=workers)
    ok = r.min_value >= 0 and _within(r.hill.alpha_hat, 0.6, 0.8) and r.ks_self.statistic <= 0.05
    return Criterion(9, "sums with tail index below one", ok, {
        "min": r.min_value, "alpha_hat": r.hill.alpha_hat, "ks_n_vs_10n": r.ks_self.statistic, "n": n, "reps": reps,
    })


def centered_sums(rng, scale=1.0, workers=1) -> Criterion:
    n, reps = _n(10**3, scale, 100), _n(10**4, scale, 1000)
    r = L.partial_sums_experiment(HEAVY_15, L.SumsCase.MID_STABLE, n, reps, rng, compare_n=4 * n, workers=workers)
    ok = r.ks_self.statistic <= 0.05 and _within(r.hill.alpha_hat, 1.3, 1.7)
    return Criterion(10, "centered sums with tail index in (1, 2)", ok, {
        "alpha_hat": r.hill.alpha_hat, "ks_n_vs_4n": r.ks_self.statistic, "n": n, "reps": reps,
    })


def progeny_tail(rng, scale=1.0, workers=1) -> Criterion:
    reps = _n(10**6, scale, 10**4)
    r = L.y_tail_constant_experiment(HEAVY_07, reps, rng.spawn("beta"), target_reps=reps, workers=workers)
    det = L.y_tail_constant_experiment(
        ModelSpec(D.Degenerate(0.5), D.DiscretePareto(0.7)), reps, rng.spawn("half"), target_reps=1, workers=workers
    )
    det_err = abs(det.c_hat / 2**0.7 - 1.0)
    ok = r.rel_error <= 0.2 and det_err <= 0.10
    return Criterion(11, "total progeny tail constant", ok, {
        "c_hat": r.c_hat, "target": r.target, "target_se": r.target_se, "rel_error": r.rel_error,
        "deterministic_c_hat": det.c_hat, "deterministic_target": 2**0.7, "deterministic_rel_error": det_err,
        "draws": reps,
    })


def sampler_cross_check(rng, scale=1.0, workers=1) -> Criterion:
    draws = _n(10**5, scale, 1000)
    burn = _n(10**5, scale, 100)
    series = L.stationary_sample(HEAVY_15, draws, rng.spawn("series"), StationaryConfig(epsilon=1e-6), workers)
    chain = L.stationary_sample(
        HEAVY_15, draws, rng.spawn("burn"), StationaryConfig(mode=StationaryMode.BURN_IN, burn_in_steps=burn), workers
    )
    ks = L.ks_statistic(series, chain)
    return Criterion(12, "truncated series vs burn-in stationary draws", ks.statistic <= 0.01,
                     {"ks": ks.statistic, "draws": draws, "burn_in_steps": burn})


def _ledger_block(model, n, size, stream):
    return np.stack(G.ledger_vs_path(model, n, size, stream), axis=1)


def _coalescence_block(model, n, size, stream):
    batch = G.simulate_cohorts(model, n, size, stream)
    bad = 0
    for i in range(size):
        law = G.coalescence_law(batch.ledger(i))
        if law is not None and sum(law.pmf.values(), Fraction(0)) + law.p_infinity != 1:
            bad += 1
    return np.array([bad])


def genealogy(rng, scale=1.0, workers=1) -> Criterion:
    n, reps = _n(10**3, scale, 50), _n(10**5, scale, 1000)
    both = replicate(_ledger_block, reps, rng, "ledger", LIGHT_BETA, n, workers=workers, block=10**4)
    ks = L.ks_statistic(both[:, 0], both[:, 1])
    bad = int(replicate(_coalescence_block, 1000, rng, "coalescence", LIGHT_BETA, 200, workers=workers, block=500).sum())
    ages = L.age_limit_experiment(LIGHT_BETA, n, _n(10**4, scale, 1000), rng.spawn("ages"), workers=workers)
    ok = (ks.statistic <= 0.01 and bad == 0 and ages.ks_lambda.statistic <= 0.05
          and ages.eta_mean_gap <= 3 * ages.eta_joint_se)
    return Criterion(13, "cohort ledger consistency and age laws", ok, {
        "ks_ledger_vs_path": ks.statistic, "coalescence_not_summing_to_one": bad,
        "ks_max_age_n_vs_2n": ages.ks_lambda.statistic, "avg_age_gap": ages.eta_mean_gap,
        "avg_age_joint_se": ages.eta_joint_se, "n": n, "reps": reps,
    })


REPRO_CONFIG = """\
experiment = "extremes"
n = {n}
reps = {reps}
seed = {seed}
model.phi.kind = "beta"
model.phi.a = 2.0
model.phi.b = 2.0
model.z.kind = "pareto"
model.z.alpha = 1.5
"""


def reproducibility(rng, scale=1.0, workers=1) -> Criterion:
    from .cli import main

    n, reps = _n(10**3, scale, 100), _n(10**4, scale, 1000)
    seed = int(rng.gen.integers(0, 2**63))
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        cfg = tmp / "extremes.toml"
        cfg.write_text(REPRO_CONFIG.format(n=n, reps=reps, seed=seed))
        codes = [
            main(["extremes", "--config", str(cfg), "--workers", "1", "--out", str(tmp / "w1")]),
            main(["extremes", "--config", str(cfg), "--workers", "8", "--out", str(tmp / "w8")]),
            main(["extremes", "--manifest", str(tmp / "w1" / "manifest.json"), "--out", str(tmp / "again")]),
        ]
        files = ["summary.json", "data.csv"]
        same = all(
            filecmp.cmp(tmp / "w1" / f, tmp / d / f, shallow=False) for d in ("w8", "again") for f in files
        )
    ok = same and all(c in (0, 2) for c in codes)
    return Criterion(14, "byte-identical reruns across worker counts", ok,
                     {"identical": same, "exit_codes": codes, "n": n, "reps": reps})


CRITERIA = {
    1: thinning_exactness,
    2: stationary_tail,
    3: thinned_tail,
    4: extremes,
    5: regeneration,
    6: cycle_sum_tail,
    7: lln,
    8: clt,
    9: subcritical_sums,
    10: centered_sums,
    11: progeny_tail,
    12: sampler_cross_check,
    13: genealogy,
    14: reproducibility,
}


def run_criterion(number: int, seed: int = VERIFY_SEED, scale: float = 1.0, workers: int = 1) -> Criterion:
    t0 = time.perf_counter()
    res = CRITERIA[number](_stream(seed, number), scale=scale, workers=workers)
    res.seconds = time.perf_counter() - t0
    return res


def run_all(seed: int = VERIFY_SEED, scale: float = 1.0, workers: int = 1, only=None, echo=None) -> list[Criterion]:
    out = []
    for number in sorted(only or CRITERIA):
        res = run_criterion(number, seed, scale, workers)
        if echo:
            echo(res.line())
        out.append(res)
    return out
