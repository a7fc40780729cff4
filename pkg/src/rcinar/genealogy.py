"""Cohort-resolved simulation: who is alive at generation n, and since when.

A cohort is the set of descendants of the immigrants that arrived at one
time k; ``X_{k,n}`` is its size at generation n.  Cohorts are thinned
independently given phi_n, which is the model's conditional independence of
the Bernoulli marks.  Extinct cohorts are dropped immediately.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import distributions as D
from .distributions import PhiLaw
from .engine import ModelSpec
from .rng import RngStream

PROGENY_GENERATION_CAP = 10**8


@dataclass(frozen=True)
class CohortLedger:
    n: int = 0
    cohorts: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.cohorts.values())


@dataclass(frozen=True)
class CoalescenceLaw:
    """Law of the coalescence time; ``pmf`` maps age to an exact probability."""

    pmf: dict
    p_infinity: Fraction

    def cdf(self, t: float) -> Fraction:
        return sum((p for age, p in self.pmf.items() if age <= t), Fraction(0))

    def quantile(self, level: float) -> float:
        acc = Fraction(0)
        for age in sorted(self.pmf):
            acc += self.pmf[age]
            if acc >= level:
                return float(age)
        return math.inf


def ledger_step(ledger: CohortLedger, phi_n: float, z_n: int, rng: RngStream) -> CohortLedger:
    cohorts = {}
    for k in sorted(ledger.cohorts):
        kept = D.thin(ledger.cohorts[k], phi_n, rng)
        if kept:
            cohorts[k] = kept
    n = ledger.n + 1
    if z_n > 0:
        cohorts[n] = int(z_n)
    return CohortLedger(n=n, cohorts=cohorts)


def max_age(ledger: CohortLedger) -> int | None:
    """n - max{k < n: X_{k,n} > 0}; None when no older cohort is alive."""
    older = [k for k in ledger.cohorts if k < ledger.n]
    return ledger.n - max(older) if older else None


def avg_age(ledger: CohortLedger) -> float | None:
    total = ledger.total
    if total == 0:
        return None
    return sum(c * (ledger.n - k) for k, c in ledger.cohorts.items()) / total


def coalescence_law(ledger: CohortLedger) -> CoalescenceLaw | None:
    """Exact law of T_n given the cohort sizes.

    Two distinct individuals share cohort k with probability
    X_k (X_k - 1) / (X (X - 1)).  Defined for X >= 2.
    """
    total = ledger.total
    if total < 2:
        return None
    pairs = total * (total - 1)
    pmf = {}
    for k, c in ledger.cohorts.items():
        if c >= 2:
            pmf[ledger.n - k] = Fraction(c * (c - 1), pairs)
    return CoalescenceLaw(pmf=pmf, p_infinity=1 - sum(pmf.values(), Fraction(0)))


def sample_coalescence(ledger: CohortLedger, rng: RngStream) -> float | None:
    """Sample two distinct individuals and return their coalescence time (inf if unrelated)."""
    total = ledger.total
    if total < 2:
        return None
    keys = sorted(ledger.cohorts)
    edges = np.cumsum([ledger.cohorts[k] for k in keys])
    i, j = rng.gen.choice(total, size=2, replace=False)
    ki = keys[int(np.searchsorted(edges, i, side="right"))]
    kj = keys[int(np.searchsorted(edges, j, side="right"))]
    return float(ledger.n - ki) if ki == kj else math.inf


def total_progeny(z0: int, phi_law: PhiLaw, rng: RngStream) -> int:
    """Y = c_0 + c_1 + ... with c_0 = z0 and c_{i+1} = phi_{i+1} o c_i, until extinction."""
    c, total, gens = int(z0), int(z0), 0
    while c:
        gens += 1
        if gens > PROGENY_GENERATION_CAP:
            raise RuntimeError(f"progeny still alive after {PROGENY_GENERATION_CAP} generations")
        c = D.thin(c, phi_law.sample(rng), rng)
        total += c
    return total


def total_progeny_batch(z0: np.ndarray, phi_law: PhiLaw, rng: RngStream) -> np.ndarray:
    """Vectorised :func:`total_progeny`; each entry has its own phi sequence."""
    c = np.asarray(z0, dtype=np.int64).copy()
    total = c.astype(np.float64)
    active = np.flatnonzero(c > 0)
    gens = 0
    while active.size:
        gens += 1
        if gens > PROGENY_GENERATION_CAP:
            raise RuntimeError(f"progeny still alive after {PROGENY_GENERATION_CAP} generations")
        ca = rng.gen.binomial(c[active], phi_law.sample(rng, active.size))
        c[active] = ca
        total[active] += ca
        active = active[ca > 0]
    return total


# ---------------------------------------------------------------------------
# trajectories and replica batches


@dataclass
class LedgerTrajectory:
    totals: np.ndarray
    survivors: np.ndarray
    max_age: list
    avg_age: list
    coalescence: list
    final: CohortLedger


def run_ledger(model: ModelSpec, n: int, rng: RngStream) -> LedgerTrajectory:
    """One ledger path from the empty state; per-generation statistics recorded.

    ``survivors[i]`` is the thinned carry-over into generation i, so
    regenerations can be read off exactly as for a plain path.
    """
    ledger = CohortLedger()
    totals = np.zeros(n + 1, dtype=np.int64)
    survivors = np.zeros(n + 1, dtype=np.int64)
    lam, eta, coal = [None], [None], [None]
    for i in range(1, n + 1):
        z = model.innovation_law.sample(rng)
        ledger = ledger_step(ledger, model.phi_law.sample(rng), z, rng)
        totals[i] = ledger.total
        survivors[i] = totals[i] - z
        lam.append(max_age(ledger))
        eta.append(avg_age(ledger))
        coal.append(coalescence_law(ledger))
    return LedgerTrajectory(totals, survivors, lam, eta, coal, ledger)


def write_trajectory_csv(traj: LedgerTrajectory, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["generation", "lambda", "eta", "p_infinity", "t_q25", "t_q50", "t_q75"])
    for g in range(1, len(traj.totals)):
        law = traj.coalescence[g]
        qs = [law.quantile(q) for q in (0.25, 0.5, 0.75)] if law else [None] * 3
        w.writerow([
            g,
            "" if traj.max_age[g] is None else traj.max_age[g],
            "" if traj.avg_age[g] is None else repr(float(traj.avg_age[g])),
            "" if law is None else repr(float(law.p_infinity)),
            *["" if q is None else repr(q) for q in qs],
        ])


class CohortBatch:
    """Cohort counts of many independent replicas, one row per replica.

    Columns are birth times; columns dead in every replica are pruned.
    """

    def __init__(self, reps: int):
        self.n = 0
        self.counts = np.zeros((reps, 0), dtype=np.int64)
        self.births = np.zeros(0, dtype=np.int64)

    @property
    def reps(self) -> int:
        return self.counts.shape[0]

    def step(self, phi, z, rng: RngStream) -> None:
        c = self.counts
        alive = c > 0
        if alive.any():
            rows = np.nonzero(alive)[0]
            p = phi[rows] if np.ndim(phi) else phi
            c[alive] = rng.gen.binomial(c[alive], p)
        self.n += 1
        c = np.concatenate([c, np.asarray(z, dtype=np.int64)[:, None]], axis=1)
        births = np.append(self.births, self.n)
        keep = c.any(axis=0)
        self.counts = np.ascontiguousarray(c[:, keep])
        self.births = births[keep]

    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def max_age(self) -> np.ndarray:
        """lambda_n per replica, NaN when undefined."""
        older = (self.counts > 0) & (self.births < self.n)[None, :]
        out = np.full(self.reps, np.nan)
        has = older.any(axis=1)
        if has.any():
            last = older.shape[1] - 1 - np.argmax(older[:, ::-1], axis=1)
            out[has] = self.n - self.births[last[has]]
        return out

    def avg_age(self) -> np.ndarray:
        tot = self.totals()
        ages = (self.n - self.births)[None, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(tot > 0, (self.counts * ages).sum(axis=1) / tot, np.nan)

    def p_infinity(self) -> np.ndarray:
        tot = self.totals().astype(float)
        same = (self.counts * (self.counts - 1)).sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(tot >= 2, 1.0 - same / (tot * (tot - 1)), np.nan)

    def ledger(self, i: int) -> CohortLedger:
        row = self.counts[i]
        return CohortLedger(n=self.n, cohorts={int(k): int(c) for k, c in zip(self.births, row) if c > 0})


def simulate_cohorts(model: ModelSpec, n: int, reps: int, rng: RngStream) -> CohortBatch:
    batch = CohortBatch(reps)
    for _ in range(n):
        phi = model.phi_law.sample(rng, reps)
        z = model.innovation_law.sample(rng, reps)
        batch.step(phi, z, rng)
    return batch


def ledger_vs_path(model: ModelSpec, n: int, reps: int, rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """X_n from cohort ledgers and from plain paths driven by the same phi and Z draws."""
    batch = CohortBatch(reps)
    x = np.zeros(reps, dtype=np.int64)
    for _ in range(n):
        phi = model.phi_law.sample(rng, reps)
        z = model.innovation_law.sample(rng, reps)
        batch.step(phi, z, rng)
        x = rng.gen.binomial(x, phi) + z
    return batch.totals(), x
