"""The thinning recursion X_n = phi_n o X_{n-1} + Z_n and what is built on it.

Single paths are simulated step by step (the recursion is Markov and
sequential).  Independent replicas are simulated as a batch, one vectorised
numpy call per law per step.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import distributions as D
from .distributions import InnovationLaw, PhiLaw
from .rng import RngStream

CHUNK = 4096
STATIONARY_TERM_CAP = 10**6
CYCLE_STEP_CAP = 10**8


class ConvergenceError(RuntimeError):
    """A sampler hit its hard iteration cap; the laws are probably misconfigured."""


@dataclass(frozen=True)
class ModelSpec:
    phi_law: PhiLaw
    innovation_law: InnovationLaw

    @property
    def alpha(self) -> float | None:
        return self.innovation_law.tail_index

    @property
    def heavy_tailed(self) -> bool:
        return self.innovation_law.heavy_tailed

    @property
    def stationary_mean(self) -> float:
        """E[X_inf] = E[Z] / (1 - E[phi])."""
        return self.innovation_law.mean / (1.0 - self.phi_law.mean)


@dataclass
class PathSample:
    """Arrays indexed by time 0..n.  Index 0 holds ``x0`` and placeholders."""

    x: np.ndarray
    survivors: np.ndarray
    z: np.ndarray
    phi: np.ndarray

    @property
    def n(self) -> int:
        return len(self.x) - 1

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "x", "survivors", "z", "phi"])
        w.writerow([0, int(self.x[0]), "", "", ""])
        for k in range(1, len(self.x)):
            w.writerow([k, int(self.x[k]), int(self.survivors[k]), int(self.z[k]), repr(float(self.phi[k]))])


@dataclass(frozen=True)
class CycleRecord:
    sigma: int
    w: int
    r: tuple = field(repr=False)


def write_cycles_csv(cycles, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["cycle", "sigma", "w"])
    for i, c in enumerate(cycles, start=1):
        w.writerow([i, c.sigma, c.w])


class StationaryMode(enum.Enum):
    TRUNCATED_SERIES = "truncated"
    BURN_IN = "burn_in"


@dataclass(frozen=True)
class StationaryConfig:
    mode: StationaryMode = StationaryMode.TRUNCATED_SERIES
    epsilon: float = 1e-6
    gamma: float | None = None
    burn_in_steps: int = 10**5

    def __post_init__(self):
        if not 0 < self.epsilon <= 0.01:
            raise ValueError(f"epsilon must lie in (0, 0.01], got {self.epsilon}")
        if self.gamma is not None and not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.burn_in_steps < 1:
            raise ValueError("burn_in_steps must be positive")

    def resolved_gamma(self, model: ModelSpec) -> float:
        alpha = model.alpha
        if self.gamma is None:
            return min(1.0, alpha / 2.0) if alpha is not None else 1.0
        if alpha is not None and self.gamma >= alpha:
            raise ValueError(f"gamma={self.gamma} must be below the tail index {alpha}")
        return self.gamma


# ---------------------------------------------------------------------------
# single steps and paths


def step(x_prev: int, phi_n: float, z_n: int, rng: RngStream) -> tuple[int, int]:
    survivors = D.thin(x_prev, phi_n, rng)
    return survivors + int(z_n), survivors


def _advance_chunk(model: ModelSpec, x: int, rng: RngStream, m: int = CHUNK):
    """Run ``m`` steps from state ``x``; returns (x, survivors, z, phi) arrays of length m."""
    phi = model.phi_law.sample(rng, m)
    z = model.innovation_law.sample(rng, m)
    xs = np.empty(m, dtype=np.int64)
    ss = np.empty(m, dtype=np.int64)
    binom = rng.gen.binomial
    phil = phi.tolist()
    zl = z.tolist()
    for i in range(m):
        p = phil[i]
        s = int(binom(x, p)) if x and p > 0.0 else 0
        x = s + zl[i]
        xs[i] = x
        ss[i] = s
    return xs, ss, np.asarray(z, dtype=np.int64), phi


def simulate_path(model: ModelSpec, n: int, x0: int, rng: RngStream) -> PathSample:
    if n < 1:
        raise ValueError("n must be >= 1")
    xs, ss, zs, ps = [np.array([x0], np.int64)], [np.zeros(1, np.int64)], [np.zeros(1, np.int64)], [np.full(1, np.nan)]
    x, done = int(x0), 0
    while done < n:
        cx, cs, cz, cp = _advance_chunk(model, x, rng)
        xs.append(cx), ss.append(cs), zs.append(cz), ps.append(cp)
        x = int(cx[-1])
        done += CHUNK
    cut = n + 1
    return PathSample(
        x=np.concatenate(xs)[:cut],
        survivors=np.concatenate(ss)[:cut],
        z=np.concatenate(zs)[:cut],
        phi=np.concatenate(ps)[:cut],
    )


def coupled_paths(model: ModelSpec, n: int, starts, rng: RngStream) -> np.ndarray:
    """Paths from several starting values sharing phi, Z and per-individual uniforms.

    Row ``j`` is the path from ``starts[j]``.  Thinning counts uniforms below
    phi, so a larger state never thins to fewer survivors.
    """
    starts = [int(s) for s in starts]
    out = np.empty((len(starts), n + 1), dtype=np.int64)
    out[:, 0] = starts
    state = list(starts)
    for k in range(1, n + 1):
        phi = model.phi_law.sample(rng)
        z = model.innovation_law.sample(rng)
        u = rng.gen.random(max(state) if state else 0)
        state = [D.thin_coupled(x, phi, u) + z for x in state]
        out[:, k] = state
    return out


def composite_thin(x: int, k: int, phi_draws, rng: RngStream) -> int:
    """phi_k o ... o phi_1 o x, applied one thinning at a time."""
    if len(phi_draws) != k:
        raise ValueError(f"need exactly k={k} phi draws, got {len(phi_draws)}")
    for phi in phi_draws:
        if x == 0:
            break
        x = D.thin(x, phi, rng)
    return int(x)


# ---------------------------------------------------------------------------
# replica batches


@dataclass
class PathBatch:
    last: np.ndarray
    total: np.ndarray
    maximum: np.ndarray


def run_paths(model: ModelSpec, n: int, reps: int, rng: RngStream, x0: int = 0) -> PathBatch:
    """Simulate ``reps`` independent paths of ``n`` steps; keep X_n, S_n and M_n.

    S_n and M_n cover X_1..X_n.  S_n is float64: heavy-tailed sums overflow int64.
    """
    x = np.full(reps, int(x0), dtype=np.int64)
    total = np.zeros(reps, dtype=np.float64)
    maximum = np.zeros(reps, dtype=np.int64)
    gen = rng.gen
    degenerate = isinstance(model.phi_law, D.Degenerate)
    for _ in range(n):
        phi = model.phi_law.p if degenerate else model.phi_law.sample(rng, reps)
        z = model.innovation_law.sample(rng, reps)
        x = gen.binomial(x, phi)
        x += z
        total += x
        np.maximum(maximum, x, out=maximum)
    return PathBatch(last=x, total=total, maximum=maximum)


# ---------------------------------------------------------------------------
# stationary law


def sample_stationary(model: ModelSpec, cfg: StationaryConfig, rng: RngStream, size: int | None = None):
    """Approximate draws from the law of X_inf = sum_k Binomial(Z_k, phi_1 ... phi_k).

    TRUNCATED_SERIES stops each draw at the first K with
    E[Z^g] p_K^g m / (1 - m) < epsilon, m = E[phi^g]; since
    1 - (1 - p)^z <= (p z)^g for g <= 1 this bounds the chance that any
    later term is non-zero.  BURN_IN runs the chain from 0 for
    ``burn_in_steps`` steps.
    """
    n = 1 if size is None else int(size)
    if cfg.mode is StationaryMode.BURN_IN:
        out = run_paths(model, cfg.burn_in_steps, n, rng).last
    else:
        out = _truncated_series(model, cfg, rng, n)
    return int(out[0]) if size is None else out


def _truncated_series(model: ModelSpec, cfg: StationaryConfig, rng: RngStream, n: int) -> np.ndarray:
    gamma = cfg.resolved_gamma(model)
    m = D.moment_phi(model.phi_law, gamma)
    ez = model.innovation_law.moment_bound(gamma)
    if not math.isfinite(ez):
        raise ValueError(f"E[Z^{gamma}] is not finite for {model.innovation_law!r}")
    factor = ez * m / (1.0 - m)
    gen = rng.gen
    total = np.asarray(model.innovation_law.sample(rng, n), dtype=np.int64)
    p = np.ones(n)
    active = np.flatnonzero(np.full(n, factor >= cfg.epsilon))
    k = 0
    while active.size:
        k += 1
        if k > STATIONARY_TERM_CAP:
            raise ConvergenceError(f"truncated series exceeded {STATIONARY_TERM_CAP} terms")
        pa = p[active] * model.phi_law.sample(rng, active.size)
        p[active] = pa
        z = model.innovation_law.sample(rng, active.size)
        total[active] += gen.binomial(z, pa)
        active = active[factor * pa**gamma >= cfg.epsilon]
    return total


# ---------------------------------------------------------------------------
# regeneration cycles


def split_cycles(x: np.ndarray, survivors: np.ndarray) -> list[CycleRecord]:
    """Complete cycles of a path indexed from 0, with nu_0 = 1.

    A regeneration happens at step i > 1 when the thinned carry-over
    ``survivors[i]`` is 0; the trailing incomplete cycle is dropped.
    """
    regen = np.flatnonzero(survivors[2:] == 0) + 2
    bounds = np.concatenate(([1], regen))
    out = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        seg = x[a:b]
        out.append(CycleRecord(sigma=int(b - a), w=int(seg.sum()), r=tuple(seg.tolist())))
    return out


def collect_cycles(model: ModelSpec, count: int, rng: RngStream, return_path: bool = False):
    """First ``count`` complete regeneration cycles of a path started at X_0 = 0."""
    if count < 1:
        raise ValueError("count must be >= 1")
    xs, ss = [np.zeros(1, np.int64)], [np.zeros(1, np.int64)]
    x, t, found, last_regen = 0, 0, 0, 1
    while found < count:
        cx, cs, _, _ = _advance_chunk(model, x, rng)
        xs.append(cx)
        ss.append(cs)
        x = int(cx[-1])
        times = np.arange(t + 1, t + 1 + CHUNK)
        hits = times[(cs == 0) & (times > 1)]
        found += hits.size
        if hits.size:
            last_regen = int(hits[-1])
        t += CHUNK
        if t - last_regen > CYCLE_STEP_CAP:
            raise ConvergenceError(f"a single cycle exceeded {CYCLE_STEP_CAP} steps")
    x_all, s_all = np.concatenate(xs), np.concatenate(ss)
    cycles = split_cycles(x_all, s_all)[:count]
    if return_path:
        return cycles, x_all, s_all
    return cycles


def cycle_arrays(cycles) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.fromiter((c.sigma for c in cycles), dtype=np.int64, count=len(cycles)),
        np.fromiter((c.w for c in cycles), dtype=np.int64, count=len(cycles)),
    )
