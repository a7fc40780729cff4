"""Estimators and experiments that check the limit theorems numerically.

Every experiment returns a small dataclass holding the raw sample next to
the estimates, so a verdict can be recomputed at another tolerance
without re-simulating.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from . import distributions as D
from . import engine as E
from . import genealogy as G
from .engine import ModelSpec, StationaryConfig
from .parallel import replicate
from .rng import RngStream

KS_C01 = 1.628  # asymptotic 1% critical value of the Kolmogorov distribution


# ---------------------------------------------------------------------------
# empirical distribution functions and KS


class Ecdf:
    def __init__(self, sample):
        self.sorted_sample = np.sort(np.asarray(sample, dtype=float))
        self.n = self.sorted_sample.size
        if self.n == 0:
            raise ValueError("empty sample")

    def __call__(self, x):
        return np.searchsorted(self.sorted_sample, x, side="right") / self.n

    def left(self, x):
        return np.searchsorted(self.sorted_sample, x, side="left") / self.n


@dataclass(frozen=True)
class KsResult:
    statistic: float
    threshold: float
    passed: bool

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "threshold": self.threshold, "pass": self.passed}


def ks_statistic(a, b, left=None) -> KsResult:
    """Kolmogorov-Smirnov distance of ``a`` to ``b``.

    ``b`` is either a second sample (two-sample test) or a CDF callable
    (one-sample test).  For a CDF with jumps pass ``left`` = its left limit;
    the statistic is then exact for step functions as well.
    """
    a = a if isinstance(a, Ecdf) else Ecdf(a)
    if callable(b) and not isinstance(b, Ecdf):
        x = a.sorted_sample
        n = a.n
        i = np.arange(1, n + 1)
        f = np.asarray(b(x), dtype=float)
        fl = f if left is None else np.asarray(left(x), dtype=float)
        stat = max(0.0, float(np.max(i / n - f)), float(np.max(fl - (i - 1) / n)))
        threshold = KS_C01 / math.sqrt(n)
    else:
        b = b if isinstance(b, Ecdf) else Ecdf(b)
        pooled = np.concatenate([a.sorted_sample, b.sorted_sample])
        stat = float(np.max(np.abs(a(pooled) - b(pooled))))
        m, n = a.n, b.n
        threshold = KS_C01 * math.sqrt((m + n) / (m * n))
    return KsResult(statistic=stat, threshold=threshold, passed=stat <= threshold)


# ---------------------------------------------------------------------------
# tail estimation


@dataclass(frozen=True)
class TailFit:
    alpha_hat: float
    c_hat: float
    k_used: int
    ci_low: float
    ci_high: float
    alpha_se: float
    alpha_half_k: float | None = None
    alpha_double_k: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _hill_alpha(xs: np.ndarray, k: int) -> float:
    n = xs.size
    excess = np.log(xs[n - k :] / xs[n - k - 1]).sum()
    if excess <= 0:
        raise ValueError("no tail: all top log-excesses are zero")
    return k / excess


def _hill_alpha_or_none(xs: np.ndarray, k: int) -> float | None:
    try:
        return _hill_alpha(xs, k)
    except ValueError:
        return None


def hill_estimate(sample, k: int | None = None, h=None, bootstrap: int = 200) -> TailFit:
    """Hill estimate of the tail index plus the tail constant lim h(t) P(X > t).

    The constant is the average of h(t) * (empirical survival at t) over the
    order statistics t = x_(n-j), j = ceil(k/4) .. k.  ``h`` defaults to
    t**alpha_hat.  Its interval comes from a Poisson bootstrap of the tail
    counts with a fixed internal seed, so the result is a deterministic
    function of the (sorted) sample.
    """
    xs = np.sort(np.asarray(sample, dtype=float))
    if xs.size == 0 or xs[0] <= 0:
        raise ValueError("Hill estimation needs strictly positive values")
    n = xs.size
    k = int(math.isqrt(n)) if k is None else int(k)
    if k < 10 or not k < n / 2:
        raise ValueError(f"need 10 <= k < n/2, got k={k}, n={n}")
    alpha = _hill_alpha(xs, k)
    half = _hill_alpha_or_none(xs, k // 2)
    double = _hill_alpha_or_none(xs, 2 * k) if 2 * k < n / 2 else None
    hfun = h if h is not None else (lambda t: np.power(t, alpha))

    j = np.arange(math.ceil(k / 4), k + 1)
    t = xs[n - j - 1]
    above = np.searchsorted(xs, t, side="right")
    weight = np.asarray(hfun(t), dtype=float)
    c_hat = float(np.mean(weight * (n - above) / n))

    base = int(above.min())
    pos = above - base
    boot_rng = np.random.default_rng(0)
    reps = np.empty(bootstrap)
    for b in range(bootstrap):
        w = boot_rng.poisson(1.0, n - base)
        tail_counts = np.concatenate([np.cumsum(w[::-1])[::-1], [0]])
        reps[b] = np.mean(weight * tail_counts[pos] / n)
    lo, hi = np.percentile(reps, [2.5, 97.5])
    return TailFit(
        alpha_hat=float(alpha),
        c_hat=c_hat,
        k_used=k,
        ci_low=float(min(lo, c_hat)),
        ci_high=float(max(hi, c_hat)),
        alpha_se=float(alpha / math.sqrt(k)),
        alpha_half_k=None if half is None else float(half),
        alpha_double_k=None if double is None else float(double),
    )


def positive_tail_fit(sample, h=None, k: int | None = None) -> TailFit:
    """:func:`hill_estimate` on the positive part; the constant is rescaled to the full sample.

    k defaults to floor(sqrt(n)) of the full sample, capped so it stays below
    half the positive count.
    """
    sample = np.asarray(sample, dtype=float)
    pos = sample[sample > 0]
    if k is None:
        k = min(math.isqrt(sample.size), (pos.size - 1) // 2)
    fit = hill_estimate(pos, k=k, h=h)
    frac = pos.size / sample.size
    return TailFit(
        alpha_hat=fit.alpha_hat,
        c_hat=fit.c_hat * frac,
        k_used=fit.k_used,
        ci_low=fit.ci_low * frac,
        ci_high=fit.ci_high * frac,
        alpha_se=fit.alpha_se,
        alpha_half_k=fit.alpha_half_k,
        alpha_double_k=fit.alpha_double_k,
    )


def _require_heavy(model: ModelSpec) -> D.DiscretePareto:
    if not model.heavy_tailed:
        raise ValueError(f"experiment needs a heavy-tailed innovation law, got {model.innovation_law!r}")
    return model.innovation_law


# ---------------------------------------------------------------------------
# stationary tail constant and thinned tails


@dataclass
class TailExperiment:
    fit: TailFit
    target: float
    rel_error: float
    sample: np.ndarray = field(repr=False)


def _stationary_block(model, cfg, size, stream):
    return E.sample_stationary(model, cfg, stream, size)


def stationary_sample(model: ModelSpec, draws: int, rng: RngStream, cfg: StationaryConfig | None = None, workers: int = 1):
    cfg = cfg or StationaryConfig()
    return replicate(_stationary_block, draws, rng, "stationary", model, cfg, workers=workers, block=100_000)


def stationary_tail_experiment(
    model: ModelSpec, draws: int, rng: RngStream, cfg: StationaryConfig | None = None, k: int | None = None, workers: int = 1
) -> TailExperiment:
    """Estimate lim h(t) P(X_inf > t) and compare with 1 / (1 - E[phi^alpha])."""
    law = _require_heavy(model)
    sample = stationary_sample(model, draws, rng, cfg, workers)
    fit = positive_tail_fit(sample, h=law.h, k=k)
    target = 1.0 / (1.0 - D.moment_phi(model.phi_law, law.alpha))
    return TailExperiment(fit, target, abs(fit.c_hat / target - 1.0), sample)


@dataclass
class ThinningCheck:
    c_hat: float
    target: float
    rel_error: float
    fit: TailFit | None


def _thinned_block(law, phi_value, size, stream):
    return stream.gen.binomial(law.sample(stream, size), phi_value)


def thinning_tail_check(
    model: ModelSpec, phi_value: float, draws: int, rng: RngStream, k: int | None = None, workers: int = 1
) -> ThinningCheck:
    """Empirical lim h(t) P(phi o Z > t) for a fixed phi, against phi**alpha."""
    law = _require_heavy(model)
    sample = replicate(_thinned_block, draws, rng, "thinned", law, phi_value, workers=workers, block=1_000_000)
    target = phi_value**law.alpha
    if not np.any(sample > 0):
        return ThinningCheck(0.0, target, 0.0 if target == 0 else 1.0, None)
    fit = positive_tail_fit(sample, h=law.h, k=k)
    rel = abs(fit.c_hat / target - 1.0) if target > 0 else fit.c_hat
    return ThinningCheck(fit.c_hat, target, rel, fit)


# ---------------------------------------------------------------------------
# extremes


def limit_cdf(alpha: float, inverse_exponent: bool = False):
    """Frechet CDF exp(-x^-alpha), or exp(-x^(-1/alpha)) when ``inverse_exponent``."""
    e = 1.0 / alpha if inverse_exponent else alpha

    def cdf(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x > 0, np.exp(-np.power(np.where(x > 0, x, 1.0), -e)), 0.0)

    return cdf


def oracle_limit_distance(law, n: int, inverse_exponent: bool = False, k_max: int = 10**6, tail: float = 1e-9) -> float:
    """sup_x |P(K_n / b_n <= x) - G(x)| with K_n the maximum of n innovations.

    The oracle CDF is constant on [k/b_n, (k+1)/b_n), so up to ``k_max`` the
    sup over each such interval sits at one of its ends.  Beyond that the
    lattice is grouped into geometric blocks; on a block both functions are
    monotone, which brackets the distance from above.  The grid ends once
    both tail masses are below ``tail``.
    """
    b = law.b_n(n)
    e = 1.0 / law.alpha if inverse_exponent else law.alpha
    g = limit_cdf(law.alpha, inverse_exponent)
    k = np.arange(0, k_max + 1, dtype=float)
    f = D.exact_max_cdf(law, n, k)
    dist = float(np.max(np.maximum(np.abs(f - g(k / b)), np.abs(f - g((k + 1) / b)))))
    end = max(b * tail ** (-1.0 / e), law.sigma * (n / tail) ** (1.0 / law.alpha), k_max + 2.0)
    edges = np.unique(np.floor(np.geomspace(k_max + 1, end, int(np.log(end / (k_max + 1)) / np.log1p(1e-5)) + 2)))
    fe, ge = D.exact_max_cdf(law, n, edges), g(edges / b)
    if edges.size > 1:
        dist = max(dist, float(np.max(np.maximum(fe[1:] - ge[:-1], ge[1:] - fe[:-1]))))
    return max(dist, 1.0 - float(fe[-1]), 1.0 - float(ge[-1]))


@dataclass
class ExtremesResult:
    ks_oracle: KsResult
    ks_limit: KsResult
    b_n: float
    oracle_limit_distance: float
    oracle_limit_distance_inverse: float
    maxima: np.ndarray = field(repr=False)

    @property
    def scaled(self) -> np.ndarray:
        return self.maxima / self.b_n


def _maxima_block(model, n, size, stream):
    return E.run_paths(model, n, size, stream).maximum


def extremes_experiment(model: ModelSpec, n: int, reps: int, rng: RngStream, workers: int = 1) -> ExtremesResult:
    """M_n / b_n over ``reps`` paths from X_0 = 0, tested against the exact law of K_n / b_n."""
    law = _require_heavy(model)
    maxima = replicate(_maxima_block, reps, rng, "extremes", model, n, workers=workers)
    # KS is scale free, so compare on the integer scale where the oracle is exact
    ks_oracle = ks_statistic(
        maxima,
        lambda x: D.exact_max_cdf(law, n, x),
        left=lambda x: D.exact_max_cdf_left(law, n, x),
    )
    b = law.b_n(n)
    ks_limit = ks_statistic(maxima / b, limit_cdf(law.alpha))
    return ExtremesResult(
        ks_oracle=ks_oracle,
        ks_limit=ks_limit,
        b_n=float(b),
        oracle_limit_distance=oracle_limit_distance(law, n),
        oracle_limit_distance_inverse=oracle_limit_distance(law, n, inverse_exponent=True),
        maxima=maxima,
    )


# ---------------------------------------------------------------------------
# partial sums


class SumsCase(enum.Enum):
    SUB_CRITICAL = "subcritical"
    UNIT = "unit"
    MID_STABLE = "midstable"
    BOUNDARY = "boundary"
    GAUSSIAN = "gaussian"


def check_case(model: ModelSpec, case: SumsCase) -> None:
    a = model.alpha
    ok = {
        SumsCase.SUB_CRITICAL: a is not None and a < 1,
        SumsCase.UNIT: a == 1,
        SumsCase.MID_STABLE: a is not None and 1 < a < 2,
        SumsCase.BOUNDARY: a == 2,
        SumsCase.GAUSSIAN: a is None or a > 2,
    }[case]
    if not ok:
        raise ValueError(f"case/model mismatch: case {case.value} does not fit tail index {a}")


def boundary_scale(presample: np.ndarray, n: int) -> float:
    """Smallest order statistic t of the pre-sample with n t^-2 E[X^2; X <= t] <= 1."""
    xs = np.sort(np.asarray(presample, dtype=float))
    m2 = np.cumsum(xs * xs) / xs.size
    m2_at = m2[np.searchsorted(xs, xs, side="right") - 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = (xs > 0) & (n * m2_at / (xs * xs) <= 1.0)
    hits = np.flatnonzero(ok)
    if hits.size == 0:
        raise ValueError("pre-sample too small to locate a_n")
    return float(xs[hits[0]])


@dataclass
class SumsResult:
    case: SumsCase
    n: int
    compare_n: int
    a_n: float
    a_compare: float
    normalized: np.ndarray = field(repr=False)
    normalized_compare: np.ndarray = field(repr=False)
    ks_self: KsResult | None = None
    hill: TailFit | None = None
    min_value: float = math.nan
    ks_gaussian: KsResult | None = None
    long_run_variance: float | None = None


def _sums_block(model, n, size, stream):
    return E.run_paths(model, n, size, stream).total


def _normalizer(model: ModelSpec, case: SumsCase, n: int, presample):
    law = model.innovation_law
    if case is SumsCase.GAUSSIAN:
        return math.sqrt(n), n * model.stationary_mean
    if case is SumsCase.BOUNDARY:
        return boundary_scale(presample, n), n * model.stationary_mean
    a = float(law.b_n(n))
    if case is SumsCase.SUB_CRITICAL:
        return a, 0.0
    if case is SumsCase.UNIT:
        x = np.asarray(presample, dtype=float)
        return a, n * float(np.mean(np.where(x <= a, x, 0.0)))
    return a, n * model.stationary_mean


def partial_sums_experiment(
    model: ModelSpec,
    case: SumsCase,
    n: int,
    reps: int,
    rng: RngStream,
    compare_n: int | None = None,
    presample: int = 10**6,
    cycles: int = 10**5,
    workers: int = 1,
) -> SumsResult:
    """Normalised partial sums S_n of ``reps`` paths from X_0 = 0.

    Centering uses the exact stationary mean E[Z] / (1 - E[phi]); truncated
    moments for the unit and boundary cases come from an independent
    stationary pre-sample.  Tail diagnostics use the longer horizon.
    """
    check_case(model, case)
    compare_n = 4 * n if compare_n is None else compare_n
    pre = None
    if case in (SumsCase.UNIT, SumsCase.BOUNDARY):
        pre = stationary_sample(model, presample, rng.spawn("presample"), workers=workers)
    a1, c1 = _normalizer(model, case, n, pre)
    a2, c2 = _normalizer(model, case, compare_n, pre)
    s1 = replicate(_sums_block, reps, rng, f"sums:{n}", model, n, workers=workers)
    s2 = replicate(_sums_block, reps, rng, f"sums:{compare_n}", model, compare_n, workers=workers)
    z1, z2 = (s1 - c1) / a1, (s2 - c2) / a2
    res = SumsResult(case, n, compare_n, a1, a2, z1, z2, ks_self=ks_statistic(z1, z2))
    longer = z2 if compare_n >= n else z1
    res.min_value = float(min(z1.min(), z2.min()))
    if case is SumsCase.GAUSSIAN:
        mu = model.stationary_mean
        sig, w = E.cycle_arrays(E.collect_cycles(model, cycles, rng.spawn("cycles")))
        var = float(np.mean((w - mu * sig) ** 2) / np.mean(sig))
        res.long_run_variance = var
        res.ks_gaussian = ks_statistic(z1 / math.sqrt(var), special.ndtr)
    else:
        res.hill = positive_tail_fit(longer)
    return res


# ---------------------------------------------------------------------------
# regeneration cycles


@dataclass
class CycleTailResult:
    w_fit: TailFit | None
    slope: float
    intercept: float
    r2: float
    adjacent_corr: float
    degenerate: bool
    sigma: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)


def survival_regression(sigma: np.ndarray):
    """Least squares of log P(sigma > t) on integer t in [q50, q99]; None if too few points."""
    lo, hi = np.quantile(sigma, [0.5, 0.99])
    t = np.arange(math.floor(lo), math.ceil(hi) + 1)
    srt = np.sort(sigma)
    surv = (srt.size - np.searchsorted(srt, t, side="right")) / srt.size
    keep = surv > 0
    if keep.sum() < 3:
        return None
    fit = stats.linregress(t[keep], np.log(surv[keep]))
    return float(fit.slope), float(fit.intercept), float(fit.rvalue**2)


def cycle_tail_experiment(model: ModelSpec, cycles: int, rng: RngStream, k: int | None = None) -> CycleTailResult:
    """Tail index of the cycle sums W and geometric decay of the cycle lengths sigma."""
    if cycles < 10**4:
        raise ValueError("cycle_tail_experiment needs at least 10^4 cycles")
    sig, w = E.cycle_arrays(E.collect_cycles(model, cycles, rng))
    reg = survival_regression(sig)
    degenerate = reg is None or np.all(sig == sig[0])
    slope, intercept, r2 = reg if reg is not None else (math.nan, math.nan, math.nan)
    corr = math.nan if np.all(sig == sig[0]) else float(np.corrcoef(sig[:-1], sig[1:])[0, 1])
    h = model.innovation_law.h if model.heavy_tailed else None
    try:
        w_fit = positive_tail_fit(w, h=h, k=k)
    except ValueError:
        w_fit = None
    return CycleTailResult(w_fit, slope, intercept, r2, corr, bool(degenerate), sig, w)


# ---------------------------------------------------------------------------
# total progeny tail constant


@dataclass
class YTailResult:
    c_hat: float
    target: float
    target_se: float
    rel_error: float
    fit: TailFit
    sample: np.ndarray = field(repr=False)


def _progeny_block(model, size, stream):
    z0 = model.innovation_law.sample(stream, size)
    return G.total_progeny_batch(z0, model.phi_law, stream)


def _progeny_factor_block(phi_law, alpha, tol, size, stream):
    m = phi_law.mean
    s = np.ones(size)
    if m == 0:
        return s**alpha
    p = np.ones(size)
    active = np.arange(size)
    while active.size:
        pa = p[active] * phi_law.sample(stream, active.size)
        p[active] = pa
        s[active] += pa
        active = active[pa * m / (1.0 - m) >= tol]
    return s**alpha


def y_tail_constant_experiment(
    model: ModelSpec, reps: int, rng: RngStream, target_reps: int = 10**6, k: int | None = None, workers: int = 1
) -> YTailResult:
    """Tail constant of the total progeny Y of one immigration wave vs E[(1 + sum prod phi)^alpha]."""
    law = _require_heavy(model)
    sample = replicate(_progeny_block, reps, rng, "progeny", model, workers=workers, block=100_000)
    fit = positive_tail_fit(sample, h=law.h, k=k)
    factors = replicate(
        _progeny_factor_block, target_reps, rng, "progeny-target", model.phi_law, law.alpha, 1e-6,
        workers=workers, block=100_000,
    )
    target = float(factors.mean())
    se = float(factors.std(ddof=1) / math.sqrt(factors.size)) if factors.size > 1 else 0.0
    return YTailResult(fit.c_hat, target, se, abs(fit.c_hat / target - 1.0), fit, sample)


# ---------------------------------------------------------------------------
# law of large numbers


@dataclass(frozen=True)
class LlnResult:
    mean: float
    target: float
    rel_error: float


def lln_check(model: ModelSpec, n: int, rng: RngStream) -> LlnResult:
    """S_n / n along one path against E[Z] / (1 - E[phi])."""
    if model.heavy_tailed and model.alpha <= 1:
        raise ValueError(f"E[Z] is infinite for tail index {model.alpha}; the LLN check needs alpha > 1")
    target = model.stationary_mean
    path = E.simulate_path(model, n, 0, rng)
    mean = float(path.x[1:].mean())
    err = abs(mean - target) / target if target > 0 else abs(mean - target)
    return LlnResult(mean, target, err)


# ---------------------------------------------------------------------------
# ages


@dataclass
class AgeResult:
    lam_n: np.ndarray = field(repr=False)
    lam_2n: np.ndarray = field(repr=False)
    eta_n: np.ndarray = field(repr=False)
    eta_2n: np.ndarray = field(repr=False)
    ks_lambda: KsResult = None
    eta_mean_gap: float = math.nan
    eta_joint_se: float = math.nan


def _ages_block(model, n, size, stream):
    batch = G.simulate_cohorts(model, n, size, stream)
    return np.stack([batch.max_age(), batch.avg_age()], axis=1)


def age_limit_experiment(model: ModelSpec, n: int, reps: int, rng: RngStream, workers: int = 1) -> AgeResult:
    """Laws of the maximal age lambda and average age eta at generations n and 2n.

    Undefined lambda (no older cohort alive) is recorded as 0; undefined eta
    (empty population) is left out of the means.
    """
    a = replicate(_ages_block, reps, rng, f"ages:{n}", model, n, workers=workers)
    b = replicate(_ages_block, reps, rng, f"ages:{2 * n}", model, 2 * n, workers=workers)
    lam1, lam2 = np.nan_to_num(a[:, 0], nan=0.0), np.nan_to_num(b[:, 0], nan=0.0)
    e1, e2 = a[:, 1][~np.isnan(a[:, 1])], b[:, 1][~np.isnan(b[:, 1])]
    se = math.sqrt(e1.var(ddof=1) / e1.size + e2.var(ddof=1) / e2.size)
    return AgeResult(lam1, lam2, e1, e2, ks_statistic(lam1, lam2), abs(e1.mean() - e2.mean()), se)
