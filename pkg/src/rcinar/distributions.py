"""Coefficient laws, innovation laws, binomial thinning and the stable reference law.

Thinning-probability laws (``Degenerate``, ``DiscreteAtoms``, ``BetaShape``)
draw the random coefficient phi in [0, 1].  Innovation laws
(``DiscretePareto``, ``Poisson``, ``Geometric``) draw the non-negative integer
immigration term.  All samplers take an explicit :class:`RngStream` and an
optional ``size``; with ``size=None`` they return a Python scalar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special, stats

from .rng import RngStream

# Pareto draws are clipped here: beyond 2**53 a float64 no longer resolves integers.
MAX_COUNT = 2**53


class ModelError(ValueError):
    """Raised when a law violates the model assumptions."""


def _scalar(value, size):
    if size is None:
        return value.item() if isinstance(value, np.ndarray) or isinstance(value, np.generic) else value
    return value


# ---------------------------------------------------------------------------
# thinning-probability laws


@dataclass(frozen=True)
class Degenerate:
    """Point mass at ``p``."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ModelError(f"phi must lie in [0, 1], got {self.p}")
        if self.p >= 1.0:
            raise ModelError("Assumption (A1) violated: P(phi = 1) must be < 1, got Degenerate(1.0)")

    def sample(self, rng: RngStream, size=None):
        if size is None:
            return float(self.p)
        return np.full(size, float(self.p))

    def moment(self, gamma: float) -> float:
        return float(self.p) ** gamma if self.p > 0 else 0.0

    @property
    def mean(self) -> float:
        return float(self.p)


@dataclass(frozen=True)
class DiscreteAtoms:
    """Finitely supported law: ``atoms[i]`` with probability ``weights[i]``."""

    atoms: tuple
    weights: tuple

    def __post_init__(self):
        atoms = tuple(float(a) for a in self.atoms)
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        if len(atoms) == 0 or len(atoms) != len(weights):
            raise ModelError("atoms and weights must be non-empty and of equal length")
        if any(not 0.0 <= a <= 1.0 for a in atoms):
            raise ModelError(f"atoms must lie in [0, 1], got {atoms}")
        if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
            raise ModelError(f"weights must be non-negative and sum to 1, got {weights}")
        mass_at_one = sum(w for a, w in zip(atoms, weights) if a == 1.0)
        if mass_at_one >= 1.0 - 1e-12:
            raise ModelError("Assumption (A1) violated: P(phi = 1) must be < 1")

    def sample(self, rng: RngStream, size=None):
        idx = np.searchsorted(np.cumsum(self.weights), rng.gen.random(size), side="right")
        idx = np.minimum(idx, len(self.atoms) - 1)
        return _scalar(np.asarray(self.atoms)[idx], size)

    def moment(self, gamma: float) -> float:
        return float(sum(w * (a**gamma if a > 0 else 0.0) for a, w in zip(self.atoms, self.weights)))

    @property
    def mean(self) -> float:
        return self.moment(1.0)


@dataclass(frozen=True)
class BetaShape:
    """Beta(a, b) law on [0, 1]; P(phi = 1) = 0 automatically."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ModelError(f"Beta shapes must be positive, got a={self.a}, b={self.b}")

    def sample(self, rng: RngStream, size=None):
        return _scalar(rng.gen.beta(self.a, self.b, size), size)

    def moment(self, gamma: float) -> float:
        # B(a + gamma, b) / B(a, b)
        a, b = self.a, self.b
        return math.exp(
            math.lgamma(a + gamma) + math.lgamma(a + b) - math.lgamma(a) - math.lgamma(a + b + gamma)
        )

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)


PhiLaw = Union[Degenerate, DiscreteAtoms, BetaShape]


# ---------------------------------------------------------------------------
# innovation laws


class _IntegerLaw:
    """Shared CDF helpers for laws on the non-negative integers."""

    def survival(self, x):
        raise NotImplementedError

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x < 0, 0.0, 1.0 - self.survival(np.maximum(x, 0.0)))
        return out if out.ndim else float(out)

    def cdf_left(self, x):
        """P(Z < x)."""
        x = np.asarray(x, dtype=float)
        return self.cdf(np.ceil(x) - 1.0)

    def log_cdf(self, x):
        """log P(Z <= x), accurate when the survival is tiny."""
        x = np.asarray(x, dtype=float)
        s = np.asarray(self.survival(np.maximum(x, 0.0)), dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(x < 0, -np.inf, np.log1p(-np.minimum(s, 1.0)))
        return out if out.ndim else float(out)

    heavy_tailed = False
    tail_index = None

    def h(self, t):
        raise ModelError(f"h(t) is only defined for heavy-tailed innovations, not {self!r}")

    def b_n(self, n):
        raise ModelError(f"b_n is only defined for heavy-tailed innovations, not {self!r}")


@dataclass(frozen=True)
class DiscretePareto(_IntegerLaw):
    """``Z = floor(V)`` with ``P(V > t) = (sigma / t)**alpha`` for ``t >= sigma``."""

    alpha: float
    sigma: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.sigma > 0):
            raise ModelError(f"DiscretePareto needs alpha > 0 and sigma > 0, got {self.alpha}, {self.sigma}")

    heavy_tailed = True

    @property
    def tail_index(self) -> float:
        return float(self.alpha)

    def sample(self, rng: RngStream, size=None):
        u = rng.gen.random(size)
        v = self.sigma * np.power(1.0 - u, -1.0 / self.alpha)
        z = np.floor(np.minimum(v, MAX_COUNT)).astype(np.int64)
        return _scalar(z, size)

    def survival(self, x):
        # Z > x  <=>  V >= floor(x) + 1
        x = np.asarray(x, dtype=float)
        t = np.floor(np.maximum(x, 0.0)) + 1.0
        out = np.minimum(1.0, np.power(self.sigma / t, self.alpha))
        out = np.where(x < 0, 1.0, out)
        return out if out.ndim else float(out)

    def h(self, t):
        return np.power(np.asarray(t, dtype=float) / self.sigma, self.alpha) if np.ndim(t) else (float(t) / self.sigma) ** self.alpha

    def b_n(self, n):
        return self.sigma * np.power(n, 1.0 / self.alpha) if np.ndim(n) else self.sigma * float(n) ** (1.0 / self.alpha)

    @property
    def mean(self) -> float:
        if self.alpha <= 1:
            return math.inf
        # E[Z] = sum_{k>=1} P(V >= k)
        below = math.floor(self.sigma)
        return below + self.sigma**self.alpha * float(special.zeta(self.alpha, below + 1))

    def moment_bound(self, gamma: float) -> float:
        """Upper bound on E[Z**gamma] (uses Z <= V)."""
        if gamma >= self.alpha:
            return math.inf
        return self.sigma**gamma * self.alpha / (self.alpha - gamma)


@dataclass(frozen=True)
class Poisson(_IntegerLaw):
    """Poisson(lam); ``lam = 0`` is the point mass at zero."""

    lam: float

    def __post_init__(self):
        if not self.lam >= 0:
            raise ModelError(f"Poisson rate must be non-negative, got {self.lam}")

    def sample(self, rng: RngStream, size=None):
        return _scalar(rng.gen.poisson(self.lam, size), size)

    def survival(self, x):
        return stats.poisson.sf(np.floor(x), self.lam) if self.lam > 0 else np.zeros_like(np.asarray(x, float)) + 0.0

    @property
    def mean(self) -> float:
        return float(self.lam)

    def moment_bound(self, gamma: float) -> float:
        return self.mean**gamma if gamma <= 1 else math.inf


@dataclass(frozen=True)
class Geometric(_IntegerLaw):
    """``P(Z = k) = (1 - q) * q**k`` on ``k = 0, 1, ...``."""

    q: float

    def __post_init__(self):
        if not 0.0 <= self.q < 1.0:
            raise ModelError(f"Geometric q must lie in [0, 1), got {self.q}")

    def sample(self, rng: RngStream, size=None):
        return _scalar(rng.gen.geometric(1.0 - self.q, size) - 1, size)

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        out = np.power(self.q, np.floor(np.maximum(x, 0.0)) + 1.0)
        return out if out.ndim else float(out)

    @property
    def mean(self) -> float:
        return self.q / (1.0 - self.q)

    def moment_bound(self, gamma: float) -> float:
        return self.mean**gamma if gamma <= 1 else math.inf


InnovationLaw = Union[DiscretePareto, Poisson, Geometric]


# ---------------------------------------------------------------------------
# stable reference law


@dataclass(frozen=True)
class StableLaw:
    """Totally right-skewed stable law with log-characteristic function

        -b |t|^alpha (1 + i sign(t) f(t)),
        f(t) = -tan(pi alpha / 2)   (alpha != 1),   f(t) = (2 / pi) log|t|   (alpha = 1).

    This is the S1 parametrisation S_alpha(sigma, beta=1, mu=0) with
    ``sigma = b**(1/alpha)``; at alpha = 1 the identity needs sigma = b and
    the usual shift (2/pi) sigma log sigma.
    """

    alpha: float
    b: float = 1.0

    def __post_init__(self):
        if not (0 < self.alpha <= 2 and self.b > 0):
            raise ModelError(f"stable law needs alpha in (0, 2] and b > 0, got {self.alpha}, {self.b}")

    def log_cf(self, t):
        t = np.asarray(t, dtype=float)
        a = self.alpha
        with np.errstate(divide="ignore", invalid="ignore"):
            if a == 1:
                f = (2.0 / np.pi) * np.log(np.abs(t))
            else:
                f = -np.tan(np.pi * a / 2.0)
            out = -self.b * np.abs(t) ** a * (1.0 + 1j * np.sign(t) * f)
        return np.where(t == 0, 0.0 + 0.0j, out)

    def sample(self, rng: RngStream, size=None):
        # Chambers-Mallows-Stuck with beta = 1; uniform drawn on the open interval.
        u = (rng.gen.integers(0, 2**53, size=size) + 0.5) / 2.0**53
        v = np.pi * (u - 0.5)
        w = rng.gen.standard_exponential(size)
        a = self.alpha
        if a == 1:
            half_pi = np.pi / 2.0
            x = (2.0 / np.pi) * ((half_pi + v) * np.tan(v) - np.log(half_pi * w * np.cos(v) / (half_pi + v)))
            sigma = self.b
            out = sigma * x + (2.0 / np.pi) * sigma * math.log(sigma)
        else:
            tan_a = math.tan(np.pi * a / 2.0)
            shift = math.atan(tan_a) / a
            scale = (1.0 + tan_a * tan_a) ** (1.0 / (2.0 * a))
            x = (
                scale
                * np.sin(a * (v + shift))
                / np.cos(v) ** (1.0 / a)
                * (np.cos(v - a * (v + shift)) / w) ** ((1.0 - a) / a)
            )
            out = self.b ** (1.0 / a) * x
        return _scalar(out, size)


# ---------------------------------------------------------------------------
# operations


def sample_phi(law: PhiLaw, rng: RngStream, size=None):
    return law.sample(rng, size)


def sample_innovation(law: InnovationLaw, rng: RngStream, size=None):
    return law.sample(rng, size)


def sample_stable(law: StableLaw, rng: RngStream, size=None):
    return law.sample(rng, size)


def thin(x, phi, rng: RngStream):
    """Binomial thinning ``phi o x``: number of successes in ``x`` Bernoulli(phi) trials.

    numpy's sampler is exact: inversion when ``x * min(phi, 1 - phi) < 30``,
    BTPE acceptance-rejection otherwise.  Works elementwise on arrays.
    """
    if np.ndim(x) == 0 and np.ndim(phi) == 0:
        x = int(x)
        if x < 0:
            raise ValueError(f"count must be non-negative, got {x}")
        if not 0.0 <= phi <= 1.0:
            raise ValueError(f"phi must lie in [0, 1], got {phi}")
        if x == 0 or phi == 0.0:
            return 0
        if phi == 1.0:
            return x
        return int(rng.gen.binomial(x, phi))
    return rng.gen.binomial(x, phi)


def thin_coupled(x: int, phi: float, uniforms) -> int:
    """Thinning driven by per-individual uniforms; monotone in ``x`` for shared uniforms."""
    return int(np.count_nonzero(np.asarray(uniforms[:x]) < phi))


def h_of(law: InnovationLaw, t):
    """Normalising function with h(t) P(Z > t) -> 1: ``(t / sigma)**alpha``."""
    if np.any(np.asarray(t) <= 0):
        raise ValueError("h is defined for t > 0")
    return law.h(t)


def b_n(law: InnovationLaw, n):
    """``inf{t > 0: h(t) >= n} = sigma * n**(1/alpha)``."""
    if np.any(np.asarray(n) < 1):
        raise ValueError("b_n needs n >= 1")
    return law.b_n(n)


def moment_phi(law: PhiLaw, gamma: float) -> float:
    """E[phi**gamma], in closed form."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return law.moment(gamma)


def exact_max_cdf(law: InnovationLaw, n: int, x):
    """P(max(Z_1..Z_n) <= x) = P(Z <= x)**n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = np.exp(n * np.asarray(law.log_cdf(x)))
    return out if np.ndim(out) else float(out)


def exact_max_cdf_left(law: InnovationLaw, n: int, x):
    """P(max(Z_1..Z_n) < x)."""
    return exact_max_cdf(law, n, np.ceil(np.asarray(x, dtype=float)) - 1.0)
