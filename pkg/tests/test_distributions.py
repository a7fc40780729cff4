import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcinar import distributions as D
from rcinar.rng import RngStream


@pytest.fixture
def rng():
    return RngStream(7, 1)


# frozen oracles, computed by hand before the code existed
ZETA_15 = 2.612375348685488  # sum_{j>=1} j^-1.5
POISSON2_POSITIVE = 0.8646647167633873  # 1 - exp(-2)
BETA22_MOMENT_15 = 8 / 21  # B(3.5, 2) / B(2, 2)
B_N_1E4_ALPHA15 = 464.1588833612779  # 10^(4/1.5)


def test_degenerate_one_rejected_with_a1_message():
    with pytest.raises(D.ModelError, match=r"\(A1\)"):
        D.Degenerate(1.0)


def test_atoms_all_mass_at_one_rejected():
    with pytest.raises(D.ModelError, match=r"\(A1\)"):
        D.DiscreteAtoms((0.5, 1.0), (0.0, 1.0))


@pytest.mark.parametrize("atoms,weights", [((), ()), ((0.5,), (0.5,)), ((1.5,), (1.0,)), ((0.2, 0.4), (1.0,))])
def test_atoms_validation(atoms, weights):
    with pytest.raises(D.ModelError):
        D.DiscreteAtoms(atoms, weights)


def test_beta_moment_closed_form():
    assert D.moment_phi(D.BetaShape(2, 2), 1.5) == pytest.approx(BETA22_MOMENT_15, rel=1e-12)
    assert D.BetaShape(2, 2).mean == 0.5


def test_beta_moment_matches_sample(rng):
    x = D.BetaShape(2, 2).sample(rng, 10**6)
    assert np.mean(x**1.5) == pytest.approx(BETA22_MOMENT_15, abs=5 * np.std(x**1.5) / 1000)


def test_atoms_moment():
    law = D.DiscreteAtoms((0.0, 0.5), (0.5, 0.5))
    assert law.moment(2.0) == pytest.approx(0.125)
    assert law.mean == pytest.approx(0.25)


def test_pareto_survival_and_mean():
    z = D.DiscretePareto(1.5)
    assert z.survival(0) == 1.0
    assert z.survival(3) == pytest.approx(0.125)
    assert z.survival(3.7) == pytest.approx(0.125)
    assert z.mean == pytest.approx(ZETA_15, rel=1e-10)
    assert D.DiscretePareto(0.7).mean == math.inf


def test_pareto_sample_frequency(rng):
    z = D.DiscretePareto(1.5).sample(rng, 10**6)
    assert z.min() >= 1
    assert np.mean(z > 3) == pytest.approx(0.125, abs=0.002)


def test_pareto_scale_sigma(rng):
    z = D.DiscretePareto(2.0, sigma=3.0)
    # P(Z > x) = (3 / (floor(x) + 1))^2 once below one
    assert z.survival(5) == pytest.approx(0.25)
    assert z.survival(1) == 1.0


def test_h_and_b_n_invert_each_other():
    z = D.DiscretePareto(1.5)
    assert D.b_n(z, 10**4) == pytest.approx(B_N_1E4_ALPHA15, rel=1e-12)
    assert D.h_of(z, D.b_n(z, 10**4)) == pytest.approx(10**4)
    with pytest.raises(ValueError):
        D.h_of(z, 0.0)
    with pytest.raises(D.ModelError):
        D.Poisson(2.0).h(3.0)


def test_poisson_and_geometric_laws(rng):
    assert D.Poisson(2.0).survival(0) == pytest.approx(POISSON2_POSITIVE)
    g = D.Geometric(0.5)
    assert g.survival(2) == pytest.approx(0.125)
    assert g.mean == pytest.approx(1.0)
    assert np.mean(g.sample(rng, 10**6)) == pytest.approx(1.0, abs=0.01)
    assert not g.heavy_tailed and g.tail_index is None


def test_zero_rate_poisson_is_the_zero_law(rng):
    assert np.all(D.Poisson(0.0).sample(rng, 100) == 0)


def test_exact_max_cdf():
    z = D.DiscretePareto(1.5)
    assert D.exact_max_cdf(z, 2, 3) == pytest.approx(0.765625)
    assert D.exact_max_cdf(z, 1, 3) == pytest.approx(z.cdf(3))
    assert D.exact_max_cdf_left(z, 2, 4) == pytest.approx(0.765625)


@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.5, 2.0])
def test_stable_empirical_cf(rng, alpha):
    law = D.StableLaw(alpha, 1.0)
    x = D.sample_stable(law, rng, 200_000)
    for t in (0.3, 1.0):
        emp = np.mean(np.exp(1j * t * x))
        assert abs(emp - np.exp(law.log_cf(t))) < 0.01


def test_stable_positive_below_one_and_gaussian_at_two(rng):
    assert np.all(D.StableLaw(0.7, 1.0).sample(rng, 10**5) > 0)
    x = D.StableLaw(2.0, 1.5).sample(rng, 10**6)
    assert np.var(x) == pytest.approx(3.0, rel=0.01)


def test_thin_edge_cases(rng):
    assert D.thin(10, 0.0, rng) == 0
    assert D.thin(10, 1.0, rng) == 10
    assert D.thin(0, 0.3, rng) == 0
    with pytest.raises(ValueError):
        D.thin(-1, 0.5, rng)
    with pytest.raises(ValueError):
        D.thin(3, 1.5, rng)


def test_thin_law_is_binomial(rng):
    x, phi, draws = 7, 0.3, 10**6
    emp = np.bincount(D.thin(np.full(draws, x), phi, rng), minlength=x + 1) / draws
    pmf = np.array([math.comb(x, j) * phi**j * (1 - phi) ** (x - j) for j in range(x + 1)])
    assert 0.5 * np.abs(emp - pmf).sum() < 0.005


@settings(max_examples=200, deadline=None)
@given(x=st.integers(0, 10**6), phi=st.floats(0, 1), seed=st.integers(0, 2**32))
def test_thin_bounded_by_count(x, phi, seed):
    out = D.thin(x, phi, RngStream(seed))
    assert 0 <= out <= x


@settings(max_examples=50, deadline=None)
@given(x=st.integers(0, 50), phi=st.floats(0, 1), seed=st.integers(0, 2**32))
def test_coupled_thinning_is_monotone(x, phi, seed):
    u = RngStream(seed).gen.random(x + 5)
    assert D.thin_coupled(x, phi, u) <= D.thin_coupled(x + 5, phi, u)


@settings(max_examples=100, deadline=None)
@given(alpha=st.floats(0.2, 3.0), n=st.integers(1, 10**6), x=st.floats(0, 1e6))
def test_max_cdf_monotone(alpha, n, x):
    z = D.DiscretePareto(alpha)
    assert D.exact_max_cdf(z, n, x) <= D.exact_max_cdf(z, n, x + 1) + 1e-15
    assert D.exact_max_cdf(z, n + 1, x) <= D.exact_max_cdf(z, n, x) + 1e-15
