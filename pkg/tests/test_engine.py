import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcinar import distributions as D
from rcinar import engine as E
from rcinar.engine import ModelSpec, StationaryConfig, StationaryMode
from rcinar.parallel import block_sizes, replicate
from rcinar.rng import RngStream, stream_id_for

LIGHT = ModelSpec(D.Degenerate(0.5), D.Poisson(2.0))
HEAVY = ModelSpec(D.BetaShape(2, 2), D.DiscretePareto(1.5))


def test_stationary_mean_formula():
    assert LIGHT.stationary_mean == 4.0
    assert ModelSpec(D.BetaShape(2, 2), D.Geometric(0.5)).stationary_mean == 2.0


def test_same_stream_same_numbers():
    a = RngStream(3, stream_id_for("x", 1)).gen.random(5)
    b = RngStream(3, stream_id_for("x", 1)).gen.random(5)
    c = RngStream(3, stream_id_for("x", 2)).gen.random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_spawn_records_ids_and_is_stable():
    r = RngStream(5)
    c1 = r.spawn("a", 0)
    c2 = RngStream(5).spawn("a", 0)
    assert r.spawned == [c1.stream_id]
    assert np.array_equal(c1.gen.random(3), c2.gen.random(3))


def test_position_resumes_stream():
    r = RngStream(9, 4)
    r.gen.random(100)
    pos = r.position
    tail = r.gen.random(4)
    again = RngStream(9, 4, position=pos).gen.random(4)
    assert np.array_equal(tail, again)


def test_block_sizes():
    assert block_sizes(4500, 2000) == [2000, 2000, 500]
    assert block_sizes(0, 10) == []


def _draw(size, stream):
    return stream.gen.integers(0, 1000, size)


def test_replicate_independent_of_worker_count():
    a = replicate(_draw, 5000, RngStream(1), "t", workers=1, block=1000)
    b = replicate(_draw, 5000, RngStream(1), "t", workers=3, block=1000)
    assert np.array_equal(a, b)


def test_path_shapes_and_recursion():
    p = E.simulate_path(LIGHT, 5000, 3, RngStream(2))
    assert p.n == 5000 and p.x[0] == 3
    assert np.array_equal(p.x[1:], p.survivors[1:] + p.z[1:])
    assert np.all(p.survivors[1:] <= p.x[:-1])


def test_path_rejects_nonpositive_horizon():
    with pytest.raises(ValueError):
        E.simulate_path(LIGHT, 0, 0, RngStream(2))


def test_path_csv(tmp_path):
    p = E.simulate_path(LIGHT, 3, 0, RngStream(2))
    f = tmp_path / "p.csv"
    with open(f, "w", newline="") as fh:
        p.write_csv(fh)
    lines = f.read_bytes().split(b"\n")
    assert lines[0] == b"step,x,survivors,z,phi"
    assert lines[1] == b"0,0,,,"
    assert b"\r" not in f.read_bytes()


def test_phi_zero_path_is_the_innovations():
    p = E.simulate_path(ModelSpec(D.Degenerate(0.0), D.Poisson(3.0)), 1000, 5, RngStream(4))
    assert np.array_equal(p.x[1:], p.z[1:])


def test_run_paths_matches_definitions():
    model = ModelSpec(D.Degenerate(0.0), D.Poisson(3.0))
    b = E.run_paths(model, 1, 1000, RngStream(4))
    assert np.array_equal(b.last, b.maximum) and np.array_equal(b.last, b.total)


def test_lln_on_a_long_path():
    p = E.simulate_path(LIGHT, 10**6, 0, RngStream(11))
    assert abs(p.x[1:].mean() / 4.0 - 1) <= 0.02


def test_split_cycles_hand_example():
    x = np.array([0, 2, 3, 1, 4, 0, 2])
    s = np.array([0, 0, 1, 0, 1, 0, 0])
    cyc = E.split_cycles(x, s)
    assert [(c.sigma, c.w) for c in cyc] == [(2, 5), (2, 5), (1, 0)]
    assert cyc[0].r == (2, 3)


def test_phi_zero_cycles_have_length_one():
    cyc = E.collect_cycles(ModelSpec(D.Degenerate(0.0), D.DiscretePareto(1.5)), 500, RngStream(3))
    sig, w = E.cycle_arrays(cyc)
    assert np.all(sig == 1) and len(cyc) == 500


def test_cycle_sums_rebuild_the_path():
    cyc, x, s = E.collect_cycles(LIGHT, 200, RngStream(3), return_path=True)
    sig, w = E.cycle_arrays(cyc)
    assert w.sum() == x[1 : 1 + sig.sum()].sum()


def test_stationary_config_validation():
    with pytest.raises(ValueError):
        StationaryConfig(epsilon=0.5)
    with pytest.raises(ValueError):
        StationaryConfig(gamma=0.0)
    with pytest.raises(ValueError):
        StationaryConfig(gamma=0.9).resolved_gamma(ModelSpec(D.Degenerate(0.5), D.DiscretePareto(0.7)))
    assert StationaryConfig().resolved_gamma(HEAVY) == 0.75
    assert StationaryConfig().resolved_gamma(LIGHT) == 1.0


def test_truncated_series_with_phi_zero_is_one_innovation():
    model = ModelSpec(D.Degenerate(0.0), D.Poisson(2.0))
    a = E.sample_stationary(model, StationaryConfig(), RngStream(5), 1000)
    b = D.Poisson(2.0).sample(RngStream(5), 1000)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("mode", list(StationaryMode))
def test_stationary_mean_both_modes(mode):
    cfg = StationaryConfig(mode=mode, burn_in_steps=200)
    x = E.sample_stationary(LIGHT, cfg, RngStream(6), 200_000)
    assert x.mean() == pytest.approx(4.0, abs=0.03)


def test_stationary_scalar_draw():
    assert isinstance(E.sample_stationary(LIGHT, StationaryConfig(), RngStream(6)), int)


def test_composite_thin():
    assert E.composite_thin(10, 2, [1.0, 1.0], RngStream(1)) == 10
    assert E.composite_thin(10, 2, [0.5, 0.0], RngStream(1)) == 0
    with pytest.raises(ValueError):
        E.composite_thin(10, 3, [0.5], RngStream(1))


def test_coupled_paths_are_ordered():
    out = E.coupled_paths(HEAVY, 300, [0, 5, 50], RngStream(8))
    assert np.all(out[0] <= out[1]) and np.all(out[1] <= out[2])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**63), n=st.integers(1, 300))
def test_paths_are_reproducible(seed, n):
    a = E.simulate_path(HEAVY, n, 0, RngStream(seed))
    b = E.simulate_path(HEAVY, n, 0, RngStream(seed))
    assert np.array_equal(a.x, b.x)
    assert np.all(a.x >= 0)
