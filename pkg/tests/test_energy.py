import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ehfl.energy import (ArrivalStreams, EnergyConfig, EnergyState, available_clients,
                         sample_arrivals, update_energy)
from ehfl.errors import CausalityViolation, ConfigError


def state(levels, t=0):
    return EnergyState(t, np.array(levels))


def test_degenerate_arrival_rates():
    cfg_one = EnergyConfig((1.0,) * 5)
    cfg_zero = EnergyConfig((0.0,) * 5)
    s1, s0 = ArrivalStreams(3, 5), ArrivalStreams(3, 5)
    for _ in range(50):
        assert sample_arrivals(cfg_one, s1).tolist() == [1] * 5
        assert sample_arrivals(cfg_zero, s0).tolist() == [0] * 5


def test_bernoulli_half_law_of_large_numbers():
    cfg = EnergyConfig((0.5, 0.5))
    streams = ArrivalStreams(11, 2)
    draws = np.array([sample_arrivals(cfg, streams) for _ in range(100_000)])
    # empirical frequency; 0.01 is about 6 standard errors at n=1e5
    assert np.all(np.abs(draws.mean(axis=0) - 0.5) <= 0.01)
    assert set(np.unique(draws)) <= {0, 1}


def test_arrivals_repeatable_and_split_per_client():
    cfg4 = EnergyConfig((0.3, 0.6, 0.5, 0.9))
    cfg6 = EnergyConfig((0.3, 0.6, 0.5, 0.9, 0.1, 0.2))
    a, b, c = ArrivalStreams(7, 4), ArrivalStreams(7, 4), ArrivalStreams(7, 6)
    for _ in range(1200):  # crosses the internal block boundary
        x = sample_arrivals(cfg4, a)
        assert np.array_equal(x, sample_arrivals(cfg4, b))
        # adding clients leaves the first four arrival sequences untouched
        assert np.array_equal(x, sample_arrivals(cfg6, c)[:4])


@pytest.mark.parametrize("level,part,arrival,cap,expected", [
    (3, True, 1, 5, 3),
    (5, False, 1, 5, 5),
    (1, True, 0, 5, 0),
    (2, False, 0, 5, 2),
    (4, True, 1, None, 4),
])
def test_update_single_client(level, part, arrival, cap, expected):
    cfg = EnergyConfig((0.5,), cap, (min(level, cap or level),))
    new = update_energy(state([level]), [0] if part else [], [arrival], cfg)
    assert new.levels.tolist() == [expected]
    assert new.t == 1


def test_causality_violation():
    cfg = EnergyConfig((0.5, 0.5), 5, (0, 2))
    with pytest.raises(CausalityViolation) as err:
        update_energy(state([0, 2]), [0, 1], [1, 1], cfg)
    assert err.value.clients == [0]


def test_state_is_immutable():
    s = state([1, 2])
    with pytest.raises(ValueError):
        s.levels[0] = 5


def test_available_clients():
    assert available_clients(state([0, 1, 2, 0])) == {1, 2}
    assert available_clients(state([0, 0, 0])) == set()
    assert available_clients(state([1, 3, 2])) == {0, 1, 2}


@pytest.mark.parametrize("kwargs", [
    dict(arrival_rates=(1.2,)),
    dict(arrival_rates=(-0.1,)),
    dict(arrival_rates=(0.5,), capacity=3, initial_levels=(4,)),
    dict(arrival_rates=(0.5, 0.5), initial_levels=(1,)),
    dict(arrival_rates=(0.5,), capacity=0),
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        EnergyConfig(**kwargs)


def test_default_initial_level_is_one():
    assert EnergyConfig((0.2, 0.4)).initial_levels == (1, 1)


levels_st = st.lists(st.integers(0, 8), min_size=1, max_size=8)


@given(levels_st)
def test_identity_without_participation_or_arrivals(levels):
    cfg = EnergyConfig((0.5,) * len(levels), 8, tuple(levels))
    new = update_energy(state(levels), [], [0] * len(levels), cfg)
    assert new.levels.tolist() == levels


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6), st.lists(st.floats(0, 1), min_size=6, max_size=6),
       st.integers(1, 6))
def test_bounds_and_conservation(seed, m, rates, cap):
    rng = np.random.default_rng(seed)
    rates = tuple(rates[:m])
    finite = EnergyConfig(rates, cap, (1,) * m)
    infinite = EnergyConfig(rates, None, (1,) * m)
    sf, si = finite.initial_state(), infinite.initial_state()
    streams = ArrivalStreams(seed, m)
    total_in = np.zeros(m, int)
    total_out = np.zeros(m, int)
    for _ in range(60):
        a = sample_arrivals(finite, streams)
        part_f = [i for i in range(m) if sf.levels[i] >= 1 and rng.random() < 0.5]
        part_i = [i for i in range(m) if si.levels[i] >= 1 and rng.random() < 0.5]
        sf = update_energy(sf, part_f, a, finite)
        si = update_energy(si, part_i, a, infinite)
        total_in += a
        total_out[part_i] += 1
        assert np.all((0 <= sf.levels) & (sf.levels <= cap))
    assert np.array_equal(si.levels, 1 + total_in - total_out)


def test_trajectory_determinism():
    cfg = EnergyConfig.homogeneous(5, 0.4, 4)

    def roll():
        s, streams, out = cfg.initial_state(), ArrivalStreams(99, 5), []
        for t in range(100):
            part = [i for i in range(5) if s.levels[i] >= 1 and (i + t) % 2 == 0]
            s = update_energy(s, part, sample_arrivals(cfg, streams), cfg)
            out.append(s.levels.tolist())
        return out

    assert roll() == roll()
