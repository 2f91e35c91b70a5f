import math

import numpy as np
import pytest

from nfplcache.core import (
    Catalog,
    PolicyConfig,
    Trace,
    default_eta,
    spawn_stream,
)


def test_default_eta_theoretical_simple():
    assert default_eta(1, 1, 8) == 2.0


def test_default_eta_experimental_at_long_horizon():
    # sqrt(1 * 2e5 / (2*100)) = sqrt(1000)
    got = default_eta(1, 100, 200_000, observe_prob=1.0, kind="experimental")
    assert got == pytest.approx(31.6228, abs=1e-4)


def test_default_eta_large_batch():
    assert default_eta(100, 100, 200_000) == pytest.approx(316.228, abs=1e-3)


def test_default_eta_rejects_zero_inputs():
    with pytest.raises(ValueError):
        default_eta(0, 1, 8)
    with pytest.raises(ValueError):
        default_eta(1, 0, 8)
    with pytest.raises(ValueError):
        default_eta(1, 1, 0)
    with pytest.raises(ValueError):
        default_eta(1, 1, 8, kind="nope")


def test_spawn_stream_is_deterministic():
    a = spawn_stream(1234, 0).random(100)
    b = spawn_stream(1234, 0).random(100)
    assert np.array_equal(a, b)


def test_distinct_stream_ids_differ():
    same = sum(
        spawn_stream(s, 0).random() == spawn_stream(s, 1).random()
        for s in range(1000)
    )
    assert same == 0


def test_uniform_respects_half_open_range():
    eta = 3.5
    draws = spawn_stream(7, 2).uniform(0.0, eta, 10_000)
    assert draws.min() >= 0.0
    assert draws.max() < eta


def test_clone_restarts_the_sequence():
    stream = spawn_stream(99, 1)
    first = stream.random(10)
    assert np.array_equal(stream.clone().random(10), first)


def test_substreams_are_reproducible_and_distinct():
    s = spawn_stream(5, 1)
    a = s.substream(0).random(8)
    b = s.substream(0).random(8)
    c = s.substream(1).random(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_bernoulli_edge_probabilities():
    s = spawn_stream(0, 0)
    assert s.bernoulli(1.0, 50).all()
    assert not s.bernoulli(0.0, 50).any()
    with pytest.raises(ValueError):
        s.bernoulli(1.5, 10)


def test_catalog_requires_files():
    with pytest.raises(ValueError):
        Catalog(0)
    assert Catalog(3).n_files == 3


def test_trace_validates_ids_and_length():
    cat = Catalog(3)
    with pytest.raises(ValueError):
        Trace(cat, [0, 3])
    with pytest.raises(ValueError):
        Trace(cat, [-1])
    with pytest.raises(ValueError):
        Trace(cat, [])
    assert len(Trace(cat, [0, 1, 2])) == 3


def test_policy_config_validation():
    PolicyConfig(cache_capacity=2, eta=1.0)
    with pytest.raises(ValueError):
        PolicyConfig(cache_capacity=0, eta=1.0)
    with pytest.raises(ValueError):
        PolicyConfig(cache_capacity=1, eta=0.0)
    with pytest.raises(ValueError):
        PolicyConfig(cache_capacity=1, eta=1.0, observe_prob=0.0)
    with pytest.raises(ValueError):
        PolicyConfig(cache_capacity=1, eta=1.0, sample_prob=1.5)
    with pytest.raises(ValueError):
        PolicyConfig(cache_capacity=1, eta=1.0, noise_mode="wiggly")
    with pytest.raises(ValueError):
        PolicyConfig(cache_capacity=1, eta=1.0, sampling="fixed")
    with pytest.raises(ValueError):
        PolicyConfig(cache_capacity=1, batch_size=4, eta=1.0, sampling="fixed",
                     fixed_per_batch=5)
    cfg = PolicyConfig(cache_capacity=1, batch_size=4, eta=1.0, sampling="fixed",
                       fixed_per_batch=2)
    assert cfg.fixed_per_batch == 2


def test_eta_formula_value():
    # closed form against a direct evaluation on odd inputs
    assert default_eta(3, 7, 1000) == pytest.approx(math.sqrt(3 * 1000 / 14))
