import numpy as np
import pytest

from posthoc_alpha.rng import CounterRNG, TrialStream


def test_scalar_and_vector_paths_agree():
    rng = CounterRNG(12345)
    vec = rng.uniform(1000, 1010)
    vec_open = rng.open_uniform(1000, 1010, draw=1)
    for k, i in enumerate(range(1000, 1010)):
        s = TrialStream(12345, i)
        assert s.uniform() == vec[k]
        assert s.open_uniform() == vec_open[k]


def test_seed_42_stream_progresses():
    s = TrialStream(42)
    a, b = s.uniform(), s.uniform()
    assert a != b
    assert 0 < a <= 1 and 0 < b <= 1


def test_blocks_do_not_depend_on_split():
    rng = CounterRNG(7)
    whole = rng.uniform(0, 5000)
    pieces = np.concatenate([rng.uniform(0, 1234), rng.uniform(1234, 4000), rng.uniform(4000, 5000)])
    assert np.array_equal(whole, pieces)


def test_ranges():
    rng = CounterRNG(3)
    u = rng.uniform(0, 200_000)
    v = rng.open_uniform(0, 200_000)
    assert u.min() > 0 and u.max() <= 1
    assert v.min() > 0 and v.max() < 1


def test_seeds_give_different_streams():
    assert not np.array_equal(CounterRNG(0).uniform(0, 100), CounterRNG(1).uniform(0, 100))


def test_draw_lanes_are_distinct():
    rng = CounterRNG(9)
    assert not np.array_equal(rng.uniform(0, 100, draw=0), rng.uniform(0, 100, draw=1))


def test_substream_exhaustion():
    s = TrialStream(1, 5)
    for _ in range(4):
        s.uniform()
    with pytest.raises(RuntimeError):
        s.uniform()


def test_seed_bounds():
    with pytest.raises(ValueError):
        TrialStream(-1)
    with pytest.raises(ValueError):
        TrialStream(2**64)
