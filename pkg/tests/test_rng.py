import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import philox4x64, uniform_oracle
from pdmpsim.errors import DomainError
from pdmpsim.rng import SequenceStream, UniformStream, uniform_at

# [DERIVED] Philox4x64-10 block (counter 1, key 0), computed by the pure-Python oracle
SEED0_BLOCK0 = [0x02F4BA6408E4D89B, 0x3DD62B0B9CA8C5B2, 0x1C8667A55D902E79, 0x907D7A052FD5B4DC]


def test_oracle_block_is_frozen():
    assert philox4x64([1, 0, 0, 0], [0, 0]) == SEED0_BLOCK0


def test_first_uniforms_match_frozen_words():
    s = UniformStream(0)
    for k, word in enumerate(SEED0_BLOCK0):
        assert s.uniform_at(k) == ((word >> 12) + 0.5) * 2.0**-52


@pytest.mark.parametrize("seed", [0, 1, 42, 12345, 2**63 + 5])
def test_matches_pure_python_philox(seed):
    s = UniformStream(seed)
    for k in [0, 1, 2, 3, 4, 7, 8, 99, 1001, 2**20 + 3]:
        assert s.uniform_at(k) == uniform_oracle(seed, k)


def test_same_query_twice_is_identical():
    assert UniformStream(1).uniform_at(0) == UniformStream(1).uniform_at(0)
    s = UniformStream(1)
    assert s.uniform_at(0) == s.uniform_at(0)


def test_different_seeds_differ():
    assert UniformStream(1).uniform_at(5) != UniformStream(2).uniform_at(5)


def test_batch_agrees_with_pointwise():
    s = UniformStream(9)
    batch = s.uniforms(13, 50)
    assert batch.shape == (50,)
    assert all(batch[i] == s.uniform_at(13 + i) for i in range(50))


def test_access_order_does_not_matter():
    s = UniformStream(3)
    fwd = [s.uniform_at(k) for k in range(20)]
    rev = [s.uniform_at(k) for k in reversed(range(20))][::-1]
    assert fwd == rev


@pytest.mark.parametrize("bad", [-1, 2**64, 1.5])
def test_bad_seed_rejected(bad):
    with pytest.raises((DomainError, TypeError)):
        UniformStream(bad)


def test_negative_index_rejected():
    with pytest.raises(DomainError):
        UniformStream(0).uniform_at(-1)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(0, 2**40))
def test_open_unit_interval(seed, index):
    v = uniform_at(UniformStream(seed), index)
    assert 0.0 < v < 1.0
    assert -math.log(v) < 40


def test_extreme_words_stay_inside():
    from pdmpsim.rng import _to_open_unit

    lo, hi = _to_open_unit(np.array([0, 2**64 - 1], dtype=np.uint64))
    assert lo == 2.0**-53
    assert hi == 1.0 - 2.0**-53


def test_rough_uniformity():
    u = UniformStream(2024).uniforms(0, 20000)
    assert abs(u.mean() - 0.5) < 0.01
    counts, _ = np.histogram(u, bins=10, range=(0, 1))
    assert counts.min() > 1800


def test_sequence_stream_and_fallback():
    base = UniformStream(5)
    s = SequenceStream([0.25, 0.75], fallback=base)
    assert s.uniform_at(0) == 0.25 and s.uniform_at(1) == 0.75
    assert s.uniform_at(2) == base.uniform_at(2)
    with pytest.raises(DomainError):
        SequenceStream([0.5]).uniform_at(3)
    with pytest.raises(DomainError):
        SequenceStream([1.0])
