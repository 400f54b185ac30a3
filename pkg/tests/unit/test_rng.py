"""
Unit Tests for Random Streams

Tests for per-component stream derivation and checkpointable state
"""

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent.parent / 'src'))

import numpy as np
import pytest
from scipy.stats import chisquare

from engine.rng import RngStreams, STREAM_IDS, derive_stream, stream_key, torch_generator


class TestDerivation:
    """Tests for (seed, id) -> stream"""

    def test_same_pair_same_draws(self):
        a = derive_stream(42, 'env').random(100)
        b = derive_stream(42, 'env').random(100)
        assert np.array_equal(a, b)

    def test_different_ids_differ(self):
        a = derive_stream(42, 'env').random(100)
        b = derive_stream(42, 'noise').random(100)
        assert not np.array_equal(a, b)

    def test_different_seeds_differ(self):
        assert stream_key(1, 'env') != stream_key(2, 'env')

    def test_uniform_draws(self):
        draws = derive_stream(7, 'replay').integers(0, 10, size=10_000)
        counts = np.bincount(draws, minlength=10)
        assert chisquare(counts).pvalue > 0.01

    def test_torch_generator_is_seeded(self):
        a = torch_generator(derive_stream(0, 'init')).initial_seed()
        b = torch_generator(derive_stream(0, 'init')).initial_seed()
        assert a == b


class TestRngStreams:
    """Tests for the per-run registry"""

    def test_all_streams_created(self):
        streams = RngStreams(3)
        assert set(streams.state_dict()) == set(STREAM_IDS)

    def test_streams_are_independent(self):
        a = RngStreams(5)
        b = RngStreams(5)
        a['env'].random(50)
        assert np.array_equal(a['noise'].random(10), b['noise'].random(10))

    def test_state_round_trip(self):
        streams = RngStreams(11)
        streams['ddpg'].random(17)
        saved = streams.state_dict()
        expected = streams['ddpg'].random(5)
        other = RngStreams(99)
        other.load_state_dict(saved)
        assert np.array_equal(other['ddpg'].random(5), expected)

    def test_load_restores_in_place(self):
        streams = RngStreams(1)
        shared = streams['env']
        saved = streams.state_dict()
        first = shared.random(3)
        streams.load_state_dict(saved)
        assert streams['env'] is shared
        assert np.array_equal(shared.random(3), first)


# Run tests if executed directly
if __name__ == "__main__":
    pytest.main([__file__, "-v"])
