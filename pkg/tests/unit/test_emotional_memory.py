"""
Unit Tests for Emotional Memory

Tests for the episode store and the compensation table
"""

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent.parent / 'src'))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from appraisal.affect import AffectVector
from memory.emotional_memory import CompensationTable, EpisodeStore, TABLE_COLUMNS
from utils.errors import OrderingError


def store_from(records, capacity=1000) -> EpisodeStore:
    store = EpisodeStore(capacity)
    for t, (category, valence, arousal) in enumerate(records):
        store.record(t, category, AffectVector(valence, arousal))
    return store


class TestCompensate:
    """Tests for shifting the RAM output"""

    def test_unseen_category_is_identity(self):
        table = CompensationTable()
        assert table.compensate(AffectVector(4.0, 6.0), 3) == AffectVector(4.0, 6.0)
        assert table.lookup(3) == AffectVector(0.0, 0.0)

    def test_vector_addition(self):
        table = CompensationTable()
        table.set(2, AffectVector(0.3, -0.2))
        assert table.compensate(AffectVector(5.0, 5.0), 2) == AffectVector(5.3, 4.8)

    def test_pure(self):
        table = CompensationTable()
        table.set(1, AffectVector(0.5, 0.5))
        first = table.compensate(AffectVector(5.0, 5.0), 1)
        assert table.compensate(AffectVector(5.0, 5.0), 1) == first


class TestEpisodeStore:
    """Tests for the (t, k, a) window"""

    def test_window_of_one(self):
        store = EpisodeStore(5)
        store.record(0, 4, AffectVector(5.0, 6.0))
        [record] = store.window(1)
        assert (record.t, record.category, record.interoception) == (0, 4, AffectVector(5.0, 6.0))

    def test_fifo_at_capacity(self):
        store = store_from([(0, 5, 5), (1, 5, 5), (2, 5, 5), (3, 5, 5)], capacity=3)
        assert len(store) == 3
        assert [r.t for r in store] == [1, 2, 3]

    def test_phi_sets_exclude_last_record(self):
        store = store_from([(1, 5, 5), (1, 6, 6), (2, 7, 7)])
        assert store.phi_sets() == {1: [0, 1]}
        store.record(3, 1, AffectVector(5, 5))
        phi = store.phi_sets()
        assert len(phi[1]) == 2
        assert len(phi[2]) == 1

    def test_non_monotone_t_rejected(self):
        store = EpisodeStore()
        store.record(5, 0, AffectVector(5, 5))
        with pytest.raises(OrderingError):
            store.record(5, 0, AffectVector(5, 5))

    def test_zero_capacity_rejected(self):
        with pytest.raises(ValueError):
            EpisodeStore(0)

    def test_state_round_trip(self):
        store = store_from([(1, 5, 5), (2, 6, 7)])
        other = EpisodeStore()
        other.load_state_dict(store.state_dict())
        assert [(r.t, r.category, r.interoception) for r in other] == \
            [(r.t, r.category, r.interoception) for r in store]


class TestUpdateTable:
    """Tests for the smoothing update"""

    def test_zero_deltas_leave_table(self):
        table = CompensationTable(gamma=0.1)
        table.update_table(store_from([(1, 5, 5)] * 4))
        assert table.lookup(1) == AffectVector(0.0, 0.0)

    def test_constant_positive_deltas(self):
        records = [(1, 5 + i, 5 + i) for i in range(6)]
        table = CompensationTable(gamma=0.1)
        increments = table.update_table(store_from(records))
        assert increments[1].valence == pytest.approx(0.1)
        assert table.lookup(1).valence == pytest.approx(0.1)
        assert table.lookup(1).arousal == pytest.approx(0.1)

    def test_opposite_deltas_cancel(self):
        records = [(2, 5, 5), (2, 6, 6), (2, 5, 5), (2, 6, 6), (9, 5, 5)]
        table = CompensationTable(gamma=0.1)
        table.update_table(store_from(records))
        # deltas +1, -1, +1, -1 for category 2
        assert table.lookup(2).valence == pytest.approx(0.0)
        assert table.lookup(2).arousal == pytest.approx(0.0)

    def test_delta_attributed_to_preceding_category(self):
        records = [(1, 5, 5), (2, 7, 4), (1, 7, 4)]
        table = CompensationTable(gamma=0.5)
        table.update_table(store_from(records))
        assert table.lookup(1) == AffectVector(1.0, -0.5)
        assert table.lookup(2) == AffectVector(0.0, 0.0)

    def test_updates_accumulate(self):
        store = store_from([(1, 5, 5), (1, 6, 6)])
        table = CompensationTable(gamma=1.0)
        table.update_table(store)
        table.update_table(store)
        assert table.lookup(1) == AffectVector(2.0, 2.0)

    @given(st.lists(st.tuples(st.floats(1.0, 13.0), st.floats(1.0, 13.0)), min_size=2, max_size=12),
           st.randoms(use_true_random=False))
    @settings(max_examples=60)
    def test_invariant_to_order_within_category(self, pairs, shuffler):
        def table_for(ordered):
            store = EpisodeStore()
            t = 0
            for before, after in ordered:
                store.record(t, 1, AffectVector(before, 5.0))
                store.record(t + 1, 2, AffectVector(after, 5.0))
                t += 2
            table = CompensationTable(gamma=0.1)
            table.update_table(store)
            return table.lookup(1)

        shuffled = list(pairs)
        shuffler.shuffle(shuffled)
        assert table_for(shuffled).valence == pytest.approx(table_for(pairs).valence, abs=1e-12)

    def test_frozen_table_ignores_updates(self):
        table = CompensationTable(gamma=0.1, frozen=True)
        assert table.update_table(store_from([(1, 5, 5), (1, 9, 9)])) == {}
        assert table.categories() == []

    def test_empty_store_rejected(self):
        with pytest.raises(ValueError):
            CompensationTable().update_table(EpisodeStore())

    def test_frame_and_state(self):
        table = CompensationTable()
        table.set(3, AffectVector(0.1, -0.1))
        table.set(0, AffectVector(0.2, 0.2))
        frame = table.to_frame()
        assert list(frame.columns) == TABLE_COLUMNS
        assert frame['category'].tolist() == [0, 3]
        other = CompensationTable()
        other.load_state_dict(table.state_dict())
        assert other.lookup(3) == table.lookup(3)
        assert other.categories() == [0, 3]


# Run tests if executed directly
if __name__ == "__main__":
    pytest.main([__file__, "-v"])
