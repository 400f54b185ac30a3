"""
Unit Tests for Affect Values and Internal Appraisal

Tests for AffectVector arithmetic, fatigue accumulators and action classes
"""

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent.parent / 'src'))

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from appraisal.affect import AffectVector
from appraisal.internal import (
    ActionClass, FatigueState, ia_value, ia_update, classify_action, combine_appraisals
)
from engine.config import AppraisalSettings
from utils.errors import NonFiniteError
from world.faces import ExpressionLabel, FaceControls

accumulator = st.floats(min_value=0.0, max_value=1e4, allow_nan=False, allow_infinity=False)


class TestAffectVector:
    """Tests for the (valence, arousal) value type"""

    def test_addition(self):
        assert AffectVector(5, 5) + AffectVector(0.3, -0.2) == AffectVector(5.3, 4.8)

    def test_scalar_broadcast(self):
        assert AffectVector(5, 6) + 2.0 == AffectVector(7, 8)
        assert AffectVector(5, 6) - 1.0 == AffectVector(4, 5)

    def test_squared_distance(self):
        assert AffectVector(6, 7).squared_distance(AffectVector(5, 5)) == pytest.approx(5.0)

    def test_nan_rejected(self):
        with pytest.raises(NonFiniteError):
            AffectVector(float('nan'), 5.0)

    def test_in_scale(self):
        assert AffectVector(1, 9).in_scale()
        assert not AffectVector(0.5, 5).in_scale()

    def test_array_round_trip(self):
        assert AffectVector.from_array(AffectVector(2.5, 7.5).to_array()) == AffectVector(2.5, 7.5)


class TestIaValue:
    """Tests for the physical-strength signal"""

    def test_rested_face_is_zero(self):
        assert ia_value(FatigueState()) == 0.0

    def test_saturates_at_four(self):
        assert ia_value(FatigueState(accumulators=(1e6,) * 4)) == pytest.approx(4.0)

    def test_one_time_constant(self):
        value = ia_value(FatigueState(accumulators=(50.0,) * 4, tau=50.0))
        assert value == pytest.approx(4.0 * (1.0 - math.exp(-1.0)))
        assert value == pytest.approx(2.5285, abs=1e-4)

    @given(st.tuples(accumulator, accumulator, accumulator, accumulator))
    @settings(max_examples=100)
    def test_always_in_range(self, values):
        assert 0.0 <= ia_value(FatigueState(accumulators=values)) <= 4.0


class TestIaUpdate:
    """Tests for the accumulator dynamics"""

    def test_otherwise_accumulates_cost_and_eta(self):
        state = ia_update(FatigueState(accumulators=(10.0,) * 4), ActionClass.OTHERWISE, 0.5)
        assert state.accumulators == pytest.approx((10.51,) * 4)

    def test_closing_eyelids_recovers(self):
        state = ia_update(FatigueState(accumulators=(30.0,) * 4), ActionClass.CLOSING_EYELIDS, 0.0)
        assert state.accumulators == pytest.approx((20.0,) * 4)

    def test_showing_sadness_cancels(self):
        state = ia_update(FatigueState(accumulators=(75.0,) * 4), ActionClass.SHOWING_SADNESS, 0.3)
        assert state.accumulators == (0.0,) * 4

    def test_input_state_unchanged(self):
        original = FatigueState(accumulators=(1.0, 2.0, 3.0, 4.0))
        ia_update(original, ActionClass.OTHERWISE, 1.0)
        assert original.accumulators == (1.0, 2.0, 3.0, 4.0)

    def test_negative_cost_rejected(self):
        with pytest.raises(ValueError):
            ia_update(FatigueState(), ActionClass.OTHERWISE, -0.1)

    def test_nan_cost_rejected(self):
        with pytest.raises(NonFiniteError):
            ia_update(FatigueState(), ActionClass.OTHERWISE, float('nan'))

    def test_negative_accumulator_rejected(self):
        with pytest.raises(ValueError):
            FatigueState(accumulators=(-1.0, 0.0, 0.0, 0.0))

    def test_from_settings(self):
        state = FatigueState.from_settings(AppraisalSettings(tau=20.0, d_sad=60.0))
        assert state.tau == 20.0
        assert state.d_sad == 60.0
        assert state.accumulators == (0.0,) * 4

    @given(st.tuples(accumulator, accumulator, accumulator, accumulator),
           st.sampled_from(list(ActionClass)),
           st.floats(min_value=0.0, max_value=10.0))
    @settings(max_examples=100)
    def test_accumulators_stay_nonnegative(self, values, action_class, cost):
        state = ia_update(FatigueState(accumulators=values), action_class, cost)
        assert all(a >= 0.0 for a in state.accumulators)

    @given(st.tuples(accumulator, accumulator, accumulator, accumulator),
           st.floats(min_value=0.0, max_value=10.0))
    @settings(max_examples=50)
    def test_otherwise_never_lowers_ia(self, values, cost):
        before = FatigueState(accumulators=values)
        after = ia_update(before, ActionClass.OTHERWISE, cost)
        assert ia_value(after) >= ia_value(before)


class TestClassifyAction:
    """Tests for the sleep / fed / otherwise rules"""

    def test_nearly_shut_eyes_sleep(self):
        controls = FaceControls(0.1, 0.5, 0.5, 0.5)
        assert classify_action(controls, ExpressionLabel.NEUTRAL) is ActionClass.CLOSING_EYELIDS

    def test_sleep_wins_over_sadness(self):
        controls = FaceControls(0.1, 0.8, 0.5, 0.2)
        assert classify_action(controls, ExpressionLabel.SADNESS) is ActionClass.CLOSING_EYELIDS

    def test_sadness_feeds(self):
        controls = FaceControls(0.9, 0.5, 0.5, 0.5)
        assert classify_action(controls, ExpressionLabel.SADNESS) is ActionClass.SHOWING_SADNESS

    def test_pleasure_is_otherwise(self):
        controls = FaceControls(0.9, 0.5, 0.5, 0.9)
        assert classify_action(controls, ExpressionLabel.PLEASURE) is ActionClass.OTHERWISE

    def test_threshold_is_strict_and_configurable(self):
        at_threshold = FaceControls(0.25, 0.5, 0.5, 0.5)
        assert classify_action(at_threshold, ExpressionLabel.NEUTRAL) is ActionClass.OTHERWISE
        assert classify_action(at_threshold, ExpressionLabel.NEUTRAL, eyelid_threshold=0.3) is ActionClass.CLOSING_EYELIDS


class TestCombine:
    """Tests for adding the bodily signal to the external appraisal"""

    def test_add_broadcasts(self):
        assert combine_appraisals(AffectVector(5, 5), 1.5) == AffectVector(6.5, 6.5)

    def test_subtract_mode(self):
        assert combine_appraisals(AffectVector(5, 5), 1.5, mode='subtract') == AffectVector(3.5, 3.5)

    def test_zero_ia_is_identity(self):
        assert combine_appraisals(AffectVector(2, 8), 0.0) == AffectVector(2, 8)


# Run tests if executed directly
if __name__ == "__main__":
    pytest.main([__file__, "-v"])
