"""
Internal Appraisal - Physical-strength model from facial fatigue

Four accumulators A_n (one per facial part) turn into a scalar bodily
signal
    IA = sum_n (1 - exp(-A_n / tau))        in [0, 4)
Every step the whole face takes the same branch:
    closing eyelids (sleep)     A_n <- |A_n - d_eyelid|
    showing sadness (fed)       A_n <- |A_n - d_sad|
    otherwise                   A_n <- A_n + action_cost + eta
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from utils.errors import NonFiniteError
from world.faces import ExpressionLabel, FaceControls

NUM_PARTS = 4


class ActionClass(str, Enum):
    CLOSING_EYELIDS = 'closing_eyelids'
    SHOWING_SADNESS = 'showing_sadness'
    OTHERWISE = 'otherwise'


@dataclass(frozen=True)
class FatigueState:
    """Accumulators plus the constants that drive them"""
    accumulators: Tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    tau: float = 50.0
    eta: float = 0.01
    d_eyelid: float = 50.0
    d_sad: float = 75.0

    def __post_init__(self):
        values = tuple(float(a) for a in self.accumulators)
        if len(values) != NUM_PARTS:
            raise ValueError(f"expected {NUM_PARTS} accumulators, got {len(values)}")
        if any(a < 0 for a in values):
            raise ValueError(f"accumulators must be nonnegative, got {values}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        object.__setattr__(self, 'accumulators', values)

    @classmethod
    def from_settings(cls, settings, accumulators: Optional[Tuple[float, ...]] = None) -> 'FatigueState':
        return cls(
            accumulators=accumulators or (0.0,) * NUM_PARTS,
            tau=settings.tau,
            eta=settings.eta,
            d_eyelid=settings.d_eyelid,
            d_sad=settings.d_sad,
        )

    def to_array(self) -> np.ndarray:
        return np.array(self.accumulators, dtype=np.float64)


def ia_value(state: FatigueState) -> float:
    return float(np.sum(1.0 - np.exp(-state.to_array() / state.tau)))


def ia_update(state: FatigueState, action_class: ActionClass, action_cost: float) -> FatigueState:
    if not np.isfinite(action_cost):
        raise NonFiniteError("action_cost", str(action_cost))
    if action_cost < 0:
        raise ValueError(f"action_cost must be >= 0, got {action_cost}")
    values = state.to_array()
    if action_class is ActionClass.CLOSING_EYELIDS:
        values = np.abs(values - state.d_eyelid)
    elif action_class is ActionClass.SHOWING_SADNESS:
        values = np.abs(values - state.d_sad)
    else:
        values = values + action_cost + state.eta
    return replace(state, accumulators=tuple(values))


def classify_action(controls: FaceControls, mother_label: ExpressionLabel,
                    eyelid_threshold: float = 0.25) -> ActionClass:
    """Sleep when the eyes are nearly shut; fed when the mother reads sadness"""
    if controls.eyelid_open < eyelid_threshold:
        return ActionClass.CLOSING_EYELIDS
    if mother_label is ExpressionLabel.SADNESS:
        return ActionClass.SHOWING_SADNESS
    return ActionClass.OTHERWISE


def combine_appraisals(external, ia: float, mode: str = 'add'):
    """a(t) = a'(t) + IA broadcast to both components ('subtract' flips the sign)"""
    return external + ia if mode == 'add' else external - ia
