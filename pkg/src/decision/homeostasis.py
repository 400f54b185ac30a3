"""
Homeostasis - Mood and reward

Mood is the midpoint between the scale centre and the recent mean
interoception:
    m = (a_bar + mean(window)) / 2
and is only recomputed on the T_L2 cadence. Reward penalises the
squared distance of interoception from mood:
    R = C - ||m - a||^2
"""

from collections import deque
from typing import Deque, Dict, Optional

import numpy as np

from appraisal.affect import AffectVector


def reward(interoception: AffectVector, mood: AffectVector, constant: float = 40.0) -> float:
    return constant - mood.squared_distance(interoception)


class MoodTracker:
    """Ring of recent interoception vectors plus the current mood"""

    def __init__(self, window: int = 1000, midpoint: Optional[AffectVector] = None):
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        self.window = window
        self.midpoint = midpoint or AffectVector.midpoint()
        self._buffer: Deque[np.ndarray] = deque(maxlen=window)
        self.current = self.midpoint

    @classmethod
    def from_settings(cls, settings) -> 'MoodTracker':
        return cls(window=settings.window, midpoint=AffectVector.from_array(settings.midpoint))

    def push(self, interoception: AffectVector) -> None:
        self._buffer.append(interoception.to_array())

    def __len__(self) -> int:
        return len(self._buffer)

    def mood(self) -> AffectVector:
        """Mood from the buffered values; the midpoint when empty"""
        if not self._buffer:
            return self.midpoint
        mean = np.mean(np.stack(self._buffer), axis=0)
        return AffectVector.from_array(0.5 * (self.midpoint.to_array() + mean))

    def update(self) -> AffectVector:
        self.current = self.mood()
        return self.current

    def state_dict(self) -> Dict[str, np.ndarray]:
        values = np.array(list(self._buffer), dtype=np.float64).reshape(-1, 2)
        return {'buffer': values, 'current': self.current.to_array()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        self._buffer.clear()
        for row in np.asarray(state['buffer']).reshape(-1, 2):
            self._buffer.append(np.array(row))
        self.current = AffectVector.from_array(state['current'])
