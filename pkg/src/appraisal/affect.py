"""
Affect Vector - (valence, arousal) on the 1-9 rating scale

The currency flowing between all layers: RAM output, compensation,
interoception, mood and predictions are all AffectVectors.
"""

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from utils.errors import NonFiniteError

SCALE_MIN = 1.0
SCALE_MAX = 9.0
SCALE_MID = 5.0


@dataclass(frozen=True)
class AffectVector:
    valence: float
    arousal: float

    def __post_init__(self):
        object.__setattr__(self, 'valence', float(self.valence))
        object.__setattr__(self, 'arousal', float(self.arousal))
        if not (np.isfinite(self.valence) and np.isfinite(self.arousal)):
            raise NonFiniteError("AffectVector", f"({self.valence}, {self.arousal})")

    @classmethod
    def from_array(cls, values: Sequence[float]) -> 'AffectVector':
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        return cls(values[0], values[1])

    @classmethod
    def midpoint(cls) -> 'AffectVector':
        return cls(SCALE_MID, SCALE_MID)

    def to_array(self) -> np.ndarray:
        return np.array([self.valence, self.arousal], dtype=np.float64)

    def __add__(self, other: Union['AffectVector', float]) -> 'AffectVector':
        if isinstance(other, AffectVector):
            return AffectVector(self.valence + other.valence, self.arousal + other.arousal)
        return AffectVector(self.valence + other, self.arousal + other)

    def __sub__(self, other: Union['AffectVector', float]) -> 'AffectVector':
        if isinstance(other, AffectVector):
            return AffectVector(self.valence - other.valence, self.arousal - other.arousal)
        return AffectVector(self.valence - other, self.arousal - other)

    def squared_distance(self, other: 'AffectVector') -> float:
        dv = self.valence - other.valence
        da = self.arousal - other.arousal
        return dv * dv + da * da

    def in_scale(self) -> bool:
        return SCALE_MIN <= self.valence <= SCALE_MAX and SCALE_MIN <= self.arousal <= SCALE_MAX

    def __iter__(self):
        return iter((self.valence, self.arousal))

    def __str__(self) -> str:
        return f"(V={self.valence:.3f}, A={self.arousal:.3f})"
