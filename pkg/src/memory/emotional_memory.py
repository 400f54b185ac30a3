"""
Emotional Memory - Second-layer compensation of the innate appraisal

The RAM's output for a stimulus category k is shifted by a learned
compensation L(k):
    a'(t) = RAM(I_t) + L(k)
The episode store keeps the recent (t, k, a(t)) records. Every T_L2
steps each category's compensation moves by the average change of
interoception that followed its occurrences:
    L(k) <- L(k) + gamma * mean_{i in phi_k} (a(i+1) - a(i))
where phi_k holds the records of category k that have a successor.
The store is a sliding window: it is not cleared after an update.
"""

from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from appraisal.affect import AffectVector
from utils.errors import OrderingError
from utils.logging import get_logger, log_event

logger = get_logger(__name__)

TABLE_COLUMNS = ['category', 'L_valence', 'L_arousal']


@dataclass(frozen=True)
class EpisodeRecord:
    t: int
    category: int
    interoception: AffectVector


class EpisodeStore:
    """
    Time-ordered window of (t, k, a(t)) records

    Strictly increasing t; the oldest record is evicted at capacity.
    """

    def __init__(self, capacity: int = 1000):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._records: Deque[EpisodeRecord] = deque(maxlen=capacity)

    def record(self, t: int, category: int, interoception: AffectVector) -> None:
        if self._records and t <= self._records[-1].t:
            raise OrderingError(f"record t={t} is not after last stored t={self._records[-1].t}")
        self._records.append(EpisodeRecord(int(t), int(category), interoception))

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    def window(self, size: Optional[int] = None) -> List[EpisodeRecord]:
        """Most recent `size` records, oldest first"""
        records = list(self._records)
        return records if size is None else records[-size:] if size > 0 else []

    def phi_sets(self) -> Dict[int, List[int]]:
        """Category -> positions in the store that have a successor record"""
        sets: Dict[int, List[int]] = {}
        records = list(self._records)
        for position, rec in enumerate(records[:-1]):
            sets.setdefault(rec.category, []).append(position)
        return sets

    def state_dict(self) -> Dict[str, np.ndarray]:
        records = list(self._records)
        return {
            't': np.array([r.t for r in records], dtype=np.int64),
            'category': np.array([r.category for r in records], dtype=np.int64),
            'interoception': np.array([r.interoception.to_array() for r in records],
                                      dtype=np.float64).reshape(-1, 2),
        }

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        self._records.clear()
        for t, k, a in zip(np.asarray(state['t']).reshape(-1),
                           np.asarray(state['category']).reshape(-1),
                           np.asarray(state['interoception']).reshape(-1, 2)):
            self._records.append(EpisodeRecord(int(t), int(k), AffectVector.from_array(a)))


class CompensationTable:
    """
    Category -> compensation 2-vector

    Unseen categories read as zero. A frozen table (second layer off)
    ignores updates, so the pipeline reduces exactly to RAM + IA.
    """

    def __init__(self, gamma: float = 0.1, frozen: bool = False):
        self.gamma = gamma
        self.frozen = frozen
        self._entries: Dict[int, np.ndarray] = {}

    def lookup(self, category: int) -> AffectVector:
        entry = self._entries.get(int(category))
        return AffectVector(0.0, 0.0) if entry is None else AffectVector.from_array(entry)

    def compensate(self, ram_output: AffectVector, category: int) -> AffectVector:
        entry = self._entries.get(int(category))
        if entry is None:
            return ram_output
        return ram_output + AffectVector.from_array(entry)

    def set(self, category: int, value: AffectVector) -> None:
        self._entries[int(category)] = value.to_array()

    def update_table(self, store: EpisodeStore) -> Dict[int, AffectVector]:
        """
        Apply one smoothing update from the store

        Returns the per-category increments applied (empty when frozen).
        """
        if len(store) == 0:
            raise ValueError("update_table needs a non-empty store")
        if self.frozen:
            return {}
        records = store.window()
        values = np.array([r.interoception.to_array() for r in records])
        deltas = np.diff(values, axis=0)
        increments = {}
        for category, positions in store.phi_sets().items():
            step = self.gamma * deltas[positions].mean(axis=0)
            current = self._entries.get(category, np.zeros(2))
            self._entries[category] = current + step
            increments[category] = AffectVector.from_array(step)
        log_event(logger, "table_updated", categories=len(increments), window=len(records))
        return increments

    def categories(self) -> List[int]:
        return sorted(self._entries)

    def to_frame(self) -> pd.DataFrame:
        rows = [{'category': k, 'L_valence': v[0], 'L_arousal': v[1]}
                for k, v in sorted(self._entries.items())]
        return pd.DataFrame(rows, columns=TABLE_COLUMNS)

    def state_dict(self) -> Dict[str, np.ndarray]:
        keys = sorted(self._entries)
        return {
            'category': np.array(keys, dtype=np.int64),
            'value': np.array([self._entries[k] for k in keys], dtype=np.float64).reshape(-1, 2),
        }

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        self._entries = {
            int(k): np.array(v, dtype=np.float64)
            for k, v in zip(np.asarray(state['category']).reshape(-1),
                            np.asarray(state['value']).reshape(-1, 2))
        }
