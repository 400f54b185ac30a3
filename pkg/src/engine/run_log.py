"""
Run Log - Per-epoch records and the actor activation dump

run_log.csv header (one row per epoch, append-only):

    phase              train | eval
    epoch              1-based step counter
    stimulus_id        id of the image the infant saw
    category           stimulus category k
    natural            1 if a natural image was shown
    eyes_closed        1 if the black image was shown
    expression         the mother's reading of the infant's face
    action_class       closing_eyelids | showing_sadness | otherwise
    action_eyelid_open, action_eyebrow_knit, action_mouth_open, action_mouth_corner
    action_cost        0.5 * sum |delta controls|
    ram_valence, ram_arousal                  first-layer output
    external_valence, external_arousal        a'(t) = RAM + L(k)
    ia                 internal appraisal IA(t)
    interoception_valence, interoception_arousal   a(t)
    mood_valence, mood_arousal
    reward             C - ||m - a||^2 (unscaled)
    critic_loss        NaN before the replay warm-up
    lstm_loss          NaN except at predictor-training epochs
    prediction_error   image MSE + scaled interoception MSE of the previous forecast

Floats are written with 17 significant digits so a log read back
compares bit-exactly with the one in memory.
"""

from dataclasses import dataclass, field
from io import StringIO
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union
import json

import numpy as np
import pandas as pd

from numeric.checkpoint import Container, load_container, save_container
from utils.errors import CheckpointError, ReportError

CODE_VERSION = '1.0.0'
ACTIVATION_KIND = 'activations'

ACTION_COLUMNS = ['action_eyelid_open', 'action_eyebrow_knit', 'action_mouth_open', 'action_mouth_corner']
LOG_COLUMNS = [
    'phase', 'epoch', 'stimulus_id', 'category', 'natural', 'eyes_closed', 'expression',
    'action_class', *ACTION_COLUMNS, 'action_cost',
    'ram_valence', 'ram_arousal', 'external_valence', 'external_arousal', 'ia',
    'interoception_valence', 'interoception_arousal', 'mood_valence', 'mood_arousal',
    'reward', 'critic_loss', 'lstm_loss', 'prediction_error',
]
STRING_COLUMNS = ('phase', 'stimulus_id', 'expression', 'action_class')
FLOAT_FORMAT = '%.17g'


class RunLog:
    """Append-only list of per-epoch records"""

    def __init__(self, records: Optional[Iterable[Dict[str, Any]]] = None):
        self._records: List[Dict[str, Any]] = []
        for record in records or []:
            self.append(record)

    def append(self, record: Dict[str, Any]) -> None:
        missing = [c for c in LOG_COLUMNS if c not in record]
        if missing:
            raise ReportError(f"log record missing columns: {', '.join(missing)}")
        if self._records and record['epoch'] <= self._records[-1]['epoch']:
            raise ReportError(f"epoch {record['epoch']} does not follow {self._records[-1]['epoch']}")
        self._records.append({c: record[c] for c in LOG_COLUMNS})

    def __len__(self) -> int:
        return len(self._records)

    def __getitem__(self, index: int) -> Dict[str, Any]:
        return dict(self._records[index])

    def tail(self, count: int) -> List[Dict[str, Any]]:
        """Last `count` records, oldest first"""
        return [dict(r) for r in self._records[-count:]] if count > 0 else []

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self._records, columns=LOG_COLUMNS)

    def to_csv_text(self) -> str:
        buffer = StringIO()
        self.to_frame().to_csv(buffer, index=False, float_format=FLOAT_FORMAT)
        return buffer.getvalue()

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv_text())
        return path

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> 'RunLog':
        missing = [c for c in LOG_COLUMNS if c not in frame.columns]
        if missing:
            raise ReportError(f"run log missing columns: {', '.join(missing)}")
        log = cls()
        for row in frame[LOG_COLUMNS].to_dict(orient='records'):
            row['epoch'] = int(row['epoch'])
            row['category'] = int(row['category'])
            log._records.append(row)
        return log

    @classmethod
    def from_csv_text(cls, text: str) -> 'RunLog':
        if not text.strip():
            return cls()
        return cls.from_frame(read_log_frame(StringIO(text)))

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> 'RunLog':
        return cls.from_frame(read_log_frame(path))


def read_log_frame(source) -> pd.DataFrame:
    """CSV -> DataFrame with exact float round trip and string columns kept as str"""
    return pd.read_csv(source, float_precision='round_trip',
                       dtype={c: str for c in STRING_COLUMNS}, keep_default_na=False,
                       na_values={c: ['', 'NaN', 'nan'] for c in LOG_COLUMNS if c not in STRING_COLUMNS})


@dataclass
class ActivationDump:
    """Per-epoch actor middle-layer vectors tagged with the mother's label"""
    vectors: List[np.ndarray] = field(default_factory=list)
    labels: List[str] = field(default_factory=list)
    epochs: List[int] = field(default_factory=list)
    phases: List[str] = field(default_factory=list)

    def append(self, epoch: int, vector: np.ndarray, label: str, phase: str = 'train') -> None:
        vector = np.asarray(vector, dtype=np.float64).reshape(-1)
        if self.vectors and vector.size != self.vectors[0].size:
            raise ReportError(f"activation size {vector.size} differs from {self.vectors[0].size}")
        self.vectors.append(vector)
        self.labels.append(label)
        self.epochs.append(int(epoch))
        self.phases.append(phase)

    def __len__(self) -> int:
        return len(self.vectors)

    def matrix(self) -> np.ndarray:
        if not self.vectors:
            return np.zeros((0, 0))
        return np.stack(self.vectors)

    def to_blocks(self) -> Dict[str, Any]:
        return {
            'vectors': self.matrix(),
            'epochs': np.array(self.epochs, dtype=np.int64),
            'labels': json.dumps(self.labels),
            'phases': json.dumps(self.phases),
        }

    @classmethod
    def from_blocks(cls, blocks: Dict[str, Any]) -> 'ActivationDump':
        vectors = np.asarray(blocks['vectors'])
        return cls(
            vectors=[row.copy() for row in vectors] if vectors.size else [],
            labels=list(json.loads(blocks['labels'])),
            epochs=[int(e) for e in np.asarray(blocks['epochs']).reshape(-1)],
            phases=list(json.loads(blocks['phases'])),
        )

    def save(self, path: Union[str, Path]) -> Path:
        return save_container(path, Container(ACTIVATION_KIND, self.to_blocks()))

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'ActivationDump':
        try:
            return cls.from_blocks(load_container(path, expected_kind=ACTIVATION_KIND).blocks)
        except CheckpointError as exc:
            raise ReportError(str(exc)) from exc
