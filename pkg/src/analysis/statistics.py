"""
Run Statistics - Variability, significance and expression frequencies
"""

from typing import Dict, Iterable, Optional, Sequence, Tuple, Union
import math

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.metrics import silhouette_score

from appraisal.affect import AffectVector
from utils.errors import EmptyBatchError, ReportError
from world.faces import ExpressionLabel

EXPRESSIONS = [label.value for label in ExpressionLabel]


def _as_pairs(series: Union[Sequence[AffectVector], np.ndarray]) -> np.ndarray:
    if isinstance(series, np.ndarray):
        return np.asarray(series, dtype=np.float64).reshape(-1, 2)
    return np.array([a.to_array() for a in series], dtype=np.float64).reshape(-1, 2)


def mad(series: Union[Sequence[AffectVector], np.ndarray]) -> Tuple[float, float]:
    """Mean absolute successive difference per component: mean |a_t - a_{t+1}|"""
    values = _as_pairs(series)
    if values.shape[0] < 2:
        raise EmptyBatchError(f"MAD needs at least 2 samples, got {values.shape[0]}")
    diffs = np.abs(np.diff(values, axis=0)).mean(axis=0)
    return float(diffs[0]), float(diffs[1])


def chunked_mad(series: Union[Sequence[AffectVector], np.ndarray], chunks: int = 10) -> np.ndarray:
    """(chunks, 2) MAD of consecutive equal slices, the samples fed to the t-test"""
    values = _as_pairs(series)
    if chunks < 2 or values.shape[0] < 2 * chunks:
        raise EmptyBatchError(f"{values.shape[0]} samples cannot fill {chunks} chunks of 2")
    return np.array([mad(part) for part in np.array_split(values, chunks)])


def welch_t_test(sample_a: Iterable[float], sample_b: Iterable[float]) -> Tuple[float, float]:
    """
    Two-sided Welch t-test

    Both samples constant: equal means give (0, 1); different means
    give an infinite statistic with p = 0.
    """
    a = np.asarray(list(sample_a), dtype=np.float64)
    b = np.asarray(list(sample_b), dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise EmptyBatchError(f"Welch test needs 2+ samples per side, got {a.size} and {b.size}")

    if np.var(a, ddof=1) == 0.0 and np.var(b, ddof=1) == 0.0:
        difference = float(a.mean() - b.mean())
        if difference == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, difference), 0.0

    result = stats.ttest_ind(a, b, equal_var=False)
    return float(result.statistic), float(result.pvalue)


def expression_frequency(log: pd.DataFrame, window: Optional[Tuple[int, int]] = None) -> Dict[str, float]:
    """
    Share of each mother's expression over epochs in [first, last]

    Ratios cover every label (zero when absent) and sum to 1.
    """
    if 'expression' not in log.columns:
        raise ReportError("log is missing column 'expression'")
    rows = log
    if window is not None:
        first, last = window
        rows = log[(log['epoch'] >= first) & (log['epoch'] <= last)]
    if len(rows) == 0:
        raise EmptyBatchError(f"no epochs in window {window}")
    counts = rows['expression'].value_counts()
    total = float(counts.sum())
    return {label: float(counts.get(label, 0)) / total for label in EXPRESSIONS}


def cluster_separation(points: np.ndarray, labels: Sequence[str]) -> float:
    """Silhouette score of the labelled points; NaN when undefined"""
    labels = np.asarray(labels)
    distinct = np.unique(labels).size
    if distinct < 2 or distinct >= len(labels):
        return float('nan')
    return float(silhouette_score(np.asarray(points, dtype=np.float64), labels))


def epoch_bands(count: int, bands: int) -> list:
    """Split range(count) into `bands` contiguous, nearly equal index arrays"""
    if bands < 1:
        raise ValueError("bands must be >= 1")
    return [part for part in np.array_split(np.arange(count), bands) if part.size > 0]
