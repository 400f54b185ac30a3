"""
Report Bundle - CSV tables and SVG figures from finished run directories

Inputs (read only): <run>/run_log.csv and <run>/activations.h5.

Outputs in the report directory:
    curves.svg                    reward, LSTM loss and prediction error per run
    <run>/pca_band_<i>.svg        middle-layer PCA scatter per epoch band,
                                  coloured by the mother's expression
    freq.csv                      run, band, first_epoch, last_epoch, pleasure, anger, sadness, neutral
    freq.svg                      the same ratios as grouped bars
    silhouette.csv                run, band, samples, silhouette
    mad.csv                       run, phase, samples, mad_valence, mad_arousal,
                                  t_valence, p_valence, t_arousal, p_arousal
                                  (t/p compare each run against the first; needs 2+ runs)
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import svgwrite

from analysis.pca import fit_pca
from analysis.statistics import (
    EXPRESSIONS, chunked_mad, cluster_separation, epoch_bands, expression_frequency, mad, welch_t_test,
)
from engine.run_log import ActivationDump, read_log_frame
from utils.errors import EmptyBatchError, ReportError
from utils.logging import get_logger, log_event

logger = get_logger(__name__)

REQUIRED_COLUMNS = ['phase', 'epoch', 'expression', 'interoception_valence', 'interoception_arousal',
                    'reward', 'lstm_loss', 'prediction_error']
FREQ_COLUMNS = ['run', 'band', 'first_epoch', 'last_epoch', *EXPRESSIONS]
SILHOUETTE_COLUMNS = ['run', 'band', 'samples', 'silhouette']
MAD_COLUMNS = ['run', 'phase', 'samples', 'mad_valence', 'mad_arousal',
               't_valence', 'p_valence', 't_arousal', 'p_arousal']

EXPRESSION_COLORS = {'pleasure': '#d62728', 'anger': '#ff7f0e', 'sadness': '#1f77b4', 'neutral': '#7f7f7f'}
RUN_COLORS = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#8c564b', '#e377c2']

WIDTH, HEIGHT, MARGIN = 480, 320, 40


@dataclass
class RunArtifacts:
    name: str
    frame: pd.DataFrame
    activations: ActivationDump


@dataclass
class ReportBundle:
    """Files written and notices about skipped sections"""
    out_dir: Path
    files: List[Path] = field(default_factory=list)
    notices: List[str] = field(default_factory=list)

    def notice(self, message: str) -> None:
        self.notices.append(message)
        log_event(logger, "report_notice", message=message)


def load_run(run_dir: Union[str, Path], name: Optional[str] = None) -> RunArtifacts:
    run_dir = Path(run_dir)
    name = name or run_dir.name
    log_path = run_dir / 'run_log.csv'
    if not log_path.exists():
        raise ReportError(f"{run_dir}: no run_log.csv")
    frame = read_log_frame(log_path)
    for column in REQUIRED_COLUMNS:
        if column not in frame.columns:
            raise ReportError(f"{log_path}: missing column '{column}'")
    activation_path = run_dir / 'activations.h5'
    if not activation_path.exists():
        raise ReportError(f"{run_dir}: no activations.h5")
    return RunArtifacts(name, frame, ActivationDump.load(activation_path))


# SVG primitives

class _Axes:
    """Maps data coordinates into one plotting box"""

    def __init__(self, dwg: svgwrite.Drawing, origin: Tuple[float, float], size: Tuple[float, float],
                 x_range: Tuple[float, float], y_range: Tuple[float, float], title: str = ''):
        self.dwg = dwg
        self.left, self.top = origin
        self.width, self.height = size
        self.x_range = _padded(x_range)
        self.y_range = _padded(y_range)
        dwg.add(dwg.rect(insert=origin, size=size, fill='none', stroke='#444444'))
        if title:
            dwg.add(dwg.text(title, insert=(self.left, self.top - 6), font_size=12, font_family='sans-serif'))
        for value, anchor in ((self.y_range[0], 'bottom'), (self.y_range[1], 'top')):
            y = self.top + self.height if anchor == 'bottom' else self.top + 10
            dwg.add(dwg.text(f"{value:.3g}", insert=(self.left - MARGIN + 2, y), font_size=9,
                             font_family='sans-serif'))

    def point(self, x: float, y: float) -> Tuple[float, float]:
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        px = self.left + (x - x0) / (x1 - x0) * self.width
        py = self.top + self.height - (y - y0) / (y1 - y0) * self.height
        return float(px), float(py)


def _padded(bounds: Tuple[float, float]) -> Tuple[float, float]:
    low, high = float(bounds[0]), float(bounds[1])
    if not np.isfinite(low) or not np.isfinite(high):
        return 0.0, 1.0
    if high - low < 1e-12:
        return low - 0.5, high + 0.5
    pad = 0.05 * (high - low)
    return low - pad, high + pad


def _range(values: np.ndarray) -> Tuple[float, float]:
    finite = values[np.isfinite(values)]
    return (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)


def scatter_svg(path: Union[str, Path], points: np.ndarray, labels: Sequence[str], title: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dwg = svgwrite.Drawing(str(path), size=(WIDTH, HEIGHT))
    points = np.asarray(points, dtype=np.float64).reshape(len(labels), -1)
    if points.shape[1] < 2:
        points = np.hstack([points, np.zeros((points.shape[0], 2 - points.shape[1]))])
    axes = _Axes(dwg, (MARGIN, MARGIN), (WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN),
                 _range(points[:, 0]), _range(points[:, 1]), title)
    for (x, y), label in zip(points[:, :2], labels):
        dwg.add(dwg.circle(center=axes.point(x, y), r=2, fill=EXPRESSION_COLORS.get(label, '#000000'),
                           fill_opacity=0.6))
    for i, label in enumerate(EXPRESSIONS):
        y = MARGIN + 12 * i
        dwg.add(dwg.circle(center=(WIDTH - MARGIN + 6, y), r=3, fill=EXPRESSION_COLORS[label]))
        dwg.add(dwg.text(label, insert=(WIDTH - MARGIN + 12, y + 3), font_size=8, font_family='sans-serif'))
    dwg.save()
    return path


def curves_svg(path: Union[str, Path], panels: List[Tuple[str, Dict[str, Tuple[np.ndarray, np.ndarray]]]]) -> Path:
    """One stacked panel per (title, {series name: (x, y)})"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    panel_height = HEIGHT - 2 * MARGIN
    dwg = svgwrite.Drawing(str(path), size=(WIDTH, len(panels) * (panel_height + MARGIN) + MARGIN))
    for row, (title, series) in enumerate(panels):
        xs = np.concatenate([x for x, _ in series.values()]) if series else np.zeros(0)
        ys = np.concatenate([y for _, y in series.values()]) if series else np.zeros(0)
        axes = _Axes(dwg, (MARGIN, MARGIN + row * (panel_height + MARGIN)),
                     (WIDTH - 2 * MARGIN, panel_height), _range(xs), _range(ys), title)
        for i, (name, (x, y)) in enumerate(series.items()):
            color = RUN_COLORS[i % len(RUN_COLORS)]
            keep = np.isfinite(y)
            points = [axes.point(a, b) for a, b in zip(x[keep], y[keep])]
            if len(points) > 1:
                dwg.add(dwg.polyline(points, stroke=color, fill='none', stroke_width=1))
            elif points:
                dwg.add(dwg.circle(center=points[0], r=2, fill=color))
            dwg.add(dwg.text(name, insert=(axes.left + 4, axes.top + 12 * (i + 1)), font_size=9,
                             fill=color, font_family='sans-serif'))
    dwg.save()
    return path


def frequency_svg(path: Union[str, Path], table: pd.DataFrame) -> Path:
    """Grouped bars: one group per (run, band), one bar per expression"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    groups = max(len(table), 1)
    width = max(WIDTH, groups * 48 + 2 * MARGIN)
    dwg = svgwrite.Drawing(str(path), size=(width, HEIGHT))
    axes = _Axes(dwg, (MARGIN, MARGIN), (width - 2 * MARGIN, HEIGHT - 2 * MARGIN), (0, groups), (0, 1),
                 'expression frequency ratio')
    bar = 0.8 / len(EXPRESSIONS)
    for g, (_, row) in enumerate(table.iterrows()):
        for i, label in enumerate(EXPRESSIONS):
            x0, y0 = axes.point(g + 0.1 + i * bar, row[label])
            x1, y1 = axes.point(g + 0.1 + (i + 1) * bar, 0.0)
            dwg.add(dwg.rect(insert=(x0, y0), size=(max(x1 - x0, 0.5), max(y1 - y0, 0.0)),
                             fill=EXPRESSION_COLORS[label]))
        x, y = axes.point(g + 0.5, 0.0)
        dwg.add(dwg.text(f"{row['run']}:{row['band']}", insert=(x - 12, y + 12), font_size=7,
                         font_family='sans-serif'))
    dwg.save()
    return path


def attention_svg(path: Union[str, Path], images: Sequence[np.ndarray], traces: Sequence[np.ndarray],
                  cell: int = 4) -> Path:
    """Grayscale images with their glimpse trajectories ([-1, 1] coordinates, x = column)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not images:
        raise ReportError("attention trace needs at least one image")
    size = images[0].shape[0]
    side = size * cell
    dwg = svgwrite.Drawing(str(path), size=(len(images) * (side + 8), side))
    for n, (image, trace) in enumerate(zip(images, traces)):
        left = n * (side + 8)
        for row in range(size):
            for col in range(size):
                level = int(round(255 * float(np.clip(image[row, col], 0.0, 1.0))))
                dwg.add(dwg.rect(insert=(left + col * cell, row * cell), size=(cell, cell),
                                 fill=svgwrite.rgb(level, level, level)))
        points = [(left + (x + 1.0) * 0.5 * side, (y + 1.0) * 0.5 * side) for x, y in np.asarray(trace)]
        dwg.add(dwg.polyline(points, stroke='#d62728', fill='none', stroke_width=1))
        for i, centre in enumerate(points):
            dwg.add(dwg.circle(center=centre, r=2 + i * 0.5, fill='none', stroke='#ff7f0e'))
    dwg.save()
    return path


# Sections

def _rolling(values: np.ndarray, window: int) -> np.ndarray:
    return pd.Series(values).rolling(window, min_periods=1).mean().to_numpy()


def _mad_rows(runs: List[RunArtifacts], bands: int, chunks: int, bundle: ReportBundle) -> pd.DataFrame:
    series = []
    for run in runs:
        frame = run.frame
        phase = 'eval' if (frame['phase'] == 'eval').any() else 'train'
        rows = frame[frame['phase'] == phase]
        if phase == 'train':
            rows = rows.iloc[epoch_bands(len(rows), bands)[-1]] if len(rows) else rows
        values = rows[['interoception_valence', 'interoception_arousal']].to_numpy()
        series.append((run.name, phase, values))

    records = []
    reference = None
    for name, phase, values in series:
        if len(values) < 2:
            bundle.notice(f"{name}: fewer than 2 {phase} epochs, MAD skipped")
            continue
        record = {'run': name, 'phase': phase, 'samples': len(values)}
        record['mad_valence'], record['mad_arousal'] = mad(values)
        record.update({c: float('nan') for c in MAD_COLUMNS[5:]})
        try:
            samples = chunked_mad(values, chunks)
        except EmptyBatchError as exc:
            bundle.notice(f"{name}: {exc}; no significance test")
            samples = None
        if reference is None:
            reference = samples
        elif samples is not None and reference is not None:
            record['t_valence'], record['p_valence'] = welch_t_test(reference[:, 0], samples[:, 0])
            record['t_arousal'], record['p_arousal'] = welch_t_test(reference[:, 1], samples[:, 1])
        records.append(record)
    return pd.DataFrame(records, columns=MAD_COLUMNS)


def emit_reports(run_dirs: Sequence[Union[str, Path]], out_dir: Union[str, Path], bands: int = 5,
                 mad_chunks: int = 10, verbose: bool = False) -> ReportBundle:
    """
    Build the report bundle for one or more run directories

    A single run gets curves, PCA, frequencies and silhouette; the MAD
    comparison needs at least two runs and is skipped with a notice.
    """
    if not run_dirs:
        raise ReportError("no run directories given")
    if bands < 1:
        raise ReportError(f"bands must be >= 1, got {bands}")

    names: Dict[str, int] = {}
    runs = []
    for run_dir in run_dirs:
        base = Path(run_dir).name or 'run'
        names[base] = names.get(base, 0) + 1
        runs.append(load_run(run_dir, base if names[base] == 1 else f"{base}_{names[base]}"))

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle = ReportBundle(out_dir)
    if verbose:
        print(f"\n{'='*70}")
        print(f"📊 REPORTS: {len(runs)} run(s) -> {out_dir}")
        print(f"{'='*70}")

    reward_series, loss_series, error_series = {}, {}, {}
    freq_rows, silhouette_rows = [], []
    for run in runs:
        frame = run.frame
        epochs = frame['epoch'].to_numpy(dtype=np.float64)
        window = max(1, len(frame) // 100)
        reward_series[run.name] = (epochs, _rolling(frame['reward'].to_numpy(dtype=np.float64), window))
        error_series[run.name] = (epochs, _rolling(frame['prediction_error'].to_numpy(dtype=np.float64), window))
        losses = frame['lstm_loss'].to_numpy(dtype=np.float64)
        trained = np.isfinite(losses)
        loss_series[run.name] = (epochs[trained], losses[trained])

        for band, index in enumerate(epoch_bands(len(frame), bands)):
            rows = frame.iloc[index]
            ratios = expression_frequency(rows)
            freq_rows.append({'run': run.name, 'band': band, 'first_epoch': int(rows['epoch'].iloc[0]),
                              'last_epoch': int(rows['epoch'].iloc[-1]), **ratios})

        dump = run.activations
        if len(dump) < 3:
            bundle.notice(f"{run.name}: {len(dump)} activation vectors, PCA skipped")
            continue
        matrix = dump.matrix()
        model = fit_pca(matrix)
        if model.rank_deficient:
            bundle.notice(f"{run.name}: middle layer has rank {model.rank}, PCA is degenerate")
        projected = model.project(matrix)
        labels = np.asarray(dump.labels)
        for band, index in enumerate(epoch_bands(len(dump), bands)):
            first, last = dump.epochs[index[0]], dump.epochs[index[-1]]
            bundle.files.append(scatter_svg(out_dir / run.name / f"pca_band_{band}.svg", projected[index],
                                            labels[index], f"{run.name} epochs {first}-{last}"))
            silhouette_rows.append({'run': run.name, 'band': band, 'samples': int(index.size),
                                    'silhouette': cluster_separation(projected[index], labels[index])})

    bundle.files.append(curves_svg(out_dir / 'curves.svg', [
        ('reward (rolling mean)', reward_series),
        ('LSTM training loss', loss_series),
        ('one-step prediction error (rolling mean)', error_series),
    ]))

    freq = pd.DataFrame(freq_rows, columns=FREQ_COLUMNS)
    freq.to_csv(out_dir / 'freq.csv', index=False)
    bundle.files.append(out_dir / 'freq.csv')
    bundle.files.append(frequency_svg(out_dir / 'freq.svg', freq))

    pd.DataFrame(silhouette_rows, columns=SILHOUETTE_COLUMNS).to_csv(out_dir / 'silhouette.csv', index=False)
    bundle.files.append(out_dir / 'silhouette.csv')

    if len(runs) < 2:
        bundle.notice("single run: MAD comparison skipped")
    else:
        _mad_rows(runs, bands, mad_chunks, bundle).to_csv(out_dir / 'mad.csv', index=False)
        bundle.files.append(out_dir / 'mad.csv')

    log_event(logger, "reports_written", runs=len(runs), files=len(bundle.files), notices=len(bundle.notices))
    if verbose:
        for notice in bundle.notices:
            print(f"   ⚠️  {notice}")
        print(f"\n✅ {len(bundle.files)} files written")
    return bundle
