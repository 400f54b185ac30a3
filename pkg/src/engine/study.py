"""
Condition Study - The three interaction conditions over several seeds

Runs face-only, face+natural with the second layer and face+natural
without it, collects per-run statistics into a pandas table and checks
the desk-scale orderings:
    - LSTM loss:  face-only < face+natural (L2 on) < face+natural (L2 off)
    - reward:     the reverse ordering
    - MAD of interoception in the evaluation phase: L2 on < L2 off (Welch)
    - reward rises from the first to the last 10% of training
    - expression clusters in the actor's middle layer separate over time
"""

from pathlib import Path
from typing import Dict, List, Sequence, Tuple
import json
import time

import numpy as np
import pandas as pd

from analysis.pca import fit_pca
from analysis.statistics import chunked_mad, cluster_separation, epoch_bands, mad, welch_t_test
from appraisal.ram import RecurrentAttentionModel, load_ram, save_ram
from appraisal.ram_training import train_ram
from engine.config import RunConfig
from engine.orchestrator import EmotionRunner
from engine.rng import RngStreams, torch_generator
from utils.logging import get_logger, log_event
from world.stimuli import generate_corpus

logger = get_logger(__name__)

# (name, environment condition, second layer on)
CONDITIONS: List[Tuple[str, str, bool]] = [
    ('face_only', 'face_only', True),
    ('natural_l2', 'face_plus_natural', True),
    ('natural_no_l2', 'face_plus_natural', False),
]

SUMMARY_NAME = 'study_summary.json'


def ram_for_seed(config: RunConfig, seed: int, out: Path) -> RecurrentAttentionModel:
    """Train (or reuse) the first layer for one seed"""
    path = Path(out) / f"ram_seed_{seed}.h5"
    if path.exists():
        return load_ram(path)
    streams = RngStreams(seed)
    corpus = generate_corpus(config.corpus.size, streams['corpus'], config.corpus.noise_level,
                             config.corpus.holdout_fraction, config.corpus.face_fraction, config.ram.image_size)
    result = train_ram(corpus, config.ram, streams['ram'], torch_generator(streams['init']))
    log_event(logger, "study_ram_trained", seed=seed, mae_valence=result.holdout_mae[0],
              mae_arousal=result.holdout_mae[1])
    save_ram(path, result.model, metadata={'seed': seed, 'holdout_mae': list(result.holdout_mae)})
    return result.model


def run_condition(config: RunConfig, name: str, condition: str, second_layer: bool, seed: int,
                  ram: RecurrentAttentionModel, out: Path) -> Dict[str, object]:
    """One run; returns the summary statistics for this (condition, seed)"""
    config = config.with_overrides({
        'environment.condition': condition,
        'run.with_second_layer': second_layer,
        'run.seed': seed,
    })
    start = time.time()
    runner = EmotionRunner(config, Path(out) / f"{name}_seed_{seed}", ram_model=ram)
    runner.run()
    frame = runner.log.to_frame()
    train = frame[frame['phase'] == 'train']
    evaluation = frame[frame['phase'] == 'eval']

    tail = train.iloc[int(0.75 * len(train)):]
    tenth = max(1, len(train) // 10)
    first, last = train['reward'].iloc[:tenth], train['reward'].iloc[-tenth:]
    standard_error = np.sqrt(first.var(ddof=1) / len(first) + last.var(ddof=1) / len(last))

    dump = runner.activations
    train_rows = [i for i, phase in enumerate(dump.phases) if phase == 'train']
    silhouettes = [float('nan'), float('nan')]
    if len(train_rows) >= 3:
        matrix = dump.matrix()[train_rows]
        labels = np.asarray(dump.labels)[train_rows]
        projected = fit_pca(matrix).project(matrix)
        bands = epoch_bands(len(train_rows), 5)
        silhouettes = [cluster_separation(projected[bands[0]], labels[bands[0]]),
                       cluster_separation(projected[bands[-1]], labels[bands[-1]])]

    interoception = evaluation[['interoception_valence', 'interoception_arousal']].to_numpy()
    summary = {
        'condition': name,
        'seed': seed,
        'lstm_loss': float(tail['lstm_loss'].dropna().mean()),
        'reward': float(tail['reward'].mean()),
        'reward_gain': float(last.mean() - first.mean()),
        'reward_gain_se': float(standard_error),
        'mad': mad(interoception) if len(interoception) >= 2 else (float('nan'), float('nan')),
        'mad_chunks': chunked_mad(interoception).tolist() if len(interoception) >= 20 else [],
        'silhouette_first': silhouettes[0],
        'silhouette_last': silhouettes[1],
        'seconds': time.time() - start,
    }
    log_event(logger, "study_run_finished", condition=name, seed=seed, lstm_loss=summary['lstm_loss'],
              reward=summary['reward'], seconds=summary['seconds'])
    return summary


def run_study(config: RunConfig, seeds: Sequence[int], out: Path) -> pd.DataFrame:
    """Every condition for every seed; one table row per run"""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for seed in seeds:
        ram = ram_for_seed(config, seed, out)
        for name, condition, second_layer in CONDITIONS:
            results.append(run_condition(config, name, condition, second_layer, seed, ram, out))
    return pd.DataFrame(results)


def condition_means(table: pd.DataFrame) -> pd.DataFrame:
    """Seed-averaged final-quarter LSTM loss and reward per condition"""
    return table.groupby('condition')[['lstm_loss', 'reward']].mean()


def mad_comparison(table: pd.DataFrame) -> List[Tuple[float, float, float, float]]:
    """
    Per component: (mean MAD with L2, mean MAD without, t, p)

    Chunked evaluation-phase MADs are pooled over seeds before the
    Welch test. Empty when no run has an evaluation phase.
    """
    pooled = {name: np.array(sum((list(r) for r in table[table['condition'] == name]['mad_chunks']), []))
              for name in ('natural_l2', 'natural_no_l2')}
    if not all(len(v) for v in pooled.values()):
        return []
    rows = []
    for k in (0, 1):
        on, off = pooled['natural_l2'][:, k], pooled['natural_no_l2'][:, k]
        t, p = welch_t_test(on, off)
        rows.append((float(on.mean()), float(off.mean()), t, p))
    return rows


def silhouette_increases(table: pd.DataFrame, condition: str = 'natural_l2') -> Tuple[int, int]:
    """(seeds whose last-band silhouette beats the first band, seeds)"""
    runs = table[table['condition'] == condition]
    return int((runs['silhouette_last'] > runs['silhouette_first']).sum()), len(runs)


def study_checks(table: pd.DataFrame) -> Dict[str, bool]:
    """Pass/fail for each ordering the study is meant to reproduce"""
    means = condition_means(table)
    loss, rewards = means['lstm_loss'], means['reward']
    checks = {
        'loss_ordering': bool(loss['face_only'] < loss['natural_l2'] < loss['natural_no_l2']),
        'reward_ordering': bool(rewards['face_only'] > rewards['natural_l2'] > rewards['natural_no_l2']),
        'reward_learning': bool((table['reward_gain'] > 2 * table['reward_gain_se']).all()),
    }
    comparison = mad_comparison(table)
    if comparison:
        checks['mad_reduction'] = all(on < off and p < 0.05 for on, off, _, p in comparison)
    increases, seeds = silhouette_increases(table)
    checks['cluster_separation'] = seeds > 0 and increases * 3 >= 2 * seeds
    return checks


def write_summary(table: pd.DataFrame, checks: Dict[str, bool], out: Path) -> Path:
    path = Path(out) / SUMMARY_NAME
    summary = {'results': table.drop(columns=['mad_chunks']).to_dict(orient='records'), 'checks': checks}
    path.write_text(json.dumps(summary, indent=2, default=float))
    return path
