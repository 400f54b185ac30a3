"""
RAM Training - Offline hybrid REINFORCE + regression

Each minibatch:
1. roll out one stochastic episode per image
2. reward R = 1 when both affect errors are inside the tolerance band
3. loss = regression MSE + REINFORCE surrogate + (b - R)^2

Also provides the held-out MAE evaluation, a plain CNN regression
baseline for comparison, and two readouts of the trained model: a
uniform-intensity sweep and the affect it reads from each of the
mother's expressions.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union
import time

import numpy as np
import pandas as pd
import torch
from torch import nn

from appraisal.affect import AffectVector
from appraisal.ram import (
    AFFECT_CENTRE,
    AFFECT_SPAN,
    RecurrentAttentionModel,
    episode_rewards,
    reinforce_surrogate,
)
from numeric.layers import LayerSpec, build_network, dense_stack
from numeric.optim import AdamOptimizer
from numeric.tensor import as_tensor
from utils.errors import EmptyBatchError
from utils.logging import get_logger, log_event
from world.faces import EXPRESSION_POSES, ExpressionLabel, render_face
from world.stimuli import Corpus, Stimulus

logger = get_logger(__name__)

LOSS_COLUMNS = ['epoch', 'regression_mse', 'mean_reward']


@dataclass
class RamTrainingResult:
    """Trained model, per-epoch loss curve and held-out error"""
    model: RecurrentAttentionModel
    loss_curve: List[Dict[str, float]] = field(default_factory=list)
    holdout_mae: Tuple[float, float] = (float('nan'), float('nan'))
    elapsed_seconds: float = 0.0

    def loss_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.loss_curve, columns=LOSS_COLUMNS)

    def write_loss_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.loss_frame().to_csv(path, index=False)
        return path

    def __str__(self) -> str:
        final = self.loss_curve[-1] if self.loss_curve else {}
        return (f"RAM training: {len(self.loss_curve)} epochs, "
                f"final mse={final.get('regression_mse', float('nan')):.4f}, "
                f"held-out MAE valence={self.holdout_mae[0]:.3f} arousal={self.holdout_mae[1]:.3f}")


def reinforce_update(model: RecurrentAttentionModel, optimizer: AdamOptimizer,
                     images: torch.Tensor, labels: torch.Tensor,
                     rng: np.random.Generator, tolerance: float = 0.5) -> Dict[str, float]:
    """
    One hybrid update on a minibatch

    Returns the regression MSE, mean reward and the surrogate value.
    """
    if images.shape[0] == 0:
        raise EmptyBatchError("reinforce_update got an empty batch")
    model.train()
    result = model.rollout(images, rng)
    rewards = episode_rewards(result.affect, labels, tolerance)

    regression = ((result.affect - labels) ** 2).mean()
    surrogate = reinforce_surrogate(result.log_probs, rewards, model.baseline)
    baseline_loss = ((model.baseline - rewards) ** 2).mean()
    optimizer.minimize(regression + surrogate + baseline_loss)
    return {
        'regression_mse': float(regression.detach()),
        'mean_reward': float(rewards.mean()),
        'surrogate': float(surrogate.detach()),
    }


def evaluate_mae(model: RecurrentAttentionModel, items: Sequence[Stimulus],
                 batch_size: int = 256) -> Tuple[float, float]:
    """Per-dimension mean absolute error with deterministic glimpses"""
    images, labels = Corpus.as_arrays(items)
    errors = []
    model.eval()
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            estimate = model.rollout(images[start:start + batch_size], rng=None, std=0.0).affect
            errors.append((estimate - as_tensor(labels[start:start + batch_size])).abs())
    mae = torch.cat(errors).mean(dim=0)
    return float(mae[0]), float(mae[1])


class RamTrainer:
    """
    Minibatch trainer for the recurrent attention model

    Shuffles the training split every epoch with the given stream.
    """

    def __init__(self, model: RecurrentAttentionModel, rng: np.random.Generator,
                 learning_rate: float = 1e-3, batch_size: int = 32,
                 reward_tolerance: float = 0.5, verbose: bool = False):
        self.model = model
        self.rng = rng
        self.batch_size = batch_size
        self.reward_tolerance = reward_tolerance
        self.verbose = verbose
        self.optimizer = AdamOptimizer(model, lr=learning_rate)

    def train(self, corpus: Corpus, epochs: int) -> RamTrainingResult:
        if len(corpus.train) == 0:
            raise EmptyBatchError("training corpus is empty")
        images, labels = Corpus.as_arrays(corpus.train)
        images, labels = as_tensor(images), as_tensor(labels)
        result = RamTrainingResult(model=self.model)
        start = time.time()

        if self.verbose:
            print(f"\n{'='*70}")
            print(f"🎯 RAM TRAINING: {len(corpus.train)} images, {epochs} epochs")
            print(f"{'='*70}")

        for epoch in range(epochs):
            order = torch.from_numpy(self.rng.permutation(len(images)))
            mse_sum, reward_sum, seen = 0.0, 0.0, 0
            for first in range(0, len(order), self.batch_size):
                index = order[first:first + self.batch_size]
                stats = reinforce_update(self.model, self.optimizer, images[index], labels[index],
                                         self.rng, self.reward_tolerance)
                mse_sum += stats['regression_mse'] * len(index)
                reward_sum += stats['mean_reward'] * len(index)
                seen += len(index)
            record = {'epoch': epoch, 'regression_mse': mse_sum / seen, 'mean_reward': reward_sum / seen}
            result.loss_curve.append(record)
            log_event(logger, "ram_epoch", **record)
            if self.verbose:
                print(f"   Epoch {epoch:3d}: mse={record['regression_mse']:.4f} "
                      f"reward={record['mean_reward']:.3f}")

        if corpus.holdout:
            result.holdout_mae = evaluate_mae(self.model, corpus.holdout)
        self.model.eval()
        result.elapsed_seconds = time.time() - start
        log_event(logger, "ram_trained", epochs=epochs, mae_valence=result.holdout_mae[0],
                  mae_arousal=result.holdout_mae[1], seconds=result.elapsed_seconds)
        if self.verbose:
            print(f"\n✅ {result}")
        return result


def train_ram(corpus: Corpus, settings, rng: np.random.Generator,
              generator: Optional[torch.Generator] = None, verbose: bool = False) -> RamTrainingResult:
    """Build a fresh model from RamSettings and train it on `corpus`"""
    if len(corpus) == 0 or len(corpus.train) == 0:
        raise EmptyBatchError("training corpus is empty")
    model = RecurrentAttentionModel.from_settings(settings, generator=generator)
    trainer = RamTrainer(model, rng, learning_rate=settings.learning_rate,
                         batch_size=settings.batch_size,
                         reward_tolerance=settings.reward_tolerance, verbose=verbose)
    return trainer.train(corpus, settings.epochs)


# Comparison harness

class CnnRegressor(nn.Module):
    """Two conv blocks and a dense head; same output scaling as the RAM"""

    def __init__(self, image_size: int = 32, channels: int = 8,
                 generator: Optional[torch.Generator] = None):
        super().__init__()
        half = image_size // 2
        quarter = half // 2
        self.features = build_network([
            LayerSpec.conv2d(1, channels, image_size, image_size, kernel_size=3),
            LayerSpec.activation('relu', (channels, image_size, image_size)),
        ], generator)
        self.features2 = build_network([
            LayerSpec.conv2d(channels, channels, half, half, kernel_size=3),
            LayerSpec.activation('relu', (channels, half, half)),
        ], generator)
        self.head = build_network(dense_stack([channels * quarter * quarter, 64, 2]), generator)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        x = images.unsqueeze(1)
        x = nn.functional.avg_pool2d(self.features(x), 2)
        x = nn.functional.avg_pool2d(self.features2(x), 2)
        return AFFECT_CENTRE + AFFECT_SPAN * self.head(x.flatten(1))


def train_cnn_baseline(corpus: Corpus, epochs: int, rng: np.random.Generator,
                       learning_rate: float = 1e-3, batch_size: int = 32,
                       generator: Optional[torch.Generator] = None) -> Tuple[CnnRegressor, Tuple[float, float]]:
    """Train the CNN regressor; returns (model, held-out MAE)"""
    images, labels = Corpus.as_arrays(corpus.train)
    images, labels = as_tensor(images), as_tensor(labels)
    model = CnnRegressor(image_size=images.shape[-1], generator=generator)
    optimizer = AdamOptimizer(model, lr=learning_rate)
    for _ in range(epochs):
        order = torch.from_numpy(rng.permutation(len(images)))
        for first in range(0, len(order), batch_size):
            index = order[first:first + batch_size]
            optimizer.minimize(((model(images[index]) - labels[index]) ** 2).mean())

    mae = (float('nan'), float('nan'))
    if corpus.holdout:
        test_images, test_labels = Corpus.as_arrays(corpus.holdout)
        with torch.no_grad():
            errors = (model(as_tensor(test_images)) - as_tensor(test_labels)).abs().mean(dim=0)
        mae = (float(errors[0]), float(errors[1]))
    log_event(logger, "cnn_baseline_trained", epochs=epochs, mae_valence=mae[0], mae_arousal=mae[1])
    return model, mae


def uniform_intensity_sweep(model: RecurrentAttentionModel, levels: Sequence[float],
                            image_size: Optional[int] = None) -> pd.DataFrame:
    """RAM affect on uniform images of each intensity"""
    size = image_size or model.config.image_size
    rows = []
    for level in levels:
        affect = model.appraise(np.full((size, size), float(level)))
        rows.append({'intensity': float(level), 'valence': affect.valence, 'arousal': affect.arousal})
    return pd.DataFrame(rows, columns=['intensity', 'valence', 'arousal'])


def expression_affect_table(model: RecurrentAttentionModel) -> pd.DataFrame:
    """RAM affect of each mother face, one row per (expression, variant)"""
    rows = []
    for label in ExpressionLabel:
        for variant, pose in enumerate(EXPRESSION_POSES[label]):
            affect = model.appraise(render_face(pose, size=model.config.image_size, variant=variant))
            rows.append({'expression': label.value, 'variant': variant,
                         'valence': affect.valence, 'arousal': affect.arousal})
    return pd.DataFrame(rows, columns=['expression', 'variant', 'valence', 'arousal'])
