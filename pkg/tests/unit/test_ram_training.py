"""
Unit Tests for RAM Training

Tests for the hybrid update, trainer bookkeeping and the comparison harness
"""

import sys
from dataclasses import replace
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent.parent / 'src'))

import numpy as np
import pandas as pd
import pytest
import torch

from appraisal.affect import AffectVector
from appraisal.ram import RecurrentAttentionModel
from appraisal.ram_training import (
    LOSS_COLUMNS, RamTrainer, reinforce_update, evaluate_mae, train_ram,
    train_cnn_baseline, uniform_intensity_sweep, expression_affect_table
)
from engine.config import RamSettings
from numeric.optim import AdamOptimizer
from utils.errors import EmptyBatchError
from world.stimuli import Corpus, Stimulus, generate_corpus


def tiny_settings(**overrides) -> RamSettings:
    values = dict(image_size=16, patch_size=4, num_scales=2, num_glimpses=2, glimpse_hidden=16,
                  location_hidden=8, hidden_size=16, epochs=2, batch_size=8)
    values.update(overrides)
    return RamSettings(**values)


def constant_corpus(count: int, label: AffectVector) -> Corpus:
    rng = np.random.default_rng(0)
    items = [Stimulus(f"s{i}", rng.random((16, 16)), category=-1, label=label) for i in range(count)]
    return Corpus(train=items[:-2], holdout=items[-2:])


class TestReinforceUpdate:
    """Tests for a single hybrid minibatch step"""

    def test_returns_statistics_and_moves_weights(self):
        model = RecurrentAttentionModel.from_settings(tiny_settings(), torch.Generator().manual_seed(0))
        optimizer = AdamOptimizer(model, lr=1e-2)
        before = model.regressor[0].weight.detach().clone()
        images = torch.rand(6, 16, 16, generator=torch.Generator().manual_seed(1))
        labels = torch.full((6, 2), 5.0)
        stats = reinforce_update(model, optimizer, images, labels, np.random.default_rng(0))
        assert set(stats) == {'regression_mse', 'mean_reward', 'surrogate'}
        assert 0.0 <= stats['mean_reward'] <= 1.0
        assert not torch.equal(before, model.regressor[0].weight.detach())

    def test_empty_batch_rejected(self):
        model = RecurrentAttentionModel.from_settings(tiny_settings())
        optimizer = AdamOptimizer(model)
        with pytest.raises(EmptyBatchError):
            reinforce_update(model, optimizer, torch.zeros(0, 16, 16), torch.zeros(0, 2),
                             np.random.default_rng(0))


class TestTrainRam:
    """Tests for the training driver"""

    def test_loss_curve_and_holdout(self):
        corpus = generate_corpus(30, np.random.default_rng(0), image_size=16)
        result = train_ram(corpus, tiny_settings(), np.random.default_rng(1), torch.Generator().manual_seed(2))
        assert len(result.loss_curve) == 2
        assert list(result.loss_frame().columns) == LOSS_COLUMNS
        assert all(np.isfinite(result.holdout_mae))
        assert not result.model.training
        assert 'RAM training' in str(result)

    def test_same_seed_same_model(self):
        corpus = generate_corpus(20, np.random.default_rng(0), image_size=16)
        a = train_ram(corpus, tiny_settings(epochs=1), np.random.default_rng(1), torch.Generator().manual_seed(2))
        b = train_ram(corpus, tiny_settings(epochs=1), np.random.default_rng(1), torch.Generator().manual_seed(2))
        for pa, pb in zip(a.model.parameters(), b.model.parameters()):
            assert torch.equal(pa, pb)

    def test_constant_labels_reduce_error(self):
        corpus = constant_corpus(18, AffectVector(7.0, 3.0))
        model = RecurrentAttentionModel.from_settings(tiny_settings(), torch.Generator().manual_seed(0))
        before = evaluate_mae(model, corpus.holdout)
        trainer = RamTrainer(model, np.random.default_rng(0), learning_rate=1e-2, batch_size=8)
        result = trainer.train(corpus, epochs=40)
        assert sum(result.holdout_mae) < sum(before)
        assert result.loss_curve[-1]['regression_mse'] < result.loss_curve[0]['regression_mse']

    def test_shuffled_labels_do_not_beat_mean_predictor(self):
        corpus = generate_corpus(200, np.random.default_rng(0), holdout_fraction=0.25, image_size=16)
        items = corpus.train + corpus.holdout
        order = np.random.default_rng(3).permutation(len(items))
        shuffled = [replace(item, label=items[j].label) for item, j in zip(items, order)]
        scrambled = Corpus(train=shuffled[:len(corpus.train)], holdout=shuffled[len(corpus.train):])

        result = train_ram(scrambled, tiny_settings(epochs=10), np.random.default_rng(1),
                           torch.Generator().manual_seed(2))
        _, train_labels = Corpus.as_arrays(scrambled.train)
        _, holdout_labels = Corpus.as_arrays(scrambled.holdout)
        baseline = np.abs(holdout_labels - train_labels.mean(axis=0)).mean(axis=0)
        for mae, floor in zip(result.holdout_mae, baseline):
            assert mae >= 0.8 * floor

    def test_write_loss_csv(self, tmp_path):
        corpus = generate_corpus(12, np.random.default_rng(0), image_size=16)
        result = train_ram(corpus, tiny_settings(epochs=1), np.random.default_rng(1))
        path = result.write_loss_csv(tmp_path / 'ram_loss.csv')
        frame = pd.read_csv(path)
        assert list(frame.columns) == LOSS_COLUMNS
        assert len(frame) == 1

    def test_empty_corpus_rejected(self):
        with pytest.raises(EmptyBatchError):
            train_ram(Corpus(train=[], holdout=[]), tiny_settings(), np.random.default_rng(0))


class TestComparisons:
    """Tests for the comparison harness"""

    def test_cnn_baseline_reports_mae(self):
        corpus = generate_corpus(20, np.random.default_rng(0), image_size=16)
        model, mae = train_cnn_baseline(corpus, epochs=1, rng=np.random.default_rng(1),
                                        generator=torch.Generator().manual_seed(0))
        assert all(np.isfinite(mae))

    def test_uniform_intensity_sweep(self):
        model = RecurrentAttentionModel.from_settings(tiny_settings())
        frame = uniform_intensity_sweep(model, [0.0, 0.5, 1.0])
        assert list(frame.columns) == ['intensity', 'valence', 'arousal']
        assert frame['intensity'].tolist() == [0.0, 0.5, 1.0]

    def test_expression_affect_table(self):
        model = RecurrentAttentionModel.from_settings(tiny_settings())
        frame = expression_affect_table(model)
        assert len(frame) == 8
        assert set(frame['expression']) == {'pleasure', 'anger', 'sadness', 'neutral'}


# Run tests if executed directly
if __name__ == "__main__":
    pytest.main([__file__, "-v"])
