"""
Unit Tests for the Glimpse Sensor and Recurrent Attention Model

Tests for patch extraction, episode mechanics, REINFORCE terms and RAM files
"""

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent.parent / 'src'))

import math

import numpy as np
import pytest
import torch
from scipy import stats

from appraisal.affect import AffectVector
from appraisal.glimpse import GlimpseConfig, extract_glimpse, denormalize
from appraisal.ram import (
    RecurrentAttentionModel, gaussian_log_prob, reinforce_surrogate, episode_rewards,
    save_ram, load_ram
)
from numeric.layers import zero_parameters_
from utils.errors import CheckpointError, ShapeMismatchError, StateError


def small_model(seed: int = 0, num_glimpses: int = 3, std: float = 0.15) -> RecurrentAttentionModel:
    config = GlimpseConfig(num_scales=2, patch_size=4, scale_factor=2, num_glimpses=num_glimpses, image_size=16)
    return RecurrentAttentionModel(config, glimpse_hidden=16, location_hidden=8, hidden_size=12,
                                   location_std=std, generator=torch.Generator().manual_seed(seed))


class TestGlimpseConfig:
    """Tests for retina geometry"""

    def test_dimensions(self):
        config = GlimpseConfig()
        assert config.largest_patch == 32
        assert config.glimpse_dim == 3 * 8 * 8

    def test_odd_patch_rejected(self):
        with pytest.raises(ValueError):
            GlimpseConfig(patch_size=5)

    def test_patch_larger_than_image_rejected(self):
        with pytest.raises(ValueError):
            GlimpseConfig(patch_size=8, image_size=4)

    def test_denormalize(self):
        assert denormalize(torch.tensor([-1.0, 0.0, 1.0]), 32).tolist() == [0.0, 16.0, 32.0]


class TestExtractGlimpse:
    """Tests for multi-resolution patch extraction"""

    def test_centre_crop(self):
        image = np.arange(32 * 32, dtype=np.float64).reshape(32, 32)
        config = GlimpseConfig(num_scales=1, patch_size=8, image_size=32)
        patch = extract_glimpse(image, [0.0, 0.0], config)
        assert patch.shape == (1, 8, 8)
        assert np.array_equal(patch[0].numpy(), image[12:20, 12:20])

    def test_corner_is_zero_filled(self):
        image = np.ones((32, 32))
        config = GlimpseConfig(num_scales=1, patch_size=8, image_size=32)
        patch = extract_glimpse(image, [-1.0, -1.0], config)[0].numpy()
        assert np.all(patch[:4, :] == 0.0)
        assert np.all(patch[:, :4] == 0.0)
        assert np.all(patch[4:, 4:] == 1.0)

    def test_uniform_image_inside_bounds(self):
        config = GlimpseConfig(num_scales=3, patch_size=8, image_size=32)
        stack = extract_glimpse(np.full((32, 32), 0.3), [0.0, 0.0], config)
        assert stack.shape == (3, 8, 8)
        # the two smaller scales lie fully inside the image
        assert torch.allclose(stack[:2], torch.full((2, 8, 8), 0.3))

    def test_x_is_column(self):
        image = np.zeros((32, 32))
        image[:, 28:] = 1.0
        config = GlimpseConfig(num_scales=1, patch_size=8, image_size=32)
        right = extract_glimpse(image, [1.0, 0.0], config)
        down = extract_glimpse(image, [0.0, 1.0], config)
        assert float(right.sum()) > 0.0
        assert float(down.sum()) == 0.0

    def test_batched(self):
        config = GlimpseConfig(num_scales=2, patch_size=4, image_size=16)
        stack = extract_glimpse(np.zeros((5, 16, 16)), np.zeros((5, 2)), config)
        assert stack.shape == (5, 2, 4, 4)

    def test_location_shape_mismatch(self):
        config = GlimpseConfig(num_scales=1, patch_size=4, image_size=16)
        with pytest.raises(ShapeMismatchError):
            extract_glimpse(np.zeros((3, 16, 16)), np.zeros((2, 2)), config)


class TestRamStep:
    """Tests for single glimpses"""

    def test_zero_std_samples_the_mean(self):
        model = small_model()
        image = np.random.default_rng(0).random((16, 16))
        state, location, log_prob = model.ram_step(model.initial_state(), image, np.random.default_rng(1), std=0.0)
        with torch.no_grad():
            mean = model.location_mean(state.hidden)
        assert torch.allclose(location, mean.clamp(-1, 1))
        assert float(log_prob) == 0.0
        assert state.step == 1

    def test_mean_location_keeps_gaussian_normalizer(self):
        model = small_model(std=0.2)
        image = np.random.default_rng(0).random((16, 16))
        state, location, log_prob = model.ram_step(model.initial_state(), image)
        with torch.no_grad():
            mean = model.location_mean(state.hidden)
        assert torch.allclose(location, mean.clamp(-1, 1))
        assert float(log_prob) == pytest.approx(-2 * math.log(0.2) - math.log(2 * math.pi))

    def test_policy_gradient_stops_at_locator(self):
        model = small_model()
        image = np.random.default_rng(0).random((16, 16))
        result = model.rollout(image, np.random.default_rng(5))
        result.log_probs.sum().backward()
        for network in (model.input_to_hidden, model.hidden_to_hidden, model.what, model.where):
            for parameter in network.parameters():
                assert parameter.grad is None or torch.all(parameter.grad == 0.0)
        assert any(p.grad is not None and float(p.grad.abs().sum()) > 0.0 for p in model.locator.parameters())

    def test_same_seed_same_trajectory(self):
        model = small_model()
        image = np.random.default_rng(0).random((16, 16))
        _, first = model.ram_episode(image, np.random.default_rng(7))
        _, second = model.ram_episode(image, np.random.default_rng(7))
        assert first == second

    def test_locations_clamped(self):
        model = small_model(std=5.0)
        image = np.random.default_rng(0).random((16, 16))
        with torch.no_grad():
            result = model.rollout(image, np.random.default_rng(2))
        assert float(result.locations.abs().max()) <= 1.0

    def test_step_past_episode_end(self):
        model = small_model(num_glimpses=2)
        image = np.zeros((16, 16))
        state = model.initial_state()
        with torch.no_grad():
            for _ in range(2):
                state, _, _ = model.ram_step(state, image)
            with pytest.raises(StateError):
                model.ram_step(state, image)


class TestRamEpisode:
    """Tests for full episodes"""

    def test_zero_head_reads_midpoint(self):
        model = small_model()
        zero_parameters_(model.regressor)
        estimate = model.appraise(np.random.default_rng(0).random((16, 16)))
        assert estimate == AffectVector(5.0, 5.0)

    def test_deterministic_appraisal(self):
        model = small_model()
        image = np.random.default_rng(3).random((16, 16))
        assert model.appraise(image) == model.appraise(image)

    def test_trajectory_length(self):
        model = small_model(num_glimpses=4)
        estimate, trajectory = model.ram_episode(np.zeros((16, 16)), np.random.default_rng(0))
        assert len(trajectory) == 4
        assert isinstance(estimate, AffectVector)
        assert model.attention_trace(np.zeros((16, 16))).shape == (4, 2)


class TestReinforce:
    """Tests for the policy-gradient terms"""

    def test_log_prob_matches_closed_form(self):
        sample = torch.tensor([[0.3, -0.1]])
        mean = torch.tensor([[0.1, 0.1]])
        expected = -0.5 * ((0.2 / 0.5) ** 2 + (0.2 / 0.5) ** 2) - 2 * np.log(0.5) - np.log(2 * np.pi)
        assert float(gaussian_log_prob(sample, mean, 0.5)[0]) == pytest.approx(expected)

    def test_rewards_equal_baseline_give_zero_update(self):
        mean = torch.tensor([[0.2, -0.4], [0.1, 0.3]], requires_grad=True)
        samples = torch.tensor([[0.5, -0.1], [0.0, 0.0]])
        log_probs = gaussian_log_prob(samples, mean, 0.2).unsqueeze(1)
        loss = reinforce_surrogate(log_probs, torch.tensor([0.7, 0.7]), torch.tensor(0.7))
        loss.backward()
        assert torch.all(mean.grad == 0.0)

    def test_single_sample_follows_score_function(self):
        mean = torch.tensor([[0.2, -0.4]], requires_grad=True)
        sample = torch.tensor([[0.5, -0.1]])
        std = 0.2
        log_probs = gaussian_log_prob(sample, mean, std).unsqueeze(1)
        reinforce_surrogate(log_probs, torch.tensor([1.0]), torch.tensor(0.0)).backward()
        score = (sample - mean.detach()) / std ** 2
        assert torch.allclose(-mean.grad, score)

    def test_advantage_not_differentiated(self):
        baseline = torch.tensor(0.3, requires_grad=True)
        log_probs = torch.tensor([[-1.0, -2.0]], requires_grad=True)
        reinforce_surrogate(log_probs, torch.tensor([1.0]), baseline).backward()
        assert baseline.grad is None

    def test_two_location_bandit_gradient_is_unbiased(self):
        # reward 1 for glimpses right of centre; d/dmu P(x > 0) = pdf(mu / std) / std
        std, mu, episodes = 1.0, 0.3, 10_000
        mean = torch.tensor([[mu, 0.0]], requires_grad=True)
        rng = np.random.default_rng(11)
        samples = torch.from_numpy(rng.standard_normal((episodes, 2))) * std + mean.detach()
        rewards = (samples[:, 0] > 0.0).to(samples.dtype)
        log_probs = gaussian_log_prob(samples, mean.expand(episodes, 2), std).unsqueeze(1)
        reinforce_surrogate(log_probs, rewards, torch.tensor(0.5)).backward()
        estimate = -mean.grad[0]
        analytic = stats.norm.pdf(mu / std) / std
        assert float(estimate[0]) == pytest.approx(analytic, rel=0.05)
        assert abs(float(estimate[1])) < 0.05 * analytic

    def test_episode_rewards_band(self):
        estimates = torch.tensor([[5.2, 4.9], [5.8, 5.0], [5.0, 3.0]])
        labels = torch.tensor([[5.0, 5.0], [5.0, 5.0], [5.0, 5.0]])
        assert episode_rewards(estimates, labels).tolist() == [1.0, 0.0, 0.0]


class TestRamFiles:
    """Tests for RAM checkpoints"""

    def test_round_trip(self, tmp_path):
        model = small_model(seed=4)
        path = save_ram(tmp_path / 'ram.h5', model, metadata={'seed': 4})
        loaded = load_ram(path)
        image = np.random.default_rng(1).random((16, 16))
        assert loaded.appraise(image) == model.appraise(image)
        assert loaded.config == model.config
        assert not loaded.training

    def test_wrong_kind_rejected(self, tmp_path):
        from numeric.checkpoint import Container, save_container
        path = save_container(tmp_path / 'x.h5', Container(kind='run'))
        with pytest.raises(CheckpointError):
            load_ram(path)


# Run tests if executed directly
if __name__ == "__main__":
    pytest.main([__file__, "-v"])
