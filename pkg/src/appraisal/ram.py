"""
Recurrent Attention Model - First-layer innate appraisal

Maps a stimulus image to an AffectVector by taking T glimpses:

    g_t = f_g(glimpse(x, l_{t-1}), l_{t-1})      glimpse network
    h_t = f_h(h_{t-1}, g_t)                        core network
    l_t ~ N(f_l(h_t), sigma^2 I), clamped          location network
    a   = 5 + 4 * f_a(h_T)                         action (regression) head

The location policy is trained with REINFORCE against a learned scalar
baseline, the action head by regression on the ground-truth labels.
During interaction the model is frozen and run with sigma = 0.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union
import math

import numpy as np
import torch
from torch import nn

from appraisal.affect import AffectVector, SCALE_MID
from appraisal.glimpse import GlimpseConfig, extract_glimpse
from numeric.checkpoint import Container, load_container, load_module_blocks, module_blocks, save_container
from numeric.layers import LayerSpec, build_network, dense_stack
from numeric.tensor import as_tensor
from utils.errors import StateError

RAM_KIND = 'ram'
# affect = AFFECT_CENTRE + AFFECT_SPAN * raw head output
AFFECT_CENTRE = SCALE_MID
AFFECT_SPAN = 4.0
LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class RamState:
    """Core hidden vector, current location and step index"""
    hidden: torch.Tensor
    location: torch.Tensor
    step: int = 0

    def __post_init__(self):
        if not 0 <= self.step:
            raise ValueError(f"step must be >= 0, got {self.step}")


@dataclass
class RolloutResult:
    """Batched episode outcome"""
    affect: torch.Tensor          # (B, 2) valence, arousal
    log_probs: torch.Tensor       # (B, T)
    locations: torch.Tensor       # (B, T, 2) sampled, clamped
    hidden: torch.Tensor          # (B, hidden)


def gaussian_log_prob(sample: torch.Tensor, mean: torch.Tensor, std: float) -> torch.Tensor:
    """
    Log-density of an isotropic Gaussian, summed over the last dim

    A degenerate policy (std == 0) puts all mass on the mean; its
    log-prob is reported as 0.
    """
    if std <= 0.0:
        return torch.zeros(sample.shape[:-1], dtype=sample.dtype)
    dims = sample.shape[-1]
    z = (sample - mean) / std
    return -0.5 * (z ** 2).sum(-1) - dims * math.log(std) - 0.5 * dims * LOG_2PI


class RecurrentAttentionModel(nn.Module):
    """
    Glimpse, core, location and action networks plus a scalar baseline

    All sub-networks are assembled from LayerSpecs.
    """

    def __init__(self, config: GlimpseConfig = GlimpseConfig(), glimpse_hidden: int = 128,
                 location_hidden: int = 128, hidden_size: int = 128, location_std: float = 0.15,
                 generator: Optional[torch.Generator] = None):
        super().__init__()
        self.config = config
        self.hidden_size = hidden_size
        self.location_std = location_std

        self.what = build_network([LayerSpec.dense(config.glimpse_dim, glimpse_hidden),
                                   LayerSpec.activation('relu', (glimpse_hidden,)),
                                   LayerSpec.dense(glimpse_hidden, hidden_size)], generator)
        self.where = build_network([LayerSpec.dense(2, location_hidden),
                                    LayerSpec.activation('relu', (location_hidden,)),
                                    LayerSpec.dense(location_hidden, hidden_size)], generator)
        self.input_to_hidden = build_network([LayerSpec.dense(hidden_size, hidden_size)], generator)
        self.hidden_to_hidden = build_network([LayerSpec.dense(hidden_size, hidden_size)], generator)
        self.locator = build_network(dense_stack([hidden_size, 2], final_activation='tanh'), generator)
        self.regressor = build_network(dense_stack([hidden_size, 2]), generator)
        self.baseline = nn.Parameter(torch.zeros(()))

    @classmethod
    def from_settings(cls, settings, generator: Optional[torch.Generator] = None) -> 'RecurrentAttentionModel':
        return cls(
            config=GlimpseConfig.from_settings(settings),
            glimpse_hidden=settings.glimpse_hidden,
            location_hidden=settings.location_hidden,
            hidden_size=settings.hidden_size,
            location_std=settings.location_std,
            generator=generator,
        )

    def policy_parameters(self) -> List[nn.Parameter]:
        """Everything except the scalar baseline"""
        return [p for name, p in self.named_parameters() if name != 'baseline']

    # Episode mechanics

    def initial_state(self, batch: int = 1) -> RamState:
        return RamState(hidden=torch.zeros(batch, self.hidden_size),
                        location=torch.zeros(batch, 2), step=0)

    def glimpse_features(self, images: torch.Tensor, locations: torch.Tensor) -> torch.Tensor:
        patches = extract_glimpse(images, locations, self.config).reshape(images.shape[0], -1)
        return torch.relu(self.what(patches) + self.where(locations))

    def location_mean(self, hidden: torch.Tensor) -> torch.Tensor:
        return self.locator(hidden)

    def affect_head(self, hidden: torch.Tensor) -> torch.Tensor:
        return AFFECT_CENTRE + AFFECT_SPAN * self.regressor(hidden)

    def ram_step(self, state: RamState, images, rng: Optional[np.random.Generator] = None,
                 std: Optional[float] = None) -> Tuple[RamState, torch.Tensor, torch.Tensor]:
        """
        One glimpse

        Returns (new state, sampled location, log-prob of the pre-clamp sample).
        Without an rng the sample is the location-network mean; its log-prob
        is still taken under N(mean, std^2 I). The location network reads a
        detached core state, so policy gradients only reach the locator.
        """
        if state.step >= self.config.num_glimpses:
            raise StateError(f"episode already took {self.config.num_glimpses} glimpses")
        images = as_tensor(images)
        if images.dim() == 2:
            images = images.unsqueeze(0)
        std = self.location_std if std is None else std

        features = self.glimpse_features(images, state.location)
        hidden = torch.relu(self.input_to_hidden(features) + self.hidden_to_hidden(state.hidden))
        mean = self.location_mean(hidden.detach())
        sample = mean.detach()
        if std > 0.0 and rng is not None:
            noise = torch.from_numpy(rng.standard_normal(tuple(mean.shape)))
            sample = sample + std * noise
        log_prob = gaussian_log_prob(sample, mean, std)
        location = sample.clamp(-1.0, 1.0)
        return RamState(hidden=hidden, location=location, step=state.step + 1), location, log_prob

    def rollout(self, images, rng: Optional[np.random.Generator] = None,
                std: Optional[float] = None) -> RolloutResult:
        """Run a full episode on a batch of images (B, S, S)"""
        images = as_tensor(images)
        if images.dim() == 2:
            images = images.unsqueeze(0)
        state = self.initial_state(images.shape[0])
        log_probs, locations = [], []
        for _ in range(self.config.num_glimpses):
            state, location, log_prob = self.ram_step(state, images, rng, std)
            log_probs.append(log_prob)
            locations.append(location)
        return RolloutResult(
            affect=self.affect_head(state.hidden),
            log_probs=torch.stack(log_probs, dim=1),
            locations=torch.stack(locations, dim=1),
            hidden=state.hidden,
        )

    def ram_episode(self, image, rng: Optional[np.random.Generator] = None,
                    std: Optional[float] = None) -> Tuple[AffectVector, List[Tuple[Tuple[float, float], float]]]:
        """Single image -> (estimate, [(location, log_prob), ...])"""
        with torch.no_grad():
            result = self.rollout(image, rng, std)
        trajectory = [
            ((float(loc[0]), float(loc[1])), float(lp))
            for loc, lp in zip(result.locations[0], result.log_probs[0])
        ]
        return AffectVector.from_array(result.affect[0].numpy()), trajectory

    def appraise(self, image) -> AffectVector:
        """Deterministic estimate (mean locations), no gradient"""
        return self.ram_episode(image, rng=None, std=0.0)[0]

    def attention_trace(self, image) -> np.ndarray:
        """(T, 2) deterministic glimpse locations"""
        with torch.no_grad():
            return self.rollout(image, None, 0.0).locations[0].numpy()


def reinforce_surrogate(log_probs: torch.Tensor, rewards: torch.Tensor,
                        baseline: torch.Tensor) -> torch.Tensor:
    """
    Surrogate loss whose gradient is the negated REINFORCE estimate

        -(1/M) sum_i sum_t grad log pi(u_t^i) (R^i - b)

    log_probs: (M, T); rewards: (M,); the advantage is not differentiated.
    """
    advantage = (rewards - baseline).detach()
    return -(log_probs.sum(dim=1) * advantage).mean()


def episode_rewards(estimates: torch.Tensor, labels: torch.Tensor, tolerance: float = 0.5) -> torch.Tensor:
    """1 when both components are within `tolerance` of the label, else 0"""
    within = (estimates.detach() - labels).abs() < tolerance
    return within.all(dim=1).to(estimates.dtype)


# Checkpoints

def save_ram(path: Union[str, Path], model: RecurrentAttentionModel,
             metadata: Optional[Dict] = None) -> Path:
    config = model.config
    container = Container(
        kind=RAM_KIND,
        blocks={'model': module_blocks(model)},
        metadata={
            'glimpse': {
                'num_scales': config.num_scales,
                'patch_size': config.patch_size,
                'scale_factor': config.scale_factor,
                'num_glimpses': config.num_glimpses,
                'image_size': config.image_size,
            },
            'glimpse_hidden': model.what[0].out_features,
            'location_hidden': model.where[0].out_features,
            'hidden_size': model.hidden_size,
            'location_std': model.location_std,
            **(metadata or {}),
        },
    )
    return save_container(path, container)


def load_ram(path: Union[str, Path]) -> RecurrentAttentionModel:
    container = load_container(path, expected_kind=RAM_KIND)
    meta = container.metadata
    model = RecurrentAttentionModel(
        config=GlimpseConfig(**meta['glimpse']),
        glimpse_hidden=meta['glimpse_hidden'],
        location_hidden=meta['location_hidden'],
        hidden_size=meta['hidden_size'],
        location_std=meta['location_std'],
    )
    load_module_blocks(model, container.blocks['model'])
    model.eval()
    return model
