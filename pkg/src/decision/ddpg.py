"""
DDPG - Actor-critic over continuous face controls

- Actor mu(s): MLP with batch norm, sigmoid output in [0, 1]^4
- Critic Q(s, a): state trunk, then the action joins the second layer
- Target copies mu', Q' follow the online nets by soft updates
      theta' <- zeta * theta + (1 - zeta) * theta'
- Critic regresses y = r + gamma * Q'(s', mu'(s')); the actor ascends
  Q(s, mu(s)).

Batch-norm modes: action selection, target evaluation and the critic
inside the actor update all run in eval mode; only the network being
updated runs in train mode.
"""

from copy import deepcopy
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple
import math

import numpy as np
import torch
from torch import nn

from appraisal.affect import AffectVector
from decision.noise import OuNoise
from decision.replay import TransitionBatch
from numeric.checkpoint import load_module_blocks, load_optimizer_blocks, module_blocks, optimizer_blocks
from numeric.layers import LayerSpec, build_network, dense_stack
from numeric.optim import AdamOptimizer
from numeric.tensor import as_tensor
from utils.errors import EmptyBatchError, ShapeMismatchError
from world.faces import FaceControls

ACTION_DIM = 4


def downsample(image: np.ndarray, size: int) -> np.ndarray:
    """Block-average a square image to size x size"""
    image = np.asarray(image, dtype=np.float64)
    factor = image.shape[0] // size
    if factor * size != image.shape[0]:
        raise ShapeMismatchError((size * max(factor, 1),), (image.shape[0],), where="downsample")
    return image.reshape(size, factor, size, factor).mean(axis=(1, 3))


@dataclass
class AgentState:
    """
    s = {I, a, I_pred, a_pred}

    Images are stored already downsampled to the state resolution;
    interoception is min-max scaled when flattened.
    """
    image: np.ndarray
    interoception: AffectVector
    predicted_image: np.ndarray
    predicted_interoception: AffectVector

    @classmethod
    def build(cls, image: np.ndarray, interoception: AffectVector, predicted_image: np.ndarray,
              predicted_interoception: AffectVector, state_image_size: int = 16) -> 'AgentState':
        return cls(downsample(image, state_image_size), interoception,
                   downsample(predicted_image, state_image_size), predicted_interoception)

    @staticmethod
    def dim(state_image_size: int = 16) -> int:
        return 2 * state_image_size * state_image_size + 4

    def to_vector(self, interoception_range: Tuple[float, float] = (1.0, 13.0)) -> np.ndarray:
        low, high = interoception_range
        scaled = (np.concatenate([self.interoception.to_array(),
                                  self.predicted_interoception.to_array()]) - low) / (high - low)
        return np.concatenate([self.image.reshape(-1), self.predicted_image.reshape(-1), scaled])


def middle_layer_index(num_hidden: int) -> int:
    """1-based index of the central hidden layer, ceil(L / 2)"""
    return max(1, math.ceil(num_hidden / 2))


class Actor(nn.Module):
    """Deterministic policy; exposes its central hidden layer"""

    def __init__(self, state_dim: int, hidden: Sequence[int] = (128, 64, 32), action_dim: int = ACTION_DIM,
                 batch_norm: bool = True, generator: Optional[torch.Generator] = None):
        super().__init__()
        self.hidden = list(hidden)
        specs = dense_stack([state_dim] + self.hidden + [action_dim], batch_norm=batch_norm,
                            final_activation='sigmoid')
        self.net = build_network(specs, generator)
        activations = [n for n, spec in enumerate(specs) if spec.kind == 'relu']
        self.middle_end = activations[middle_layer_index(len(self.hidden)) - 1] + 1

    @property
    def middle_dim(self) -> int:
        return self.hidden[middle_layer_index(len(self.hidden)) - 1]

    def forward(self, states: torch.Tensor) -> torch.Tensor:
        return self.net(states)

    def forward_with_middle(self, states: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        middle = self.net[:self.middle_end](states)
        return self.net[self.middle_end:](middle), middle

    def middle_activation(self, state_vector: np.ndarray) -> np.ndarray:
        """Eval-mode central hidden layer for one state"""
        was_training = self.training
        self.eval()
        with torch.no_grad():
            _, middle = self.forward_with_middle(as_tensor(state_vector).reshape(1, -1))
        self.train(was_training)
        return middle[0].numpy().copy()


class Critic(nn.Module):
    """Q(s, a); the action enters after the first state layer"""

    def __init__(self, state_dim: int, hidden: Sequence[int] = (128, 64), action_dim: int = ACTION_DIM,
                 batch_norm: bool = True, generator: Optional[torch.Generator] = None):
        super().__init__()
        hidden = list(hidden)
        first = hidden[0]
        specs = [LayerSpec.dense(state_dim, first)]
        if batch_norm:
            specs.append(LayerSpec.batchnorm(first))
        specs.append(LayerSpec.activation('relu', (first,)))
        self.state_trunk = build_network(specs, generator)
        self.head = build_network(dense_stack([first + action_dim] + hidden[1:] + [1]), generator)

    def forward(self, states: torch.Tensor, actions: torch.Tensor) -> torch.Tensor:
        features = self.state_trunk(states)
        return self.head(torch.cat([features, actions], dim=1)).squeeze(1)


def select_action(actor: Actor, state_vector: np.ndarray, noise: Optional[OuNoise] = None) -> FaceControls:
    """mu(s) in eval mode, plus OU noise, clamped to [0, 1]^4"""
    was_training = actor.training
    actor.eval()
    with torch.no_grad():
        mean = actor(as_tensor(state_vector).reshape(1, -1))[0].numpy()
    actor.train(was_training)
    action = mean + noise.sample() if noise is not None else mean
    return FaceControls.from_array(np.clip(action, 0.0, 1.0))


def td_targets(rewards: torch.Tensor, next_states: torch.Tensor, target_actor: nn.Module,
               target_critic: nn.Module, gamma: float) -> torch.Tensor:
    """y = r + gamma * Q'(s', mu'(s'))"""
    target_actor.eval()
    target_critic.eval()
    with torch.no_grad():
        return rewards + gamma * target_critic(next_states, target_actor(next_states))


def _batch_tensors(batch: TransitionBatch):
    if len(batch) == 0:
        raise EmptyBatchError("empty minibatch")
    return (torch.from_numpy(batch.states), torch.from_numpy(batch.actions),
            torch.from_numpy(batch.rewards), torch.from_numpy(batch.next_states))


def critic_update(batch: TransitionBatch, critic: nn.Module, target_actor: nn.Module,
                  target_critic: nn.Module, optimizer: AdamOptimizer, gamma: float) -> float:
    """One Adam step on (1/N) sum (y_i - Q(s_i, a_i))^2; returns the loss"""
    states, actions, rewards, next_states = _batch_tensors(batch)
    targets = td_targets(rewards, next_states, target_actor, target_critic, gamma)
    critic.train()
    loss = ((targets - critic(states, actions)) ** 2).mean()
    return optimizer.minimize(loss)


def actor_update(batch: TransitionBatch, actor: nn.Module, critic: nn.Module,
                 optimizer: AdamOptimizer) -> float:
    """Ascend mean Q(s, mu(s)) wrt the actor only; returns that mean"""
    states = _batch_tensors(batch)[0]
    critic.eval()
    actor.train()
    value = critic(states, actor(states)).mean()
    optimizer.minimize(-value)
    critic.zero_grad(set_to_none=True)
    return float(value.detach())


def soft_update(online: nn.Module, target: nn.Module, zeta: float) -> None:
    """
    theta' <- zeta * theta + (1 - zeta) * theta' for parameters and
    floating buffers (batch-norm running stats); integer buffers are copied
    """
    if not 0.0 <= zeta <= 1.0:
        raise ValueError(f"zeta must be in [0, 1], got {zeta}")
    source = online.state_dict()
    destination = target.state_dict()
    if source.keys() != destination.keys():
        raise ShapeMismatchError(sorted(source), sorted(destination), where="soft_update keys")
    with torch.no_grad():
        for name, value in source.items():
            if value.shape != destination[name].shape:
                raise ShapeMismatchError(tuple(value.shape), tuple(destination[name].shape),
                                         where=f"soft_update '{name}'")
            if value.is_floating_point():
                destination[name].mul_(1.0 - zeta).add_(value, alpha=zeta)
            else:
                destination[name].copy_(value)


class ActorCritic:
    """
    Online and target networks with their optimisers

    Targets start as exact copies of the online networks.
    """

    def __init__(self, state_dim: int, actor_hidden: Sequence[int] = (128, 64, 32),
                 critic_hidden: Sequence[int] = (128, 64), action_dim: int = ACTION_DIM,
                 actor_lr: float = 1e-4, critic_lr: float = 1e-3, gamma: float = 0.99,
                 zeta: float = 0.001, batch_norm: bool = True, betas: Tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8, generator: Optional[torch.Generator] = None):
        if not 0.0 < zeta <= 1.0:
            raise ValueError(f"zeta must be in (0, 1], got {zeta}")
        self.gamma = gamma
        self.zeta = zeta
        self.actor = Actor(state_dim, actor_hidden, action_dim, batch_norm, generator)
        self.critic = Critic(state_dim, critic_hidden, action_dim, batch_norm, generator)
        self.target_actor = deepcopy(self.actor).eval()
        self.target_critic = deepcopy(self.critic).eval()
        self.actor_optimizer = AdamOptimizer(self.actor, lr=actor_lr, beta1=betas[0], beta2=betas[1], eps=eps)
        self.critic_optimizer = AdamOptimizer(self.critic, lr=critic_lr, beta1=betas[0], beta2=betas[1], eps=eps)

    @classmethod
    def from_settings(cls, settings, state_dim: int, generator: Optional[torch.Generator] = None) -> 'ActorCritic':
        return cls(
            state_dim=state_dim,
            actor_hidden=settings.actor_hidden,
            critic_hidden=settings.critic_hidden,
            actor_lr=settings.actor_lr,
            critic_lr=settings.critic_lr,
            gamma=settings.gamma,
            zeta=settings.zeta,
            batch_norm=settings.batch_norm,
            betas=(settings.beta1, settings.beta2),
            eps=settings.eps,
            generator=generator,
        )

    def update(self, batch: TransitionBatch) -> Dict[str, float]:
        """Critic step, actor step, then both soft updates"""
        critic_loss = critic_update(batch, self.critic, self.target_actor, self.target_critic,
                                    self.critic_optimizer, self.gamma)
        q_value = actor_update(batch, self.actor, self.critic, self.actor_optimizer)
        soft_update(self.actor, self.target_actor, self.zeta)
        soft_update(self.critic, self.target_critic, self.zeta)
        return {'critic_loss': critic_loss, 'q_value': q_value}

    def state_blocks(self) -> Dict[str, Dict]:
        return {
            'actor': module_blocks(self.actor),
            'critic': module_blocks(self.critic),
            'target_actor': module_blocks(self.target_actor),
            'target_critic': module_blocks(self.target_critic),
            'actor_optimizer': optimizer_blocks(self.actor_optimizer.optimizer),
            'critic_optimizer': optimizer_blocks(self.critic_optimizer.optimizer),
        }

    def load_state_blocks(self, blocks: Dict[str, Dict]) -> None:
        load_module_blocks(self.actor, blocks['actor'])
        load_module_blocks(self.critic, blocks['critic'])
        load_module_blocks(self.target_actor, blocks['target_actor'])
        load_module_blocks(self.target_critic, blocks['target_critic'])
        load_optimizer_blocks(self.actor_optimizer.optimizer, blocks['actor_optimizer'])
        load_optimizer_blocks(self.critic_optimizer.optimizer, blocks['critic_optimizer'])
