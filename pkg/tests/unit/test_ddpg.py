"""
Unit Tests for DDPG Decision Making

Tests for state vectors, exploration noise, replay, critic/actor updates
and soft target updates
"""

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent.parent / 'src'))

import numpy as np
import pytest
import torch
from torch import nn
from scipy.stats import chisquare

from appraisal.affect import AffectVector
from decision.ddpg import (
    Actor, ActorCritic, AgentState, Critic, actor_update, critic_update, downsample,
    middle_layer_index, select_action, soft_update, td_targets
)
from decision.noise import OuNoise
from decision.replay import ReplayBuffer, Transition, TransitionBatch
from engine.config import DdpgSettings
from numeric.optim import AdamOptimizer
from utils.errors import EmptyBatchError, ShapeMismatchError
from world.faces import FaceControls


class ConstantCritic(nn.Module):
    """Q(s, a) = value, with a zero-gradient path through the action"""

    def __init__(self, value: float):
        super().__init__()
        self.value = value

    def forward(self, states, actions):
        return 0.0 * actions.sum(dim=1) + self.value


class ParameterCritic(nn.Module):
    """Q(s, a) = q, a single trainable scalar"""

    def __init__(self, q: float):
        super().__init__()
        self.q = nn.Parameter(torch.tensor(q))

    def forward(self, states, actions):
        return self.q.expand(states.shape[0])


class QuadraticCritic(nn.Module):
    """Q(s, a) = -(a - target)^2 on the first action component"""

    def __init__(self, target: float):
        super().__init__()
        self.target = target

    def forward(self, states, actions):
        return -((actions[:, 0] - self.target) ** 2)


def make_batch(size: int = 4, state_dim: int = 3, action_dim: int = 4, reward: float = 2.0,
               seed: int = 0) -> TransitionBatch:
    rng = np.random.default_rng(seed)
    return TransitionBatch(
        states=rng.random((size, state_dim)),
        actions=rng.random((size, action_dim)),
        rewards=np.full(size, reward),
        next_states=rng.random((size, state_dim)),
    )


class TestAgentState:
    """Tests for the flattened observation"""

    def test_dimension(self):
        assert AgentState.dim(16) == 516

    def test_downsample_block_average(self):
        image = np.arange(16, dtype=np.float64).reshape(4, 4)
        assert np.array_equal(downsample(image, 2), np.array([[2.5, 4.5], [10.5, 12.5]]))

    def test_downsample_requires_divisor(self):
        with pytest.raises(ShapeMismatchError):
            downsample(np.zeros((10, 10)), 4)

    def test_vector_layout(self):
        state = AgentState.build(np.ones((32, 32)), AffectVector(1.0, 13.0),
                                 np.zeros((32, 32)), AffectVector(7.0, 7.0), state_image_size=16)
        vector = state.to_vector()
        assert vector.shape == (516,)
        assert np.all(vector[:256] == 1.0)
        assert np.all(vector[256:512] == 0.0)
        assert np.allclose(vector[512:], [0.0, 1.0, 0.5, 0.5])


class TestActor:
    """Tests for the policy network"""

    def test_middle_layer(self):
        assert middle_layer_index(3) == 2
        assert middle_layer_index(1) == 1
        actor = Actor(516, generator=torch.Generator().manual_seed(0))
        assert actor.middle_dim == 64
        assert actor.middle_activation(np.zeros(516)).shape == (64,)

    def test_middle_activation_keeps_mode(self):
        actor = Actor(10, hidden=(8, 6, 4))
        actor.train()
        actor.middle_activation(np.zeros(10))
        assert actor.training

    def test_outputs_in_unit_box(self):
        actor = Actor(10, hidden=(8, 6, 4), generator=torch.Generator().manual_seed(1))
        actor.eval()
        with torch.no_grad():
            out = actor(torch.randn(5, 10) * 100)
        assert float(out.min()) >= 0.0 and float(out.max()) <= 1.0

    def test_critic_scores_each_pair(self):
        critic = Critic(10, hidden=(8, 6), generator=torch.Generator().manual_seed(0))
        critic.eval()
        with torch.no_grad():
            q = critic(torch.rand(5, 10), torch.rand(5, 4))
        assert q.shape == (5,)
        assert critic.head[0].in_features == 8 + 4


class TestSelectAction:
    """Tests for acting with exploration noise"""

    def test_no_noise_is_policy_mean(self):
        actor = Actor(6, hidden=(5, 4, 3), generator=torch.Generator().manual_seed(0))
        state = np.random.default_rng(0).random(6)
        action = select_action(actor, state)
        actor.eval()
        with torch.no_grad():
            mean = actor(torch.from_numpy(state).reshape(1, -1))[0].numpy()
        assert np.allclose(action.to_array(), mean)

    def test_clamped_to_unit_box(self):
        actor = Actor(6, hidden=(5, 4, 3))
        noise = OuNoise(size=4, theta=0.0, sigma=0.0)
        noise.reset(np.array([1.2, 1.2, -5.0, -5.0]))
        action = select_action(actor, np.zeros(6), noise)
        assert isinstance(action, FaceControls)
        assert action.to_array().tolist() == [1.0, 1.0, 0.0, 0.0]


class TestOuNoise:
    """Tests for the Ornstein-Uhlenbeck process"""

    def test_geometric_decay_without_shocks(self):
        noise = OuNoise(size=2, theta=0.15, sigma=0.0, dt=1.0)
        noise.reset(np.array([1.0, -2.0]))
        samples = [noise.sample() for _ in range(3)]
        assert np.allclose(samples[0], [0.85, -1.7])
        assert np.allclose(samples[2], np.array([1.0, -2.0]) * 0.85 ** 3)

    def test_reproducible_from_stream(self):
        a = OuNoise(rng=np.random.default_rng(3))
        b = OuNoise(rng=np.random.default_rng(3))
        assert np.array_equal(a.sample(), b.sample())

    def test_from_settings_and_state(self):
        noise = OuNoise.from_settings(DdpgSettings(ou_sigma=0.3), np.random.default_rng(0))
        assert noise.sigma == 0.3
        noise.sample()
        other = OuNoise(rng=np.random.default_rng(0))
        other.load_state_dict(noise.state_dict())
        assert np.array_equal(other.state, noise.state)


def transition(n: int) -> Transition:
    return Transition(state=np.full(3, float(n)), action=np.zeros(4), reward=float(n), next_state=np.zeros(3))


class TestReplayBuffer:
    """Tests for the FIFO transition store"""

    def test_capacity_evicts_oldest(self):
        buffer = ReplayBuffer(500)
        for n in range(501):
            buffer.store_transition(transition(n))
        assert len(buffer) == 500
        assert buffer[0].reward == 1.0

    def test_single_sample(self):
        buffer = ReplayBuffer(10)
        buffer.store_transition(transition(7))
        batch = buffer.sample(1, np.random.default_rng(0))
        assert batch.rewards.tolist() == [7.0]

    def test_sample_capped_at_size(self):
        buffer = ReplayBuffer(10)
        for n in range(3):
            buffer.store_transition(transition(n))
        assert len(buffer.sample(200, np.random.default_rng(0))) == 3

    def test_uniform_sampling(self):
        buffer = ReplayBuffer(500)
        for n in range(500):
            buffer.store_transition(transition(n))
        rng = np.random.default_rng(11)
        counts = np.zeros(500)
        for _ in range(50):
            indices = buffer.sample_indices(200, rng)
            assert len(set(indices.tolist())) == 200
            assert indices.min() >= 0 and indices.max() < 500
            counts += np.bincount(indices, minlength=500)
        assert chisquare(counts).pvalue > 0.01

    def test_empty_buffer_rejected(self):
        with pytest.raises(EmptyBatchError):
            ReplayBuffer(5).sample(1, np.random.default_rng(0))

    def test_state_round_trip(self):
        buffer = ReplayBuffer(5)
        for n in range(3):
            buffer.store_transition(transition(n))
        other = ReplayBuffer(5)
        other.load_state_dict(buffer.state_dict())
        assert [other[i].reward for i in range(len(other))] == [0.0, 1.0, 2.0]
        empty = ReplayBuffer(5)
        empty.load_state_dict(ReplayBuffer(5).state_dict())
        assert len(empty) == 0


class TestCriticUpdate:
    """Tests for the TD regression step"""

    def test_hand_case_target(self):
        rewards = torch.tensor([2.0])
        targets = td_targets(rewards, torch.zeros(1, 3), Actor(3, hidden=(4,), batch_norm=False),
                             ConstantCritic(4.0), gamma=0.5)
        assert targets.tolist() == [4.0]

    def test_hand_case_loss(self):
        critic = ParameterCritic(3.0)
        loss = critic_update(make_batch(reward=2.0), critic, Actor(3, hidden=(4,), batch_norm=False),
                             ConstantCritic(4.0), AdamOptimizer(critic), gamma=0.5)
        assert loss == pytest.approx(1.0)
        assert float(critic.q) > 3.0

    def test_zero_discount_regresses_reward(self):
        rewards = torch.tensor([1.5, -0.5])
        targets = td_targets(rewards, torch.zeros(2, 3), Actor(3, hidden=(4,), batch_norm=False),
                             ConstantCritic(100.0), gamma=0.0)
        assert targets.tolist() == [1.5, -0.5]

    def test_fixed_point_has_zero_loss(self):
        critic = ParameterCritic(5.0)
        loss = critic_update(make_batch(reward=0.0), critic, Actor(3, hidden=(4,), batch_norm=False),
                             ConstantCritic(5.0), AdamOptimizer(critic), gamma=1.0)
        assert loss == 0.0

    def test_empty_batch_rejected(self):
        critic = ParameterCritic(0.0)
        with pytest.raises(EmptyBatchError):
            critic_update(make_batch(size=0), critic, Actor(3, hidden=(4,), batch_norm=False),
                          ConstantCritic(0.0), AdamOptimizer(critic), gamma=0.5)


class TestActorUpdate:
    """Tests for the deterministic policy gradient step"""

    def test_action_independent_critic_leaves_actor(self):
        actor = Actor(3, hidden=(4,), batch_norm=False, generator=torch.Generator().manual_seed(0))
        before = [p.detach().clone() for p in actor.parameters()]
        actor_update(make_batch(), actor, ConstantCritic(2.0), AdamOptimizer(actor))
        for old, new in zip(before, actor.parameters()):
            assert torch.equal(old, new.detach())

    def test_quadratic_critic_pulls_toward_optimum(self):
        actor = Actor(3, hidden=(4,), action_dim=1, batch_norm=False, generator=torch.Generator().manual_seed(0))
        batch = make_batch(action_dim=1)
        states = torch.from_numpy(batch.states)
        with torch.no_grad():
            start = float((actor(states) - 0.8).abs().mean())
        optimizer = AdamOptimizer(actor, lr=1e-2)
        for _ in range(30):
            actor_update(batch, actor, QuadraticCritic(0.8), optimizer)
        with torch.no_grad():
            end = float((actor(states) - 0.8).abs().mean())
        assert end < start

    def test_critic_not_changed(self):
        actor = Actor(3, hidden=(4,), batch_norm=False)
        critic = ParameterCritic(1.0)
        actor_update(make_batch(), actor, critic, AdamOptimizer(actor))
        assert float(critic.q) == 1.0
        assert critic.q.grad is None


class TestSoftUpdate:
    """Tests for target tracking"""

    def pair(self):
        online, target = nn.Linear(2, 1), nn.Linear(2, 1)
        with torch.no_grad():
            for p in online.parameters():
                p.fill_(2.0)
            for p in target.parameters():
                p.fill_(0.0)
        return online, target

    def test_full_copy(self):
        online, target = self.pair()
        soft_update(online, target, 1.0)
        assert all(torch.all(p == 2.0) for p in target.parameters())

    def test_zero_rate_keeps_target(self):
        online, target = self.pair()
        soft_update(online, target, 0.0)
        assert all(torch.all(p == 0.0) for p in target.parameters())

    def test_midpoint(self):
        online, target = self.pair()
        soft_update(online, target, 0.5)
        assert all(torch.all(p == 1.0) for p in target.parameters())

    def test_batchnorm_buffers(self):
        online, target = nn.BatchNorm1d(3), nn.BatchNorm1d(3)
        online.running_mean.fill_(4.0)
        online.num_batches_tracked.fill_(7)
        soft_update(online, target, 0.5)
        assert torch.all(target.running_mean == 2.0)
        assert int(target.num_batches_tracked) == 7

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeMismatchError):
            soft_update(nn.Linear(2, 1), nn.Linear(3, 1), 0.5)

    def test_rate_out_of_range(self):
        with pytest.raises(ValueError):
            soft_update(nn.Linear(2, 1), nn.Linear(2, 1), 1.5)


class TestActorCritic:
    """Tests for the combined learner"""

    def make(self) -> ActorCritic:
        settings = DdpgSettings(actor_hidden=[8, 6, 4], critic_hidden=[8, 6], zeta=0.1)
        return ActorCritic.from_settings(settings, state_dim=3, generator=torch.Generator().manual_seed(0))

    def test_targets_start_as_copies(self):
        agent = self.make()
        for a, b in zip(agent.actor.state_dict().values(), agent.target_actor.state_dict().values()):
            assert torch.equal(a, b)

    def test_update_moves_online_and_targets(self):
        agent = self.make()
        before = [p.detach().clone() for p in agent.target_critic.parameters()]
        stats = agent.update(make_batch(size=6))
        assert set(stats) == {'critic_loss', 'q_value'}
        assert np.isfinite(stats['critic_loss'])
        changed = [not torch.equal(old, new) for old, new in zip(before, agent.target_critic.parameters())]
        assert any(changed)

    def test_state_blocks_round_trip(self):
        agent = self.make()
        agent.update(make_batch(size=6))
        clone = ActorCritic.from_settings(DdpgSettings(actor_hidden=[8, 6, 4], critic_hidden=[8, 6], zeta=0.1),
                                          state_dim=3, generator=torch.Generator().manual_seed(9))
        clone.load_state_blocks(agent.state_blocks())
        batch = make_batch(size=6, seed=1)
        assert agent.update(batch) == clone.update(batch)

    def test_invalid_rate(self):
        with pytest.raises(ValueError):
            ActorCritic(state_dim=3, zeta=0.0)


# Run tests if executed directly
if __name__ == "__main__":
    pytest.main([__file__, "-v"])
