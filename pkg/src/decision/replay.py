"""
Replay Buffer - Fixed-capacity FIFO of transitions

Oldest transitions are discarded first. Minibatches are drawn uniformly
without replacement from the caller's stream.
"""

from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, List, Optional

import numpy as np

from utils.errors import EmptyBatchError


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray


@dataclass
class TransitionBatch:
    """Column-stacked transitions"""
    states: np.ndarray        # (N, state_dim)
    actions: np.ndarray       # (N, action_dim)
    rewards: np.ndarray       # (N,)
    next_states: np.ndarray   # (N, state_dim)

    def __len__(self) -> int:
        return len(self.rewards)

    @classmethod
    def from_transitions(cls, transitions: List[Transition]) -> 'TransitionBatch':
        if not transitions:
            raise EmptyBatchError("no transitions")
        return cls(
            states=np.stack([t.state for t in transitions]),
            actions=np.stack([t.action for t in transitions]),
            rewards=np.array([t.reward for t in transitions], dtype=np.float64),
            next_states=np.stack([t.next_state for t in transitions]),
        )


class ReplayBuffer:
    """Ring of at most `capacity` transitions, eviction in insertion order"""

    def __init__(self, capacity: int = 500):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._items: Deque[Transition] = deque(maxlen=capacity)

    def store_transition(self, transition: Transition) -> None:
        self._items.append(transition)

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, index: int) -> Transition:
        return self._items[index]

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if len(self._items) == 0:
            raise EmptyBatchError("replay buffer is empty")
        size = min(batch_size, len(self._items))
        return rng.choice(len(self._items), size=size, replace=False)

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        indices = self.sample_indices(batch_size, rng)
        return TransitionBatch.from_transitions([self._items[i] for i in indices])

    def state_dict(self) -> Dict[str, np.ndarray]:
        items = list(self._items)
        if not items:
            return {'size': np.asarray(0)}
        batch = TransitionBatch.from_transitions(items)
        return {
            'size': np.asarray(len(items)),
            'states': batch.states,
            'actions': batch.actions,
            'rewards': batch.rewards,
            'next_states': batch.next_states,
        }

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        self._items.clear()
        for n in range(int(np.asarray(state['size']))):
            self._items.append(Transition(
                state=np.array(state['states'][n]),
                action=np.array(state['actions'][n]),
                reward=float(state['rewards'][n]),
                next_state=np.array(state['next_states'][n]),
            ))
