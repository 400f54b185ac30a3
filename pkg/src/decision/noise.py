"""
Exploration Noise - Ornstein-Uhlenbeck process

    x <- x + theta * (mu - x) * dt + sigma * sqrt(dt) * N(0, I)

Draws come from the caller's numpy stream, so the noise sequence is
reproducible and checkpointable.
"""

from typing import Dict, Optional

import numpy as np


class OuNoise:
    """Temporally correlated noise, one component per action dimension"""

    def __init__(self, size: int = 4, theta: float = 0.15, sigma: float = 0.2, dt: float = 1.0,
                 mu: float = 0.0, rng: Optional[np.random.Generator] = None):
        if size < 1:
            raise ValueError(f"noise size must be >= 1, got {size}")
        self.size = size
        self.theta = theta
        self.sigma = sigma
        self.dt = dt
        self.mu = mu
        self.rng = rng if rng is not None else np.random.default_rng()
        self.reset()

    @classmethod
    def from_settings(cls, settings, rng: np.random.Generator, size: int = 4) -> 'OuNoise':
        return cls(size=size, theta=settings.ou_theta, sigma=settings.ou_sigma, dt=settings.ou_dt, rng=rng)

    def reset(self, state: Optional[np.ndarray] = None) -> None:
        self.state = np.full(self.size, self.mu) if state is None else np.array(state, dtype=np.float64)

    def sample(self) -> np.ndarray:
        """Advance one step and return the new noise vector"""
        drift = self.theta * (self.mu - self.state) * self.dt
        shock = self.sigma * np.sqrt(self.dt) * self.rng.standard_normal(self.size)
        self.state = self.state + drift + shock
        return self.state.copy()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {'state': self.state.copy()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        self.reset(np.asarray(state['state']).reshape(self.size))
