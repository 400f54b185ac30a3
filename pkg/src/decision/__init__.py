"""Third layer: predictor, actor-critic, exploration, replay and homeostatic reward"""

from decision.ddpg import (
    ACTION_DIM,
    Actor,
    ActorCritic,
    AgentState,
    Critic,
    actor_update,
    critic_update,
    downsample,
    select_action,
    soft_update,
    td_targets,
)
from decision.homeostasis import MoodTracker, reward
from decision.noise import OuNoise
from decision.predictor import (
    ConvLstmCell,
    ConvLstmPredictor,
    PredictorBatch,
    PredictorState,
    cell_step,
    predictor_loss,
    train_predictor,
)
from decision.replay import ReplayBuffer, Transition, TransitionBatch

__all__ = [
    'ACTION_DIM',
    'Actor',
    'ActorCritic',
    'AgentState',
    'Critic',
    'actor_update',
    'critic_update',
    'downsample',
    'select_action',
    'soft_update',
    'td_targets',
    'MoodTracker',
    'reward',
    'OuNoise',
    'ConvLstmCell',
    'ConvLstmPredictor',
    'PredictorBatch',
    'PredictorState',
    'cell_step',
    'predictor_loss',
    'train_predictor',
    'ReplayBuffer',
    'Transition',
    'TransitionBatch',
]
