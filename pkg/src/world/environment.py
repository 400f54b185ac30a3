"""
Mirroring Environment - Mother agent and experimental conditions

Each step the infant shows a face (FaceControls). The mother classifies
it with the expression rules and answers with one of her two faces of
the same category. In the face+natural condition a natural image is
shown instead with probability 0.5, independent of the infant. When the
infant's eyes are closed the infant sees a black image.

Randomness: every step draws exactly three numbers from the
environment stream (mirror variant, natural coin, natural index), so
the stream position depends only on the step count.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from world.faces import ExpressionLabel, FaceControls, classify_expression
from world.stimuli import Stimulus, StimulusSet, build_stimulus_set


class Condition(str, Enum):
    FACE_ONLY = 'face_only'
    FACE_PLUS_NATURAL = 'face_plus_natural'

    @classmethod
    def parse(cls, value: str) -> 'Condition':
        """Accepts 'face_only', 'face-only', 'face-natural', 'face_plus_natural'"""
        key = value.strip().lower().replace('-', '_')
        if key == 'face_natural':
            key = cls.FACE_PLUS_NATURAL.value
        return cls(key)


@dataclass
class EnvStep:
    """Outcome of one environment step"""
    stimulus: Stimulus
    category: int
    action_cost: float
    expression: ExpressionLabel
    eyes_closed: bool
    natural: bool = False


def mother_respond(stimuli: StimulusSet, label: ExpressionLabel, rng: np.random.Generator) -> Stimulus:
    """One of the mother's faces for `label`, uniformly; takes one draw"""
    faces = stimuli.faces[label]
    return faces[min(int(rng.random() * len(faces)), len(faces) - 1)]


def action_cost(previous: FaceControls, current: FaceControls, scale: float = 0.5) -> float:
    return scale * current.total_change(previous)


class MirroringEnvironment:
    """
    Mother-infant world

    Owns the stimulus set, the condition and the infant's previous
    controls (for the action cost). Pure given its RNG stream.
    """

    def __init__(self, condition: Condition = Condition.FACE_ONLY,
                 stimuli: Optional[StimulusSet] = None,
                 rng: Optional[np.random.Generator] = None,
                 natural_probability: float = 0.5,
                 eyelid_closed_threshold: float = 0.25,
                 action_cost_scale: float = 0.5):
        self.condition = Condition(condition)
        self.stimuli = stimuli if stimuli is not None else build_stimulus_set()
        self.rng = rng if rng is not None else np.random.default_rng()
        self.natural_probability = natural_probability
        self.eyelid_closed_threshold = eyelid_closed_threshold
        self.action_cost_scale = action_cost_scale
        self.prev_controls = FaceControls.neutral()

    @classmethod
    def from_settings(cls, settings, rng: np.random.Generator,
                      stimuli: Optional[StimulusSet] = None) -> 'MirroringEnvironment':
        if stimuli is None:
            stimuli = build_stimulus_set(settings.num_natural, settings.image_size)
        return cls(
            condition=Condition(settings.condition),
            stimuli=stimuli,
            rng=rng,
            natural_probability=settings.natural_probability,
            eyelid_closed_threshold=settings.eyelid_closed_threshold,
            action_cost_scale=settings.action_cost_scale,
        )

    def step(self, controls: FaceControls) -> EnvStep:
        label = classify_expression(controls)
        stimulus = mother_respond(self.stimuli, label, self.rng)
        coin, natural_draw = self.rng.random(2)

        natural = False
        if self.condition is Condition.FACE_PLUS_NATURAL and coin < self.natural_probability:
            pool = self.stimuli.natural
            stimulus = pool[min(int(natural_draw * len(pool)), len(pool) - 1)]
            natural = True

        eyes_closed = controls.eyelid_open < self.eyelid_closed_threshold
        if eyes_closed:
            stimulus = self.stimuli.black
            natural = False

        cost = action_cost(self.prev_controls, controls, self.action_cost_scale)
        self.prev_controls = controls
        return EnvStep(
            stimulus=stimulus,
            category=stimulus.category,
            action_cost=cost,
            expression=label,
            eyes_closed=eyes_closed,
            natural=natural,
        )

    def reset(self) -> None:
        self.prev_controls = FaceControls.neutral()

    def state_dict(self) -> Dict[str, Any]:
        return {'prev_controls': self.prev_controls.to_array()}

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        self.prev_controls = FaceControls.from_array(np.asarray(state['prev_controls']))
