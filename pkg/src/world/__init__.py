"""Mother-infant world: faces, stimuli, environment"""

from world.faces import (
    CONTROL_NAMES,
    EXPRESSION_POSES,
    ExpressionLabel,
    FaceControls,
    classify_expression,
    face_affect,
    render_face,
)
from world.stimuli import (
    Corpus,
    ExternalDatasetLoader,
    Stimulus,
    StimulusSet,
    build_stimulus_set,
    generate_corpus,
    load_stimuli,
    render_texture,
    save_stimuli,
    texture_affect,
)
from world.environment import Condition, EnvStep, MirroringEnvironment, action_cost, mother_respond

__all__ = [
    'CONTROL_NAMES',
    'EXPRESSION_POSES',
    'ExpressionLabel',
    'FaceControls',
    'classify_expression',
    'face_affect',
    'render_face',
    'Corpus',
    'ExternalDatasetLoader',
    'Stimulus',
    'StimulusSet',
    'build_stimulus_set',
    'generate_corpus',
    'load_stimuli',
    'render_texture',
    'save_stimuli',
    'texture_affect',
    'Condition',
    'EnvStep',
    'MirroringEnvironment',
    'action_cost',
    'mother_respond',
]
