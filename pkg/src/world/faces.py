"""
Faces - Four-control parametric face, expression rules and rasteriser

The infant's action is a FaceControls vector (eyelid openness, eyebrow
knit, mouth openness, mouth-corner raise), each in [0, 1] with 0.5 the
neutral pose. The mother reads the infant's expression with four
verbal rules and answers with a face from the same category.

Faces are rasterised procedurally to small grayscale images; the same
rasteriser draws the mother's stimuli and the face half of the RAM
training corpus.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple

import numpy as np

from appraisal.affect import AffectVector
from utils.errors import NonFiniteError

NEUTRAL = 0.5
CONTROL_NAMES = ('eyelid_open', 'eyebrow_knit', 'mouth_open', 'mouth_corner')


class ExpressionLabel(str, Enum):
    PLEASURE = 'pleasure'
    ANGER = 'anger'
    SADNESS = 'sadness'
    NEUTRAL = 'neutral'

    @property
    def index(self) -> int:
        return list(ExpressionLabel).index(self)


@dataclass(frozen=True)
class FaceControls:
    """
    Four facial actuators, clamped to [0, 1]

    Values outside the range are clamped on construction; NaN is rejected.
    """
    eyelid_open: float = NEUTRAL
    eyebrow_knit: float = NEUTRAL
    mouth_open: float = NEUTRAL
    mouth_corner: float = NEUTRAL

    def __post_init__(self):
        for name in CONTROL_NAMES:
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise NonFiniteError("FaceControls", name)
            object.__setattr__(self, name, min(1.0, max(0.0, value)))

    @classmethod
    def from_array(cls, values: Sequence[float]) -> 'FaceControls':
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if values.size != 4:
            raise ValueError(f"FaceControls needs 4 values, got {values.size}")
        return cls(*values)

    @classmethod
    def neutral(cls) -> 'FaceControls':
        return cls()

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in CONTROL_NAMES], dtype=np.float64)

    def total_change(self, other: 'FaceControls') -> float:
        """Sum of absolute actuator changes from `other` to self"""
        return float(np.abs(self.to_array() - other.to_array()).sum())


def classify_expression(controls: FaceControls) -> ExpressionLabel:
    """
    The mother's recognition rules

    1. pleasure: mouth corner raised
    2. anger:    corner down, brows knitted, eyes more than half open
    3. sadness:  corner down, brows knitted, eyes half closed or more
    4. neutral:  otherwise
    Thresholds are strict (> 0.5); ties fall through toward sadness/neutral.
    """
    if controls.mouth_corner > NEUTRAL:
        return ExpressionLabel.PLEASURE
    if controls.mouth_corner < NEUTRAL and controls.eyebrow_knit > NEUTRAL:
        if controls.eyelid_open > NEUTRAL:
            return ExpressionLabel.ANGER
        return ExpressionLabel.SADNESS
    return ExpressionLabel.NEUTRAL


def face_affect(controls: FaceControls) -> AffectVector:
    """
    Ground-truth affect of a drawn face

    valence follows the mouth corner (1 when fully down, 9 fully up);
    arousal follows overall facial activation. The neutral pose maps to (5, 5).
    """
    valence = 1.0 + 8.0 * controls.mouth_corner
    activation = 0.4 * controls.eyelid_open + 0.3 * controls.mouth_open + 0.3 * controls.eyebrow_knit
    return AffectVector(valence, 1.0 + 8.0 * activation)


# Mother's faces: two drawings per category
EXPRESSION_POSES = {
    ExpressionLabel.PLEASURE: (FaceControls(0.75, 0.2, 0.35, 0.95), FaceControls(0.6, 0.3, 0.8, 0.85)),
    ExpressionLabel.ANGER: (FaceControls(0.9, 0.9, 0.3, 0.1), FaceControls(0.75, 0.8, 0.7, 0.2)),
    ExpressionLabel.SADNESS: (FaceControls(0.3, 0.8, 0.2, 0.15), FaceControls(0.2, 0.7, 0.4, 0.25)),
    ExpressionLabel.NEUTRAL: (FaceControls(0.6, 0.4, 0.2, 0.5), FaceControls(0.5, 0.5, 0.5, 0.5)),
}

# per-variant (dx, dy, radius scale)
FACE_VARIANTS: Tuple[Tuple[float, float, float], ...] = ((0.0, 0.0, 1.0), (0.03, -0.02, 0.93))

FACE_INTENSITY = 0.75
FEATURE_INTENSITY = 0.1
BACKGROUND_INTENSITY = 0.25


def _segment_distance(x: np.ndarray, y: np.ndarray, p0: Tuple[float, float], p1: Tuple[float, float]) -> np.ndarray:
    (x0, y0), (x1, y1) = p0, p1
    dx, dy = x1 - x0, y1 - y0
    length_sq = dx * dx + dy * dy
    t = np.clip(((x - x0) * dx + (y - y0) * dy) / max(length_sq, 1e-12), 0.0, 1.0)
    return np.hypot(x - (x0 + t * dx), y - (y0 + t * dy))


def render_face(controls: FaceControls, size: int = 32, variant: int = 0, contrast: float = 1.0) -> np.ndarray:
    """
    Rasterise a schematic face into a (size, size) image in [0, 1]

    Coordinates are in face units (image side = 1, origin at the face
    centre, y pointing down). `variant` shifts/scales the head slightly
    so each expression has distinct drawings.
    """
    dx, dy, scale = FACE_VARIANTS[variant % len(FACE_VARIANTS)]
    coords = (np.arange(size) + 0.5) / size - 0.5
    y, x = np.meshgrid(coords, coords, indexing='ij')
    x = (x - dx) / scale
    y = (y - dy) / scale

    image = np.full((size, size), BACKGROUND_INTENSITY)
    head = (x / 0.40) ** 2 + (y / 0.46) ** 2 <= 1.0
    image[head] = FACE_INTENSITY
    features = np.zeros((size, size), dtype=bool)

    # eyes: ellipses whose height follows eyelid openness
    eye_half_height = 0.012 + 0.06 * controls.eyelid_open
    for side in (-1.0, 1.0):
        features |= ((x - side * 0.15) / 0.08) ** 2 + ((y + 0.08) / eye_half_height) ** 2 <= 1.0

    # brows: inner ends drop as the brows knit
    knit = (controls.eyebrow_knit - NEUTRAL) * 2.0
    for side in (-1.0, 1.0):
        outer = (side * 0.25, -0.2 - 0.02 * knit)
        inner = (side * 0.06, -0.2 + 0.06 * knit)
        features |= _segment_distance(x, y, outer, inner) <= 0.025

    # mouth: parabola bent by the corner control, opened by mouth_open
    curvature = (controls.mouth_corner - NEUTRAL) * 2.0 * 0.12 / 0.2 ** 2
    upper = 0.22 + curvature * (0.2 ** 2 - x ** 2)
    opening = 0.02 + 0.08 * controls.mouth_open
    features |= (np.abs(x) <= 0.2) & (y >= upper - 0.012) & (y <= upper + opening)

    image[features & head] = FEATURE_INTENSITY
    mean = image.mean()
    return np.clip(mean + contrast * (image - mean), 0.0, 1.0)
