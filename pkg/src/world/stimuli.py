"""
Stimuli - Synthetic affective images with ground-truth labels

Two families of procedurally drawn images replace licensed picture
databases:
- faces:    schematic faces (see faces.py); valence follows the mouth
            corner, arousal the overall facial activation
- textures: oriented gratings; valence follows mean brightness,
            arousal the grating energy (contrast + spatial frequency)

Both label maps send "flat" parameters (0.5) to the scale midpoint
(5, 5) and their extremes to 1 and 9.

Stimulus sets are saved as a directory of raw float64 images plus a
line-delimited JSON manifest.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union
import json

import numpy as np

from appraisal.affect import AffectVector
from world.faces import (
    EXPRESSION_POSES,
    ExpressionLabel,
    FaceControls,
    face_affect,
    render_face,
)
from utils.errors import EmptyBatchError, ReportError
from utils.logging import get_logger, log_event

logger = get_logger(__name__)

MANIFEST_NAME = 'manifest.jsonl'
IMAGE_SUFFIX = '.f64'

# (brightness, energy) of the default natural set; the first entries are
# strongly negative, highly arousing items
NATURAL_PRESETS: Tuple[Tuple[float, float], ...] = (
    (0.12, 0.92),
    (0.2, 0.75),
    (0.88, 0.85),
    (0.82, 0.3),
    (0.3, 0.15),
    (0.5, 0.5),
    (0.1, 0.55),
    (0.92, 0.6),
)
GOLDEN = 0.6180339887498949
# darkest / brightest texture mean, and the largest grating amplitude
TEXTURE_FLOOR = 0.2


@dataclass
class Stimulus:
    """
    One image the infant can see

    `category` indexes the compensation table; `label` is the
    ground-truth affect; `controllable` marks faces the infant can
    elicit from the mother (natural images and black are not).
    """
    stimulus_id: str
    image: np.ndarray
    category: int
    label: Optional[AffectVector] = None
    controllable: bool = False
    kind: str = 'natural'
    expression: Optional[str] = None

    def manifest_entry(self) -> Dict[str, object]:
        return {
            'id': self.stimulus_id,
            'category': self.category,
            'valence': None if self.label is None else self.label.valence,
            'arousal': None if self.label is None else self.label.arousal,
            'controllable': self.controllable,
            'kind': self.kind,
            'expression': self.expression,
            'shape': list(self.image.shape),
        }


def texture_affect(brightness: float, energy: float) -> AffectVector:
    return AffectVector(1.0 + 8.0 * brightness, 1.0 + 8.0 * energy)


def render_texture(brightness: float, energy: float, size: int = 32,
                   orientation: float = 0.0, phase: float = 0.0) -> np.ndarray:
    """
    Oriented sinusoidal grating around a mean brightness

    The mean level spans [TEXTURE_FLOOR, 1 - TEXTURE_FLOOR], so an
    amplitude of up to TEXTURE_FLOOR never clips and the contrast reads
    `energy` at every brightness. Spatial frequency also grows with
    `energy` but stays low enough to survive the coarse glimpse scales.
    """
    coords = (np.arange(size) + 0.5) / size
    y, x = np.meshgrid(coords, coords, indexing='ij')
    level = TEXTURE_FLOOR + (1.0 - 2.0 * TEXTURE_FLOOR) * brightness
    amplitude = TEXTURE_FLOOR * energy
    frequency = 1.0 + 2.0 * energy
    wave = np.sin(2.0 * np.pi * frequency * (x * np.cos(orientation) + y * np.sin(orientation)) + phase)
    return np.clip(level + amplitude * wave, 0.0, 1.0)


def black_image(size: int = 32) -> np.ndarray:
    return np.zeros((size, size))


@dataclass
class StimulusSet:
    """
    The fixed stimuli of one interaction run

    8 mother faces (2 per expression), the natural images and the black
    (eyes closed) image, each with its own stable category id.
    """
    faces: Dict[ExpressionLabel, List[Stimulus]]
    natural: List[Stimulus]
    black: Stimulus
    _by_category: Dict[int, Stimulus] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._by_category = {s.category: s for s in self}

    def __iter__(self) -> Iterator[Stimulus]:
        for label in ExpressionLabel:
            yield from self.faces[label]
        yield from self.natural
        yield self.black

    def __len__(self) -> int:
        return len(self._by_category)

    def by_category(self, category: int) -> Stimulus:
        return self._by_category[category]

    @property
    def categories(self) -> List[int]:
        return sorted(self._by_category)


def build_stimulus_set(num_natural: int = 8, size: int = 32) -> StimulusSet:
    """Deterministic stimulus set; categories 0-7 faces, then natural, then black"""
    faces: Dict[ExpressionLabel, List[Stimulus]] = {}
    category = 0
    for label in ExpressionLabel:
        faces[label] = []
        for variant, pose in enumerate(EXPRESSION_POSES[label]):
            faces[label].append(Stimulus(
                stimulus_id=f"face_{label.value}_{variant}",
                image=render_face(pose, size=size, variant=variant),
                category=category,
                label=face_affect(pose),
                controllable=True,
                kind='face',
                expression=label.value,
            ))
            category += 1

    natural = []
    for i in range(num_natural):
        if i < len(NATURAL_PRESETS):
            brightness, energy = NATURAL_PRESETS[i]
        else:
            brightness = 0.1 + 0.8 * ((i * GOLDEN) % 1.0)
            energy = 0.1 + 0.8 * ((i * GOLDEN * GOLDEN) % 1.0)
        natural.append(Stimulus(
            stimulus_id=f"natural_{i}",
            image=render_texture(brightness, energy, size=size, orientation=i * 0.7, phase=i * 1.3),
            category=category,
            label=texture_affect(brightness, energy),
            kind='natural',
        ))
        category += 1

    black = Stimulus(stimulus_id='black', image=black_image(size), category=category, kind='black')
    return StimulusSet(faces=faces, natural=natural, black=black)


@dataclass
class Corpus:
    """RAM training corpus with a held-out split"""
    train: List[Stimulus]
    holdout: List[Stimulus]

    def __len__(self) -> int:
        return len(self.train) + len(self.holdout)

    @staticmethod
    def as_arrays(items: Sequence[Stimulus]) -> Tuple[np.ndarray, np.ndarray]:
        """(N, size, size) images and (N, 2) labels"""
        if not items:
            raise EmptyBatchError("no stimuli")
        images = np.stack([s.image for s in items])
        labels = np.stack([s.label.to_array() for s in items])
        return images, labels


def generate_corpus(size: int, rng: np.random.Generator, noise_level: float = 0.03,
                    holdout_fraction: float = 0.1, face_fraction: float = 0.5,
                    image_size: int = 32) -> Corpus:
    """
    Draw a labelled corpus of faces and textures

    Drawing parameters are uniform in [0, 1]; labels are the fixed maps
    face_affect / texture_affect of those parameters. Pixel noise is
    added after labelling and does not change the label.
    """
    if size <= 0:
        raise EmptyBatchError(f"corpus size must be positive, got {size}")

    items = []
    for i in range(size):
        if rng.random() < face_fraction:
            controls = FaceControls.from_array(rng.random(4))
            variant = int(rng.integers(2))
            contrast = 0.8 + 0.4 * rng.random()
            image = render_face(controls, size=image_size, variant=variant, contrast=contrast)
            label, kind = face_affect(controls), 'corpus_face'
        else:
            brightness, energy = rng.random(2)
            image = render_texture(brightness, energy, size=image_size,
                                   orientation=rng.uniform(0.0, np.pi), phase=rng.uniform(0.0, 2 * np.pi))
            label, kind = texture_affect(brightness, energy), 'corpus_texture'
        if noise_level > 0:
            image = np.clip(image + rng.normal(0.0, noise_level, image.shape), 0.0, 1.0)
        items.append(Stimulus(stimulus_id=f"corpus_{i:05d}", image=image, category=-1,
                              label=label, kind=kind))

    n_holdout = int(round(size * holdout_fraction))
    if size > 1:
        n_holdout = min(max(n_holdout, 1 if holdout_fraction > 0 else 0), size - 1)
    else:
        n_holdout = 0
    order = rng.permutation(size)
    holdout = [items[i] for i in sorted(order[:n_holdout])]
    train = [items[i] for i in sorted(order[n_holdout:])]
    log_event(logger, "corpus_generated", size=size, train=len(train), holdout=len(holdout))
    return Corpus(train=train, holdout=holdout)


def save_stimuli(directory: Union[str, Path], stimuli: Sequence[Stimulus]) -> Path:
    """Raw float64 images + manifest.jsonl"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / MANIFEST_NAME, 'w') as manifest:
        for stimulus in stimuli:
            np.ascontiguousarray(stimulus.image, dtype=np.float64).tofile(
                directory / f"{stimulus.stimulus_id}{IMAGE_SUFFIX}")
            manifest.write(json.dumps(stimulus.manifest_entry()) + '\n')
    return directory


def load_stimuli(directory: Union[str, Path]) -> List[Stimulus]:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.exists():
        raise ReportError(f"no {MANIFEST_NAME} in {directory}")
    stimuli = []
    for line in manifest_path.read_text().splitlines():
        if not line.strip():
            continue
        entry = json.loads(line)
        image = np.fromfile(directory / f"{entry['id']}{IMAGE_SUFFIX}", dtype=np.float64)
        label = None
        if entry.get('valence') is not None:
            label = AffectVector(entry['valence'], entry['arousal'])
        stimuli.append(Stimulus(
            stimulus_id=entry['id'],
            image=image.reshape(entry['shape']),
            category=int(entry['category']),
            label=label,
            controllable=bool(entry['controllable']),
            kind=entry['kind'],
            expression=entry.get('expression'),
        ))
    return stimuli


class ExternalDatasetLoader:
    """
    Hook for licensed affective picture databases

    Implementations yield Stimulus records with ground-truth labels
    rescaled to the 1-9 scale. None ships with the repository.
    """

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def load(self) -> List[Stimulus]:
        raise NotImplementedError("external dataset ingestion is not bundled")
