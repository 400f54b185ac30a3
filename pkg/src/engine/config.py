"""
Configuration Manager - Unified, validated run configuration

One RunConfig covers every module's hyperparameters. Sections are
pydantic models that reject unknown keys, so a typo in a config file
fails loudly with its dotted key path instead of silently running with
defaults.

Layering (lowest to highest precedence):
    defaults < config file < EMOTION__SECTION__KEY env vars < overrides
Config files are JSON, or line-oriented `section.key=value` text.
"""

from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Mapping, Optional, Union
import json
import os

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from utils.errors import ConfigError

ENV_PREFIX = 'EMOTION__'


class Section(BaseModel):
    model_config = ConfigDict(extra='forbid', validate_assignment=True)


class RamSettings(Section):
    """Recurrent attention model (first layer)"""
    image_size: int = Field(32, ge=4)
    patch_size: int = Field(8, ge=2)
    num_scales: int = Field(3, ge=1)
    scale_factor: int = Field(2, ge=1)
    num_glimpses: int = Field(6, ge=1)
    glimpse_hidden: int = Field(128, ge=1)
    location_hidden: int = Field(128, ge=1)
    hidden_size: int = Field(128, ge=1)
    location_std: float = Field(0.15, ge=0.0)
    reward_tolerance: float = Field(0.5, gt=0.0)
    learning_rate: float = Field(1e-3, gt=0.0)
    batch_size: int = Field(32, ge=1)
    epochs: int = Field(50, ge=0)

    @model_validator(mode='after')
    def _patch_fits(self) -> 'RamSettings':
        if self.patch_size % 2 != 0:
            raise ValueError('patch_size must be even')
        if self.patch_size > self.image_size:
            raise ValueError('patch_size must not exceed image_size')
        return self


class CorpusSettings(Section):
    """Synthetic stimulus corpus used to train the RAM"""
    size: int = Field(2000, ge=0)
    noise_level: float = Field(0.03, ge=0.0)
    holdout_fraction: float = Field(0.1, ge=0.0, lt=1.0)
    face_fraction: float = Field(0.5, ge=0.0, le=1.0)


class MemorySettings(Section):
    """Second layer (compensation table)"""
    gamma: float = Field(0.1, gt=0.0)


class AppraisalSettings(Section):
    """Internal appraisal (fatigue accumulators)"""
    tau: float = Field(50.0, gt=0.0)
    eta: float = Field(0.01, ge=0.0)
    d_eyelid: float = Field(50.0, ge=0.0)
    d_sad: float = Field(75.0, ge=0.0)
    ia_mode: Literal['add', 'subtract'] = 'add'

    @model_validator(mode='after')
    def _distinct_recovery(self) -> 'AppraisalSettings':
        # equal recovery amounts make sleeping and showing sadness indistinguishable
        if self.d_eyelid == self.d_sad:
            raise ValueError('d_eyelid and d_sad must differ')
        return self


class PredictorSettings(Section):
    """Two-layer convolutional LSTM"""
    hidden_channels: int = Field(5, ge=1)
    kernel_size: int = Field(5, ge=1)
    num_layers: int = Field(2, ge=1)
    learning_rate: float = Field(1e-3, gt=0.0)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    bptt_length: int = Field(20, ge=1)
    train_iterations: int = Field(5, ge=1)
    interoception_min: float = 1.0
    interoception_max: float = 13.0

    @model_validator(mode='after')
    def _checks(self) -> 'PredictorSettings':
        if self.kernel_size % 2 == 0:
            raise ValueError('kernel_size must be odd')
        if self.interoception_max <= self.interoception_min:
            raise ValueError('interoception_max must exceed interoception_min')
        return self


class DdpgSettings(Section):
    """Actor-critic decision making"""
    actor_hidden: List[int] = Field(default_factory=lambda: [128, 64, 32])
    critic_hidden: List[int] = Field(default_factory=lambda: [128, 64])
    actor_lr: float = Field(1e-4, gt=0.0)
    critic_lr: float = Field(1e-3, gt=0.0)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    gamma: float = Field(0.99, ge=0.0, le=1.0)
    zeta: float = Field(0.001, gt=0.0, le=1.0)
    buffer_size: int = Field(500, ge=1)
    batch_size: int = Field(200, ge=1)
    warmup: int = Field(200, ge=1)
    ou_theta: float = Field(0.15, ge=0.0)
    ou_sigma: float = Field(0.2, ge=0.0)
    ou_dt: float = Field(1.0, gt=0.0)
    state_image_size: int = Field(16, ge=1)
    batch_norm: bool = True
    reward_scale: float = Field(0.01, gt=0.0)

    @field_validator('actor_hidden', 'critic_hidden')
    @classmethod
    def _non_empty(cls, sizes: List[int]) -> List[int]:
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError('hidden sizes must be a non-empty list of positive ints')
        return sizes


class HomeostasisSettings(Section):
    """Mood and reward"""
    constant: float = 40.0
    midpoint: List[float] = Field(default_factory=lambda: [5.0, 5.0])
    window: int = Field(1000, ge=1)

    @field_validator('midpoint')
    @classmethod
    def _two_components(cls, value: List[float]) -> List[float]:
        if len(value) != 2:
            raise ValueError('midpoint needs (valence, arousal)')
        return value


class EnvironmentSettings(Section):
    """Mother-infant mirroring world"""
    condition: Literal['face_only', 'face_plus_natural'] = 'face_only'
    natural_probability: float = Field(0.5, ge=0.0, le=1.0)
    num_natural: int = Field(8, ge=1)
    image_size: int = Field(32, ge=8)
    eyelid_closed_threshold: float = Field(0.25, ge=0.0, le=1.0)
    action_cost_scale: float = Field(0.5, ge=0.0)


class RunSettings(Section):
    """Interaction loop cadences and bookkeeping"""
    epochs: int = Field(20000, ge=0)
    t_lstm: int = Field(100, ge=1)
    t_l2: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0)
    with_second_layer: bool = True
    checkpoint_every: int = Field(5000, ge=1)
    evaluation_epochs: int = Field(0, ge=0)
    ram_checkpoint: Optional[str] = None
    num_threads: int = Field(1, ge=1)


class RunConfig(Section):
    """
    Complete run configuration

    Combines every module's settings into one validated document
    """
    ram: RamSettings = Field(default_factory=RamSettings)
    corpus: CorpusSettings = Field(default_factory=CorpusSettings)
    memory: MemorySettings = Field(default_factory=MemorySettings)
    appraisal: AppraisalSettings = Field(default_factory=AppraisalSettings)
    predictor: PredictorSettings = Field(default_factory=PredictorSettings)
    ddpg: DdpgSettings = Field(default_factory=DdpgSettings)
    homeostasis: HomeostasisSettings = Field(default_factory=HomeostasisSettings)
    environment: EnvironmentSettings = Field(default_factory=EnvironmentSettings)
    run: RunSettings = Field(default_factory=RunSettings)

    @model_validator(mode='after')
    def _cross_checks(self) -> 'RunConfig':
        if self.run.t_l2 % self.run.t_lstm != 0:
            raise ValueError('run.t_l2 must be a multiple of run.t_lstm')
        if self.ram.image_size != self.environment.image_size:
            raise ValueError('ram.image_size must equal environment.image_size')
        if self.environment.image_size % self.ddpg.state_image_size != 0:
            raise ValueError('ddpg.state_image_size must divide environment.image_size')
        return self

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'RunConfig':
        """Create from (possibly partial) nested dictionary"""
        try:
            return cls.model_validate(dict(data))
        except ValidationError as exc:
            raise _config_error(exc) from exc

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode='json')

    @classmethod
    def from_json_file(cls, filepath: Union[str, Path]) -> 'RunConfig':
        """Load configuration from JSON file"""
        return cls.from_dict(_read_document(Path(filepath)))

    def to_json_file(self, filepath: Union[str, Path]) -> Path:
        path = Path(filepath)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n')
        return path

    def to_lines(self) -> List[str]:
        """Flat `section.key=value` lines (values JSON encoded)"""
        lines = []
        for section, values in self.to_dict().items():
            for key, value in values.items():
                lines.append(f"{section}.{key}={json.dumps(value)}")
        return lines

    def with_overrides(self, overrides: Mapping[str, Any]) -> 'RunConfig':
        document = self.to_dict()
        for key_path, value in overrides.items():
            _set_path(document, key_path, value)
        return RunConfig.from_dict(document)

    def __str__(self) -> str:
        run, env = self.run, self.environment
        second = 'on' if run.with_second_layer else 'off'
        return "\n".join([
            "Run Configuration:",
            f"  Condition: {env.condition} (second layer {second})",
            f"  Epochs: {run.epochs} (+{run.evaluation_epochs} evaluation), seed {run.seed}",
            f"  Cadences: T_LSTM={run.t_lstm}, T_L2={run.t_l2}",
            f"  Reward: C={self.homeostasis.constant}, mood window {self.homeostasis.window}",
            f"  RAM checkpoint: {run.ram_checkpoint or '(none)'}",
        ])


def _config_error(exc: ValidationError) -> ConfigError:
    first = exc.errors()[0]
    key_path = '.'.join(str(part) for part in first.get('loc', ()))
    return ConfigError(key_path, first.get('msg', 'invalid value'))


def parse_value(text: str) -> Any:
    """JSON literal if it parses (numbers, bools, lists, quoted strings), else the raw string"""
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_assignment(line: str) -> tuple:
    if '=' not in line:
        raise ConfigError(line.strip(), "expected 'section.key=value'")
    key, value = line.split('=', 1)
    return key.strip(), parse_value(value)


def _set_path(document: Dict[str, Any], key_path: str, value: Any) -> None:
    parts = [p for p in key_path.split('.') if p]
    if not parts:
        raise ConfigError(key_path, 'empty key')
    node = document
    for i, part in enumerate(parts[:-1]):
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError('.'.join(parts[:i + 1]), 'is a value, not a section')
        node = child
    node[parts[-1]] = value


def _deep_merge(base: Dict[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(base.get(key), dict):
            _deep_merge(base[key], value)
        else:
            base[key] = value
    return base


def _read_document(path: Path) -> Dict[str, Any]:
    if not path.exists():
        raise ConfigError(str(path), 'config file not found')
    text = path.read_text()
    if path.suffix.lower() == '.json':
        if not text.strip():
            return {}
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(str(path), f'not valid JSON: {exc}') from exc
        if not isinstance(data, dict):
            raise ConfigError(str(path), 'top level must be an object')
        return data
    document: Dict[str, Any] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        key, value = parse_assignment(line)
        _set_path(document, key, value)
    return document


def env_overrides(environ: Mapping[str, str], prefix: str = ENV_PREFIX) -> Dict[str, Any]:
    """EMOTION__DDPG__GAMMA=0.5 -> {'ddpg.gamma': 0.5}"""
    overrides = {}
    for name, value in environ.items():
        if name.startswith(prefix):
            key_path = '.'.join(part.lower() for part in name[len(prefix):].split('__'))
            overrides[key_path] = parse_value(value)
    return overrides


def load_config(
    filepath: Optional[Union[str, Path]] = None,
    overrides: Optional[Union[Mapping[str, Any], Iterable[str]]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """
    Build a RunConfig from defaults, a file, env vars and overrides

    Args:
        filepath: JSON or key=value config file (optional)
        overrides: {'section.key': value} or ['section.key=value', ...]
        environ: environment mapping (default: os.environ)
    """
    document = RunConfig().to_dict()
    if filepath is not None:
        _deep_merge(document, _read_document(Path(filepath)))

    environ = os.environ if environ is None else environ
    for key_path, value in env_overrides(environ).items():
        _set_path(document, key_path, value)

    if overrides:
        if isinstance(overrides, Mapping):
            items = overrides.items()
        else:
            items = [parse_assignment(line) for line in overrides]
        for key_path, value in items:
            _set_path(document, key_path, value)

    return RunConfig.from_dict(document)
