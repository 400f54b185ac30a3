"""
Checkpoint Container - HDF5 files of named parameter blocks

Layout:
    /                      attrs: format_version, kind, metadata (JSON)
    /<group>/<group>/...   nested groups mirroring the nested dict
    /<...>/<name>          datasets (float64 / int64 arrays, 0-d scalars, strings)

Writes go to a temporary file first and are moved into place, and
loads read everything into memory before returning, so a failed write
or a corrupt file never yields half a state.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union
import json
import os

import h5py
import numpy as np
import torch

from utils.errors import CheckpointError

FORMAT_VERSION = 1

Blocks = Dict[str, Any]
PathLike = Union[str, Path]


@dataclass
class Container:
    """In-memory image of one checkpoint file"""
    kind: str
    blocks: Blocks = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION


def _to_storable(value: Any) -> Any:
    if isinstance(value, torch.Tensor):
        return value.detach().cpu().numpy()
    if isinstance(value, (bool, np.bool_)):
        return np.asarray(int(value), dtype=np.int64)
    if isinstance(value, (int, np.integer)):
        return np.asarray(value, dtype=np.int64)
    if isinstance(value, (float, np.floating)):
        return np.asarray(value, dtype=np.float64)
    return value


def _write_group(group: h5py.Group, blocks: Blocks) -> None:
    for name, value in blocks.items():
        if '/' in name:
            raise CheckpointError(f"block name '{name}' may not contain '/'")
        if isinstance(value, dict):
            _write_group(group.create_group(name), value)
        elif isinstance(value, str):
            group.create_dataset(name, data=value, dtype=h5py.string_dtype())
        else:
            group.create_dataset(name, data=np.asarray(_to_storable(value)))


def _read_group(group: h5py.Group) -> Blocks:
    blocks: Blocks = {}
    for name, item in group.items():
        if isinstance(item, h5py.Group):
            blocks[name] = _read_group(item)
        elif h5py.check_string_dtype(item.dtype) is not None:
            blocks[name] = item.asstr()[()]
        else:
            blocks[name] = np.array(item[()])
    return blocks


def save_container(path: PathLike, container: Container) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + '.tmp')
    try:
        with h5py.File(tmp_path, 'w') as handle:
            handle.attrs['format_version'] = container.format_version
            handle.attrs['kind'] = container.kind
            handle.attrs['metadata'] = json.dumps(container.metadata, sort_keys=True)
            _write_group(handle, container.blocks)
        os.replace(tmp_path, path)
    except (OSError, TypeError, ValueError) as exc:
        if tmp_path.exists():
            tmp_path.unlink()
        raise CheckpointError(f"could not write checkpoint {path}: {exc}") from exc
    return path


def load_container(path: PathLike, expected_kind: Optional[str] = None) -> Container:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with h5py.File(path, 'r') as handle:
            version = int(handle.attrs['format_version'])
            kind = str(handle.attrs['kind'])
            metadata = json.loads(handle.attrs['metadata'])
            if version != FORMAT_VERSION:
                raise CheckpointError(
                    f"{path}: format version {version}, this build reads {FORMAT_VERSION}")
            blocks = _read_group(handle)
    except CheckpointError:
        raise
    except (OSError, KeyError, ValueError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc
    if expected_kind is not None and kind != expected_kind:
        raise CheckpointError(f"{path}: expected a '{expected_kind}' checkpoint, found '{kind}'")
    return Container(kind=kind, blocks=blocks, metadata=metadata, format_version=version)


# Torch helpers

def module_blocks(module: torch.nn.Module) -> Blocks:
    """state_dict (parameters + buffers such as batch-norm running stats) as arrays"""
    return {name: tensor.detach().cpu().numpy().copy() for name, tensor in module.state_dict().items()}


def load_module_blocks(module: torch.nn.Module, blocks: Blocks) -> None:
    try:
        module.load_state_dict({name: torch.from_numpy(np.array(value)) for name, value in blocks.items()})
    except (RuntimeError, KeyError) as exc:
        raise CheckpointError(f"parameter blocks do not fit {type(module).__name__}: {exc}") from exc


def optimizer_blocks(optimizer: torch.optim.Optimizer) -> Blocks:
    state = optimizer.state_dict()
    per_param = {}
    for index, values in state['state'].items():
        per_param[str(index)] = {key: _to_storable(value) for key, value in values.items()}
    return {'state': per_param, 'param_groups': json.dumps(state['param_groups'])}


def load_optimizer_blocks(optimizer: torch.optim.Optimizer, blocks: Blocks) -> None:
    state = {}
    for index, values in blocks.get('state', {}).items():
        state[int(index)] = {key: torch.from_numpy(np.array(value)) for key, value in values.items()}
    try:
        optimizer.load_state_dict({'state': state, 'param_groups': json.loads(blocks['param_groups'])})
    except (ValueError, KeyError) as exc:
        raise CheckpointError(f"optimizer state does not fit: {exc}") from exc


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return [int(v) for v in value.reshape(-1)]
    return int(value)


def rng_blocks(generator: np.random.Generator) -> str:
    """Bit-generator state as JSON (numpy arrays become int lists)"""
    return json.dumps(generator.bit_generator.state, default=_json_default)


def load_rng_blocks(generator: np.random.Generator, text: str) -> None:
    state = json.loads(text)
    inner = state.get('state', {})
    for key, value in list(inner.items()):
        if isinstance(value, list):
            inner[key] = np.array(value, dtype=np.uint64)
    if isinstance(state.get('buffer'), list):
        state['buffer'] = np.array(state['buffer'], dtype=np.uint64)
    generator.bit_generator.state = state
