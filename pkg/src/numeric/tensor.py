"""
Tensor Buffers - Shape + flat row-major float64 values

TensorBuffer is the value type crossing the numeric-core API boundary.
Inside the networks everything is a float64 torch tensor; buffers are
what callers hand in and get back (and what checkpoints store).
"""

from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
import torch

from utils.errors import NonFiniteError

# Networks are tiny; 64-bit keeps gradient checks and determinism exact.
DTYPE = torch.float64
torch.set_default_dtype(DTYPE)

ArrayLike = Union[np.ndarray, torch.Tensor, Sequence[float], float]


@dataclass(frozen=True)
class TensorBuffer:
    """
    Immutable tensor value

    Invariants:
    - every dim in `shape` is positive
    - product(shape) == len(values)
    - all values finite
    """
    shape: Tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        shape = tuple(int(d) for d in self.shape)
        values = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64).reshape(-1))
        if any(d <= 0 for d in shape):
            raise ValueError(f"all dims must be positive, got {shape}")
        if int(np.prod(shape, dtype=np.int64)) != values.size:
            raise ValueError(f"shape {shape} does not hold {values.size} values")
        if not np.all(np.isfinite(values)):
            raise NonFiniteError("TensorBuffer", f"shape {shape}")
        values.setflags(write=False)
        object.__setattr__(self, 'shape', shape)
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_array(cls, array: ArrayLike) -> 'TensorBuffer':
        if isinstance(array, torch.Tensor):
            array = array.detach().cpu().numpy()
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 0:
            array = array.reshape(1)
        return cls(shape=array.shape, values=array.reshape(-1))

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> 'TensorBuffer':
        return cls(shape=tuple(shape), values=np.zeros(int(np.prod(shape))))

    def to_array(self) -> np.ndarray:
        return self.values.reshape(self.shape).copy()

    def to_tensor(self, requires_grad: bool = False) -> torch.Tensor:
        tensor = torch.tensor(self.to_array(), dtype=DTYPE)
        return tensor.requires_grad_(requires_grad)

    @property
    def size(self) -> int:
        return self.values.size

    def __str__(self) -> str:
        return f"TensorBuffer{self.shape}"


def as_tensor(value: ArrayLike) -> torch.Tensor:
    """Anything array-like -> float64 torch tensor (no copy for float64 tensors)"""
    if isinstance(value, TensorBuffer):
        return value.to_tensor()
    if isinstance(value, torch.Tensor):
        return value.to(DTYPE)
    return torch.as_tensor(np.asarray(value, dtype=np.float64))


def all_finite(tensor: torch.Tensor) -> bool:
    return bool(torch.isfinite(tensor).all())
