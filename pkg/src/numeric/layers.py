"""
Layers - Declarative layer specs and their torch realisations

A LayerSpec states what a layer is (kind, per-sample in/out shapes,
kernel size); `build_module` turns it into a torch module and
`build_network` chains specs into an nn.Sequential after checking that
consecutive shapes agree. `Layer` wraps a single module with an explicit
forward/backward API on TensorBuffers (used by gradient checks and tests).

Layer sizes are configuration: every network in the model (RAM, actor,
critic, predictor head) is assembled from these specs.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple
import math

import torch
from torch import nn

from numeric.tensor import DTYPE, TensorBuffer
from utils.errors import ShapeMismatchError, StateError

LAYER_KINDS = ('dense', 'conv2d', 'sigmoid', 'tanh', 'relu', 'batchnorm')

# running <- 0.9 * running + 0.1 * batch  (torch's momentum is the batch weight)
BATCHNORM_MOMENTUM = 0.1


@dataclass(frozen=True)
class LayerSpec:
    """
    One layer of a network

    Shapes are per sample (no batch dim):
    - dense:      (n_in,) -> (n_out,)
    - conv2d:     (c_in, h, w) -> (c_out, h, w) with "same" padding,
                  (c_out, h-k+1, w-k+1) with "valid"
    - activations and batchnorm: shape preserving
    """
    kind: str
    in_shape: Tuple[int, ...]
    out_shape: Tuple[int, ...]
    kernel_size: Optional[int] = None
    padding: str = 'same'
    eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, 'in_shape', tuple(int(d) for d in self.in_shape))
        object.__setattr__(self, 'out_shape', tuple(int(d) for d in self.out_shape))
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind '{self.kind}', expected one of {LAYER_KINDS}")
        expected = self._expected_out_shape()
        if expected != self.out_shape:
            raise ShapeMismatchError(expected, self.out_shape, where=f"{self.kind} out_shape")

    def _expected_out_shape(self) -> Tuple[int, ...]:
        if self.kind == 'dense':
            if len(self.in_shape) != 1 or len(self.out_shape) != 1:
                raise ValueError("dense layers take 1-D per-sample shapes")
            return self.out_shape
        if self.kind == 'conv2d':
            if len(self.in_shape) != 3 or len(self.out_shape) != 3:
                raise ValueError("conv2d layers take (channels, height, width) shapes")
            if self.kernel_size is None or self.kernel_size < 1:
                raise ValueError("conv2d needs a positive kernel_size")
            if self.padding == 'same':
                if self.kernel_size % 2 == 0:
                    raise ValueError("'same' padding needs an odd kernel_size")
                return (self.out_shape[0], self.in_shape[1], self.in_shape[2])
            if self.padding == 'valid':
                k = self.kernel_size
                return (self.out_shape[0], self.in_shape[1] - k + 1, self.in_shape[2] - k + 1)
            raise ValueError(f"unknown padding '{self.padding}'")
        if self.kind == 'batchnorm' and len(self.in_shape) not in (1, 3):
            raise ValueError("batchnorm takes (features,) or (channels, height, width)")
        return self.in_shape

    # Convenience constructors

    @classmethod
    def dense(cls, n_in: int, n_out: int) -> 'LayerSpec':
        return cls('dense', (n_in,), (n_out,))

    @classmethod
    def conv2d(cls, c_in: int, c_out: int, height: int, width: int,
               kernel_size: int = 3, padding: str = 'same') -> 'LayerSpec':
        if padding == 'same':
            out = (c_out, height, width)
        else:
            out = (c_out, height - kernel_size + 1, width - kernel_size + 1)
        return cls('conv2d', (c_in, height, width), out, kernel_size=kernel_size, padding=padding)

    @classmethod
    def activation(cls, kind: str, shape: Sequence[int]) -> 'LayerSpec':
        return cls(kind, tuple(shape), tuple(shape))

    @classmethod
    def batchnorm(cls, shape: Sequence[int], eps: float = 1e-5) -> 'LayerSpec':
        shape = tuple(shape) if not isinstance(shape, int) else (shape,)
        return cls('batchnorm', shape, shape, eps=eps)

    @property
    def fan_in(self) -> int:
        if self.kind == 'dense':
            return self.in_shape[0]
        if self.kind == 'conv2d':
            return self.in_shape[0] * self.kernel_size * self.kernel_size
        return 0


def init_uniform_(tensor: torch.Tensor, fan_in: int, generator: Optional[torch.Generator] = None) -> None:
    """Uniform in +-1/sqrt(fan_in), in place"""
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    with torch.no_grad():
        tensor.uniform_(-bound, bound, generator=generator)


def build_module(spec: LayerSpec, generator: Optional[torch.Generator] = None) -> nn.Module:
    """Realise one LayerSpec as an initialised float64 torch module"""
    if spec.kind == 'dense':
        module = nn.Linear(spec.in_shape[0], spec.out_shape[0], dtype=DTYPE)
    elif spec.kind == 'conv2d':
        pad = spec.kernel_size // 2 if spec.padding == 'same' else 0
        module = nn.Conv2d(spec.in_shape[0], spec.out_shape[0], spec.kernel_size,
                           padding=pad, dtype=DTYPE)
    elif spec.kind == 'sigmoid':
        return nn.Sigmoid()
    elif spec.kind == 'tanh':
        return nn.Tanh()
    elif spec.kind == 'relu':
        return nn.ReLU()
    else:
        norm = nn.BatchNorm1d if len(spec.in_shape) == 1 else nn.BatchNorm2d
        return norm(spec.in_shape[0], eps=spec.eps, momentum=BATCHNORM_MOMENTUM, dtype=DTYPE)

    init_uniform_(module.weight, spec.fan_in, generator)
    init_uniform_(module.bias, spec.fan_in, generator)
    return module


def build_network(specs: Sequence[LayerSpec], generator: Optional[torch.Generator] = None) -> nn.Sequential:
    """Chain specs into an nn.Sequential, rejecting shape breaks between layers"""
    specs = list(specs)
    for i in range(1, len(specs)):
        if specs[i - 1].out_shape != specs[i].in_shape:
            raise ShapeMismatchError(specs[i].in_shape, specs[i - 1].out_shape,
                                     where=f"layer {i} ({specs[i].kind}) input")
    return nn.Sequential(*[build_module(spec, generator) for spec in specs])


def dense_stack(sizes: Sequence[int], activation: str = 'relu', batch_norm: bool = False,
                final_activation: Optional[str] = None) -> List[LayerSpec]:
    """
    Specs for an MLP: dense -> [batchnorm] -> activation for every hidden
    size, then a final dense layer with an optional output activation
    """
    specs: List[LayerSpec] = []
    for n_in, n_out in zip(sizes[:-2], sizes[1:-1]):
        specs.append(LayerSpec.dense(n_in, n_out))
        if batch_norm:
            specs.append(LayerSpec.batchnorm(n_out))
        specs.append(LayerSpec.activation(activation, (n_out,)))
    specs.append(LayerSpec.dense(sizes[-2], sizes[-1]))
    if final_activation:
        specs.append(LayerSpec.activation(final_activation, (sizes[-1],)))
    return specs


def zero_parameters_(module: nn.Module) -> nn.Module:
    """Set every trainable parameter to zero (used for closed-form checks)"""
    with torch.no_grad():
        for param in module.parameters():
            param.zero_()
    return module


class Layer:
    """
    Single layer with explicit forward/backward

    forward caches the input and output; backward returns the gradient
    with respect to the input and every parameter for a given upstream
    gradient, computed by torch's reverse-mode autograd.
    """

    def __init__(self, spec: LayerSpec, generator: Optional[torch.Generator] = None,
                 module: Optional[nn.Module] = None):
        self.spec = spec
        self.module = module if module is not None else build_module(spec, generator)
        self._input: Optional[torch.Tensor] = None
        self._output: Optional[torch.Tensor] = None
        self._batched = True

    def train(self, mode: bool = True) -> 'Layer':
        self.module.train(mode)
        return self

    def eval(self) -> 'Layer':
        return self.train(False)

    def parameters(self) -> Dict[str, torch.Tensor]:
        return dict(self.module.named_parameters())

    def _to_batched(self, tensor: torch.Tensor) -> torch.Tensor:
        shape = tuple(tensor.shape)
        if shape == self.spec.in_shape:
            self._batched = False
            return tensor.unsqueeze(0)
        if shape[1:] == self.spec.in_shape:
            self._batched = True
            return tensor
        raise ShapeMismatchError(self.spec.in_shape, shape, where=f"{self.spec.kind} forward")

    def forward(self, inputs: TensorBuffer) -> TensorBuffer:
        x = self._to_batched(inputs.to_tensor()).requires_grad_(True)
        y = self.module(x)
        self._input, self._output = x, y
        out = y if self._batched else y.squeeze(0)
        return TensorBuffer.from_array(out)

    def backward(self, upstream: TensorBuffer) -> Tuple[TensorBuffer, Dict[str, TensorBuffer]]:
        if self._output is None:
            raise StateError(f"{self.spec.kind}.backward called before forward")
        grad_out = upstream.to_tensor()
        if not self._batched:
            grad_out = grad_out.unsqueeze(0)
        if tuple(grad_out.shape) != tuple(self._output.shape):
            raise ShapeMismatchError(self._output.shape, grad_out.shape,
                                     where=f"{self.spec.kind} backward upstream")
        names = list(self.parameters().keys())
        targets = [self._input] + list(self.parameters().values())
        grads = torch.autograd.grad(self._output, targets, grad_outputs=grad_out,
                                    retain_graph=True, allow_unused=True)
        input_grad = grads[0] if self._batched else grads[0].squeeze(0)
        param_grads = {}
        for name, param, grad in zip(names, targets[1:], grads[1:]):
            param_grads[name] = TensorBuffer.from_array(
                grad if grad is not None else torch.zeros_like(param))
        return TensorBuffer.from_array(input_grad), param_grads
