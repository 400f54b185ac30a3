"""
Numeric Core - Small float64 network substrate

- TensorBuffer value type at the API boundary
- LayerSpec -> torch modules (dense, conv2d, activations, batchnorm)
- Layer forward/backward, Adam with finite-gradient guard
- Finite-difference gradient checks
- HDF5 checkpoint container
"""

from .tensor import TensorBuffer, DTYPE, as_tensor
from .layers import (
    LayerSpec,
    Layer,
    build_module,
    build_network,
    dense_stack,
    init_uniform_,
    zero_parameters_,
)
from .optim import AdamState, AdamOptimizer, adam_step
from .gradcheck import GradientCheckReport, finite_difference_check, compare_gradients, mse_to
from .checkpoint import Container, save_container, load_container, FORMAT_VERSION

__all__ = [
    'TensorBuffer',
    'DTYPE',
    'as_tensor',
    'LayerSpec',
    'Layer',
    'build_module',
    'build_network',
    'dense_stack',
    'init_uniform_',
    'zero_parameters_',
    'AdamState',
    'AdamOptimizer',
    'adam_step',
    'GradientCheckReport',
    'finite_difference_check',
    'compare_gradients',
    'mse_to',
    'Container',
    'save_container',
    'load_container',
    'FORMAT_VERSION',
]
