"""
Gradient Checks - Analytic (autograd) vs. central finite differences

Used as the test oracle for every trainable piece of the model. The
report lists, per parameter block (plus the input), the largest
relative error between the two gradient estimates.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import torch
from torch import nn

LossFn = Callable[[torch.Tensor], torch.Tensor]

INPUT_BLOCK = 'input'


def mse_to(target: torch.Tensor) -> LossFn:
    """Loss closure: mean squared error of the network output against target"""
    def loss(output: torch.Tensor) -> torch.Tensor:
        return ((output - target) ** 2).mean()
    return loss


def sum_of_outputs(output: torch.Tensor) -> torch.Tensor:
    return output.sum()


@dataclass
class GradientCheckReport:
    """Max relative error per block; passed iff every block is under tolerance"""
    tolerance: float
    max_relative_error: Dict[str, float] = field(default_factory=dict)

    @property
    def worst(self) -> float:
        return max(self.max_relative_error.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.worst < self.tolerance

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [f"Gradient check {status} (tolerance {self.tolerance:g})"]
        for name, err in self.max_relative_error.items():
            lines.append(f"  {name}: {err:.3e}")
        return "\n".join(lines)


def relative_error(analytic: torch.Tensor, numeric: torch.Tensor, floor: float = 1e-6) -> float:
    """max |a - n| / max(|a| + |n|, floor); the floor keeps near-zero gradients from blowing up"""
    if analytic.numel() == 0:
        return 0.0
    denom = torch.clamp(analytic.abs() + numeric.abs(), min=floor)
    return float(((analytic - numeric).abs() / denom).max())


def analytic_gradients(network: nn.Module, inputs: torch.Tensor, loss_fn: LossFn) -> Dict[str, torch.Tensor]:
    x = inputs.detach().clone().requires_grad_(True)
    params = dict(network.named_parameters())
    loss = loss_fn(network(x))
    grads = torch.autograd.grad(loss, [x] + list(params.values()), allow_unused=True)
    result = {INPUT_BLOCK: grads[0]}
    for (name, param), grad in zip(params.items(), grads[1:]):
        result[name] = grad if grad is not None else torch.zeros_like(param)
    return result


def numeric_gradients(network: nn.Module, inputs: torch.Tensor, loss_fn: LossFn,
                      epsilon: float = 1e-5) -> Dict[str, torch.Tensor]:
    """Central differences, one coordinate at a time"""
    x = inputs.detach().clone()

    def evaluate() -> float:
        return float(loss_fn(network(x)))

    def perturb(tensor: torch.Tensor) -> torch.Tensor:
        grad = torch.zeros_like(tensor)
        flat, flat_grad = tensor.view(-1), grad.view(-1)
        for i in range(flat.numel()):
            original = float(flat[i])
            flat[i] = original + epsilon
            plus = evaluate()
            flat[i] = original - epsilon
            minus = evaluate()
            flat[i] = original
            flat_grad[i] = (plus - minus) / (2.0 * epsilon)
        return grad

    with torch.no_grad():
        result = {INPUT_BLOCK: perturb(x)}
        for name, param in network.named_parameters():
            result[name] = perturb(param.data)
    return result


def compare_gradients(analytic: Dict[str, torch.Tensor], numeric: Dict[str, torch.Tensor],
                      tolerance: float = 1e-4) -> GradientCheckReport:
    report = GradientCheckReport(tolerance=tolerance)
    for name, grad in analytic.items():
        report.max_relative_error[name] = relative_error(grad, numeric[name])
    return report


def finite_difference_check(
    network: nn.Module,
    inputs: torch.Tensor,
    tolerance: float = 1e-4,
    loss_fn: Optional[LossFn] = None,
    epsilon: float = 1e-5,
) -> GradientCheckReport:
    """
    Compare autograd gradients against central finite differences

    Args:
        network: module to check (its current train/eval mode is used)
        inputs: batch fed to the network
        tolerance: pass threshold on the max relative error
        loss_fn: scalar loss of the network output (default: sum of outputs)
        epsilon: finite-difference step
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    loss_fn = loss_fn or sum_of_outputs
    analytic = analytic_gradients(network, inputs, loss_fn)
    numeric = numeric_gradients(network, inputs, loss_fn, epsilon)
    return compare_gradients(analytic, numeric, tolerance)
