"""
Adam Optimisation - Bias-corrected Adam with a finite-gradient guard

Two entry points:
- AdamOptimizer: stateful wrapper around torch.optim.Adam used by every
  trained network; rejects NaN/Inf gradients before they touch weights.
- adam_step: functional form (params, grads, AdamState) -> (params, state),
  driven by the same torch implementation.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

import torch

from numeric.tensor import ArrayLike, as_tensor, all_finite
from utils.errors import NonFiniteError, ShapeMismatchError


@dataclass
class AdamState:
    """
    Adam moments and hyperparameters

    Moment buffers are keyed like the parameters they belong to;
    `step` counts completed updates.
    """
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    exp_avg: Dict[str, torch.Tensor] = field(default_factory=dict)
    exp_avg_sq: Dict[str, torch.Tensor] = field(default_factory=dict)


def check_finite_gradients(named_grads: Iterable[Tuple[str, Optional[torch.Tensor]]]) -> None:
    for name, grad in named_grads:
        if grad is not None and not all_finite(grad):
            raise NonFiniteError("gradients", f"parameter '{name}'")


def adam_step(
    params: Dict[str, ArrayLike],
    grads: Dict[str, ArrayLike],
    state: AdamState,
) -> Tuple[Dict[str, torch.Tensor], AdamState]:
    """
    One Adam update on plain tensors

    Returns new parameter tensors and a new AdamState (inputs are not
    mutated). Raises NonFiniteError on NaN/Inf gradients.
    """
    names = list(params.keys())
    tensors = {name: as_tensor(params[name]).detach().clone() for name in names}
    grad_tensors = {name: as_tensor(grads[name]) for name in names}
    for name in names:
        if grad_tensors[name].shape != tensors[name].shape:
            raise ShapeMismatchError(tensors[name].shape, grad_tensors[name].shape,
                                     where=f"gradient for '{name}'")
    check_finite_gradients(grad_tensors.items())

    leaves = [torch.nn.Parameter(tensors[name]) for name in names]
    optimizer = torch.optim.Adam(leaves, lr=state.lr, betas=(state.beta1, state.beta2), eps=state.eps)
    for name, leaf in zip(names, leaves):
        leaf.grad = grad_tensors[name].clone()
        if state.step > 0 and name in state.exp_avg:
            optimizer.state[leaf] = {
                'step': torch.tensor(float(state.step)),
                'exp_avg': state.exp_avg[name].clone(),
                'exp_avg_sq': state.exp_avg_sq[name].clone(),
            }
    optimizer.step()

    new_state = AdamState(lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps,
                          step=state.step + 1)
    for name, leaf in zip(names, leaves):
        moments = optimizer.state[leaf]
        new_state.exp_avg[name] = moments['exp_avg'].clone()
        new_state.exp_avg_sq[name] = moments['exp_avg_sq'].clone()
    return {name: leaf.detach() for name, leaf in zip(names, leaves)}, new_state


class AdamOptimizer:
    """
    torch.optim.Adam over a module's parameters, with finite-gradient checks

    Call `zero_grad()`, backpropagate a loss, then `step()`.
    """

    def __init__(self, module: torch.nn.Module, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.module = module
        self.optimizer = torch.optim.Adam(module.parameters(), lr=lr, betas=(beta1, beta2), eps=eps)

    def zero_grad(self) -> None:
        self.optimizer.zero_grad(set_to_none=True)

    def step(self) -> None:
        check_finite_gradients((name, p.grad) for name, p in self.module.named_parameters())
        self.optimizer.step()

    def minimize(self, loss: torch.Tensor) -> float:
        """zero_grad + backward + step; returns the loss value"""
        self.zero_grad()
        loss.backward()
        self.step()
        return float(loss.detach())

    @property
    def steps_taken(self) -> int:
        states = list(self.optimizer.state.values())
        if not states:
            return 0
        return int(float(states[0]['step']))

    def state_dict(self) -> dict:
        return self.optimizer.state_dict()

    def load_state_dict(self, state: dict) -> None:
        self.optimizer.load_state_dict(state)
