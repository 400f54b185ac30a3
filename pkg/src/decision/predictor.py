"""
ConvLSTM Predictor - Next image and next interoception

Two stacked convolutional LSTM layers with peephole connections:

    i_t = sigmoid(W_xi * X_t + W_hi * H_{t-1} + W_ci o C_{t-1} + b_i)
    f_t = sigmoid(W_xf * X_t + W_hf * H_{t-1} + W_cf o C_{t-1} + b_f)
    C_t = f_t o C_{t-1} + i_t o tanh(W_xc * X_t + W_hc * H_{t-1} + b_c)
    o_t = sigmoid(W_xo * X_t + W_ho * H_{t-1} + W_co o C_t + b_o)
    H_t = o_t o tanh(C_t)

(* convolution, o elementwise product). The input is the image plus two
constant channels carrying the min-max scaled interoception. Heads read
the top layer's H_t: a 1x1 conv + sigmoid for the image, and a dense
layer on the spatially averaged H_t for the scaled interoception.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from appraisal.affect import AffectVector
from numeric.layers import LayerSpec, build_network, dense_stack, init_uniform_
from numeric.optim import AdamOptimizer
from numeric.tensor import as_tensor
from utils.errors import EmptyBatchError, ShapeMismatchError

GATES = ('i', 'f', 'c', 'o')
PEEPHOLE_GATES = ('i', 'f', 'o')


@dataclass
class PredictorState:
    """Per-layer (H, C) maps, each (B, hidden, S, S)"""
    hidden: List[torch.Tensor]
    cell: List[torch.Tensor]

    def detach(self) -> 'PredictorState':
        return PredictorState([h.detach() for h in self.hidden], [c.detach() for c in self.cell])

    def to_blocks(self) -> Dict[str, np.ndarray]:
        blocks = {}
        for n, (h, c) in enumerate(zip(self.hidden, self.cell)):
            blocks[f"H{n}"] = h.detach().numpy().copy()
            blocks[f"C{n}"] = c.detach().numpy().copy()
        return blocks

    @classmethod
    def from_blocks(cls, blocks: Dict[str, np.ndarray]) -> 'PredictorState':
        layers = len([k for k in blocks if k.startswith('H')])
        return cls([torch.from_numpy(np.array(blocks[f"H{n}"])) for n in range(layers)],
                   [torch.from_numpy(np.array(blocks[f"C{n}"])) for n in range(layers)])


class ConvLstmCell(nn.Module):
    """
    One peephole ConvLSTM layer with separately named weights

    W_x* and W_h* are same-padded convolutions, W_c* per-pixel peephole
    maps, b_* per-channel biases.
    """

    def __init__(self, in_channels: int, hidden_channels: int, height: int, width: int,
                 kernel_size: int = 5, generator: Optional[torch.Generator] = None):
        super().__init__()
        self.in_channels = in_channels
        self.hidden_channels = hidden_channels
        self.height, self.width = height, width
        self.kernel_size = kernel_size

        x_spec = LayerSpec.conv2d(in_channels, hidden_channels, height, width, kernel_size)
        h_spec = LayerSpec.conv2d(hidden_channels, hidden_channels, height, width, kernel_size)
        pad = kernel_size // 2
        for gate in GATES:
            conv_x = nn.Conv2d(in_channels, hidden_channels, kernel_size, padding=pad, bias=False)
            conv_h = nn.Conv2d(hidden_channels, hidden_channels, kernel_size, padding=pad, bias=False)
            init_uniform_(conv_x.weight, x_spec.fan_in, generator)
            init_uniform_(conv_h.weight, h_spec.fan_in, generator)
            setattr(self, f"W_x{gate}", conv_x)
            setattr(self, f"W_h{gate}", conv_h)
            setattr(self, f"b_{gate}", nn.Parameter(torch.zeros(hidden_channels, 1, 1)))
        for gate in PEEPHOLE_GATES:
            setattr(self, f"W_c{gate}", nn.Parameter(torch.zeros(hidden_channels, height, width)))

    def zero_state(self, batch: int = 1) -> Tuple[torch.Tensor, torch.Tensor]:
        shape = (batch, self.hidden_channels, self.height, self.width)
        return torch.zeros(shape), torch.zeros(shape)

    def forward(self, x: torch.Tensor, state: Tuple[torch.Tensor, torch.Tensor]) -> Tuple[torch.Tensor, torch.Tensor]:
        expected = (self.in_channels, self.height, self.width)
        if x.dim() != 4 or tuple(x.shape[1:]) != expected:
            raise ShapeMismatchError(('B',) + expected, tuple(x.shape), where="ConvLstmCell input")
        h_prev, c_prev = state
        i = torch.sigmoid(self.W_xi(x) + self.W_hi(h_prev) + self.W_ci * c_prev + self.b_i)
        f = torch.sigmoid(self.W_xf(x) + self.W_hf(h_prev) + self.W_cf * c_prev + self.b_f)
        c = f * c_prev + i * torch.tanh(self.W_xc(x) + self.W_hc(h_prev) + self.b_c)
        o = torch.sigmoid(self.W_xo(x) + self.W_ho(h_prev) + self.W_co * c + self.b_o)
        h = o * torch.tanh(c)
        return h, c


def cell_step(cell: ConvLstmCell, x, state: Optional[Tuple[torch.Tensor, torch.Tensor]] = None):
    """
    Functional form: accepts (C, S, S) or (B, C, S, S) inputs

    An unbatched input takes and returns unbatched (H, C) maps.
    """
    x = as_tensor(x)
    single = x.dim() == 3
    if single:
        x = x.unsqueeze(0)
        if state is not None:
            state = (state[0].unsqueeze(0), state[1].unsqueeze(0))
    if state is None:
        state = cell.zero_state(x.shape[0])
    h, c = cell(x, state)
    if single:
        return h[0], c[0]
    return h, c


class ConvLstmPredictor(nn.Module):
    """
    Stacked ConvLSTM with image and interoception heads

    predict() works on one time step; sequence() on (B, L, ...) tensors
    for training. Interoception enters and leaves min-max scaled.
    """

    def __init__(self, image_size: int = 32, hidden_channels: int = 5, kernel_size: int = 5,
                 num_layers: int = 2, interoception_range: Tuple[float, float] = (1.0, 13.0),
                 generator: Optional[torch.Generator] = None):
        super().__init__()
        self.image_size = image_size
        self.interoception_min, self.interoception_max = interoception_range
        cells = []
        in_channels = 3
        for _ in range(num_layers):
            cells.append(ConvLstmCell(in_channels, hidden_channels, image_size, image_size,
                                      kernel_size, generator))
            in_channels = hidden_channels
        self.cells = nn.ModuleList(cells)
        self.image_head = build_network([
            LayerSpec.conv2d(hidden_channels, 1, image_size, image_size, kernel_size=1),
            LayerSpec.activation('sigmoid', (1, image_size, image_size)),
        ], generator)
        self.interoception_head = build_network(dense_stack([hidden_channels, 2]), generator)

    @classmethod
    def from_settings(cls, settings, image_size: int, generator: Optional[torch.Generator] = None) -> 'ConvLstmPredictor':
        return cls(
            image_size=image_size,
            hidden_channels=settings.hidden_channels,
            kernel_size=settings.kernel_size,
            num_layers=settings.num_layers,
            interoception_range=(settings.interoception_min, settings.interoception_max),
            generator=generator,
        )

    # scaling

    def scale(self, interoception: torch.Tensor) -> torch.Tensor:
        span = self.interoception_max - self.interoception_min
        return (interoception - self.interoception_min) / span

    def unscale(self, scaled: torch.Tensor) -> torch.Tensor:
        span = self.interoception_max - self.interoception_min
        return self.interoception_min + span * scaled

    def initial_state(self, batch: int = 1) -> PredictorState:
        hidden, cell = [], []
        for layer in self.cells:
            h, c = layer.zero_state(batch)
            hidden.append(h)
            cell.append(c)
        return PredictorState(hidden, cell)

    def encode(self, images: torch.Tensor, interoception: torch.Tensor) -> torch.Tensor:
        """(B, S, S) + (B, 2) raw -> (B, 3, S, S)"""
        scaled = self.scale(interoception)
        planes = scaled[:, :, None, None].expand(-1, 2, self.image_size, self.image_size)
        return torch.cat([images.unsqueeze(1), planes], dim=1)

    def forward_step(self, images: torch.Tensor, interoception: torch.Tensor,
                     state: PredictorState) -> Tuple[torch.Tensor, torch.Tensor, PredictorState]:
        """One step; returns (image estimate, scaled interoception estimate, state)"""
        x = self.encode(images, interoception)
        hidden, cell = [], []
        for n, layer in enumerate(self.cells):
            h, c = layer(x, (state.hidden[n], state.cell[n]))
            hidden.append(h)
            cell.append(c)
            x = h
        image = self.image_head(x).squeeze(1)
        scaled = self.interoception_head(x.mean(dim=(2, 3)))
        return image, scaled, PredictorState(hidden, cell)

    def predict(self, image, interoception: AffectVector,
                state: Optional[PredictorState] = None) -> Tuple[np.ndarray, AffectVector, PredictorState]:
        """One-step-ahead forecast for a single observation"""
        image = as_tensor(image)
        if tuple(image.shape) != (self.image_size, self.image_size):
            raise ShapeMismatchError((self.image_size, self.image_size), tuple(image.shape),
                                     where="predictor image")
        state = state if state is not None else self.initial_state(1)
        with torch.no_grad():
            estimate, scaled, new_state = self.forward_step(
                image.unsqueeze(0), as_tensor(interoception.to_array()).unsqueeze(0), state)
        return (estimate[0].numpy().copy(), AffectVector.from_array(self.unscale(scaled[0]).numpy()),
                new_state)

    def sequence(self, images: torch.Tensor, interoception: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """(B, L, S, S), (B, L, 2) from a zero state -> per-step estimates"""
        state = self.initial_state(images.shape[0])
        image_out, scaled_out = [], []
        for step in range(images.shape[1]):
            estimate, scaled, state = self.forward_step(images[:, step], interoception[:, step], state)
            image_out.append(estimate)
            scaled_out.append(scaled)
        return torch.stack(image_out, dim=1), torch.stack(scaled_out, dim=1)


def predictor_loss(image_estimate: torch.Tensor, scaled_estimate: torch.Tensor,
                   image_target: torch.Tensor, scaled_target: torch.Tensor) -> torch.Tensor:
    """Image MSE + scaled-interoception MSE"""
    return F.mse_loss(image_estimate, image_target) + F.mse_loss(scaled_estimate, scaled_target)


@dataclass
class PredictorBatch:
    """Teacher-forced sequences: inputs at t, targets at t+1"""
    images: torch.Tensor              # (B, L, S, S)
    interoception: torch.Tensor       # (B, L, 2) raw units
    target_images: torch.Tensor
    target_interoception: torch.Tensor

    def __len__(self) -> int:
        return int(self.images.shape[0]) if self.images.dim() > 0 else 0

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]],
                   chunk_length: int) -> 'PredictorBatch':
        """
        Chop a time-ordered list of (image, a, next image, next a) pairs
        into equal chunks; leading pairs that do not fill a chunk are dropped
        """
        if not pairs:
            raise EmptyBatchError("no predictor training pairs")
        length = min(chunk_length, len(pairs))
        usable = (len(pairs) // length) * length
        pairs = list(pairs)[len(pairs) - usable:]
        columns = [np.stack([p[i] for p in pairs]) for i in range(4)]
        chunks = len(pairs) // length

        def shape(array: np.ndarray) -> torch.Tensor:
            return torch.from_numpy(array.reshape((chunks, length) + array.shape[1:]).astype(np.float64))

        return cls(*(shape(column) for column in columns))


def train_predictor(model: ConvLstmPredictor, optimizer: AdamOptimizer, batch: PredictorBatch) -> float:
    """One Adam step on the batch; returns the loss before the step"""
    if len(batch) == 0 or batch.images.shape[1] == 0:
        raise EmptyBatchError("train_predictor got an empty batch")
    model.train()
    images, scaled = model.sequence(batch.images, batch.interoception)
    loss = predictor_loss(images, scaled, batch.target_images, model.scale(batch.target_interoception))
    return optimizer.minimize(loss)
