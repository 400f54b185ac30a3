"""
Glimpse Sensor - Multi-resolution foveated patches

A glimpse at location l in [-1, 1]^2 (x = column, y = row, (0, 0) the
image centre) is a stack of k square patches centred on l. Patch i
covers (patch_size * scale_factor**i) pixels per side and is average
pooled back down to patch_size, so later patches see a wider field at
lower resolution. Regions outside the image read as zero.
"""

from dataclasses import dataclass
from typing import Tuple

import torch
import torch.nn.functional as F

from numeric.tensor import as_tensor
from utils.errors import ShapeMismatchError


@dataclass(frozen=True)
class GlimpseConfig:
    """Retina geometry and episode length"""
    num_scales: int = 3
    patch_size: int = 8
    scale_factor: int = 2
    num_glimpses: int = 6
    image_size: int = 32

    def __post_init__(self):
        if self.num_scales < 1:
            raise ValueError(f"num_scales must be >= 1, got {self.num_scales}")
        if self.patch_size < 2 or self.patch_size % 2 != 0:
            raise ValueError(f"patch_size must be even and >= 2, got {self.patch_size}")
        if self.patch_size > self.image_size:
            raise ValueError(f"patch_size {self.patch_size} exceeds image side {self.image_size}")
        if self.scale_factor < 1:
            raise ValueError(f"scale_factor must be >= 1, got {self.scale_factor}")
        if self.num_glimpses < 1:
            raise ValueError(f"num_glimpses must be >= 1, got {self.num_glimpses}")

    @classmethod
    def from_settings(cls, settings) -> 'GlimpseConfig':
        return cls(
            num_scales=settings.num_scales,
            patch_size=settings.patch_size,
            scale_factor=settings.scale_factor,
            num_glimpses=settings.num_glimpses,
            image_size=settings.image_size,
        )

    @property
    def largest_patch(self) -> int:
        return self.patch_size * self.scale_factor ** (self.num_scales - 1)

    @property
    def glimpse_dim(self) -> int:
        return self.num_scales * self.patch_size * self.patch_size


def denormalize(locations: torch.Tensor, size: int) -> torch.Tensor:
    """[-1, 1] -> continuous pixel coordinates in [0, size]"""
    return (locations + 1.0) * 0.5 * size


def _as_batch(images, locations) -> Tuple[torch.Tensor, torch.Tensor, bool]:
    images = as_tensor(images)
    locations = as_tensor(locations)
    single = images.dim() == 2
    if single:
        images = images.unsqueeze(0)
        locations = locations.reshape(1, 2)
    if images.dim() != 3 or images.shape[1] != images.shape[2]:
        raise ShapeMismatchError(('B', 'S', 'S'), tuple(images.shape), where="glimpse images")
    if tuple(locations.shape) != (images.shape[0], 2):
        raise ShapeMismatchError((images.shape[0], 2), tuple(locations.shape), where="glimpse locations")
    return images, locations, single


def extract_glimpse(images, locations, config: GlimpseConfig) -> torch.Tensor:
    """
    Extract glimpse stacks

    Args:
        images: (S, S) or (B, S, S) grayscale
        locations: (2,) or (B, 2), clamped to [-1, 1]
        config: retina geometry

    Returns:
        (k, p, p) or (B, k, p, p) tensor
    """
    images, locations, single = _as_batch(images, locations)
    batch, size = images.shape[0], images.shape[-1]
    locations = locations.clamp(-1.0, 1.0)

    pad = config.largest_patch
    padded = F.pad(images, (pad, pad, pad, pad))
    centres = denormalize(locations, size)
    batch_index = torch.arange(batch)[:, None, None]

    patches = []
    for scale in range(config.num_scales):
        side = config.patch_size * config.scale_factor ** scale
        offsets = torch.arange(side)
        top_left = torch.floor(centres - side / 2.0 + 0.5).long() + pad
        cols = top_left[:, 0:1] + offsets[None, :]
        rows = top_left[:, 1:2] + offsets[None, :]
        patch = padded[batch_index, rows[:, :, None], cols[:, None, :]]
        if side != config.patch_size:
            patch = F.avg_pool2d(patch.unsqueeze(1), kernel_size=side // config.patch_size).squeeze(1)
        patches.append(patch)

    stack = torch.stack(patches, dim=1)
    return stack[0] if single else stack
