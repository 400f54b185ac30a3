"""
Random Streams - Independent, reproducible generators per component

Each stochastic component draws from its own stream derived from
(master seed, stream id). Streams use numpy's counter-based Philox
generator keyed by a BLAKE2b digest of the pair, so toggling one
component never shifts another's sequence, and the same pair yields
the same sequence on every platform.
"""

from typing import Dict, Iterable
import hashlib

import numpy as np
import torch

from numeric.checkpoint import rng_blocks, load_rng_blocks

STREAM_IDS = ('env', 'ddpg', 'noise', 'replay', 'init', 'ram', 'corpus')


def stream_key(master_seed: int, stream_id: str) -> int:
    digest = hashlib.blake2b(f"{int(master_seed)}:{stream_id}".encode('utf-8'), digest_size=16).digest()
    return int.from_bytes(digest, 'little')


def derive_stream(master_seed: int, stream_id: str) -> np.random.Generator:
    """Deterministic Philox generator for (seed, id)"""
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, stream_id)))


def torch_generator(rng: np.random.Generator) -> torch.Generator:
    """Seed a torch generator from a numpy stream (used for weight init)"""
    return torch.Generator().manual_seed(int(rng.integers(0, 2 ** 63 - 1)))


class RngStreams:
    """
    Registry of named streams for one run

    Streams are created lazily; `state_dict` / `load_state_dict` capture
    every stream's exact position for checkpoints.
    """

    def __init__(self, master_seed: int, stream_ids: Iterable[str] = STREAM_IDS):
        self.master_seed = int(master_seed)
        self._streams: Dict[str, np.random.Generator] = {}
        for stream_id in stream_ids:
            self.get(stream_id)

    def get(self, stream_id: str) -> np.random.Generator:
        if stream_id not in self._streams:
            self._streams[stream_id] = derive_stream(self.master_seed, stream_id)
        return self._streams[stream_id]

    def __getitem__(self, stream_id: str) -> np.random.Generator:
        return self.get(stream_id)

    def state_dict(self) -> Dict[str, str]:
        return {stream_id: rng_blocks(rng) for stream_id, rng in self._streams.items()}

    def load_state_dict(self, states: Dict[str, str]) -> None:
        for stream_id, text in states.items():
            load_rng_blocks(self.get(stream_id), text)
