"""Synthetic embedding sequences with rotating latent dynamics."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..storage.eseq_format import EmbeddingSequenceFile
from ..utils.log_decorator import log_process
from ..utils.prng import Xoshiro256pp
from .errors import ShapeError

logger = logging.getLogger(__name__)


@dataclass
class SyntheticConfig:
    d: int = 32
    num_sequences: int = 64
    length: int = 128
    sigma: float = 0.05
    seed: int = 2023
    theta_max: float = 0.3

    def validate(self) -> None:
        if self.d < 2 or self.d % 2 != 0:
            raise ShapeError(f"synthetic data needs an even d >= 2, got {self.d}")
        if self.num_sequences < 0 or self.length < 0:
            raise ValueError("num_sequences and length must be >= 0")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


def rotation_angles(cfg: SyntheticConfig, rng: Xoshiro256pp) -> np.ndarray:
    """One angle per 2-D plane, uniform in [0, theta_max)."""
    return rng.uniforms(cfg.d // 2, 0.0, cfg.theta_max)


def rotate(z: np.ndarray, cos: np.ndarray, sin: np.ndarray) -> np.ndarray:
    x, y = z[0::2], z[1::2]
    out = np.empty_like(z)
    out[0::2] = cos * x - sin * y
    out[1::2] = sin * x + cos * y
    return out


@log_process("generate_synthetic")
def generate_synthetic(cfg: SyntheticConfig) -> EmbeddingSequenceFile:
    """Draw angles, then per sequence a Gaussian z0; e_t = z_t + sigma * noise.

    The latent state is advanced in float64; frames are stored as float32.
    Draw order: all angles, then for each sequence d values of z0 followed by
    T*d noise values (skipped when sigma is 0).
    """
    cfg.validate()
    rng = Xoshiro256pp(cfg.seed)
    thetas = rotation_angles(cfg, rng)
    cos, sin = np.cos(thetas), np.sin(thetas)
    sequences = []
    for _ in range(cfg.num_sequences):
        z = rng.gaussians(cfg.d)
        frames = np.empty((cfg.length, cfg.d), dtype=np.float64)
        for t in range(cfg.length):
            frames[t] = z
            z = rotate(z, cos, sin)
        if cfg.sigma > 0:
            frames += cfg.sigma * rng.gaussians(cfg.length * cfg.d).reshape(cfg.length, cfg.d)
        sequences.append(frames.astype(np.float32))
    logger.info(
        "Generated %d sequences of length %d (d=%d, sigma=%g, seed=%d)",
        cfg.num_sequences, cfg.length, cfg.d, cfg.sigma, cfg.seed,
    )
    return EmbeddingSequenceFile(d=cfg.d, sequences=sequences)
