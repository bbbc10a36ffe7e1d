"""Truncated Gaussian increments for the stochastic midpoint scheme.

Each path owns a counter-based word stream (numpy Philox keyed on
(seed, path_index)); step n reads the 4-word-aligned window starting at
counter block n * ceil(M/4).  Standard normals come from the inverse CDF of
53-bit uniforms, one 64-bit word per draw, so the block at (seed, path, step)
is a pure function of those three integers: bulk generation, per-step access,
and any execution order all produce bit-identical values.

The scheme consumes zeta = clip(xi, +-A_h) with A_h = sqrt(2 l |log h|);
the untruncated xi are what coupled refinements aggregate across levels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

__all__ = [
    "IncrementBlock",
    "NoiseConfig",
    "aggregate_path",
    "sample_block",
    "sample_path_xi",
    "truncate",
    "truncation_threshold",
]

SAMPLING_METHOD = "inverse_cdf"
BIT_GENERATOR = "Philox"


def truncation_threshold(h: float, l: int = 2) -> float:
    """Truncation bound A_h = sqrt(2 l |log h|) (natural log)."""
    if h <= 0 or h == 1.0:
        raise ValueError("h must be positive and != 1")
    if l < 1:
        raise ValueError("l must be >= 1")
    return float(np.sqrt(2.0 * l * abs(np.log(h))))


def truncate(xi: np.ndarray, bound: float) -> np.ndarray:
    """Componentwise clip to [-bound, bound]."""
    return np.clip(xi, -bound, bound)


@dataclass(frozen=True)
class NoiseConfig:
    """Noise channel count M, step h, truncation level l, and stream seed."""

    M: int
    h: float
    l: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.M < 0:
            raise ValueError("M must be >= 0")
        if not (self.h > 0.0) or self.h == 1.0:
            raise ValueError("h must be positive and != 1")
        if self.l < 1:
            raise ValueError("l must be >= 1")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must fit in 64 bits")

    @property
    def threshold(self) -> float:
        return truncation_threshold(self.h, self.l)


@dataclass(frozen=True)
class IncrementBlock:
    """One step's raw normals xi and truncated values zeta = clip(xi, +-A_h)."""

    xi: np.ndarray
    zeta: np.ndarray
    step_index: int
    threshold: float

    def __post_init__(self):
        assert self.xi.shape == self.zeta.shape
        assert np.all(np.abs(self.zeta) <= self.threshold), "zeta exceeds A_h"


def _key(seed: int, path_index: int) -> np.ndarray:
    return np.array([seed, path_index], dtype=np.uint64)


def _blocks_per_step(M: int) -> int:
    # Philox counter blocks hold 4 words; each step owns a whole number of them.
    return max(1, -(-M // 4))


def _xi_from_words(words: np.ndarray) -> np.ndarray:
    u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def sample_path_xi(seed: int, path_index: int, n_steps: int, M: int) -> np.ndarray:
    """All raw normals for one path: shape (n_steps, M), one bulk draw."""
    if M == 0 or n_steps == 0:
        return np.zeros((n_steps, M))
    stride = 4 * _blocks_per_step(M)
    gen = np.random.Generator(np.random.Philox(key=_key(seed, path_index)))
    words = gen.integers(0, 2**64, size=(n_steps, stride), dtype=np.uint64)
    return _xi_from_words(words[:, :M])


def sample_block(seed: int, path_index: int, cfg: NoiseConfig, step: int) -> IncrementBlock:
    """The increment block at (seed, path, step); pure in those three integers."""
    if step < 0:
        raise ValueError("step must be >= 0")
    bound = cfg.threshold
    if cfg.M == 0:
        z = np.zeros(0)
        return IncrementBlock(xi=z, zeta=z, step_index=step, threshold=bound)
    bg = np.random.Philox(key=_key(seed, path_index))
    bg.advance(step * _blocks_per_step(cfg.M))
    words = np.random.Generator(bg).integers(0, 2**64, size=cfg.M, dtype=np.uint64)
    xi = _xi_from_words(words)
    return IncrementBlock(xi=xi, zeta=truncate(xi, bound), step_index=step, threshold=bound)


def aggregate_path(xi: np.ndarray, r: int) -> np.ndarray:
    """Coarsen raw normals by summing groups of r and dividing by sqrt(r).

    The result is the raw-normal sequence of the same Brownian path at step
    r*h: sqrt(r h) * xi_coarse[j] = sum of the r fine increments.  Aggregation
    composes: coarsening by r1 then r2 equals coarsening by r1*r2.  r must be
    a power of two dividing the number of steps (refinement ratios are dyadic).
    """
    if r < 1 or (r & (r - 1)) != 0:
        raise ValueError("refinement ratio must be a power of two")
    n = xi.shape[-2]
    if n % r != 0:
        raise ValueError(f"cannot aggregate {n} steps by ratio {r}")
    if r == 1:
        return np.asarray(xi)
    shape = xi.shape[:-2] + (n // r, r, xi.shape[-1])
    return xi.reshape(shape).sum(axis=-2) / np.sqrt(r)
