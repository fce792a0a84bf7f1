"""Trigonometric positional encoding of 3D coordinates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PosEParams:
    """Output width and frequency controls of the encoding.

    ``dim`` must split into three axis blocks of sine/cosine pairs.
    ``alpha`` scales the argument, ``beta`` sets the geometric spacing of the
    wavelengths across channels.
    """

    dim: int
    alpha: float = 1000.0
    beta: float = 100.0

    def __post_init__(self):
        if self.dim <= 0 or self.dim % 6:
            raise ValueError(f"encoding dim must be a positive multiple of 6, got {self.dim}")
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")

    def with_dim(self, dim: int) -> "PosEParams":
        return PosEParams(dim, self.alpha, self.beta)

    def frequencies(self) -> np.ndarray:
        """``alpha / beta**(6m/dim)`` for ``m = 0 .. dim/6 - 1``."""
        m = np.arange(self.dim // 6, dtype=np.float64)
        return self.alpha / self.beta ** (6.0 * m / self.dim)


def pos_e_batch(points, params: PosEParams, dtype=np.float64) -> np.ndarray:
    """Encode every row of an ``(..., 3)`` array into ``(..., dim)``.

    Each axis contributes a block of ``dim/3`` channels laid out as
    ``[sin(w0 a), cos(w0 a), sin(w1 a), cos(w1 a), ...]``; blocks are ordered x, y, z.
    Phases are formed in float64; ``dtype`` sets the precision of the
    trigonometric evaluation and of the result.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[-1] != 3:
        raise ValueError(f"points must have a trailing axis of 3, got {pts.shape}")
    phase = (pts[..., None] * params.frequencies()).astype(dtype, copy=False)  # (..., 3, dim/6)
    out = np.empty(phase.shape + (2,), dtype=dtype)
    np.sin(phase, out=out[..., 0])
    np.cos(phase, out=out[..., 1])
    return out.reshape(pts.shape[:-1] + (params.dim,))


def pos_e(p, params: PosEParams) -> np.ndarray:
    """Encoding of a single 3-vector."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {p.shape}")
    return pos_e_batch(p[None], params)[0]
