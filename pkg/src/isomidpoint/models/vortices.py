"""Point vortices on the unit sphere as a block-diagonal su(2)^n system.

Vortex j with position x_j (unit 3-vector) occupies block X_j = su2_embed(x_j)
of a block-diagonal 2n x 2n state.  The interaction uses the normalized
correlation cos(theta_ij) = tr(X_i* X_j) / (||X_i|| ||X_j||), which equals the
dot product of the unit position vectors, and

    H0 = -(1/4 pi) sum_{i<j} G_i G_j log(1 - cos theta_ij).

Noise channel k in {0,1,2} rotates every vortex about coordinate axis k:
block j of grad_Hk is alpha * x_jk * su2_embed(e_k), the block analogue of the
rigid-body channels, i.e. H_k = (alpha/4) sum_j x_jk^2 under the su(2) scale
tr(X*Y) = x.y / 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..algebra import AlgebraSpec, su2_embed
from .base import LPSystem

__all__ = ["PointVortices"]

_COLLISION_TOL = 1e-12


@dataclass
class PointVortices(LPSystem):
    n: int = 4
    gamma: tuple | None = None
    alpha: float = 0.1

    name = "point-vortices"
    M = 3

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two vortices")
        g = np.ones(self.n) if self.gamma is None else np.asarray(self.gamma, dtype=float)
        if g.shape != (self.n,):
            raise ValueError(f"gamma must have length {self.n}")
        self._gamma = g
        self.spec = AlgebraSpec(n=2 * self.n, field="complex", name=f"su(2)^{self.n}")

    # --- block bookkeeping ---

    def coords(self, X: np.ndarray) -> np.ndarray:
        """Per-vortex R^3 coordinates, shape (..., n, 3).

        Reads only the traceless part of each 2x2 block, so the extraction
        (and everything built on it) is insensitive to i*I block components.
        """
        d = np.diagonal(X, axis1=-2, axis2=-1)
        v3 = np.real(1j * (d[..., 0::2] - d[..., 1::2]))
        u = X[..., 0::2, :][..., :, 1::2]                            # (..., n, n) of block (0,1)
        w = 2j * np.diagonal(u, axis1=-2, axis2=-1)
        return np.stack([np.real(w), -np.imag(w), v3], axis=-1)

    def assemble(self, vecs: np.ndarray) -> np.ndarray:
        """Block-diagonal state from per-vortex vectors (..., n, 3)."""
        blocks = su2_embed(vecs)
        out = np.zeros(vecs.shape[:-2] + (2 * self.n, 2 * self.n), dtype=np.complex128)
        for j in range(self.n):
            out[..., 2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = blocks[..., j, :, :]
        return out

    def _geometry(self, X):
        xs = self.coords(X)
        norms = np.linalg.norm(xs, axis=-1)
        units = xs / norms[..., None]
        cos = np.einsum("...ia,...ja->...ij", units, units)
        one_minus = 1.0 - cos
        off = ~np.eye(self.n, dtype=bool)
        if np.any(one_minus[..., off] <= _COLLISION_TOL):
            raise ValueError("coincident vortices: interaction is singular")
        return xs, norms, units, cos, one_minus

    # --- Hamiltonians and gradients ---

    def hamiltonian(self, X):
        _, _, _, _, one_minus = self._geometry(X)
        iu, ju = np.triu_indices(self.n, k=1)
        terms = self._gamma[iu] * self._gamma[ju] * np.log(one_minus[..., iu, ju])
        return -np.sum(terms, axis=-1) / (4.0 * np.pi)

    def grad_H0(self, X):
        xs, norms, units, cos, one_minus = self._geometry(X)
        off = ~np.eye(self.n, dtype=bool)
        w = self._gamma[:, None] * self._gamma[None, :] / np.where(off, one_minus, 1.0)
        w = w * off
        pulled = np.einsum("...kj,...ja->...ka", w, units)
        diag = np.einsum("...kj,...kj->...k", w, cos)
        g = (pulled - diag[..., None] * units) * (2.0 / norms[..., None]) / (4.0 * np.pi)
        return self.assemble(g)

    def grad_Hk(self, X, k):
        self._check_channel(k)
        xs = self.coords(X)
        v = np.zeros_like(xs)
        v[..., k] = self.alpha * xs[..., k]
        return self.assemble(v)

    def noise_sum(self, X, w):
        xs = self.coords(X)
        return self.assemble(self.alpha * w[..., None, :] * xs)

    def noise_hamiltonian(self, X, k):
        self._check_channel(k)
        xs = self.coords(X)
        return 0.25 * self.alpha * np.sum(xs[..., k] ** 2, axis=-1)

    def casimirs(self, X):
        out = super().casimirs(X)
        norms = []
        for j in range(self.n):
            b = X[..., 2 * j : 2 * j + 2, 2 * j : 2 * j + 2]
            norms.append(np.sqrt(np.sum(np.abs(b) ** 2, axis=(-1, -2))))
        out["block_norms"] = np.stack(norms, axis=-1)
        return out

    def initial_state(self, seed: int = 0):
        rng = np.random.default_rng(seed)
        while True:
            v = rng.standard_normal((self.n, 3))
            v /= np.linalg.norm(v, axis=-1, keepdims=True)
            cos = v @ v.T
            if np.all(cos[~np.eye(self.n, dtype=bool)] < 0.95):
                return self.assemble(v)
