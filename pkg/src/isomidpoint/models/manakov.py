"""Momentum-lattice flow on so(n): a quadratic Hamiltonian acting entrywise.

The inertia weights Lambda_ij = sum_{k=1}^{i-1}(n-k) + (j-i) (1-based, i < j)
are distinct positive integers, so grad_H0(X) = X / Lambda elementwise and
H0(X) = sum_{i<j} X_ij^2 / Lambda_ij.  Each unordered pair (i, j) is one
noise channel with grad_H_ij(X) = alpha * X restricted to the (i,j)/(j,i)
entries, i.e. H_ij = alpha X_ij^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..algebra import random_element, so_algebra
from .base import LPSystem

__all__ = ["Manakov"]


def _lattice_weights(n: int) -> np.ndarray:
    lam = np.ones((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            # 1-based formula: sum_{k=1}^{i-1} (n - k) + (j - i) with i=a+1, j=b+1
            lam[a, b] = lam[b, a] = a * n - a * (a + 1) // 2 + (b - a)
    return lam


@dataclass
class Manakov(LPSystem):
    n: int = 10
    alpha: float = 0.1

    name = "manakov"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        self.spec = so_algebra(self.n)
        self._lam = _lattice_weights(self.n)
        self._iu, self._ju = np.triu_indices(self.n, k=1)
        self.M = self._iu.size

    @property
    def channels(self):
        """Channel k couples entry pair (i, j), 0-based, i < j."""
        return list(zip(self._iu.tolist(), self._ju.tolist()))

    def grad_H0(self, X):
        return X / self._lam

    def grad_Hk(self, X, k):
        self._check_channel(k)
        i, j = self._iu[k], self._ju[k]
        out = np.zeros_like(X)
        out[..., i, j] = self.alpha * X[..., i, j]
        out[..., j, i] = self.alpha * X[..., j, i]
        return out

    def noise_sum(self, X, w):
        shape = np.broadcast_shapes(X.shape[:-2], w.shape[:-1])
        z = np.zeros(shape + X.shape[-2:], dtype=X.dtype)
        z[..., self._iu, self._ju] = w
        z[..., self._ju, self._iu] = w
        return self.alpha * X * z

    def hamiltonian(self, X):
        return np.sum(X[..., self._iu, self._ju] ** 2 / self._lam[self._iu, self._ju], axis=-1)

    def noise_hamiltonian(self, X, k):
        self._check_channel(k)
        return self.alpha * X[..., self._iu[k], self._ju[k]] ** 2

    def initial_state(self, seed: int = 0):
        rng = np.random.default_rng(seed)
        return random_element(self.spec, rng, unit_norm=True)
