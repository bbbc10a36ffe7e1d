"""Synthetic quadratic system on su(n) for integrator cross-checks.

H0(X) = (1/2) sum_a lam_a <F_a, X>^2 over a fixed orthonormal traceless
skew-Hermitian basis {F_a} with seed-generated positive weights, plus a few
constant-gradient (linear-Hamiltonian) noise channels.  Smooth everywhere and
structurally unlike the named models, which makes it a good independent
workout for the cotangent-bundle comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..algebra import frobenius, random_element, su_algebra
from .base import LPSystem

__all__ = ["RandomQuadratic", "skew_basis"]


def skew_basis(n: int) -> np.ndarray:
    """Orthonormal basis of traceless skew-Hermitian n x n matrices (n^2 - 1)."""
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=np.complex128)
            e[i, j], e[j, i] = 1.0, -1.0
            out.append(e / np.sqrt(2.0))
            e = np.zeros((n, n), dtype=np.complex128)
            e[i, j] = e[j, i] = 1j
            out.append(e / np.sqrt(2.0))
    for l in range(1, n):
        d = np.zeros(n)
        d[:l] = 1.0
        d[l] = -float(l)
        out.append(1j * np.diag(d / np.linalg.norm(d)).astype(np.complex128))
    return np.stack(out)


@dataclass
class RandomQuadratic(LPSystem):
    n: int = 3
    seed: int = 0
    m_noise: int = 3
    sigma: float = 0.1

    name = "random-quadratic"

    def __post_init__(self):
        self.spec = su_algebra(self.n)
        self._F = skew_basis(self.n)
        rng = np.random.default_rng(self.seed)
        self._weights = rng.uniform(0.5, 1.5, size=self._F.shape[0])
        self.M = int(self.m_noise)
        if self.M > self._F.shape[0]:
            raise ValueError("more noise channels than basis directions")
        self._noise_dirs = rng.permutation(self._F.shape[0])[: self.M]

    def _coeffs(self, X):
        return np.real(np.einsum("kab,...ab->...k", self._F.conj(), X))

    def grad_H0(self, X):
        c = self._coeffs(X) * self._weights
        return np.einsum("...k,kab->...ab", c, self._F)

    def hamiltonian(self, X):
        c = self._coeffs(X)
        return 0.5 * np.sum(self._weights * c**2, axis=-1)

    def grad_Hk(self, X, k):
        self._check_channel(k)
        F = self._F[self._noise_dirs[k]]
        return np.broadcast_to(self.sigma * F, X.shape).copy()

    def noise_sum(self, X, w):
        B = self._F[self._noise_dirs]
        return self.sigma * np.einsum("...k,kab->...ab", w, B)

    def noise_hamiltonian(self, X, k):
        self._check_channel(k)
        return self.sigma * frobenius(self._F[self._noise_dirs[k]], X)

    def initial_state(self, seed: int = 0):
        rng = np.random.default_rng(seed)
        return random_element(self.spec, rng, traceless=True)
