"""Spectrally truncated Euler flow on the sphere: su(N) with a quantized Laplacian.

The Laplacian is the double commutator Delta X = sum_a [S_a, [S_a, X]] built
from the spin-s angular-momentum matrices, s = (N-1)/2 (Hermitian ladder
convention, so eigenvalues are +l(l+1), l = 0..N-1).  Delta preserves each
matrix diagonal and acts tridiagonally there, which gives an O(N^2) inverse
via per-diagonal eigendecompositions and a real-coefficient orthonormal
skew-Hermitian eigenbasis E_lm (l = 1..N-1, m = -l..l) assembled from the
per-diagonal eigenvectors.

H0(X) = (1/2) tr((Delta^{-1} X)* X), so grad_H0 = Delta^{-1} X (the stream
matrix).  Noise channels are the band l = ceil(N/2)..N-1, one channel per
(l, m), with grad_H_lm(X) = (alpha / l(l+1)) <E_lm, X> E_lm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..algebra import commutator, frobenius, random_element, su_algebra
from .base import LPSystem

__all__ = ["ZeitlinEuler"]

_DENSE_INVERSE_MAX_N = 32


def _spin_matrices(N: int):
    s = 0.5 * (N - 1)
    w = s - np.arange(N)
    b = np.sqrt(np.arange(1, N) * (N - np.arange(1, N)))
    jp = np.zeros((N, N), dtype=np.complex128)
    jp[np.arange(N - 1), np.arange(1, N)] = b
    jm = jp.T.copy()
    j1 = 0.5 * (jp + jm)
    j2 = (jp - jm) / 2j
    j3 = np.diag(w).astype(np.complex128)
    return j1, j2, j3


def _diagonal_blocks(N: int):
    """Per-diagonal restriction of the Laplacian: (eigenvalues, eigenvectors).

    Diagonal m >= 0 holds entries (i, i+m); the restricted operator is the
    real symmetric tridiagonal with diag 2s(s+1) - 2 w_i w_{i+m} and
    off-diagonal -b_{i+1} b_{i+m+1}.  Eigenvalues come out as l(l+1),
    l = m..N-1; eigenvector signs are fixed by a positive leading entry.
    """
    s = 0.5 * (N - 1)
    w = s - np.arange(N)
    b = np.sqrt(np.arange(1, N) * (N - np.arange(1, N)))
    lams, vecs = [], []
    for m in range(N):
        K = N - m
        t = np.diag(2.0 * s * (s + 1) - 2.0 * w[:K] * w[m : m + K])
        if K > 1:
            off = -b[: K - 1] * b[m : m + K - 1]
            t += np.diag(off, 1) + np.diag(off, -1)
        lam, v = np.linalg.eigh(t)
        for j in range(K):
            col = v[:, j]
            lead = col[np.argmax(np.abs(col) > 1e-8 * np.max(np.abs(col)))]
            if lead < 0:
                v[:, j] = -col
        expected = np.arange(m, N) * (np.arange(m, N) + 1.0)
        if not np.allclose(lam, expected, atol=1e-8):
            raise AssertionError(f"diagonal {m}: eigenvalues deviate from l(l+1)")
        lams.append(lam)
        vecs.append(v)
    return lams, vecs


@dataclass
class ZeitlinEuler(LPSystem):
    N: int = 12
    alpha: float = 0.1

    name = "zeitlin"

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        N = self.N
        self.spec = su_algebra(N)
        self._spin = _spin_matrices(N)
        self._lams, self._vecs = _diagonal_blocks(N)
        self._inv_op = self._build_dense_inverse() if N <= _DENSE_INVERSE_MAX_N else None
        band = range((N + 1) // 2, N)
        self.channels = [(l, m) for l in band for m in range(-l, l + 1)]
        self.M = len(self.channels)
        self._noise_basis = np.stack(
            [self._basis_element(l, m) for (l, m) in self.channels]
        )
        self._noise_lam = np.array([l * (l + 1.0) for (l, _) in self.channels])

    # --- Laplacian ---

    def laplacian(self, X: np.ndarray) -> np.ndarray:
        """Delta X = sum_a [S_a, [S_a, X]] (literal double commutator)."""
        out = np.zeros_like(X, dtype=np.complex128)
        for S in self._spin:
            out = out + commutator(S, commutator(S, X))
        return out

    def _inverse_diagonal_weights(self, k: int) -> np.ndarray:
        lam = self._lams[k]
        inv = np.zeros_like(lam)
        nz = lam > 0.5
        inv[nz] = 1.0 / lam[nz]  # the only zero eigenvalue is l = 0 on the main diagonal
        return inv

    def _build_dense_inverse(self) -> np.ndarray:
        N = self.N
        op = np.zeros((N * N, N * N))
        for m in range(-(N - 1), N):
            k = abs(m)
            K = N - k
            V = self._vecs[k]
            B = (V * self._inverse_diagonal_weights(k)) @ V.T
            i = np.arange(K)
            flat = i * N + (i + m) if m >= 0 else (i + k) * N + i
            op[np.ix_(flat, flat)] = B
        return op

    def laplacian_inv(self, X: np.ndarray) -> np.ndarray:
        """Pseudo-inverse of the Laplacian: solves Delta Y = X on the traceless
        part and annihilates the i*I kernel component.

        Midpoint iterates pick up an O(h^2) trace through the (I -+ G/2)
        conjugation sandwich, so a strict traceless gate here would abort
        every implicit solve; projecting the kernel out is the smooth
        extension that leaves gradients on su(N) unchanged.
        """
        N = self.N
        if self._inv_op is not None:
            flat = X.reshape(X.shape[:-2] + (N * N,))
            return (flat @ self._inv_op.T).reshape(X.shape)
        out = np.zeros_like(X, dtype=np.complex128)
        for m in range(-(N - 1), N):
            k = abs(m)
            V = self._vecs[k]
            y = np.diagonal(X, offset=m, axis1=-2, axis2=-1)
            c = (y @ V) * self._inverse_diagonal_weights(k)
            y2 = c @ V.T
            i = np.arange(N - k)
            if m >= 0:
                out[..., i, i + m] = y2
            else:
                out[..., i + k, i] = y2
        return out

    # --- eigenbasis ---

    def _basis_element(self, l: int, m: int) -> np.ndarray:
        N = self.N
        k = abs(m)
        if not (1 <= l <= N - 1 and k <= l):
            raise ValueError(f"no basis element ({l}, {m})")
        v = self._vecs[k][:, l - k]
        if m == 0:
            return 1j * np.diag(v).astype(np.complex128)
        u = np.zeros((N, N))
        i = np.arange(N - k)
        u[i, i + k] = v
        if m > 0:
            return ((u - u.T) / np.sqrt(2.0)).astype(np.complex128)
        return 1j * (u + u.T) / np.sqrt(2.0)

    def basis(self):
        """Ordered orthonormal eigenbasis: labels [(l, m)] and array (N^2-1, N, N)."""
        labels = [(l, m) for l in range(1, self.N) for m in range(-l, l + 1)]
        return labels, np.stack([self._basis_element(l, m) for (l, m) in labels])

    # --- Hamiltonians ---

    def grad_H0(self, X):
        return self.laplacian_inv(X)

    def hamiltonian(self, X):
        return 0.5 * frobenius(self.laplacian_inv(X), X)

    def grad_Hk(self, X, k):
        self._check_channel(k)
        E = self._noise_basis[k]
        c = frobenius(E, X)
        return (self.alpha / self._noise_lam[k]) * c[..., None, None] * E

    def noise_sum(self, X, w):
        B = self._noise_basis
        c = np.real(np.einsum("kab,...ab->...k", B.conj(), X))
        coef = self.alpha * w * c / self._noise_lam
        return np.einsum("...k,kab->...ab", coef, B)

    def noise_hamiltonian(self, X, k):
        self._check_channel(k)
        c = frobenius(self._noise_basis[k], X)
        return 0.5 * self.alpha * c**2 / self._noise_lam[k]

    def initial_state(self, seed: int = 0):
        rng = np.random.default_rng(seed)
        return random_element(self.spec, rng, traceless=True)
