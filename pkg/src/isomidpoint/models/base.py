"""Model interface the midpoint integrator drives.

A model supplies the drift gradient grad_H0, per-channel noise gradients
grad_Hk, the Hamiltonian values they differentiate (used by finite-difference
tests), and Casimir diagnostics.  All gradient maps take states of shape
(..., n, n) and broadcast over leading batch axes.
"""

from __future__ import annotations

import abc

import numpy as np

from ..algebra import AlgebraSpec, spectrum

__all__ = ["LPSystem"]


class LPSystem(abc.ABC):
    """Isospectral Hamiltonian system on a quadratic matrix Lie algebra."""

    name: str = ""
    spec: AlgebraSpec
    M: int

    @abc.abstractmethod
    def grad_H0(self, X: np.ndarray) -> np.ndarray:
        """Pairing gradient of the drift Hamiltonian at X."""

    @abc.abstractmethod
    def grad_Hk(self, X: np.ndarray, k: int) -> np.ndarray:
        """Pairing gradient of noise Hamiltonian k (0 <= k < M) at X."""

    @abc.abstractmethod
    def hamiltonian(self, X: np.ndarray) -> np.ndarray:
        """Drift Hamiltonian H0(X); real, batched."""

    @abc.abstractmethod
    def noise_hamiltonian(self, X: np.ndarray, k: int) -> np.ndarray:
        """Noise Hamiltonian H_k(X) whose gradient grad_Hk returns."""

    @abc.abstractmethod
    def initial_state(self, seed: int = 0) -> np.ndarray:
        """Deterministic-in-seed default initial state."""

    def noise_sum(self, X: np.ndarray, w: np.ndarray) -> np.ndarray:
        """sum_k w[..., k] * grad_Hk(X).

        Models override this with a channel-vectorized version; the base
        implementation is the reference the overrides are tested against.
        """
        leading = np.broadcast_shapes(X.shape[:-2], w.shape[:-1])
        out = np.zeros(leading + X.shape[-2:], dtype=X.dtype)
        for k in range(self.M):
            out = out + self.grad_Hk(X, k) * w[..., k, None, None]
        return out

    def casimirs(self, X: np.ndarray) -> dict:
        """Conserved diagnostics: tr(X^2) ("enstrophy") and the sorted spectrum."""
        return {
            "enstrophy": np.real(np.einsum("...ij,...ji->...", X, X)),
            "spectrum": spectrum(X),
        }

    def _check_channel(self, k: int):
        if not (0 <= k < self.M):
            raise IndexError(f"noise channel {k} out of range [0, {self.M})")
