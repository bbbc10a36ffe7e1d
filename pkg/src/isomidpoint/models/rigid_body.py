"""Free rigid body on so(3) with axis-wise multiplicative transport noise.

State X = hat(x) carries the body angular momentum x.  The drift Hamiltonian
is the trace form H0(X) = (1/2) tr((Inv X)* X) with the inertia operator
acting through the hat map, so grad_H0(X) = hat(x / inertia) and the induced
flow on x is the classical Euler equation dx/dt = x cross (x / inertia).
Noise channel k has grad_Hk(X) = alpha * hat(x_k e_k), i.e. H_k = alpha x_k^2
under the pairing scale <hat u, hat v> = 2 u.v.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..algebra import hat, so_algebra, _unhat_raw
from .base import LPSystem

__all__ = ["RigidBody"]


@dataclass
class RigidBody(LPSystem):
    inertia: tuple = (2.0, 1.0, 2.0 / 3.0)
    alpha: float = 0.1

    name = "rigid-body"
    M = 3

    def __post_init__(self):
        self.spec = so_algebra(3)
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape != (3,) or not np.all(inertia > 0):
            raise ValueError("inertia must be three positive numbers")
        self._inv_inertia = 1.0 / inertia

    def grad_H0(self, X):
        return hat(_unhat_raw(X) * self._inv_inertia)

    def grad_Hk(self, X, k):
        self._check_channel(k)
        x = _unhat_raw(X)
        v = np.zeros_like(x)
        v[..., k] = self.alpha * x[..., k]
        return hat(v)

    def noise_sum(self, X, w):
        return hat(self.alpha * w * _unhat_raw(X))

    def hamiltonian(self, X):
        x = _unhat_raw(X)
        return np.sum(x * x * self._inv_inertia, axis=-1)

    def noise_hamiltonian(self, X, k):
        self._check_channel(k)
        x = _unhat_raw(X)
        return self.alpha * x[..., k] ** 2

    def initial_state(self, seed: int = 0):
        # fixed momentum on the unit sphere; seed kept for interface uniformity
        return hat(np.array([np.sin(1.1), 0.0, np.cos(1.1)]))
