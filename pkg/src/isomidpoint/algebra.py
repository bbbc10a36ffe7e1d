"""Matrix Lie algebra primitives for quadratic algebras.

A quadratic matrix Lie algebra is determined by an invertible matrix J with
J* = +/-J and J^2 = c*I.  The algebra consists of matrices A with
A*J + J*A = 0 and the matching group of matrices Q with Q*J*Q = J.  With
J = I this gives the skew-Hermitian matrices (real: so(n), complex: u(n));
all built-in models live there.

Every operation broadcasts over leading batch dimensions, so arrays of shape
(..., n, n) integrate across Monte Carlo paths without Python loops.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AlgebraSpec",
    "adjoint",
    "cayley",
    "cayley_inv",
    "check_algebra",
    "check_group",
    "commutator",
    "frobenius",
    "frobenius_norm",
    "hat",
    "random_element",
    "spectrum",
    "su2_embed",
    "su2_extract",
    "su_algebra",
    "so_algebra",
    "unhat",
]


def adjoint(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose on the last two axes."""
    return np.conj(np.swapaxes(a, -1, -2))


@dataclass(frozen=True)
class AlgebraSpec:
    """Defines the quadratic algebra: dimension, base field, J and J^2 = c*I.

    Parameters
    ----------
    n : matrix dimension.
    field : "real" or "complex".
    J : structure matrix; identity when omitted.
    c : scalar with J @ J = c * I.
    membership_tol : default tolerance for membership assertions.
    """

    n: int
    field: str = "real"
    J: np.ndarray | None = None
    c: float = 1.0
    name: str = ""
    membership_tol: float = 1e-12

    def __post_init__(self):
        if self.field not in ("real", "complex"):
            raise ValueError(f"field must be 'real' or 'complex', got {self.field!r}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.J is not None:
            J = np.asarray(self.J)
            if J.shape != (self.n, self.n):
                raise ValueError(f"J must be {self.n}x{self.n}")
            if not (np.allclose(J.conj().T, J, atol=1e-12) or np.allclose(J.conj().T, -J, atol=1e-12)):
                raise ValueError("J must be Hermitian or anti-Hermitian")
            if not np.allclose(J @ J, self.c * np.eye(self.n), atol=1e-12):
                raise ValueError("J @ J must equal c * I")
            object.__setattr__(self, "J", J)

    @property
    def dtype(self):
        return np.float64 if self.field == "real" else np.complex128

    def identity(self) -> np.ndarray:
        return np.eye(self.n, dtype=self.dtype)

    def structure(self) -> np.ndarray:
        return self.identity() if self.J is None else self.J.astype(self.dtype)


def so_algebra(n: int) -> AlgebraSpec:
    """Real skew-symmetric n x n matrices (J = I)."""
    return AlgebraSpec(n=n, field="real", name=f"so({n})")


def su_algebra(n: int) -> AlgebraSpec:
    """Complex skew-Hermitian n x n matrices (J = I); models keep them traceless."""
    return AlgebraSpec(n=n, field="complex", name=f"su({n})")


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix commutator [a, b] = ab - ba."""
    return a @ b - b @ a


def frobenius(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Real trace pairing Re tr(x* v); real inner product on the algebra."""
    return np.real(np.sum(np.conj(x) * v, axis=(-1, -2)))


def frobenius_norm(x: np.ndarray) -> np.ndarray:
    """Frobenius norm over the last two axes."""
    return np.sqrt(np.sum(np.abs(x) ** 2, axis=(-1, -2)))


def inf_norm(x: np.ndarray) -> np.ndarray:
    """Largest entry modulus over the last two axes."""
    return np.max(np.abs(x), axis=(-1, -2))


def check_algebra(spec: AlgebraSpec, a: np.ndarray) -> np.ndarray:
    """Membership residual ||a*J + Ja||_F; zero iff a is in the algebra."""
    J = spec.structure()
    return frobenius_norm(adjoint(a) @ J + J @ a)


def check_group(spec: AlgebraSpec, q: np.ndarray) -> np.ndarray:
    """Membership residual ||q*Jq - J||_F; zero iff q is in the group."""
    J = spec.structure()
    return frobenius_norm(adjoint(q) @ J @ q - J)


def cayley(a: np.ndarray) -> np.ndarray:
    """Cayley transform (I - a)^{-1} (I + a); maps the algebra into the group."""
    eye = np.eye(a.shape[-1], dtype=a.dtype)
    return np.linalg.solve(eye - a, eye + a)


def cayley_inv(a: np.ndarray) -> np.ndarray:
    """Reflected Cayley transform (I + a)^{-1} (I - a) = cayley(a)^{-1}."""
    eye = np.eye(a.shape[-1], dtype=a.dtype)
    return np.linalg.solve(eye + a, eye - a)


def spectrum(a: np.ndarray, real_tol: float = 1e-12) -> np.ndarray:
    """Eigenvalues sorted lexicographically by (real, imag).

    Real parts within real_tol * max|lambda| of zero are treated as exactly
    zero for ordering, so skew-Hermitian spectra (purely imaginary up to
    roundoff) sort stably by imaginary part instead of by rounding noise.
    The returned values are unmodified.
    """
    lam = np.linalg.eigvals(a)
    scale = np.max(np.abs(lam), axis=-1, keepdims=True)
    re = np.where(np.abs(lam.real) <= real_tol * (1.0 + scale), 0.0, lam.real)
    order = np.argsort(re + 1j * lam.imag, axis=-1)
    return np.take_along_axis(lam, order, axis=-1)


# --- so(3) <-> R^3 ---------------------------------------------------------

def hat(v: np.ndarray) -> np.ndarray:
    """R^3 -> so(3): hat(v) w = v x w.  Pairing scale: <hat x, hat y> = 2 x.y."""
    v = np.asarray(v)
    if v.shape[-1] != 3:
        raise ValueError("hat expects 3-vectors")
    out = np.zeros(v.shape[:-1] + (3, 3), dtype=v.dtype)
    x1, x2, x3 = v[..., 0], v[..., 1], v[..., 2]
    out[..., 0, 1] = -x3
    out[..., 0, 2] = x2
    out[..., 1, 0] = x3
    out[..., 1, 2] = -x1
    out[..., 2, 0] = -x2
    out[..., 2, 1] = x1
    return out


def _unhat_raw(a: np.ndarray) -> np.ndarray:
    # no membership check; hot-path use on states the integrator keeps skew
    return np.stack([a[..., 2, 1], a[..., 0, 2], a[..., 1, 0]], axis=-1)


def unhat(a: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """so(3) -> R^3, inverse of hat.  Raises on non-skew input."""
    a = np.asarray(a)
    if a.shape[-2:] != (3, 3):
        raise ValueError("unhat expects 3x3 matrices")
    scale = 1.0 + inf_norm(a)
    if np.any(inf_norm(a + np.swapaxes(a, -1, -2)) > tol * scale):
        raise ValueError("unhat: input is not skew-symmetric")
    return _unhat_raw(a)


# --- su(2) <-> R^3 ----------------------------------------------------------

_PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=np.complex128,
)


def su2_embed(v: np.ndarray) -> np.ndarray:
    """R^3 -> su(2): v -> -(i/2) v.sigma.  Pairing scale: tr(X*Y) = x.y / 2."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != 3:
        raise ValueError("su2_embed expects 3-vectors")
    return -0.5j * np.einsum("...k,kij->...ij", v, _PAULI)


def su2_extract(x: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """su(2) -> R^3, inverse of su2_embed.  Raises when x is not in the image."""
    x = np.asarray(x)
    if x.shape[-2:] != (2, 2):
        raise ValueError("su2_extract expects 2x2 matrices")
    w = 2j * x[..., 0, 1]
    v = np.stack([np.real(w), -np.imag(w), np.real(2j * x[..., 0, 0])], axis=-1)
    scale = 1.0 + inf_norm(x)
    if np.any(inf_norm(su2_embed(v) - x) > tol * scale):
        raise ValueError("su2_extract: input is not in the su2_embed image")
    return v


# --- utilities --------------------------------------------------------------

def random_element(
    spec: AlgebraSpec,
    rng: np.random.Generator,
    traceless: bool = False,
    unit_norm: bool = True,
) -> np.ndarray:
    """Random algebra element (J = I case): skew-Hermitian projection of a
    Gaussian matrix, optionally traceless and scaled to unit Frobenius norm."""
    n = spec.n
    g = rng.standard_normal((n, n))
    if spec.field == "complex":
        g = g + 1j * rng.standard_normal((n, n))
    a = 0.5 * (g - adjoint(g))
    if traceless:
        a = a - (np.trace(a) / n) * np.eye(n, dtype=a.dtype)
    if unit_norm:
        a = a / frobenius_norm(a)
    return a.astype(spec.dtype)
