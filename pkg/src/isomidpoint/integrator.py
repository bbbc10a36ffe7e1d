"""Stochastic isospectral midpoint scheme and its cotangent-bundle oracle.

One step advances X_n to X_{n+1} through the implicit midpoint state X~:

    G  = (h grad_H0(X~) + sum_i zeta_i sqrt(h) grad_Hi(X~))*   (adjoint)
    X_n     = (I - G/2) X~ (I + G/2)
    X_{n+1} = (I + G/2) X~ (I - G/2)

solved by fixed-point iteration from X~ = X_n.  The update is a similarity
transform by the Cayley factor W = (I - G/2)^{-1}(I + G/2), so the sorted
spectrum (hence every Casimir) is preserved to solver accuracy; orbit_witness
reconstructs W and reports how well X_{n+1} = W X_n W^{-1} holds.

cotangent_step integrates the unreduced midpoint scheme on pairs (Q, P) whose
momentum map mu(Q, P) = Q*P/2 - J P*Q J/(2c) follows the reduced scheme
exactly; it is the independent oracle the reduced step is validated against.

All operations broadcast over leading batch axes of the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import AlgebraSpec, adjoint, cayley_inv, frobenius_norm, inf_norm, spectrum
from .noise import NoiseConfig, sample_path_xi, truncate

__all__ = [
    "CotangentState",
    "MidpointConfig",
    "NonConvergenceError",
    "SingularFactorError",
    "StepRecord",
    "Trajectory",
    "cotangent_step",
    "momentum_map",
    "orbit_witness",
    "psi_tilde",
    "simulate",
    "solve_implicit",
    "step",
]

_DIVERGENCE_PATIENCE = 5


class NonConvergenceError(RuntimeError):
    """Fixed-point iteration failed to reach fp_tol."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularFactorError(RuntimeError):
    """(I +- G/2) became singular or non-finite; the step size is too large."""


@dataclass(frozen=True)
class MidpointConfig:
    """Step size plus fixed-point policy (entrywise max-norm tolerance)."""

    h: float
    fp_tol: float = 1e-15
    max_iters: int = 100
    l: int = 2

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if not self.fp_tol > 0:
            raise ValueError("fp_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.l < 1:
            raise ValueError("truncation level l must be >= 1")


@dataclass
class StepRecord:
    """Per-step solver diagnostics, reduced over any batch axes."""

    iterations: int
    fp_residual: float
    defining_residual: float
    spectral_drift: float = math.nan


def _right_solve(b: np.ndarray, a: np.ndarray) -> np.ndarray:
    """b @ inv(a) without forming the inverse."""
    return np.swapaxes(
        np.linalg.solve(np.swapaxes(a, -1, -2), np.swapaxes(b, -1, -2)), -1, -2
    )


def _zeta_array(model, zeta) -> np.ndarray | None:
    if zeta is None:
        if model.M:
            raise ValueError(f"model has {model.M} noise channels but zeta is None")
        return None
    z = np.asarray(getattr(zeta, "zeta", zeta), dtype=float)
    if z.shape[-1:] != (model.M,):
        raise ValueError(f"zeta has {z.shape[-1:]} channels, model expects {model.M}")
    return z


def psi_tilde(model, X_mid: np.ndarray, h: float, zeta=None) -> np.ndarray:
    """G = (h grad_H0 + sum_i zeta_i sqrt(h) grad_Hi)* at the midpoint state."""
    z = _zeta_array(model, zeta)
    A = h * model.grad_H0(X_mid)
    if model.M and z is not None:
        A = A + model.noise_sum(X_mid, math.sqrt(h) * z)
    return adjoint(A)


def _half_factors(G: np.ndarray):
    eye = np.eye(G.shape[-1], dtype=G.dtype)
    return eye - 0.5 * G, eye + 0.5 * G


def _fixed_point(model, X_n, h, zeta, cfg):
    """Iterate X~ <- (I-G/2)^{-1} X_n (I+G/2)^{-1}; returns (X~, iters, residual)."""
    X_mid = X_n
    residual = math.inf
    previous = math.inf
    rises = 0
    for it in range(1, cfg.max_iters + 1):
        G = psi_tilde(model, X_mid, h, zeta)
        if not np.all(np.isfinite(G)):
            raise SingularFactorError("non-finite midpoint generator")
        minus, plus = _half_factors(G)
        try:
            X_new = _right_solve(np.linalg.solve(minus, X_n), plus)
        except np.linalg.LinAlgError as exc:
            raise SingularFactorError(f"singular half-step factor: {exc}") from exc
        residual = float(np.max(inf_norm(X_new - X_mid)))
        X_mid = X_new
        if residual <= cfg.fp_tol:
            return X_mid, it, residual
        if residual > previous:
            rises += 1
            if rises >= _DIVERGENCE_PATIENCE:
                raise NonConvergenceError(
                    f"fixed point diverged after {it} iterations "
                    f"(residual {residual:.3e}); reduce h",
                    residual,
                    it,
                )
        else:
            rises = 0
        previous = residual
    raise NonConvergenceError(
        f"fixed point not converged in {cfg.max_iters} iterations "
        f"(residual {residual:.3e} > fp_tol {cfg.fp_tol:.1e})",
        residual,
        cfg.max_iters,
    )


def _advance(model, X_n, zeta, cfg):
    """One full step; also returns the midpoint state and generator."""
    X_mid, iters, fp_res = _fixed_point(model, X_n, cfg.h, zeta, cfg)
    G = psi_tilde(model, X_mid, cfg.h, zeta)
    minus, plus = _half_factors(G)
    X_next = plus @ X_mid @ minus
    defining = float(np.max(inf_norm(X_n - minus @ X_mid @ plus)))
    rec = StepRecord(iterations=iters, fp_residual=fp_res, defining_residual=defining)
    return X_next, X_mid, G, rec


def solve_implicit(model, X_n, h, zeta=None, cfg: MidpointConfig | None = None):
    """Solve the implicit midpoint relation for X~; returns (X~, StepRecord).

    The explicit h argument governs the step (h = 0 collapses to X~ = X_n);
    cfg contributes only the fixed-point policy.
    """
    if h < 0:
        raise ValueError("h must be >= 0")
    if cfg is None:
        cfg = MidpointConfig(h=h if h > 0 else 1.0)
    X_mid, iters, fp_res = _fixed_point(model, X_n, h, zeta, cfg)
    G = psi_tilde(model, X_mid, h, zeta)
    minus, plus = _half_factors(G)
    defining = float(np.max(inf_norm(X_n - minus @ X_mid @ plus)))
    return X_mid, StepRecord(iterations=iters, fp_residual=fp_res, defining_residual=defining)


def step(model, X_n, zeta, cfg: MidpointConfig, record_spectrum: bool = False):
    """Advance one step; returns (X_{n+1}, StepRecord)."""
    X_next, _, _, rec = _advance(model, X_n, zeta, cfg)
    if record_spectrum:
        drift = np.abs(spectrum(X_next) - spectrum(X_n))
        rec.spectral_drift = float(np.max(drift))
    return X_next, rec


def orbit_witness(X_n: np.ndarray, X_mid: np.ndarray, G: np.ndarray):
    """Group element conjugating X_n to X_{n+1} and the conjugation residual.

    Returns (g, residual) with g* = cay(-G/2)^{-1} = (I - G/2)^{-1}(I + G/2),
    residual = ||X_{n+1} - g* X_n (g*)^{-1}||_F (batched over leading axes).
    """
    try:
        W = cayley_inv(-0.5 * G)
        minus, plus = _half_factors(G)
        X_next = plus @ X_mid @ minus
        conjugated = _right_solve(W @ X_n, W)
    except np.linalg.LinAlgError as exc:
        raise SingularFactorError(f"singular Cayley factor: {exc}") from exc
    residual = frobenius_norm(X_next - conjugated)
    return adjoint(W), residual


@dataclass
class Trajectory:
    """Dense single-path output of simulate.

    witness_residuals are relative (Frobenius residual over ||X_n||_F);
    eigenvalues rows are the sorted spectrum of each recorded state.
    """

    times: np.ndarray
    states: np.ndarray
    iterations: np.ndarray
    fp_residuals: np.ndarray
    defining_residuals: np.ndarray
    hamiltonian: np.ndarray
    enstrophy: np.ndarray
    witness_residuals: np.ndarray | None = None
    eigenvalues: np.ndarray | None = None

    def max_eigenvalue_drift(self) -> float:
        """Max over time of max |eigenvalue - initial eigenvalue| (sorted)."""
        if self.eigenvalues is None:
            raise ValueError("trajectory recorded without eigenvalues")
        if len(self.times) == 1:
            return 0.0
        return float(np.max(np.abs(self.eigenvalues - self.eigenvalues[0])))


def simulate(
    model,
    X0: np.ndarray,
    steps: int,
    cfg: MidpointConfig,
    noise: NoiseConfig | None = None,
    path: int = 0,
    record_spectrum: bool = True,
    record_witness: bool = True,
) -> Trajectory:
    """Integrate one path for `steps` steps of size cfg.h.

    Noise increments come from the counter-based stream identified by
    (noise.seed, path); noise=None runs the deterministic (M = 0) limit.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if noise is not None:
        if noise.M != model.M:
            raise ValueError(f"noise has M={noise.M}, model has M={model.M}")
        if noise.h != cfg.h:
            raise ValueError(f"noise.h={noise.h} differs from cfg.h={cfg.h}")
        xi = sample_path_xi(noise.seed, path, steps, noise.M)
        zeta_all = truncate(xi, noise.threshold)
    elif model.M:
        raise ValueError("model has noise channels; pass a NoiseConfig")
    else:
        zeta_all = np.zeros((steps, 0))

    X = np.asarray(X0)
    states = np.empty((steps + 1,) + X.shape, dtype=X.dtype)
    states[0] = X
    iterations = np.zeros(steps, dtype=int)
    fp_residuals = np.zeros(steps)
    defining_residuals = np.zeros(steps)
    witness_residuals = np.zeros(steps) if record_witness else None

    for k in range(steps):
        try:
            X_next, X_mid, G, rec = _advance(model, X, zeta_all[k], cfg)
            if record_witness:
                _, res = orbit_witness(X, X_mid, G)
                witness_residuals[k] = float(
                    np.max(res / np.maximum(frobenius_norm(X), 1e-300))
                )
        except (NonConvergenceError, SingularFactorError) as exc:
            exc.args = (f"step {k}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
            exc.step_index = k
            raise
        iterations[k] = rec.iterations
        fp_residuals[k] = rec.fp_residual
        defining_residuals[k] = rec.defining_residual
        X = X_next
        states[k + 1] = X

    eigenvalues = spectrum(states) if record_spectrum else None
    return Trajectory(
        times=cfg.h * np.arange(steps + 1),
        states=states,
        iterations=iterations,
        fp_residuals=fp_residuals,
        defining_residuals=defining_residuals,
        hamiltonian=model.hamiltonian(states),
        enstrophy=np.real(np.einsum("...ij,...ji->...", states, states)),
        witness_residuals=witness_residuals,
        eigenvalues=eigenvalues,
    )


# --- cotangent-bundle oracle ------------------------------------------------


def momentum_map(spec: AlgebraSpec, Q: np.ndarray, P: np.ndarray) -> np.ndarray:
    """mu(Q, P) = Q*P/2 - J P*Q J / (2c); lands in the algebra for (Q,P) in T*G."""
    J = spec.structure()
    return 0.5 * (adjoint(Q) @ P) - (0.5 / spec.c) * (J @ adjoint(P) @ Q @ J)


@dataclass
class CotangentState:
    """Group point Q and covector P of the unreduced system."""

    Q: np.ndarray
    P: np.ndarray


def cotangent_step(model, state: CotangentState, zeta, cfg: MidpointConfig) -> CotangentState:
    """One midpoint step of the canonical system on T*G.

    Implicit half: Q_n = Q~(I - A/2), P_n = P~(I + A*/2) with
    A = h grad_H0(mu~) + sum_i zeta_i sqrt(h) grad_Hi(mu~) at mu~ = mu(Q~, P~),
    solved by fixed point; explicit half: Q_{n+1} = Q~(I + A/2),
    P_{n+1} = P~(I - A*/2).  The momentum map then satisfies
    mu(Q_{n+1}, P_{n+1}) = reduced step of mu(Q_n, P_n) with G = A*, and Q
    moves by right multiplication with a Cayley-type group element, so the
    group constraint is preserved to roundoff.
    """
    spec = model.spec
    h = cfg.h
    z = _zeta_array(model, zeta)
    Q_n, P_n = np.asarray(state.Q), np.asarray(state.P)
    eye = np.eye(Q_n.shape[-1], dtype=spec.dtype)

    def vector_field(Qm, Pm):
        mu = momentum_map(spec, Qm, Pm)
        A = h * model.grad_H0(mu)
        if model.M and z is not None:
            A = A + model.noise_sum(mu, math.sqrt(h) * z)
        return A

    Q_mid, P_mid = Q_n, P_n
    residual = math.inf
    previous = math.inf
    rises = 0
    for it in range(1, cfg.max_iters + 1):
        A = vector_field(Q_mid, P_mid)
        if not np.all(np.isfinite(A)):
            raise SingularFactorError("non-finite cotangent generator")
        try:
            Q_new = _right_solve(Q_n, eye - 0.5 * A)
            P_new = _right_solve(P_n, eye + 0.5 * adjoint(A))
        except np.linalg.LinAlgError as exc:
            raise SingularFactorError(f"singular half-step factor: {exc}") from exc
        residual = float(
            max(np.max(inf_norm(Q_new - Q_mid)), np.max(inf_norm(P_new - P_mid)))
        )
        Q_mid, P_mid = Q_new, P_new
        if residual <= cfg.fp_tol:
            break
        if residual > previous:
            rises += 1
            if rises >= _DIVERGENCE_PATIENCE:
                raise NonConvergenceError(
                    f"cotangent fixed point diverged after {it} iterations "
                    f"(residual {residual:.3e}); reduce h",
                    residual,
                    it,
                )
        else:
            rises = 0
        previous = residual
    else:
        raise NonConvergenceError(
            f"cotangent fixed point not converged in {cfg.max_iters} iterations "
            f"(residual {residual:.3e})",
            residual,
            cfg.max_iters,
        )

    A = vector_field(Q_mid, P_mid)
    return CotangentState(
        Q=Q_mid @ (eye + 0.5 * A),
        P=P_mid @ (eye - 0.5 * adjoint(A)),
    )
