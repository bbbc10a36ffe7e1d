"""Coupled Monte Carlo convergence studies and drift diagnostics.

run_ensemble integrates every path once at the reference step h_ref and once
at each coarse step in h_list, reusing the same underlying Brownian path: the
coarse raw normals are block sums of the fine ones (noise.aggregate_path),
and each level truncates at its own threshold.  States are recorded on the
grid of the coarsest step, so strong errors can take the sup over shared
times.  Paths are processed in fixed-size chunks; the chunk layout depends
only on the config, never on the worker count, which keeps results
bit-identical across --threads settings.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .algebra import frobenius_norm, unhat
from .integrator import (
    MidpointConfig,
    NonConvergenceError,
    SingularFactorError,
    Trajectory,
    _advance,
    orbit_witness,
)
from .noise import aggregate_path, sample_path_xi, truncate, truncation_threshold

__all__ = [
    "EnsembleConfig",
    "EnsembleResult",
    "ErrorTable",
    "TEST_FUNCTIONS",
    "build_error_table",
    "drift_report",
    "fit_order",
    "resolve_test_function",
    "run_ensemble",
    "strong_error",
    "weak_error",
]


def _is_power_of_two(r: int) -> bool:
    return r >= 1 and (r & (r - 1)) == 0


def _exact_ratio(num: float, den: float) -> int:
    """num/den as an integer, or raise."""
    ratio = num / den
    r = int(round(ratio))
    if r < 1 or abs(ratio - r) > 1e-9 * max(1.0, abs(ratio)):
        raise ValueError(f"{num} is not an integer multiple of {den}")
    return r


@dataclass(frozen=True)
class EnsembleConfig:
    """Coupled-path study layout.

    h_ref must divide every h in h_list by a power of two, and T must be an
    integer multiple of every step size.  chunk_size fixes the batch layout
    (and therefore the exact floating-point result); threads only distributes
    the fixed chunks over workers.
    """

    n_paths: int
    base_seed: int
    T: float
    h_list: tuple
    h_ref: float
    test_function: str | None = None
    l: int = 2
    fp_tol: float = 1e-15
    max_iters: int = 100
    exclude_failed: bool = False
    chunk_size: int = 4096
    threads: int = 1
    record_witness: bool = True

    def __post_init__(self):
        object.__setattr__(self, "h_list", tuple(float(h) for h in self.h_list))
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if not self.h_list:
            raise ValueError("h_list must be nonempty")
        if any(h <= 0 for h in self.h_list) or self.h_ref <= 0:
            raise ValueError("step sizes must be positive")
        if list(self.h_list) != sorted(self.h_list, reverse=True):
            raise ValueError("h_list must be descending")
        for h in self.h_list:
            r = _exact_ratio(h, self.h_ref)
            if not _is_power_of_two(r):
                raise ValueError(f"h={h} is not h_ref * power of two")
            _exact_ratio(self.T, h)
        _exact_ratio(self.T, self.h_ref)
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def steps(self, h: float) -> int:
        return _exact_ratio(self.T, h)


@dataclass
class EnsembleResult:
    """States of every level on the shared coarse time grid.

    levels maps each h (and h_ref under key 'ref' as well as its own value)
    to an array of shape (n_times, n_paths, n, n).  Excluded paths (only with
    exclude_failed) are removed from every level to keep the coupling.
    """

    times: np.ndarray
    ref: np.ndarray
    levels: dict
    witness_max: float
    failed_paths: dict
    n_paths_used: int

    def terminal(self, h=None) -> np.ndarray:
        return self.ref[-1] if h is None else self.levels[h][-1]


def _integrate_level(model, X0, zeta, h, n_record_every, n_times, cfg, witness: bool):
    """March one batch at step h, recording every n_record_every steps.

    zeta: (batch, n_steps, M) truncated increments.  Returns (grid states
    (n_times, batch, n, n), max relative witness residual).
    """
    n_steps = zeta.shape[-2]
    batch = zeta.shape[0]
    X = np.broadcast_to(X0, (batch,) + X0.shape).copy()
    out = np.empty((n_times,) + X.shape, dtype=X0.dtype)
    out[0] = X
    mid_cfg = MidpointConfig(h=h, fp_tol=cfg.fp_tol, max_iters=cfg.max_iters, l=cfg.l)
    wmax = 0.0
    rec_idx = 1
    for k in range(n_steps):
        X_next, X_mid, G, _ = _advance(model, X, zeta[:, k, :], mid_cfg)
        if witness:
            _, res = orbit_witness(X, X_mid, G)
            wmax = max(wmax, float(np.max(res / np.maximum(frobenius_norm(X), 1e-300))))
        X = X_next
        if (k + 1) % n_record_every == 0:
            out[rec_idx] = X
            rec_idx += 1
    assert rec_idx == n_times
    return out, wmax


def _chunk_job(model, X0, cfg, start, stop):
    """Integrate paths [start, stop) at the reference and every coarse level."""
    M = model.M
    n_ref = cfg.steps(cfg.h_ref)
    h_coarse = max(cfg.h_list + (cfg.h_ref,))
    n_times = cfg.steps(h_coarse) + 1
    xi = np.stack([sample_path_xi(cfg.base_seed, p, n_ref, M) for p in range(start, stop)])

    def level_zeta(h):
        r = _exact_ratio(h, cfg.h_ref)
        return truncate(aggregate_path(xi, r), truncation_threshold(h, cfg.l))

    levels = {}
    wmax = 0.0
    failed = {}
    batch = stop - start
    all_h = list(dict.fromkeys(cfg.h_list + (cfg.h_ref,)))
    for h in all_h:
        every = cfg.steps(h) // (n_times - 1)  # level steps per coarse-grid interval
        try:
            states, w = _integrate_level(
                model, X0, level_zeta(h), h, every, n_times, cfg, cfg.record_witness
            )
            levels[h] = states
            wmax = max(wmax, w)
        except (NonConvergenceError, SingularFactorError) as exc:
            if not cfg.exclude_failed:
                exc.args = (
                    f"paths [{start}, {stop}) at h={h}: {exc.args[0] if exc.args else exc}",
                ) + exc.args[1:]
                raise
            # identify the culprits one path at a time
            states = np.empty((n_times, batch) + X0.shape, dtype=X0.dtype)
            bad = []
            z = level_zeta(h)
            for b in range(batch):
                try:
                    states[:, b : b + 1], w = _integrate_level(
                        model, X0, z[b : b + 1], h, every, n_times, cfg, cfg.record_witness
                    )
                    wmax = max(wmax, w)
                except (NonConvergenceError, SingularFactorError):
                    states[:, b] = np.nan
                    bad.append(start + b)
            levels[h] = states
            failed[h] = bad
    return levels, wmax, failed


def run_ensemble(model, X0, cfg: EnsembleConfig) -> EnsembleResult:
    """Integrate the coupled ensemble; deterministic given cfg.base_seed."""
    X0 = np.asarray(X0)
    h_coarse = max(cfg.h_list + (cfg.h_ref,))
    n_times = cfg.steps(h_coarse) + 1
    times = h_coarse * np.arange(n_times)
    all_h = list(dict.fromkeys(cfg.h_list + (cfg.h_ref,)))

    bounds = list(range(0, cfg.n_paths, cfg.chunk_size)) + [cfg.n_paths]
    spans = list(zip(bounds[:-1], bounds[1:]))

    if cfg.threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(lambda se: _chunk_job(model, X0, cfg, *se), spans))
    else:
        parts = [_chunk_job(model, X0, cfg, *se) for se in spans]

    levels = {
        h: np.concatenate([p[0][h] for p in parts], axis=1) for h in all_h
    }
    witness_max = max(p[1] for p in parts)
    failed = {}
    for p in parts:
        for h, bad in p[2].items():
            failed.setdefault(h, []).extend(bad)

    # a path failing anywhere is dropped everywhere so levels stay coupled
    if any(failed.values()):
        drop = sorted({p for bad in failed.values() for p in bad})
        keep = np.setdiff1d(np.arange(cfg.n_paths), drop)
        levels = {h: s[:, keep] for h, s in levels.items()}
    n_used = next(iter(levels.values())).shape[1]

    return EnsembleResult(
        times=times,
        ref=levels[cfg.h_ref],
        levels=levels,
        witness_max=witness_max,
        failed_paths=failed,
        n_paths_used=n_used,
    )


# --- estimators -------------------------------------------------------------


def strong_error(ref_states: np.ndarray, coarse_states: np.ndarray) -> float:
    """sup over shared times of sqrt(mean over paths of ||X_ref - X_h||_F^2).

    Inputs have shape (n_times, n_paths, n, n) or (n_paths, n, n) for a
    single time slice.
    """
    ref_states, coarse_states = np.asarray(ref_states), np.asarray(coarse_states)
    if ref_states.shape != coarse_states.shape:
        raise ValueError("ensembles must have matching shape")
    sq = frobenius_norm(ref_states - coarse_states) ** 2
    if sq.ndim == 0:
        return float(np.sqrt(sq))
    return float(np.max(np.sqrt(np.mean(sq, axis=-1))))


def _strong_stats(ref_states, coarse_states):
    """(sup error, its delta-method SE, terminal error, terminal SE)."""
    sq = frobenius_norm(ref_states - coarse_states) ** 2  # (n_times, n_paths)
    n = sq.shape[-1]
    mean = np.mean(sq, axis=-1)
    rms = np.sqrt(mean)
    se_mean = np.std(sq, axis=-1, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    with np.errstate(divide="ignore", invalid="ignore"):
        se_rms = np.where(rms > 0, se_mean / (2.0 * np.maximum(rms, 1e-300)), 0.0)
    k = int(np.argmax(rms))
    return float(rms[k]), float(se_rms[k]), float(rms[-1]), float(se_rms[-1])


def weak_error(ref_states: np.ndarray, coarse_states: np.ndarray, phi) -> tuple:
    """|mean phi(ref) - mean phi(coarse)| at the terminal slice, with the
    Monte Carlo standard error of the coupled difference."""
    fr = np.asarray(phi(np.asarray(ref_states)), dtype=float)
    fc = np.asarray(phi(np.asarray(coarse_states)), dtype=float)
    if fr.shape != fc.shape:
        raise ValueError("test function returned mismatched shapes")
    diff = fr - fc
    err = float(abs(np.mean(diff)))
    se = float(np.std(diff, ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else 0.0
    return err, se


def fit_order(h_list, errors):
    """Least-squares slope/intercept/residual of ln err against ln h."""
    h = np.asarray(h_list, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.shape != e.shape:
        raise ValueError("h_list and errors must have equal length")
    good = e > 0
    if not np.all(good):
        warnings.warn(
            f"excluding {int(np.sum(~good))} nonpositive error(s) from the fit",
            RuntimeWarning,
            stacklevel=2,
        )
    h, e = h[good], e[good]
    if h.size < 2:
        raise ValueError("need at least two positive errors to fit an order")
    A = np.stack([np.log(h), np.ones_like(h)], axis=-1)
    coef, res, _, _ = np.linalg.lstsq(A, np.log(e), rcond=None)
    residual = float(res[0]) if res.size else 0.0
    return float(coef[0]), float(coef[1]), residual


@dataclass
class ErrorTable:
    """Rows of (h, error, stderr) plus the fitted log-log slope.

    For strong tables the sup-over-times error is primary and the
    terminal-time error is kept alongside for reference.
    """

    mode: str
    rows: list
    slope: float
    intercept: float
    fit_residual: float
    terminal_rows: list | None = None

    def to_csv(self) -> str:
        lines = ["h,error,stderr"]
        for h, err, se in self.rows:
            lines.append(f"{h:.17g},{err:.17g},{se:.17g}")
        lines.append(f"slope,{self.slope:.17g},")
        return "\n".join(lines) + "\n"


def build_error_table(result: EnsembleResult, cfg: EnsembleConfig, mode: str, phi=None) -> ErrorTable:
    """Estimate errors per coarse level against the reference and fit the order."""
    rows, terminal_rows = [], []
    for h in cfg.h_list:
        coarse = result.levels[h]
        if mode == "strong":
            sup_err, sup_se, term_err, term_se = _strong_stats(result.ref, coarse)
            rows.append((h, sup_err, sup_se))
            terminal_rows.append((h, term_err, term_se))
        elif mode == "weak":
            if phi is None:
                raise ValueError("weak mode needs a test function")
            err, se = weak_error(result.ref[-1], coarse[-1], phi)
            rows.append((h, err, se))
        else:
            raise ValueError(f"unknown mode {mode!r}")
    if sum(r[1] > 0 for r in rows) >= 2:
        slope, intercept, residual = fit_order(
            [r[0] for r in rows], [r[1] for r in rows]
        )
    else:
        slope = intercept = residual = float("nan")
    return ErrorTable(
        mode=mode,
        rows=rows,
        slope=slope,
        intercept=intercept,
        fit_residual=residual,
        terminal_rows=terminal_rows if mode == "strong" else None,
    )


# --- drift diagnostics ------------------------------------------------------


def drift_report(traj: Trajectory) -> dict:
    """Per-step conservation diagnostics relative to the initial state."""
    if traj.eigenvalues is None:
        raise ValueError("trajectory recorded without eigenvalues")
    eig_drift = np.max(np.abs(traj.eigenvalues - traj.eigenvalues[0]), axis=-1)
    h0 = traj.hamiltonian[0]
    e0 = traj.enstrophy[0]
    h_scale = abs(h0) if abs(h0) > 0 else 1.0
    e_scale = abs(e0) if abs(e0) > 0 else 1.0
    return {
        "t": traj.times,
        "max_eig_drift": eig_drift,
        "hamiltonian_rel_drift": (traj.hamiltonian - h0) / h_scale,
        "enstrophy_rel_drift": (traj.enstrophy - e0) / e_scale,
    }


# --- test functions ---------------------------------------------------------


def _sin_sum(states: np.ndarray) -> np.ndarray:
    x = unhat(states)
    return np.sum(np.sin(2.0 * np.pi * x), axis=-1)


TEST_FUNCTIONS = {"sin-sum": _sin_sum}


def resolve_test_function(name: str, model) -> callable:
    """Look up a named test function and check it applies to the model."""
    if name not in TEST_FUNCTIONS:
        raise ValueError(f"unknown test function {name!r}; have {sorted(TEST_FUNCTIONS)}")
    if name == "sin-sum" and (model.spec.n != 3 or model.spec.field != "real"):
        raise ValueError("test function 'sin-sum' needs a 3x3 real (so(3)) state")
    return TEST_FUNCTIONS[name]
