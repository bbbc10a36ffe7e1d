"""Command-line front end.

Commands
--------
simulate         one trajectory, emits diagnostics.csv (+ optional states.csv)
converge-strong  coupled pathwise error study, emits errors.csv
converge-weak    coupled mean-observable error study, emits errors.csv
models           JSON listing of built-in models and defaults

Configuration is a flat JSON file (``--config``) merged with command-line
flags; flags win, unknown keys are rejected.  Every run writes the fully
resolved configuration next to its outputs as config.json so artifacts are
reproducible from the echo alone.  All CSV numbers carry 17 significant
digits and identical (config, seed) pairs produce byte-identical files; the
config echo's timestamp is the one exception, and ``--deterministic``
suppresses it.

Exit codes: 0 success, 2 configuration error, 3 integrator failure.

File formats
------------
diagnostics.csv   step,t,hamiltonian_rel_drift,enstrophy_rel_drift,max_eig_drift,fp_iters
errors.csv        h,error,stderr with a final ``slope,<value>,`` row
states.csv        one row per recorded step: step index then the matrix
                  flattened row-major; complex entries are written as
                  interleaved re,im pairs.  A leading ``# n=<n> field=<f>``
                  comment makes the layout self-describing.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .harness import (
    EnsembleConfig,
    ErrorTable,
    build_error_table,
    drift_report,
    fit_order,
    resolve_test_function,
    run_ensemble,
)
from .integrator import MidpointConfig, NonConvergenceError, SingularFactorError, simulate
from .models import MODEL_REGISTRY
from .noise import NoiseConfig, truncation_threshold


class ConfigError(Exception):
    pass


def _fmt(x) -> str:
    return f"{float(x):.17g}"


# --- configuration ----------------------------------------------------------

_COMMON_KEYS = {
    "model", "n", "inertia", "gamma", "alpha", "seed", "l", "fp_tol",
    "max_iters", "out", "threads", "deterministic",
}
_ALLOWED_KEYS = {
    "simulate": _COMMON_KEYS | {"h", "steps", "T", "dump_states"},
    "converge-strong": _COMMON_KEYS | {"T", "paths", "h_ref", "h_list",
                                       "chunk_size", "exclude_failed"},
    "converge-weak": _COMMON_KEYS | {"T", "paths", "h_ref", "h_list",
                                     "chunk_size", "exclude_failed",
                                     "test_function"},
}

_DEFAULTS = {
    "alpha": 0.1,
    "l": 2,
    "fp_tol": 1e-15,
    "max_iters": 100,
    "seed": 0,
    "out": ".",
    "threads": 1,
    "deterministic": False,
    "dump_states": False,
    "chunk_size": 4096,
    "exclude_failed": False,
    "test_function": "sin-sum",
}

# which model-parameter keys each model accepts beyond alpha
_MODEL_PARAMS = {
    "rigid-body": {"inertia"},
    "manakov": {"n"},
    "point-vortices": {"n", "gamma"},
    "zeitlin": {"n"},
}

_INITIAL_STATE_DOC = {
    "rigid-body": "fixed axis momentum (sin 1.1, 0, cos 1.1); seed unused",
    "manakov": "seeded random unit-Frobenius-norm skew-symmetric matrix",
    "point-vortices": "seeded uniform unit vectors, pairwise cosine < 0.95",
    "zeitlin": "seeded random traceless skew-Hermitian matrix, entries O(1)",
}


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a flat JSON object")
    return data


def _resolve(args: argparse.Namespace, command: str) -> dict:
    """defaults <- config file <- explicit flags, with unknown keys rejected."""
    allowed = _ALLOWED_KEYS[command]
    cfg = {k: v for k, v in _DEFAULTS.items() if k in allowed}
    if args.config is not None:
        file_cfg = _load_config_file(args.config)
        unknown = sorted(set(file_cfg) - allowed)
        if unknown:
            raise ConfigError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
        cfg.update(file_cfg)
    for key in allowed:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _require(cfg: dict, key: str):
    if key not in cfg or cfg[key] is None:
        raise ConfigError(f"missing required setting: {key}")
    return cfg[key]


def _build_model(cfg: dict):
    name = _require(cfg, "model")
    try:
        cls = MODEL_REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(MODEL_REGISTRY))
        raise ConfigError(f"unknown model {name!r} (known: {known})") from None
    extras = _MODEL_PARAMS[name]
    for key in ("n", "inertia", "gamma"):
        if cfg.get(key) is not None and key not in extras:
            raise ConfigError(f"model {name!r} does not take {key!r}")
    kwargs = {"alpha": float(cfg["alpha"])}
    if cfg.get("n") is not None:
        kwargs["N" if name == "zeitlin" else "n"] = int(cfg["n"])
    if cfg.get("inertia") is not None:
        kwargs["inertia"] = tuple(float(v) for v in cfg["inertia"])
    if cfg.get("gamma") is not None:
        kwargs["gamma"] = tuple(float(v) for v in cfg["gamma"])
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"bad parameters for model {name!r}: {e}") from e


def _write(out_dir: str, filename: str, text: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, filename)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    print(f"wrote {path}")
    return path


def _echo_config(cfg: dict, command: str, model, effective: dict) -> str:
    doc = {
        "command": command,
        "version": __version__,
        "config": {k: cfg[k] for k in sorted(cfg)},
        "effective": effective,
        "noise": {
            "generator": "philox4x64",
            "normals": "inverse-cdf",
            "channels": model.M,
            "truncation_level": cfg["l"],
        },
        "initial_state": {
            "seed": cfg["seed"],
            "generator": _INITIAL_STATE_DOC[model.name],
        },
    }
    if not cfg.get("deterministic"):
        doc["timestamp"] = datetime.now(timezone.utc).isoformat()
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# --- simulate ---------------------------------------------------------------


def _resolve_horizon(cfg: dict) -> tuple[int, float, dict]:
    """steps/h from either an explicit step count or a time horizon."""
    h = float(_require(cfg, "h"))
    if h <= 0:
        raise ConfigError("h must be positive")
    has_steps = cfg.get("steps") is not None
    has_T = cfg.get("T") is not None
    if has_steps == has_T:
        raise ConfigError("give exactly one of steps or T")
    if has_steps:
        steps = int(cfg["steps"])
        if steps < 0:
            raise ConfigError("steps must be >= 0")
        return steps, h, {"steps": steps, "T": steps * h}
    T = float(cfg["T"])
    steps = int(round(T / h))
    if steps <= 0:
        raise ConfigError(f"T={T} shorter than one step of h={h}")
    return steps, h, {"steps": steps, "T": steps * h, "requested_T": T}


def _diagnostics_csv(traj) -> str:
    rep = drift_report(traj)
    iters = np.concatenate([[0], traj.iterations]).astype(int)
    lines = ["step,t,hamiltonian_rel_drift,enstrophy_rel_drift,max_eig_drift,fp_iters"]
    for k in range(traj.times.size):
        lines.append(
            f"{k},{_fmt(rep['t'][k])},{_fmt(rep['hamiltonian_rel_drift'][k])},"
            f"{_fmt(rep['enstrophy_rel_drift'][k])},{_fmt(rep['max_eig_drift'][k])},"
            f"{iters[k]}"
        )
    return "\n".join(lines) + "\n"


def _states_csv(traj, spec) -> str:
    lines = [f"# n={spec.n} field={spec.field}"]
    for k, X in enumerate(traj.states):
        flat = np.asarray(X).reshape(-1)
        if spec.field == "complex":
            parts = [f"{_fmt(v.real)},{_fmt(v.imag)}" for v in flat]
        else:
            parts = [_fmt(v) for v in flat]
        lines.append(f"{k}," + ",".join(parts))
    return "\n".join(lines) + "\n"


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _resolve(args, "simulate")
    model = _build_model(cfg)
    steps, h, effective = _resolve_horizon(cfg)
    try:
        mid = MidpointConfig(h=h, fp_tol=float(cfg["fp_tol"]),
                             max_iters=int(cfg["max_iters"]), l=int(cfg["l"]))
        noise = None
        if model.M > 0:
            noise = NoiseConfig(M=model.M, h=h, l=int(cfg["l"]), seed=int(cfg["seed"]))
            effective["truncation_threshold"] = noise.threshold
    except ValueError as e:
        raise ConfigError(str(e)) from e
    X0 = model.initial_state(int(cfg["seed"]))

    traj = simulate(model, X0, steps, mid, noise)

    out = cfg["out"]
    _write(out, "diagnostics.csv", _diagnostics_csv(traj))
    if cfg.get("dump_states"):
        _write(out, "states.csv", _states_csv(traj, model.spec))
    effective["max_eig_drift"] = float(traj.max_eigenvalue_drift())
    if traj.witness_residuals is not None and traj.witness_residuals.size:
        effective["max_witness_residual"] = float(np.max(traj.witness_residuals))
    _write(out, "config.json", _echo_config(cfg, "simulate", model, effective))
    return 0


# --- convergence studies ----------------------------------------------------


def _parse_h_list(value) -> tuple:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    try:
        hs = tuple(sorted((float(v) for v in value), reverse=True))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"h_list must be a list of step sizes: {e}") from e
    if not hs:
        raise ConfigError("h_list is empty")
    return hs


def _terminal_table(table: ErrorTable) -> ErrorTable:
    rows = table.terminal_rows
    if sum(r[1] > 0 for r in rows) >= 2:
        slope, intercept, residual = fit_order([r[0] for r in rows], [r[1] for r in rows])
    else:
        slope = intercept = residual = float("nan")
    return ErrorTable(mode="strong-terminal", rows=rows, slope=slope,
                      intercept=intercept, fit_residual=residual)


def cmd_converge(args: argparse.Namespace, mode: str) -> int:
    command = f"converge-{mode}"
    cfg = _resolve(args, command)
    model = _build_model(cfg)
    h_list = _parse_h_list(_require(cfg, "h_list"))
    cfg["h_list"] = list(h_list)
    h_ref = float(_require(cfg, "h_ref"))
    T = float(_require(cfg, "T"))
    paths = int(_require(cfg, "paths"))

    # snap the horizon onto the coarsest grid; dyadic refinement then makes it
    # an exact multiple of every level, which EnsembleConfig still verifies
    n_coarse = int(round(T / h_list[0]))
    if n_coarse < 1:
        raise ConfigError(f"T={T} shorter than one step of h={h_list[0]}")
    T_eff = n_coarse * h_list[0]

    phi = None
    if mode == "weak":
        try:
            phi = resolve_test_function(cfg["test_function"], model)
        except ValueError as e:
            raise ConfigError(str(e)) from e
    try:
        ecfg = EnsembleConfig(
            n_paths=paths, base_seed=int(cfg["seed"]), T=T_eff, h_list=h_list,
            h_ref=h_ref, test_function=cfg.get("test_function") if mode == "weak" else None,
            l=int(cfg["l"]), fp_tol=float(cfg["fp_tol"]), max_iters=int(cfg["max_iters"]),
            exclude_failed=bool(cfg["exclude_failed"]), chunk_size=int(cfg["chunk_size"]),
            threads=int(cfg["threads"]),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e
    X0 = model.initial_state(int(cfg["seed"]))

    result = run_ensemble(model, X0, ecfg)
    table = build_error_table(result, ecfg, mode, phi=phi)

    effective = {
        "T": T_eff,
        "requested_T": T,
        "steps_ref": ecfg.steps(h_ref),
        "paths_used": result.n_paths_used,
        "slope": table.slope,
        "truncation_threshold": truncation_threshold(h_ref, int(cfg["l"])),
    }
    if result.failed_paths:
        effective["failed_paths"] = {str(h): p for h, p in result.failed_paths.items()}
    if result.witness_max is not None:
        effective["max_witness_residual"] = float(result.witness_max)

    out = cfg["out"]
    _write(out, "errors.csv", table.to_csv())
    if mode == "strong":
        _write(out, "errors_terminal.csv", _terminal_table(table).to_csv())
    _write(out, "config.json", _echo_config(cfg, command, model, effective))
    return 0


# --- models listing ---------------------------------------------------------


def cmd_models(args: argparse.Namespace) -> int:
    entries = []
    for name, cls in sorted(MODEL_REGISTRY.items()):
        model = cls()
        params = {"alpha": 0.1}
        if name == "rigid-body":
            params["inertia"] = [2.0, 1.0, 2.0 / 3.0]
        elif name == "zeitlin":
            params["n"] = 12
        elif name == "manakov":
            params["n"] = 10
        elif name == "point-vortices":
            params["n"] = 4
        entries.append({
            "name": name,
            "algebra": model.spec.name,
            "matrix_dim": model.spec.n,
            "noise_channels": model.M,
            "defaults": params,
            "initial_state": _INITIAL_STATE_DOC[name],
        })
    print(json.dumps({"models": entries}, indent=2, sort_keys=True))
    return 0


# --- entry point -------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--model", help="model name; see the models command")
    p.add_argument("--config", help="flat JSON config file; flags override it")
    p.add_argument("--n", type=int, help="model size (matrix or vortex count)")
    p.add_argument("--alpha", type=float, help="noise coupling strength")
    p.add_argument("--seed", type=int, help="noise stream and initial-state seed")
    p.add_argument("--l", type=int, help="increment truncation level")
    p.add_argument("--fp-tol", dest="fp_tol", type=float, help="fixed point tolerance")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker thread bound")
    p.add_argument("--deterministic", action="store_const", const=True,
                   help="omit the timestamp from the config echo")


def _add_converge(p: argparse.ArgumentParser):
    _add_common(p)
    p.add_argument("--T", type=float, help="time horizon (snapped to the coarse grid)")
    p.add_argument("--paths", type=int, help="number of coupled sample paths")
    p.add_argument("--h-ref", dest="h_ref", type=float, help="reference step size")
    p.add_argument("--h-list", dest="h_list",
                   help="comma-separated coarse step sizes, e.g. 0.015625,0.0078125")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isomidpoint",
        description="Stochastic isospectral midpoint integrator for Lie-Poisson systems",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate one trajectory")
    _add_common(p)
    p.add_argument("--h", type=float, help="step size")
    p.add_argument("--steps", type=int, help="number of steps")
    p.add_argument("--T", type=float, help="time horizon (alternative to --steps)")

    _add_converge(sub.add_parser("converge-strong", help="pathwise error study"))
    p = sub.add_parser("converge-weak", help="mean observable error study")
    _add_converge(p)
    p.add_argument("--test-function", dest="test_function",
                   help="observable name (default sin-sum)")

    sub.add_parser("models", help="list built-in models as JSON")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "converge-strong":
            return cmd_converge(args, "strong")
        if args.command == "converge-weak":
            return cmd_converge(args, "weak")
        return cmd_models(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (NonConvergenceError, SingularFactorError) as e:
        print(f"integrator failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
