"""Ensemble driver and error estimators: coupling, determinism, failure
handling, and the estimator identities."""

import numpy as np
import pytest

from isomidpoint.algebra import _unhat_raw, frobenius_norm, hat
from isomidpoint.harness import (
    EnsembleConfig,
    ErrorTable,
    TEST_FUNCTIONS,
    build_error_table,
    drift_report,
    fit_order,
    resolve_test_function,
    run_ensemble,
    strong_error,
    weak_error,
)
from isomidpoint.integrator import MidpointConfig, SingularFactorError, simulate
from isomidpoint.models import Manakov, RigidBody
from isomidpoint.noise import NoiseConfig

T = 0.09375  # 3 * 2^-5: integer multiple of every dyadic step used below


class DeterministicRigidBody(RigidBody):
    M = 0


class Tripwire(RigidBody):
    """grad_H0 turns non-finite once x1 crosses a threshold (fails some paths)."""

    def __init__(self, bar=0.95, **kw):
        super().__init__(**kw)
        self.bar = bar

    def grad_H0(self, X):
        g = super().grad_H0(X)
        x1 = _unhat_raw(X)[..., 0]
        return np.where((x1 > self.bar)[..., None, None], np.inf, g)


# --- config validation ------------------------------------------------------


def test_config_requires_dyadic_refinement():
    with pytest.raises(ValueError, match="power of two"):
        EnsembleConfig(n_paths=1, base_seed=0, T=T, h_list=(3 * 2**-7,), h_ref=2**-7)
    with pytest.raises(ValueError, match="integer multiple"):
        EnsembleConfig(n_paths=1, base_seed=0, T=0.1, h_list=(2**-6,), h_ref=2**-8)
    with pytest.raises(ValueError, match="descending"):
        EnsembleConfig(n_paths=1, base_seed=0, T=T, h_list=(2**-7, 2**-6), h_ref=2**-8)
    cfg = EnsembleConfig(n_paths=1, base_seed=0, T=T, h_list=(2**-6, 2**-7), h_ref=2**-9)
    assert cfg.steps(2**-6) == 6
    assert cfg.steps(cfg.h_ref) == 48


# --- run_ensemble -----------------------------------------------------------


def test_coarse_equals_reference_at_same_step():
    rb = RigidBody()
    cfg = EnsembleConfig(n_paths=1, base_seed=5, T=T, h_list=(2**-7,), h_ref=2**-7)
    res = run_ensemble(rb, rb.initial_state(), cfg)
    np.testing.assert_array_equal(res.levels[2**-7], res.ref)


def test_deterministic_model_paths_identical():
    det = DeterministicRigidBody()
    cfg = EnsembleConfig(n_paths=4, base_seed=1, T=T, h_list=(2**-6,), h_ref=2**-8)
    res = run_ensemble(det, det.initial_state(), cfg)
    for p in range(1, 4):
        np.testing.assert_array_equal(res.ref[:, p], res.ref[:, 0])


def test_rerun_same_seed_bitwise_identical():
    rb = RigidBody()
    cfg = EnsembleConfig(n_paths=32, base_seed=9, T=T, h_list=(2**-6, 2**-7), h_ref=2**-9)
    a = run_ensemble(rb, rb.initial_state(), cfg)
    b = run_ensemble(rb, rb.initial_state(), cfg)
    ta = build_error_table(a, cfg, "strong")
    tb = build_error_table(b, cfg, "strong")
    assert ta.to_csv() == tb.to_csv()
    np.testing.assert_array_equal(a.ref, b.ref)


def test_thread_count_does_not_change_results():
    rb = RigidBody()
    base = dict(n_paths=48, base_seed=7, T=T, h_list=(2**-6,), h_ref=2**-8, chunk_size=16)
    a = run_ensemble(rb, rb.initial_state(), EnsembleConfig(**base, threads=1))
    b = run_ensemble(rb, rb.initial_state(), EnsembleConfig(**base, threads=4))
    np.testing.assert_array_equal(a.ref, b.ref)
    np.testing.assert_array_equal(a.levels[2**-6], b.levels[2**-6])


def test_chunk_layout_stability():
    # different chunk sizes may regroup the batched fixed point, but results
    # agree far below estimator resolution
    rb = RigidBody()
    base = dict(n_paths=48, base_seed=7, T=T, h_list=(2**-6,), h_ref=2**-8)
    a = run_ensemble(rb, rb.initial_state(), EnsembleConfig(**base, chunk_size=16))
    b = run_ensemble(rb, rb.initial_state(), EnsembleConfig(**base, chunk_size=48))
    assert np.max(np.abs(a.ref - b.ref)) < 1e-13


def test_witness_tracked_across_ensemble():
    rb = RigidBody()
    cfg = EnsembleConfig(n_paths=8, base_seed=2, T=T, h_list=(2**-6,), h_ref=2**-8)
    res = run_ensemble(rb, rb.initial_state(), cfg)
    assert 0 < res.witness_max < 1e-11


def test_failed_paths_abort_by_default():
    m = Tripwire(bar=0.95, alpha=1.5)
    cfg = EnsembleConfig(n_paths=16, base_seed=3, T=1.0, h_list=(2**-4,), h_ref=2**-6,
                         chunk_size=8, record_witness=False)
    with pytest.raises(SingularFactorError, match=r"paths \["):
        run_ensemble(m, m.initial_state(), cfg)


def test_failed_paths_excluded_and_reported():
    m = Tripwire(bar=0.95, alpha=1.5)
    cfg = EnsembleConfig(n_paths=16, base_seed=3, T=1.0, h_list=(2**-4,), h_ref=2**-6,
                         chunk_size=8, exclude_failed=True, record_witness=False)
    res = run_ensemble(m, m.initial_state(), cfg)
    assert res.failed_paths == {2**-4: [15], 2**-6: [10, 11, 15]}
    assert res.n_paths_used == 13
    # the union of failures is dropped from every level, keeping coupling
    assert res.ref.shape[1] == 13
    assert res.levels[2**-4].shape[1] == 13
    assert np.all(np.isfinite(res.ref))


# --- estimators -------------------------------------------------------------


def test_strong_error_identical_is_zero():
    x = np.random.default_rng(0).standard_normal((3, 5, 4, 4))
    assert strong_error(x, x) == 0.0


def test_strong_error_single_path_single_time():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((2, 3, 3))
    assert abs(strong_error(a[None, None], b[None, None]) - frobenius_norm(a - b)) < 1e-15


def test_strong_error_shape_mismatch():
    with pytest.raises(ValueError, match="matching shape"):
        strong_error(np.zeros((2, 3, 3)), np.zeros((3, 3, 3)))


def test_strong_error_permutation_invariant():
    rng = np.random.default_rng(2)
    ref = rng.standard_normal((4, 100, 3, 3))
    coarse = ref + 0.01 * rng.standard_normal((4, 100, 3, 3))
    base = strong_error(ref, coarse)
    perm = rng.permutation(100)
    assert abs(strong_error(ref[:, perm], coarse[:, perm]) - base) < 1e-14 * base


def test_strong_error_takes_sup_over_times():
    ref = np.zeros((3, 2, 2, 2))
    coarse = np.zeros((3, 2, 2, 2))
    coarse[1, :, 0, 1] = 5.0  # worst time is the middle one, not terminal
    assert strong_error(ref, coarse) == 5.0


def test_weak_error_trivials():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((50, 3, 3))
    err, se = weak_error(x, x, lambda s: np.sum(s, axis=(-1, -2)))
    assert err == 0.0 and se == 0.0
    y = rng.standard_normal((50, 3, 3))
    err, se = weak_error(x, y, lambda s: np.full(s.shape[:-2], 2.5))
    assert err == 0.0 and se == 0.0


def test_fit_order_exact_lines():
    h = np.array([0.2, 0.1, 0.05, 0.025])
    slope, intercept, _ = fit_order(h, 3.0 * h)
    assert abs(slope - 1.0) < 1e-12
    assert abs(np.exp(intercept) - 3.0) < 1e-12
    slope, _, _ = fit_order(h, 0.7 * np.sqrt(h))
    assert abs(slope - 0.5) < 1e-12


def test_fit_order_excludes_nonpositive():
    with pytest.warns(RuntimeWarning, match="nonpositive"):
        slope, _, _ = fit_order([0.2, 0.1, 0.05], [0.2, 0.0, 0.05])
    assert abs(slope - 1.0) < 1e-12
    with pytest.raises(ValueError, match="at least two"):
        with pytest.warns(RuntimeWarning):
            fit_order([0.2, 0.1], [0.0, 0.1])


def test_standard_error_scales_with_paths():
    rb = RigidBody()
    tables = {}
    for n in (100, 400):
        cfg = EnsembleConfig(n_paths=n, base_seed=11, T=T, h_list=(2**-6,), h_ref=2**-8)
        res = run_ensemble(rb, rb.initial_state(), cfg)
        tables[n] = build_error_table(res, cfg, "strong").rows[0][2]
    ratio = tables[100] / tables[400]
    assert 1.6 < ratio < 2.4  # 1/sqrt(n): expect 2 within 20%


def test_deterministic_self_convergence_second_order():
    det = DeterministicRigidBody()
    cfg = EnsembleConfig(
        n_paths=1, base_seed=0, T=T, h_list=(2**-5, 2**-6, 2**-7, 2**-8), h_ref=2**-12
    )
    res = run_ensemble(det, det.initial_state(), cfg)
    table = build_error_table(res, cfg, "strong")
    assert 1.8 < table.slope < 2.2


def test_error_table_csv_format():
    t = ErrorTable(mode="strong", rows=[(0.5, 1e-3, 1e-5)], slope=0.5,
                   intercept=0.0, fit_residual=0.0)
    text = t.to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "h,error,stderr"
    assert lines[1] == "0.5,0.001,1.0000000000000001e-05"
    assert lines[2].startswith("slope,0.5")


# --- drift report -----------------------------------------------------------


def test_drift_report_stochastic_rigid_body():
    rb = RigidBody()
    cfg = MidpointConfig(h=2**-8)
    traj = simulate(rb, rb.initial_state(), 1500, cfg, NoiseConfig(M=3, h=cfg.h, seed=4))
    rep = drift_report(traj)
    assert rep["t"].shape == (1501,)
    assert np.max(rep["max_eig_drift"]) < 1e-12
    assert np.max(np.abs(rep["hamiltonian_rel_drift"])) > 1e-6
    assert np.max(np.abs(rep["enstrophy_rel_drift"])) < 1e-12


def test_drift_report_deterministic_energy_scales_quadratically():
    det = DeterministicRigidBody()

    def worst(h, steps):
        traj = simulate(det, det.initial_state(), steps, MidpointConfig(h=h), None)
        return np.max(np.abs(drift_report(traj)["hamiltonian_rel_drift"]))

    a = worst(2**-5, 64)
    b = worst(2**-6, 128)  # same horizon, half the step
    assert 3.0 < a / b < 5.5  # midpoint energy error is O(h^2)


# --- test functions ---------------------------------------------------------


def test_resolve_test_function():
    rb = RigidBody()
    phi = resolve_test_function("sin-sum", rb)
    X = hat(np.array([0.25, 0.0, 0.0]))
    assert abs(phi(X) - 1.0) < 1e-15  # sin(pi/2)
    with pytest.raises(ValueError, match="unknown test function"):
        resolve_test_function("nope", rb)
    with pytest.raises(ValueError, match="so\\(3\\)"):
        resolve_test_function("sin-sum", Manakov(4))


def test_weak_table_against_reference():
    rb = RigidBody()
    cfg = EnsembleConfig(
        n_paths=400, base_seed=21, T=T, h_list=(2**-5, 2**-6), h_ref=2**-9,
        test_function="sin-sum",
    )
    res = run_ensemble(rb, rb.initial_state(), cfg)
    table = build_error_table(res, cfg, "weak", phi=TEST_FUNCTIONS["sin-sum"])
    assert len(table.rows) == 2
    assert all(err >= 0 for _, err, _ in table.rows)
    assert table.terminal_rows is None
