import numpy as np
import pytest

from isomidpoint import noise


def test_threshold_value_h_2pow8_l2():
    # sqrt(2*2*8*ln 2) = sqrt(32 ln 2)
    a = noise.truncation_threshold(2.0**-8, l=2)
    assert np.isclose(a, np.sqrt(32.0 * np.log(2.0)), rtol=1e-15)
    assert np.isclose(a, 4.70964, atol=5e-6)

def test_threshold_rejects_h_one():
    with pytest.raises(ValueError):
        noise.truncation_threshold(1.0)

def test_truncate_cases():
    a = 2.0
    assert noise.truncate(np.array([3.0]), a) == pytest.approx(2.0)
    assert noise.truncate(np.array([-5.0]), a) == pytest.approx(-2.0)
    x = np.array([0.3, -1.9, 1.99])
    assert np.array_equal(noise.truncate(x, a), x)

def test_config_validation():
    with pytest.raises(ValueError):
        noise.NoiseConfig(M=-1, h=0.5)
    with pytest.raises(ValueError):
        noise.NoiseConfig(M=1, h=1.0)
    with pytest.raises(ValueError):
        noise.NoiseConfig(M=1, h=0.5, l=0)
    with pytest.raises(ValueError):
        noise.NoiseConfig(M=1, h=0.5, seed=-3)

def test_block_determinism_and_purity():
    cfg = noise.NoiseConfig(M=3, h=2.0**-8, seed=42)
    b1 = noise.sample_block(42, 7, cfg, 5)
    b2 = noise.sample_block(42, 7, cfg, 5)
    assert np.array_equal(b1.xi, b2.xi)
    assert np.array_equal(b1.zeta, b2.zeta)
    # different coordinates give different draws
    assert not np.array_equal(b1.xi, noise.sample_block(42, 8, cfg, 5).xi)
    assert not np.array_equal(b1.xi, noise.sample_block(42, 7, cfg, 6).xi)
    assert not np.array_equal(b1.xi, noise.sample_block(43, 7, cfg, 5).xi)

def test_blocks_match_bulk_path_any_order():
    # per-step random access must reproduce the bulk stream, independent of order
    for M in (1, 3, 4, 5, 108):
        cfg = noise.NoiseConfig(M=M, h=2.0**-6, seed=9)
        bulk = noise.sample_path_xi(9, 2, 12, M)
        for step in (11, 0, 7, 3):
            blk = noise.sample_block(9, 2, cfg, step)
            assert np.array_equal(blk.xi, bulk[step]), (M, step)

def test_zeta_is_truncated_xi():
    cfg = noise.NoiseConfig(M=4, h=2.0**-2, l=1, seed=1)  # small A to force clipping
    hits = 0
    for step in range(200):
        b = noise.sample_block(1, 0, cfg, step)
        assert np.all(np.abs(b.zeta) <= cfg.threshold)
        assert np.array_equal(b.zeta, np.clip(b.xi, -cfg.threshold, cfg.threshold))
        hits += np.sum(np.abs(b.xi) > cfg.threshold)
    assert hits > 0  # A_{1/4} = sqrt(2 ln 4) ~ 1.67, so clipping does occur

def test_empty_channel_block():
    cfg = noise.NoiseConfig(M=0, h=0.5)
    b = noise.sample_block(0, 0, cfg, 3)
    assert b.xi.shape == (0,)
    assert b.zeta.shape == (0,)

def test_raw_normals_moments():
    xi = noise.sample_path_xi(123, 0, 250000, 4).ravel()
    n = xi.size
    assert abs(xi.mean()) < 4.0 / np.sqrt(n)
    assert abs(xi.var() - 1.0) < 4.0 * np.sqrt(2.0 / n)

def test_tail_probability_matches_gaussian():
    # P(|xi| > A_h) for h = 2^-7, l = 2 is about 1.06e-5; bound it loosely
    cfg = noise.NoiseConfig(M=1, h=2.0**-7, seed=5)
    xi = noise.sample_path_xi(5, 1, 10**6, 1).ravel()
    frac = np.mean(np.abs(xi) > cfg.threshold)
    assert frac < 1e-4

def test_aggregate_identity_and_composition():
    xi = noise.sample_path_xi(7, 3, 64, 2)
    assert np.array_equal(noise.aggregate_path(xi, 1), xi)
    two_stage = noise.aggregate_path(noise.aggregate_path(xi, 4), 8)
    one_stage = noise.aggregate_path(xi, 32)
    assert np.allclose(two_stage, one_stage, atol=1e-14)

def test_aggregate_preserves_brownian_increments():
    # sqrt(r h) * coarse xi  ==  sum over the window of sqrt(h) * fine xi
    h = 2.0**-9
    xi = noise.sample_path_xi(11, 0, 32, 3)
    r = 8
    coarse = noise.aggregate_path(xi, r)
    for j in range(coarse.shape[0]):
        fine_sum = np.sqrt(h) * xi[j * r : (j + 1) * r].sum(axis=0)
        assert np.allclose(np.sqrt(r * h) * coarse[j], fine_sum, rtol=1e-13)

def test_aggregate_variance_is_unit():
    xi = np.stack([noise.sample_path_xi(21, p, 16, 1) for p in range(100000)])
    coarse = noise.aggregate_path(xi, 16)[:, 0, 0]
    assert abs(coarse.var() - 1.0) < 4.0 * np.sqrt(2.0 / coarse.size)
    assert abs(coarse.mean()) < 4.0 / np.sqrt(coarse.size)

def test_aggregate_rejects_bad_ratio():
    xi = np.zeros((12, 2))
    with pytest.raises(ValueError):
        noise.aggregate_path(xi, 3)
    with pytest.raises(ValueError):
        noise.aggregate_path(xi, 8)

def test_batched_aggregation_matches_per_path():
    paths = np.stack([noise.sample_path_xi(31, p, 16, 3) for p in range(5)])
    got = noise.aggregate_path(paths, 4)
    for p in range(5):
        assert np.array_equal(got[p], noise.aggregate_path(paths[p], 4))
