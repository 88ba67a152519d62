import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from duotok import bestrq
from duotok.errors import BadMagicError, DataError, TruncatedError
from duotok.features import FeatureSequence


def brute_force_targets(x, rq):
    out = []
    for row in x:
        z = row @ rq.projection
        n = math.sqrt(sum(v * v for v in z))
        if n > 0:
            z = z / n
        best, best_d = 0, math.inf
        for k, c in enumerate(rq.codebook):
            d = sum((a - b) ** 2 for a, b in zip(z, c))
            if d < best_d:
                best, best_d = k, d
        out.append(best)
    return np.array(out)


def test_quantizer_is_seed_determined():
    a = bestrq.init_random_quantizer(7, 12, 4, 32)
    b = bestrq.init_random_quantizer(7, 12, 4, 32)
    c = bestrq.init_random_quantizer(8, 12, 4, 32)
    np.testing.assert_array_equal(a.projection, b.projection)
    np.testing.assert_array_equal(a.codebook, b.codebook)
    assert not np.array_equal(a.projection, c.projection)
    np.testing.assert_allclose(np.linalg.norm(a.codebook, axis=1), 1, atol=1e-6)


def test_quantizer_is_immutable():
    rq = bestrq.init_random_quantizer(0, 4, 4, 8)
    with pytest.raises(ValueError):
        rq.codebook[0, 0] = 1.0


@pytest.mark.parametrize("K", [0, 1])
def test_quantizer_rejects_tiny_codebook(K):
    with pytest.raises(ValueError):
        bestrq.init_random_quantizer(0, 4, 4, K)


def test_exact_match_target():
    rq = bestrq.init_random_quantizer(3, 4, 4, 16)
    # projection is square and invertible: solve for a frame landing on row 7
    x = np.linalg.solve(rq.projection.T, rq.codebook[7])
    t = bestrq.assign_targets(FeatureSequence(x[None, :], 100.0), rq)
    assert t.tolist() == [7]


def test_targets_match_exhaustive_scan():
    rng = np.random.default_rng(11)
    rq = bestrq.init_random_quantizer(5, 10, 6, 16)
    x = rng.standard_normal((32, 10))
    got = bestrq.assign_targets(FeatureSequence(x, 100.0), rq)
    np.testing.assert_array_equal(got, brute_force_targets(x, rq))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), K=st.integers(2, 64), U=st.integers(1, 128), d=st.integers(1, 8))
def test_targets_brute_force_property(seed, K, U, d):
    rng = np.random.default_rng(seed)
    rq = bestrq.init_random_quantizer(seed, d, 3, K)
    x = rng.standard_normal((U, d))
    np.testing.assert_array_equal(bestrq.assign_targets(FeatureSequence(x, 1.0), rq), brute_force_targets(x, rq))


def test_targets_scale_invariant():
    rng = np.random.default_rng(2)
    rq = bestrq.init_random_quantizer(1, 8, 4, 32)
    x = rng.standard_normal((50, 8))
    a = bestrq.assign_targets(FeatureSequence(x, 1.0), rq)
    b = bestrq.assign_targets(FeatureSequence(3 * x, 1.0), rq)
    np.testing.assert_array_equal(a, b)


def test_zero_projection_falls_back_to_raw_distance():
    rq = bestrq.init_random_quantizer(1, 3, 3, 8)
    x = np.zeros((2, 3))
    t = bestrq.assign_targets(FeatureSequence(x, 1.0), rq)
    # rows are unit only to rounding, so the shortest stored row wins
    assert t.tolist() == brute_force_targets(x, rq).tolist()
    assert t[0] == np.argmin(np.sum(rq.codebook**2, axis=1))


def test_dimension_mismatch():
    rq = bestrq.init_random_quantizer(1, 3, 3, 8)
    with pytest.raises(DataError):
        bestrq.assign_targets(FeatureSequence(np.zeros((2, 4)), 1.0), rq)


def test_target_entropy_near_uniform():
    K = 64
    rq = bestrq.init_random_quantizer(0, 16, 16, K)
    x = np.random.default_rng(1).standard_normal((100_000, 16))
    t = bestrq.assign_targets(FeatureSequence(x, 100.0), rq)
    p = np.bincount(t, minlength=K) / t.size
    p = p[p > 0]
    assert -np.sum(p * np.log(p)) >= 0.9 * math.log(K)


def test_mask_example_counts():
    plan = bestrq.sample_mask(100, 0.4, 4, seed=0)
    n = int(plan.flags.sum())
    assert 36 <= n <= 44
    # masked runs are unions of whole spans: every run length is a multiple of 4
    runs = np.diff(np.flatnonzero(np.diff(np.r_[0, plan.flags.astype(int), 0])))[::2]
    assert np.all(runs % 4 == 0)


def test_mask_rejects_infeasible():
    with pytest.raises(ValueError):
        bestrq.sample_mask(1, 0.5, 1, seed=0)
    with pytest.raises(ValueError):
        bestrq.sample_mask(10, 0.0, 2, seed=0)


def test_mask_seeded():
    a = bestrq.sample_mask(200, 0.3, 5, seed=9)
    b = bestrq.sample_mask(200, 0.3, 5, seed=9)
    np.testing.assert_array_equal(a.flags, b.flags)


@settings(max_examples=100, deadline=None)
@given(U=st.integers(1, 400), ratio=st.floats(0.01, 0.99), span=st.integers(1, 12), seed=st.integers(0, 2**31))
def test_mask_fraction_bound(U, ratio, span, seed):
    if span > U or ratio * U < 1:
        return
    plan = bestrq.sample_mask(U, ratio, span, seed)
    assert abs(plan.masked_fraction - ratio) <= span / U + 1e-12


def uniform_lp(U, K):
    return np.full((U, K), -math.log(K))


def test_mlm_loss_perfect_and_uniform():
    U, K = 20, 8
    targets = np.arange(U) % K
    plan = bestrq.sample_mask(U, 0.4, 2, seed=1)
    with np.errstate(divide="ignore"):
        perfect = np.log(np.eye(K)[targets])
    assert bestrq.mlm_loss(perfect, targets, plan) == 0
    m = int(plan.flags.sum())
    assert bestrq.mlm_loss(uniform_lp(U, K), targets, plan) == pytest.approx(m * math.log(K))
    assert bestrq.mlm_loss(uniform_lp(U, K), targets, plan, "mean") == pytest.approx(math.log(K))


def test_mlm_loss_ignores_unmasked_rows():
    rng = np.random.default_rng(0)
    U, K = 30, 6
    logits = rng.standard_normal((U, K))
    lp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    targets = rng.integers(0, K, U)
    plan = bestrq.sample_mask(U, 0.4, 3, seed=2)
    base = bestrq.mlm_loss(lp, targets, plan)
    t = int(np.flatnonzero(~plan.flags)[0])
    lp2 = lp.copy()
    lp2[t] = np.log(np.full(K, 1 / K))
    assert bestrq.mlm_loss(lp2, targets, plan) == base


def test_mlm_loss_validation():
    plan = bestrq.sample_mask(10, 0.5, 1, seed=0)
    with pytest.raises(ValueError, match="normalised"):
        bestrq.mlm_loss(np.zeros((10, 4)), np.zeros(10, int), plan)
    with pytest.raises(ValueError, match="range"):
        bestrq.mlm_loss(uniform_lp(10, 4), np.full(10, 4), plan)


def test_quantizer_file_roundtrip(tmp_path):
    rq = bestrq.init_random_quantizer(123, 5, 3, 10)
    p = tmp_path / "q.dtrq"
    bestrq.save_quantizer(p, rq)
    back = bestrq.load_quantizer(p)
    assert back == rq
    np.testing.assert_array_equal(back.codebook, rq.codebook)
    raw = p.read_bytes()
    with pytest.raises(BadMagicError):
        bestrq.quantizer_from_bytes(b"XXXX" + raw[4:])
    with pytest.raises(TruncatedError):
        bestrq.quantizer_from_bytes(raw[:-3])
