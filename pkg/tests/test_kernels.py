"""Checks that the jitted kernels and their pure-Python sources agree.

When numba is active every public kernel is a dispatcher whose original
function is reachable through ``.py_func``; running both on the same inputs
must give bit-identical results.  With TFHH_DISABLE_NUMBA=1 the module
exposes the plain functions and these tests reduce to smoke tests.
"""

import numpy as np
import pytest

from tfhh import kernels
from tfhh.fdcmss import DecaySpec, hash_params, new_sketch

needs_numba = pytest.mark.skipif(
    not (kernels.HAS_NUMBA and kernels.USE_NUMBA),
    reason="numba disabled or unavailable",
)


def plain(fn):
    return fn.py_func if hasattr(fn, "py_func") else fn


def random_sketch_arrays(seed, depth=3, width=24, n=2000, universe=120):
    rng = np.random.default_rng(seed)
    sk = new_sketch(depth, width, seed)
    items = rng.integers(0, universe, size=n, dtype=np.uint32)
    ticks = np.arange(1, n + 1, dtype=np.int64)
    weights = DecaySpec.polynomial(2.0).raw_weights(ticks)
    return sk, items, weights


def test_env_flag_honored(monkeypatch):
    import importlib
    import tfhh.kernels as km

    monkeypatch.setenv("TFHH_DISABLE_NUMBA", "1")
    rem = importlib.reload(km)
    try:
        assert rem.USE_NUMBA is False
        assert not hasattr(rem.update_many, "py_func")
    finally:
        monkeypatch.delenv("TFHH_DISABLE_NUMBA")
        importlib.reload(km)


@needs_numba
def test_hash_item_both_paths():
    rng = np.random.default_rng(0)
    ha, hb = hash_params(5, 4)
    w = np.uint64(977)
    for _ in range(200):
        x = np.uint64(rng.integers(0, 1 << 32))
        a = kernels.hash_item(ha[2], hb[2], w, x)
        b = plain(kernels.hash_item)(ha[2], hb[2], w, x)
        assert int(a) == int(b)


@needs_numba
def test_update_many_both_paths():
    sk_a, items, weights = random_sketch_arrays(11)
    sk_b = new_sketch(sk_a.depth, sk_a.width, 11)
    kernels.update_many(
        sk_a.items, sk_a.present, sk_a.fhat, sk_a.ha, sk_a.hb, items, weights
    )
    plain(kernels.update_many)(
        sk_b.items, sk_b.present, sk_b.fhat, sk_b.ha, sk_b.hb, items, weights
    )
    assert np.array_equal(sk_a.items, sk_b.items)
    assert np.array_equal(sk_a.present, sk_b.present)
    assert np.array_equal(sk_a.fhat, sk_b.fhat)


@needs_numba
def test_merge_cells_both_paths():
    sk_a, items, weights = random_sketch_arrays(13)
    sk_b, items2, weights2 = random_sketch_arrays(14)
    sk_b = new_sketch(sk_a.depth, sk_a.width, 13)
    kernels.update_many(
        sk_b.items, sk_b.present, sk_b.fhat, sk_b.ha, sk_b.hb, items2, weights2
    )
    outs = []
    for impl in (kernels.merge_cells, plain(kernels.merge_cells)):
        io = np.zeros_like(sk_a.items)
        po = np.zeros_like(sk_a.present)
        fo = np.zeros_like(sk_a.fhat)
        impl(
            sk_a.items, sk_a.present, sk_a.fhat,
            sk_b.items, sk_b.present, sk_b.fhat,
            io, po, fo, 0.5,
        )
        outs.append((io, po, fo))
    for a, b in zip(outs[0], outs[1]):
        assert np.array_equal(a, b)


@needs_numba
def test_point_estimate_and_query_both_paths():
    sk, items, weights = random_sketch_arrays(17)
    kernels.update_many(
        sk.items, sk.present, sk.fhat, sk.ha, sk.hb, items, weights
    )
    for item in (0, 3, 57, 119, 4000):
        a = kernels.point_estimate_raw(
            sk.items, sk.present, sk.fhat, sk.ha, sk.hb, np.uint64(item)
        )
        b = plain(kernels.point_estimate_raw)(
            sk.items, sk.present, sk.fhat, sk.ha, sk.hb, np.uint64(item)
        )
        assert a == b

    tau = float(sk.fhat[0].sum()) * 0.01
    got = []
    for impl in (kernels.query_scan, plain(kernels.query_scan)):
        out_items = np.zeros(sk.depth * sk.width * 2, dtype=np.uint64)
        out_est = np.zeros(sk.depth * sk.width * 2, dtype=np.float64)
        n = impl(
            sk.items, sk.present, sk.fhat, sk.ha, sk.hb, tau,
            out_items, out_est,
        )
        got.append((n, out_items[:n].copy(), out_est[:n].copy()))
    assert got[0][0] == got[1][0]
    assert np.array_equal(got[0][1], got[1][1])
    assert np.array_equal(got[0][2], got[1][2])


@needs_numba
def test_scalar_avg_round_both_paths():
    rng = np.random.default_rng(23)
    base = rng.random(64)
    perm = rng.permutation(64)
    partners = rng.integers(0, 64, size=64)
    a = base.copy()
    b = base.copy()
    kernels.scalar_avg_round(a, perm, partners)
    plain(kernels.scalar_avg_round)(b, perm, partners)
    assert np.array_equal(a, b)


def test_mod61_reduces_correctly():
    m = (1 << 61) - 1
    f = plain(kernels._mod61)
    for v in [0, 1, m - 1, m, m + 1, 2 * m, (1 << 64) - 1]:
        assert int(f(np.uint64(v))) == v % m
