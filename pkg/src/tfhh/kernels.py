"""Hot numeric kernels, JIT-compiled with numba when available.

Every kernel is written once in nopython-compatible Python and compiled
with ``numba.njit`` unless the environment variable ``TFHH_DISABLE_NUMBA``
is set (or numba is not importable), in which case the same source runs
as plain Python over numpy arrays.  Both paths therefore share identical
semantics; ``benchmarks/bench_kernels.py`` measures the speed gap.

Hashing uses ``((a*x + b) mod P) mod w`` with P = 2^61 - 1.  All
intermediates are kept below 2^64 by splitting the multiplication, so
uint64 arithmetic never wraps.
"""

import os

import numpy as np

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not os.environ.get("TFHH_DISABLE_NUMBA")

# Mersenne prime 2^61 - 1 and typed shift/mask constants (typed so that
# uint64 expressions never mix with signed ints).
MERSENNE61 = np.uint64((1 << 61) - 1)
_S61 = np.uint64(61)
_S32 = np.uint64(32)
_S29 = np.uint64(29)
_MASK32 = np.uint64(0xFFFFFFFF)
_MASK29 = np.uint64((1 << 29) - 1)


def _mod61(v):
    # v < 2^64 -> v mod (2^61 - 1), using 2^61 = 1 (mod P)
    v = (v >> _S61) + (v & MERSENNE61)
    if v >= MERSENNE61:
        v -= MERSENNE61
    return v


def hash_item(a, b, width, x):
    """((a*x + b) mod (2^61-1)) mod width for a, b < 2^61 and x < 2^32."""
    t = _mod61((a & _MASK32) * x)
    u = _mod61((a >> _S32) * x)
    # u * 2^32 = (u >> 29) * 2^61 + (u & mask29) * 2^32  =  (u >> 29) + ... (mod P)
    v = _mod61((u >> _S29) + ((u & _MASK29) << _S32))
    return _mod61(t + v + b) % width


def _cell_update(items, present, fhat, j, k, it, x):
    # 2-counter summary update: increment if monitored, adopt a free
    # counter otherwise, else bump the minimum counter and take it over
    # (ties evict the lower slot).
    if present[j, k, 0] != 0 and items[j, k, 0] == it:
        fhat[j, k, 0] += x
        return
    if present[j, k, 1] != 0 and items[j, k, 1] == it:
        fhat[j, k, 1] += x
        return
    if x == 0.0:
        # a zero-weight occurrence of an unmonitored item records nothing;
        # adopting it would break the "zero frequency means free counter" rule
        return
    if present[j, k, 0] == 0:
        items[j, k, 0] = it
        present[j, k, 0] = 1
        fhat[j, k, 0] = x
        return
    if present[j, k, 1] == 0:
        items[j, k, 1] = it
        present[j, k, 1] = 1
        fhat[j, k, 1] = x
        return
    c = 0 if fhat[j, k, 0] <= fhat[j, k, 1] else 1
    fhat[j, k, c] += x
    items[j, k, c] = it


def update_many(items, present, fhat, ha, hb, stream_items, weights):
    """Feed a weighted item stream through every row of the grid."""
    d = items.shape[0]
    width = np.uint64(items.shape[1])
    n = stream_items.shape[0]
    for t in range(n):
        it = stream_items[t]
        x = weights[t]
        xi = np.uint64(it)
        for j in range(d):
            k = hash_item(ha[j], hb[j], width, xi)
            _cell_update(items, present, fhat, j, k, it, x)


def point_estimate_raw(items, present, fhat, ha, hb, it):
    """Minimum over rows of the item's counter (or the cell minimum)."""
    d = items.shape[0]
    width = np.uint64(items.shape[1])
    xi = np.uint64(it)
    best = np.inf
    for j in range(d):
        k = hash_item(ha[j], hb[j], width, xi)
        if present[j, k, 0] != 0 and items[j, k, 0] == it:
            v = fhat[j, k, 0]
        elif present[j, k, 1] != 0 and items[j, k, 1] == it:
            v = fhat[j, k, 1]
        else:
            v = fhat[j, k, 0] if fhat[j, k, 0] < fhat[j, k, 1] else fhat[j, k, 1]
        if v < best:
            best = v
    return best


def merge_cells(ia, pa, fa, ib, pb, fb, io, po, fo, out_scale):
    """Cell-wise merge of two grids into preallocated output arrays.

    Per cell: matching items sum their counters, unmatched items add the
    other cell's minimum counter value, and the two largest candidates
    survive (ties broken by smaller item id).  ``out_scale`` multiplies
    the surviving frequencies, so halving for an averaging exchange costs
    no extra pass.
    """
    d = ia.shape[0]
    w = ia.shape[1]
    cit = np.empty(4, np.uint32)
    cfr = np.empty(4, np.float64)
    for j in range(d):
        for k in range(w):
            ma = fa[j, k, 0] if fa[j, k, 0] < fa[j, k, 1] else fa[j, k, 1]
            mb = fb[j, k, 0] if fb[j, k, 0] < fb[j, k, 1] else fb[j, k, 1]
            n = 0
            used0 = False
            used1 = False
            for c in range(2):
                if pa[j, k, c] != 0:
                    it = ia[j, k, c]
                    fr = fa[j, k, c]
                    if pb[j, k, 0] != 0 and ib[j, k, 0] == it:
                        fr += fb[j, k, 0]
                        used0 = True
                    elif pb[j, k, 1] != 0 and ib[j, k, 1] == it:
                        fr += fb[j, k, 1]
                        used1 = True
                    else:
                        fr += mb
                    cit[n] = it
                    cfr[n] = fr
                    n += 1
            if pb[j, k, 0] != 0 and not used0:
                cit[n] = ib[j, k, 0]
                cfr[n] = fb[j, k, 0] + ma
                n += 1
            if pb[j, k, 1] != 0 and not used1:
                cit[n] = ib[j, k, 1]
                cfr[n] = fb[j, k, 1] + ma
                n += 1
            best = -1
            second = -1
            for c in range(n):
                if best < 0 or cfr[c] > cfr[best] or (
                    cfr[c] == cfr[best] and cit[c] < cit[best]
                ):
                    second = best
                    best = c
                elif second < 0 or cfr[c] > cfr[second] or (
                    cfr[c] == cfr[second] and cit[c] < cit[second]
                ):
                    second = c
            for s in range(2):
                src = best if s == 0 else second
                if src >= 0:
                    io[j, k, s] = cit[src]
                    po[j, k, s] = 1
                    fo[j, k, s] = cfr[src] * out_scale
                else:
                    io[j, k, s] = 0
                    po[j, k, s] = 0
                    fo[j, k, s] = 0.0


def query_scan(items, present, fhat, ha, hb, tau_raw, out_items, out_est):
    """Collect items whose cell-max counter and point estimate beat tau."""
    d = items.shape[0]
    w = items.shape[1]
    count = 0
    for j in range(d):
        for k in range(w):
            if present[j, k, 0] == 0 and present[j, k, 1] == 0:
                continue
            c = 0 if fhat[j, k, 0] >= fhat[j, k, 1] else 1
            if fhat[j, k, c] > tau_raw:
                it = items[j, k, c]
                est = point_estimate_raw(items, present, fhat, ha, hb, it)
                if est > tau_raw:
                    out_items[count] = it
                    out_est[count] = est
                    count += 1
    return count


def scalar_avg_round(values, perm, partners):
    """One sequential round of pairwise averaging on a scalar per node."""
    p = perm.shape[0]
    for idx in range(p):
        i = perm[idx]
        j = partners[idx]
        m = (values[i] + values[j]) * 0.5
        values[i] = m
        values[j] = m


if USE_NUMBA:
    _jit = numba.njit(cache=True)
    # rebind in dependency order so compiled callers resolve compiled callees
    _mod61 = _jit(_mod61)
    hash_item = _jit(hash_item)
    _cell_update = _jit(_cell_update)
    update_many = _jit(update_many)
    point_estimate_raw = _jit(point_estimate_raw)
    merge_cells = _jit(merge_cells)
    query_scan = _jit(query_scan)
    scalar_avg_round = _jit(scalar_avg_round)
