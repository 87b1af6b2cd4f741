"""Compiled inner loops for bit-flipping decoders and tally updates.

Supports are passed as padded int64 arrays (-1 marks padding).  A circulant
column c of a block with support S touches rows (c - k) mod p, k in S.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _counters(s, sup, p, out):
    # out[j, c] = sum_{k in sup[j]} s[(c - k) mod p]
    nb = sup.shape[0]
    for j in range(nb):
        for c in range(p):
            out[j, c] = 0
        for kk in range(sup.shape[1]):
            k = sup[j, kk]
            if k < 0:
                break
            # c - k >= 0 for c >= k; wraps for c < k
            for c in range(k, p):
                out[j, c] += s[c - k]
            for c in range(k):
                out[j, c] += s[c - k + p]


@njit(cache=True)
def _correlate(sig, qsup, p, out):
    # out[j, c] = sum_i sum_{k in qsup[i, j]} sig[i, (c - k) mod p]
    n0 = qsup.shape[0]
    for j in range(n0):
        for c in range(p):
            out[j, c] = 0
        for i in range(n0):
            for kk in range(qsup.shape[2]):
                k = qsup[i, j, kk]
                if k < 0:
                    break
                for c in range(k, p):
                    out[j, c] += sig[i, c - k]
                for c in range(k):
                    out[j, c] += sig[i, c - k + p]


@njit(cache=True)
def _flip_column(s, upd, j, c, p):
    # xor column c of block j into the syndrome; returns weight change
    dw = 0
    for kk in range(upd.shape[1]):
        k = upd[j, kk]
        if k < 0:
            break
        r = c - k
        if r < 0:
            r += p
        if s[r]:
            s[r] = 0
            dw -= 1
        else:
            s[r] = 1
            dw += 1
    return dw


@njit(cache=True)
def _flip_column_tracked(s, upd, j, c, p, sig):
    # as _flip_column, keeping the counters of the same matrix up to date
    dw = 0
    nb = upd.shape[0]
    for kk in range(upd.shape[1]):
        k = upd[j, kk]
        if k < 0:
            break
        r = c - k
        if r < 0:
            r += p
        if s[r]:
            s[r] = 0
            dw -= 1
            delta = -1
        else:
            s[r] = 1
            dw += 1
            delta = 1
        for i in range(nb):
            for k2 in range(upd.shape[1]):
                kx = upd[i, k2]
                if kx < 0:
                    break
                x = r + kx
                if x >= p:
                    x -= p
                sig[i, x] += delta
    return dw


@njit(cache=True)
def decode_syndrome(s, est, stage1, qsup, upd, p, max_iter, thresholds, cap, two_stage):
    """Parallel bit flipping on syndrome s (modified in place).

    est receives the estimate (length n_blocks * p).  thresholds empty means
    max-counter flipping; cap > 0 limits flips per iteration.
    Returns (success, iterations).
    """
    nb = upd.shape[0]
    sw = 0
    for r in range(p):
        sw += s[r]
    for x in range(est.shape[0]):
        est[x] = 0
    if sw == 0:
        return True, 0
    sig = np.zeros((stage1.shape[0], p), dtype=np.int32)
    metric = np.zeros((nb, p), dtype=np.int32) if two_stage else sig
    flips = np.empty(nb * p, dtype=np.int64)
    # single-stage decoders update their counters incrementally
    _counters(s, stage1, p, sig)
    for it in range(max_iter):
        if two_stage:
            if it > 0:
                _counters(s, stage1, p, sig)
            _correlate(sig, qsup, p, metric)
        if thresholds.shape[0] == 0:
            thr = 0
            for j in range(nb):
                for c in range(p):
                    if metric[j, c] > thr:
                        thr = metric[j, c]
            if thr == 0:
                return False, it + 1
        else:
            thr = thresholds[min(it, thresholds.shape[0] - 1)]
        nf = 0
        for j in range(nb):
            for c in range(p):
                if metric[j, c] >= thr:
                    flips[nf] = j * p + c
                    nf += 1
        if cap > 0 and nf > cap:
            nf = cap
        for f in range(nf):
            pos = flips[f]
            j = pos // p
            c = pos - j * p
            est[pos] ^= 1
            if two_stage:
                sw += _flip_column(s, upd, j, c, p)
            else:
                sw += _flip_column_tracked(s, upd, j, c, p, sig)
        if sw == 0:
            return True, it + 1
    return False, max_iter


@njit(cache=True)
def syndrome_from_support(sup, upd, p, s):
    for r in range(p):
        s[r] = 0
    for x in range(sup.shape[0]):
        pos = sup[x]
        j = pos // p
        _flip_column(s, upd, j, pos - j * p, p)


@njit(cache=True)
def expand_support(sup, qsup, p, out):
    # out = indicator of e Q^T given e's support; out has n0*p entries
    n0 = qsup.shape[0]
    for x in range(out.shape[0]):
        out[x] = 0
    for x in range(sup.shape[0]):
        pos = sup[x]
        j = pos // p
        c = pos - j * p
        for i in range(n0):
            for kk in range(qsup.shape[2]):
                k = qsup[i, j, kk]
                if k < 0:
                    break
                r = c - k
                if r < 0:
                    r += p
                out[i * p + r] ^= 1


@njit(cache=True)
def decode_batch(supports, pub_upd, stage1, qsup, upd, p, max_iter, thresholds, cap,
                 two_stage, expanded_target, fail, iters):
    """Decode B ciphertext syndromes given their error supports.

    fail[b] = 1 unless the decoder annihilates the syndrome AND its estimate
    equals the true error (e, or e Q^T when expanded_target).
    """
    nb = upd.shape[0]
    n = nb * p
    s = np.zeros(p, dtype=np.uint8)
    est = np.zeros(n, dtype=np.uint8)
    truth = np.zeros(n, dtype=np.uint8)
    for b in range(supports.shape[0]):
        sup = supports[b]
        syndrome_from_support(sup, pub_upd, p, s)
        ok, it = decode_syndrome(s, est, stage1, qsup, upd, p, max_iter, thresholds, cap, two_stage)
        iters[b] = it
        if ok:
            if expanded_target:
                expand_support(sup, qsup, p, truth)
            else:
                for x in range(n):
                    truth[x] = 0
                for x in range(sup.shape[0]):
                    truth[sup[x]] = 1
            for x in range(n):
                if truth[x] != est[x]:
                    ok = False
                    break
        fail[b] = 0 if ok else 1


@njit(cache=True)
def block_distances(sup, p, blk, out):
    """Distinct distances of the ones of e falling in block blk; returns count."""
    lo = blk * p
    tmp = np.empty(sup.shape[0], dtype=np.int64)
    m = 0
    for x in range(sup.shape[0]):
        if lo <= sup[x] < lo + p:
            tmp[m] = sup[x] - lo
            m += 1
    cnt = 0
    for a in range(m):
        for b in range(a + 1, m):
            d = tmp[b] - tmp[a]
            if d < 0:
                d = -d
            if p - d < d:
                d = p - d
            dup = False
            for q in range(cnt):
                if out[q] == d:
                    dup = True
                    break
            if not dup:
                out[cnt] = d
                cnt += 1
    return cnt


@njit(cache=True)
def tally_blocks(supports, fails, p, blocks, a, b):
    """a[blk_index, d] += fail, b[blk_index, d] += 1 over distinct distances of each listed block."""
    buf = np.empty(supports.shape[1] * supports.shape[1] + 1, dtype=np.int64)
    for q in range(supports.shape[0]):
        for bi in range(blocks.shape[0]):
            cnt = block_distances(supports[q], p, blocks[bi], buf)
            for x in range(cnt):
                b[bi, buf[x]] += 1
                a[bi, buf[x]] += fails[q]


@njit(cache=True)
def tally_union(supports, fails, p, n0, a, b):
    """Tally over the union of the spectra of all n0 blocks (each distance once per query)."""
    buf = np.empty(supports.shape[1] * supports.shape[1] + 1, dtype=np.int64)
    seen = np.zeros(p // 2 + 1, dtype=np.int64)
    for q in range(supports.shape[0]):
        stamp = q + 1
        for blk in range(n0):
            cnt = block_distances(supports[q], p, blk, buf)
            for x in range(cnt):
                d = buf[x]
                if seen[d] != stamp:
                    seen[d] = stamp
                    b[d] += 1
                    a[d] += fails[q]
