# Crypto microbenchmarks: median-of-runs timings for signature and
# threshold-encryption operations, plus a least-squares helper for checking
# how costs scale with ring size and threshold.

from __future__ import annotations

import random
import statistics
import time

import numpy as np

from . import tenc, trs

DEFAULT_ITERS = 30


def _median_ns(fn, iters: int) -> int:
    samples = []
    for _ in range(max(iters, 1)):
        t0 = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - t0)
    return int(statistics.median(samples))


def linear_fit(xs, ys):
    """Least-squares line fit; returns (slope, intercept, r_squared)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(((ys - pred) ** 2).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def _ring_fixture(n: int, seed: int = 2024):
    rng = random.Random(seed)
    pairs = [trs.keygen(rng) for _ in range(n)]
    ring = trs.Ring(tuple(pk for _, pk in pairs))
    tag = trs.IssueTag(ring, trs.make_issue(b"bench", "INIT"))
    return rng, pairs, ring, tag


def bench_trs(sizes, iters: int = DEFAULT_ITERS):
    """Per ring size: median sign and verify times in ns."""
    rows = []
    for n in sizes:
        rng, pairs, ring, tag = _ring_fixture(n)
        secret = pairs[0][0]
        msg = b"benchmark message"
        sig = trs.sign(1, secret, tag, msg, rng)
        sign_ns = _median_ns(lambda: trs.sign(1, secret, tag, msg, rng), iters)
        verify_ns = _median_ns(
            lambda: trs.verify(tag, msg, trs.RingSignature(sig.a1, sig.c, sig.z)), iters
        )
        rows.append({"n": n, "sign_ns": sign_ns, "verify_ns": verify_ns})
    return rows


def bench_trs_trace(sizes, iters: int = 10):
    """Iterative verify-and-trace over a store of n prior signatures."""
    rows = []
    for n in sizes:
        rng, pairs, ring, tag = _ring_fixture(n)
        sigs = []
        for i in range(1, n + 1):
            m = b"m%d" % i
            sigs.append((i, m, trs.sign(i, pairs[i - 1][0], tag, m, rng)))

        def run_once():
            store = trs.TraceStore()
            for ident, (i, m, sig) in enumerate(sigs):
                tag_points = trs.verify(tag, m, trs.RingSignature(sig.a1, sig.c, sig.z))
                store.check_and_add(ident, tag_points)

        rows.append({"n": n, "verify_trace_ns": _median_ns(run_once, iters)})
    return rows


def bench_tenc(iters: int = DEFAULT_ITERS * 2, n: int = 10, t: int = 3):
    """Median times for the four per-message threshold-encryption ops."""
    rng = random.Random(99)
    pub, keys = tenc.deal(n, t, rng)
    plaintext = bytes(1024)
    c = tenc.encrypt(pub, plaintext, rng, label=b"bench")
    sh = tenc.share_decrypt(pub, keys[0], c, rng)
    return {
        "encrypt_ns": _median_ns(lambda: tenc.encrypt(pub, plaintext, rng, label=b"bench"), iters),
        "verify_enc_ns": _median_ns(lambda: tenc.verify_enc(pub, c), iters),
        "share_decrypt_ns": _median_ns(lambda: tenc.share_decrypt(pub, keys[0], c, rng), iters),
        "verify_share_ns": _median_ns(lambda: tenc.verify_share(pub, c, sh), iters),
    }


def bench_combine(ks, iters: int = 10):
    """Combine time as the recovery threshold k grows (n = 3k)."""
    rows = []
    rng = random.Random(7)
    for k in ks:
        t = k - 1
        n = 3 * t + 1
        pub, keys = tenc.deal(n, t, rng)
        c = tenc.encrypt(pub, bytes(1024), rng, label=b"bench")
        shares = [tenc.share_decrypt(pub, key, c, rng) for key in keys[:k]]
        rows.append({"k": k, "combine_ns": _median_ns(lambda: tenc.combine(pub, c, shares), iters)})
    return rows
