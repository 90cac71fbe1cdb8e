#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Builds synthetic inputs shaped like a real week of telemetry (cumulative
snapshot streams, job interval tables, job-bin delta matrices) and times
each kernel on both backends. Numba timings exclude JIT compilation (one
warm-up call per kernel).

Usage:
    python benchmarks/bench_kernels.py [--streams N] [--snapshots N]
                                       [--job-bins N] [--repeat R]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from iorisk import _kernels
from iorisk.ops import N_COUNTERS

BIN_WIDTH = 360


def build_deltify_input(rng, n_streams, n_snapshots):
    """Sorted cumulative snapshot streams with mixed cadence and resets."""
    stream = np.repeat(np.arange(n_streams, dtype=np.int64), n_snapshots)
    gaps = rng.integers(60, 720, size=(n_streams, n_snapshots))
    ts = (100 + np.cumsum(gaps, axis=1)).reshape(-1)
    steps = rng.integers(0, 500, size=(n_streams * n_snapshots, N_COUNTERS))
    values = np.empty_like(steps)
    for s in range(n_streams):
        lo = s * n_snapshots
        hi = lo + n_snapshots
        values[lo:hi] = np.cumsum(steps[lo:hi], axis=0)
        # a couple of resets per stream
        for k in rng.integers(2, n_snapshots, size=2):
            values[lo + k:hi] -= values[lo + k - 1]
    np.maximum(values, 0, out=values)
    return stream, ts.astype(np.int64), values.astype(np.int64)


def build_attribute_input(rng, n_nodes, n_bins, jobs_per_node=6):
    node_ptr = [0]
    starts, ends, of = [], [], []
    job = 0
    horizon = n_bins * BIN_WIDTH
    for node in range(n_nodes):
        t = 0
        for _ in range(jobs_per_node):
            t += int(rng.integers(0, horizon // (2 * jobs_per_node)))
            dur = int(rng.integers(BIN_WIDTH, horizon // jobs_per_node))
            starts.append(t)
            ends.append(t + dur)
            of.append(job)
            job += 1
            t += dur
        node_ptr.append(len(starts))
    m = n_nodes * n_bins
    node_idx = np.repeat(np.arange(n_nodes, dtype=np.int32), n_bins)
    fs_idx = np.zeros(m, dtype=np.int32)
    bin_start = np.tile(np.arange(n_bins, dtype=np.int64) * BIN_WIDTH,
                        n_nodes)
    deltas = rng.integers(0, 3000, size=(m, N_COUNTERS))
    return (node_idx, fs_idx, bin_start, deltas, BIN_WIDTH,
            np.asarray(node_ptr, dtype=np.int64),
            np.asarray(starts, dtype=np.int64),
            np.asarray(ends, dtype=np.int64),
            np.asarray(of, dtype=np.int32))


def build_risk_input(rng, n_rows, n_fs=3):
    deltas = rng.integers(0, 5000, size=(n_rows, N_COUNTERS)).astype(
        np.float64)
    fs_idx = rng.integers(0, n_fs, size=n_rows).astype(np.int32)
    avg = rng.uniform(0, 100, size=(n_fs, N_COUNTERS))
    avg[rng.random(avg.shape) < 0.25] = 0.0
    md_total = rng.uniform(10, 500, size=n_fs)
    return deltas, fs_idx, avg, md_total, 2.0, 0.25, 1.0


def best_of(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--streams", type=int, default=200,
                        help="snapshot streams (node x fs pairs)")
    parser.add_argument("--snapshots", type=int, default=1700,
                        help="snapshots per stream")
    parser.add_argument("--job-bins", type=int, default=300_000,
                        help="rows for the risk kernel")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if not _kernels.HAVE_NUMBA:
        print("numba not importable: nothing to compare")
        return 1
    if not _kernels.NUMBA_ENABLED:
        print("note: IORISK_NUMBA=0 in the environment; "
              "importing both backends anyway")
        return 1

    rng = np.random.default_rng(7)
    rows = []

    d_in = build_deltify_input(rng, args.streams, args.snapshots)
    d_args = (*d_in, BIN_WIDTH, 3 * BIN_WIDTH)
    _kernels.deltify_pairs_numba(*d_args)  # JIT warm-up
    t_nb = best_of(_kernels.deltify_pairs_numba, d_args, args.repeat)
    t_np = best_of(_kernels.deltify_pairs_numpy, d_args, args.repeat)
    n_pairs = args.streams * (args.snapshots - 1)
    rows.append(("deltify", f"{n_pairs} pairs", t_np, t_nb))

    a_args = build_attribute_input(rng, args.streams,
                                   args.snapshots)
    _kernels.attribute_shares_numba(*a_args)
    t_nb = best_of(_kernels.attribute_shares_numba, a_args, args.repeat)
    t_np = best_of(_kernels.attribute_shares_numpy, a_args, args.repeat)
    rows.append(("attribute", f"{len(a_args[0])} node-bins", t_np, t_nb))

    r_args = build_risk_input(rng, args.job_bins)
    _kernels.risk_contribs_numba(*r_args)
    t_nb = best_of(_kernels.risk_contribs_numba, r_args, args.repeat)
    t_np = best_of(_kernels.risk_contribs_numpy, r_args, args.repeat)
    rows.append(("risk", f"{args.job_bins} job-bins", t_np, t_nb))

    print(f"{'kernel':<10} {'workload':<22} {'numpy':>10} {'numba':>10} "
          f"{'speedup':>8}")
    for name, workload, t_np, t_nb in rows:
        print(f"{name:<10} {workload:<22} {t_np * 1e3:>8.1f}ms "
              f"{t_nb * 1e3:>8.1f}ms {t_np / t_nb:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
