"""Backend agreement: the numba kernels and the numpy fallbacks must
produce identical results on randomized inputs."""
from __future__ import annotations

import numpy as np
import pytest

from iorisk import _kernels
from iorisk._kernels import (attribute_shares_numpy, deltify_pairs_numpy,
                             risk_contribs_numpy)
from iorisk.ops import N_COUNTERS

needs_numba = pytest.mark.skipif(not _kernels.NUMBA_ENABLED,
                                 reason="numba backend disabled")


def _random_stream(rng, n_streams=6, n_samples=40, bin_width=360):
    """Sorted (stream, ts, cumulative values) with irregular cadence."""
    stream, ts, values = [], [], []
    for s in range(n_streams):
        t = int(rng.integers(1, 500))
        cum = rng.integers(0, 1000, size=N_COUNTERS)
        for _ in range(n_samples):
            t += int(rng.integers(1, bin_width * 5))
            if rng.random() < 0.05:  # occasional reset
                cum = rng.integers(0, 50, size=N_COUNTERS)
            else:
                cum = cum + rng.integers(0, 800, size=N_COUNTERS)
            stream.append(s)
            ts.append(t)
            values.append(cum.copy())
    order = np.lexsort((ts, stream))
    return (np.asarray(stream, dtype=np.int64)[order],
            np.asarray(ts, dtype=np.int64)[order],
            np.asarray(values, dtype=np.int64)[order])


def _aggregate(stream, bins, deltas):
    """Order-independent view: sum shares per (stream, bin)."""
    out = {}
    for s, b, d in zip(stream, bins, deltas):
        key = (int(s), int(b))
        if key in out:
            out[key] = out[key] + d
        else:
            out[key] = d.astype(np.int64)
    return {k: v.tolist() for k, v in out.items()}


@needs_numba
def test_deltify_backends_agree(rng):
    for trial in range(5):
        stream, ts, values = _random_stream(rng)
        a = _kernels.deltify_pairs_numba(stream, ts, values, 360, 1080)
        b = deltify_pairs_numpy(stream, ts, values, 360, 1080)
        assert _aggregate(*a) == _aggregate(*b)


@needs_numba
def test_attribute_backends_agree(rng):
    w = 360
    n_nodes = 8
    for trial in range(5):
        # non-overlapping job intervals per node
        node_ptr = [0]
        starts, ends, of = [], [], []
        job_id = 0
        for node in range(n_nodes):
            t = 0
            for _ in range(int(rng.integers(0, 5))):
                t += int(rng.integers(0, 900))
                dur = int(rng.integers(100, 2000))
                starts.append(t)
                ends.append(t + dur)
                of.append(job_id)
                job_id += 1
                t += dur
            node_ptr.append(len(starts))
        m = 60
        node_idx = rng.integers(0, n_nodes, size=m).astype(np.int32)
        fs_idx = rng.integers(0, 2, size=m).astype(np.int32)
        bin_start = (rng.integers(0, 30, size=m) * w).astype(np.int64)
        deltas = rng.integers(0, 5000, size=(m, N_COUNTERS))

        args = (node_idx, fs_idx, bin_start, deltas, w,
                np.asarray(node_ptr, dtype=np.int64),
                np.asarray(starts, dtype=np.int64),
                np.asarray(ends, dtype=np.int64),
                np.asarray(of, dtype=np.int32))
        ja, fa, ba, da = _kernels.attribute_shares_numba(*args)
        jb, fb, bb, db = attribute_shares_numpy(*args)

        def agg(j, f, b, d):
            out = {}
            for ji, fi, bi, di in zip(j, f, b, d):
                key = (int(ji), int(fi), int(bi))
                out[key] = (out.get(key, np.zeros(N_COUNTERS, np.int64))
                            + di)
            return {k: v.tolist() for k, v in out.items()}

        assert agg(ja, fa, ba, da) == agg(jb, fb, bb, db)


@needs_numba
def test_risk_backends_agree(rng):
    for trial in range(5):
        m, n_fs = 80, 3
        deltas = rng.integers(0, 2000, size=(m, N_COUNTERS)).astype(
            np.float64)
        fs_idx = rng.integers(0, n_fs, size=m).astype(np.int32)
        avg = rng.uniform(0, 50, size=(n_fs, N_COUNTERS))
        avg[rng.random(avg.shape) < 0.3] = 0.0  # exercise the beta path
        md_total = rng.uniform(0, 300, size=n_fs)
        md_total[0] = 0.0  # degenerate fs
        a = _kernels.risk_contribs_numba(deltas, fs_idx, avg, md_total,
                                         2.0, 0.25, 1.0)
        b = risk_contribs_numpy(deltas, fs_idx, avg, md_total,
                                2.0, 0.25, 1.0)
        np.testing.assert_array_equal(a, b)


@needs_numba
def test_full_pipeline_backend_equivalence(monkeypatch, rng):
    # same feed through the public pipeline with each backend active
    from iorisk.attribute import attribute_usage, fs_bin_totals
    from iorisk.ingest import deltify_and_bin
    from iorisk.metrics import compute_baselines, compute_job_metrics
    from conftest import feed_from_rows, simple_job

    rows = []
    jobs = []
    for j in range(6):
        node = f"n{j}"
        start = int(rng.integers(0, 900))
        jobs.append(simple_job(f"j{j}", node, start,
                               start + int(rng.integers(500, 4000))))
        t = int(rng.integers(1, 300))
        cum = np.zeros(21, dtype=np.int64)
        for _ in range(12):
            t += int(rng.integers(60, 1000))
            cum = cum + rng.integers(0, 700, size=21)
            rows.append([t, node, "fs2"] + cum.tolist())

    def run_pipeline():
        usage = deltify_and_bin(feed_from_rows(rows), 360)
        attribution = attribute_usage(usage, jobs)
        baselines = compute_baselines(fs_bin_totals(usage))
        jm = compute_job_metrics(attribution.job_usage, baselines)
        return usage, attribution, jm

    u_nb, a_nb, m_nb = run_pipeline()
    monkeypatch.setattr(_kernels, "deltify_pairs",
                        _kernels.deltify_pairs_numpy)
    monkeypatch.setattr(_kernels, "attribute_shares",
                        _kernels.attribute_shares_numpy)
    monkeypatch.setattr(_kernels, "risk_contribs",
                        _kernels.risk_contribs_numpy)
    u_np, a_np, m_np = run_pipeline()

    np.testing.assert_array_equal(u_nb.deltas, u_np.deltas)
    np.testing.assert_array_equal(u_nb.bin_start, u_np.bin_start)
    np.testing.assert_array_equal(a_nb.job_usage.deltas,
                                  a_np.job_usage.deltas)
    np.testing.assert_array_equal(a_nb.unattributed.deltas,
                                  a_np.unattributed.deltas)
    np.testing.assert_array_equal(m_nb.contrib, m_np.contrib)
    np.testing.assert_array_equal(m_nb.risk_oss, m_np.risk_oss)


def test_round_half_even_matches_python():
    rhe = _kernels._round_half_even
    for x, expected in ((0.5, 0), (1.5, 2), (2.5, 2), (3.5, 4),
                        (0.49, 0), (0.51, 1), (7.0, 7), (0.0, 0)):
        assert rhe(x) == expected
        assert rhe(x) == round(x)
