from __future__ import annotations

import logging

import numpy as np
import pytest

from conftest import feed_from_rows, simple_job, values_row
from iorisk.attribute import (JobBinUsage, attribute_usage, fs_bin_totals)
from iorisk.ingest import deltify_and_bin
from iorisk.metrics import (FS_SUBJECT, FsBaseline,
                            RiskParams, compute_baseline,
                            compute_baselines, compute_fs_metrics,
                            compute_job_metrics, fs_bin_aggregate,
                            job_bin_quality, job_bin_risk, op_risk)
from iorisk.ops import (COUNTER_NAMES, MDS_COUNTERS, N_COUNTERS,
                        OSS_COUNTERS, OpKind)

W = 360


# --- independent oracle of the metric definitions --------------------------

def oracle_contributions(deltas: dict[str, float], avg: dict[str, float],
                         md_total_avg: float, alpha=2.0, beta=0.25,
                         threshold=1.0) -> dict[str, float]:
    """Plain-python reimplementation of the per-counter risk rules."""
    out = {}
    for name in OSS_COUNTERS:
        a = avg[name]
        if a <= 0:
            out[name] = 0.0
            continue
        out[name] = max(0.0, (deltas[name] - alpha * a) / (alpha * a))
    for name in MDS_COUNTERS:
        a = avg[name]
        if alpha * a >= threshold:
            denom = alpha * a
        else:
            denom = beta * md_total_avg
            if denom <= 0:
                denom = threshold
        if denom <= 0:
            out[name] = 0.0
        else:
            out[name] = max(0.0, (deltas[name] - denom) / denom)
    return out


def oracle_quality(read_kb, read_ops, write_kb, write_ops):
    q_read = (read_ops * 1024 / read_kb) if read_kb > 0 \
        else float(read_ops * 1024)
    q_write = (write_ops * 1024 / write_kb) if write_kb > 0 \
        else float(write_ops * 1024)
    return q_read, q_write


def make_baseline(fs_id="fs2", **avgs) -> FsBaseline:
    avg = np.zeros(N_COUNTERS)
    for name, v in avgs.items():
        avg[COUNTER_NAMES.index(name)] = v
    md_total = float(sum(avg[5:]))
    return FsBaseline(fs_id=fs_id, avg=avg, md_total_avg=md_total,
                      window=(0, 0), n_bins=1)


def jb_usage(fs_id="fs2", bin_start=0, job_id="j1", **deltas) -> JobBinUsage:
    return JobBinUsage(job_id, fs_id, bin_start,
                       np.asarray(values_row(**deltas), dtype=np.int64))


# --- compute_baseline -------------------------------------------------------


def usage_for_baseline(rows):
    return fs_bin_totals(deltify_and_bin(feed_from_rows(rows), W,
                                         max_gap_bins=None))


def test_baseline_single_bin():
    totals = usage_for_baseline([
        [400, "n1", "fs2"] + values_row(read_ops=0),
        [700, "n1", "fs2"] + values_row(read_ops=100)])
    b = compute_baseline(totals, "fs2")
    assert b.avg_of(OpKind.READ_OPS) == 100.0
    assert b.n_bins == 1


def test_baseline_two_bins_arithmetic_mean():
    totals = usage_for_baseline([
        [400, "n1", "fs2"] + values_row(read_ops=0),
        [700, "n1", "fs2"] + values_row(read_ops=100),
        [1060, "n1", "fs2"] + values_row(read_ops=400)])
    b = compute_baseline(totals, "fs2")
    assert b.avg_of(OpKind.READ_OPS) == 200.0


def test_baseline_counts_empty_bins_as_zeros():
    # activity in bins 360 and 1800 only; slots 360..1800 = 5 bins
    totals = usage_for_baseline([
        [400, "n1", "fs2"] + values_row(mkdir=0),
        [700, "n1", "fs2"] + values_row(mkdir=100),
        [2100, "n1", "fs2"] + values_row(mkdir=150)])
    b = compute_baseline(totals, "fs2")
    assert b.n_bins == 5
    assert b.avg_of(OpKind.MKDIR) == pytest.approx(150 / 5)
    assert b.md_total_avg == pytest.approx(150 / 5)


def test_baseline_window_and_errors():
    totals = usage_for_baseline([
        [400, "n1", "fs2"] + values_row(read_ops=0),
        [700, "n1", "fs2"] + values_row(read_ops=100)])
    with pytest.raises(ValueError):
        compute_baseline(totals, "fs9")
    with pytest.raises(ValueError):
        compute_baseline(totals, "fs2", window=(100000, 200000))
    b = compute_baseline(totals, "fs2", window=(360, 719))
    assert b.n_bins == 1


def test_baseline_trailing_days():
    rows = []
    t = 360
    cum = 0
    for k in range(2 * 240):  # two days of bins
        t += W
        cum += 10 if k < 240 else 30
        rows.append([t, "n1", "fs2"] + values_row(read_ops=cum))
    totals = usage_for_baseline([[360, "n1", "fs2"] + values_row()] + rows)
    full = compute_baseline(totals, "fs2")
    assert full.avg_of(OpKind.READ_OPS) == pytest.approx(20.0)
    trailing = compute_baseline(totals, "fs2", baseline_days=1)
    assert trailing.avg_of(OpKind.READ_OPS) == pytest.approx(30.0)
    assert trailing.n_bins == 240


def test_baseline_30day_fixture_matches_accumulation_oracle(rng):
    # DERIVED: independent accumulation over a long synthetic series
    rows = [[360, "n1", "fs2"] + values_row()]
    t = 360
    cum = np.zeros(21, dtype=np.int64)
    per_bin = []
    n_bins = 30 * 24 * 10  # 30 days of 360 s bins
    for _ in range(n_bins):
        t += W
        d = rng.integers(0, 50, size=21)
        per_bin.append(d)
        cum = cum + d
        rows.append([t, "n1", "fs2"] + cum.tolist())
    totals = usage_for_baseline(rows)
    b = compute_baseline(totals, "fs2")
    stacked = np.stack(per_bin)
    want = stacked.sum(axis=0) / n_bins  # includes zero bins implicitly
    np.testing.assert_allclose(b.avg, want, rtol=0, atol=1e-9)
    assert b.md_total_avg == pytest.approx(
        stacked[:, 5:].sum() / n_bins, abs=1e-9)


# --- op_risk ----------------------------------------------------------------


def test_op_risk_hand_values():
    assert op_risk(200, 100, 2.0) == 0.0
    assert op_risk(600, 100, 2.0) == 2.0
    assert op_risk(50, 100, 2.0) == -0.75


def test_op_risk_rejects_nonpositive_avg():
    with pytest.raises(ValueError):
        op_risk(10, 0.0)
    with pytest.raises(ValueError):
        op_risk(10, -1.0)


# --- job_bin_risk -----------------------------------------------------------


def test_risk_zero_when_deltas_equal_scaled_average():
    avgs = {name: 50.0 for name in COUNTER_NAMES}
    baseline = make_baseline(**avgs)
    usage = jb_usage(**{name: 100 for name in COUNTER_NAMES})
    point = job_bin_risk(usage, baseline)
    assert point.risk_oss == 0.0
    assert point.risk_mds == 0.0


def test_mkdir_storm_beta_path_hand_value():
    # alpha*avg[mkdir] = 0.2 < 1.0 threshold: beta path with
    # denominator 0.25 * 100 = 25 -> (500 - 25) / 25 = 19.0
    avg = np.zeros(N_COUNTERS)
    avg[OpKind.MKDIR.column] = 0.1
    baseline = FsBaseline("fs2", avg, md_total_avg=100.0, window=(0, 0),
                          n_bins=1)
    point = job_bin_risk(jb_usage(mkdir=500), baseline)
    assert point.per_op_risk[OpKind.MKDIR] == 19.0
    assert point.risk_mds == 19.0
    assert point.risk_oss == 0.0


def test_negative_contributions_clamped_to_zero():
    baseline = make_baseline(read_ops=100.0, open=100.0)
    point = job_bin_risk(jb_usage(read_ops=50, open=10), baseline)
    assert point.per_op_risk[OpKind.READ_OPS] == 0.0
    assert point.per_op_risk[OpKind.OPEN] == 0.0
    assert all(v >= 0 for v in point.per_op_risk.values())


def test_oss_zero_baseline_contributes_zero():
    baseline = make_baseline(open=100.0)  # all OSS averages zero
    point = job_bin_risk(jb_usage(read_kb=10 ** 9), baseline)
    assert point.risk_oss == 0.0


def test_degenerate_md_total_uses_threshold_floor(caplog):
    baseline = FsBaseline("fs2", np.zeros(N_COUNTERS), md_total_avg=0.0,
                          window=(0, 0), n_bins=1)
    with caplog.at_level(logging.WARNING, logger="iorisk.metrics"):
        point = job_bin_risk(jb_usage(mkdir=5), baseline,
                             RiskParams(md_small_avg_threshold=1.0))
    assert point.per_op_risk[OpKind.MKDIR] == 4.0  # (5 - 1) / 1
    assert any("degenerate" in r.message for r in caplog.records)


def test_fs_mismatch_rejected():
    with pytest.raises(ValueError):
        job_bin_risk(jb_usage(fs_id="fs3"), make_baseline(fs_id="fs2"))


def test_risk_point_sums_match_per_op_decomposition(rng):
    for _ in range(20):
        avgs = {name: float(rng.uniform(0, 20)) for name in COUNTER_NAMES}
        baseline = make_baseline(**avgs)
        usage = jb_usage(**{name: int(rng.integers(0, 200))
                            for name in COUNTER_NAMES})
        p = job_bin_risk(usage, baseline)
        oss = sum(p.per_op_risk[op] for op in OpKind
                  if op.value in OSS_COUNTERS)
        mds = sum(p.per_op_risk[op] for op in OpKind
                  if op.value in MDS_COUNTERS)
        assert p.risk_oss == pytest.approx(oss, abs=1e-9)
        assert p.risk_mds == pytest.approx(mds, abs=1e-9)


def test_random_job_bins_match_brute_force_oracle(rng):
    # DERIVED: 200 random job-bins against the plain-python oracle
    avgs = {name: float(rng.uniform(0, 30) * (rng.random() < 0.7))
            for name in COUNTER_NAMES}
    baseline = make_baseline(**avgs)
    params = RiskParams()
    for _ in range(200):
        deltas = {name: int(rng.integers(0, 500))
                  for name in COUNTER_NAMES}
        point = job_bin_risk(jb_usage(**deltas), baseline, params)
        want = oracle_contributions(deltas, avgs, baseline.md_total_avg)
        for op in OpKind:
            assert point.per_op_risk[op] == pytest.approx(
                want[op.value], abs=1e-9), op


# --- quality ----------------------------------------------------------------


def test_quality_identities():
    q = job_bin_quality(jb_usage(read_ops=1024, read_kb=1048576))
    assert q.read_kb_ops == 1.0
    q = job_bin_quality(jb_usage(read_ops=4096, read_kb=1024))
    assert q.read_kb_ops == 4096.0
    q = job_bin_quality(jb_usage())
    assert q.read_kb_ops == 0.0 and q.write_kb_ops == 0.0
    # ops without bytes: floor denominator of 1 KiB
    q = job_bin_quality(jb_usage(write_ops=3))
    assert q.write_kb_ops == 3072.0
    # bytes without ops: zero (no operations to rate)
    q = job_bin_quality(jb_usage(write_kb=5000))
    assert q.write_kb_ops == 0.0


def test_quality_matches_oracle(rng):
    for _ in range(100):
        vals = {k: int(rng.integers(0, 10000) * (rng.random() < 0.8))
                for k in ("read_kb", "read_ops", "write_kb", "write_ops")}
        q = job_bin_quality(jb_usage(**vals))
        want_r, want_w = oracle_quality(**vals)
        assert q.read_kb_ops == pytest.approx(want_r, abs=1e-9)
        assert q.write_kb_ops == pytest.approx(want_w, abs=1e-9)


# --- fs_bin_aggregate -------------------------------------------------------


def test_single_job_aggregate_is_identity():
    baseline = make_baseline(read_ops=10.0, open=20.0)
    usage = jb_usage(read_ops=100, open=10)
    rp = job_bin_risk(usage, baseline)
    qp = job_bin_quality(usage)
    fs_risk, fs_quality = fs_bin_aggregate([rp], [qp])
    assert fs_risk.subject == FS_SUBJECT
    assert fs_risk.risk_oss == pytest.approx(rp.risk_oss, abs=1e-9)
    assert fs_risk.risk_mds == pytest.approx(rp.risk_mds, abs=1e-9)
    assert fs_quality.read_kb_ops == qp.read_kb_ops


def test_zero_risk_job_quality_excluded():
    baseline = make_baseline(read_ops=1000.0)
    active = jb_usage(job_id="busy", read_ops=5000, read_kb=1250)
    quiet = jb_usage(job_id="quiet", read_ops=1, read_kb=1)
    rp_a = job_bin_risk(active, baseline)
    rp_q = job_bin_risk(quiet, baseline)
    assert rp_a.risk_oss > 0
    assert rp_q.risk_oss == 0.0
    qp_a = job_bin_quality(active)
    qp_q = job_bin_quality(quiet)
    assert qp_q.read_kb_ops == 1024.0
    _, fs_quality = fs_bin_aggregate([rp_a, rp_q], [qp_a, qp_q])
    assert fs_quality.read_kb_ops == pytest.approx(qp_a.read_kb_ops)


def test_aggregate_rejects_mixed_bins():
    baseline = make_baseline(read_ops=10.0)
    rp = job_bin_risk(jb_usage(bin_start=0), baseline)
    qp = job_bin_quality(jb_usage(bin_start=360))
    with pytest.raises(ValueError):
        fs_bin_aggregate([rp], [qp])


def test_fifty_job_aggregate_matches_summation_oracle(rng):
    baseline = make_baseline(**{n: float(rng.uniform(1, 10))
                                for n in COUNTER_NAMES})
    rps, qps = [], []
    for j in range(50):
        usage = jb_usage(job_id=f"j{j}",
                         **{n: int(rng.integers(0, 100))
                            for n in COUNTER_NAMES})
        rps.append(job_bin_risk(usage, baseline))
        qps.append(job_bin_quality(usage))
    fs_risk, fs_quality = fs_bin_aggregate(rps, qps)
    assert fs_risk.risk_oss == pytest.approx(
        sum(p.risk_oss for p in rps), abs=1e-9)
    assert fs_risk.risk_mds == pytest.approx(
        sum(p.risk_mds for p in rps), abs=1e-9)
    want_q = sum(q.read_kb_ops for q, p in zip(qps, rps) if p.risk_oss > 0)
    assert fs_quality.read_kb_ops == pytest.approx(want_q, abs=1e-9)


# --- batch metrics and invariants -------------------------------------------


def _pipeline_metrics(rng, n_jobs=10, n_bins=8, params=RiskParams()):
    rows = []
    jobs = []
    for j in range(n_jobs):
        node = f"n{j:02d}"
        start = int(rng.integers(0, 3)) * W
        length = int(rng.integers(2, n_bins)) * W
        jobs.append(simple_job(f"j{j:02d}", node, start,
                               start + length))
        t = W
        cum = np.zeros(21, dtype=np.int64)
        rows.append([W, node, "fs2"] + cum.tolist())
        for _ in range(n_bins):
            t += W
            cum = cum + rng.integers(0, 120, size=21)
            rows.append([t, node, "fs2"] + cum.tolist())
    usage = deltify_and_bin(feed_from_rows(rows), W)
    attribution = attribute_usage(usage, jobs)
    baselines = compute_baselines(fs_bin_totals(usage))
    jm = compute_job_metrics(attribution.job_usage, baselines, params)
    return usage, attribution, baselines, jm


def test_no_negative_stored_contribution_and_reclamp_idempotent(rng):
    _, _, _, jm = _pipeline_metrics(rng)
    assert (jm.contrib >= 0).all()
    np.testing.assert_array_equal(np.maximum(jm.contrib, 0.0), jm.contrib)


def test_fs_series_decomposes_into_job_series(rng):
    _, _, _, jm = _pipeline_metrics(rng)
    fm = compute_fs_metrics(jm)
    for i in range(len(fm)):
        sel = (jm.fs_idx == fm.fs_idx[i]) & \
            (jm.bin_start == fm.bin_start[i])
        assert fm.risk_oss[i] == pytest.approx(
            float(jm.risk_oss[sel].sum()), abs=1e-9)
        assert fm.risk_mds[i] == pytest.approx(
            float(jm.risk_mds[sel].sum()), abs=1e-9)


def test_monotonicity_in_single_counter_delta(rng):
    baseline = make_baseline(**{n: float(rng.uniform(0.1, 10))
                                for n in COUNTER_NAMES})
    base_deltas = {n: int(rng.integers(0, 50)) for n in COUNTER_NAMES}
    p0 = job_bin_risk(jb_usage(**base_deltas), baseline)
    for name in COUNTER_NAMES:
        bumped = dict(base_deltas)
        bumped[name] += int(rng.integers(1, 100))
        p1 = job_bin_risk(jb_usage(**bumped), baseline)
        assert (p1.risk_oss + p1.risk_mds
                >= p0.risk_oss + p0.risk_mds - 1e-12)


def test_doubling_alpha_never_increases_contribution_on_stable_paths(rng):
    # stable paths: every MDS average is either far above the threshold
    # for both alphas or below it for both
    avgs = {}
    for name in OSS_COUNTERS:
        avgs[name] = float(rng.uniform(0.5, 10))
    for i, name in enumerate(MDS_COUNTERS):
        avgs[name] = float(rng.uniform(5, 20)) if i % 2 else 0.0
    baseline = make_baseline(**avgs)
    for _ in range(20):
        deltas = {n: int(rng.integers(0, 400)) for n in COUNTER_NAMES}
        p1 = job_bin_risk(jb_usage(**deltas), baseline,
                          RiskParams(alpha=2.0))
        p2 = job_bin_risk(jb_usage(**deltas), baseline,
                          RiskParams(alpha=4.0))
        for op in OpKind:
            assert p2.per_op_risk[op] <= p1.per_op_risk[op] + 1e-12


def test_beta_path_selection_is_deterministic_function_of_baseline():
    baseline = make_baseline(mkdir=0.4, open=10.0)
    params = RiskParams(alpha=2.0, md_small_avg_threshold=1.0)
    # mkdir: 2*0.4 = 0.8 < 1.0 -> beta path; open: 20 >= 1.0 -> alpha path
    for x in (0, 1, 10, 1000):
        p = job_bin_risk(jb_usage(mkdir=x), baseline, params)
        beta_denom = 0.25 * baseline.md_total_avg
        want = max(0.0, (x - beta_denom) / beta_denom)
        assert p.per_op_risk[OpKind.MKDIR] == pytest.approx(want, abs=1e-9)


def test_compute_job_metrics_requires_baselines(rng):
    _, attribution, baselines, _ = _pipeline_metrics(rng)
    with pytest.raises(ValueError):
        compute_job_metrics(attribution.job_usage, {})


def test_quality_agg_mean_option(rng):
    _, _, _, jm = _pipeline_metrics(rng)
    fs_sum = compute_fs_metrics(jm, "sum")
    fs_mean = compute_fs_metrics(jm, "mean")
    for i in range(len(fs_sum)):
        sel = (jm.fs_idx == fs_sum.fs_idx[i]) & \
            (jm.bin_start == fs_sum.bin_start[i])
        k = int((jm.risk_oss[sel] > 0).sum())
        if k:
            assert fs_mean.read_kb_ops[i] == pytest.approx(
                fs_sum.read_kb_ops[i] / k, abs=1e-9)
    with pytest.raises(ValueError):
        compute_fs_metrics(jm, "median")


def test_risk_params_validation():
    with pytest.raises(ValueError):
        RiskParams(alpha=0)
    with pytest.raises(ValueError):
        RiskParams(beta=-1)
    with pytest.raises(ValueError):
        RiskParams(md_small_avg_threshold=-0.1)
