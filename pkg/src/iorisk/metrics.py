"""Risk and I/O-quality metrics per job-bin, aggregated per filesystem-bin.

The risk of one counter x against its filesystem baseline is
(x - alpha*avg) / (alpha*avg); negative values are ignored when summing.
MDS counters whose scaled average sits below a small threshold instead
measure against the beta-scaled average of all metadata operations.
Quality is operations per MiB moved: 1.0 means 1 MiB mean transfers,
large values mean small, inefficient accesses.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .attribute import FsUsageTable, JobBinUsage, JobUsageTable
from .ops import (MDS_SLICE, N_COUNTERS, OSS_SLICE, OpKind,
                  READ_KB, READ_OPS, WRITE_KB, WRITE_OPS)

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 2.0
DEFAULT_BETA = 0.25
DEFAULT_MD_SMALL_AVG_THRESHOLD = 1.0

FS_SUBJECT = "__fs__"


@dataclass(frozen=True)
class RiskParams:
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    md_small_avg_threshold: float = DEFAULT_MD_SMALL_AVG_THRESHOLD

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.md_small_avg_threshold < 0:
            raise ValueError("md_small_avg_threshold must be >= 0, got "
                             f"{self.md_small_avg_threshold}")


@dataclass(frozen=True, eq=False)
class FsBaseline:
    """Mean per-bin fs-wide deltas over a time window."""

    fs_id: str
    avg: np.ndarray  # (21,) float64, counter column order
    md_total_avg: float
    window: tuple[int, int]  # [first_bin, last_bin] used, inclusive
    n_bins: int

    def avg_of(self, op: OpKind) -> float:
        return float(self.avg[op.column])


def _window_slots(first_bin: int, last_bin: int, w: int) -> int:
    return int((last_bin - first_bin) // w + 1)


def compute_baseline(totals: FsUsageTable, fs_id: str,
                     window: tuple[int, int] | None = None,
                     baseline_days: float | None = None) -> FsBaseline:
    """Average the fs-wide per-bin deltas of one filesystem.

    Bins inside the window with no activity count as zeros: the divisor is
    the number of bin slots spanned, not the number of rows. The default
    window is the full extent of the filesystem's data; baseline_days
    selects a trailing window instead.
    """
    w = totals.bin_width
    try:
        fs = totals.filesystems.index(fs_id)
    except ValueError:
        raise ValueError(f"no usage rows for filesystem {fs_id!r}") from None
    mask = totals.fs_idx == fs
    if not mask.any():
        raise ValueError(f"no usage rows for filesystem {fs_id!r}")
    bins = totals.bin_start[mask]
    deltas = totals.deltas[mask]

    if window is not None and baseline_days is not None:
        raise ValueError("pass either window or baseline_days, not both")
    if baseline_days is not None:
        if baseline_days <= 0:
            raise ValueError("baseline_days must be positive")
        last = int(bins.max())
        n_slots = max(1, int(round(baseline_days * 86400 / w)))
        first = last - (n_slots - 1) * w
    elif window is not None:
        lo, hi = window
        first = w * (int(lo) // w)
        last = w * (int(hi) // w)
        if last < first:
            raise ValueError(f"empty baseline window {window}")
    else:
        first = int(bins.min())
        last = int(bins.max())

    inside = (bins >= first) & (bins <= last)
    if not inside.any():
        raise ValueError(
            f"baseline window [{first}, {last}] holds no data for "
            f"filesystem {fs_id!r}")
    n_slots = _window_slots(first, last, w)
    avg = deltas[inside].sum(axis=0, dtype=np.float64) / n_slots
    md_total_avg = float(
        deltas[inside, MDS_SLICE].sum(dtype=np.float64) / n_slots)
    return FsBaseline(fs_id=fs_id, avg=avg, md_total_avg=md_total_avg,
                      window=(first, last), n_bins=n_slots)


def compute_baselines(totals: FsUsageTable,
                      window: tuple[int, int] | None = None,
                      baseline_days: float | None = None
                      ) -> dict[str, FsBaseline]:
    out = {}
    for fs in totals.filesystems:
        if (totals.fs_idx == totals.filesystems.index(fs)).any():
            out[fs] = compute_baseline(totals, fs, window=window,
                                       baseline_days=baseline_days)
    return out


def op_risk(x: float, avg: float, alpha: float = DEFAULT_ALPHA) -> float:
    """Risk of one operation count against its scaled average.

    Callers clamp negative values when aggregating; the raw (possibly
    negative) value is returned here.
    """
    if avg <= 0:
        raise ValueError(f"op_risk needs avg > 0, got {avg}")
    scaled = alpha * avg
    return (x - scaled) / scaled


@dataclass(frozen=True, eq=False)
class RiskPoint:
    """Clamped risk contributions of one subject in one fs-bin."""

    subject: str
    fs_id: str
    bin_start: int
    risk_oss: float
    risk_mds: float
    per_op_risk: dict[OpKind, float] = field(repr=False)


@dataclass(frozen=True)
class QualityPoint:
    """Read/write quality of one subject in one fs-bin."""

    subject: str
    fs_id: str
    bin_start: int
    read_kb_ops: float
    write_kb_ops: float


def _quality_arrays(deltas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    read_kb = deltas[:, READ_KB].astype(np.float64)
    read_ops = deltas[:, READ_OPS].astype(np.float64)
    write_kb = deltas[:, WRITE_KB].astype(np.float64)
    write_ops = deltas[:, WRITE_OPS].astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        q_read = np.where(read_kb > 0, read_ops * 1024.0 / read_kb,
                          read_ops * 1024.0)
        q_write = np.where(write_kb > 0, write_ops * 1024.0 / write_kb,
                           write_ops * 1024.0)
    return q_read, q_write


def job_bin_quality(usage: JobBinUsage) -> QualityPoint:
    """Quality metrics for one job-bin (1.0 = 1 MiB mean transfer)."""
    q_read, q_write = _quality_arrays(usage.deltas[None, :])
    return QualityPoint(subject=usage.job_id, fs_id=usage.fs_id,
                        bin_start=usage.bin_start,
                        read_kb_ops=float(q_read[0]),
                        write_kb_ops=float(q_write[0]))


def _baseline_matrix(filesystems, baselines):
    avg = np.zeros((len(filesystems), N_COUNTERS), dtype=np.float64)
    md_total = np.zeros(len(filesystems), dtype=np.float64)
    present = np.zeros(len(filesystems), dtype=bool)
    for i, fs in enumerate(filesystems):
        b = baselines.get(fs)
        if b is not None:
            avg[i] = b.avg
            md_total[i] = b.md_total_avg
            present[i] = True
    return avg, md_total, present


@dataclass
class JobMetrics:
    """Risk and quality for every job-bin row, aligned with a JobUsageTable."""

    job_idx: np.ndarray
    fs_idx: np.ndarray
    bin_start: np.ndarray
    contrib: np.ndarray       # (m, 21) clamped per-op risk
    risk_oss: np.ndarray      # (m,)
    risk_mds: np.ndarray      # (m,)
    read_kb_ops: np.ndarray   # (m,)
    write_kb_ops: np.ndarray  # (m,)
    has_io: np.ndarray        # (m,) bool: any read/write bytes or ops
    job_ids: tuple[str, ...]
    filesystems: tuple[str, ...]
    bin_width: int
    params: RiskParams
    degenerate_fs: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.bin_start)

    def risk_point(self, i: int) -> RiskPoint:
        per_op = {op: float(self.contrib[i, op.column]) for op in OpKind}
        return RiskPoint(subject=self.job_ids[self.job_idx[i]],
                         fs_id=self.filesystems[self.fs_idx[i]],
                         bin_start=int(self.bin_start[i]),
                         risk_oss=float(self.risk_oss[i]),
                         risk_mds=float(self.risk_mds[i]),
                         per_op_risk=per_op)

    def quality_point(self, i: int) -> QualityPoint:
        return QualityPoint(subject=self.job_ids[self.job_idx[i]],
                            fs_id=self.filesystems[self.fs_idx[i]],
                            bin_start=int(self.bin_start[i]),
                            read_kb_ops=float(self.read_kb_ops[i]),
                            write_kb_ops=float(self.write_kb_ops[i]))


def compute_job_metrics(job_usage: JobUsageTable,
                        baselines: dict[str, FsBaseline],
                        params: RiskParams = RiskParams()) -> JobMetrics:
    """Evaluate risk and quality for every job-bin row."""
    avg, md_total, present = _baseline_matrix(job_usage.filesystems,
                                              baselines)
    if len(job_usage):
        used = np.unique(job_usage.fs_idx)
        missing = [job_usage.filesystems[i] for i in used if not present[i]]
        if missing:
            raise ValueError(f"no baseline for filesystems {missing}")

    deltas = job_usage.deltas.astype(np.float64)
    contrib = _kernels.risk_contribs(deltas, job_usage.fs_idx, avg, md_total,
                                     params.alpha, params.beta,
                                     params.md_small_avg_threshold)
    degenerate = []
    for i, fs in enumerate(job_usage.filesystems):
        if not present[i] or md_total[i] > 0:
            continue
        rows = job_usage.fs_idx == i
        if rows.any() and job_usage.deltas[rows][:, MDS_SLICE].any():
            degenerate.append(fs)
            log.warning(
                "degenerate baseline for %s: zero metadata average with "
                "nonzero metadata activity; beta-path denominator floored "
                "at %g", fs, params.md_small_avg_threshold)

    q_read, q_write = _quality_arrays(job_usage.deltas)
    io_cols = (READ_KB, READ_OPS, WRITE_KB, WRITE_OPS)
    has_io = (job_usage.deltas[:, io_cols] > 0).any(axis=1)
    return JobMetrics(job_idx=job_usage.job_idx,
                      fs_idx=job_usage.fs_idx,
                      bin_start=job_usage.bin_start,
                      contrib=contrib,
                      risk_oss=contrib[:, OSS_SLICE].sum(axis=1),
                      risk_mds=contrib[:, MDS_SLICE].sum(axis=1),
                      read_kb_ops=q_read,
                      write_kb_ops=q_write,
                      has_io=has_io,
                      job_ids=job_usage.job_ids,
                      filesystems=job_usage.filesystems,
                      bin_width=job_usage.bin_width,
                      params=params,
                      degenerate_fs=tuple(degenerate))


def job_bin_risk(usage: JobBinUsage, baseline: FsBaseline,
                 params: RiskParams = RiskParams()) -> RiskPoint:
    """Risk contributions of a single job-bin against its fs baseline."""
    if baseline.fs_id != usage.fs_id:
        raise ValueError(f"baseline is for {baseline.fs_id!r}, "
                         f"usage is for {usage.fs_id!r}")
    contrib = _kernels.risk_contribs(
        usage.deltas[None, :].astype(np.float64),
        np.zeros(1, dtype=np.int32),
        baseline.avg[None, :],
        np.asarray([baseline.md_total_avg]),
        params.alpha, params.beta, params.md_small_avg_threshold)
    if (baseline.md_total_avg == 0
            and usage.deltas[MDS_SLICE].any()):
        log.warning(
            "degenerate baseline for %s: zero metadata average with "
            "nonzero metadata activity; beta-path denominator floored "
            "at %g", usage.fs_id, params.md_small_avg_threshold)
    per_op = {op: float(contrib[0, op.column]) for op in OpKind}
    return RiskPoint(subject=usage.job_id, fs_id=usage.fs_id,
                     bin_start=usage.bin_start,
                     risk_oss=float(contrib[0, OSS_SLICE].sum()),
                     risk_mds=float(contrib[0, MDS_SLICE].sum()),
                     per_op_risk=per_op)


@dataclass
class FsMetrics:
    """Per-(fs, bin) aggregates over job metrics rows."""

    fs_idx: np.ndarray
    bin_start: np.ndarray
    risk_oss: np.ndarray
    risk_mds: np.ndarray
    contrib: np.ndarray       # (m, 21) summed contributions
    read_kb_ops: np.ndarray   # quality sums over jobs with risk_oss > 0
    write_kb_ops: np.ndarray
    filesystems: tuple[str, ...]
    bin_width: int
    quality_agg: str = "sum"

    def __len__(self) -> int:
        return len(self.bin_start)


def compute_fs_metrics(jm: JobMetrics, quality_agg: str = "sum") -> FsMetrics:
    """Aggregate job metrics to fs-level series.

    Risk sums over every job; quality aggregates only jobs with
    risk_oss > 0 (ignoring jobs with a low quantity of I/O). quality_agg
    "sum" totals the contributing jobs' values, "mean" divides by their
    count.
    """
    if quality_agg not in ("sum", "mean"):
        raise ValueError(f"quality_agg must be 'sum' or 'mean', "
                         f"got {quality_agg!r}")
    if len(jm) == 0:
        empty64 = np.empty(0, dtype=np.float64)
        return FsMetrics(np.empty(0, dtype=np.int32),
                         np.empty(0, dtype=np.int64),
                         empty64, empty64.copy(),
                         np.empty((0, N_COUNTERS), dtype=np.float64),
                         empty64.copy(), empty64.copy(),
                         jm.filesystems, jm.bin_width, quality_agg)

    order = np.lexsort((jm.bin_start, jm.fs_idx))
    fs = jm.fs_idx[order]
    bins = jm.bin_start[order]
    changed = np.concatenate(
        ([True], (fs[1:] != fs[:-1]) | (bins[1:] != bins[:-1])))
    starts = np.flatnonzero(changed)

    contributes = (jm.risk_oss[order] > 0).astype(np.float64)
    q_read = jm.read_kb_ops[order] * contributes
    q_write = jm.write_kb_ops[order] * contributes

    agg_contrib = np.add.reduceat(jm.contrib[order], starts, axis=0)
    agg_oss = np.add.reduceat(jm.risk_oss[order], starts)
    agg_mds = np.add.reduceat(jm.risk_mds[order], starts)
    agg_qr = np.add.reduceat(q_read, starts)
    agg_qw = np.add.reduceat(q_write, starts)
    if quality_agg == "mean":
        counts = np.add.reduceat(contributes, starts)
        with np.errstate(invalid="ignore"):
            agg_qr = np.where(counts > 0, agg_qr / counts, 0.0)
            agg_qw = np.where(counts > 0, agg_qw / counts, 0.0)

    return FsMetrics(fs_idx=fs[starts], bin_start=bins[starts],
                     risk_oss=agg_oss, risk_mds=agg_mds,
                     contrib=agg_contrib,
                     read_kb_ops=agg_qr, write_kb_ops=agg_qw,
                     filesystems=jm.filesystems, bin_width=jm.bin_width,
                     quality_agg=quality_agg)


def fs_bin_aggregate(risk_points, quality_points
                     ) -> tuple[RiskPoint, QualityPoint]:
    """Aggregate one fs-bin's job points into the fs point.

    All points must share fs_id and bin_start. Quality sums cover only
    subjects whose risk_oss is greater than zero.
    """
    risk_points = list(risk_points)
    quality_points = list(quality_points)
    if not risk_points and not quality_points:
        raise ValueError("nothing to aggregate")
    ref = risk_points[0] if risk_points else quality_points[0]
    for p in risk_points + quality_points:
        if p.fs_id != ref.fs_id or p.bin_start != ref.bin_start:
            raise ValueError(
                f"point {p.subject!r} at ({p.fs_id}, {p.bin_start}) does "
                f"not belong to fs-bin ({ref.fs_id}, {ref.bin_start})")

    per_op = {op: 0.0 for op in OpKind}
    for p in risk_points:
        for op, v in p.per_op_risk.items():
            per_op[op] += v
    risk_oss = sum(p.per_op_risk[op] for p in risk_points
                   for op in OpKind if op.op_class.value == "oss")
    risk_mds = sum(p.per_op_risk[op] for p in risk_points
                   for op in OpKind if op.op_class.value == "mds")

    oss_of = {p.subject: p.risk_oss for p in risk_points}
    q_read = 0.0
    q_write = 0.0
    for q in quality_points:
        if oss_of.get(q.subject, 0.0) > 0:
            q_read += q.read_kb_ops
            q_write += q.write_kb_ops

    fs_risk = RiskPoint(subject=FS_SUBJECT, fs_id=ref.fs_id,
                        bin_start=ref.bin_start,
                        risk_oss=float(risk_oss), risk_mds=float(risk_mds),
                        per_op_risk=per_op)
    fs_quality = QualityPoint(subject=FS_SUBJECT, fs_id=ref.fs_id,
                              bin_start=ref.bin_start,
                              read_kb_ops=q_read, write_kb_ops=q_write)
    return fs_risk, fs_quality
