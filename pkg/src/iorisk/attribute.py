"""Attribute binned node usage to the jobs that held the nodes.

Node allocation is exclusive (whole-node scheduling): two jobs may not hold
the same node at the same time, and violations raise. A bin partially
covered by a job's interval is split by time-overlap fraction; whatever no
job claims goes to a per-fs unattributed ledger so fs totals stay auditable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .ingest import JobRecord, UsageTable
from .ops import N_COUNTERS, OpKind


class AttributionConflictError(ValueError):
    """Two jobs claim the same node at the same time."""

    def __init__(self, node_id, job_a, job_b):
        super().__init__(
            f"attribution conflict on node {node_id!r}: jobs {job_a!r} "
            f"and {job_b!r} overlap in time")
        self.node_id = node_id
        self.job_ids = (job_a, job_b)


@dataclass(frozen=True, eq=False)
class JobBinUsage:
    """Per-job, per-fs counter deltas for one time bin."""

    job_id: str
    fs_id: str
    bin_start: int
    deltas: np.ndarray  # (21,), int64

    def delta(self, op: OpKind) -> int:
        return int(self.deltas[op.column])

    def __eq__(self, other):
        if not isinstance(other, JobBinUsage):
            return NotImplemented
        return (self.job_id == other.job_id and self.fs_id == other.fs_id
                and self.bin_start == other.bin_start
                and np.array_equal(self.deltas, other.deltas))


@dataclass
class JobUsageTable:
    """Columnar JobBinUsage rows, sorted by (job, fs, bin)."""

    job_idx: np.ndarray   # int32 (m,), index into job_ids
    fs_idx: np.ndarray    # int32 (m,)
    bin_start: np.ndarray  # int64 (m,)
    deltas: np.ndarray    # int64 (m, 21)
    job_ids: tuple[str, ...]
    filesystems: tuple[str, ...]
    bin_width: int

    def __len__(self) -> int:
        return len(self.bin_start)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return JobBinUsage(self.job_ids[self.job_idx[i]],
                           self.filesystems[self.fs_idx[i]],
                           int(self.bin_start[i]),
                           self.deltas[i].copy())

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


@dataclass
class FsUsageTable:
    """Per-fs, per-bin counter deltas, sorted by (fs, bin)."""

    fs_idx: np.ndarray     # int32 (m,)
    bin_start: np.ndarray  # int64 (m,)
    deltas: np.ndarray     # int64 (m, 21)
    filesystems: tuple[str, ...]
    bin_width: int

    def __len__(self) -> int:
        return len(self.bin_start)


@dataclass
class AttributionResult:
    job_usage: JobUsageTable
    unattributed: FsUsageTable
    jobs: list[JobRecord]


def validate_exclusive_allocation(jobs) -> None:
    """Raise AttributionConflictError if any node is double-booked."""
    by_node: dict[str, list[tuple[int, int, str]]] = {}
    for job in jobs:
        for node in job.nodes:
            by_node.setdefault(node, []).append(
                (job.start_ts, job.end_ts, job.job_id))
    for node, intervals in by_node.items():
        intervals.sort()
        for (s0, e0, id0), (s1, e1, id1) in zip(intervals, intervals[1:]):
            if s1 < e0:
                raise AttributionConflictError(node, id0, id1)


def _group_sum(keys, deltas):
    """Sort rows by key columns and sum duplicates. keys: list of arrays."""
    order = np.lexsort(tuple(reversed(keys)))
    sk = [k[order] for k in keys]
    sd = deltas[order]
    changed = np.zeros(len(order), dtype=bool)
    changed[0] = True
    for k in sk:
        changed[1:] |= k[1:] != k[:-1]
    starts = np.flatnonzero(changed)
    agg = np.add.reduceat(sd, starts, axis=0)
    return [k[starts] for k in sk], agg


def fs_bin_totals(usage: UsageTable) -> FsUsageTable:
    """Aggregate node usage to fs-wide per-bin totals."""
    if len(usage) == 0:
        return FsUsageTable(np.empty(0, dtype=np.int32),
                            np.empty(0, dtype=np.int64),
                            np.empty((0, N_COUNTERS), dtype=np.int64),
                            usage.filesystems, usage.bin_width)
    keys, agg = _group_sum(
        [usage.fs_idx.astype(np.int64), usage.bin_start], usage.deltas)
    return FsUsageTable(keys[0].astype(np.int32), keys[1], agg,
                        usage.filesystems, usage.bin_width)


def attribute_usage(node_usage: UsageTable, jobs) -> AttributionResult:
    """Assign node-bin deltas to the jobs holding the nodes.

    Bins partially covered by a job interval are apportioned by overlap
    fraction (half-even rounding, exact sum, residue to the last claimant
    in start order with the unattributed remainder last). Deltas on nodes
    no job held go to the unattributed ledger.
    """
    jobs = list(jobs)
    validate_exclusive_allocation(jobs)

    node_of = {name: i for i, name in enumerate(node_usage.nodes)}
    per_node: dict[int, list[tuple[int, int, int]]] = {}
    for pos, job in enumerate(jobs):
        for node in job.nodes:
            idx = node_of.get(node)
            if idx is not None:
                per_node.setdefault(idx, []).append(
                    (job.start_ts, job.end_ts, pos))

    n_nodes = len(node_usage.nodes)
    node_ptr = np.zeros(n_nodes + 1, dtype=np.int64)
    starts, ends, of = [], [], []
    for idx in range(n_nodes):
        intervals = sorted(per_node.get(idx, []))
        node_ptr[idx + 1] = node_ptr[idx] + len(intervals)
        for s, e, pos in intervals:
            starts.append(s)
            ends.append(e)
            of.append(pos)
    job_start = np.asarray(starts, dtype=np.int64)
    job_end = np.asarray(ends, dtype=np.int64)
    job_of = np.asarray(of, dtype=np.int32)

    claim_job, claim_fs, claim_bin, claim_deltas = _kernels.attribute_shares(
        node_usage.node_idx, node_usage.fs_idx, node_usage.bin_start,
        node_usage.deltas, node_usage.bin_width,
        node_ptr, job_start, job_end, job_of)

    job_ids = tuple(j.job_id for j in jobs)
    owned = claim_job >= 0
    if owned.any():
        keys, agg = _group_sum(
            [claim_job[owned].astype(np.int64),
             claim_fs[owned].astype(np.int64),
             claim_bin[owned]],
            claim_deltas[owned])
        job_usage = JobUsageTable(keys[0].astype(np.int32),
                                  keys[1].astype(np.int32),
                                  keys[2], agg, job_ids,
                                  node_usage.filesystems,
                                  node_usage.bin_width)
    else:
        job_usage = JobUsageTable(np.empty(0, dtype=np.int32),
                                  np.empty(0, dtype=np.int32),
                                  np.empty(0, dtype=np.int64),
                                  np.empty((0, N_COUNTERS), dtype=np.int64),
                                  job_ids, node_usage.filesystems,
                                  node_usage.bin_width)

    free = ~owned
    if free.any():
        keys, agg = _group_sum(
            [claim_fs[free].astype(np.int64), claim_bin[free]],
            claim_deltas[free])
        unattributed = FsUsageTable(keys[0].astype(np.int32), keys[1], agg,
                                    node_usage.filesystems,
                                    node_usage.bin_width)
    else:
        unattributed = FsUsageTable(np.empty(0, dtype=np.int32),
                                    np.empty(0, dtype=np.int64),
                                    np.empty((0, N_COUNTERS),
                                             dtype=np.int64),
                                    node_usage.filesystems,
                                    node_usage.bin_width)

    return AttributionResult(job_usage, unattributed, jobs)
