"""Counter and job feed parsing, and cumulative-to-binned delta conversion.

Feeds are plain CSV. counters.csv carries one cumulative snapshot per
(timestamp, node, filesystem) row with the 21 counters; jobs.csv carries
scheduler accounting. Parsed counter feeds are held columnar (numpy) but
behave as sequences of ``CounterSample`` records.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .ops import COUNTER_NAMES, N_COUNTERS, OpKind

COUNTER_HEADER = ("ts", "node", "fs") + COUNTER_NAMES
JOB_HEADER = ("job_id", "project", "command", "nodes",
              "start_ts", "end_ts", "cores_per_node")

DEFAULT_BIN_WIDTH_S = 360
DEFAULT_MAX_GAP_BINS = 3
DEFAULT_CORES_PER_NODE = 24


class FeedFormatError(ValueError):
    """A feed violated its schema; carries the offending line and field."""

    def __init__(self, message, line_no=None, feed_field=None):
        detail = message
        if line_no is not None:
            detail += f" (line {line_no}"
            if feed_field is not None:
                detail += f", field {feed_field!r}"
            detail += ")"
        super().__init__(detail)
        self.line_no = line_no
        self.feed_field = feed_field


@dataclass(frozen=True, eq=False)
class CounterSample:
    """One node's cumulative counter snapshot for one fs at one time."""

    timestamp: int
    node_id: str
    fs_id: str
    values: np.ndarray  # shape (21,), int64, feed column order

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.int64)
        if vals.shape != (N_COUNTERS,):
            raise ValueError(f"expected {N_COUNTERS} counter values, "
                             f"got shape {vals.shape}")
        if self.timestamp <= 0:
            raise ValueError(f"timestamp must be > 0, got {self.timestamp}")
        if (vals < 0).any():
            bad = COUNTER_NAMES[int(np.argmin(vals))]
            raise ValueError(f"negative counter value for {bad!r}")
        object.__setattr__(self, "values", vals)

    def value(self, op: OpKind) -> int:
        return int(self.values[op.column])

    def values_dict(self) -> dict[OpKind, int]:
        return {op: int(self.values[op.column]) for op in OpKind}

    def __eq__(self, other):
        if not isinstance(other, CounterSample):
            return NotImplemented
        return (self.timestamp == other.timestamp
                and self.node_id == other.node_id
                and self.fs_id == other.fs_id
                and np.array_equal(self.values, other.values))


@dataclass
class CounterFeed:
    """Columnar sequence of CounterSample rows, in feed order."""

    ts: np.ndarray        # int64 (n,)
    node_idx: np.ndarray  # int32 (n,)
    fs_idx: np.ndarray    # int32 (n,)
    values: np.ndarray    # int64 (n, 21)
    nodes: tuple[str, ...]
    filesystems: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.ts)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return CounterSample(int(self.ts[i]),
                             self.nodes[self.node_idx[i]],
                             self.filesystems[self.fs_idx[i]],
                             self.values[i].copy())

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def from_samples(cls, samples) -> "CounterFeed":
        samples = list(samples)
        nodes: dict[str, int] = {}
        filesystems: dict[str, int] = {}
        n = len(samples)
        ts = np.empty(n, dtype=np.int64)
        node_idx = np.empty(n, dtype=np.int32)
        fs_idx = np.empty(n, dtype=np.int32)
        values = np.empty((n, N_COUNTERS), dtype=np.int64)
        for i, s in enumerate(samples):
            ts[i] = s.timestamp
            node_idx[i] = nodes.setdefault(s.node_id, len(nodes))
            fs_idx[i] = filesystems.setdefault(s.fs_id, len(filesystems))
            values[i] = s.values
        return cls(ts, node_idx, fs_idx, values,
                   tuple(nodes), tuple(filesystems))


def _check_header(row, expected, what):
    if row is None:
        raise FeedFormatError(f"{what}: empty input, missing header")
    if tuple(row) != tuple(expected):
        missing = [c for c in expected if c not in row]
        extra = [c for c in row if c not in expected]
        raise FeedFormatError(
            f"{what}: bad header (missing={missing}, extra={extra}, "
            f"expected exactly {','.join(expected)})", line_no=1)


_PARSE_CHUNK = 65536


def _convert_chunk(rows, first_line):
    """String rows -> (ts, values) arrays; locates faults on failure."""
    cols = list(zip(*rows))
    try:
        ts = np.asarray(cols[0], dtype=np.int64)
        values = np.empty((len(rows), N_COUNTERS), dtype=np.int64)
        for c in range(N_COUNTERS):
            values[:, c] = np.asarray(cols[3 + c], dtype=np.int64)
    except (ValueError, OverflowError):
        for i, r in enumerate(rows):  # slow rescan to locate the fault
            for j, name in (((0, "ts"),) + tuple(
                    (3 + c, COUNTER_NAMES[c]) for c in range(N_COUNTERS))):
                try:
                    int(r[j])
                except ValueError:
                    raise FeedFormatError(
                        f"counter feed: non-integer value {r[j]!r}",
                        line_no=first_line + i, feed_field=name) from None
        raise
    bad = np.flatnonzero(ts <= 0)
    if bad.size:
        i = int(bad[0])
        raise FeedFormatError(
            f"counter feed: timestamp must be > 0, got {ts[i]}",
            line_no=first_line + i, feed_field="ts")
    neg = np.argwhere(values < 0)
    if neg.size:
        i, c = int(neg[0, 0]), int(neg[0, 1])
        raise FeedFormatError(
            f"counter feed: negative counter value {values[i, c]}",
            line_no=first_line + i, feed_field=COUNTER_NAMES[c])
    return ts, values


def parse_counter_feed(stream, schema=COUNTER_HEADER) -> CounterFeed:
    """Parse a counters.csv stream into a CounterFeed.

    Raises FeedFormatError with the line number and offending field for
    malformed rows; the header must match the schema exactly. Rows are
    converted in chunks so large feeds never sit in memory as strings.
    """
    reader = csv.reader(stream)
    header = next(reader, None)
    _check_header(header, schema, "counter feed")

    node_code: dict[str, int] = {}
    fs_code: dict[str, int] = {}
    node_idx: list[int] = []
    fs_idx: list[int] = []
    ts_chunks: list[np.ndarray] = []
    value_chunks: list[np.ndarray] = []
    pending: list[list[str]] = []
    first_line = 2
    for line_no, row in enumerate(reader, start=2):
        if len(row) != len(schema):
            raise FeedFormatError(
                f"counter feed: expected {len(schema)} fields, "
                f"got {len(row)}", line_no=line_no)
        node_idx.append(node_code.setdefault(row[1], len(node_code)))
        fs_idx.append(fs_code.setdefault(row[2], len(fs_code)))
        pending.append(row)
        if len(pending) >= _PARSE_CHUNK:
            ts, values = _convert_chunk(pending, first_line)
            ts_chunks.append(ts)
            value_chunks.append(values)
            first_line = line_no + 1
            pending = []
    if pending:
        ts, values = _convert_chunk(pending, first_line)
        ts_chunks.append(ts)
        value_chunks.append(values)

    if ts_chunks:
        ts_all = np.concatenate(ts_chunks)
        values_all = np.concatenate(value_chunks)
    else:
        ts_all = np.empty(0, dtype=np.int64)
        values_all = np.empty((0, N_COUNTERS), dtype=np.int64)
    return CounterFeed(ts_all,
                       np.asarray(node_idx, dtype=np.int32),
                       np.asarray(fs_idx, dtype=np.int32),
                       values_all,
                       tuple(node_code), tuple(fs_code))


def write_counter_csv(feed: CounterFeed, stream) -> None:
    """Serialize a CounterFeed back to counters.csv format (row order kept)."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(COUNTER_HEADER)
    nodes = feed.nodes
    filesystems = feed.filesystems
    ts = feed.ts
    ni = feed.node_idx
    fi = feed.fs_idx
    vals = feed.values
    for i in range(len(feed)):
        writer.writerow([int(ts[i]), nodes[ni[i]], filesystems[fi[i]],
                         *[int(v) for v in vals[i]]])


@dataclass(frozen=True)
class JobRecord:
    """Scheduler accounting for one job."""

    job_id: str
    command: str
    project: str
    nodes: frozenset[str]
    start_ts: int
    end_ts: int
    cores_per_node: int = DEFAULT_CORES_PER_NODE

    def __post_init__(self):
        object.__setattr__(self, "nodes", frozenset(self.nodes))
        if self.end_ts <= self.start_ts:
            raise ValueError(
                f"job {self.job_id}: end_ts {self.end_ts} must be after "
                f"start_ts {self.start_ts}")
        if not self.nodes:
            raise ValueError(f"job {self.job_id}: empty node list")
        if self.cores_per_node <= 0:
            raise ValueError(
                f"job {self.job_id}: cores_per_node must be positive")

    @property
    def runtime_s(self) -> int:
        return self.end_ts - self.start_ts


def parse_job_feed(stream,
                   default_cores: int = DEFAULT_CORES_PER_NODE
                   ) -> list[JobRecord]:
    """Parse a jobs.csv stream; job ids must be unique within the feed.

    An empty cores_per_node field falls back to default_cores.
    """
    reader = csv.reader(stream)
    header = next(reader, None)
    _check_header(header, JOB_HEADER, "job feed")

    jobs = []
    seen: dict[str, int] = {}
    for line_no, row in enumerate(reader, start=2):
        if len(row) != len(JOB_HEADER):
            raise FeedFormatError(
                f"job feed: expected {len(JOB_HEADER)} fields, "
                f"got {len(row)}", line_no=line_no)
        job_id, project, command, nodes_s, start_s, end_s, cores_s = row
        if job_id in seen:
            raise FeedFormatError(
                f"job feed: duplicate job_id {job_id!r} "
                f"(first at line {seen[job_id]})", line_no=line_no,
                feed_field="job_id")
        seen[job_id] = line_no
        nodes = frozenset(n for n in nodes_s.split(";") if n)
        try:
            start_ts = int(start_s)
            end_ts = int(end_s)
            cores = int(cores_s) if cores_s.strip() else default_cores
        except ValueError as exc:
            raise FeedFormatError(f"job feed: {exc}",
                                  line_no=line_no) from None
        try:
            jobs.append(JobRecord(job_id=job_id, command=command,
                                  project=project, nodes=nodes,
                                  start_ts=start_ts, end_ts=end_ts,
                                  cores_per_node=cores))
        except ValueError as exc:
            raise FeedFormatError(f"job feed: {exc}",
                                  line_no=line_no) from None
    return jobs


def write_jobs_csv(jobs, stream) -> None:
    """Serialize JobRecords to jobs.csv format (nodes sorted, ';'-joined)."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(JOB_HEADER)
    for j in jobs:
        writer.writerow([j.job_id, j.project, j.command,
                         ";".join(sorted(j.nodes)),
                         j.start_ts, j.end_ts, j.cores_per_node])


@dataclass(frozen=True, eq=False)
class BinnedNodeUsage:
    """Per-node, per-fs counter deltas accrued in one time bin."""

    node_id: str
    fs_id: str
    bin_start: int
    deltas: np.ndarray  # (21,), int64

    def delta(self, op: OpKind) -> int:
        return int(self.deltas[op.column])

    def deltas_dict(self) -> dict[OpKind, int]:
        return {op: int(self.deltas[op.column]) for op in OpKind}

    def __eq__(self, other):
        if not isinstance(other, BinnedNodeUsage):
            return NotImplemented
        return (self.node_id == other.node_id and self.fs_id == other.fs_id
                and self.bin_start == other.bin_start
                and np.array_equal(self.deltas, other.deltas))


@dataclass
class UsageTable:
    """Columnar set of BinnedNodeUsage rows, sorted by (node, fs, bin)."""

    bin_start: np.ndarray  # int64 (m,)
    node_idx: np.ndarray   # int32 (m,)
    fs_idx: np.ndarray     # int32 (m,)
    deltas: np.ndarray     # int64 (m, 21)
    nodes: tuple[str, ...]
    filesystems: tuple[str, ...]
    bin_width: int = DEFAULT_BIN_WIDTH_S

    def __len__(self) -> int:
        return len(self.bin_start)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return BinnedNodeUsage(self.nodes[self.node_idx[i]],
                               self.filesystems[self.fs_idx[i]],
                               int(self.bin_start[i]),
                               self.deltas[i].copy())

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def totals(self) -> np.ndarray:
        """Per-counter grand totals, shape (21,)."""
        if not len(self):
            return np.zeros(N_COUNTERS, dtype=np.int64)
        return self.deltas.sum(axis=0)


def _empty_usage(nodes, filesystems, bin_width) -> UsageTable:
    return UsageTable(np.empty(0, dtype=np.int64),
                      np.empty(0, dtype=np.int32),
                      np.empty(0, dtype=np.int32),
                      np.empty((0, N_COUNTERS), dtype=np.int64),
                      nodes, filesystems, bin_width)


def deltify_and_bin(samples, bin_width: int = DEFAULT_BIN_WIDTH_S, *,
                    max_gap_bins: int | None = DEFAULT_MAX_GAP_BINS,
                    pre_differenced: bool = False) -> UsageTable:
    """Convert cumulative snapshots to per-bin deltas.

    A sample at time t covers activity since the previous sample of the same
    (node, fs) stream; a bin labelled b covers (b, b+w]. Deltas spanning
    several bins are apportioned by time overlap (half-even rounding, exact
    sum). Counter decreases are treated as resets (the new value is the
    delta since the restart). Gaps longer than max_gap_bins bins are
    dropped. Input order does not matter; rows are sorted internally.

    With pre_differenced=True each row's values are taken directly as the
    delta for the bin its timestamp closes.
    """
    if bin_width <= 0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    feed = samples if isinstance(samples, CounterFeed) \
        else CounterFeed.from_samples(samples)
    n_fs = len(feed.filesystems)
    if len(feed) == 0 or n_fs == 0:
        return _empty_usage(feed.nodes, feed.filesystems, bin_width)

    order = np.lexsort((feed.ts, feed.fs_idx, feed.node_idx))
    stream = (feed.node_idx[order].astype(np.int64) * n_fs
              + feed.fs_idx[order])
    ts = np.ascontiguousarray(feed.ts[order])
    values = np.ascontiguousarray(feed.values[order])

    if pre_differenced:
        keep = values.any(axis=1)
        s_codes = stream[keep]
        bins = bin_width * ((ts[keep] - 1) // bin_width)
        deltas = values[keep]
    else:
        if max_gap_bins is None:
            max_gap_s = np.iinfo(np.int64).max // 4
        else:
            max_gap_s = max_gap_bins * bin_width
        s_codes, bins, deltas = _kernels.deltify_pairs(
            stream, ts, values, bin_width, max_gap_s)

    if len(s_codes) == 0:
        return _empty_usage(feed.nodes, feed.filesystems, bin_width)

    # spanning pairs can produce all-zero shares; keep the table sparse
    nonzero = deltas.any(axis=1)
    if not nonzero.all():
        s_codes = s_codes[nonzero]
        bins = bins[nonzero]
        deltas = deltas[nonzero]
    if len(s_codes) == 0:
        return _empty_usage(feed.nodes, feed.filesystems, bin_width)

    # aggregate duplicate (stream, bin) rows and fix the canonical order
    order2 = np.lexsort((bins, s_codes))
    s2 = s_codes[order2]
    b2 = bins[order2]
    d2 = deltas[order2]
    starts = np.flatnonzero(
        np.concatenate(([True], (s2[1:] != s2[:-1]) | (b2[1:] != b2[:-1]))))
    agg = np.add.reduceat(d2, starts, axis=0)
    u_s = s2[starts]
    u_b = b2[starts]

    return UsageTable(bin_start=u_b,
                      node_idx=(u_s // n_fs).astype(np.int32),
                      fs_idx=(u_s % n_fs).astype(np.int32),
                      deltas=agg,
                      nodes=feed.nodes,
                      filesystems=feed.filesystems,
                      bin_width=bin_width)


def read_counter_file(path) -> CounterFeed:
    with open(path, newline="") as f:
        return parse_counter_feed(f)


def read_job_file(path,
                  default_cores: int = DEFAULT_CORES_PER_NODE
                  ) -> list[JobRecord]:
    with open(path, newline="") as f:
        return parse_job_feed(f, default_cores=default_cores)


def feed_to_csv_text(feed: CounterFeed) -> str:
    buf = io.StringIO()
    write_counter_csv(feed, buf)
    return buf.getvalue()
