"""Deterministic synthetic workload generator with a ground-truth ledger.

Generates counters.csv / jobs.csv feeds (schema-identical to real inputs)
plus ledger.json holding the exact per-job and per-fs-bin totals the
pipeline must recover. Jobs are aligned to the reporting cadence and nodes
are exclusively allocated, so the whole conservation chain is exact.
Identical seeds produce byte-identical output.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .ingest import JobRecord, write_jobs_csv
from .ops import (COUNTER_NAMES, MDS_SLICE, N_COUNTERS,
                  READ_KB, READ_OPS, WRITE_KB, WRITE_OPS)
from .report import node_bin_label, volume_bin_label

PATTERNS = ("streaming-write", "small-read", "metadata-storm", "task-farm",
            "idle")

# 2020-01-01 00:00:00 UTC; divisible by 360 and a UTC midnight
DEFAULT_START_TS = 1_577_836_800

_COL = {name: i for i, name in enumerate(COUNTER_NAMES)}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class JobTemplate:
    """A family of runs sharing a command and an I/O pattern."""

    name: str
    command: str
    project: str
    pattern: str
    count: int
    nodes: int | tuple[int, int] = 1           # fixed or inclusive range
    runtime_bins: int | tuple[int, int] = 4    # duration in bins
    intensity: float = 1.0
    slow_runs: int = 0        # trailing runs scripted to run slower
    slow_factor: float = 2.0
    cores_per_node: int = 24

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ScenarioError(f"unknown pattern {self.pattern!r}; "
                                f"expected one of {PATTERNS}")
        if self.count <= 0:
            raise ScenarioError(f"template {self.name}: count must be > 0")
        if self.slow_runs < 0 or self.slow_runs > self.count:
            raise ScenarioError(
                f"template {self.name}: slow_runs out of range")
        if self.intensity <= 0:
            raise ScenarioError(
                f"template {self.name}: intensity must be > 0")


@dataclass(frozen=True)
class ContentionEpisode:
    """A time range (offsets from scenario start) with multiplied load."""

    start_s: int
    end_s: int
    load_multiplier: float = 4.0
    fs_id: str | None = None  # None: all filesystems

    def __post_init__(self):
        if self.end_s <= self.start_s:
            raise ScenarioError("episode end must be after start")
        if self.load_multiplier <= 0:
            raise ScenarioError("episode multiplier must be > 0")


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int
    duration_s: int
    node_count: int
    filesystems: tuple[str, ...]
    templates: tuple[JobTemplate, ...]
    episodes: tuple[ContentionEpisode, ...] = ()
    bin_width_s: int = 360
    start_ts: int = DEFAULT_START_TS
    resets: tuple[tuple[str, str, int], ...] = ()  # (node, fs, offset_s)
    emit_probe: bool = False
    probe_cadence_s: int = 60

    def __post_init__(self):
        if self.node_count <= 0:
            raise ScenarioError("node_count must be > 0")
        if self.bin_width_s <= 0:
            raise ScenarioError("bin_width_s must be > 0")
        if self.duration_s <= 0 or self.duration_s % self.bin_width_s:
            raise ScenarioError(
                "duration_s must be a positive multiple of bin_width_s")
        if not self.filesystems:
            raise ScenarioError("at least one filesystem required")
        if not self.templates:
            raise ScenarioError("at least one job template required")
        names = [t.name for t in self.templates]
        if len(set(names)) != len(names):
            raise ScenarioError("template names must be unique")

    @property
    def n_bins(self) -> int:
        return self.duration_s // self.bin_width_s


@dataclass
class GroundTruthLedger:
    """Exact totals the pipeline must recover from the generated feeds."""

    bin_width_s: int
    start_ts: int
    duration_s: int
    job_totals: dict[str, list[int]]          # job_id -> 21 counters
    job_fs: dict[str, str]                    # job_id -> home fs
    fs_bin_totals: dict[str, dict[int, list[int]]]
    feed_totals: dict[str, list[int]]         # fs -> 21 counters
    project_job_counts: dict[str, int]
    slowdown_job_ids: list[str]
    heatmap_cells: dict[str, dict[str, str]]  # job_id -> measure -> cell
    resets_applied: list[list]                # [node, fs, offset_s]
    resets_skipped: list[list]

    def to_json(self, path) -> None:
        doc = {
            "bin_width_s": self.bin_width_s,
            "start_ts": self.start_ts,
            "duration_s": self.duration_s,
            "job_totals": {k: list(map(int, v))
                           for k, v in sorted(self.job_totals.items())},
            "job_fs": dict(sorted(self.job_fs.items())),
            "fs_bin_totals": {
                fs: {str(b): list(map(int, v))
                     for b, v in sorted(bins.items())}
                for fs, bins in sorted(self.fs_bin_totals.items())},
            "feed_totals": {k: list(map(int, v))
                            for k, v in sorted(self.feed_totals.items())},
            "project_job_counts": dict(
                sorted(self.project_job_counts.items())),
            "slowdown_job_ids": sorted(self.slowdown_job_ids),
            "heatmap_cells": {k: dict(v) for k, v in
                              sorted(self.heatmap_cells.items())},
            "resets_applied": self.resets_applied,
            "resets_skipped": self.resets_skipped,
            "counter_order": list(COUNTER_NAMES),
        }
        Path(path).write_text(json.dumps(doc, indent=1, sort_keys=False)
                              + "\n")

    @classmethod
    def from_json(cls, path) -> "GroundTruthLedger":
        doc = json.loads(Path(path).read_text())
        return cls(
            bin_width_s=doc["bin_width_s"],
            start_ts=doc["start_ts"],
            duration_s=doc["duration_s"],
            job_totals={k: list(v) for k, v in doc["job_totals"].items()},
            job_fs=doc["job_fs"],
            fs_bin_totals={fs: {int(b): list(v) for b, v in bins.items()}
                           for fs, bins in doc["fs_bin_totals"].items()},
            feed_totals={k: list(v) for k, v in doc["feed_totals"].items()},
            project_job_counts=doc["project_job_counts"],
            slowdown_job_ids=list(doc["slowdown_job_ids"]),
            heatmap_cells=doc["heatmap_cells"],
            resets_applied=doc["resets_applied"],
            resets_skipped=doc["resets_skipped"])


def _draw(rng, value) -> int:
    """Fixed int or inclusive (lo, hi) range."""
    if isinstance(value, int):
        return value
    lo, hi = value
    return int(rng.integers(lo, hi + 1))


def _pattern_deltas(rng, pattern: str, nb: int, nodes: int,
                    intensity: float) -> np.ndarray:
    """Per-bin whole-job deltas for one run, shape (nb, 21)."""
    d = np.zeros((nb, N_COUNTERS), dtype=np.int64)
    scale = intensity * nodes
    if pattern == "idle":
        return d
    if pattern == "streaming-write":
        ops = np.rint(rng.integers(800, 1200, size=nb)
                      * scale).astype(np.int64)
        d[:, WRITE_OPS] = ops
        d[:, WRITE_KB] = 1024 * ops  # 1 MiB per op: optimal quality
        d[:, _COL["open"]] = rng.integers(1, 4, size=nb) * nodes
        d[:, _COL["close"]] = d[:, _COL["open"]]
        d[:, _COL["getattr"]] = rng.integers(0, 5, size=nb) * nodes
    elif pattern == "small-read":
        ops = np.rint(rng.integers(2000, 4000, size=nb)
                      * scale).astype(np.int64)
        d[:, READ_OPS] = ops
        d[:, READ_KB] = 4 * ops  # 4 KiB reads: poor quality
        d[:, _COL["open"]] = rng.integers(5, 20, size=nb) * nodes
        d[:, _COL["getattr"]] = rng.integers(10, 40, size=nb) * nodes
    elif pattern == "metadata-storm":
        for name in ("mkdir", "open", "unlink", "getattr", "setattr"):
            d[:, _COL[name]] = np.rint(
                rng.integers(400, 1600, size=nb) * scale).astype(np.int64)
        ops = rng.integers(0, 50, size=nb).astype(np.int64)
        d[:, READ_OPS] = ops
        d[:, READ_KB] = 64 * ops
    elif pattern == "task-farm":
        d[:, _COL["open"]] = np.rint(
            rng.integers(50, 200, size=nb) * intensity).astype(np.int64)
        d[:, _COL["close"]] = d[:, _COL["open"]]
        d[:, _COL["getattr"]] = np.rint(
            rng.integers(80, 300, size=nb) * intensity).astype(np.int64)
        ops = np.rint(rng.integers(10, 60, size=nb)
                      * intensity).astype(np.int64)
        d[:, WRITE_OPS] = ops
        d[:, WRITE_KB] = 64 * ops  # 64 KiB writes
    return d


@dataclass
class _PlacedJob:
    record: JobRecord
    template: JobTemplate
    fs_i: int
    start_bin: int
    node_idxs: np.ndarray
    deltas: np.ndarray  # (runtime_bins, 21)
    is_slow: bool


def _free_nodes(bookings, start, end, want, order):
    """First `want` nodes (in `order`) with no booking inside [start, end)."""
    import bisect
    found = []
    for node in order:
        lst = bookings[node]
        i = bisect.bisect_left(lst, (start, start))
        if i < len(lst) and lst[i][0] < end:
            continue
        if i > 0 and lst[i - 1][1] > start:
            continue
        found.append(int(node))
        if len(found) == want:
            return found
    return None


def _place_jobs(spec: ScenarioSpec, rng) -> list[_PlacedJob]:
    import bisect
    node_names = [f"n{i:04d}" for i in range(spec.node_count)]
    bookings: list[list[tuple[int, int]]] = \
        [[] for _ in range(spec.node_count)]
    n_bins = spec.n_bins
    placed = []
    for template in spec.templates:
        for k in range(template.count):
            nodes_k = _draw(rng, template.nodes)
            runtime = _draw(rng, template.runtime_bins)
            is_slow = k >= template.count - template.slow_runs
            if is_slow:
                runtime = int(round(runtime * template.slow_factor))
            runtime = max(1, min(runtime, n_bins))
            if nodes_k > spec.node_count:
                raise ScenarioError(
                    f"template {template.name}: run wants {nodes_k} nodes, "
                    f"scenario has {spec.node_count}")
            start_bin = None
            chosen = None
            for _ in range(20):
                cand = int(rng.integers(0, n_bins - runtime + 1))
                order = rng.permutation(spec.node_count)
                found = _free_nodes(bookings, cand, cand + runtime,
                                    nodes_k, order)
                if found is not None:
                    start_bin = cand
                    chosen = np.sort(np.asarray(found))
                    break
            if start_bin is None:
                # deterministic sweep: earliest start with capacity
                for cand in range(0, n_bins - runtime + 1):
                    found = _free_nodes(bookings, cand, cand + runtime,
                                        nodes_k, range(spec.node_count))
                    if found is not None:
                        start_bin = cand
                        chosen = np.sort(np.asarray(found))
                        break
            if start_bin is None:
                raise ScenarioError(
                    f"more concurrent jobs than nodes: could not place "
                    f"run {k} of template {template.name!r} "
                    f"({nodes_k} nodes wanted)")
            for node in chosen:
                bisect.insort(bookings[int(node)],
                              (start_bin, start_bin + runtime))
            fs_i = int(rng.integers(0, len(spec.filesystems)))
            deltas = _pattern_deltas(rng, template.pattern, runtime,
                                     nodes_k, template.intensity)
            w = spec.bin_width_s
            record = JobRecord(
                job_id=f"{template.name}-{k:04d}",
                command=template.command,
                project=template.project,
                nodes=frozenset(node_names[i] for i in chosen),
                start_ts=spec.start_ts + start_bin * w,
                end_ts=spec.start_ts + (start_bin + runtime) * w,
                cores_per_node=template.cores_per_node)
            placed.append(_PlacedJob(record=record, template=template,
                                     fs_i=fs_i, start_bin=start_bin,
                                     node_idxs=chosen, deltas=deltas,
                                     is_slow=is_slow))
    return placed


def _apply_episodes(spec: ScenarioSpec, job: _PlacedJob) -> None:
    if not spec.episodes:
        return
    w = spec.bin_width_s
    nb = job.deltas.shape[0]
    offsets = (job.start_bin + np.arange(nb)) * w
    for ep in spec.episodes:
        if ep.fs_id is not None \
                and ep.fs_id != spec.filesystems[job.fs_i]:
            continue
        mask = (offsets >= ep.start_s) & (offsets < ep.end_s)
        if mask.any():
            job.deltas[mask] = np.rint(
                job.deltas[mask] * ep.load_multiplier).astype(np.int64)


def generate(spec: ScenarioSpec, out_dir) -> GroundTruthLedger:
    """Write counters.csv, jobs.csv, ledger.json (and probe.csv) to out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    w = spec.bin_width_s
    n_bins = spec.n_bins
    n_nodes = spec.node_count
    n_fs = len(spec.filesystems)
    node_names = [f"n{i:04d}" for i in range(n_nodes)]

    placed = _place_jobs(spec, rng)
    for job in placed:
        _apply_episodes(spec, job)

    # node-level per-bin deltas, one dense cube per fs
    cubes = [np.zeros((n_nodes, n_bins, N_COUNTERS), dtype=np.int64)
             for _ in range(n_fs)]
    job_totals: dict[str, list[int]] = {}
    job_fs: dict[str, str] = {}
    fs_bin_totals: dict[str, dict[int, np.ndarray]] = {
        fs: {} for fs in spec.filesystems}
    for job in placed:
        cube = cubes[job.fs_i]
        nb = job.deltas.shape[0]
        nodes = job.node_idxs
        n_share = len(nodes)
        base = job.deltas // n_share
        rem = job.deltas - base * n_share
        for pos, node in enumerate(nodes):
            extra = (rem > pos).astype(np.int64)
            cube[node, job.start_bin:job.start_bin + nb] += base + extra
        job_totals[job.record.job_id] = [int(v)
                                         for v in job.deltas.sum(axis=0)]
        fs_id = spec.filesystems[job.fs_i]
        job_fs[job.record.job_id] = fs_id
        bins_map = fs_bin_totals[fs_id]
        for b in range(nb):
            key = spec.start_ts + (job.start_bin + b) * w
            if key not in bins_map:
                bins_map[key] = np.zeros(N_COUNTERS, dtype=np.int64)
            bins_map[key] += job.deltas[b]

    # cumulative series and scripted resets (processed in time order, so a
    # stream's earlier resets shape the emitted values a later one sees)
    cums = [np.cumsum(cube, axis=1) for cube in cubes]
    resets_applied: list[list] = []
    resets_skipped: list[list] = []
    rebase = [np.zeros((n_nodes, n_bins + 1, N_COUNTERS), dtype=np.int64)
              for _ in range(n_fs)] if spec.resets else None
    for node_id, fs_id, offset_s in sorted(spec.resets,
                                           key=lambda r: (r[2], r[0], r[1])):
        node = node_names.index(node_id)
        fs_i = spec.filesystems.index(fs_id)
        if offset_s % w or not 0 < offset_s < spec.duration_s:
            raise ScenarioError(
                f"reset offset {offset_s} must be a bin-aligned snapshot "
                f"inside the scenario")
        k_r = offset_s // w  # snapshot index; reports bins [0, k_r)
        pre = cums[fs_i][node, k_r - 1] - rebase[fs_i][node, k_r]
        bin_delta = cubes[fs_i][node, k_r]
        # detectable only if the stream has history and every counter
        # either drops or had none
        if pre.any() and bool(np.all((bin_delta < pre) | (pre == 0))):
            rebase[fs_i][node, k_r + 1:] = cums[fs_i][node, k_r - 1]
            resets_applied.append([node_id, fs_id, offset_s])
        else:
            resets_skipped.append([node_id, fs_id, offset_s])

    # emit counters.csv: snapshot k reports cumulative activity of bins < k
    counters_path = out_dir / "counters.csv"
    with open(counters_path, "w", newline="") as f:
        f.write(",".join(("ts", "node", "fs") + COUNTER_NAMES) + "\n")
        for k in range(n_bins + 1):
            ts = spec.start_ts + k * w
            rows = []
            for fs_i in range(n_fs):
                if k == 0:
                    snap = np.zeros((n_nodes, N_COUNTERS), dtype=np.int64)
                else:
                    snap = cums[fs_i][:, k - 1, :]
                if rebase is not None:
                    snap = snap - rebase[fs_i][:, k, :]
                vals = snap.tolist()
                fs_id = spec.filesystems[fs_i]
                for node in range(n_nodes):
                    rows.append(f"{ts},{node_names[node]},{fs_id},"
                                + ",".join(map(str, vals[node])))
            f.write("\n".join(rows) + "\n")

    jobs_path = out_dir / "jobs.csv"
    records = sorted((j.record for j in placed), key=lambda r: r.job_id)
    with open(jobs_path, "w", newline="") as f:
        write_jobs_csv(records, f)

    feed_totals = {
        spec.filesystems[fs_i]: [int(v)
                                 for v in cubes[fs_i].sum(axis=(0, 1))]
        for fs_i in range(n_fs)}

    project_counts: dict[str, int] = {}
    for job in placed:
        project_counts[job.record.project] = \
            project_counts.get(job.record.project, 0) + 1

    heatmap_cells = {}
    for job in placed:
        totals = job_totals[job.record.job_id]
        cells = {"nodes": node_bin_label(len(job.record.nodes))}
        for measure, col in (("read_gib", READ_KB), ("write_gib", WRITE_KB)):
            cells[measure] = volume_bin_label(totals[col] / 2 ** 20)
        heatmap_cells[job.record.job_id] = cells

    ledger = GroundTruthLedger(
        bin_width_s=w,
        start_ts=spec.start_ts,
        duration_s=spec.duration_s,
        job_totals=job_totals,
        job_fs=job_fs,
        fs_bin_totals={fs: {b: [int(v) for v in arr]
                            for b, arr in bins.items()}
                       for fs, bins in fs_bin_totals.items()},
        feed_totals=feed_totals,
        project_job_counts=project_counts,
        slowdown_job_ids=[j.record.job_id for j in placed if j.is_slow],
        heatmap_cells=heatmap_cells,
        resets_applied=resets_applied,
        resets_skipped=resets_skipped)
    ledger.to_json(out_dir / "ledger.json")

    if spec.emit_probe:
        _emit_probe(spec, cubes, out_dir / "probe.csv", rng)

    return ledger


def _emit_probe(spec: ScenarioSpec, cubes, path, rng) -> None:
    """Synthetic per-tick response-time probe tracking total fs load."""
    w = spec.bin_width_s
    load = np.zeros(spec.n_bins, dtype=np.float64)
    for cube in cubes:
        ops = (cube[:, :, READ_OPS] + cube[:, :, WRITE_OPS]
               + cube[:, :, MDS_SLICE].sum(axis=2))
        load += ops.sum(axis=0)
    peak = load.max() if load.max() > 0 else 1.0
    ticks = np.arange(spec.probe_cadence_s, spec.duration_s + 1,
                      spec.probe_cadence_s, dtype=np.int64)
    jitter = rng.uniform(0.0, 0.05, size=ticks.size)
    with open(path, "w", newline="") as f:
        f.write("ts,latency_ms\n")
        for t, j in zip(ticks, jitter):
            k = min(int((t - 1) // w), spec.n_bins - 1)
            latency = float(1.0 + 9.0 * load[k] / peak + j)
            f.write(f"{int(spec.start_ts + t)},{latency!r}\n")


# ---------------------------------------------------------------------------
# scenario (de)serialization and named presets
# ---------------------------------------------------------------------------


def spec_to_json(spec: ScenarioSpec, path) -> None:
    doc = asdict(spec)
    doc["filesystems"] = list(spec.filesystems)
    doc["templates"] = [asdict(t) for t in spec.templates]
    doc["episodes"] = [asdict(e) for e in spec.episodes]
    doc["resets"] = [list(r) for r in spec.resets]
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def _tuple_or_int(v):
    return tuple(v) if isinstance(v, list) else v


def spec_from_json(path) -> ScenarioSpec:
    doc = json.loads(Path(path).read_text())
    templates = tuple(
        JobTemplate(**{**t,
                       "nodes": _tuple_or_int(t.get("nodes", 1)),
                       "runtime_bins": _tuple_or_int(
                           t.get("runtime_bins", 4))})
        for t in doc["templates"])
    episodes = tuple(ContentionEpisode(**e) for e in doc.get("episodes", []))
    resets = tuple(tuple(r) for r in doc.get("resets", []))
    return ScenarioSpec(
        seed=doc["seed"],
        duration_s=doc["duration_s"],
        node_count=doc["node_count"],
        filesystems=tuple(doc["filesystems"]),
        templates=templates,
        episodes=episodes,
        bin_width_s=doc.get("bin_width_s", 360),
        start_ts=doc.get("start_ts", DEFAULT_START_TS),
        resets=resets,
        emit_probe=doc.get("emit_probe", False),
        probe_cadence_s=doc.get("probe_cadence_s", 60))


def preset_scenario(name: str, seed: int | None = None) -> ScenarioSpec:
    """Built-in scenarios used by the demo, tests and benchmarks."""
    if name == "demo":
        return ScenarioSpec(
            seed=7 if seed is None else seed,
            duration_s=86400, node_count=24,
            filesystems=("fs2", "fs3"),
            templates=(
                JobTemplate("atmos", "atmos.exe -c conf.nml", "climate",
                            "streaming-write", count=12, nodes=(2, 6),
                            runtime_bins=(6, 20)),
                JobTemplate("scan", "scan --files index.db", "materials",
                            "small-read", count=10, nodes=(1, 2),
                            runtime_bins=(4, 12)),
                JobTemplate("mdstorm", "untar_many.sh inputs/",
                            "biomolecular", "metadata-storm", count=6,
                            nodes=1, runtime_bins=(2, 6)),
                JobTemplate("farm", "farm_worker.py --shard auto",
                            "materials", "task-farm", count=30, nodes=1,
                            runtime_bins=(1, 3)),
                JobTemplate("quiet", "noop.sh", "support", "idle", count=4,
                            nodes=1, runtime_bins=(4, 8)),
            ),
            episodes=(ContentionEpisode(start_s=36000, end_s=43200,
                                        load_multiplier=5.0),),
            emit_probe=True)
    if name == "metric":
        # <= 50 jobs x <= 100 bins x 2 fs, for the metric oracle fixture
        return ScenarioSpec(
            seed=11 if seed is None else seed,
            duration_s=100 * 360, node_count=30,
            filesystems=("fs2", "fs3"),
            templates=(
                JobTemplate("wr", "writer.exe", "climate",
                            "streaming-write", count=16, nodes=(1, 4),
                            runtime_bins=(5, 30)),
                JobTemplate("rd", "reader.exe", "cfd", "small-read",
                            count=16, nodes=(1, 3), runtime_bins=(5, 25)),
                JobTemplate("md", "mdstress.sh", "materials",
                            "metadata-storm", count=12, nodes=1,
                            runtime_bins=(3, 15)),
                JobTemplate("idle", "sleep.sh", "support", "idle", count=4,
                            nodes=1, runtime_bins=(5, 10)),
            ))
    if name == "slowdown":
        return ScenarioSpec(
            seed=13 if seed is None else seed,
            duration_s=86400, node_count=40,
            filesystems=("fs2",),
            templates=(
                JobTemplate("steady", "solver.exe -n 32", "cfd",
                            "streaming-write", count=12, nodes=2,
                            runtime_bins=10, slow_runs=2, slow_factor=2.0),
                JobTemplate("mixed", "analyse.py stage2", "climate",
                            "small-read", count=9, nodes=1,
                            runtime_bins=(10, 12)),
                JobTemplate("pair", "tiny.sh", "support", "idle", count=2,
                            nodes=1, runtime_bins=(4, 40)),
            ))
    if name == "contention":
        return ScenarioSpec(
            seed=17 if seed is None else seed,
            duration_s=86400, node_count=32,
            filesystems=("fs2",),
            templates=(
                JobTemplate("background", "steady.exe", "climate",
                            "streaming-write", count=10, nodes=(1, 3),
                            runtime_bins=(20, 60)),
                JobTemplate("burst", "burst.exe", "cfd", "small-read",
                            count=8, nodes=(2, 4), runtime_bins=(10, 30)),
            ),
            episodes=(
                ContentionEpisode(start_s=28800, end_s=36000,
                                  load_multiplier=25.0),
                ContentionEpisode(start_s=61200, end_s=64800,
                                  load_multiplier=15.0),
            ),
            emit_probe=True)
    if name == "perf":
        # 1,000 jobs / 200 nodes / 7 days at 360 s bins, one fs
        return ScenarioSpec(
            seed=23 if seed is None else seed,
            duration_s=7 * 86400, node_count=200,
            filesystems=("fs2",),
            templates=(
                JobTemplate("big", "sim.exe --grid 4096", "climate",
                            "streaming-write", count=250, nodes=(2, 8),
                            runtime_bins=(10, 40)),
                JobTemplate("scan", "postproc.py", "cfd", "small-read",
                            count=250, nodes=(1, 4), runtime_bins=(5, 30)),
                JobTemplate("meta", "pack_results.sh", "materials",
                            "metadata-storm", count=100, nodes=1,
                            runtime_bins=(2, 10)),
                JobTemplate("farm", "farm_item.py", "materials",
                            "task-farm", count=400, nodes=1,
                            runtime_bins=(1, 4)),
            ))
    if name == "resets":
        # six one-node jobs too long to stack: every node is busy and has
        # accumulated history well before both reset offsets
        return ScenarioSpec(
            seed=29 if seed is None else seed,
            duration_s=100 * 360, node_count=6,
            filesystems=("fs2",),
            templates=(
                JobTemplate("wr", "writer.exe", "climate",
                            "streaming-write", count=6, nodes=1,
                            runtime_bins=(60, 90)),
            ),
            resets=(("n0000", "fs2", 18000), ("n0001", "fs2", 25200)))
    raise ScenarioError(f"unknown preset {name!r}; expected one of "
                        f"demo, metric, slowdown, contention, perf, resets")
