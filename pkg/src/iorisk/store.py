"""Plain-file intermediate store so pipeline stages compose.

ingest writes store/node_usage.csv + store/jobs.csv + store/meta.json;
analyze adds store/job_usage.csv. Everything is auditable CSV/JSON with
deterministic ordering; no database.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .attribute import JobUsageTable
from .ingest import UsageTable, parse_job_feed, write_jobs_csv
from .ops import COUNTER_NAMES, N_COUNTERS

NODE_USAGE_NAME = "node_usage.csv"
JOB_USAGE_NAME = "job_usage.csv"
JOBS_NAME = "jobs.csv"
META_NAME = "meta.json"


def store_dir(out_dir) -> Path:
    return Path(out_dir) / "store"


def write_meta(out_dir, bin_width_s: int) -> None:
    doc = {"bin_width_s": int(bin_width_s)}
    (store_dir(out_dir) / META_NAME).write_text(
        json.dumps(doc, sort_keys=True) + "\n")


def read_meta(out_dir) -> dict:
    return json.loads((store_dir(out_dir) / META_NAME).read_text())


def write_node_usage(out_dir, usage: UsageTable) -> None:
    path = store_dir(out_dir) / NODE_USAGE_NAME
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["node", "fs", "bin_start"] + list(COUNTER_NAMES))
        for i in range(len(usage)):
            w.writerow([usage.nodes[usage.node_idx[i]],
                        usage.filesystems[usage.fs_idx[i]],
                        int(usage.bin_start[i])]
                       + usage.deltas[i].tolist())


_READ_CHUNK = 65536


def _delta_chunks(pending, chunks):
    chunks.append(np.asarray(pending, dtype=np.int64))
    pending.clear()


def _stack_deltas(chunks, m):
    if not m:
        return np.empty((0, N_COUNTERS), dtype=np.int64)
    return np.concatenate(chunks) if len(chunks) > 1 else chunks[0]


def read_node_usage(out_dir, bin_width_s: int) -> UsageTable:
    path = store_dir(out_dir) / NODE_USAGE_NAME
    nodes: dict[str, int] = {}
    filesystems: dict[str, int] = {}
    node_idx, fs_idx, bins = [], [], []
    pending, chunks = [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        next(reader)
        for row in reader:
            node_idx.append(nodes.setdefault(row[0], len(nodes)))
            fs_idx.append(filesystems.setdefault(row[1], len(filesystems)))
            bins.append(int(row[2]))
            pending.append(row[3:])
            if len(pending) >= _READ_CHUNK:
                _delta_chunks(pending, chunks)
    if pending:
        _delta_chunks(pending, chunks)
    return UsageTable(
        bin_start=np.asarray(bins, dtype=np.int64),
        node_idx=np.asarray(node_idx, dtype=np.int32),
        fs_idx=np.asarray(fs_idx, dtype=np.int32),
        deltas=_stack_deltas(chunks, len(bins)),
        nodes=tuple(nodes), filesystems=tuple(filesystems),
        bin_width=bin_width_s)


def write_job_usage(out_dir, ju: JobUsageTable) -> None:
    path = store_dir(out_dir) / JOB_USAGE_NAME
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["job_id", "fs", "bin_start"] + list(COUNTER_NAMES))
        for i in range(len(ju)):
            w.writerow([ju.job_ids[ju.job_idx[i]],
                        ju.filesystems[ju.fs_idx[i]],
                        int(ju.bin_start[i])]
                       + ju.deltas[i].tolist())


def read_job_usage(out_dir, bin_width_s: int, job_ids,
                   filesystems) -> JobUsageTable:
    """Load job usage; job/fs registries come from the jobs and node feeds
    so indices stay stable even for jobs without rows."""
    path = store_dir(out_dir) / JOB_USAGE_NAME
    job_of = {j: i for i, j in enumerate(job_ids)}
    fs_of = {f: i for i, f in enumerate(filesystems)}
    job_idx, fs_idx, bins = [], [], []
    pending, chunks = [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        next(reader)
        for row in reader:
            if row[0] not in job_of:
                raise ValueError(
                    f"store {path}: job {row[0]!r} not in jobs.csv; "
                    f"rerun the analyze stage")
            if row[1] not in fs_of:
                raise ValueError(
                    f"store {path}: filesystem {row[1]!r} not in the node "
                    f"usage store; rerun the analyze stage")
            job_idx.append(job_of[row[0]])
            fs_idx.append(fs_of[row[1]])
            bins.append(int(row[2]))
            pending.append(row[3:])
            if len(pending) >= _READ_CHUNK:
                _delta_chunks(pending, chunks)
    if pending:
        _delta_chunks(pending, chunks)
    return JobUsageTable(
        job_idx=np.asarray(job_idx, dtype=np.int32),
        fs_idx=np.asarray(fs_idx, dtype=np.int32),
        bin_start=np.asarray(bins, dtype=np.int64),
        deltas=_stack_deltas(chunks, len(bins)),
        job_ids=tuple(job_ids), filesystems=tuple(filesystems),
        bin_width=bin_width_s)


def write_jobs(out_dir, jobs) -> None:
    with open(store_dir(out_dir) / JOBS_NAME, "w", newline="") as f:
        write_jobs_csv(jobs, f)


def read_jobs(out_dir):
    with open(store_dir(out_dir) / JOBS_NAME, newline="") as f:
        return parse_job_feed(f)
