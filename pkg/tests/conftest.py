from __future__ import annotations

import io

import numpy as np
import pytest

from iorisk.ingest import (COUNTER_HEADER, CounterFeed, JobRecord,
                           parse_counter_feed)
from iorisk.ops import COUNTER_NAMES, N_COUNTERS


def counter_csv(rows) -> io.StringIO:
    """rows: iterables of (ts, node, fs, *21 counters)."""
    lines = [",".join(COUNTER_HEADER)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    return io.StringIO("\n".join(lines) + "\n")


def feed_from_rows(rows) -> CounterFeed:
    return parse_counter_feed(counter_csv(rows))


def values_row(**counters) -> list[int]:
    """21-counter row with named overrides, zero elsewhere."""
    vals = [0] * N_COUNTERS
    for name, v in counters.items():
        vals[COUNTER_NAMES.index(name)] = v
    return vals


def simple_job(job_id="j1", node="n1", start=0, end=720, command="cmd",
               project="proj", cores=24, nodes=None) -> JobRecord:
    return JobRecord(job_id=job_id, command=command, project=project,
                     nodes=frozenset(nodes if nodes else [node]),
                     start_ts=start, end_ts=end, cores_per_node=cores)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _isolate_config_env(monkeypatch):
    # a config file in the outer environment must not leak into tests
    monkeypatch.delenv("IORISK_CONFIG", raising=False)
