"""Command-line entry point wiring the pipeline.

Subcommands: simulate (synthetic feeds), ingest (feeds -> binned store),
analyze (attribution + metrics), report (all report artifacts), all
(ingest + analyze + report in one go, same bytes as running the stages).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import _kernels, simgen, store
from .analytics import (build_scatter, detect_slowdown, group_applications,
                        summarize_jobs)
from .attribute import attribute_usage, fs_bin_totals
from .config import Config, resolve_config
from .ingest import deltify_and_bin, read_counter_file, read_job_file
from .metrics import compute_baselines, compute_fs_metrics, \
    compute_job_metrics
from .report import (MEASURES, binned_series_instants, build_breakdown,
                     build_heatmap, correlate_series, emit_timeseries,
                     render_heatmap_svg, write_breakdown_csv,
                     write_correlation_csv, write_heatmap_csv,
                     write_job_summary_csv, write_risk_timeseries_csv,
                     write_scatter_csv, write_slowdown_csv,
                     write_unattributed_csv)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE",
                   help="config file (key=value); $IORISK_CONFIG otherwise")
    p.add_argument("--bin-width", type=int, dest="bin_width_s",
                   metavar="SECONDS", help="time bin width (default 360)")
    p.add_argument("--alpha", type=float, help="risk scale (default 2)")
    p.add_argument("--beta", type=float,
                   help="metadata-total risk scale (default 0.25)")
    p.add_argument("--md-threshold", type=float,
                   dest="md_small_avg_threshold",
                   help="scaled-average floor that triggers the beta path "
                        "(default 1.0)")
    p.add_argument("--slowdown-factor", type=float,
                   help="runtime/mean ratio flagged as slowdown "
                        "(default 1.5)")
    p.add_argument("--min-group", type=int,
                   help="minimum runs per command group (default 3)")
    p.add_argument("--scatter-min-risk", type=float,
                   help="scatter inclusion threshold (default 25)")
    p.add_argument("--cores-per-node", type=int,
                   help="cores per node when jobs.csv omits it (default 24)")
    p.add_argument("--baseline-days", type=float,
                   help="trailing baseline window in days (default: all)")
    p.add_argument("--max-gap-bins", type=int,
                   help="drop deltas spanning longer snapshot gaps "
                        "(default 3)")
    p.add_argument("--top-k", type=int,
                   help="jobs broken out in time-series reports (default 5)")
    p.add_argument("--pre-differenced", action="store_const", const=True,
                   default=None,
                   help="counter feed already holds per-interval deltas")
    p.add_argument("--day-offset", type=int, dest="day_offset_s",
                   help="daily report boundary offset from UTC midnight")
    p.add_argument("--quality-agg", choices=("sum", "mean"),
                   help="fs-level quality aggregation (default sum)")


_CONFIG_KEYS = ("bin_width_s", "alpha", "beta", "md_small_avg_threshold",
                "slowdown_factor", "min_group", "scatter_min_risk",
                "cores_per_node", "baseline_days", "max_gap_bins", "top_k",
                "pre_differenced", "day_offset_s", "quality_agg")


def _config_from_args(args) -> Config:
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    return resolve_config(getattr(args, "config", None), overrides)


def cmd_simulate(args) -> int:
    if args.scenario:
        spec = simgen.spec_from_json(args.scenario)
        if args.seed is not None:
            spec = simgen.ScenarioSpec(**{**spec.__dict__,
                                          "seed": args.seed})
    else:
        spec = simgen.preset_scenario(args.preset, seed=args.seed)
    out = Path(args.out)
    ledger = simgen.generate(spec, out)
    print(f"simulated {len(ledger.job_totals)} jobs over "
          f"{spec.duration_s} s on {spec.node_count} nodes "
          f"-> {out}/counters.csv, jobs.csv, ledger.json"
          + (", probe.csv" if spec.emit_probe else ""))
    return 0


def cmd_ingest(args, cfg: Config) -> int:
    out = Path(args.out)
    store.store_dir(out).mkdir(parents=True, exist_ok=True)
    feed = read_counter_file(args.counters)
    jobs = read_job_file(args.jobs, default_cores=cfg.cores_per_node)
    usage = deltify_and_bin(feed, cfg.bin_width_s,
                            max_gap_bins=cfg.max_gap_bins,
                            pre_differenced=cfg.pre_differenced)
    store.write_meta(out, cfg.bin_width_s)
    store.write_node_usage(out, usage)
    store.write_jobs(out, jobs)
    print(f"ingested {len(feed)} samples -> {len(usage)} node-bin rows, "
          f"{len(jobs)} jobs ({_kernels.backend_name()} backend)")
    return 0


def _load_analysis_inputs(out: Path, cfg: Config):
    meta = store.read_meta(out)
    bin_width = meta["bin_width_s"]
    usage = store.read_node_usage(out, bin_width)
    jobs = store.read_jobs(out)
    return bin_width, usage, jobs


def cmd_analyze(args, cfg: Config) -> int:
    out = Path(args.out)
    bin_width, usage, jobs = _load_analysis_inputs(out, cfg)
    attribution = attribute_usage(usage, jobs)
    totals = fs_bin_totals(usage)
    baselines = compute_baselines(totals, baseline_days=cfg.baseline_days)
    jm = compute_job_metrics(attribution.job_usage, baselines,
                             cfg.risk_params())
    fm = compute_fs_metrics(jm, cfg.quality_agg)
    store.write_job_usage(out, attribution.job_usage)
    write_unattributed_csv(out / "unattributed.csv",
                           attribution.unattributed)
    write_risk_timeseries_csv(out / "risk_timeseries.csv", fm, jm)
    print(f"analyzed {len(attribution.job_usage)} job-bin rows on "
          f"{len(baselines)} filesystems ({_kernels.backend_name()} "
          f"backend)")
    return 0


def _read_probe(path):
    ts, values = [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or len(header) != 2:
            raise ValueError(f"probe file {path}: expected 2-column CSV "
                             f"with header")
        for row in reader:
            ts.append(int(row[0]))
            values.append(float(row[1]))
    return np.asarray(ts, dtype=np.int64), np.asarray(values)


def cmd_report(args, cfg: Config) -> int:
    out = Path(args.out)
    bin_width, usage, jobs = _load_analysis_inputs(out, cfg)
    job_usage = store.read_job_usage(
        out, bin_width, [j.job_id for j in jobs], usage.filesystems)
    totals = fs_bin_totals(usage)
    baselines = compute_baselines(totals, baseline_days=cfg.baseline_days)
    jm = compute_job_metrics(job_usage, baselines, cfg.risk_params())
    fm = compute_fs_metrics(jm, cfg.quality_agg)

    aliases = None
    if args.alias:
        aliases = json.loads(Path(args.alias).read_text())

    summaries = summarize_jobs(jobs, job_usage)
    groups = group_applications(jobs)
    findings = detect_slowdown(groups, cfg.slowdown_factor, cfg.min_group)
    scatter = build_scatter(jobs, jm, cfg.scatter_min_risk)

    write_job_summary_csv(out / "job_summary.csv", summaries)
    write_scatter_csv(out / "scatter.csv", scatter, aliases)
    write_slowdown_csv(out / "slowdown.csv", findings, aliases)
    if summaries:
        write_breakdown_csv(out / "breakdown.csv",
                            build_breakdown(summaries))
        for measure in MEASURES:
            hm = build_heatmap(summaries, measure)
            write_heatmap_csv(out / f"heatmap_{measure}.csv", hm)
            if args.svg:
                render_heatmap_svg(out / f"heatmap_{measure}.svg", hm)
    emit_timeseries(fm, jm, out, top_k=cfg.top_k, svg=args.svg,
                    day_offset=cfg.day_offset_s)

    if args.probe:
        probe = _read_probe(args.probe)
        rows = []
        for fs_i, fs_id in enumerate(fm.filesystems):
            sel = fm.fs_idx == fs_i
            if not sel.any():
                continue
            risk = (binned_series_instants(fm.bin_start[sel], bin_width),
                    fm.risk_oss[sel] + fm.risk_mds[sel])
            try:
                r = correlate_series(risk, probe, bin_width, lag=args.lag)
            except ValueError as exc:
                print(f"correlation skipped for {fs_id}: {exc}",
                      file=sys.stderr)
                continue
            n = len(np.intersect1d(
                fm.bin_start[sel],
                bin_width * ((probe[0] - 1) // bin_width)
                - args.lag * bin_width))
            rows.append((f"risk:{fs_id}", "probe", args.lag, r, n))
        write_correlation_csv(out / "correlation.csv", rows)

    print(f"reported {len(summaries)} job summaries, {len(scatter)} "
          f"scatter points, {len(findings)} slowdown findings -> {out}")
    return 0


def cmd_all(args, cfg: Config) -> int:
    rc = cmd_ingest(args, cfg)
    if rc:
        return rc
    rc = cmd_analyze(args, cfg)
    if rc:
        return rc
    return cmd_report(args, cfg)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iorisk",
        description="Parallel-filesystem counter telemetry analysis: "
                    "per-job I/O attribution, risk/quality metrics and "
                    "workload reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate",
                           help="generate synthetic feeds with a ledger")
    group = p_sim.add_mutually_exclusive_group()
    group.add_argument("--preset", default="demo",
                       help="built-in scenario (demo, metric, slowdown, "
                            "contention, perf, resets)")
    group.add_argument("--scenario", metavar="FILE",
                       help="scenario JSON file")
    p_sim.add_argument("--seed", type=int, help="override scenario seed")
    p_sim.add_argument("--out", required=True, metavar="DIR")
    p_sim.set_defaults(func=lambda a: cmd_simulate(a))

    for name, fn, needs_feeds in (
            ("ingest", cmd_ingest, True),
            ("analyze", cmd_analyze, False),
            ("report", cmd_report, False),
            ("all", cmd_all, True)):
        p = sub.add_parser(name, help=f"{name} stage")
        if needs_feeds:
            p.add_argument("--counters", required=True, metavar="FILE")
            p.add_argument("--jobs", required=True, metavar="FILE")
        if name in ("report", "all"):
            p.add_argument("--probe", metavar="FILE",
                           help="probe response-time series "
                                "(ts,latency CSV) to correlate with risk")
            p.add_argument("--lag", type=int, default=0,
                           help="lag in bins for the probe correlation")
            p.add_argument("--svg", action="store_true",
                           help="also render SVG charts")
            p.add_argument("--alias", metavar="FILE",
                           help="JSON {command: label} relabeling for "
                                "reports")
        p.add_argument("--out", required=True, metavar="DIR")
        _add_config_flags(p)
        p.set_defaults(func=(lambda f: lambda a: f(a, _config_from_args(a)))
                       (fn))
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"iorisk: missing input: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"iorisk: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
