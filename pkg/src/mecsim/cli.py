"""Command-line experiment runner.

    mecsim run --config exp.toml [--seed N] [--out DIR] [--jobs N]
    mecsim validate --config exp.toml

The output directory defaults to ``$MECSIM_OUT`` and then ``./results``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, _accel
from .config import ConfigError, ExperimentConfig, validate_config
from .interference import ChannelModel, CellLayout, dbm_to_watts, hex_layout, monte_carlo
from .orchestration import TaskBatch, compare_strategies, default_inventory
from .sim import backhaul_load, run
from .strategies import StrategyKind
from .workload import VideoCatalog, generate_trace, shuffle_popularity

log = logging.getLogger("mecsim")

COLUMNS = {
    "cache": ["strategy", "cache_fraction", "processing_capacity_mbps", "arrival_rate", "backhaul_load",
              "backhaul_bits", "inter_bs_bits", "local_hit_rate", "processing_utilization", "seed"],
    "orchestrate": ["strategy", "makespan_s", "reassignments", "seed", "sweep_value"],
    "interference": ["snapshot", "layer2_fraction", "mean_pre_sinr_db", "mean_post_sinr_db",
                     "bpu_load_mbps", "savings", "sweep_value"],
}


def _cache_rows(block: dict, seed: int, sweep_value) -> list[list]:
    catalog = VideoCatalog(block["n_videos"], block["original_bitrate_mbps"], block["duration_s"],
                           tuple(block["variant_ratios"]))
    vdist = None if block["variant_dist"] == "uniform" else block["variant_dist"]
    profile = shuffle_popularity(block["n_videos"], block["n_bs"], seed, block["alpha"])
    trace = generate_trace(profile, catalog, block["arrival_rate"], block["horizon_s"], vdist, seed)
    chosen = {StrategyKind.parse(s) for s in block["strategies"]}
    rows = []
    for strategy in StrategyKind:  # canonical order keeps rows stable
        if strategy not in chosen:
            continue
        m = run(catalog, profile, trace, strategy, block["cache_fraction"], block["processing_capacity_mbps"],
                variant_dist=vdist, warmup=block["warmup_s"], costing=block["load_costing"],
                reactive=block["reactive"])
        load = backhaul_load(m) if m.demand_bits > 0 else float("nan")
        rows.append([strategy.value, block["cache_fraction"], block["processing_capacity_mbps"],
                     block["arrival_rate"], load, m.backhaul_bits, m.inter_bs_bits, m.local_hit_rate(),
                     m.processing_utilization(), seed])
    return rows


def mdc_seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def _orchestrate_rows(block: dict, seed: int, sweep_value) -> list[list]:
    batch = TaskBatch(block["n_tasks"], block["input_bits_per_task"], block["work_per_task"])
    inv = block["inventory"]
    relay = None if inv["relay_overhead_s"] == "auto" else inv["relay_overhead_s"]
    inventory = default_inventory(
        mu=block["mu"], sigma=block["sigma"], link_mbps=block["link_mbps"], n_peers=inv["n_peers"],
        n_servers=inv["n_servers"], local_speed=inv["local_speed"], peer_speed=inv["peer_speed"],
        server_speed=inv["server_speed"], relay_overhead=relay, batch=batch, target_gain=block["target_gain"])
    result = compare_strategies(batch, inventory, mdc_seeds(seed, block["seeds"]), block["k"], block["mdc_host"])
    return [[r.strategy, r.makespan, r.reassignments, seed, _sv(sweep_value)] for r in result.reports]


def _interference_rows(block: dict, seed: int, sweep_value) -> list[list]:
    if block["bs_positions"] == "hex":
        layout = hex_layout(block["hex_rings"], block["cell_radius"], block["radius_fraction"])
    else:
        layout = CellLayout(np.array(block["bs_positions"]), block["cell_radius"],
                            block["radius_fraction"] * block["cell_radius"])
    channel = ChannelModel(block["pathloss_exponent"], dbm_to_watts(block["noise_dbm"]),
                           block["cqi_threshold_db"], block["residual"])
    stats = monte_carlo(layout, channel, block["mode"], block["n_snapshots"], seed,
                        dbm_to_watts(block["tx_power_dbm"]), block["raw_rate_mbps"])
    return [[i, stats.layer2_fraction[i], stats.mean_pre_sinr_db[i], stats.mean_post_sinr_db[i],
             stats.bpu_load[i], stats.savings[i], _sv(sweep_value)] for i in range(block["n_snapshots"])]


def _sv(value):
    return "" if value is None else value


_RUNNERS = {"cache": _cache_rows, "orchestrate": _orchestrate_rows, "interference": _interference_rows}


def run_point(case: str, block: dict, seed: int, sweep_value) -> list[list]:
    return _RUNNERS[case](block, seed, sweep_value)


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _sort_key(value):
    return (0, value, "") if isinstance(value, (int, float)) else (1, 0, json.dumps(value))


def run_experiment(config: ExperimentConfig, out_dir: Path, jobs: int = 1) -> tuple[list[Path], list[str]]:
    """Run every sweep point, write ``<case>.csv`` and ``manifest.json``; return paths and failures."""
    started = time.perf_counter()
    out_dir.mkdir(parents=True, exist_ok=True)
    if config.sweep:
        param, values = config.sweep
        points = sorted(values, key=_sort_key)
        blocks = [{**config.block, param: v} for v in points]
    else:
        points, blocks = [None], [config.block]

    args = [(config.case, b, config.seed, p) for b, p in zip(blocks, points)]
    results: list[Any] = []
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_point, *a) for a in args]
            for f in futures:
                try:
                    results.append(f.result())
                except Exception as exc:  # noqa: BLE001 - reported per point
                    results.append(exc)
    else:
        for a in args:
            try:
                results.append(run_point(*a))
            except Exception as exc:  # noqa: BLE001
                results.append(exc)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS[config.case])
    failures = []
    for point, res in zip(points, results):
        if isinstance(res, Exception):
            failures.append(f"{config.sweep[0] if config.sweep else 'run'}={point}: {type(res).__name__}: {res}")
            continue
        for row in res:
            writer.writerow([_cell(x) for x in row])

    csv_path = out_dir / f"{config.case}.csv"
    _atomic_write(csv_path, buf.getvalue())
    manifest_path = out_dir / "manifest.json"
    manifest = {
        "version": __version__,
        "backend": _accel.backend(),
        "seed": config.seed,
        "config": config.resolved(),
        "outputs": [str(csv_path)],
        "failed_points": failures,
        "wall_clock_s": time.perf_counter() - started,
    }
    _atomic_write(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return [csv_path, manifest_path], failures


def _load(path: str, seed: int | None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    return validate_config(text, seed)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="mecsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out")
    p_run.add_argument("--jobs", type=int, default=1)
    p_val = sub.add_parser("validate", help="check a config and print it fully resolved")
    p_val.add_argument("--config", required=True)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    try:
        config = _load(args.config, getattr(args, "seed", None))
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(json.dumps(config.resolved(), indent=2, sort_keys=True))
        return 0

    out = Path(args.out or os.environ.get("MECSIM_OUT") or "results")
    paths, failures = run_experiment(config, out, args.jobs)
    for p in paths:
        log.info("wrote %s", p)
    if failures:
        for f in failures:
            print(f"failed point: {f}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
