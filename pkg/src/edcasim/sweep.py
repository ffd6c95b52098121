"""Run (scenario x policy x seed) cells and write the comparison report."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .kernel import run
from .errors import UndefinedError
from .metrics import (
    MetricsLedger,
    export_csv,
    mean_access_delay,
    normalized_throughput,
    retransmission_attempts,
)
from .policy import PolicyKind
from .scenario import ScenarioSpec

log = logging.getLogger(__name__)

METRICS = {
    "thr": normalized_throughput,
    "delay": mean_access_delay,
    "retx": retransmission_attempts,
}

SUMMARY_COLUMNS = ["scenario_id", "scope"] + [
    f"{m}_{suffix}" for m in METRICS for suffix in ("edca", "qcaaae", "delta")
]


@dataclass
class SweepResult:
    ledgers: list[MetricsLedger] = field(default_factory=list)
    failures: list[tuple[str, str, int, str]] = field(default_factory=list)
    summary: list[dict] = field(default_factory=list)
    wall_seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.failures


def _run_cell(cell: tuple[ScenarioSpec, str, int]) -> MetricsLedger:
    scenario, policy, seed = cell
    return run(scenario, policy, seed)


def _metric(fn, ledger: MetricsLedger, scope: str) -> float:
    try:
        return fn(ledger, scope)
    except UndefinedError:
        return math.nan


def _mean(values: Iterable[float]) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return statistics.fmean(vals) if vals else math.nan


def summarize(ledgers: Sequence[MetricsLedger]) -> list[dict]:
    """Per (scenario, scope) seed-averaged metrics and QCAAAE - EDCA deltas."""
    by_cell: dict[tuple[str, str], dict[str, list[MetricsLedger]]] = {}
    for ledger in ledgers:
        for scope in ledger.scopes:
            by_cell.setdefault((ledger.scenario_id, scope), {}).setdefault(ledger.policy, []).append(ledger)
    rows = []
    for (sid, scope) in sorted(by_cell):
        per_policy = by_cell[(sid, scope)]
        row = {"scenario_id": sid, "scope": scope}
        for name, fn in METRICS.items():
            means = {p.value: _mean(_metric(fn, l, scope) for l in per_policy.get(p.value, [])) for p in PolicyKind}
            row[f"{name}_edca"] = means["edca"]
            row[f"{name}_qcaaae"] = means["qcaaae"]
            row[f"{name}_delta"] = means["qcaaae"] - means["edca"]
        rows.append(row)
    return rows


def write_summary(rows: Sequence[dict], path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow(
                [row["scenario_id"], row["scope"]]
                + [f"{row[c]:.6g}" for c in SUMMARY_COLUMNS[2:]]
            )


def run_cells(cells: Sequence[tuple[ScenarioSpec, str, int]], jobs: int = 1) -> SweepResult:
    """Execute every cell; failures are collected rather than raised."""
    result = SweepResult()
    t0 = time.perf_counter()
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_cell, c) for c in cells]
            outcomes = []
            for cell, fut in zip(cells, futures):
                try:
                    outcomes.append((cell, fut.result(), None))
                except Exception as exc:  # noqa: BLE001 - reported per cell
                    outcomes.append((cell, None, exc))
    else:
        outcomes = []
        for cell in cells:
            try:
                outcomes.append((cell, _run_cell(cell), None))
            except Exception as exc:  # noqa: BLE001
                outcomes.append((cell, None, exc))
    for (scenario, policy, seed), ledger, exc in outcomes:
        if exc is None:
            result.ledgers.append(ledger)
        else:
            log.error("cell %s/%s/%s failed: %s", scenario.scenario_id, policy, seed, exc)
            result.failures.append((scenario.scenario_id, policy, seed, repr(exc)))
    result.wall_seconds = time.perf_counter() - t0
    return result


def sweep(
    grid: Sequence[ScenarioSpec],
    policies: Sequence[PolicyKind | str],
    seeds: Sequence[int],
    out_dir: str | os.PathLike | None = None,
    jobs: int = 1,
    figures: bool = True,
) -> SweepResult:
    """Run the full cross product and, if ``out_dir`` is given, write the report there.

    The report consists of ``results.csv``, ``summary.csv``, ``metadata.json``
    and (with ``figures``) one PNG per plotted metric under ``figures/``.
    """
    if not grid or not policies or not seeds:
        raise ValueError("sweep needs a non-empty grid, policy list and seed list")
    policies = [PolicyKind(p).value for p in policies]
    cells = [(sc, p, s) for sc in grid for p in policies for s in seeds]
    result = run_cells(cells, jobs=jobs)
    result.summary = summarize(result.ledgers)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        export_csv(result.ledgers, out / "results.csv")
        write_summary(result.summary, out / "summary.csv")
        meta = {
            "version": __version__,
            "policies": policies,
            "seeds": list(seeds),
            "scenarios": [
                {
                    "id": sc.scenario_id,
                    "duration_s": sc.duration,
                    "warmup_s": sc.warmup,
                    "stations": {ac.name: n for ac, n in sc.station_counts().items()},
                    "groups": [
                        {
                            "ac": g.ac.name,
                            "count": g.count,
                            "mode": g.source.mode.value,
                            "payload_bytes": g.source.payload_bytes,
                            "queue_capacity": g.source.queue_capacity,
                        }
                        for g in sc.station_groups
                    ],
                    **({"scale": sc.metadata["scale"]} if "scale" in sc.metadata else {}),
                }
                for sc in grid
            ],
            "failures": [list(f) for f in result.failures],
        }
        (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        if figures and result.summary:
            from .plotting import render_report

            render_report(result.summary, out / "figures")
    return result
