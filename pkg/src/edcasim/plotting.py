"""EDCA vs QCAAAE comparison figures rendered from sweep summaries."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

POLICY_STYLE = {
    "edca": {"label": "EDCA", "color": "#4c72b0"},
    "qcaaae": {"label": "QCAAAE", "color": "#dd8452"},
}

# (file stem, metric, scope, axis label, scale factor)
FIGURES = [
    ("global_throughput", "thr", "global", "Normalized throughput (%)", 100.0),
    ("global_delay", "delay", "global", "Mean delay (s)", 1.0),
    ("global_retx", "retx", "global", "Retransmissions per frame", 1.0),
    ("be_throughput", "thr", "BE", "BE normalized throughput (%)", 100.0),
    ("vo_throughput", "thr", "VO", "VO normalized throughput (%)", 100.0),
    ("vo_delay", "delay", "VO", "VO mean delay (ms)", 1e3),
    ("vi_throughput", "thr", "VI", "VI normalized throughput (%)", 100.0),
    ("vi_delay", "delay", "VI", "VI mean delay (ms)", 1e3),
]

RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 7,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def comparison_axes(rows: Sequence[dict], metric: str, scope: str, ylabel: str, factor: float = 1.0, ax=None):
    """Grouped bars, one group per scenario, EDCA next to QCAAAE."""
    rows = [r for r in rows if r["scope"] == scope]
    if ax is None:
        _, ax = plt.subplots(figsize=(max(4.0, 0.32 * len(rows) + 1.5), 3.2))
    width = 0.4
    xs = range(len(rows))
    for k, policy in enumerate(("edca", "qcaaae")):
        vals = [r[f"{metric}_{policy}"] * factor for r in rows]
        vals = [0.0 if math.isnan(v) else v for v in vals]
        ax.bar([x + (k - 0.5) * width for x in xs], vals, width, **POLICY_STYLE[policy])
    ax.set_xticks(list(xs))
    ax.set_xticklabels([r["scenario_id"] for r in rows], rotation=60, ha="right")
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False, ncol=2, loc="lower left", bbox_to_anchor=(0.0, 1.0))
    return ax


def render_report(rows: Sequence[dict], out_dir: str | Path) -> list[Path]:
    """Write one PNG per figure whose scope occurs in ``rows``; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scopes = {r["scope"] for r in rows}
    written = []
    with plt.rc_context(RC):
        for stem, metric, scope, ylabel, factor in FIGURES:
            if scope not in scopes:
                continue
            ax = comparison_axes(rows, metric, scope, ylabel, factor)
            fig = ax.figure
            fig.tight_layout()
            path = out / f"{stem}.png"
            fig.savefig(path, metadata={"Software": None})
            plt.close(fig)
            written.append(path)
    return written
