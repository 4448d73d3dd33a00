"""Human-readable reporting: text summary, CSV, and matplotlib figures."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

log = logging.getLogger(__name__)


def _fmt(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.2f}"
    return str(value)


def render_summary_text(metrics: dict[str, dict]) -> str:
    header = f"{'anti-pattern':<14}{'cases':>7}{'#R':>5}{'#N':>5}{'TP':>5}{'FP':>5}{'P(%)':>9}{'R(%)':>9}{'F1':>7}"
    lines = [header, "-" * len(header)]
    order = [k for k in sorted(metrics) if k != "total"] + (["total"] if "total" in metrics else [])
    for name in order:
        m = metrics[name]
        lines.append(
            f"{name:<14}{m['cases']:>7}{m['reproduced']:>5}{m['new_found']:>5}"
            f"{m['tp']:>5}{m['fp']:>5}{_fmt(m['precision']):>9}{_fmt(m['recall']):>9}"
            f"{_fmt(m['f1']):>7}"
        )
    return "\n".join(lines) + "\n"


def write_metrics_csv(metrics: dict[str, dict], path: Path) -> None:
    fields = ["anti_pattern", "cases", "reproduced", "new_found", "tp", "fp",
              "precision", "recall", "f1"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        order = [k for k in sorted(metrics) if k != "total"] + (
            ["total"] if "total" in metrics else [])
        for name in order:
            row = {"anti_pattern": name}
            row.update({k: metrics[name].get(k) for k in fields[1:]})
            writer.writerow(row)


def plot_metrics(metrics: dict[str, dict], path: Path) -> None:
    names = [k for k in sorted(metrics) if k != "total"]
    if not names:
        names = ["total"] if "total" in metrics else []
    if not names:
        return
    precision = [metrics[n]["precision"] or 0.0 for n in names]
    recall = [metrics[n]["recall"] for n in names]
    f1 = [100.0 * metrics[n]["f1"] for n in names]

    x = range(len(names))
    width = 0.27
    fig, ax = plt.subplots(figsize=(max(6.0, 1.2 * len(names)), 4.0))
    ax.bar([i - width for i in x], precision, width, label="precision (%)", color="#3b6fb6")
    ax.bar(list(x), recall, width, label="recall (%)", color="#58a066")
    ax.bar([i + width for i in x], f1, width, label="F1 (x100)", color="#c89b3c")
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylim(0, 105)
    ax.set_ylabel("percent")
    ax.set_title("detection quality per anti-pattern")
    ax.legend(loc="lower right", fontsize=8)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_costs(ledger_doc: list[dict], path: Path) -> None:
    totals: dict[str, dict[str, float]] = {}
    for entry in ledger_doc:
        key = entry.get("anti_pattern") or "(none)"
        g = totals.setdefault(key, {"dollars": 0.0, "seconds": 0.0})
        g["dollars"] += entry.get("dollars", 0.0)
        g["seconds"] += entry.get("seconds", 0.0)
    if not totals:
        return
    names = sorted(totals)
    dollars = [totals[n]["dollars"] for n in names]
    seconds = [totals[n]["seconds"] for n in names]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(max(8.0, 1.6 * len(names)), 4.0))
    ax1.bar(names, dollars, color="#3b6fb6")
    ax1.set_title("cost ($) per anti-pattern")
    ax1.tick_params(axis="x", rotation=30)
    ax2.bar(names, seconds, color="#58a066")
    ax2.set_title("time (s) per anti-pattern")
    ax2.tick_params(axis="x", rotation=30)
    for ax in (ax1, ax2):
        ax.spines["right"].set_visible(False)
        ax.spines["top"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_report(metrics_path: str | Path, out_dir: str | Path,
                  ledger_path: str | Path | None = None) -> list[Path]:
    """Write summary.txt, metrics.csv and the PNG figures; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics = json.loads(Path(metrics_path).read_text(encoding="utf-8"))
    written: list[Path] = []

    summary = out / "summary.txt"
    summary.write_text(render_summary_text(metrics), encoding="utf-8")
    written.append(summary)

    csv_path = out / "metrics.csv"
    write_metrics_csv(metrics, csv_path)
    written.append(csv_path)

    fig_path = out / "metrics_overview.png"
    plot_metrics(metrics, fig_path)
    if fig_path.exists():
        written.append(fig_path)

    if ledger_path is not None and Path(ledger_path).is_file():
        ledger_doc = json.loads(Path(ledger_path).read_text(encoding="utf-8"))
        cost_path = out / "cost_breakdown.png"
        plot_costs(ledger_doc, cost_path)
        if cost_path.exists():
            written.append(cost_path)
    return written
