"""Render figures from emitted CSV/JSON artifacts.

The pipeline commands write delimited data only; this module (and the
``report`` subcommand) turns those files into PNGs after the fact.  Nothing
here feeds back into any computation.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def render_recovery_run(run_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Figures for a run directory produced by run_experiment.

    Emits coverage-vs-iteration curves (one line per seed) and a histogram
    of matched column errors.  Returns the paths written.
    """
    run = Path(run_dir)
    out = Path(out_dir) if out_dir else run / "figures"
    out.mkdir(parents=True, exist_ok=True)
    written = []

    seed_dirs = sorted(run.glob("seed_*"))
    if not seed_dirs and (run / "iterations.csv").exists():
        seed_dirs = [run]  # a single seed directory was passed directly
    curves = []
    for sd in seed_dirs:
        path = sd / "iterations.csv"
        if not path.exists():
            continue
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        curves.append((sd.name, [int(r["iteration"]) for r in rows],
                       [int(r["wstar_size"]) for r in rows]))
    if curves:
        fig, ax = plt.subplots(figsize=(6, 4))
        for name, xs, ys in curves:
            ax.plot(xs, ys, marker="o", label=name)
        ax.set_xlabel("iteration")
        ax.set_ylabel("recovered columns")
        ax.set_title("recovery progress")
        if len(curves) <= 10:
            ax.legend(fontsize=7)
        fig.tight_layout()
        p = out / "progress.png"
        fig.savefig(p, dpi=120)
        plt.close(fig)
        written.append(p)

    errors = []
    for sd in seed_dirs:
        path = sd / "result.json"
        if not path.exists():
            continue
        with open(path) as fh:
            result = json.load(fh)
        match = result.get("matching")
        if match:
            errors.extend(c["error"] for c in match["columns"] if c["error"] is not None)
    if errors:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist(errors, bins=40)
        ax.set_xlabel("matched column error")
        ax.set_ylabel("count")
        ax.set_title("match errors across seeds")
        fig.tight_layout()
        p = out / "errors.png"
        fig.savefig(p, dpi=120)
        plt.close(fig)
        written.append(p)
    return written


def render_conc_report(csv_path: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Bar chart of empirical exceed rates vs budgets from a conc-bench CSV."""
    path = Path(csv_path)
    out = Path(out_dir) if out_dir else path.parent / "figures"
    out.mkdir(parents=True, exist_ok=True)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return []
    labels = [f"{r['experiment']}#{i}" for i, r in enumerate(rows)]
    empirical = [float(r["empirical"]) for r in rows]
    bound = [float(r["bound"]) for r in rows]
    x = range(len(rows))
    fig, ax = plt.subplots(figsize=(max(6, len(rows) * 0.5), 4))
    ax.bar([i - 0.2 for i in x], empirical, width=0.4, label="empirical")
    ax.bar([i + 0.2 for i in x], bound, width=0.4, label="bound")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_yscale("symlog", linthresh=1e-6)
    ax.set_ylabel("probability")
    ax.set_title("empirical exceed rates vs bounds")
    ax.legend()
    fig.tight_layout()
    p = out / "conc.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    return [p]
