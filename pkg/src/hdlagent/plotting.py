"""Figures for bench reports, written next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402

from .bench import BUCKETS  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.bbox": "tight",
    "savefig.dpi": 150,
    "svg.hashsalt": "hdlagent",
}
PASS_COLOR = "#3a7ca5"
FAIL_COLOR = "#d9d9d9"


def _save(fig, path):
    with matplotlib.rc_context(STYLE):
        fig.savefig(path, metadata={"Software": None} if str(path).endswith(".png") else None)
    return path


def _new_figure(width=4.0, height=2.8):
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(width, height))
        ax = fig.add_subplot(1, 1, 1)
    return fig, ax


def plot_pass_at_k(report, path):
    with matplotlib.rc_context(STYLE):
        fig, ax = _new_figure()
        ks = sorted(report.pass_at_k)
        total = max(report.tests_evaluated, 1)
        rates = [report.pass_at_k[k] / total for k in ks]
        ax.bar([f"k={k}" for k in ks], rates, color=PASS_COLOR)
        ax.set_ylim(0, 1)
        ax.set_ylabel("tests passed (fraction)")
        ax.set_title(f"top@k, {report.profile} / {report.stage}")
        for i, r in enumerate(rates):
            ax.text(i, r + 0.02, f"{r:.0%}", ha="center")
    return _save(fig, path)


def plot_loc_buckets(report, path):
    with matplotlib.rc_context(STYLE):
        fig, ax = _new_figure()
        labels = [b[0] for b in BUCKETS]
        passed = [report.buckets.get(b, {}).get("passed", 0) for b in labels]
        evaluated = [report.buckets.get(b, {}).get("evaluated", 0) for b in labels]
        failed = [e - p for e, p in zip(evaluated, passed)]
        ax.bar(labels, passed, color=PASS_COLOR, label="pass")
        ax.bar(labels, failed, bottom=passed, color=FAIL_COLOR, label="fail")
        ax.set_xlabel("golden Verilog LoC")
        ax.set_ylabel("tests")
        ax.legend(frameon=False)
    return _save(fig, path)


def plot_qor(report, path):
    with matplotlib.rc_context(STYLE):
        fig, ax = _new_figure()
        names = sorted(report.qor)
        ax.bar(names, [report.qor[n] for n in names], color=PASS_COLOR)
        ax.axhline(1.0, color="black", lw=0.8, ls="--")
        ax.set_ylabel("gates / best known")
        ax.tick_params(axis="x", rotation=45)
    return _save(fig, path)


def plot_ablation(reports, path):
    with matplotlib.rc_context(STYLE):
        fig, ax = _new_figure(4.5, 2.8)
        stages = list(reports)
        ks = sorted({k for r in reports.values() for k in r.pass_at_k})
        width = 0.8 / max(len(ks), 1)
        for j, k in enumerate(ks):
            ys = [reports[s].pass_at_k.get(k, 0) / max(reports[s].tests_evaluated, 1) for s in stages]
            ax.bar([i + j * width for i in range(len(stages))], ys, width, label=f"k={k}")
        ax.set_xticks([i + width * (len(ks) - 1) / 2 for i in range(len(stages))], stages)
        ax.set_ylim(0, 1)
        ax.set_ylabel("tests passed (fraction)")
        ax.legend(frameon=False)
    return _save(fig, path)


def write_figures(report, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [
        plot_pass_at_k(report, directory / "pass_at_k.png"),
        plot_loc_buckets(report, directory / "loc_buckets.png"),
    ]
    if report.qor:
        paths.append(plot_qor(report, directory / "qor.png"))
    return paths
