"""Deterministic JSON, CSV and Markdown renderings of bench reports."""

from __future__ import annotations

import csv
import io
import json

from .bench import BUCKETS, CSV_COLUMNS, BenchReport

FORMATS = ("json", "csv", "markdown")
EXTENSIONS = {"json": "json", "csv": "csv", "markdown": "md"}


def _fmt(x):
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.3f}"
    return str(x)


def render_json(report: BenchReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def render_csv(report: BenchReport) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in report.per_test:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in CSV_COLUMNS})
    return buf.getvalue()


def render_markdown(report: BenchReport) -> str:
    label = "compile + IO match" if report.pass_criterion == "compile+io" else "logic equivalence"
    lines = [
        f"# Bench report: {report.profile}, stage {report.stage}",
        "",
        f"Pass criterion: {label}. Tests: {report.tests_total} "
        f"({report.tests_evaluated} evaluated, {len(report.skipped)} skipped).",
        "",
        "| metric | value |",
        "|---|---|",
    ]
    for k in sorted(report.pass_at_k):
        lines.append(f"| pass@{k} | {report.pass_at_k[k]}/{report.tests_evaluated} |")
    lines += [
        f"| tokens | {report.tokens_total} |",
        f"| failure rate | {_fmt(report.failure_rate)} |",
        f"| failure rate x tokens | {_fmt(report.efficiency)} |",
    ]
    if report.interrupted:
        lines.append("| interrupted | yes |")
    lines += ["", "| LoC bucket | tests | passed | rate |", "|---|---|---|---|"]
    for name, _, _ in BUCKETS:
        b = report.buckets.get(name, {"tests": 0, "passed": 0, "rate": None})
        lines.append(f"| {name} | {b['tests']} | {b['passed']} | {_fmt(b['rate'])} |")
    if report.qor:
        lines += ["", "| test | gate ratio |", "|---|---|"]
        for name in sorted(report.qor):
            lines.append(f"| {name} | {_fmt(report.qor[name])} |")
    lines += ["", "| " + " | ".join(CSV_COLUMNS) + " |", "|" + "---|" * len(CSV_COLUMNS)]
    for row in report.per_test:
        lines.append("| " + " | ".join(_fmt(row.get(c)) for c in CSV_COLUMNS) + " |")
    return "\n".join(lines) + "\n"


def render_report(report: BenchReport, format: str = "json") -> str:
    if format == "json":
        return render_json(report)
    if format == "csv":
        return render_csv(report)
    if format in ("markdown", "md"):
        return render_markdown(report)
    raise ValueError(f"unknown report format {format!r}")


def render_ablation(reports: dict[str, BenchReport]) -> str:
    """Markdown table with one row per ablation stage."""
    ks = sorted({k for r in reports.values() for k in r.pass_at_k})
    head = ["stage"] + [f"pass@{k}" for k in ks] + ["tokens", "failure rate x tokens"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for stage, r in reports.items():
        cells = [stage] + [f"{r.pass_at_k.get(k, 0)}/{r.tests_evaluated}" for k in ks]
        cells += [str(r.tokens_total), _fmt(r.efficiency)]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
