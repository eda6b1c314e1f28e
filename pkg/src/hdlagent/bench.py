"""Benchmark harness: suites, scoring, pass@k, LoC buckets, tokens and QoR."""

from __future__ import annotations

import json
import logging
import re
import shlex
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from filelock import FileLock

from .agent import DEFAULT_MAX_ITERATIONS, passed_within, persist_record, run_agent
from .context import AblationStage
from .errors import (
    AmbiguousTop,
    InvalidGateCount,
    IoMismatch,
    MalformedTest,
    NameCollision,
    ParseError,
    UnknownPort,
)
from .verilog_io import mask_source, normalize, parse_interface

log = logging.getLogger(__name__)

BUCKETS = (("<25", 1, 25), ("25-50", 25, 50), ("50-75", 50, 75), (">75", 75, None))
CSV_COLUMNS = ("test", "attempt", "status", "iterations", "tokens", "bucket", "qor")
CATEGORY_ALIASES = {"comb": "combinational", "combinational": "combinational",
                    "pipe": "pipelined", "pipelined": "pipelined"}


def count_loc(verilog: str) -> int:
    """Lines with code left after comments are removed."""
    return sum(1 for line in mask_source(verilog).splitlines() if line.strip())


@dataclass(frozen=True)
class BenchTest:
    name: str
    question: str
    golden_verilog: str
    category: str = "combinational"
    golden_loc: int = 0


def load_suite(path) -> list[BenchTest]:
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"suite directory {root} does not exist")
    tests = []
    for d in sorted(p for p in root.iterdir() if p.is_dir() and not p.name.startswith(".")):
        q, g, meta = d / "question.txt", d / "golden.v", d / "meta.json"
        for required in (q, g):
            if not required.is_file():
                raise MalformedTest(f"{d}: missing {required.name}")
        category = "combinational"
        if meta.is_file():
            try:
                raw = json.loads(meta.read_text(encoding="utf-8")).get("category", "comb")
            except (json.JSONDecodeError, AttributeError) as exc:
                raise MalformedTest(f"{d}: unreadable meta.json ({exc})") from exc
            if raw not in CATEGORY_ALIASES:
                raise MalformedTest(f"{d}: unknown category {raw!r}")
            category = CATEGORY_ALIASES[raw]
        golden = g.read_text(encoding="utf-8")
        try:
            parse_interface(golden)
        except (ParseError, AmbiguousTop) as exc:
            raise MalformedTest(f"{d}: golden.v does not parse ({exc})") from exc
        question = q.read_text(encoding="utf-8").strip()
        if not question:
            raise MalformedTest(f"{d}: question.txt is empty")
        tests.append(BenchTest(d.name, question, golden, category, count_loc(golden)))
    return tests


def bucket_of(loc: int) -> str:
    for label, lo, hi in BUCKETS:
        if loc >= lo and (hi is None or loc < hi):
            return label
    return BUCKETS[0][0]


def bucket_by_loc(tests) -> dict[str, list]:
    out = {label: [] for label, _, _ in BUCKETS}
    for t in tests:
        out[bucket_of(t.golden_loc)].append(t)
    return out


def qor_ratio(candidate_gates: int, best_gates: int) -> float:
    """Gate count relative to the best known implementation. A candidate that
    beats the best is the new best, so the ratio never drops below 1."""
    if candidate_gates < 1 or best_gates < 1:
        raise InvalidGateCount(f"gate counts must be >= 1, got {candidate_gates}, {best_gates}")
    return candidate_gates / min(candidate_gates, best_gates)


class QorStore:
    """Best-known gate counts per test, kept as JSON and updated under a file lock."""

    def __init__(self, path):
        self.path = Path(path)
        self.lock = FileLock(str(self.path) + ".lock")

    def load(self) -> dict[str, int]:
        if not self.path.exists():
            return {}
        return json.loads(self.path.read_text(encoding="utf-8"))

    def best(self, test: str) -> int | None:
        return self.load().get(test)

    def record(self, test: str, gates: int, fallback_best: int | None = None) -> float:
        """Ratio of ``gates`` against the stored best, updating the store when
        ``gates`` is better. ``fallback_best`` seeds a missing entry."""
        with self.lock:
            data = self.load()
            best = data.get(test, fallback_best if fallback_best is not None else gates)
            ratio = qor_ratio(gates, best)
            if gates < best or test not in data:
                data[test] = min(gates, best)
                self.path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
            return ratio


_CELLS_OLD = re.compile(r"^\s*Number of cells:\s*(\d+)\s*$", re.M)
_CELLS_NEW = re.compile(r"^\s*(\d+)\s+cells\s*$", re.M)
_TYPE_OLD = re.compile(r"^\s+(\$?[\w$\\.]+)\s+(\d+)\s*$")
_TYPE_NEW = re.compile(r"^\s+(\d+)\s+(\$[\w$\\.]+|\\?[A-Za-z_][\w$]*)\s*$")


def _stats_section(report: str) -> str:
    idx = report.rfind("Printing statistics")
    return report[idx:] if idx >= 0 else report


def parse_cell_types(synthesis_report: str) -> dict[str, int]:
    """Per-type cell counts listed under the last total in the statistics."""
    section = _stats_section(synthesis_report)
    matches = list(_CELLS_OLD.finditer(section)) + list(_CELLS_NEW.finditer(section))
    if not matches:
        return {}
    last = max(matches, key=lambda m: m.start())
    types = {}
    for line in section[last.end():].splitlines()[1:]:
        if not line.strip():
            if types:
                break
            continue
        m_old, m_new = _TYPE_OLD.match(line), _TYPE_NEW.match(line)
        if m_new and not line.strip().endswith(("wires", "bits", "ports", "cells", "memories", "processes")):
            types[m_new.group(2)] = int(m_new.group(1))
        elif m_old:
            types[m_old.group(1)] = int(m_old.group(2))
        else:
            break
    return types


def parse_gate_count(synthesis_report: str) -> int:
    """Total cell count from the last statistics block of a yosys log."""
    section = _stats_section(synthesis_report)
    matches = list(_CELLS_OLD.finditer(section)) + list(_CELLS_NEW.finditer(section))
    if not matches:
        raise ParseError("no cell count statistics in synthesis report")
    total = int(max(matches, key=lambda m: m.start()).group(1))
    types = parse_cell_types(synthesis_report)
    if types and sum(types.values()) != total:
        raise ParseError(f"per-type cell counts sum to {sum(types.values())}, report states {total}")
    if total < 1:
        raise ParseError("synthesis produced no cells")
    return total


@dataclass
class BenchReport:
    profile: str
    stage: str
    ks: list[int]
    pass_criterion: str
    per_test: list[dict] = field(default_factory=list)
    pass_at_k: dict[int, int] = field(default_factory=dict)
    tests_total: int = 0
    tests_evaluated: int = 0
    skipped: list[str] = field(default_factory=list)
    buckets: dict[str, dict] = field(default_factory=dict)
    tokens_total: int = 0
    failure_rate: float = 0.0
    efficiency: float = 0.0
    qor: dict[str, float] | None = None
    interrupted: bool = False

    def to_dict(self) -> dict:
        d = {
            "profile": self.profile,
            "stage": self.stage,
            "ks": list(self.ks),
            "pass_criterion": self.pass_criterion,
            "per_test": self.per_test,
            "pass_at_k": {str(k): v for k, v in sorted(self.pass_at_k.items())},
            "tests_total": self.tests_total,
            "tests_evaluated": self.tests_evaluated,
            "skipped": self.skipped,
            "buckets": self.buckets,
            "tokens_total": self.tokens_total,
            "failure_rate": self.failure_rate,
            "efficiency": self.efficiency,
            "qor": self.qor,
        }
        if self.interrupted:
            d["interrupted"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BenchReport":
        return cls(
            profile=d["profile"],
            stage=d["stage"],
            ks=list(d["ks"]),
            pass_criterion=d["pass_criterion"],
            per_test=d["per_test"],
            pass_at_k={int(k): v for k, v in d["pass_at_k"].items()},
            tests_total=d["tests_total"],
            tests_evaluated=d["tests_evaluated"],
            skipped=d["skipped"],
            buckets=d["buckets"],
            tokens_total=d["tokens_total"],
            failure_rate=d["failure_rate"],
            efficiency=d["efficiency"],
            qor=d.get("qor"),
            interrupted=d.get("interrupted", False),
        )


def pass_at_k_counts(outcomes: dict[str, list[bool]], ks) -> dict[int, int]:
    """Number of tests with at least one success among their first k attempts."""
    return {k: sum(1 for attempts in outcomes.values() if passed_within(attempts, k)) for k in ks}


def _run_external(template: str, substitutions: dict, cwd, timeout=600):
    rendered = template
    for key, value in substitutions.items():
        rendered = rendered.replace("{" + key + "}", shlex.quote(str(value)))
    try:
        return subprocess.run(shlex.split(rendered), cwd=cwd, capture_output=True, text=True,
                              errors="replace", timeout=timeout)
    except (OSError, subprocess.TimeoutExpired) as exc:
        log.warning("external command failed: %s", exc)
        return None


def _synth_gates(synth_command, verilog_path: Path):
    proc = _run_external(synth_command, {"file": verilog_path.name}, verilog_path.parent)
    if proc is None or proc.returncode != 0:
        return None
    try:
        return parse_gate_count(proc.stdout + proc.stderr)
    except ParseError:
        return None


def _score_attempt(test, record, profile, attempt_dir: Path, lec_command, synth_command, qor_store):
    """Returns (status, qor ratio or None)."""
    if not record.passed:
        return {"exhausted": "compile_fail"}.get(record.final_status, record.final_status), None
    if not record.final_verilog:
        return "no_verilog", None
    golden_iface = parse_interface(test.golden_verilog)
    try:
        normalized = normalize(record.final_verilog, profile.io_convention, golden_iface,
                               hint=profile.top_module_hint)
    except (IoMismatch, ParseError, AmbiguousTop, NameCollision, UnknownPort) as exc:
        log.info("%s: io normalization failed: %s", test.name, exc)
        return "io_mismatch", None
    attempt_dir.mkdir(parents=True, exist_ok=True)
    golden_path = attempt_dir / "golden.v"
    cand_path = attempt_dir / "candidate.v"
    golden_path.write_text(test.golden_verilog, encoding="utf-8")
    cand_path.write_text(normalized, encoding="utf-8")
    if lec_command:
        # external tools run inside attempt_dir and get file names relative to it
        proc = _run_external(lec_command, {"golden": golden_path.name, "candidate": cand_path.name}, attempt_dir)
        if proc is None or proc.returncode != 0:
            return "lec_fail", None
    ratio = None
    if synth_command and qor_store is not None:
        gates = _synth_gates(synth_command, cand_path)
        if gates is not None:
            seed = None
            if qor_store.best(test.name) is None:
                seed = _synth_gates(synth_command, golden_path)
            ratio = qor_store.record(test.name, gates, seed)
    return "pass", ratio


def run_bench(
    suite,
    profile,
    backend,
    stage=AblationStage.FIXES,
    k=1,
    parallelism: int = 1,
    *,
    outdir=None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    lec_command: str | None = None,
    synth_command: str | None = None,
    qor_store: QorStore | None = None,
    model: str | None = None,
    temperature: float | None = None,
    compile_fn=None,
) -> BenchReport:
    """Run every test ``max(k)`` times through the agent and aggregate.

    An attempt passes when it compiles, its IO normalizes onto the golden
    interface and, if ``lec_command`` is given, the checker exits 0.
    """
    stage = AblationStage(stage)
    ks = sorted({int(x) for x in ([k] if isinstance(k, int) else k)})
    if not ks or ks[0] < 1:
        raise ValueError("k values must be >= 1")
    attempts = ks[-1]
    outdir = Path(outdir).resolve() if outdir is not None else None
    run_kwargs = {"max_iterations": max_iterations, "model": model, "compile_fn": compile_fn}
    if temperature is not None:
        run_kwargs["temperature"] = temperature

    skip = set()
    for t in suite:
        if t.category == "pipelined" and getattr(profile.io_convention, "value", profile.io_convention) == "dslx_single_out":
            skip.add(t.name)

    jobs = [(t, a) for t in suite if t.name not in skip for a in range(1, attempts + 1)]

    scratch = tempfile.TemporaryDirectory(prefix="hdlagent-bench-") if outdir is None else None
    base = outdir if outdir is not None else Path(scratch.name)

    def job(item):
        test, attempt = item
        workdir = base / "work" / test.name / str(attempt)
        record = run_agent(test.question, profile, backend, stage, workdir=workdir, **run_kwargs)
        if outdir is not None:
            persist_record(record, outdir / "runs" / test.name, attempt)
        status, ratio = _score_attempt(test, record, profile, workdir, lec_command, synth_command, qor_store)
        return test.name, attempt, record, status, ratio

    results = {}
    interrupted = False
    pool = ThreadPoolExecutor(max_workers=max(1, parallelism))
    try:
        futures = [pool.submit(job, item) for item in jobs]
        for fut in futures:
            name, attempt, record, status, ratio = fut.result()
            results[(name, attempt)] = (record, status, ratio)
    except KeyboardInterrupt:
        interrupted = True
        pool.shutdown(wait=False, cancel_futures=True)
    finally:
        pool.shutdown(wait=not interrupted)
        if scratch is not None and not interrupted:
            scratch.cleanup()

    report = BenchReport(
        profile=profile.name,
        stage=stage.label,
        ks=ks,
        pass_criterion="lec" if lec_command else "compile+io",
        tests_total=len(suite),
        interrupted=interrupted,
    )
    outcomes = {}
    qor = {}
    for t in sorted(suite, key=lambda t: t.name):
        bucket = bucket_of(t.golden_loc)
        if t.name in skip:
            report.skipped.append(t.name)
            report.per_test.append({"test": t.name, "attempt": 0, "status": "skipped",
                                    "iterations": 0, "tokens": 0, "bucket": bucket, "qor": None})
            continue
        outcomes[t.name] = []
        for a in range(1, attempts + 1):
            if (t.name, a) not in results:
                report.per_test.append({"test": t.name, "attempt": a, "status": "cancelled",
                                        "iterations": 0, "tokens": 0, "bucket": bucket, "qor": None})
                outcomes[t.name].append(False)
                continue
            record, status, ratio = results[(t.name, a)]
            tokens = record.ledger.total_tokens
            report.tokens_total += tokens
            report.per_test.append({"test": t.name, "attempt": a, "status": status,
                                    "iterations": len(record.iterations), "tokens": tokens,
                                    "bucket": bucket, "qor": ratio})
            outcomes[t.name].append(status == "pass")
            if ratio is not None:
                qor[t.name] = min(qor.get(t.name, ratio), ratio)
    report.tests_evaluated = len(outcomes)
    report.pass_at_k = pass_at_k_counts(outcomes, ks)
    for label, members in bucket_by_loc(suite).items():
        evaluated = [t.name for t in members if t.name in outcomes]
        passed = sum(1 for n in evaluated if passed_within(outcomes[n], attempts))
        report.buckets[label] = {
            "tests": len(members),
            "evaluated": len(evaluated),
            "passed": passed,
            "rate": passed / len(evaluated) if evaluated else None,
        }
    if report.tests_evaluated:
        report.failure_rate = 1 - report.pass_at_k[attempts] / report.tests_evaluated
    report.efficiency = report.failure_rate * report.tokens_total
    report.qor = qor if synth_command else None
    return report


def run_ablation(suite, profile, backend, stages, k=1, **kwargs) -> dict[str, BenchReport]:
    """One ``run_bench`` per stage, keyed by stage label in stage order."""
    outdir = kwargs.pop("outdir", None)
    reports = {}
    parsed = (AblationStage.parse(s) if isinstance(s, str) else AblationStage(s) for s in stages)
    for stage in sorted(set(parsed)):
        sub = Path(outdir) / stage.label if outdir is not None else None
        reports[stage.label] = run_bench(suite, profile, backend, stage, k, outdir=sub, **kwargs)
    return reports
