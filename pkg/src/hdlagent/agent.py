"""The generate, compile, repair loop and independent top@k attempts."""

from __future__ import annotations

import hashlib
import json
import logging
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import compiler
from .context import AblationStage, build_initial_query, build_repair_query
from .errors import BackendError, NoCodeFound
from .extract import CodeCandidate, extract_code
from .llm import DEFAULT_TEMPERATURE, ChatRequest, TokenLedger, complete

log = logging.getLogger(__name__)

DEFAULT_MAX_ITERATIONS = 8
FINAL_STATUSES = ("passed_compile", "exhausted", "extraction_dead", "backend_dead", "tool_missing")


def sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class IterationRecord:
    index: int
    prompt_digest: str
    raw_response_digest: str
    candidate: CodeCandidate | None = None
    outcome: compiler.CompileOutcome | None = None
    fix_applied: str | None = None
    prompt_text: str = field(default="", repr=False, compare=False)
    response_text: str = field(default="", repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "prompt_digest": self.prompt_digest,
            "raw_response_digest": self.raw_response_digest,
            "candidate": self.candidate.to_dict() if self.candidate else None,
            "outcome": self.outcome.to_dict() if self.outcome else None,
            "fix_applied": self.fix_applied,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IterationRecord":
        return cls(
            index=d["index"],
            prompt_digest=d["prompt_digest"],
            raw_response_digest=d["raw_response_digest"],
            candidate=CodeCandidate.from_dict(d["candidate"]) if d.get("candidate") else None,
            outcome=compiler.CompileOutcome.from_dict(d["outcome"]) if d.get("outcome") else None,
            fix_applied=d.get("fix_applied"),
        )


@dataclass
class AgentRunRecord:
    question: str
    profile_name: str
    stage: AblationStage
    iterations: list[IterationRecord] = field(default_factory=list)
    final_status: str = "exhausted"
    final_code: str | None = None
    final_verilog: str | None = None
    ledger: TokenLedger = field(default_factory=TokenLedger)
    wall_time: float = 0.0
    tool_version: str | None = None

    @property
    def passed(self) -> bool:
        return self.final_status == "passed_compile"

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "profile_name": self.profile_name,
            "stage": self.stage.label,
            "iterations": [it.to_dict() for it in self.iterations],
            "final_status": self.final_status,
            "final_code": self.final_code,
            "final_verilog": self.final_verilog,
            "ledger": self.ledger.to_dict(),
            "wall_time": self.wall_time,
            "tool_version": self.tool_version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AgentRunRecord":
        return cls(
            question=d["question"],
            profile_name=d["profile_name"],
            stage=AblationStage.parse(d["stage"]),
            iterations=[IterationRecord.from_dict(it) for it in d["iterations"]],
            final_status=d["final_status"],
            final_code=d.get("final_code"),
            final_verilog=d.get("final_verilog"),
            ledger=TokenLedger.from_dict(d["ledger"]),
            wall_time=d.get("wall_time", 0.0),
            tool_version=d.get("tool_version"),
        )


def persist_record(record: AgentRunRecord, directory, attempt: int) -> Path:
    """Write ``{directory}/{attempt}.json`` plus every prompt and response as
    ``{digest}.txt`` next to it."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for it in record.iterations:
        for digest, text in ((it.prompt_digest, it.prompt_text), (it.raw_response_digest, it.response_text)):
            blob = directory / f"{digest}.txt"
            if text and not blob.exists():
                blob.write_text(text, encoding="utf-8")
    path = directory / f"{attempt}.json"
    path.write_text(json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _verilog_of(candidate, outcome, profile) -> str | None:
    if outcome.artifact_path:
        try:
            return Path(outcome.artifact_path).read_text(encoding="utf-8", errors="replace")
        except OSError:
            return None
    if profile.file_extension.lstrip(".") in ("v", "sv"):
        return candidate.code
    return None


def run_agent(
    question: str,
    profile,
    backend,
    stage: AblationStage = AblationStage.FIXES,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    *,
    model: str | None = None,
    temperature: float = DEFAULT_TEMPERATURE,
    compile_fn=None,
    workdir=None,
) -> AgentRunRecord:
    """One agent run. Stages below ``compile`` make a single attempt; higher
    stages feed compiler diagnostics back until success or the budget runs out.
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    if not question or not question.strip():
        raise ValueError("question must be non-empty")
    stage = AblationStage(stage)
    compile_fn = compile_fn or compiler.compile
    model = model or getattr(backend, "model", "default")
    record = AgentRunRecord(question=question, profile_name=profile.name, stage=stage)
    iterates = stage >= AblationStage.COMPILE
    budget = max_iterations if iterates else 1
    started = time.monotonic()

    tmp = None
    if workdir is None:
        tmp = tempfile.TemporaryDirectory(prefix="hdlagent-")
        workdir = tmp.name
    workdir = Path(workdir)

    latest = None  # (candidate, diagnostic, fix)
    try:
        for index in range(1, budget + 1):
            fix = None
            if latest is None:
                bundle = build_initial_query(profile, question, stage)
            else:
                cand, diagnostic, fix = latest
                bundle = build_repair_query(profile, question, cand, diagnostic, fix, stage)
            request = ChatRequest(
                user_text=bundle.user_text,
                model=model,
                temperature=temperature,
                system_text=bundle.system_text,
            )
            try:
                result = complete(backend, request)
            except BackendError as exc:
                log.error("backend failed on iteration %d: %s", index, exc)
                record.final_status = "backend_dead"
                break
            record.ledger.record(bundle.purpose, result)
            it = IterationRecord(
                index=index,
                prompt_digest=sha256(bundle.user_text),
                raw_response_digest=sha256(result.text),
                fix_applied=fix.pattern if fix is not None and stage == AblationStage.FIXES else None,
                prompt_text=bundle.user_text,
                response_text=result.text,
            )
            record.iterations.append(it)
            try:
                cand = extract_code(result.text, profile, index)
            except NoCodeFound:
                log.info("iteration %d: no code in response", index)
                continue
            it.candidate = cand
            outcome = compile_fn(cand, profile, workdir / f"iter_{index}")
            it.outcome = outcome
            if outcome.status == "tool_missing":
                record.final_status = "tool_missing"
                break
            if outcome.status == "success":
                record.final_status = "passed_compile"
                record.final_code = cand.code
                record.final_verilog = _verilog_of(cand, outcome, profile)
                break
            log.info("iteration %d: %s", index, outcome.status)
            diagnostic = outcome.diagnostic or compiler.TIMEOUT_MESSAGE
            matched = None
            if stage == AblationStage.FIXES and outcome.status == "failure":
                matched = compiler.match_fix(diagnostic, profile)
            latest = (cand, diagnostic, matched)
        else:
            if not any(it.candidate for it in record.iterations):
                record.final_status = "extraction_dead"
            else:
                record.final_status = "exhausted"
    finally:
        if tmp is not None:
            tmp.cleanup()
    if record.final_status != "passed_compile" and latest is not None:
        record.final_code = latest[0].code
    record.wall_time = time.monotonic() - started
    return record


def run_top_k(
    question: str,
    profile,
    backend,
    stage: AblationStage = AblationStage.FIXES,
    k: int = 1,
    *,
    parallelism: int = 1,
    workdir=None,
    **kwargs,
) -> list[AgentRunRecord]:
    """``k`` independent runs, each starting from a fresh initial query.
    Records come back in attempt order."""
    if k < 1:
        raise ValueError("k must be >= 1")

    def attempt(i):
        wd = Path(workdir) / f"attempt_{i}" if workdir is not None else None
        return run_agent(question, profile, backend, stage, workdir=wd, **kwargs)

    if parallelism <= 1:
        return [attempt(i) for i in range(1, k + 1)]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(attempt, range(1, k + 1)))


def passed_within(records, k: int) -> bool:
    """True when any of the first ``k`` attempts passed."""
    return any(getattr(r, "passed", r) for r in list(records)[:k])
