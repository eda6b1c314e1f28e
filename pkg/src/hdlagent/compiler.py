"""Run a profile's compiler on a candidate and classify what happened."""

from __future__ import annotations

import functools
import logging
import os
import shlex
import shutil
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger(__name__)

MAX_DIAGNOSTIC_CHARS = 8000
TIMEOUT_MESSAGE = "The compiler did not terminate within the time limit."
STATUSES = ("success", "failure", "timeout", "tool_missing")
_VERILOG_SUFFIXES = (".v", ".sv")


@dataclass(frozen=True)
class CompileOutcome:
    status: str
    exit_code: int
    diagnostic: str = ""
    artifact_path: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "success"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "exit_code": self.exit_code,
            "diagnostic": self.diagnostic,
            "artifact_path": self.artifact_path,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CompileOutcome":
        return cls(**d)


def truncate_diagnostic(text: str, limit: int = MAX_DIAGNOSTIC_CHARS) -> str:
    # head-biased: tools print the first error first
    return text if len(text) <= limit else text[:limit]


def render_command(template: str, file: Path, workdir: Path) -> list[str]:
    rendered = template.replace("{file}", shlex.quote(str(file))).replace(
        "{workdir}", shlex.quote(str(workdir))
    )
    argv = shlex.split(rendered)
    if argv and argv[0] in ("python", "python3"):
        # wrappers under hdlagent.tools must run in this interpreter
        argv[0] = sys.executable
    return argv


def _find_artifact(workdir: Path, design: Path) -> str | None:
    if design.suffix in _VERILOG_SUFFIXES:
        return None
    for name in ("design.v", "design.sv"):
        if (workdir / name).is_file():
            return str(workdir / name)
    found = sorted(p for p in workdir.iterdir() if p.suffix in _VERILOG_SUFFIXES and p.is_file())
    return str(found[0]) if found else None


def compile(candidate, profile, workdir) -> CompileOutcome:
    """Write the candidate into ``workdir`` and run the profile's compile command.

    Never raises: every condition maps onto one of the four statuses.
    """
    workdir = Path(workdir).resolve()
    design = workdir / f"design.{profile.file_extension.lstrip('.')}"
    try:
        workdir.mkdir(parents=True, exist_ok=True)
        design.write_text(candidate.code, encoding="utf-8")
        # commands run inside workdir, so {file} is given relative to it
        argv = render_command(profile.compile_command, Path(design.name), workdir)
    except (OSError, ValueError) as exc:
        return CompileOutcome("failure", -1, f"could not prepare compilation: {exc}")
    if not argv or shutil.which(argv[0]) is None:
        tool = argv[0] if argv else "<empty command>"
        return CompileOutcome("tool_missing", 127, f"compiler not found: {tool}")
    log.debug("compile: %s", shlex.join(argv))
    try:
        proc = subprocess.run(
            argv,
            cwd=workdir,
            capture_output=True,
            text=True,
            errors="replace",
            timeout=profile.compile_timeout,
        )
    except subprocess.TimeoutExpired:
        return CompileOutcome("timeout", -1, TIMEOUT_MESSAGE)
    except FileNotFoundError as exc:
        return CompileOutcome("tool_missing", 127, str(exc))
    except OSError as exc:
        return CompileOutcome("failure", -1, f"could not run compiler: {exc}")

    # relative paths keep prompts (and cassette digests) independent of the workdir
    output = ((proc.stderr or "") + (proc.stdout or "")).replace(str(workdir) + os.sep, "")
    if proc.returncode == 0:
        return CompileOutcome("success", 0, "", _find_artifact(workdir, design))
    if proc.returncode == 127:
        return CompileOutcome("tool_missing", 127, truncate_diagnostic(output) or "compiler not found")
    if not output.strip():
        output = f"compiler exited with status {proc.returncode} without output"
    return CompileOutcome("failure", proc.returncode, truncate_diagnostic(output))


def match_fix(diagnostic: str, profile):
    """First error fix, in profile order, whose pattern matches ``diagnostic``."""
    if not diagnostic:
        raise ValueError("diagnostic must be non-empty")
    for fix in profile.error_fixes:
        if fix.matches(diagnostic):
            return fix
    return None


@functools.lru_cache(maxsize=32)
def tool_version(compile_command: str) -> str | None:
    """Best-effort ``<tool> --version`` string for run records."""
    try:
        argv = render_command(compile_command, Path("design"), Path("."))
    except ValueError:
        return None
    if not argv or shutil.which(argv[0]) is None:
        return None
    if argv[0] == sys.executable and len(argv) > 2 and argv[1] == "-m":
        probe = argv[:3] + ["--version"]
    else:
        probe = [argv[0], "--version"]
    try:
        proc = subprocess.run(probe, capture_output=True, text=True, timeout=30)
    except (OSError, subprocess.TimeoutExpired):
        return None
    lines = (proc.stdout or proc.stderr).strip().splitlines()
    return lines[0] if lines else None
