"""Per-HDL knowledge packs: loading, validation and summary regeneration."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import ParseError, ValidationError

FEW_SHOT_TOPICS = ("bit_ops", "reduction", "loop", "multiplexing", "multiply_add", "other")
DEFAULT_COMPILE_TIMEOUT = 60

SUMMARY_INSTRUCTION = (
    "{hdl} is a Hardware Description Language with the following reference "
    "documentation and tutorial. Create documentation useful for LLMs trying to "
    "generate {hdl} code. The generated documentation should include code snippets "
    "and highlight any language syntax that is atypical for HDLs."
)
CONCISE_SENTENCE = "Be concise and avoid examples with similar syntax."

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_\-]*$")


class IoConvention(str, Enum):
    VERILOG_NATIVE = "verilog_native"
    CHISEL_IO_PREFIXED = "chisel_io_prefixed"
    DSLX_SINGLE_OUT = "dslx_single_out"
    PYRTL_NAMED = "pyrtl_named"


@dataclass(frozen=True)
class FewShotExample:
    topic: str
    question: str
    code: str


@dataclass(frozen=True)
class ErrorFix:
    pattern: str
    explanation: str
    example_fix: str
    is_regex: bool = False

    def matches(self, diagnostic: str) -> bool:
        if self.is_regex:
            return re.search(self.pattern, diagnostic) is not None
        return self.pattern in diagnostic


@dataclass(frozen=True)
class HdlProfile:
    name: str
    file_extension: str
    description_summary: str
    prefix: str
    suffix: str
    compile_command: str
    io_convention: IoConvention = IoConvention.VERILOG_NATIVE
    compile_timeout: int = DEFAULT_COMPILE_TIMEOUT
    few_shot: tuple[FewShotExample, ...] = ()
    error_fixes: tuple[ErrorFix, ...] = ()
    top_module_hint: str | None = None
    system_text: str | None = None

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "file_extension": self.file_extension,
            "description_summary": self.description_summary,
            "prefix": self.prefix,
            "suffix": self.suffix,
            "compile_command": self.compile_command,
            "compile_timeout_s": self.compile_timeout,
            "io_convention": IoConvention(self.io_convention).value,
            "top_module_hint": self.top_module_hint,
            "few_shot": [
                {"topic": ex.topic, "question": ex.question, "code": ex.code}
                for ex in self.few_shot
            ],
            "error_fixes": [
                {
                    "pattern": fx.pattern,
                    "is_regex": fx.is_regex,
                    "explanation": fx.explanation,
                    "example_fix": fx.example_fix,
                }
                for fx in self.error_fixes
            ],
        }
        if self.system_text is not None:
            d["system_text"] = self.system_text
        return d


def validate_profile(profile: HdlProfile) -> list[str]:
    """Return one ``"<field>: <problem>"`` string per violated invariant."""
    problems = []
    if not profile.name or not _IDENT.match(profile.name):
        problems.append("name: must be a non-empty identifier")
    if not profile.file_extension:
        problems.append("file_extension: must be non-empty")
    for attr in ("prefix", "suffix"):
        if not getattr(profile, attr).strip():
            problems.append(f"{attr}: must be non-empty")
    n_file = profile.compile_command.count("{file}")
    if n_file != 1:
        problems.append(
            f"compile_command: must contain the {{file}} placeholder exactly once (found {n_file})"
        )
    if not isinstance(profile.compile_timeout, int) or profile.compile_timeout <= 0:
        problems.append("compile_timeout_s: must be a positive integer")
    try:
        IoConvention(profile.io_convention)
    except ValueError:
        problems.append(f"io_convention: unknown convention {profile.io_convention!r}")
    for i, ex in enumerate(profile.few_shot):
        if ex.topic not in FEW_SHOT_TOPICS:
            problems.append(f"few_shot[{i}].topic: unknown topic {ex.topic!r}")
        if not ex.question.strip():
            problems.append(f"few_shot[{i}].question: must be non-empty")
        if not ex.code.strip():
            problems.append(f"few_shot[{i}].code: must be non-empty")
    for i, fx in enumerate(profile.error_fixes):
        if not fx.pattern:
            problems.append(f"error_fixes[{i}].pattern: must be non-empty")
        elif fx.is_regex:
            try:
                re.compile(fx.pattern)
            except re.error as exc:
                problems.append(f"error_fixes[{i}].pattern: invalid regular expression ({exc})")
    return problems


_REQUIRED = ("name", "file_extension", "prefix", "suffix", "compile_command")


def profile_from_dict(data: dict) -> HdlProfile:
    if not isinstance(data, dict):
        raise ParseError("profile document must be a JSON object")
    for key in _REQUIRED:
        if key not in data:
            raise ValidationError(key, f"{key}: required field missing")
    try:
        few_shot = tuple(
            FewShotExample(topic=ex["topic"], question=ex["question"], code=ex["code"])
            for ex in data.get("few_shot", [])
        )
        fixes = tuple(
            ErrorFix(
                pattern=fx["pattern"],
                is_regex=bool(fx.get("is_regex", False)),
                explanation=fx["explanation"],
                example_fix=fx.get("example_fix", ""),
            )
            for fx in data.get("error_fixes", [])
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed few_shot/error_fixes entry: {exc}") from exc
    conv = data.get("io_convention", IoConvention.VERILOG_NATIVE.value)
    try:
        conv = IoConvention(conv)
    except ValueError:
        pass  # reported by validate_profile
    return HdlProfile(
        name=data["name"],
        file_extension=data["file_extension"],
        description_summary=data.get("description_summary", ""),
        prefix=data["prefix"],
        suffix=data["suffix"],
        compile_command=data["compile_command"],
        compile_timeout=data.get("compile_timeout_s", DEFAULT_COMPILE_TIMEOUT),
        io_convention=conv,
        top_module_hint=data.get("top_module_hint"),
        few_shot=few_shot,
        error_fixes=fixes,
        system_text=data.get("system_text"),
    )


def load_profile(path) -> HdlProfile:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    profile = profile_from_dict(data)
    problems = validate_profile(profile)
    if problems:
        field_name = problems[0].split(":", 1)[0]
        raise ValidationError(field_name, "; ".join(problems))
    return profile


def dump_profile(profile: HdlProfile) -> str:
    return json.dumps(profile.to_dict(), indent=2) + "\n"


def bundled_profile_names() -> list[str]:
    root = resources.files("hdlagent") / "profiles"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_profile_path(name: str) -> Path:
    return Path(str(resources.files("hdlagent") / "profiles" / f"{name}.json"))


def get_profile(name_or_path: str) -> HdlProfile:
    """Resolve a bundled profile name, or load a profile file path."""
    if name_or_path in bundled_profile_names():
        return load_profile(bundled_profile_path(name_or_path))
    path = Path(name_or_path)
    if not path.exists():
        raise FileNotFoundError(
            f"no bundled profile or file named {name_or_path!r} "
            f"(bundled: {', '.join(bundled_profile_names())})"
        )
    return load_profile(path)


def render_summary_prompt(manual_text: str, hdl_name: str, style: str = "default") -> str:
    if style not in ("default", "concise"):
        raise ValueError(f"unknown summary style {style!r}")
    parts = [SUMMARY_INSTRUCTION.format(hdl=hdl_name), manual_text]
    if style == "concise":
        parts.append(CONCISE_SENTENCE)
    return "\n\n".join(parts)


def summarize_reference(manual_text, hdl_name, style, backend, model=None, temperature=0.7):
    """Ask ``backend`` to condense a reference manual into an LLM-oriented
    description summary. Exactly one backend call; the reply is returned as-is."""
    from .llm import ChatRequest, complete

    if not manual_text or not manual_text.strip():
        raise ValueError("manual_text must be non-empty")
    request = ChatRequest(
        user_text=render_summary_prompt(manual_text, hdl_name, style),
        model=model or getattr(backend, "model", "default"),
        temperature=temperature,
    )
    return complete(backend, request).text
