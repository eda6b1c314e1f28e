"""Pull compilable code out of free-form LLM responses.

Rules, in priority order:

1. fenced blocks (any info string), concatenated in order;
2. a per-language boundary filter (Verilog ``module``/``endmodule`` spans
   plus preprocessor lines; brace-balanced blocks for Chisel and DSLX;
   PyRTL statements from the first library reference on);
3. the whole response, when it has no sentence-like prose and looks like code.

The Chisel, PyRTL and DSLX boundary filters are extrapolations of the Verilog
rule.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import NoCodeFound

FENCE = re.compile(r"^\s*```")

LANGUAGE_BY_EXTENSION = {
    "v": "verilog",
    "sv": "verilog",
    "vh": "verilog",
    "scala": "chisel",
    "py": "pyrtl",
    "x": "dslx",
}

_SYMBOLS = (";", "{", "}", "=", "<=", "[", "]", "//", "/*", "(", ")")
_KEYWORDS = {
    "verilog": {"module", "endmodule", "assign", "always", "wire", "reg", "input", "output", "begin", "end"},
    "chisel": {"class", "object", "val", "var", "import", "extends", "def", "IO", "Module"},
    "pyrtl": {"import", "pyrtl", "def", "return", "Input", "Output", "WireVector"},
    "dslx": {"fn", "let", "struct", "import", "const", "for", "match"},
}
_WORD = re.compile(r"[A-Za-z_]\w*")


@dataclass(frozen=True)
class CodeCandidate:
    code: str
    language: str
    source_iteration: int = 0
    extraction_rule: str = "whole_response"

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "language": self.language,
            "source_iteration": self.source_iteration,
            "extraction_rule": self.extraction_rule,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CodeCandidate":
        return cls(**d)


def language_of(profile) -> str | None:
    return LANGUAGE_BY_EXTENSION.get(profile.file_extension.lstrip(".").lower())


def has_structural_token(line: str, language: str | None) -> bool:
    if any(sym in line for sym in _SYMBOLS):
        return True
    if language == "pyrtl" and line.lstrip().startswith("#"):
        return True
    words = set(_WORD.findall(line))
    return bool(words & _KEYWORDS.get(language, set()))


def is_prose(line: str, language: str | None = None) -> bool:
    """A sentence-like line: at least four words, ends in . ! or ?, and
    carries no structural token of the language."""
    s = line.strip()
    if len(s.split()) < 4 or s[-1] not in ".!?":
        return False
    return not has_structural_token(s, language)


def trim_blank_lines(text: str) -> str:
    lines = text.split("\n")
    while lines and not lines[0].strip():
        lines.pop(0)
    while lines and not lines[-1].strip():
        lines.pop()
    return "\n".join(lines)


def fenced_blocks(text: str) -> list[str]:
    blocks, current = [], None
    for line in text.split("\n"):
        if FENCE.match(line):
            if current is None:
                current = []
            else:
                blocks.append("\n".join(current))
                current = None
        elif current is not None:
            current.append(line)
    if current is not None:
        blocks.append("\n".join(current))
    return blocks


class _CommentTracker:
    """Classifies lines outside code regions as blank/comment-only, tracking
    C-style block comments across lines."""

    def __init__(self, line_comment="//"):
        self.line_comment = line_comment
        self.in_block = False

    def is_comment_or_blank(self, line: str) -> bool:
        rest = line
        if self.in_block:
            end = rest.find("*/")
            if end < 0:
                return True
            rest = rest[end + 2:]
            self.in_block = False
        rest = re.sub(r"/\*.*?\*/", "", rest)
        start = rest.find("/*")
        if start >= 0:
            self.in_block = "*/" not in rest[start:]
            rest = rest[:start]
        if self.line_comment and self.line_comment in rest:
            rest = rest[: rest.index(self.line_comment)]
        return not rest.strip()


_PREPROC = re.compile(r"^\s*`[A-Za-z_]")
_MODULE_START = re.compile(r"\b(?:module|macromodule)\s+[A-Za-z_][\w$]*\s*(?:#|\(|;|$)")
_ENDMODULE = re.compile(r"\bendmodule\b")
_ENDMODULE_TAIL = re.compile(r"^\s*(?::\s*[A-Za-z_]\w*)?\s*(?://.*)?$")


def _cut_prefix(line: str, start: int) -> str:
    return line if not line[:start].strip() else line[start:]


def _verilog_boundary(text: str) -> str | None:
    out, found, in_span = [], False, False
    comments = _CommentTracker()
    for line in text.split("\n"):
        seg = line
        if not in_span:
            m = None if comments.in_block else _MODULE_START.search(line)
            if m is None or "//" in line[: m.start()]:
                was_in_comment = comments.in_block
                comments.is_comment_or_blank(line)
                if not line.strip() or (_PREPROC.match(line) and not was_in_comment):
                    out.append(line)
                continue
            seg = _cut_prefix(line, m.start())
            in_span = found = True
            search_from = seg.find(m.group(0)) + len(m.group(0))
        else:
            search_from = 0
        e = _ENDMODULE.search(seg, search_from)
        if e is not None:
            in_span = False
            if not _ENDMODULE_TAIL.match(seg[e.end():]):
                seg = seg[: e.end()]
        out.append(seg)
    return "\n".join(out) if found else None


def _strip_strings_and_comments(line: str) -> str:
    line = re.sub(r'"(?:\\.|[^"\\])*"', '""', line)
    idx = line.find("//")
    return line if idx < 0 else line[:idx]


def _brace_boundary(text: str, start_re, keep_re) -> str | None:
    out, found = [], False
    depth, opened, in_block = 0, False, False
    comments = _CommentTracker()
    for line in text.split("\n"):
        seg = line
        if not in_block:
            m = start_re.search(line)
            if m is None:
                if keep_re.match(line) or comments.is_comment_or_blank(line):
                    out.append(line)
                continue
            lead = len(m.group(0)) - len(m.group(0).lstrip())
            seg = _cut_prefix(line, m.start() + lead)
            in_block = found = True
            depth, opened = 0, False
        code = _strip_strings_and_comments(seg)
        for ch in code:
            if ch == "{":
                depth += 1
                opened = True
            elif ch == "}":
                depth -= 1
        out.append(seg)
        if opened and depth <= 0:
            in_block = False
        elif not opened and code.rstrip().endswith(";"):
            in_block = False
    return "\n".join(out) if found else None


# a block opens at line start or right after a sentence ("Sure! class ...")
_BLOCK_LEAD = r"(?:^\s*|(?<=[.!?:])\s+)"
_CHISEL_START = re.compile(
    _BLOCK_LEAD
    + r"(?:(?:final|sealed|private|case|abstract)\s+)*(?:class|object|trait)\s+[A-Za-z_]\w*\s*"
    r"(?:extends\b|with\b|\{|\(|\[|$)"
)
_CHISEL_KEEP = re.compile(r"^\s*(?:import|package)\s+[\w.]+")
_DSLX_START = re.compile(
    _BLOCK_LEAD + r"(?:pub\s+)?(?:fn|struct|enum|const|type|proc)\s+[A-Za-z_]\w*\s*(?:[({<:=]|$)"
)
_DSLX_KEEP = re.compile(r"^\s*(?:import\s+[\w.]+(?:\s+as\s+\w+)?\s*;|#!?\[)")

_PY_IMPORT = re.compile(r"^\s*(?:import\s+\w|from\s+[\w.]+\s+import\s)")
_PYRTL_REF = re.compile(r"\bpyrtl\.")
_PYRTL_STAR_REF = re.compile(r"\b(?:Input|Output|WireVector|Register|Const|MemBlock|concat|select|mux)\s*\(")
_PY_BLOCK = re.compile(r"^\s*(?:def|class|if|elif|else|for|while|with|try|except|finally|async|@)\b")


def _py_lead_in(line: str) -> bool:
    s = line.rstrip()
    return s.endswith(":") and not line[:1].isspace() and not _PY_BLOCK.match(line)


def _pyrtl_boundary(text: str) -> str | None:
    lines = text.split("\n")
    star = any(re.match(r"^\s*from\s+pyrtl\s+import\s", ln) for ln in lines)
    first = None
    for i, ln in enumerate(lines):
        if _PY_IMPORT.match(ln):
            continue
        if _PYRTL_REF.search(ln) or (star and _PYRTL_STAR_REF.search(ln)):
            first = i
            break
    if first is None:
        return None
    start = first
    while start > 0:
        prev = lines[start - 1]
        if _PY_IMPORT.match(prev) or is_prose(prev, "pyrtl") or _py_lead_in(prev) or FENCE.match(prev):
            break
        start -= 1
    keep = []
    for i, ln in enumerate(lines):
        if i < start:
            if _PY_IMPORT.match(ln):
                keep.append(ln)
        elif not (is_prose(ln, "pyrtl") or _py_lead_in(ln) or FENCE.match(ln)):
            keep.append(ln)
    return "\n".join(keep)


def boundary_extract(text: str, language: str | None) -> str | None:
    if language == "verilog":
        return _verilog_boundary(text)
    if language == "chisel":
        return _brace_boundary(text, _CHISEL_START, _CHISEL_KEEP)
    if language == "dslx":
        return _brace_boundary(text, _DSLX_START, _DSLX_KEEP)
    if language == "pyrtl":
        return _pyrtl_boundary(text)
    return None


def looks_like_bare_code(text: str, language: str | None) -> bool:
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if not lines or any(is_prose(ln, language) for ln in lines):
        return False
    return any(has_structural_token(ln, language) for ln in lines)


def extract_code(raw_response: str, profile, iteration: int = 0) -> CodeCandidate:
    language = language_of(profile)

    def candidate(code, rule):
        return CodeCandidate(
            code=code, language=profile.name, source_iteration=iteration, extraction_rule=rule
        )

    blocks = [b for b in fenced_blocks(raw_response) if b.strip()]
    if blocks:
        code = trim_blank_lines("\n".join(trim_blank_lines(b) for b in blocks))
        if code:
            return candidate(code, "fenced_block")
    bounded = boundary_extract(raw_response, language)
    if bounded is not None:
        code = trim_blank_lines(bounded)
        if code.strip():
            return candidate(code, "language_boundary")
    if looks_like_bare_code(raw_response, language):
        return candidate(trim_blank_lines(raw_response), "whole_response")
    raise NoCodeFound("no code region found in response")
