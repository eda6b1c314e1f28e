import json
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdlagent.errors import NoCodeFound
from hdlagent.extract import CodeCandidate, extract_code, fenced_blocks, is_prose
from hdlagent.profile import get_profile

from .conftest import FIXTURES

CORPUS = FIXTURES / "extraction"
MANIFEST = json.loads((CORPUS / "manifest.json").read_text())


def load_case(name):
    (path,) = CORPUS.glob(f"{name}.*.txt")
    profile = get_profile(path.name.split(".")[1])
    expected = CORPUS / f"{name}.expected"
    return path.read_text(), profile, expected.read_text().rstrip("\n") if expected.exists() else None


def test_corpus_size_and_coverage():
    assert len(MANIFEST) >= 20
    assert {"fenced_block", "language_boundary", "whole_response", None} <= set(MANIFEST.values())


@pytest.mark.parametrize("name", sorted(MANIFEST))
def test_corpus_case(name):
    raw, profile, expected = load_case(name)
    rule = MANIFEST[name]
    if rule is None:
        with pytest.raises(NoCodeFound):
            extract_code(raw, profile)
        return
    cand = extract_code(raw, profile, iteration=3)
    assert cand.code == expected
    assert cand.extraction_rule == rule
    assert cand.language == profile.name and cand.source_iteration == 3
    assert extract_code(cand.code, profile).code == cand.code


@pytest.mark.parametrize("name", sorted(n for n, r in MANIFEST.items() if r))
def test_never_fabricates_lines(name):
    raw, profile, _ = load_case(name)
    raw_lines = raw.split("\n")
    for line in extract_code(raw, profile).code.split("\n"):
        assert any(line in r for r in raw_lines), line


@pytest.mark.parametrize("name", sorted(n for n, r in MANIFEST.items() if r == "language_boundary"))
def test_verilog_lines_inside_spans(name):
    raw, profile, _ = load_case(name)
    if profile.name != "verilog":
        return
    inside = False
    for line in extract_code(raw, profile).code.split("\n"):
        if re.search(r"\bmodule\s+\w", line):
            inside = True
        assert inside or not line.strip() or line.lstrip().startswith("`"), line
        if "endmodule" in line:
            inside = False


def test_prose_heuristic():
    assert is_prose("This design works by adding.", "verilog")
    assert not is_prose("Too short.", "verilog")
    assert not is_prose("assign y = a & b; // done here.", "verilog")
    assert not is_prose("This line has four words", "verilog")


def test_unterminated_fence_runs_to_end():
    assert fenced_blocks("a\n```\nx;\ny;") == ["x;\ny;"]


def test_candidate_roundtrip():
    c = CodeCandidate("module m; endmodule", "verilog", 2, "fenced_block")
    assert CodeCandidate.from_dict(c.to_dict()) == c


@settings(max_examples=60, deadline=None)
@given(
    body=st.lists(st.sampled_from(["  assign y = a;", "  wire t;", "", "  // note"]), max_size=6),
    before=st.lists(st.sampled_from(["Here you go.", "Sure, this is the code you asked for.", ""]), max_size=3),
    after=st.lists(st.sampled_from(["This design works by magic.", "Let me know if that helps!", ""]), max_size=3),
)
def test_boundary_extraction_is_idempotent(body, before, after):
    profile = get_profile("verilog")
    code = "\n".join(["module m(input a, output y);", *body, "endmodule"])
    raw = "\n".join([*before, code, *after])
    first = extract_code(raw, profile).code
    assert extract_code(first, profile).code == first
    assert first.startswith("module m") and first.endswith("endmodule")
