import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdlagent.context import (
    CONNECTIVE,
    SEPARATOR,
    AblationStage,
    build_initial_query,
    build_repair_query,
    render_few_shot,
)
from hdlagent.errors import EmptyError, EmptyQuestion, StageTooLow
from hdlagent.profile import ErrorFix, get_profile

Q = "Build a module named inv with input a and output y = ~a."


def test_base_stage_is_prefix_question_suffix():
    p = get_profile("verilog")
    text = build_initial_query(p, Q, AblationStage.BASE).user_text
    assert text == SEPARATOR.join([p.prefix, Q, p.suffix])


def test_stages_add_parts_in_order():
    p = get_profile("pyrtl")
    desc = build_initial_query(p, Q, AblationStage.DESCRIPTION).user_text
    assert desc.startswith(p.description_summary.strip())
    assert "Example question:" not in desc
    few = build_initial_query(p, Q, AblationStage.FEW_SHOT).user_text
    pos = [few.index(p.description_summary.strip()[:40])]
    pos += [few.index(render_few_shot(ex)) for ex in p.few_shot]
    pos += [few.index(p.prefix), few.index(Q), few.index(p.suffix)]
    assert pos == sorted(pos)
    # compile and fixes only change the repair query
    assert build_initial_query(p, Q, AblationStage.FIXES).user_text == few


def test_exactly_one_blank_line_between_parts():
    p = get_profile("verilog")
    text = build_initial_query(p, Q, AblationStage.BASE).user_text
    assert "\n\n\n" not in text
    assert text.count("\n\n") == 2


def test_empty_question():
    with pytest.raises(EmptyQuestion):
        build_initial_query(get_profile("verilog"), "  \n", AblationStage.BASE)


def test_stage_parse():
    assert AblationStage.parse("fewshot") is AblationStage.FEW_SHOT
    assert AblationStage.parse("Few-Shot") is AblationStage.FEW_SHOT
    assert AblationStage.parse("fixes") is AblationStage.FIXES
    with pytest.raises(ValueError):
        AblationStage.parse("lec")
    assert AblationStage.BASE < AblationStage.DESCRIPTION < AblationStage.FEW_SHOT
    assert AblationStage.FEW_SHOT < AblationStage.COMPILE < AblationStage.FIXES


def test_repair_query_layout():
    p = get_profile("verilog")
    code = "module inv(input a, output y);\n  assign y = !a\nendmodule"
    err = "design.v:3: ERROR: syntax error, unexpected endmodule"
    text = build_repair_query(p, Q, code, err, None, AblationStage.COMPILE).user_text
    initial = build_initial_query(p, Q, AblationStage.COMPILE).user_text
    assert text == SEPARATOR.join([initial, f"```\n{code}\n```", CONNECTIVE, err])


def test_fix_only_at_fixes_stage():
    p = get_profile("verilog")
    fix = ErrorFix(pattern="syntax error", explanation="Check semicolons.", example_fix="a = b;")
    code, err = "module m; endmodule x", "syntax error"
    with_fix = build_repair_query(p, Q, code, err, fix, AblationStage.FIXES).user_text
    assert with_fix.endswith(SEPARATOR.join([err, "Check semicolons.", "a = b;"]))
    no_fix = build_repair_query(p, Q, code, err, fix, AblationStage.COMPILE).user_text
    assert "Check semicolons." not in no_fix


def test_repair_preconditions():
    p = get_profile("verilog")
    with pytest.raises(StageTooLow):
        build_repair_query(p, Q, "module m; endmodule", "err", None, AblationStage.FEW_SHOT)
    with pytest.raises(EmptyError):
        build_repair_query(p, Q, "module m; endmodule", "  ", None, AblationStage.FIXES)


def test_repair_query_is_stateless():
    p = get_profile("verilog")
    a = build_repair_query(p, Q, "code one;", "first error", None, AblationStage.COMPILE).user_text
    b = build_repair_query(p, Q, "code two;", "second error", None, AblationStage.COMPILE).user_text
    assert "first error" not in b and "code one" not in b
    assert a.split("```")[0] == b.split("```")[0]


@settings(max_examples=30, deadline=None)
@given(st.permutations(range(5)))
def test_few_shot_order_follows_profile_order(order):
    p = get_profile("verilog")
    shots = tuple(p.few_shot[i] for i in order)
    text = build_initial_query(dataclasses.replace(p, few_shot=shots), Q, AblationStage.FEW_SHOT).user_text
    positions = [text.index(render_few_shot(ex)) for ex in shots]
    assert positions == sorted(positions)
