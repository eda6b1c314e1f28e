import dataclasses
import shlex
import sys
from pathlib import Path

import pytest

from hdlagent.context import CONNECTIVE
from hdlagent.llm import LlmBackend
from hdlagent.profile import get_profile

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"
STUB_COMPILER = FIXTURES / "stub_compiler.py"
SUITE = FIXTURES / "suite"


def stub_command(*flags) -> str:
    parts = [shlex.quote(sys.executable), shlex.quote(str(STUB_COMPILER)), "{file}"]
    return " ".join(parts + [shlex.quote(str(f)) for f in flags])


def with_command(profile_name: str, command: str, **changes):
    return dataclasses.replace(get_profile(profile_name), compile_command=command, **changes)


@pytest.fixture
def compile_log(tmp_path):
    return tmp_path / "compile.log"


@pytest.fixture
def stub_profile(compile_log):
    """Verilog profile whose compiler is the stub: lines with BROKEN fail."""
    return with_command("verilog", stub_command("--log", compile_log))


@pytest.fixture
def failing_profile(compile_log):
    return with_command("verilog", stub_command("--log", compile_log, "--always-fail"))


def compile_calls(log: Path) -> int:
    return len(log.read_text().splitlines()) if log.exists() else 0


def fenced(code: str, lang: str = "verilog") -> str:
    return f"Here is the design.\n```{lang}\n{code}\n```\n"


SUITE_ANSWERS = {
    # name: (first answer, answer to a repair prompt)
    "and2": "module and2(input a, input b, output y);\n  assign y = a & b;\nendmodule",
    "mux2": (
        "module mux2(input [3:0] a, input [3:0] b, input sel, output [3:0] y);\n  assign y = sel ? b : a BROKEN;\nendmodule",
        "module mux2(input [3:0] a, input [3:0] b, input sel, output [3:0] y);\n  assign y = sel ? b : a;\nendmodule",
    ),
    # compiles, but the output is one bit too narrow
    "adder4": "module adder4(input [3:0] a, input [3:0] b, output [3:0] s);\n  assign s = a + b;\nendmodule",
    "counter": (
        "module counter(input Clock, input Reset, output reg [3:0] q);\n"
        "  always @(posedge Clock)\n    if (Reset) q <= 4'd0;\n    else q <= q + 4'd1;\nendmodule"
    ),
}


class KeyedBackend(LlmBackend):
    """Answers by the test named in the question; thread safe and order independent."""

    model = "default"

    def __init__(self, answers=SUITE_ANSWERS, usage=(50, 10)):
        self.answers = answers
        self.usage = usage
        self.calls = 0

    def send(self, request):
        self.calls += 1
        text = request.user_text
        for name, answer in self.answers.items():
            if f"named {name} " in text:
                first, repair = answer if isinstance(answer, tuple) else (answer, answer)
                reply = repair if CONNECTIVE in text else first
                return fenced(reply), self.usage
        return "I do not know this one, sorry about that.", self.usage


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[key])
