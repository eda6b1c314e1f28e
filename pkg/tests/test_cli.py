import json
import subprocess
import sys

import pytest

from hdlagent.bench import load_suite, run_bench
from hdlagent.cli import main
from hdlagent.llm import RecordingBackend
from hdlagent.profile import bundled_profile_path

from .conftest import FIXTURES, SUITE, KeyedBackend, fenced, stub_command, with_command
from .normalize_cases import CHISEL_FULL_ADDER, FULL_ADDER_GOLDEN

STUB = stub_command()
FIXED = "module inv(input a, output y);\n  assign y = ~a;\nendmodule"


def make_cassette(path):
    """Record the fixture suite once through the keyed backend."""
    profile = with_command("verilog", STUB)
    run_bench(load_suite(SUITE), profile, RecordingBackend(KeyedBackend(), path), k=1)
    return path


def test_gen_passes(tmp_path, capsys):
    responses = tmp_path / "r.json"
    responses.write_text(json.dumps([fenced(FIXED.replace("~a;", "~a BROKEN;")), fenced(FIXED)]))
    rc = main(["gen", "Build a module named inv.", "--backend", "mock", "--mock-responses", str(responses),
               "--compile-command", STUB, "--outdir", str(tmp_path / "out")])
    out = capsys.readouterr()
    assert rc == 0 and out.out == FIXED + "\n"
    record = json.loads((tmp_path / "out" / "runs" / "gen" / "1.json").read_text())
    assert record["final_status"] == "passed_compile" and len(record["iterations"]) == 2


def test_gen_exhausted(tmp_path, capsys):
    responses = tmp_path / "r.json"
    responses.write_text(json.dumps([fenced("module x; BROKEN endmodule")] * 2))
    qfile = tmp_path / "q.txt"
    qfile.write_text("Build anything.")
    rc = main(["gen", "--question-file", str(qfile), "--backend", "mock", "--mock-responses", str(responses),
               "--compile-command", STUB, "--max-iterations", "2", "--outdir", str(tmp_path)])
    assert rc == 1
    assert capsys.readouterr().out == ""


def test_gen_k_prints_first_passing_attempt(tmp_path, capsys):
    responses = tmp_path / "r.json"
    responses.write_text(json.dumps([fenced("module x; BROKEN endmodule"), fenced(FIXED)]))
    rc = main(["gen", "Build a module named inv.", "--backend", "mock", "--mock-responses", str(responses),
               "--compile-command", STUB, "--max-iterations", "1", "--k", "2", "--outdir", str(tmp_path)])
    assert rc == 0 and capsys.readouterr().out == FIXED + "\n"
    runs = tmp_path / "runs" / "gen"
    assert json.loads((runs / "1.json").read_text())["final_status"] == "exhausted"
    assert json.loads((runs / "2.json").read_text())["final_status"] == "passed_compile"


def test_gen_records_mock_calls(tmp_path):
    cassette = tmp_path / "c.jsonl"
    responses = tmp_path / "r.json"
    responses.write_text(json.dumps([fenced(FIXED)]))
    base = ["gen", "Build a module named inv.", "--compile-command", STUB, "--outdir", str(tmp_path / "o")]
    assert main(base + ["--backend", "mock", "--mock-responses", str(responses),
                        "--record", "--cassette", str(cassette)]) == 0
    assert len(cassette.read_text().splitlines()) == 1
    assert main(base + ["--backend", "replay", "--cassette", str(cassette), "--model", "scripted"]) == 0


@pytest.mark.parametrize(
    "argv",
    [
        ["gen", "q", "--backend", "replay"],
        ["gen", "q", "--backend", "http"],
        ["gen", "q", "--backend", "http", "--endpoint", "http://x"],
        ["gen", "--backend", "mock"],
        ["gen", "q", "--backend", "mock", "--profile", "vhdl"],
        ["gen", "q", "--backend", "mock", "--stage", "lec"],
        ["gen", "q", "--backend", "mock", "--compile-command", "yosys design.v"],
        ["bench", "/no/such/suite", "--backend", "mock"],
        ["bench", str(SUITE), "--backend", "mock", "--k", "0"],
        ["summarize", "/no/such/manual.txt", "--hdl", "PyRTL", "--backend", "mock"],
        ["frobnicate"],
    ],
)
def test_config_errors_exit_2(argv, tmp_path, capsys):
    assert main(argv + (["--outdir", str(tmp_path)] if argv[0] in ("gen", "bench") else [])) == 2


def test_bench_writes_reports_and_figures(tmp_path, capsys):
    cassette = make_cassette(tmp_path / "c.jsonl")
    out = tmp_path / "out"
    rc = main(["bench", str(SUITE), "--backend", "replay", "--cassette", str(cassette),
               "--compile-command", STUB, "--outdir", str(out), "--k", "1"])
    assert rc == 0
    for name in ("report.json", "report.csv", "report.md", "figures/pass_at_k.png", "figures/loc_buckets.png"):
        assert (out / name).is_file(), name
    assert json.loads((out / "report.json").read_text())["pass_at_k"] == {"1": 3}
    assert "pass@1=3 of 4 tests" in capsys.readouterr().err



def test_bench_keeps_qor_store_inside_outdir(tmp_path):
    cassette = make_cassette(tmp_path / "c.jsonl")
    out = tmp_path / "out"
    synth = f"{sys.executable} -c 'import sys; print(open(sys.argv[1]).read())' {FIXTURES / 'yosys_stat_new.txt'}"
    before = sorted(p.name for p in SUITE.rglob("*"))
    rc = main(["bench", str(SUITE), "--backend", "replay", "--cassette", str(cassette),
               "--compile-command", STUB, "--synth-command", synth, "--outdir", str(out), "--no-figures"])
    assert rc == 0
    assert json.loads((out / "qor_best.json").read_text())
    assert sorted(p.name for p in SUITE.rglob("*")) == before

def test_bench_ablation(tmp_path):
    rc = main(["bench", str(SUITE), "--backend", "mock", "--stage", "base,fewshot",
               "--compile-command", STUB, "--outdir", str(tmp_path / "o"), "--no-figures"])
    assert rc == 0
    assert (tmp_path / "o" / "base" / "report.json").exists()
    assert (tmp_path / "o" / "few_shot" / "report.json").exists()
    assert "| base |" in (tmp_path / "o" / "ablation.md").read_text()


def test_profiles_list_and_validate(tmp_path, capsys):
    assert main(["profiles", "list"]) == 0
    assert capsys.readouterr().out.count("\n") == 4
    assert main(["profiles", "validate"]) == 0
    bad = json.loads(bundled_profile_path("verilog").read_text())
    bad["suffix"] = ""
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert main(["profiles", "validate", str(path)]) == 1
    assert "suffix: must be non-empty" in capsys.readouterr().out


def test_normalize_command(tmp_path, capsys):
    src, golden = tmp_path / "c.v", tmp_path / "g.v"
    src.write_text(CHISEL_FULL_ADDER)
    golden.write_text(FULL_ADDER_GOLDEN)
    assert main(["normalize", str(src), "--convention", "chisel_io_prefixed", "--golden", str(golden),
                 "--outdir", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "io_" not in out and "clock" not in out
    assert (tmp_path / "o" / "normalized.v").read_text() == out
    golden.write_text("module full_adder(input a, output [1:0] s); endmodule")
    assert main(["normalize", str(src), "--convention", "chisel_io_prefixed", "--golden", str(golden)]) == 1
    assert "IO mismatch" in capsys.readouterr().err


def test_summarize_echo(tmp_path, capsys):
    manual = tmp_path / "m.txt"
    manual.write_text("wires and registers")
    assert main(["summarize", str(manual), "--hdl", "PyRTL", "--style", "concise", "--backend", "mock"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("PyRTL is a Hardware Description Language")
    assert out.rstrip().endswith("Be concise and avoid examples with similar syntax.")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hdlagent.cli", "profiles", "list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "verilog" in proc.stdout
