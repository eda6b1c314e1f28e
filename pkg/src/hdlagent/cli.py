"""Command line entry point: ``hdlagent {gen,bench,profiles,normalize,summarize}``.

Exit codes: 0 success, 1 a negative result (run exhausted, IO mismatch,
invalid profile), 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import __version__
from .agent import DEFAULT_MAX_ITERATIONS, persist_record, run_top_k
from .context import AblationStage
from .errors import AmbiguousTop, HdlAgentError, IoMismatch, NameCollision, ParseError, UnknownPort
from .llm import (
    API_KEY_ENV,
    DEFAULT_TEMPERATURE,
    EchoBackend,
    HttpBackend,
    RecordingBackend,
    ReplayBackend,
    ScriptedBackend,
)
from .profile import (
    bundled_profile_names,
    bundled_profile_path,
    get_profile,
    load_profile,
    profile_from_dict,
    summarize_reference,
    validate_profile,
)

log = logging.getLogger("hdlagent")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


def parse_k(text: str) -> list[int]:
    try:
        ks = sorted({int(part) for part in text.split(",") if part.strip()})
    except ValueError:
        raise argparse.ArgumentTypeError(f"--k expects comma-separated integers, got {text!r}")
    if not ks or ks[0] < 1:
        raise argparse.ArgumentTypeError("--k values must be >= 1")
    return ks


def parse_stages(text: str) -> list[AblationStage]:
    try:
        return [AblationStage.parse(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _backend_options(p):
    g = p.add_argument_group("backend")
    g.add_argument("--backend", choices=("http", "replay", "mock"), default="http")
    g.add_argument("--endpoint", help="OpenAI-compatible base URL (http backend)")
    g.add_argument("--model", help="model name sent with every request")
    g.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    g.add_argument("--cassette", help="JSON Lines cassette for replay, or target for --record")
    g.add_argument("--record", action="store_true", help="append every http or mock call to --cassette")
    g.add_argument("--mock-responses", metavar="FILE",
                   help="JSON list of scripted replies for --backend mock (default: echo the prompt)")


def _agent_options(p):
    p.add_argument("--profile", default="verilog", help="bundled profile name or profile file")
    p.add_argument("--compile-command", help="override the profile's compile command template")
    p.add_argument("--max-iterations", type=int, default=DEFAULT_MAX_ITERATIONS)
    p.add_argument("--outdir", default="hdlagent-out")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hdlagent", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)
    # -v also works after the subcommand; SUPPRESS keeps a top-level count
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)

    gen = sub.add_parser("gen", parents=[common], help="generate code for one question")
    gen.add_argument("question", nargs="?", help="question text (or use --question-file)")
    gen.add_argument("--question-file")
    gen.add_argument("--stage", type=AblationStage.parse, default=AblationStage.FIXES)
    gen.add_argument("--k", type=int, default=1, help="independent attempts; the first passing one is printed")
    gen.add_argument("--parallelism", type=int, default=1)
    _agent_options(gen)
    _backend_options(gen)

    bench = sub.add_parser("bench", parents=[common], help="run a benchmark suite")
    bench.add_argument("suite")
    bench.add_argument("--stage", type=parse_stages, default=[AblationStage.FIXES],
                       help="stage, or comma-separated stages for an ablation sweep")
    bench.add_argument("--k", type=parse_k, default=[1], help="e.g. 1,5,10")
    bench.add_argument("--parallelism", type=int, default=1)
    bench.add_argument("--lec-command", help="equivalence check template with {golden} and {candidate}")
    bench.add_argument("--synth-command", help="synthesis template with {file}; enables QoR")
    bench.add_argument("--qor-store", help="best-known gate counts (default: OUTDIR/qor_best.json)")
    bench.add_argument("--no-figures", action="store_true")
    _agent_options(bench)
    _backend_options(bench)

    prof = sub.add_parser("profiles", parents=[common], help="list or validate HDL profiles")
    prof.add_argument("action", choices=("list", "validate"))
    prof.add_argument("path", nargs="?")

    norm = sub.add_parser("normalize", parents=[common], help="rewrite generated Verilog IO to match a golden interface")
    norm.add_argument("file")
    norm.add_argument("--convention", required=True,
                      choices=("verilog_native", "chisel_io_prefixed", "dslx_single_out", "pyrtl_named"))
    norm.add_argument("--golden", required=True)
    norm.add_argument("--top")
    norm.add_argument("--outdir", default=None, help="also write normalized.v here")

    summ = sub.add_parser("summarize", parents=[common], help="condense an HDL reference manual into a description")
    summ.add_argument("manual")
    summ.add_argument("--hdl", required=True)
    summ.add_argument("--style", choices=("default", "concise"), default="default")
    summ.add_argument("--outdir", default=None, help="also write summary.md here")
    _backend_options(summ)
    return ap


def make_backend(args):
    if args.backend == "replay":
        if not args.cassette:
            raise ConfigError("--backend replay requires --cassette")
        if not Path(args.cassette).is_file():
            raise ConfigError(f"cassette {args.cassette} not found")
        backend = ReplayBackend(args.cassette)
        backend.model = args.model or "default"
        return backend
    if args.backend == "mock":
        backend = ScriptedBackend.from_file(args.mock_responses) if args.mock_responses else EchoBackend()
        if args.model:
            backend.model = args.model
    else:
        if not args.endpoint or not args.model:
            raise ConfigError("--backend http requires --endpoint and --model")
        backend = HttpBackend(args.endpoint, args.model)
        if backend.api_key is None:
            log.warning("%s is not set; sending requests without authorization", API_KEY_ENV)
    if args.record:
        if not args.cassette:
            raise ConfigError("--record requires --cassette")
        backend = RecordingBackend(backend, args.cassette)
    return backend


def load_cli_profile(args):
    try:
        profile = get_profile(args.profile)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc))
    except HdlAgentError as exc:
        raise ConfigError(f"profile {args.profile}: {exc}")
    if args.compile_command:
        profile = dataclasses.replace(profile, compile_command=args.compile_command)
        problems = validate_profile(profile)
        if problems:
            raise ConfigError("; ".join(problems))
    return profile


def cmd_gen(args) -> int:
    if args.question_file:
        try:
            question = Path(args.question_file).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read question file: {exc}")
    else:
        question = args.question
    if not question or not question.strip():
        raise ConfigError("a question is required (inline or --question-file)")
    if args.max_iterations < 1:
        raise ConfigError("--max-iterations must be >= 1")
    if args.k < 1 or args.parallelism < 1:
        raise ConfigError("--k and --parallelism must be >= 1")
    profile = load_cli_profile(args)
    backend = make_backend(args)
    outdir = Path(args.outdir)
    records = run_top_k(
        question, profile, backend, args.stage, args.k,
        parallelism=args.parallelism, workdir=outdir / "work" / "gen",
        max_iterations=args.max_iterations,
        model=getattr(backend, "model", None), temperature=args.temperature,
    )
    for i, record in enumerate(records, 1):
        log.info("run record: %s", persist_record(record, outdir / "runs" / "gen", i))
    for record in records:
        if record.passed:
            sys.stdout.write(record.final_code.rstrip("\n") + "\n")
            return EXIT_OK
    statuses = ", ".join(r.final_status for r in records)
    print(f"hdlagent: no attempt passed ({statuses})", file=sys.stderr)
    return EXIT_FAIL


def cmd_bench(args) -> int:
    from .bench import QorStore, load_suite, run_bench
    from .plotting import plot_ablation, write_figures
    from .report import EXTENSIONS, FORMATS, render_ablation, render_report

    suite_dir = Path(args.suite)
    if not suite_dir.is_dir():
        raise ConfigError(f"suite directory {suite_dir} not found")
    if args.max_iterations < 1 or args.parallelism < 1:
        raise ConfigError("--max-iterations and --parallelism must be >= 1")
    profile = load_cli_profile(args)
    backend = make_backend(args)
    try:
        suite = load_suite(suite_dir)
    except HdlAgentError as exc:
        raise ConfigError(str(exc))
    outdir = Path(args.outdir)
    qor_store = None
    if args.synth_command:
        qor_store = QorStore(args.qor_store or outdir / "qor_best.json")
        Path(qor_store.path).parent.mkdir(parents=True, exist_ok=True)
    reports = {}
    for stage in sorted(set(args.stage)):
        stage_dir = outdir if len(args.stage) == 1 else outdir / stage.label
        report = run_bench(
            suite, profile, backend, stage, args.k, args.parallelism,
            outdir=stage_dir, max_iterations=args.max_iterations,
            lec_command=args.lec_command, synth_command=args.synth_command, qor_store=qor_store,
            model=getattr(backend, "model", None), temperature=args.temperature,
        )
        stage_dir.mkdir(parents=True, exist_ok=True)
        for fmt in FORMATS:
            (stage_dir / f"report.{EXTENSIONS[fmt]}").write_text(render_report(report, fmt), encoding="utf-8")
        if not args.no_figures:
            write_figures(report, stage_dir / "figures")
        reports[stage.label] = report
        if report.interrupted:
            print("hdlagent: interrupted, partial report written", file=sys.stderr)
            return 130
        ks = ", ".join(f"pass@{k}={v}" for k, v in sorted(report.pass_at_k.items()))
        print(f"{stage.label}: {ks} of {report.tests_evaluated} tests", file=sys.stderr)
    if len(reports) > 1:
        (outdir / "ablation.md").write_text(render_ablation(reports), encoding="utf-8")
        if not args.no_figures:
            plot_ablation(reports, outdir / "ablation.png")
    return EXIT_OK


def cmd_profiles(args) -> int:
    if args.action == "list":
        for name in bundled_profile_names():
            print(f"{name}\t{bundled_profile_path(name)}")
        return EXIT_OK
    targets = [args.path] if args.path else [str(bundled_profile_path(n)) for n in bundled_profile_names()]
    status = EXIT_OK
    for target in targets:
        problems = _profile_diagnostics(target)
        if problems:
            status = EXIT_FAIL
            for p in problems:
                print(f"{target}: {p}")
        else:
            print(f"{target}: ok")
    return status


def _profile_diagnostics(target) -> list[str]:
    import json

    path = Path(target)
    if not path.is_file():
        if target in bundled_profile_names():
            path = bundled_profile_path(target)
        else:
            raise ConfigError(f"profile {target} not found")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        return validate_profile(profile_from_dict(data))
    except json.JSONDecodeError as exc:
        return [f"parse error: {exc}"]
    except HdlAgentError as exc:
        return [str(exc)]


def cmd_normalize(args) -> int:
    from .verilog_io import normalize, parse_interface

    try:
        source = Path(args.file).read_text(encoding="utf-8")
        golden_text = Path(args.golden).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(exc))
    try:
        golden = parse_interface(golden_text)
        result = normalize(source, args.convention, golden, top=args.top)
    except IoMismatch as exc:
        print(f"hdlagent: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ParseError, AmbiguousTop, NameCollision, UnknownPort) as exc:
        print(f"hdlagent: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    sys.stdout.write(result)
    if args.outdir:
        Path(args.outdir).mkdir(parents=True, exist_ok=True)
        (Path(args.outdir) / "normalized.v").write_text(result, encoding="utf-8")
    return EXIT_OK


def cmd_summarize(args) -> int:
    try:
        manual = Path(args.manual).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read manual: {exc}")
    if not manual.strip():
        raise ConfigError("manual file is empty")
    backend = make_backend(args)
    text = summarize_reference(manual, args.hdl, args.style, backend,
                               model=getattr(backend, "model", None), temperature=args.temperature)
    sys.stdout.write(text.rstrip("\n") + "\n")
    if args.outdir:
        Path(args.outdir).mkdir(parents=True, exist_ok=True)
        (Path(args.outdir) / "summary.md").write_text(text, encoding="utf-8")
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "bench": cmd_bench,
    "profiles": cmd_profiles,
    "normalize": cmd_normalize,
    "summarize": cmd_summarize,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"hdlagent: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
