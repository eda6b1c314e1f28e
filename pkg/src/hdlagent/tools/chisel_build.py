"""Emit Verilog from a Chisel design with scala-cli.

The last ``Module`` subclass in the design (or ``--top``) is elaborated through
CIRCT; the output lands in the work directory.
"""

import argparse
import re
import shutil
import subprocess
import sys
from pathlib import Path

from . import TOOL_MISSING

CHISEL_VERSION = "6.5.0"
SCALA_VERSION = "2.13.14"

_MODULE_CLASS = re.compile(r"\bclass\s+([A-Za-z_]\w*)\s*(?:\[[^\]]*\])?\s*(?:\(\s*\))?\s*extends\s+(?:Raw)?Module\b")

EMIT_TEMPLATE = """\
object HdlAgentEmit extends App {{
  circt.stage.ChiselStage.emitSystemVerilogFile(
    new {top},
    Array("--target-dir", "{outdir}"),
    Array("--disable-all-randomization", "--strip-debug-info", "-disable-layers=Verification")
  )
}}
"""


def find_top(source):
    names = _MODULE_CLASS.findall(source)
    return names[-1] if names else None


def main(argv=None):
    ap = argparse.ArgumentParser(prog="chisel_build")
    ap.add_argument("--version", action="store_true")
    ap.add_argument("--top")
    ap.add_argument("design", nargs="?")
    ap.add_argument("workdir", nargs="?")
    args = ap.parse_args(argv)
    scala_cli = shutil.which("scala-cli")
    if scala_cli is None:
        print("scala-cli not found on PATH", file=sys.stderr)
        return TOOL_MISSING
    if args.version:
        return subprocess.run([scala_cli, "--version"]).returncode
    if not args.design or not args.workdir:
        ap.error("design and workdir are required")

    design = Path(args.design)
    workdir = Path(args.workdir)
    top = args.top or find_top(design.read_text())
    if top is None:
        print("error: no class extending Module found", file=sys.stderr)
        return 1
    emit = workdir / "HdlAgentEmit.scala"
    emit.write_text(EMIT_TEMPLATE.format(top=top, outdir=workdir.resolve()))
    cmd = [
        scala_cli, "run", str(design), str(emit),
        "--server=false",
        "--scala", SCALA_VERSION,
        "--dep", f"org.chipsalliance::chisel:{CHISEL_VERSION}",
        "--compiler-plugin", f"org.chipsalliance:::chisel-plugin:{CHISEL_VERSION}",
        "--main-class", "HdlAgentEmit",
    ]
    return subprocess.run(cmd, cwd=workdir).returncode


if __name__ == "__main__":
    sys.exit(main())
