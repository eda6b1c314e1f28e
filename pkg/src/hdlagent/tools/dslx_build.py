"""DSLX to Verilog through the XLS toolchain.

Runs the interpreter (type checking and tests), IR conversion, optimization
and combinational code generation. Binaries are looked up in ``$XLS_BIN``
and then on PATH.
"""

import argparse
import os
import re
import shutil
import subprocess
import sys
from pathlib import Path

from . import TOOL_MISSING

TOOLS = ("interpreter_main", "ir_converter_main", "opt_main", "codegen_main")


def locate(name):
    xls_bin = os.environ.get("XLS_BIN")
    if xls_bin and (Path(xls_bin) / name).is_file():
        return str(Path(xls_bin) / name)
    return shutil.which(name)


def find_top(source):
    """Last non-test function in the file."""
    names = []
    test_next = False
    for line in source.splitlines():
        s = line.strip()
        if s.startswith("#[test"):
            test_next = True
            continue
        m = re.match(r"(?:pub\s+)?fn\s+([A-Za-z_]\w*)", s)
        if m:
            if not test_next:
                names.append(m.group(1))
            test_next = False
    return names[-1] if names else None


def run(cmd, stdout=None):
    proc = subprocess.run(cmd, stdout=stdout or subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr)
        if stdout is None and proc.stdout:
            sys.stderr.write(proc.stdout)
    return proc.returncode


def main(argv=None):
    ap = argparse.ArgumentParser(prog="dslx_build")
    ap.add_argument("--version", action="store_true")
    ap.add_argument("--top")
    ap.add_argument("design", nargs="?")
    ap.add_argument("workdir", nargs="?")
    args = ap.parse_args(argv)
    paths = {name: locate(name) for name in TOOLS}
    missing = [n for n, p in paths.items() if p is None]
    if missing:
        print(f"XLS tools not found: {', '.join(missing)}", file=sys.stderr)
        return TOOL_MISSING
    if args.version:
        return subprocess.run([paths["interpreter_main"], "--version"]).returncode
    if not args.design or not args.workdir:
        ap.error("design and workdir are required")

    design = Path(args.design)
    workdir = Path(args.workdir)
    top = args.top or find_top(design.read_text())
    if top is None:
        print("error: no function found in DSLX source", file=sys.stderr)
        return 1
    ir, opt_ir = workdir / "design.ir", workdir / "design.opt.ir"
    rc = run([paths["interpreter_main"], str(design)])
    if rc:
        return rc
    with ir.open("w") as fh:
        rc = run([paths["ir_converter_main"], f"--top={top}", str(design)], stdout=fh)
    if rc:
        return rc
    with opt_ir.open("w") as fh:
        rc = run([paths["opt_main"], str(ir)], stdout=fh)
    if rc:
        return rc
    return run([
        paths["codegen_main"], str(opt_ir),
        "--generator=combinational",
        "--delay_model=unit",
        "--use_system_verilog=false",
        f"--output_verilog_path={workdir / 'design.v'}",
    ])


if __name__ == "__main__":
    sys.exit(main())
