"""Elaborate a PyRTL design and export it as ``<workdir>/design.v``."""

import argparse
import runpy
import sys
import traceback
from pathlib import Path

from . import TOOL_MISSING


def main(argv=None):
    ap = argparse.ArgumentParser(prog="pyrtl_build")
    ap.add_argument("--version", action="store_true")
    ap.add_argument("design", nargs="?")
    ap.add_argument("workdir", nargs="?")
    args = ap.parse_args(argv)
    try:
        import pyrtl
    except ImportError:
        print("pyrtl is not installed", file=sys.stderr)
        return TOOL_MISSING
    if args.version:
        from importlib.metadata import version

        print(f"pyrtl {version('pyrtl')}")
        return 0
    if not args.design or not args.workdir:
        ap.error("design and workdir are required")

    pyrtl.reset_working_block()
    try:
        runpy.run_path(args.design, run_name="__main__")
        out = Path(args.workdir) / "design.v"
        with out.open("w") as fh:
            pyrtl.output_to_verilog(fh)
    except SystemExit as exc:
        if exc.code not in (0, None):
            return exc.code if isinstance(exc.code, int) else 1
    except BaseException:
        # keep only frames from the design itself
        etype, value, tb = sys.exc_info()
        frames = [f for f in traceback.extract_tb(tb) if f.filename == args.design]
        print("Traceback (most recent call last):", file=sys.stderr)
        print("".join(traceback.format_list(frames)), end="", file=sys.stderr)
        print("".join(traceback.format_exception_only(etype, value)), end="", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
