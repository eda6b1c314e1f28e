"""Thin build wrappers invoked by the bundled profile compile commands.

Each wrapper takes ``<design file> <workdir>``, exits 0 on success, non-zero
with the tool's diagnostics on failure, and 127 when the toolchain is absent.
"""

TOOL_MISSING = 127
