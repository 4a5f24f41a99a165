"""CLI: reporter <run_dir> --out <dir>."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .artifacts import InvalidArtifactError, MissingArtifactError
from .render import render_report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="reporter",
        description="Render figures and report.md from a wkg2d run "
                    "directory; consumes artifacts only.")
    parser.add_argument("run_dir", type=Path)
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (default: <run_dir>/report)")
    args = parser.parse_args(argv)
    out = args.out if args.out is not None else args.run_dir / "report"
    try:
        result = render_report(args.run_dir, out)
    except (MissingArtifactError, InvalidArtifactError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"{len(result.figures)} figure files, report.md -> {out}")
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
