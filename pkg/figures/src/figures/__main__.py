"""Command line: render figure panels from a run directory.

Usage:
    python -m figures --run runs/p1 [--panel all] [--out runs/p1/figures]
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .panels import Panel, PanelSpec, SchemaError, render, render_all


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="condensate-lab-figures")
    parser.add_argument("--run", required=True, help="run directory to read")
    parser.add_argument(
        "--panel",
        default="all",
        choices=["all"] + [p.value for p in Panel],
    )
    parser.add_argument("--out", help="output directory (default <run>/figures)")
    args = parser.parse_args(argv)
    out_dir = Path(args.out) if args.out else None
    try:
        if args.panel == "all":
            paths = render_all(Path(args.run), out_dir)
        else:
            paths = render(PanelSpec(Panel(args.panel), Path(args.run), out_dir))
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
