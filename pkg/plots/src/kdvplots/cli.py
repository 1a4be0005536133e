"""Figure rendering front end for completed run directories.

    scatter-plots <run-dir> [--kinds ...] [--out DIR]

Consumes only the plot_data/ CSV exports of a run directory (written
by `scatter export-plots`) and renders the requested figure kinds as
PNG files, by default into <run-dir>/figures.  Exit codes: 0 success,
2 unusable inputs (missing export directory, file, or column).
"""

import argparse
import sys
from pathlib import Path

from kdvplots.render import KINDS, SpecError, plot_spec, render

__all__ = ["main"]


def _parser():
    ap = argparse.ArgumentParser(
        prog="scatter-plots",
        description="Render static figures from a scattering run's "
                    "exported plot data")
    ap.add_argument("run_dir", help="run directory holding plot_data/")
    ap.add_argument("--kinds", nargs="+", default=list(KINDS),
                    choices=KINDS, metavar="KIND",
                    help=f"figure kinds to render (default: all; "
                         f"kinds: {', '.join(KINDS)})")
    ap.add_argument("--out", default=None,
                    help="output directory (default: <run-dir>/figures)")
    return ap


def main(argv=None) -> int:
    ns = _parser().parse_args(argv)
    run = Path(ns.run_dir)
    data = run / "plot_data"
    if not data.is_dir():
        print(f"error: {data} not found; run `scatter export-plots` "
              "on the run directory first", file=sys.stderr)
        return 2
    out = Path(ns.out) if ns.out is not None else run / "figures"
    try:
        for kind in ns.kinds:
            print(render(plot_spec(kind, data, out)))
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
