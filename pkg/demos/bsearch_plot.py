"""Watch a binary search converge on the wrong index.

The buggy search updates `top := mid` and stops at `bottom < top`, so it
never inspects the last candidate.  A point plot of bottom, mid and top at
each assignment shows the interval collapsing onto 8; the corrected search
settles on 7.
"""

import sys
import tempfile
from pathlib import Path

from ufomon.cli import main

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def show(program: str, out: Path) -> None:
    print(f"== {program}")
    main(["run", "--rules", str(CORPUS / "bsearch_plot.ufo"),
          "--program", str(CORPUS / program), "--plot-dir", str(out)])
    rows = (out / "1.csv").read_text().splitlines()[1:]
    mids = [r.split(",")[2] for r in rows if r.startswith("1,")]
    print(f"mid after each assignment: {' '.join(mids)}")
    print(f"plot written to {out / '1.svg'}\n")


if __name__ == "__main__":
    base = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
    show("bsearch_buggy.mtl", base / "buggy")
    show("bsearch_fixed.mtl", base / "fixed")
