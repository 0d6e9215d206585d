"""How much a nested rule keeps in memory.

The rule asks that every pass of a loop calls step().  The live monitor
keeps a stack of open passes and a list of candidate calls, and throws the
list away whenever the stack empties, so its peak size stays at one call
however long the loop runs.  The post-mortem evaluator instead holds the
whole trace and pairs every pass with every call, which is why the replay
below uses the short loop.
"""

import io
import tempfile
import time
from pathlib import Path

from ufomon.cli import main

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
RULES = str(CORPUS / "loop10k.ufo")


def live(program: str, dump: Path) -> None:
    err = io.StringIO()
    out = io.StringIO()
    t0 = time.perf_counter()
    main(["run", "--rules", RULES, "--program", str(CORPUS / program), "--stats",
          "--trace-out", str(dump)], out=out, err=err)
    lines = out.getvalue().splitlines()
    print(f"== live run of {program}: {time.perf_counter() - t0:.2f}s")
    print(f"{len(lines) - 2} passes reported, then: {lines[-2]} / {lines[-1]}")
    print(err.getvalue().strip())


if __name__ == "__main__":
    tmp = Path(tempfile.mkdtemp())
    live("loop10k.mtl", tmp / "long.evt")
    live("loop_small.mtl", tmp / "short.evt")
    out = io.StringIO()
    t0 = time.perf_counter()
    main(["replay", "--rules", RULES, "--trace", str(tmp / "short.evt")], out=out)
    print(f"== post-mortem replay of loop_small.mtl: {time.perf_counter() - t0:.2f}s")
    print(out.getvalue().strip())
