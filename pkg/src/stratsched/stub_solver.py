"""A tiny fake solver for exercising the subprocess runner.

Behaviour is controlled by E-style arguments::

    --sleep=<seconds>   how long to work before answering (default 0)
    --mode=<mode>       succeed | fail | garbage | hang | hang-tree
    --cpu-limit=<s>     accepted and honoured like a real solver's time flag

``succeed`` prints the success marker and exits 0, ``fail`` exits 1,
``garbage`` exits 0 with unrelated output, ``hang`` never returns and
``hang-tree`` additionally forks a child that never returns either. The last
positional argument is the problem path.
"""
from __future__ import annotations

import os
import sys
import time

MARKER = "SZS status Theorem"


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    opts = {}
    for a in args:
        if a.startswith("--") and "=" in a:
            k, v = a[2:].split("=", 1)
            opts[k] = v
    sleep = float(opts.get("sleep", 0))
    mode = opts.get("mode", "succeed")
    limit = float(opts["cpu-limit"]) if "cpu-limit" in opts else None

    if mode in ("hang", "hang-tree"):
        if mode == "hang-tree" and os.fork() == 0:
            while True:
                time.sleep(1)
        while True:
            time.sleep(1)
    if limit is not None and sleep > limit:
        time.sleep(limit)
        print("SZS status Timeout")
        return 1
    time.sleep(sleep)
    if mode == "succeed":
        print(MARKER)
        return 0
    if mode == "garbage":
        print("%% nothing to see here")
        return 0
    print("SZS status GaveUp")
    return 1


if __name__ == "__main__":
    sys.exit(main())
