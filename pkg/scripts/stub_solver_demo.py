"""End-to-end run through real subprocesses, using the bundled stub prover.

The stub's own options form the parameter space: ``--mode`` decides whether
it proves anything and ``--sleep`` how long it takes. The search should
settle on ``--mode=succeed`` with the shortest sleep.
"""
import argparse
import stat
import subprocess
import sys
import tempfile
from pathlib import Path

ATP_INI = """\
[ATP Settings]
binary = {binary}
time = --cpu-limit=
problem =
strategy = E
default =
success = SZS status Theorem

[Boolean Parameters]

[List Parameters]
--mode = fail,succeed
--sleep = 0.6,0.3,0.1
"""

SEEDS_INI = """\
[Slow]
--mode = succeed
--sleep = 0.6
"""

SETUP_INI = """\
[Settings]
ATP = ATP.ini
ResultsDir = results
ResultsPickle = models
Cores = 2

[Search]
Time = 2
Problems = problems.txt
FullTime = True
Walks = 3
WalkLength = 1

[Learn]
Features = Builtin
StrategiesFile = strategies.ini
StartStrategies = 0
Tolerance = 0.05

[Run]
MinRunTime = 0.05
"""


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()
    root = args.out or Path(tempfile.mkdtemp(prefix="stub_demo_"))
    root.mkdir(parents=True, exist_ok=True)
    binary = root / "stub-prover"
    binary.write_text(f"#!{sys.executable}\nimport sys\nfrom stratsched.stub_solver import main\n"
                      "sys.exit(main())\n")
    binary.chmod(binary.stat().st_mode | stat.S_IXUSR)
    problems = []
    for i in range(4):
        p = root / f"P{i}.p"
        p.write_text("fof(a, axiom, p).\n" * (i + 1))
        problems.append(str(p))
    (root / "problems.txt").write_text("\n".join(problems) + "\n")
    (root / "ATP.ini").write_text(ATP_INI.format(binary=binary))
    (root / "strategies.ini").write_text(SEEDS_INI)
    (root / "setup.ini").write_text(SETUP_INI)

    base = [sys.executable, "-m", "stratsched", "--config", str(root / "setup.ini")]
    for cmd in (["find-strategies"], ["learn"], ["run", "-t", "5", "-p", problems[0]]):
        print("$ stratsched", " ".join(cmd), flush=True)
        proc = subprocess.run(base + cmd)
        if proc.returncode not in (0, 7):
            raise SystemExit(proc.returncode)
    print("\npreselected strategies:")
    print((root / "results" / "strategies.ini").read_text())
    print(f"artifacts in {root}")


if __name__ == "__main__":
    main()
