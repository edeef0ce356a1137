"""Run the ping-pong pair under several seeds and summarise each run.

Shows that the trace depends on the seed only through guard choices while
the exchanged values and the token balance do not.
"""

import argparse
import hashlib
from pathlib import Path

from gustl.codegen import compile_source
from gustl.fabric import Fabric, RunConfig

RUN = Path(__file__).resolve().parents[1] / "tests" / "corpus" / "run"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[42, 42, 43, 44])
    ap.add_argument("--capacity", type=int, default=8)
    ap.add_argument("--show-trace", action="store_true")
    args = ap.parse_args()

    store = {n: compile_source((RUN / f"{n}.gs").read_bytes()) for n in ("ping", "pong")}
    for seed in args.seeds:
        fabric = Fabric(store, RunConfig(seed=seed, capacity=args.capacity, trace=True))
        fabric.start("ping")
        worst = 0
        while fabric.advance():
            worst = max(worst, abs(fabric.token_balance()))
        report = fabric.report()
        digest = hashlib.sha256("\n".join(report.trace).encode()).hexdigest()[:16]
        idle = sum(" guard state=0 arm=1 " in ln for ln in report.trace)
        print(f"seed {seed}: {report.outcome} steps={report.steps} output={report.output_words()} "
              f"idle-spins={idle} max|balance|={worst} trace={digest}")
        if args.show_trace:
            print("\n".join(report.trace))


if __name__ == "__main__":
    main()
