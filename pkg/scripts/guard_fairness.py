"""Measure how evenly the scheduler picks between two always-ready guards.

Runs tests/corpus/run/coin.gs over a sweep of seeds and prints, per seed
and overall, the share of selections that went to the first arm.
"""

import argparse
from dataclasses import dataclass
from pathlib import Path

from gustl.codegen import compile_source
from gustl.fabric import Fabric, RunConfig

COIN = Path(__file__).resolve().parents[1] / "tests" / "corpus" / "run" / "coin.gs"


@dataclass
class FairnessConfig:
    seeds: int = 10
    first_seed: int = 0
    flips: int = 1000  # selections per seed
    tolerance: float = 0.02


def measure(cfg: FairnessConfig):
    image = compile_source(COIN.read_bytes())
    rows = []
    for seed in range(cfg.first_seed, cfg.first_seed + cfg.seeds):
        words = Fabric({"coin": image}, RunConfig(seed=seed)).run("coin", cfg.flips).output_words()
        rows.append((seed, len(words), words.count(0)))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    for f in FairnessConfig.__dataclass_fields__.values():
        ap.add_argument("--" + f.name.replace("_", "-"), type=type(f.default), default=f.default)
    cfg = FairnessConfig(**vars(ap.parse_args()))
    rows = measure(cfg)
    for seed, n, zeros in rows:
        print(f"seed {seed:4d}: {zeros:5d}/{n} first arm ({zeros / n:.3f})")
    total = sum(n for _, n, _ in rows)
    zeros = sum(z for _, _, z in rows)
    share = zeros / total
    verdict = "within" if abs(share - 0.5) <= cfg.tolerance else "OUTSIDE"
    print(f"overall: {zeros}/{total} = {share:.4f} ({verdict} 0.5 +- {cfg.tolerance})")


if __name__ == "__main__":
    main()
