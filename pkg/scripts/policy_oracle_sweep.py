"""Compare PDP evaluation against the brute-force oracle on the small universe.

    python3 scripts/policy_oracle_sweep.py [--pool 100] [--seed 0]

Rules and single policies are enumerated exhaustively; two-policy PDPs are
taken from a pool of policies with distinct decision vectors.
"""
from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from oracles import sweep_universe  # noqa: E402


@dataclass(frozen=True)
class SweepConfig:
    pool: int = 100
    seed: int = 0


def sweep(cfg: SweepConfig) -> int:
    start = time.perf_counter()
    result = sweep_universe(cfg.pool, cfg.seed)
    elapsed = time.perf_counter() - start
    for key, value in result["counts"].items():
        print(f"{key:>24}: {value}")
    print(f"{'mismatches':>24}: {len(result['mismatches'])}")
    print(f"{'seconds':>24}: {elapsed:.2f}")
    for m in result["mismatches"][:10]:
        print("  ", m)
    return 1 if result["mismatches"] else 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pool", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    sys.exit(sweep(SweepConfig(**vars(ap.parse_args()))))
