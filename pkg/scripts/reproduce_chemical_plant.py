"""Run and check both bundled chemical-plant scenarios and print the reports.

    python3 scripts/reproduce_chemical_plant.py [--workers N] [--format plain|json-lines]
"""
from __future__ import annotations

import argparse
import time
from dataclasses import dataclass

from coalcheck import scenarios
from coalcheck.cli import main


@dataclass(frozen=True)
class Config:
    workers: int = 1
    fmt: str = "plain"


def invocations(cfg: Config) -> list[list[str]]:
    v1 = str(scenarios.path("chemical_plant_v1"))
    v2 = str(scenarios.path("chemical_plant_v2"))
    common = ["--workers", str(cfg.workers), "--format", cfg.fmt]
    return [
        ["validate", v1],
        ["run", v1],
        ["check", v1, *common],
        ["validate", v2],
        ["run", v2],
        ["run", v2, "--variant", "relaxed"],
        ["check", v2, "--variant", "all", *common],
        ["eval", v1, "--agent", "compB", "--coalition", "coal", "--action", "READ", "--info", "PP"],
    ]


def reproduce(cfg: Config) -> None:
    for argv in invocations(cfg):
        shown = " ".join(a if "/" not in a else a.rsplit("/", 1)[1] for a in argv)
        print(f"$ coalcheck {shown}")
        start = time.perf_counter()
        code = main(argv)
        print(f"[exit {code}, {time.perf_counter() - start:.3f}s]\n")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--format", dest="fmt", choices=("plain", "json-lines"), default="plain")
    reproduce(Config(**vars(ap.parse_args())))
