"""Regenerate the lifetime, tomography and stabilizer tables in one go.

Each table lands in its own subdirectory of ``--out`` together with a
manifest.  Shot counts default to the full-size runs; pass ``--quick`` for
a smoke run.

    python scripts/reproduce_tables.py --out runs/tables
"""

import argparse
from pathlib import Path

from star422.cli import main as cli


def run(out: Path, quick: bool, seed: int) -> None:
    s = (lambda full, small: str(small if quick else full))
    jobs = [
        ["stabilizer-tomo", "--device", "B", "--shots", s(100_000, 2000)],
        ["lifetime", "--device", "A", "--cycles", "1-20", "--shots", s(100_000, 5000)],
        ["tomography", "--device", "B", "--shots", s(2000, 100), "--n-boot", s(1000, 50)],
        ["bell", "--device", "B", "--cycles", "1-20", "--shots", s(100_000, 5000),
         "--tomo-cycles", "0,4,8,15", "--tomo-shots", s(2000, 100), "--n-boot", s(1000, 50)],
    ]
    for args in jobs:
        cli(args + ["--seed", str(seed), "--out", str(out / args[0])])


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("runs/tables"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true")
    a = p.parse_args()
    run(a.out, a.quick, a.seed)
