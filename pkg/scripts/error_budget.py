"""Error budget for config A under both CZ orderings and both T2 choices.

Prints one block per variant; the CSVs go to ``--out/<variant>``.

    python scripts/error_budget.py --shots 10000
"""

import argparse
from pathlib import Path

from star422.cli import main as cli

VARIANTS = {
    "default": [],
    "echo_t2": ["--t2", "echo"],
    "zx_order": ["--stab-order", "zx"],
}


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("runs/budget"))
    p.add_argument("--shots", type=int, default=10_000)
    p.add_argument("--state", default="0000")
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()
    for name, extra in VARIANTS.items():
        print(f"== {name}")
        cli(["budget", "--device", "A", "--state", a.state, "--shots", str(a.shots), "--seed", str(a.seed),
             "--out", str(a.out / name), *extra])
