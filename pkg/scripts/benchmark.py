"""Throughput of the frame engine on the 20-cycle lifetime program.

    python scripts/benchmark.py --shots 200000 --threads 1 2 4
"""

import argparse
import time

from star422.circuits import experiment_program
from star422.device import load_device
from star422.engine import run_shots


def bench(shots: int, threads: int, cycles: int, repeats: int) -> float:
    prog = experiment_program("lifetime", load_device("A"), "0000", cycles)
    run_shots(prog, 1000, 0)
    best = float("inf")
    for r in range(repeats):
        t0 = time.perf_counter()
        run_shots(prog, shots, r, threads)
        best = min(best, time.perf_counter() - t0)
    return shots / best


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--shots", type=int, default=200_000)
    p.add_argument("--cycles", type=int, default=20)
    p.add_argument("--threads", type=int, nargs="+", default=[1])
    p.add_argument("--repeats", type=int, default=3)
    a = p.parse_args()
    for t in a.threads:
        print(f"threads={t}: {bench(a.shots, t, a.cycles, a.repeats):.3g} shots/s")
