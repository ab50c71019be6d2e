"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
happen; they are also collected in the terminal summary.  Tolerances are
the fixed acceptance bands and are not tuned to the model.
"""

import time
from functools import reduce

import numpy as np
import pytest

import conftest
from conftest import empirical, tvd
from star422.analysis import (
    detection_fractions,
    error_budget,
    run_lifetime,
    run_stabilizer_tomography,
    stabilizer_fidelity,
)
from star422.circuits import LIFETIME_STATES, TOMOGRAPHY_STATES, experiment_program
from star422.code422 import codeword_for_input, logical_vector
from star422.dense import dense_distribution
from star422.device import channel_params, idling_channel
from star422.engine import run_shots
from star422.shadows import (
    collect_dataset,
    fidelity_estimate,
    purity_estimate,
    sample_from_density,
    sample_settings,
    summarize,
)
from test_engine import random_program

pytestmark = pytest.mark.acceptance


class Checks:
    """Named boolean checks for one criterion, reported as a single line."""

    def __init__(self, name: str):
        self.name = name
        self.items: list[tuple[str, bool]] = []
        self.t0 = time.perf_counter()

    def add(self, label: str, ok) -> None:
        self.items.append((label, bool(ok)))

    def finish(self, budget_s: float | None = None) -> None:
        elapsed = time.perf_counter() - self.t0
        if budget_s is not None:
            self.add(f"runtime {elapsed:.1f}s < {budget_s:.0f}s", elapsed < budget_s)
        ok = all(v for _, v in self.items)
        failed = [k for k, v in self.items if not v]
        line = f"{'PASS' if ok else 'FAIL'}  {self.name}  ({elapsed:.1f}s)"
        if failed:
            line += "  failed: " + "; ".join(failed)
        print(line)
        conftest.ACCEPTANCE_LINES.append(line)
        assert ok, line


def test_c1_noiseless_invariants(ideal):
    c = Checks("C1 noiseless protocol invariants")
    eta = run_shots(experiment_program("lifetime", ideal, "0000", 1), 10_000, 1)
    from star422.analysis import postselect

    _, point = postselect(eta, "all_s_plus_one")
    c.add(f"eta_1 = {point.accepted / point.shots:.4f}", abs(point.accepted / point.shots - 0.5) <= 0.015)
    bell = run_lifetime(ideal, "bell", range(1, 6), 2000, seed=2)
    c.add("Bell eta_N = 1", np.all(bell.eta == 1.0))
    for state in LIFETIME_STATES:
        res = run_lifetime(ideal, state, range(1, 4), 2000, seed=3)
        c.add(f"{state} logical values = 1", np.allclose(res.values, 1.0))
    s = summarize(collect_dataset(ideal, "0000", 1, shots=200, seed=4), n_boot=200)
    c.add(f"F_L = {s.F_L:.4f}", abs(s.F_L - 1) <= max(3 * s.F_L_err, 1e-9))
    c.finish(5)


def test_c2_oracle_equivalence():
    c = Checks("C2 frame engine against dense oracle")
    worst = 0.0
    for k in range(50):
        prog = random_program(1000 + k)
        d = tvd(dense_distribution(prog), empirical(run_shots(prog, 100_000, k).matrix(prog.tags)))
        worst = max(worst, d)
    c.add(f"max TVD {worst:.4f} < 0.02", worst < 0.02)
    c.finish(60)


def test_c3_channel_closed_forms(config_a):
    c = Checks("C3 noise-channel closed forms")
    c.add("p_SQG(QB1) = 0.0014", abs(channel_params(config_a).sqg["QB1"] - 0.0014) < 1e-9)
    equal = idling_channel(1000.0, 1.0, 1.0)
    c.add("T1 = T2 idle = 0.15803", all(abs(p - 0.15803013970713942) < 1e-9 for p in equal))
    # same idle window with T2 = 2 T1; the exact channel leaves pz = (1 - a)^2 / 4
    pz = idling_channel(1000.0, 1.0, 2.0)[2]
    c.add(f"T2 = 2 T1 gives pz = {pz:.3e}, expected 0", abs(pz) < 1e-9)
    c.finish()


def test_c4_repeated_detection_config_a(config_a):
    c = Checks("C4 repeated detection, config A")
    results = {s: run_lifetime(config_a, s, range(1, 21), 100_000, seed=10 + i)
               for i, s in enumerate(LIFETIME_STATES)}
    for s, r in results.items():
        a = r.acceptance
        c.add(f"{s} P_S = {a.P_S:.3f} in [0.60, 0.75]", 0.60 <= a.P_S <= 0.75)
        c.add(f"{s} P_L = {a.P_L:.3f} in [0.80, 0.92]", 0.80 <= a.P_L <= 0.92)
        c.add(f"{s} log-eta R2 = {a.r2:.4f} > 0.99", a.r2 > 0.99)
        for k, f in enumerate(r.fits):
            c.add(f"{s} L{k + 1} eps = {100 * f.eps:.3f}% < 1.5%", f.eps < 0.015)
            c.add(f"{s} L{k + 1} tau = {f.tau_us:.1f}us > 80us", f.tau_us > 80)
    eps = results["0000"].fits[0].eps
    c.add(f"|00> eps_Z1 = {100 * eps:.3f}% in [0.3%, 0.9%]", 0.003 <= eps <= 0.009)
    c.finish(120)


def test_c5_shadow_estimators(ideal, config_b):
    c = Checks("C5 shadow estimators")
    s = summarize(collect_dataset(ideal, "0000", 1, shots=200, seed=5), n_boot=200)
    c.add(f"noiseless F_L = {s.F_L:.4f}", abs(s.F_L - 1) <= max(3 * s.F_L_err, 1e-9))
    c.add(f"noiseless p2_L = {s.p2_L:.4f}", abs(s.p2_L - 1) <= 0.05)
    # |0><0| on three qubits with I/2 on one: purity 1/2 by construction
    ket0 = np.array([1, 0], complex)
    rho = np.kron(reduce(np.kron, [np.outer(ket0, ket0)] * 3), np.eye(2) / 2)
    oracle = float(np.real(np.trace(rho @ rho)))
    p, _ = purity_estimate(sample_from_density(rho, sample_settings("exhaustive81"), 200, 6), n_boot=0)
    c.add(f"mixed purity {p:.4f} vs {oracle}", abs(p - oracle) <= 0.05)
    for i, state in enumerate(TOMOGRAPHY_STATES):
        ds = collect_dataset(config_b, state, 1, shots=2000, seed=100 + i)
        F, _ = fidelity_estimate(ds, logical_vector(codeword_for_input(state)), logical=True, n_boot=0)
        c.add(f"{state} F_L = {F:.3f} >= 0.95", F >= 0.95)
    c.finish(120)


def test_c6_stabilizer_tomography(ideal, config_b):
    c = Checks("C6 stabilizer tomography, config B")
    for stab in "XZ":
        rows = run_stabilizer_tomography(ideal, stab, 500, seed=0)
        c.add(f"noiseless S_{stab} exact", all(r.s_bar == r.s_ideal for r in rows))
        rows = run_stabilizer_tomography(config_b, stab, 100_000, seed=1)
        f = stabilizer_fidelity([r.s_bar for r in rows], [r.s_ideal for r in rows])
        c.add(f"S_{stab} fidelity {f:.4f} in [0.85, 0.95]", 0.85 <= f <= 0.95)
    c.finish()


def test_c7_error_budget(config_a):
    c = Checks("C7 error budget, config A")
    rows = error_budget(config_a, "0000", range(1, 11), 10_000, seed=0)
    full = rows[0]
    by = {r.suppressed: r for r in rows if r.suppressed not in ("none", "all")}
    top = sorted(by, key=lambda t: by[t].d_eps, reverse=True)[:2]
    c.add(f"top two eps contributors {top} are cz and idling", set(top) == {"cz", "idling"})
    ro = by["readout"]
    share_rej, share_eps = ro.d_rejection / full.rejection, ro.d_eps / full.eps
    c.add(f"readout share rejection {100 * share_rej:.1f}% > eps {100 * share_eps:.1f}%", share_rej > share_eps)
    c.finish(300)


def test_c8_detector_statistics(ideal, config_a, config_b):
    c = Checks("C8 detector statistics")
    for state, other in (("0000", "x"), ("++++", "z")):
        g = detection_fractions({1: run_shots(experiment_program("lifetime", config_a, state, 1), 20_000, 7)})
        v = getattr(g, other)[0, 0]
        c.add(f"{state} first-cycle sigma_{other.upper()} = {v:.3f}", abs(v - 0.5) <= 0.02)
    for dev, bound, name in ((ideal, 0.05, "noiseless"), (config_b, 0.15, "config B")):
        g = detection_fractions({1: run_shots(experiment_program("bell_lifetime", dev, "0000", 1), 50_000, 8)})
        for stab in "xz":
            v = getattr(g, stab)[0, 0]
            c.add(f"Bell {name} sigma_{stab.upper()} = {v:.3f} < {bound}", v < bound)
    c.finish()


def test_c9_determinism_and_throughput(config_a):
    c = Checks("C9 determinism and throughput")
    prog = experiment_program("lifetime", config_a, "0000", 20)
    a = run_shots(prog, 40_000, 123, threads=1)
    b = run_shots(prog, 40_000, 123, threads=4)
    c.add("identical bytes across thread counts", a.to_bytes() == b.to_bytes())
    run_shots(prog, 1000, 0)  # warm-up
    t0 = time.perf_counter()
    run_shots(prog, 100_000, 1)
    rate = 100_000 / (time.perf_counter() - t0)
    c.add(f"throughput {rate:.3g} shots/s >= 1e5", rate >= 1e5)
    c.finish()
