"""Command-line front end: one subcommand per experiment.

Each run writes CSV tables and a ``manifest.json`` (configuration, device
digest, seed, package versions, headline results) into ``--out``.
``--save-shots`` additionally stores every raw ShotBatch.  Rates are
reported in percent and times in microseconds.

Examples
--------
::

    star422 lifetime --device A --cycles 1-20 --shots 100000 --out runs/lifetime
    star422 tomography --device B --states 0000,++++ --shots 2000
    star422 bell --shots-policy proportional --tomo-cycles 0,4,8,15
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import (
    SIGMA_VARIANTS,
    bell_probs,
    detection_fractions,
    error_budget,
    fit_decay,
    postselect,
    run_lifetime,
    run_stabilizer_tomography,
    stabilizer_fidelity,
)
from .circuits import LIFETIME_STATES, TOMOGRAPHY_STATES, experiment_program
from .code422 import codeword_for_input, label_eigenvalues
from .device import ERROR_TYPES, DeviceModel, load_device
from .engine import derive_seed, run_shots
from .shadows import collect_dataset, estimate_density, sample_settings, summarize

log = logging.getLogger("star422")

COMMANDS = ("stabilizer-tomo", "lifetime", "tomography", "bell", "budget", "detectors")
DEFAULT_DEVICE = {"stabilizer-tomo": "B", "lifetime": "A", "tomography": "B", "bell": "B",
                  "budget": "A", "detectors": "A"}
DEFAULT_SHOTS = {"stabilizer-tomo": 100_000, "lifetime": 100_000, "tomography": 2000, "bell": 100_000,
                 "budget": 10_000, "detectors": 10_000}
DEFAULT_CYCLES = {"stabilizer-tomo": "1", "lifetime": "1-20", "tomography": "1", "bell": "1-20",
                  "budget": "1-10", "detectors": "1-10"}
PROPORTIONAL_SHOTS = 5000  # shots per cycle under the proportional policy


@dataclass
class RunConfig:
    command: str
    device: str
    states: list[str]
    cycles: list[int]
    shots: int
    shots_policy: str = "fixed"
    seed: int = 0
    out: str = "runs"
    threads: int = 1
    t2: str = "star"
    stab_order: str = "xz"
    sigma: str = "composed"
    save_shots: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.shots <= 0:
            raise ValueError("shots must be positive")
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")

    def shots_for(self, n: int) -> int:
        return PROPORTIONAL_SHOTS * max(n, 1) if self.shots_policy == "proportional" else self.shots

    def load_device(self) -> DeviceModel:
        return load_device(self.device).with_options(t2_choice=self.t2, stab_order=self.stab_order)


def parse_cycles(text: str) -> list[int]:
    """``"1-20"``, ``"0,4,8"`` or mixtures like ``"1-3,10"``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = (int(x) for x in part.split("-", 1))
            if hi < lo:
                raise ValueError(f"empty cycle range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    if not out or min(out) < 0:
        raise ValueError(f"invalid cycle list {text!r}")
    return sorted(set(out))


def eigen_label(label: str) -> str:
    """Operator-eigenvalue form of a codeword label, e.g. ``01`` -> ``(-1,+1)``."""
    return "({:+d},{:+d})".format(*label_eigenvalues(label))


# ---------------------------------------------------------------------------
# output helpers


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return v


def device_digest(device: DeviceModel) -> str:
    return hashlib.sha256(json.dumps(device.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def write_manifest(cfg: RunConfig, device: DeviceModel, results: dict, elapsed: float) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": cfg.command,
        "config": asdict(cfg),
        "device": device.to_dict(),
        "device_digest": device_digest(device),
        "seed": cfg.seed,
        "versions": {"star422": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "elapsed_s": round(elapsed, 3),
        "results": results,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, default=_json_default))
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _save_batches(cfg: RunConfig, tag: str, batches: dict) -> None:
    if not cfg.save_shots:
        return
    d = Path(cfg.out) / "shots"
    d.mkdir(parents=True, exist_ok=True)
    for N, batch in batches.items():
        batch.save(d / f"{tag}_N{N}.s422")


def _pct(x: float) -> float:
    return 100.0 * x


# ---------------------------------------------------------------------------
# subcommands


def cmd_stabilizer_tomo(cfg: RunConfig) -> dict:
    device = cfg.load_device()
    stabs = "XZ" if cfg.extra.get("stabilizer", "both") == "both" else cfg.extra["stabilizer"]
    rows, fids = [], {}
    for k, stab in enumerate(stabs):
        res = run_stabilizer_tomography(device, stab, cfg.shots, derive_seed(cfg.seed, k), cfg.threads)
        fids[stab] = stabilizer_fidelity([r.s_bar for r in res], [r.s_ideal for r in res])
        rows += [(stab, r.psi_in, r.s_ideal, r.s_bar, r.s_err) for r in res]
        print(f"S_{stab}: average stabilizer fidelity {_pct(fids[stab]):.2f}%")
    write_csv(Path(cfg.out) / "stabilizer_tomo.csv", ["stabilizer", "psi_in", "s_ideal", "s_bar", "s_err"], rows)
    return {"fidelity_pct": {s: _pct(f) for s, f in fids.items()}}


def cmd_lifetime(cfg: RunConfig) -> dict:
    device = cfg.load_device()
    table, series, summary = [], [], {}
    for i, state in enumerate(cfg.states):
        res = run_lifetime(device, state, cfg.cycles, cfg.shots_for, derive_seed(cfg.seed, i), cfg.threads,
                           keep_batches=cfg.save_shots)
        _save_batches(cfg, f"lifetime_{state}", res.batches)
        acc = res.acceptance
        for k, fit in enumerate(res.fits):
            op = f"{res.basis}{k + 1}"
            table.append((state, res.label, eigen_label(res.label), res.basis, op, _pct(fit.eps),
                          _pct(fit.eps_err), fit.tau_us, fit.tau_err_us, fit.r2, acc.P_S, acc.P_L))
            print(f"{state} -> |{res.label}>_L {eigen_label(res.label)}  eps_{op} = {_pct(fit.eps):.3f} "
                  f"+- {_pct(fit.eps_err):.3f}%  tau = {fit.tau_us:.1f} +- {fit.tau_err_us:.1f} us")
        for j, N in enumerate(res.cycles):
            series.append((state, int(N), res.shots[j], res.accepted[j], res.eta[j],
                           np.sqrt(res.eta[j] * (1 - res.eta[j]) / res.shots[j]),
                           res.values[0, j], res.errors[0, j], res.values[1, j], res.errors[1, j]))
        summary[state] = {"P_S": acc.P_S, "P_L": acc.P_L, "r2": acc.r2,
                          "eps_pct": [_pct(f.eps) for f in res.fits], "tau_us": [f.tau_us for f in res.fits]}
        print(f"{state}: P_S = {acc.P_S:.4f}  P_L = {acc.P_L:.4f}  R2 = {acc.r2:.4f}")
    write_csv(Path(cfg.out) / "lifetime_table.csv",
              ["psi_in", "label", "eigenvalues", "basis", "operator", "eps_pct", "eps_err_pct", "tau_us",
               "tau_err_us", "r2", "P_S", "P_L"], table)
    write_csv(Path(cfg.out) / "lifetime_series.csv",
              ["psi_in", "N", "shots", "accepted", "eta", "eta_err", "value_L1", "err_L1", "value_L2",
               "err_L2"], series)
    return summary


def cmd_tomography(cfg: RunConfig) -> dict:
    device = cfg.load_device()
    n_boot = cfg.extra.get("n_boot", 1000)
    mode = cfg.extra.get("settings", "exhaustive81")
    rows, summary = [], {}
    for i, state in enumerate(cfg.states):
        for N in cfg.cycles:
            settings = sample_settings(mode, cfg.extra.get("n_u"), derive_seed(cfg.seed, i, N, 1))
            ds = collect_dataset(device, state, N, settings, cfg.shots, derive_seed(cfg.seed, i, N), cfg.threads)
            s = summarize(ds, n_boot=n_boot, seed=cfg.seed)
            target = s.target if state == "bell" else f"{s.target} {eigen_label(s.target)}"
            rows.append((state, target, N, s.F_L, s.F_L_err, s.p2_L, s.p2_L_err, s.p2_phy, s.p2_phy_err,
                         s.P_L, s.P_L_err, s.P_S))
            summary[f"{state}_N{N}"] = asdict(s)
            d = Path(cfg.out) / "density"
            d.mkdir(parents=True, exist_ok=True)
            estimate_density(ds, n_boot=0).save(d / f"{state}_N{N}.json")
            if cfg.save_shots:
                ds.save(d / f"{state}_N{N}_dataset.json")
            print(f"{state} -> {target} N={N}: F_L = {s.F_L:.4f} +- {s.F_L_err:.4f}  p2_L = {s.p2_L:.3f}  "
                  f"p2_phy = {s.p2_phy:.3f}  P_L = {s.P_L:.3f}  P_S = {s.P_S:.3f}")
    write_csv(Path(cfg.out) / "tomography_table.csv",
              ["psi_in", "psi_target", "N", "F_L", "F_L_err", "p2_L", "p2_L_err", "p2_phy", "p2_phy_err",
               "P_L", "P_L_err", "P_S"], rows)
    return summary


def cmd_bell(cfg: RunConfig) -> dict:
    device = cfg.load_device()
    Ns = [N for N in cfg.cycles if N >= 1]
    res = run_lifetime(device, "bell", Ns, cfg.shots_for, cfg.seed, cfg.threads, keep_batches=True)
    _save_batches(cfg, "bell", res.batches)
    rows = []
    for j, N in enumerate(res.cycles):
        batch = res.batches[int(N)]
        mask, _ = postselect(batch)
        p = bell_probs(batch, mask) if mask.any() else dict.fromkeys(("00", "01", "10", "11", "00+11"), np.nan)
        rows.append((int(N), res.shots[j], res.accepted[j], res.eta[j], p["00"], p["01"], p["10"], p["11"],
                     p["00+11"]))
    write_csv(Path(cfg.out) / "bell_series.csv",
              ["N", "shots", "accepted", "eta", "p00", "p01", "p10", "p11", "p00_plus_11"], rows)
    fit = res.fits[0]
    acc = res.acceptance
    out = {"P_S": acc.P_S, "P_L": acc.P_L}
    print(f"bell: P_S = {acc.P_S:.4f}  P_L = {acc.P_L:.4f}")
    if fit is not None:
        print(f"bell: eps = {_pct(fit.eps):.3f} +- {_pct(fit.eps_err):.3f}%  tau = {fit.tau_us:.1f} us")
        out.update(eps_pct=_pct(fit.eps), eps_err_pct=_pct(fit.eps_err), tau_us=fit.tau_us)

    tomo_cycles = cfg.extra.get("tomo_cycles", [])
    if tomo_cycles:
        tshots = cfg.extra.get("tomo_shots", 2000)
        trows, F = [], []
        for N in tomo_cycles:
            ds = collect_dataset(device, "bell", N, None, tshots, derive_seed(cfg.seed, N, 2), cfg.threads)
            s = summarize(ds, n_boot=cfg.extra.get("n_boot", 1000), seed=cfg.seed)
            F.append(s.F_L)
            trows.append((N, s.F_L, s.F_L_err, s.p2_L, s.p2_L_err, s.p2_phy, s.p2_phy_err, s.P_L, s.P_S))
            print(f"bell tomography N={N}: F_L = {s.F_L:.4f} +- {s.F_L_err:.4f}  p2_L = {s.p2_L:.3f}  "
                  f"p2_phy = {s.p2_phy:.3f}")
        write_csv(Path(cfg.out) / "bell_tomography.csv",
                  ["N", "F_L", "F_L_err", "p2_L", "p2_L_err", "p2_phy", "p2_phy_err", "P_L", "P_S"], trows)
        if len(tomo_cycles) >= 3:
            tf = fit_decay(tomo_cycles, F, None, device.t_cycle_us)
            out.update(tomo_eps_pct=_pct(tf.eps), tomo_tau_us=tf.tau_us, tomo_r2=tf.r2)
            print(f"bell tomography: eps = {_pct(tf.eps):.3f} +- {_pct(tf.eps_err):.3f}%  "
                  f"tau = {tf.tau_us:.1f} us  R2 = {tf.r2:.3f}")
    return out


def cmd_budget(cfg: RunConfig) -> dict:
    device = cfg.load_device()
    state = cfg.states[0]
    rows = error_budget(device, state, cfg.cycles, cfg.shots, cfg.seed, ERROR_TYPES, cfg.threads)
    full = rows[0]
    table = []
    for r in rows:
        share_rej = r.d_rejection / full.rejection if full.rejection else np.nan
        share_eps = r.d_eps / full.eps if full.eps else np.nan
        table.append((r.suppressed, _pct(r.rejection), _pct(r.eps), _pct(r.d_rejection), _pct(r.d_eps),
                      _pct(share_rej), _pct(share_eps)))
        print(f"{r.suppressed:>8}: rejection {_pct(r.rejection):6.2f}%  eps {_pct(r.eps):6.3f}%  "
              f"d_rejection {_pct(r.d_rejection):6.2f}%  d_eps {_pct(r.d_eps):6.3f}%")
    write_csv(Path(cfg.out) / "budget.csv",
              ["suppressed", "rejection_pct", "eps_pct", "d_rejection_pct", "d_eps_pct", "share_rejection_pct",
               "share_eps_pct"], table)
    return {r.suppressed: {"rejection_pct": _pct(r.rejection), "eps_pct": _pct(r.eps)} for r in rows}


def cmd_detectors(cfg: RunConfig) -> dict:
    device = cfg.load_device()
    rows, summary = [], {}
    Ns = [N for N in cfg.cycles if N >= 1]
    for i, state in enumerate(cfg.states):
        kind = "bell_lifetime" if state == "bell" else "lifetime"
        batches = {N: run_shots(experiment_program(kind, device, "0000" if state == "bell" else state, N),
                                cfg.shots_for(N), derive_seed(cfg.seed, i, N), cfg.threads) for N in Ns}
        _save_batches(cfg, f"detectors_{state}", batches)
        grid = detection_fractions(batches, cfg.sigma)
        for stab, g in (("X", grid.x), ("Z", grid.z)):
            for N in Ns:
                for n in range(1, N + 1):
                    rows.append((state, stab, N, n, g[N - 1, n - 1]))
            first = float(np.nanmean(g[:, 0]))
            summary[f"{state}_{stab}_first"] = first
            print(f"{state} S_{stab}: first-cycle sigma = {first:.3f}  "
                  f"final-cycle sigma = {np.round(g[[N - 1 for N in Ns], [N - 1 for N in Ns]], 3).tolist()}")
    write_csv(Path(cfg.out) / "detectors.csv", ["state", "stabilizer", "N", "n", "sigma_bar"], rows)
    return summary


HANDLERS = {"stabilizer-tomo": cmd_stabilizer_tomo, "lifetime": cmd_lifetime, "tomography": cmd_tomography,
            "bell": cmd_bell, "budget": cmd_budget, "detectors": cmd_detectors}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--device", help="preset (A, B, ideal) or YAML path")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--shots", type=int, help="shots per program (per setting for tomography)")
    common.add_argument("--shots-policy", choices=("fixed", "proportional"), default="fixed",
                        help=f"proportional runs {PROPORTIONAL_SHOTS} shots per cycle")
    common.add_argument("--cycles", help="cycle counts, e.g. 1-20 or 0,4,8")
    common.add_argument("--out", default=None, help="output directory (default runs/<command>)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--t2", choices=("star", "echo"), default="star")
    common.add_argument("--stab-order", choices=("xz", "zx"), default="xz")
    common.add_argument("--sigma", choices=SIGMA_VARIANTS, default="composed", help="detector definition")
    common.add_argument("--save-shots", action="store_true", help="also write raw ShotBatch files")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="star422", description="Noisy [[4,2,2]] error-detection simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("stabilizer-tomo", parents=[common], help="single stabilizer on 16 eigenstates")
    s.add_argument("--stabilizer", choices=("X", "Z", "both"), default="both")
    s = sub.add_parser("lifetime", parents=[common], help="repeated detection on product inputs")
    s.add_argument("--states", default=",".join(LIFETIME_STATES))
    s = sub.add_parser("tomography", parents=[common], help="shadow tomography of encoded states")
    s.add_argument("--states", default=",".join(TOMOGRAPHY_STATES))
    s.add_argument("--settings", choices=("exhaustive81", "uniform"), default="exhaustive81")
    s.add_argument("--n-u", type=int, default=None, help="number of settings for --settings uniform")
    s.add_argument("--n-boot", type=int, default=1000)
    s = sub.add_parser("bell", parents=[common], help="logical Bell state lifetime and tomography")
    s.add_argument("--tomo-cycles", default="", help="cycle counts for shadow tomography, e.g. 0,4,8,15")
    s.add_argument("--tomo-shots", type=int, default=2000)
    s.add_argument("--n-boot", type=int, default=1000)
    s = sub.add_parser("budget", parents=[common], help="error budget by ablation")
    s.add_argument("--state", default="0000")
    s = sub.add_parser("detectors", parents=[common], help="mean detector grids without post-selection")
    s.add_argument("--states", default="0000,++++,bell")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cmd = args.command
    states = [args.state] if cmd == "budget" else getattr(args, "states", "0000").split(",")
    states = [s.strip() for s in states if s.strip()]
    for s in states:
        if s != "bell":
            codeword_for_input(s)  # validates the input label
    extra = {}
    for key in ("stabilizer", "settings", "n_u", "n_boot", "tomo_shots"):
        if hasattr(args, key):
            extra[key] = getattr(args, key)
    if getattr(args, "tomo_cycles", ""):
        extra["tomo_cycles"] = parse_cycles(args.tomo_cycles)
    if extra.get("settings") == "uniform" and not extra.get("n_u"):
        raise ValueError("--settings uniform needs --n-u")
    return RunConfig(
        command=cmd,
        device=args.device or DEFAULT_DEVICE[cmd],
        states=states,
        cycles=parse_cycles(args.cycles or DEFAULT_CYCLES[cmd]),
        shots=args.shots or DEFAULT_SHOTS[cmd],
        shots_policy=args.shots_policy,
        seed=args.seed,
        out=args.out or str(Path("runs") / cmd),
        threads=args.threads,
        t2=args.t2,
        stab_order=args.stab_order,
        sigma=args.sigma,
        save_shots=args.save_shots,
        extra=extra,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        device = cfg.load_device()
    except (ValueError, KeyError) as exc:
        parser.error(str(exc))
    t0 = time.perf_counter()
    results = HANDLERS[cfg.command](cfg)
    path = write_manifest(cfg, device, results, time.perf_counter() - t0)
    print(f"wrote {path.parent}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
