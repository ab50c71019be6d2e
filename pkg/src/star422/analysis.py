"""Post-selection, syndrome statistics, decay fits and experiment runners.

Conventions
-----------
Ancilla bits ``d_n`` are not reset between cycles, so the stabilizer value
of cycle ``n`` is ``s_n = (-1)^(d_n XOR d_{n-1})`` with ``d_0 = 0``.  The
detector ``sigma_n = (1 - s_n s_{n-1}) / 2`` uses ``s_0 = +1``.  Passing
``variant="direct"`` instead flags ``sigma_n = (1 - s_n) / 2``.

Logical quantities are tied to the operators ``Z_Li``/``X_Li``; the
index ``i`` below is always the operator index, never a ket-label digit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .circuits import experiment_program, mute_noise
from .code422 import (Z_LABELS, codeword_for_input, evaluate_logicals, in_logical_subspace,
                      label_eigenvalues)
from .device import ERROR_TYPES, DeviceModel
from .engine import RunRecord, ShotBatch, derive_seed, run_shots

D0 = 0
S0 = 1
SIGMA_VARIANTS = ("composed", "direct")
RULES = ("all_s_plus_one", "with_final_subspace")


# ---------------------------------------------------------------------------
# syndromes


@dataclass
class SyndromeTrace:
    """Stabilizer values ``s`` (int8, +-1) and detectors ``sigma`` (uint8), shape ``(..., N)``."""

    s: np.ndarray
    sigma: np.ndarray


def syndromes(d: Sequence[int] | np.ndarray, variant: str = "composed") -> SyndromeTrace:
    """Stabilizer values and detectors from ancilla bits of one stabilizer.

    ``d`` has shape ``(N,)`` or ``(shots, N)``.
    """
    if variant not in SIGMA_VARIANTS:
        raise ValueError(f"variant must be one of {SIGMA_VARIANTS}")
    d = np.asarray(d, dtype=np.uint8)
    if d.shape[-1] < 1:
        raise ValueError("need at least one cycle")
    prev = np.concatenate([np.full_like(d[..., :1], D0), d[..., :-1]], axis=-1)
    flip = d ^ prev
    s = (1 - 2 * flip.astype(np.int8)).astype(np.int8)
    if variant == "direct":
        return SyndromeTrace(s, flip)
    s_prev = np.concatenate([np.full_like(s[..., :1], S0), s[..., :-1]], axis=-1)
    sigma = ((1 - s * s_prev) // 2).astype(np.uint8)
    return SyndromeTrace(s, sigma)


def record_syndromes(record: RunRecord, variant: str = "composed") -> dict[str, SyndromeTrace]:
    """Syndrome traces of every stabilizer present in ``record``."""
    out = {}
    for col, stab in enumerate("XZ"):
        bits = record.d[:, col]
        if bits.size and (bits >= 0).all():
            out[stab] = syndromes(bits, variant)
    return out


# ---------------------------------------------------------------------------
# post-selection and acceptance


@dataclass(frozen=True)
class AcceptancePoint:
    cycles: int
    accepted: int
    shots: int

    @property
    def eta(self) -> float:
        return self.accepted / self.shots

    @property
    def eta_err(self) -> float:
        e = self.eta
        return float(np.sqrt(e * (1 - e) / self.shots))


def stabilizer_mask(batch: ShotBatch) -> np.ndarray:
    """Shots whose measured stabilizers were +1 in every cycle."""
    ok = np.ones(batch.shots, dtype=bool)
    for stab in "XZ":
        if batch.has_stabilizer(stab):
            ok &= (syndromes(batch.ancilla(stab)).s == 1).all(axis=1)
    return ok


def postselect(batch: ShotBatch, rule: str = "with_final_subspace") -> tuple[np.ndarray, AcceptancePoint]:
    """Boolean mask of accepted shots and the acceptance fraction.

    An empty acceptance set is returned as an all-false mask.
    """
    if rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}")
    if batch.shots == 0:
        raise ValueError("empty batch")
    ok = stabilizer_mask(batch)
    if rule == "with_final_subspace":
        if batch.meta.get("setting"):
            raise ValueError("final-subspace rule needs a single readout basis, not a tomography setting")
        ok &= in_logical_subspace(batch.data_bits())
    return ok, AcceptancePoint(batch.n_cycles, int(ok.sum()), batch.shots)


def _wls(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Weighted straight-line fit ``y = c0 + c1 x``; covariance from weighted residuals."""
    X = np.column_stack([np.ones_like(x), x])
    W = w / w.sum()
    A = X.T @ (W[:, None] * X)
    coef = np.linalg.solve(A, X.T @ (W * y))
    r = y - X @ coef
    n = len(x)
    ss_res = float(np.sum(W * r**2))
    ybar = float(np.sum(W * y))
    ss_tot = float(np.sum(W * (y - ybar) ** 2))
    s2 = ss_res / (n - 2) if n > 2 else 0.0
    cov = s2 * np.linalg.inv(A)
    if ss_tot <= 1e-300:
        r2 = 1.0 if ss_res <= 1e-300 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return coef, cov, r2


@dataclass
class AcceptanceCurve:
    """Acceptance fractions per cycle count and the geometric-model fit.

    The model is ``eta_N = P_S^N P_L / 2`` (probabilistic encoding) or
    ``eta_N = P_S^N P_L`` (deterministic encoding).
    """

    cycles: np.ndarray
    eta: np.ndarray
    eta_err: np.ndarray
    P_S: float
    P_L: float
    P_S_err: float
    P_L_err: float
    r2: float
    deterministic: bool = False

    @property
    def rejection_rate(self) -> float:
        return 1.0 - self.P_S


def acceptance_fit(cycles: Sequence[int], eta: Sequence[float], eta_err: Sequence[float] | None = None,
                   deterministic: bool = False) -> AcceptanceCurve:
    """Weighted log-linear fit of acceptance fractions.

    Points with ``eta <= 0`` are excluded.  Weights are inverse variances
    of ``log eta`` when ``eta_err`` is given, uniform otherwise.
    """
    N = np.asarray(cycles, dtype=float)
    e = np.asarray(eta, dtype=float)
    err = np.zeros_like(e) if eta_err is None else np.asarray(eta_err, dtype=float)
    keep = e > 0
    if keep.sum() < 2:
        raise ValueError("acceptance fit needs at least two positive points")
    x, y = N[keep], np.log(e[keep])
    if eta_err is None:
        w = np.ones_like(x)
    else:
        rel = np.maximum(err[keep] / e[keep], 1e-6)
        w = 1.0 / rel**2
    coef, cov, r2 = _wls(x, y, w)
    scale = 1.0 if deterministic else 2.0
    P_S = float(np.exp(coef[1]))
    P_L = float(scale * np.exp(coef[0]))
    return AcceptanceCurve(N, e, err, P_S, P_L, P_S * float(np.sqrt(cov[1, 1])),
                           P_L * float(np.sqrt(cov[0, 0])), r2, deterministic)


# ---------------------------------------------------------------------------
# logical observables and fits


def logical_expectation(batch: ShotBatch, mask: np.ndarray, qubit: int) -> tuple[float, float, int]:
    """Mean of logical operator ``qubit`` (1 or 2) over accepted shots, with binomial error.

    Returns ``(nan, nan, 0)`` when nothing was accepted.
    """
    if qubit not in (1, 2):
        raise ValueError("logical qubit index must be 1 or 2")
    n = int(mask.sum())
    if n == 0:
        return float("nan"), float("nan"), 0
    vals = evaluate_logicals(batch.data_bits()[mask], batch.meta.get("basis", "Z"))[:, qubit - 1]
    m = float(vals.mean())
    return m, float(np.sqrt(max(1 - m * m, 0.0) / n)), n


@dataclass
class FitResult:
    """Fit of ``a exp(-N b)`` with derived error per cycle and lifetime."""

    a: float
    b: float
    a_err: float
    b_err: float
    eps: float
    eps_err: float
    tau_us: float
    tau_err_us: float
    r2: float
    n_points: int
    t_cycle_us: float
    degenerate: bool = False


def fit_decay(cycles: Sequence[int], values: Sequence[float], weights: Sequence[float] | None = None,
              t_cycle_us: float = 2.05) -> FitResult:
    """Weighted least squares on ``log(value)``; weights are typically ``eta_N``.

    Non-positive values are dropped with a warning.  ``b <= 0`` is
    returned with ``degenerate=True`` and an unbounded lifetime.
    """
    N = np.asarray(cycles, dtype=float)
    v = np.asarray(values, dtype=float)
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=float)
    if len(N) < 3:
        raise ValueError("decay fit needs at least three points")
    keep = (v > 0) & np.isfinite(v) & (w > 0)
    if (~keep).any():
        warnings.warn(f"fit_decay: dropped {int((~keep).sum())} non-positive or unweighted points",
                      stacklevel=2)
    if keep.sum() < 3:
        nan = float("nan")
        return FitResult(nan, nan, nan, nan, nan, nan, nan, nan, nan, int(keep.sum()), t_cycle_us, True)
    coef, cov, r2 = _wls(N[keep], np.log(v[keep]), w[keep])
    a, b = float(np.exp(coef[0])), float(-coef[1])
    a_err = a * float(np.sqrt(cov[0, 0]))
    b_err = float(np.sqrt(cov[1, 1]))
    eps = (1 - np.exp(-b)) / 2
    eps_err = np.exp(-b) / 2 * b_err
    if b > 0:
        tau, tau_err, degenerate = t_cycle_us / b, t_cycle_us * b_err / b**2, False
    else:
        tau, tau_err, degenerate = float("inf"), float("inf"), True
    return FitResult(a, b, a_err, b_err, float(eps), float(eps_err), tau, tau_err, r2,
                     int(keep.sum()), t_cycle_us, degenerate)


def stabilizer_fidelity(s_bar: Sequence[float], s_ideal: Sequence[int]) -> float:
    """``1 - mean(|s_bar - s_ideal|) / 2``."""
    s_bar = np.asarray(s_bar, dtype=float)
    s_ideal = np.asarray(s_ideal, dtype=float)
    if s_bar.shape != s_ideal.shape or s_bar.size == 0:
        raise ValueError("need matching, nonempty value lists")
    return float(1 - np.mean(np.abs(s_bar - s_ideal)) / 2)


def _pair_to_label() -> dict[tuple[int, int], str]:
    return {label_eigenvalues(lbl): lbl for lbl in Z_LABELS}


def bell_probs(batch: ShotBatch, mask: np.ndarray | None = None) -> dict[str, float]:
    """Histogram of Z-basis logical outcomes among accepted shots.

    Keys are codeword labels (``00``, ``01``, ``10``, ``11``) plus
    ``00+11``.  Empty acceptance gives NaN entries.
    """
    if batch.meta.get("basis", "Z") != "Z" or batch.meta.get("setting"):
        raise ValueError("bell_probs needs Z-basis data readout")
    bits = batch.data_bits() if mask is None else batch.data_bits()[mask]
    labels = _pair_to_label()
    out = {lbl: float("nan") for lbl in Z_LABELS}
    if len(bits):
        pairs = evaluate_logicals(bits, "Z")
        for pair, lbl in labels.items():
            out[lbl] = float(np.mean((pairs[:, 0] == pair[0]) & (pairs[:, 1] == pair[1])))
    out["00+11"] = out["00"] + out["11"]
    return out


@dataclass
class DetectionGrid:
    """Mean detectors ``sigma_bar[N-1, n-1]`` per stabilizer; NaN where ``n > N``."""

    cycles: np.ndarray
    x: np.ndarray
    z: np.ndarray


def detection_fractions(batches: Mapping[int, ShotBatch], variant: str = "composed") -> DetectionGrid:
    """Mean detector value per (final cycle count N, cycle n), without post-selection."""
    n_max = max(batches)
    grids = {s: np.full((n_max, n_max), np.nan) for s in "XZ"}
    for N, batch in batches.items():
        for stab in "XZ":
            if batch.has_stabilizer(stab):
                grids[stab][N - 1, :N] = syndromes(batch.ancilla(stab), variant).sigma.mean(axis=0)
    return DetectionGrid(np.arange(1, n_max + 1), grids["X"], grids["Z"])


# ---------------------------------------------------------------------------
# experiment runners


ShotsPolicy = int | Callable[[int], int]


def _shots_for(policy: ShotsPolicy, n: int) -> int:
    return int(policy(n)) if callable(policy) else int(policy)


@dataclass
class LifetimeResult:
    """Repeated-detection series for one input state.

    ``values[k]`` holds the sign-corrected expectation of logical operator
    ``k+1`` (or, for the Bell state, the probability of ``00`` plus ``11``).
    """

    state: str
    label: str
    basis: str
    cycles: np.ndarray
    shots: np.ndarray
    accepted: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    signs: tuple[int, ...]
    acceptance: AcceptanceCurve
    fits: list[FitResult]
    batches: dict[int, ShotBatch] = field(default_factory=dict, repr=False)

    @property
    def eta(self) -> np.ndarray:
        return self.accepted / self.shots


def run_lifetime(device: DeviceModel, state: str = "0000", cycles: Iterable[int] = range(1, 21),
                 shots: ShotsPolicy = 100_000, seed: int = 0, threads: int = 1, noisy: bool = True,
                 mute: Iterable[str] = (), common_seed: bool = False,
                 keep_batches: bool = False) -> LifetimeResult:
    """Run one program per cycle count and fit acceptance and logical decay.

    ``state="bell"`` runs the logical Bell experiment.  With
    ``common_seed`` every cycle count reuses ``seed``; programs then share
    their random numbers over the common prefix, which tightens
    differences between runs (used by the error budget).
    """
    bell = state == "bell"
    kind = "bell_lifetime" if bell else "lifetime"
    label = "bell" if bell else codeword_for_input(state)
    basis = "Z" if bell else ("Z" if set(state) <= set("01") else "X")
    signs = (1,) if bell else label_eigenvalues(label)
    mute = tuple(mute)
    Ns = np.array(sorted(cycles))
    if len(Ns) == 0 or Ns.min() < 1:
        raise ValueError("cycle counts must be >= 1")
    shots_arr = np.zeros(len(Ns), dtype=int)
    acc = np.zeros(len(Ns), dtype=int)
    vals = np.full((len(signs), len(Ns)), np.nan)
    errs = np.full((len(signs), len(Ns)), np.nan)
    kept = {}
    for j, N in enumerate(Ns):
        prog = experiment_program(kind, device, "0000" if bell else state, int(N), noisy=noisy)
        if mute and noisy:
            prog = mute_noise(prog, mute)
        s = _shots_for(shots, int(N))
        batch = run_shots(prog, s, seed if common_seed else derive_seed(seed, int(N)), threads)
        mask, point = postselect(batch, "with_final_subspace")
        shots_arr[j], acc[j] = s, point.accepted
        if bell:
            if point.accepted:
                p = bell_probs(batch, mask)["00+11"]
                vals[0, j], errs[0, j] = p, np.sqrt(p * (1 - p) / point.accepted)
        else:
            for k in range(2):
                m, e, _ = logical_expectation(batch, mask, k + 1)
                vals[k, j], errs[k, j] = signs[k] * m, e
        if keep_batches:
            kept[int(N)] = batch
    eta = acc / shots_arr
    eta_err = np.sqrt(eta * (1 - eta) / shots_arr)
    curve = acceptance_fit(Ns, eta, eta_err, deterministic=bell)
    fits = []
    for k in range(len(signs)):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fits.append(fit_decay(Ns, vals[k], eta, device.t_cycle_us) if len(Ns) >= 3 else None)
    return LifetimeResult(state, label, basis, Ns, shots_arr, acc, vals, errs, signs, curve, fits, kept)


@dataclass
class StabilizerRow:
    psi_in: str
    s_ideal: int
    s_bar: float
    s_err: float


def stabilizer_inputs(stabilizer: str) -> list[str]:
    """The 16 product eigenstates of ``S_X`` (``+``/``-`` strings) or ``S_Z`` (bit strings)."""
    alphabet = "+-" if stabilizer == "X" else "01"
    return ["".join(alphabet[(i >> (3 - k)) & 1] for k in range(4)) for i in range(16)]


def run_stabilizer_tomography(device: DeviceModel, stabilizer: str, shots: int = 100_000,
                              seed: int = 0, threads: int = 1, noisy: bool = True) -> list[StabilizerRow]:
    """Single half-cycle on each of the 16 eigenstates; mean stabilizer value per input."""
    if stabilizer not in ("X", "Z"):
        raise ValueError("stabilizer must be 'X' or 'Z'")
    rows = []
    for i, psi in enumerate(stabilizer_inputs(stabilizer)):
        prog = experiment_program("single_stabilizer", device, psi, 1, stabilizer=stabilizer, noisy=noisy)
        batch = run_shots(prog, shots, derive_seed(seed, i), threads)
        s = syndromes(batch.ancilla(stabilizer)).s[:, 0].astype(float)
        ideal = -1 if sum(c in "1-" for c in psi) % 2 else 1
        rows.append(StabilizerRow(psi, ideal, float(s.mean()), float(s.std(ddof=0) / np.sqrt(shots))))
    return rows


@dataclass
class BudgetRow:
    """Rejection rate ``1 - P_S`` and error per cycle with one error type muted.

    ``d_rejection`` and ``d_eps`` are the full-model values minus these.
    """

    suppressed: str
    rejection: float
    eps: float
    d_rejection: float
    d_eps: float


def error_budget(device: DeviceModel, state: str = "0000", cycles: Iterable[int] = range(1, 11),
                 shots: int = 10_000, seed: int = 0, types: Sequence[str] = ERROR_TYPES,
                 threads: int = 1) -> list[BudgetRow]:
    """Ablate each error type in turn and report its contribution.

    Rows: ``none`` (full model), one per type, and ``all`` (every type
    muted).  ``eps`` is the mean over both logical operators of the
    encoded basis.  All ablations reuse the same random numbers.
    """
    unknown = set(types) - set(ERROR_TYPES)
    if unknown:
        raise ValueError(f"unknown error types {sorted(unknown)}")
    cycles = list(cycles)

    def one(mute: Sequence[str]) -> tuple[float, float]:
        res = run_lifetime(device, state, cycles, shots, seed, threads, mute=mute, common_seed=True)
        eps = float(np.mean([f.eps for f in res.fits]))
        return res.acceptance.rejection_rate, eps

    full_rej, full_eps = one(())
    rows = [BudgetRow("none", full_rej, full_eps, 0.0, 0.0)]
    for t in list(types) + ["all"]:
        rej, eps = one(ERROR_TYPES if t == "all" else (t,))
        rows.append(BudgetRow(t, rej, eps, full_rej - rej, full_eps - eps))
    return rows
