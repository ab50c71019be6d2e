"""Classical shadows from randomized local Pauli measurements.

Each setting rotates data qubit ``j`` so that a Z readout measures the
Pauli ``Z``, ``X`` or ``Y``.  A setting with estimated outcome
distribution ``P(d)`` gives the single-setting shadow
``sum_d P(d) kron_j (3 U_j^dag |d_j><d_j| U_j - I)``.  The logical block is
``V^dag rho V`` with ``V`` the 16x4 codeword matrix; its trace is the
logical acceptance probability ``P_L``.

Settings left without post-selected shots are dropped everywhere and
counted in ``DensityEstimate.dropped``.
"""

from __future__ import annotations

import itertools
import json
import logging
import warnings
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from pathlib import Path
from typing import Sequence

import numpy as np

from .circuits import READOUT_ROTATION, experiment_program
from .code422 import codeword_for_input, logical_basis_projectors, logical_vector
from .device import DeviceModel
from .engine import derive_seed, run_shots
from .pauli import GATES

log = logging.getLogger(__name__)

BASES = "ZXY"
N_BOOT = 1000


@dataclass(frozen=True)
class TomographySetting:
    """Readout bases for D1..D4 (``"ZXYZ"`` etc.) and a setting id."""

    bases: str
    rid: int = 0

    def __post_init__(self) -> None:
        if len(self.bases) != 4 or set(self.bases) - set(BASES):
            raise ValueError(f"setting must be 4 letters over {BASES}, got {self.bases!r}")


def sample_settings(mode: str = "uniform", n_u: int | None = None,
                    rng: np.random.Generator | int | None = None) -> list[TomographySetting]:
    """``uniform`` draws ``n_u`` i.i.d. settings; ``exhaustive81`` lists all 81 once."""
    if mode == "exhaustive81":
        return [TomographySetting("".join(b), r) for r, b in enumerate(itertools.product(BASES, repeat=4))]
    if mode != "uniform":
        raise ValueError("mode must be 'uniform' or 'exhaustive81'")
    if n_u is None or n_u < 2:
        raise ValueError("uniform sampling needs n_u >= 2")
    rng = np.random.default_rng(rng)
    draws = rng.integers(3, size=(n_u, 4))
    return [TomographySetting("".join(BASES[k] for k in row), r) for r, row in enumerate(draws)]


@lru_cache(maxsize=None)
def rotation(basis: str) -> np.ndarray:
    """Unitary applied before a Z readout to measure ``basis``."""
    name = READOUT_ROTATION[basis]
    return np.eye(2, dtype=complex) if name is None else GATES[name].matrix


@lru_cache(maxsize=None)
def _factor(basis: str, bit: int) -> np.ndarray:
    u = rotation(basis)
    ket = np.zeros(2, complex)
    ket[bit] = 1
    v = u.conj().T @ ket
    return 3 * np.outer(v, v.conj()) - np.eye(2)


def shadow_from_setting(setting: TomographySetting | str, bits: np.ndarray) -> np.ndarray:
    """16x16 shadow of one setting from its post-selected bitstrings ``(N'_M, 4)``."""
    bases = setting.bases if isinstance(setting, TomographySetting) else setting
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1, 4)
    if len(bits) == 0:
        raise ValueError("no bitstrings for this setting")
    idx = bits @ np.array([8, 4, 2, 1])
    counts = np.bincount(idx, minlength=16) / len(bits)
    return np.einsum("k,kab->ab", counts, _snapshots(bases))


@dataclass
class ShadowDataset:
    """Post-selected bitstrings per setting plus the raw shot count ``N_M``."""

    settings: list[TomographySetting]
    bitstrings: list[np.ndarray]
    raw_counts: list[int]
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not len(self.settings) == len(self.bitstrings) == len(self.raw_counts):
            raise ValueError("settings, bitstrings and counts must align")
        for b, n in zip(self.bitstrings, self.raw_counts):
            if len(b) > n:
                raise ValueError("more post-selected than raw shots")

    @property
    def n_u(self) -> int:
        return len(self.settings)

    @property
    def acceptance(self) -> float:
        """Fraction of all shots kept by post-selection."""
        return sum(len(b) for b in self.bitstrings) / max(sum(self.raw_counts), 1)

    def to_dict(self) -> dict:
        return {
            "header": {"N_U": self.n_u, "N_M": max(self.raw_counts, default=0),
                       "schema": ["D1", "D2", "D3", "D4"], "meta": self.meta},
            "records": [{"id": s.rid, "setting": s.bases, "raw": int(n),
                         "bits": ["".join(map(str, row)) for row in b.tolist()]}
                        for s, b, n in zip(self.settings, self.bitstrings, self.raw_counts)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ShadowDataset":
        recs = d["records"]
        bits = [np.array([[int(c) for c in s] for s in r["bits"]], dtype=np.uint8).reshape(-1, 4)
                for r in recs]
        return cls([TomographySetting(r["setting"], r["id"]) for r in recs], bits,
                   [r["raw"] for r in recs], d["header"].get("meta", {}))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "ShadowDataset":
        return cls.from_dict(json.loads(Path(path).read_text()))


def sample_from_density(rho: np.ndarray, settings: Sequence[TomographySetting], shots: int,
                        rng: np.random.Generator | int | None = None) -> ShadowDataset:
    """Synthetic dataset: exact Born sampling of a 4-qubit density matrix."""
    rng = np.random.default_rng(rng)
    bits_table = np.array([[(k >> (3 - j)) & 1 for j in range(4)] for k in range(16)], dtype=np.uint8)
    out = []
    for s in settings:
        u = reduce(np.kron, [rotation(b) for b in s.bases])
        p = np.real(np.diag(u @ rho @ u.conj().T)).clip(min=0)
        draws = rng.choice(16, size=shots, p=p / p.sum())
        out.append(bits_table[draws])
    return ShadowDataset(list(settings), out, [shots] * len(settings), {"source": "synthetic"})


# ---------------------------------------------------------------------------
# estimation
#
# Every statistic is a function of per-setting outcome frequencies ``p[r, k]``
# and fixed per-outcome snapshot matrices, so bootstrap replicates only
# change ``p`` (shot resampling) or per-setting weights ``c`` (setting
# resampling).

DESIGNS = ("auto", "iid", "complete")


def dataset_design(dataset: ShadowDataset) -> str:
    """``complete`` if the settings are the 81 combinations once each, else ``iid``."""
    bases = sorted(s.bases for s in dataset.settings)
    full = sorted("".join(b) for b in itertools.product(BASES, repeat=4))
    return "complete" if bases == full else "iid"


@lru_cache(maxsize=None)
def _snapshots(bases: str) -> np.ndarray:
    """``(16, 16, 16)``: the single-shot shadow of each outcome ``k`` of a setting."""
    return np.stack([reduce(np.kron, [_factor(bases[j], (k >> (3 - j)) & 1) for j in range(4)])
                     for k in range(16)])


class _Estimator:
    def __init__(self, dataset: ShadowDataset, design: str = "auto"):
        if design not in DESIGNS:
            raise ValueError(f"design must be one of {DESIGNS}")
        self.design = dataset_design(dataset) if design == "auto" else design
        min_shots = 2 if self.design == "complete" else 1
        keep = [i for i, b in enumerate(dataset.bitstrings) if len(b) >= min_shots]
        self.dropped = dataset.n_u - len(keep)
        if self.dropped and self.design == "complete":
            warnings.warn(f"{self.dropped} of 81 settings have fewer than 2 post-selected shots; "
                          "the remaining design is incomplete and estimates are biased", stacklevel=3)
        elif self.dropped:
            log.info("dropping %d settings with no post-selected shots", self.dropped)
        if not keep:
            raise ValueError("dataset has no post-selected shots")
        bases = [dataset.settings[i].bases for i in keep]
        self.uniq = sorted(set(bases))
        pos = {b: u for u, b in enumerate(self.uniq)}
        self.u = np.array([pos[b] for b in bases])
        self.onehot = np.zeros((len(keep), len(self.uniq)))
        self.onehot[np.arange(len(keep)), self.u] = 1
        weights = np.array([8, 4, 2, 1])
        self.n = np.stack([np.bincount(dataset.bitstrings[i].astype(int) @ weights, minlength=16)
                           for i in keep]).astype(float)
        self.M = self.n.sum(axis=1)
        self.p = self.n / self.M[:, None]
        self.R = len(keep)
        self.sig = np.stack([_snapshots(b) for b in self.uniq])  # (U, 16, 16, 16)
        V = logical_basis_projectors()
        self.blk = np.einsum("ai,ukab,bj->ukij", V.conj(), self.sig, V)  # (U, 16, 4, 4)
        self.trace_L = np.real(np.einsum("ukii->uk", self.blk))
        self._gram: dict[bool, np.ndarray] = {}

    def mats(self, logical: bool) -> np.ndarray:
        return self.blk if logical else self.sig

    def gram(self, logical: bool) -> np.ndarray:
        if logical not in self._gram:
            m = self.mats(logical)
            flat = m.reshape(m.shape[0] * 16, -1)
            self._gram[logical] = np.ascontiguousarray(np.real(flat @ flat.conj().T))
        return self._gram[logical]

    def per_setting(self, p: np.ndarray | None = None) -> np.ndarray:
        """Single-setting shadows ``(R, 16, 16)``."""
        p = self.p if p is None else p
        return np.einsum("rk,rkab->rab", p, self.sig[self.u])

    # resampling -----------------------------------------------------------

    def replicates(self, n_boot: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        """``(p, c)`` for the point estimate (first) and ``n_boot`` bootstrap draws."""
        rng = np.random.default_rng(seed)
        if self.design == "complete":
            draws = np.stack([rng.multinomial(int(m), pr, size=n_boot) for m, pr in zip(self.M, self.p)],
                             axis=1) / self.M[None, :, None]
            p = np.concatenate([self.p[None], draws])
            c = np.ones((n_boot + 1, self.R))
        else:
            p = self.p[None]
            c = np.concatenate([np.ones((1, self.R)),
                                rng.multinomial(self.R, np.full(self.R, 1 / self.R), size=n_boot)])
        return p, c.astype(float)

    # statistics, vectorized over replicates -------------------------------

    def linear(self, vec: np.ndarray, p: np.ndarray, c: np.ndarray) -> np.ndarray:
        """Weighted mean over settings of ``sum_k p[r, k] vec[u_r, k]``."""
        per = np.einsum("brk,rk->br", np.broadcast_to(p, (len(c),) + p.shape[1:]), vec[self.u])
        return (c * per).sum(axis=1) / c.sum(axis=1)

    def purity(self, logical: bool, p: np.ndarray, c: np.ndarray) -> np.ndarray:
        G = self.gram(logical)
        U, B = len(self.uniq), len(c)
        pb = np.broadcast_to(p, (B,) + p.shape[1:])
        w = c[:, :, None] * pb  # (B, R, 16)
        q = np.matmul(w.transpose(0, 2, 1), self.onehot).transpose(0, 2, 1).reshape(B, U * 16)
        total = ((q @ G) * q).sum(axis=1)
        blocks = G.reshape(U, 16, U, 16)[self.u, :, self.u, :]  # (R, 16, 16) same-setting blocks

        def quad(x):  # per-setting x_r^T blocks_r x_r -> (B, R)
            return (np.matmul(x.transpose(1, 0, 2), blocks).transpose(1, 0, 2) * x).sum(axis=2)

        self_terms = (c**2 * quad(pb)).sum(axis=1)
        cs, c2 = c.sum(axis=1), (c**2).sum(axis=1)
        if self.design == "iid":
            return (total - self_terms) / (cs**2 - c2)
        # distinct shots within a setting replace the biased self-products
        nb = pb * self.M[None, :, None]
        gdiag = np.einsum("rkk->rk", blocks)
        within = (quad(nb) - (nb * gdiag[None]).sum(axis=2)) / (self.M * (self.M - 1))[None, :]
        return (total - self_terms + (c**2 * within).sum(axis=1)) / cs**2


def _split(vals: np.ndarray) -> tuple[float, float]:
    boot = vals[1:]
    err = float(np.nanstd(boot, ddof=1)) if len(boot) > 1 else float("nan")
    return float(vals[0]), err


def _clean(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    w = np.clip(w, 0, None)
    if w.sum() <= 0:
        raise ValueError("no positive spectrum left after cleanup")
    return (v * (w / w.sum())) @ v.conj().T


@dataclass
class DensityEstimate:
    """Physical and logical density estimates with bootstrap errors."""

    physical: np.ndarray
    logical: np.ndarray
    P_L: float
    P_L_err: float
    n_settings: int
    dropped: int = 0
    cleaned: bool = False
    design: str = "iid"

    def to_dict(self) -> dict:
        def enc(m):
            return {"real": np.real(m).tolist(), "imag": np.imag(m).tolist()}
        return {"physical": enc(self.physical), "logical": enc(self.logical), "P_L": self.P_L,
                "P_L_err": self.P_L_err, "n_settings": self.n_settings, "dropped": self.dropped,
                "cleaned": self.cleaned, "design": self.design}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))


def estimate_density(dataset: ShadowDataset, cleanup: bool = False, n_boot: int = N_BOOT,
                     seed: int = 0, design: str = "auto") -> DensityEstimate:
    """Mean shadow and its logical block normalized by ``P_L``.

    Raises ``ValueError`` if the estimated ``P_L`` is not positive.
    ``cleanup`` clips negative eigenvalues (display only; off by default).
    """
    est = _Estimator(dataset, design)
    shadows = est.per_setting()
    phys = shadows.mean(axis=0)
    phys = (phys + phys.conj().T) / 2
    p, c = est.replicates(n_boot, seed)
    P_L, P_L_err = _split(est.linear(est.trace_L, p, c))
    if P_L <= 0:
        raise ValueError(f"estimated P_L = {P_L:.3g} is not positive")
    V = logical_basis_projectors()
    logical = V.conj().T @ phys @ V / P_L
    logical = (logical + logical.conj().T) / 2
    if cleanup:
        phys, logical = _clean(phys), _clean(logical)
    return DensityEstimate(phys, logical, P_L, P_L_err, est.R, est.dropped, cleanup, est.design)


def fidelity_estimate(dataset: ShadowDataset, target: np.ndarray, logical: bool = False,
                      n_boot: int = N_BOOT, seed: int = 0, design: str = "auto") -> tuple[float, float]:
    """Shadow fidelity with a pure target: 16-dim (physical) or 4-dim (logical)."""
    target = np.asarray(target, dtype=complex)
    if abs(np.linalg.norm(target) - 1) > 1e-9:
        raise ValueError("target state must be normalized")
    est = _Estimator(dataset, design)
    mats = est.mats(logical)
    if target.shape != (mats.shape[-1],):
        raise ValueError(f"target must have dimension {mats.shape[-1]}")
    vec = np.real(np.einsum("i,ukij,j->uk", target.conj(), mats, target))
    p, c = est.replicates(n_boot, seed)
    vals = est.linear(vec, p, c)
    if logical:
        vals = vals / est.linear(est.trace_L, p, c)
    return _split(vals)


def purity_estimate(dataset: ShadowDataset, logical: bool = False, n_boot: int = N_BOOT,
                    seed: int = 0, design: str = "auto") -> tuple[float, float]:
    """Unbiased purity; the logical purity is divided by ``P_L^2``.

    For ``iid`` settings this is the U-statistic over distinct settings.
    For the ``complete`` design, where settings are not independent draws,
    each setting's self-term is replaced by its distinct-shot U-statistic.
    """
    est = _Estimator(dataset, design)
    if est.R < 2:
        raise ValueError("purity needs at least two settings with data")
    p, c = est.replicates(n_boot, seed)
    vals = est.purity(logical, p, c)
    if logical:
        vals = vals / est.linear(est.trace_L, p, c) ** 2
    return _split(vals)


# ---------------------------------------------------------------------------
# experiment driver


def collect_dataset(device: DeviceModel, state: str = "0000", cycles: int = 1,
                    settings: Sequence[TomographySetting] | None = None, shots: int = 2000,
                    seed: int = 0, threads: int = 1, noisy: bool = True) -> ShadowDataset:
    """Run the tomography experiment for every setting and post-select on the stabilizers.

    ``state="bell"`` prepares the logical Bell state.
    """
    from .analysis import postselect

    settings = list(settings) if settings is not None else sample_settings("exhaustive81")
    kind = "bell_tomography" if state == "bell" else "tomography"
    bits, raw = [], []
    for s in settings:
        prog = experiment_program(kind, device, "0000" if state == "bell" else state, cycles,
                                  setting=s.bases, noisy=noisy)
        batch = run_shots(prog, shots, derive_seed(seed, s.rid), threads)
        mask, _ = postselect(batch, "all_s_plus_one")
        bits.append(batch.data_bits()[mask])
        raw.append(shots)
    meta = {"state": state, "cycles": cycles, "device": device.name, "seed": seed, "shots": shots}
    return ShadowDataset(settings, bits, raw, meta)


@dataclass
class TomographySummary:
    """One row of the tomography table, with bootstrap errors."""

    psi_in: str
    target: str
    F_L: float
    F_L_err: float
    p2_L: float
    p2_L_err: float
    p2_phy: float
    p2_phy_err: float
    P_L: float
    P_L_err: float
    P_S: float
    design: str = "iid"


def summarize(dataset: ShadowDataset, n_boot: int = N_BOOT, seed: int = 0,
              design: str = "auto") -> TomographySummary:
    """Fidelity, purities and acceptance probabilities of one dataset.

    ``P_S`` is the per-cycle stabilizer acceptance ``(c * yield)^(1/N)``
    with ``c = 2`` for probabilistic encoding and ``c = 1`` for the Bell
    state; with no cycles it is the raw yield.
    """
    from .code422 import bell_state

    state = dataset.meta.get("state", "0000")
    cycles = dataset.meta.get("cycles", 1)
    if state == "bell":
        target_label = "bell"
        target = logical_basis_projectors().conj().T @ bell_state()
    else:
        target_label = codeword_for_input(state)
        target = logical_vector(target_label)
    c = 1 if state == "bell" else 2
    P_S = (c * dataset.acceptance) ** (1 / cycles) if cycles >= 1 else dataset.acceptance
    kw = dict(n_boot=n_boot, seed=seed, design=design)
    est = estimate_density(dataset, **kw)
    F, F_err = fidelity_estimate(dataset, target, logical=True, **kw)
    pL, pL_err = purity_estimate(dataset, logical=True, **kw)
    pp, pp_err = purity_estimate(dataset, logical=False, **kw)
    return TomographySummary(state, target_label, F, F_err, pL, pL_err, pp, pp_err, est.P_L, est.P_L_err,
                             P_S, est.design)


def density_grid(matrix: np.ndarray) -> list[tuple[int, int, float, float, float]]:
    """``(row, col, real, imag, abs)`` entries for matrix plots."""
    return [(i, j, float(matrix[i, j].real), float(matrix[i, j].imag), float(abs(matrix[i, j])))
            for i in range(matrix.shape[0]) for j in range(matrix.shape[1])]
