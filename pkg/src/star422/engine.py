"""Shot-parallel Monte Carlo execution of compiled programs.

Sampling uses Pauli-frame propagation: one noiseless tableau run fixes a
reference measurement record, and each shot carries the Pauli frame by
which it differs from the reference.  Frames for 64 shots share one
``uint64`` word per element, so a gate is a handful of XORs over rows.
Random outcomes arise from randomizing the Z part of a frame at every
reset and after every measurement.

Shots are grouped in fixed blocks of ``BLOCK_SHOTS``; block ``k`` draws
from a generator seeded by ``(master seed, k)``.  Results therefore do not
depend on how blocks are spread over threads.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .pauli import GATES, Tableau
from .program import CircuitProgram

BLOCK_SHOTS = 16384
_MAGIC = b"S422SHOT"
_VERSION = 1
_DENSE_P = 0.05  # above this, draw a uniform per shot instead of geometric gaps


# ---------------------------------------------------------------------------
# op compilation


def _gate_rows(name: str) -> list[tuple[int, ...]]:
    """For each output slot (x_0..x_k-1, z_0..z_k-1) the input slots XORed into it."""
    g = GATES[name]
    k = g.arity
    images = list(g.x_images) + list(g.z_images)
    rows = []
    for out in range(2 * k):
        j, is_z = out % k, out >= k
        src = []
        for i, img in enumerate(images):
            bit = (img.z >> j) & 1 if is_z else (img.x >> j) & 1
            if bit:
                src.append(i)
        rows.append(tuple(src))
    return rows


def _noise_table(ev) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    dist = ev.pauli_distribution()
    probs = np.array([p for _, p in dist])
    xs = np.array([p.x for p, _ in dist], dtype=np.uint8)
    zs = np.array([p.z for p, _ in dist], dtype=np.uint8)
    total = float(probs.sum())
    return total, (probs / total if total > 0 else probs), xs, zs


def reference_record(program: CircuitProgram) -> np.ndarray:
    """Noiseless measurement record with every random outcome forced to 0."""
    tab = Tableau(program.n)
    bits = []
    for ins in program.instructions:
        if ins.kind == "gate":
            tab.apply(ins.name, ins.targets)
        elif ins.kind == "reset":
            tab.reset(ins.targets[0])
        elif ins.kind == "measure":
            bits.append(tab.measure(ins.targets[0], force=0))
    return np.array(bits, dtype=np.uint8)


def _compile_ops(program: CircuitProgram) -> list[tuple]:
    ref = reference_record(program)
    ops, m = [], 0
    for ins in program.instructions:
        if ins.kind == "gate":
            if ins.name != "I":
                ops.append(("gate", ins.targets, _gate_rows(ins.name)))
        elif ins.kind == "reset":
            ops.append(("reset", ins.targets[0]))
        elif ins.kind == "measure":
            ops.append(("measure", ins.targets[0], m, int(ref[m])))
            m += 1
        elif ins.kind == "noise":
            total, probs, xs, zs = _noise_table(ins.noise)
            if total > 0:
                uniform = bool(np.allclose(probs, probs[0]))
                muted = ins.role == "muted"
                ops.append(("noise", ins.noise.targets, total, probs, xs, zs, uniform, muted))
    return ops


# ---------------------------------------------------------------------------
# block sampler


def _hits(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Indices of i.i.d. Bernoulli(p) successes among ``n`` trials."""
    if p >= _DENSE_P:
        return np.flatnonzero(rng.random(n) < p)
    expect = n * p
    gaps = rng.geometric(p, size=int(expect + 6 * np.sqrt(expect) + 16))
    pos = np.cumsum(gaps) - 1
    while pos[-1] < n - 1:
        more = np.cumsum(rng.geometric(p, size=int(expect) + 16)) + pos[-1]
        pos = np.concatenate([pos, more])
    return pos[pos < n]


_ONE = np.uint64(1)


def _xor_bits(row: np.ndarray, pos: np.ndarray) -> None:
    np.bitwise_xor.at(row, pos >> 6, np.left_shift(_ONE, (pos & 63).astype(np.uint64)))


def _random_words(rng: np.random.Generator, w: int) -> np.ndarray:
    return np.frombuffer(rng.bytes(8 * w), dtype="<u8").copy()


def _run_block(ops: list[tuple], n: int, n_meas: int, shots: int, rng: np.random.Generator) -> np.ndarray:
    w = (shots + 63) // 64
    x = np.zeros((n, w), dtype=np.uint64)
    # every element starts in |0>, so a random Z frame is a gauge choice
    z = np.stack([_random_words(rng, w) for _ in range(n)]) if n else np.zeros((0, w), np.uint64)
    out = np.zeros((n_meas, w), dtype=np.uint64)
    full = np.uint64(0xFFFFFFFFFFFFFFFF)
    for op in ops:
        kind = op[0]
        if kind == "gate":
            targets, rows = op[1], op[2]
            slots = [x[t] for t in targets] + [z[t] for t in targets]
            new = []
            for src in rows:
                acc = slots[src[0]].copy()
                for s in src[1:]:
                    acc ^= slots[s]
                new.append(acc)
            k = len(targets)
            for j, t in enumerate(targets):
                x[t] = new[j]
                z[t] = new[k + j]
        elif kind == "noise":
            targets, total, probs, xs, zs, uniform, muted = op[1:]
            pos = _hits(rng, shots, total)
            if pos.size == 0:
                continue
            if uniform:
                which = rng.integers(len(probs), size=pos.size)
            else:
                which = rng.choice(len(probs), size=pos.size, p=probs)
            if muted:
                continue  # draws consumed so ablated runs share random numbers
            for j, t in enumerate(targets):
                sel = pos[((xs[which] >> j) & 1).astype(bool)]
                if sel.size:
                    _xor_bits(x[t], sel)
                sel = pos[((zs[which] >> j) & 1).astype(bool)]
                if sel.size:
                    _xor_bits(z[t], sel)
        elif kind == "measure":
            q, m, ref = op[1:]
            out[m] = x[q] ^ full if ref else x[q]
            z[q] = _random_words(rng, w)
        elif kind == "reset":
            q = op[1]
            x[q] = 0
            z[q] = _random_words(rng, w)
    return out


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 63-bit seed for a sub-run labelled by ``keys``."""
    state = np.random.SeedSequence(entropy=seed, spawn_key=tuple(keys)).generate_state(2, np.uint64)
    return int(state[0] >> np.uint64(1))


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(block,))))


# ---------------------------------------------------------------------------
# results


@dataclass
class RunRecord:
    """One shot: ancilla bits per cycle (columns X, Z; -1 where absent) and data bits."""

    shot: int
    d: np.ndarray
    data: np.ndarray
    basis: str
    setting: str | None = None


@dataclass
class ShotBatch:
    """Measurement bits of many shots, stored bit-packed per measurement tag."""

    tags: list[str]
    cycles: list[int | None]
    packed: np.ndarray  # (n_tags, ceil(shots / 8)) uint8, little bit order
    shots: int
    seed: int
    digest: str
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.shots

    def bits(self, tag: str) -> np.ndarray:
        row = self.packed[self.tags.index(tag)]
        return np.unpackbits(row, count=self.shots, bitorder="little")

    def matrix(self, tags: Sequence[str]) -> np.ndarray:
        """``(shots, len(tags))`` uint8 matrix."""
        if not tags:
            return np.zeros((self.shots, 0), np.uint8)
        rows = self.packed[[self.tags.index(t) for t in tags]]
        return np.unpackbits(rows, axis=1, count=self.shots, bitorder="little").T

    @property
    def n_cycles(self) -> int:
        return max((c for c in self.cycles if c is not None), default=0)

    def ancilla(self, stabilizer: str) -> np.ndarray:
        """Ancilla bits ``d`` of one stabilizer, shape ``(shots, cycles)``."""
        prefix = "AX_" if stabilizer == "X" else "AZ_"
        tags = [f"{prefix}{n}" for n in range(1, self.n_cycles + 1) if f"{prefix}{n}" in self.tags]
        return self.matrix(tags)

    def has_stabilizer(self, stabilizer: str) -> bool:
        return any(t.startswith("AX_" if stabilizer == "X" else "AZ_") for t in self.tags)

    def data_bits(self) -> np.ndarray:
        return self.matrix(["D1", "D2", "D3", "D4"])

    def record(self, i: int) -> RunRecord:
        n = self.n_cycles
        d = np.full((n, 2), -1, dtype=np.int8)
        for col, stab in enumerate("XZ"):
            if self.has_stabilizer(stab):
                d[:, col] = self.ancilla(stab)[i]
        return RunRecord(i, d, self.data_bits()[i], self.meta.get("basis", "Z"), self.meta.get("setting"))

    def records(self) -> list[RunRecord]:
        return [self.record(i) for i in range(self.shots)]

    # -- serialization -------------------------------------------------------

    def to_bytes(self) -> bytes:
        header = json.dumps({
            "digest": self.digest, "seed": self.seed, "shots": self.shots,
            "schema": [[t, c] for t, c in zip(self.tags, self.cycles)], "meta": self.meta,
        }, sort_keys=True).encode()
        body = np.ascontiguousarray(self.packed, dtype=np.uint8).tobytes()
        return _MAGIC + struct.pack("<HI", _VERSION, len(header)) + header + body

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ShotBatch":
        if raw[:8] != _MAGIC:
            raise ValueError("not a shot-batch container")
        version, hlen = struct.unpack("<HI", raw[8:14])
        if version != _VERSION:
            raise ValueError(f"unsupported container version {version}")
        head = json.loads(raw[14:14 + hlen])
        tags = [t for t, _ in head["schema"]]
        nbytes = (head["shots"] + 7) // 8
        packed = np.frombuffer(raw[14 + hlen:], dtype=np.uint8).reshape(len(tags), nbytes).copy()
        return cls(tags, [c for _, c in head["schema"]], packed, head["shots"], head["seed"],
                   head["digest"], head.get("meta", {}))

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "ShotBatch":
        return cls.from_bytes(Path(path).read_bytes())

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf)
        wr.writerow(["shot"] + self.tags)
        mat = self.matrix(self.tags)
        for i, row in enumerate(mat):
            wr.writerow([i, *row.tolist()])
        return buf.getvalue()


def run_shots(program: CircuitProgram, shots: int, seed: int, threads: int = 1,
              block_shots: int = BLOCK_SHOTS) -> ShotBatch:
    """Sample ``shots`` executions of ``program``.

    The result is a pure function of ``(program, shots, seed, block_shots)``.
    """
    if shots <= 0:
        raise ValueError("shots must be positive")
    if block_shots % 64:
        raise ValueError("block size must be a multiple of 64")
    program.validate()
    ops = _compile_ops(program)
    n_meas = len(program.schema)
    sizes = [min(block_shots, shots - s) for s in range(0, shots, block_shots)]

    def work(k: int) -> np.ndarray:
        words = _run_block(ops, program.n, n_meas, sizes[k], _block_rng(seed, k))
        return words.astype("<u8").view(np.uint8)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(k) for k in range(len(sizes))]
    packed = np.concatenate(parts, axis=1)[:, : (shots + 7) // 8].copy()
    if shots % 8:
        packed[:, -1] &= np.uint8((1 << (shots % 8)) - 1)
    return ShotBatch(program.tags, [s.cycle for s in program.schema], packed, shots, seed,
                     program.digest(), dict(program.meta))


def tableau_sample(program: CircuitProgram, shots: int, seed: int) -> np.ndarray:
    """Direct per-shot tableau Monte Carlo; slow, used to cross-check the frame sampler.

    Returns a ``(shots, n_meas)`` uint8 matrix.
    """
    from .pauli import PauliString, sample_noise

    rng = np.random.default_rng(seed)
    out = np.zeros((shots, len(program.schema)), dtype=np.uint8)
    for s in range(shots):
        tab, m = Tableau(program.n), 0
        for ins in program.instructions:
            if ins.kind == "gate":
                tab.apply(ins.name, ins.targets)
            elif ins.kind == "reset":
                tab.reset(ins.targets[0], rng)
            elif ins.kind == "measure":
                out[s, m] = tab.measure(ins.targets[0], rng)
                m += 1
            elif ins.kind == "noise" and ins.role != "muted":
                local = sample_noise(ins.noise, rng)
                if local is not None:
                    x = z = 0
                    for j, q in enumerate(ins.noise.targets):
                        x |= ((local.x >> j) & 1) << q
                        z |= ((local.z >> j) & 1) << q
                    tab.apply_pauli(PauliString(program.n, x, z))
    return out
