"""Binary-symplectic Pauli algebra, Clifford gate tables and a stabilizer tableau.

Pauli strings are stored as a pair of Python integers used as bit masks
(bit ``q`` of ``x``/``z`` belongs to element ``q``) plus a real sign.  The
operator represented by ``(x, z, sign)`` is ``sign * prod_q P_q`` where
``P_q`` is ``I, X, Z`` or ``Y`` for bit pairs ``00, 10, 01, 11``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

_CHARS = "IXZY"  # index = x | (z << 1)


def _popcount(v: int) -> int:
    return bin(v).count("1")


def _mul_raw(x1: int, z1: int, e1: int, x2: int, z2: int, e2: int) -> tuple[int, int, int]:
    """Multiply operators written as ``i**e * X**x Z**z`` (no Y correction)."""
    # X^x1 Z^z1 X^x2 Z^z2 = (-1)^{|z1 & x2|} X^{x1^x2} Z^{z1^z2}
    return x1 ^ x2, z1 ^ z2, (e1 + e2 + 2 * _popcount(z1 & x2)) & 3


def _to_raw(p: "PauliString") -> tuple[int, int, int]:
    return p.x, p.z, ((0 if p.sign > 0 else 2) + _popcount(p.x & p.z)) & 3


def _from_raw(n: int, x: int, z: int, e: int) -> "PauliString":
    e = (e - _popcount(x & z)) & 3
    if e & 1:
        raise ValueError("product is not Hermitian (anticommuting factors)")
    return PauliString(n, x, z, 1 if e == 0 else -1)


@dataclass(frozen=True)
class PauliString:
    """A signed Pauli operator on ``n`` elements in symplectic form."""

    n: int
    x: int = 0
    z: int = 0
    sign: int = 1

    def __post_init__(self) -> None:
        mask = (1 << self.n) - 1
        if self.x & ~mask or self.z & ~mask or self.x < 0 or self.z < 0:
            raise ValueError("bit masks exceed the element count")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse labels such as ``"+XIZ"``, ``"-YY"`` or ``"Z_X"``."""
        sign = 1
        if label and label[0] in "+-":
            sign = -1 if label[0] == "-" else 1
            label = label[1:]
        x = z = 0
        for q, ch in enumerate(label):
            k = _CHARS.index("I" if ch == "_" else ch)
            x |= (k & 1) << q
            z |= (k >> 1) << q
        return cls(len(label), x, z, sign)

    @classmethod
    def single(cls, n: int, q: int, kind: str) -> "PauliString":
        k = _CHARS.index(kind)
        return cls(n, (k & 1) << q, (k >> 1) << q)

    def __str__(self) -> str:
        body = "".join(_CHARS[((self.x >> q) & 1) | (((self.z >> q) & 1) << 1)] for q in range(self.n))
        return ("+" if self.sign > 0 else "-") + body

    def __getitem__(self, q: int) -> str:
        return _CHARS[((self.x >> q) & 1) | (((self.z >> q) & 1) << 1)]

    def __neg__(self) -> "PauliString":
        return PauliString(self.n, self.x, self.z, -self.sign)

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n != other.n:
            raise ValueError("element count mismatch")
        return _from_raw(self.n, *_mul_raw(*_to_raw(self), *_to_raw(other)))

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    def commutes(self, other: "PauliString") -> bool:
        return (_popcount(self.x & other.z) + _popcount(self.z & other.x)) % 2 == 0

    def to_matrix(self) -> np.ndarray:
        """Dense matrix, element 0 is the most significant tensor factor."""
        mats = {"I": np.eye(2), "X": np.array([[0, 1], [1, 0]]),
                "Y": np.array([[0, -1j], [1j, 0]]), "Z": np.diag([1, -1])}
        out = np.array([[1.0 + 0j]])
        for q in range(self.n):
            out = np.kron(out, mats[self[q]])
        return self.sign * out


# ---------------------------------------------------------------------------
# Clifford gates

_S2 = 1 / np.sqrt(2)


@dataclass(frozen=True)
class Gate:
    """Clifford gate: conjugation images of each local generator and its unitary."""

    name: str
    arity: int
    x_images: tuple[PauliString, ...]
    z_images: tuple[PauliString, ...]
    matrix: np.ndarray = field(compare=False, repr=False)
    inverse: str = ""


def _gate(name, xs, zs, matrix, inverse=""):
    return Gate(name, len(xs), tuple(PauliString.from_label(s) for s in xs),
                tuple(PauliString.from_label(s) for s in zs),
                np.asarray(matrix, dtype=complex), inverse or name)


GATES: dict[str, Gate] = {
    g.name: g
    for g in [
        _gate("I", ["+X"], ["+Z"], np.eye(2)),
        _gate("X", ["+X"], ["-Z"], [[0, 1], [1, 0]]),
        _gate("Y", ["-X"], ["-Z"], [[0, -1j], [1j, 0]]),
        _gate("Z", ["-X"], ["+Z"], [[1, 0], [0, -1]]),
        _gate("H", ["+Z"], ["+X"], [[_S2, _S2], [_S2, -_S2]]),
        _gate("S", ["+Y"], ["+Z"], [[1, 0], [0, 1j]], "S_DAG"),
        _gate("S_DAG", ["-Y"], ["+Z"], [[1, 0], [0, -1j]], "S"),
        _gate("SQRT_X", ["+X"], ["-Y"], [[_S2, -1j * _S2], [-1j * _S2, _S2]], "SQRT_X_DAG"),
        _gate("SQRT_X_DAG", ["+X"], ["+Y"], [[_S2, 1j * _S2], [1j * _S2, _S2]], "SQRT_X"),
        _gate("SQRT_Y", ["-Z"], ["+X"], [[_S2, -_S2], [_S2, _S2]], "SQRT_Y_DAG"),
        _gate("SQRT_Y_DAG", ["+Z"], ["-X"], [[_S2, _S2], [-_S2, _S2]], "SQRT_Y"),
        _gate("CZ", ["+XZ", "+ZX"], ["+ZI", "+IZ"], np.diag([1, 1, 1, -1])),
        _gate("CX", ["+XX", "+IX"], ["+ZI", "+ZZ"],
              [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]),
        _gate("SWAP", ["+IX", "+XI"], ["+IZ", "+ZI"],
              [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]]),
        _gate("ISWAP", ["+ZY", "+YZ"], ["+IZ", "+ZI"],
              [[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], "ISWAP_DAG"),
        _gate("ISWAP_DAG", ["-ZY", "-YZ"], ["+IZ", "+ZI"],
              [[1, 0, 0, 0], [0, 0, -1j, 0], [0, -1j, 0, 0], [0, 0, 0, 1]], "ISWAP"),
    ]
}
# MOVE acts as an iSWAP on the qubit-resonator pair (resonator starts in |g>).
GATES["MOVE"] = GATES["ISWAP"]


def get_gate(name: str) -> Gate:
    try:
        return GATES[name]
    except KeyError:
        raise ValueError(f"unknown gate {name!r}") from None


def _embed(local: PauliString, targets: Sequence[int], n: int) -> tuple[int, int, int]:
    x = z = 0
    for j, q in enumerate(targets):
        x |= ((local.x >> j) & 1) << q
        z |= ((local.z >> j) & 1) << q
    return _to_raw(PauliString(n, x, z, local.sign))


def conjugate(p: PauliString, gate: Gate | str, targets: Sequence[int]) -> PauliString:
    """Return ``U p U^dagger`` for a Clifford ``U`` acting on ``targets``."""
    gate = get_gate(gate) if isinstance(gate, str) else gate
    _check_targets(gate, targets, p.n)
    tmask = 0
    for q in targets:
        tmask |= 1 << q
    x, z, e = _to_raw(p)
    acc = (x & ~tmask, z & ~tmask, e)
    for j, q in enumerate(targets):
        # X^a Z^b on target q maps to img(X)^a img(Z)^b
        if (x >> q) & 1:
            acc = _mul_raw(*acc, *_embed(gate.x_images[j], targets, p.n))
        if (z >> q) & 1:
            acc = _mul_raw(*acc, *_embed(gate.z_images[j], targets, p.n))
    return _from_raw(p.n, *acc)


def _check_targets(gate: Gate, targets: Sequence[int], n: int) -> None:
    if len(targets) != gate.arity:
        raise ValueError(f"{gate.name} takes {gate.arity} targets, got {len(targets)}")
    if len(set(targets)) != len(targets):
        raise ValueError("targets must be distinct")
    if any(not 0 <= q < n for q in targets):
        raise IndexError(f"target out of range for {n} elements")


# ---------------------------------------------------------------------------
# Tableau


class Tableau:
    """Stabilizer state with destabilizers, updated in place.

    Row ``i`` of ``stabs`` and ``destabs`` form a conjugate pair; the state
    starts as ``|0...0>`` (stabilizers ``+Z_q``, destabilizers ``+X_q``).
    """

    def __init__(self, n: int):
        self.n = n
        self.stabs = [PauliString.single(n, q, "Z") for q in range(n)]
        self.destabs = [PauliString.single(n, q, "X") for q in range(n)]

    def copy(self) -> "Tableau":
        t = Tableau.__new__(Tableau)
        t.n, t.stabs, t.destabs = self.n, list(self.stabs), list(self.destabs)
        return t

    def apply(self, gate: str, targets: Sequence[int]) -> "Tableau":
        g = get_gate(gate)
        _check_targets(g, targets, self.n)
        self.stabs = [conjugate(p, g, targets) for p in self.stabs]
        self.destabs = [conjugate(p, g, targets) for p in self.destabs]
        return self

    def apply_pauli(self, p: PauliString) -> "Tableau":
        """Multiply the state by a Pauli: flips the signs of anticommuting rows."""
        self.stabs = [s if s.commutes(p) else -s for s in self.stabs]
        self.destabs = [d if d.commutes(p) else -d for d in self.destabs]
        return self

    def peek_z(self, q: int) -> int | None:
        """Deterministic outcome of measuring ``Z_q``, or ``None`` if random."""
        if any((s.x >> q) & 1 for s in self.stabs):
            return None
        acc = PauliString(self.n)
        for d, s in zip(self.destabs, self.stabs):
            if (d.x >> q) & 1:
                acc = acc * s
        return 0 if acc.sign > 0 else 1

    def measure(self, q: int, rng: np.random.Generator | None = None,
                force: int | None = None) -> int:
        """Measure ``Z_q``; random outcomes use ``rng`` unless ``force`` is given."""
        if not 0 <= q < self.n:
            raise IndexError(f"target {q} out of range for {self.n} elements")
        det = self.peek_z(q)
        if det is not None:
            return det
        p = next(i for i, s in enumerate(self.stabs) if (s.x >> q) & 1)
        piv = self.stabs[p]
        # destabilizer p is overwritten below; every other row commutes with piv
        for rows in (self.stabs, self.destabs):
            for i, r in enumerate(rows):
                if i != p and (r.x >> q) & 1:
                    rows[i] = r * piv
        self.destabs[p] = piv
        if force is not None:
            bit = int(force)
        else:
            bit = int(rng.integers(2))
        self.stabs[p] = PauliString(self.n, 0, 1 << q, -1 if bit else 1)
        return bit

    def reset(self, q: int, rng: np.random.Generator | None = None) -> "Tableau":
        if self.measure(q, rng, force=None if rng is not None else 0):
            self.apply("X", [q])
        return self

    def check(self) -> None:
        """Raise ``AssertionError`` if the group invariants are broken."""
        n = self.n
        for i in range(n):
            for j in range(n):
                assert self.stabs[i].commutes(self.stabs[j]), "stabilizers must commute"
                assert self.destabs[i].commutes(self.stabs[j]) == (i != j), "bad destabilizer pairing"
        assert _rank([(s.x | (s.z << n)) for s in self.stabs + self.destabs]) == 2 * n, "rank loss"

    def stabilizer_group_contains(self, p: PauliString) -> bool:
        """True iff ``p`` (with sign) is an element of the stabilizer group."""
        if not all(p.commutes(s) for s in self.stabs):
            return False
        acc = PauliString(self.n)
        for d, s in zip(self.destabs, self.stabs):
            if not d.commutes(p):
                acc = acc * s
        return acc == p


def _rank(vectors: Iterable[int]) -> int:
    basis: list[int] = []
    for v in vectors:
        for b in basis:
            v = min(v, v ^ b)
        if v:
            basis.append(v)
    return len(basis)


def apply_clifford(tableau: Tableau, gate: str, targets: Sequence[int]) -> Tableau:
    """Functional form of :meth:`Tableau.apply`; the input is left untouched."""
    return tableau.copy().apply(gate, targets)


def measure_z(tableau: Tableau, target: int, rng: np.random.Generator) -> tuple[int, Tableau]:
    t = tableau.copy()
    return t.measure(target, rng), t


# ---------------------------------------------------------------------------
# Noise


NOISE_KINDS = {"depolarize1": 1, "depolarize2": 2, "pauli_channel_1": 1, "bitflip": 1}


@dataclass(frozen=True)
class NoiseEvent:
    """A Pauli channel on one or two elements.

    ``probs`` is ``(p,)`` for ``depolarize1``/``depolarize2``/``bitflip`` and
    ``(px, py, pz)`` for ``pauli_channel_1``.  ``source`` labels the error
    type (``sqg``, ``move``, ``cz``, ``readout``, ``idling``, ``thermal``).
    """

    kind: str
    probs: tuple[float, ...]
    targets: tuple[int, ...]
    source: str = ""

    def __post_init__(self) -> None:
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise channel {self.kind!r}")
        if len(self.targets) != NOISE_KINDS[self.kind]:
            raise ValueError(f"{self.kind} takes {NOISE_KINDS[self.kind]} targets")
        want = 3 if self.kind == "pauli_channel_1" else 1
        if len(self.probs) != want:
            raise ValueError(f"{self.kind} takes {want} probabilities")
        if any(not 0.0 <= p <= 1.0 for p in self.probs) or sum(self.probs) > 1.0 + 1e-12:
            raise ValueError(f"invalid probabilities {self.probs}")

    @property
    def total(self) -> float:
        return float(sum(self.probs))

    def pauli_distribution(self) -> list[tuple[PauliString, float]]:
        """Non-identity Paulis (local to ``targets``) with their probabilities."""
        if self.kind == "bitflip":
            return [(PauliString.from_label("X"), self.probs[0])]
        if self.kind == "pauli_channel_1":
            return [(PauliString.from_label(c), p) for c, p in zip("XYZ", self.probs)]
        if self.kind == "depolarize1":
            return [(PauliString.from_label(c), self.probs[0] / 3) for c in "XYZ"]
        return [(PauliString.from_label(a + b), self.probs[0] / 15)
                for a in "IXYZ" for b in "IXYZ" if a + b != "II"]


def sample_noise(event: NoiseEvent, rng: np.random.Generator) -> PauliString | None:
    """Draw one Pauli from the channel; ``None`` means identity."""
    u = rng.random()
    for pauli, p in event.pauli_distribution():
        if u < p:
            return pauli
        u -= p
    return None
