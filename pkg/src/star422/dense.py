"""Dense state-vector / density-matrix reference simulator (n <= 8).

Used only as an independent oracle.  Element 0 is the most significant
tensor factor, so basis index ``b`` has element ``q`` in bit ``n-1-q``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pauli import GATES, PauliString
from .program import CircuitProgram

MAX_ELEMENTS = 8


@dataclass
class DenseState:
    """A pure state (``data.ndim == 1``) or a density matrix (``data.ndim == 2``)."""

    n: int
    data: np.ndarray

    def __post_init__(self) -> None:
        if self.n > MAX_ELEMENTS:
            raise ValueError(f"dense states are limited to {MAX_ELEMENTS} elements")
        d = 2**self.n
        if self.data.shape not in ((d,), (d, d)):
            raise ValueError(f"expected dimension {d}, got {self.data.shape}")

    @classmethod
    def zero(cls, n: int) -> "DenseState":
        v = np.zeros(2**n, complex)
        v[0] = 1
        return cls(n, v)

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    def density(self) -> np.ndarray:
        return np.outer(self.data, self.data.conj()) if self.is_pure else self.data

    def expectation(self, op: PauliString | np.ndarray) -> float:
        m = op.to_matrix() if isinstance(op, PauliString) else op
        if self.is_pure:
            return float(np.real(self.data.conj() @ m @ self.data))
        return float(np.real(np.trace(m @ self.data)))

    def fidelity(self, psi: np.ndarray) -> float:
        """``<psi|rho|psi>`` for a normalized pure ``psi``."""
        if self.is_pure:
            return float(abs(np.vdot(psi, self.data)) ** 2)
        return float(np.real(psi.conj() @ self.data @ psi))

    def check(self) -> None:
        if self.is_pure:
            assert abs(np.linalg.norm(self.data) - 1) < 1e-10, "state not normalized"
            return
        rho = self.data
        assert abs(np.trace(rho) - 1) < 1e-10, "trace != 1"
        assert np.allclose(rho, rho.conj().T, atol=1e-12), "not Hermitian"
        assert np.linalg.eigvalsh(rho).min() > -1e-9, "not positive semidefinite"


def _apply_op(t: np.ndarray, op: np.ndarray, targets: Sequence[int], n: int, dm: bool) -> np.ndarray:
    """Apply ``op`` to a state tensor of shape ``(2,)*n`` or ``(2,)*2n``."""
    k = len(targets)
    opt = op.reshape((2,) * 2 * k)
    # left multiplication on row indices
    t = np.tensordot(opt, t, axes=(list(range(k, 2 * k)), list(targets)))
    t = np.moveaxis(t, list(range(k)), list(targets))
    if dm:
        cols = [n + q for q in targets]
        t = np.tensordot(t, opt.conj(), axes=(cols, list(range(k, 2 * k))))
        t = np.moveaxis(t, list(range(2 * n - k, 2 * n)), cols)
    return t


def apply_unitary(state: DenseState, u: np.ndarray, targets: Sequence[int]) -> DenseState:
    n = state.n
    shape = (2,) * (n if state.is_pure else 2 * n)
    t = _apply_op(state.data.reshape(shape), u, targets, n, not state.is_pure)
    return DenseState(n, t.reshape(state.data.shape))


class _Branches:
    """Unnormalized density tensors keyed by measurement record."""

    def __init__(self, n: int):
        self.n = n
        rho = np.zeros((2**n, 2**n), complex)
        rho[0, 0] = 1
        self.items: dict[tuple[int, ...], np.ndarray] = {(): rho.reshape((2,) * 2 * n)}

    def unitary(self, u, targets):
        self.items = {k: _apply_op(v, u, targets, self.n, True) for k, v in self.items.items()}

    def mixture(self, terms, targets):
        # terms: list of (prob, matrix) including identity weight
        out = {}
        for k, v in self.items.items():
            acc = 0
            for p, m in terms:
                if p > 0:
                    acc = acc + p * _apply_op(v, m, targets, self.n, True)
            out[k] = acc
        self.items = out

    def _project(self, v, q, bit):
        idx = [slice(None)] * (2 * self.n)
        out = np.zeros_like(v)
        idx[q] = bit
        idx[self.n + q] = bit
        out[tuple(idx)] = v[tuple(idx)]
        return out

    def measure(self, q):
        out = {}
        for k, v in self.items.items():
            for bit in (0, 1):
                w = self._project(v, q, bit)
                if _trace(w, self.n) > 1e-14:
                    out[k + (bit,)] = w
        self.items = out

    def reset(self, q):
        x = np.array([[0, 1], [1, 0]], complex)
        out = {}
        for k, v in self.items.items():
            out[k] = self._project(v, q, 0) + _apply_op(self._project(v, q, 1), x, [q], self.n, True)
        self.items = out


def _trace(t: np.ndarray, n: int) -> float:
    d = 2**n
    return float(np.real(np.trace(t.reshape(d, d))))


def _run(program: CircuitProgram, keep_records: bool) -> _Branches:
    if program.n > MAX_ELEMENTS:
        raise ValueError(f"dense oracle supports at most {MAX_ELEMENTS} elements, got {program.n}")
    br = _Branches(program.n)
    for ins in program.instructions:
        if ins.kind == "gate":
            br.unitary(GATES[ins.name].matrix, ins.targets)
        elif ins.kind == "reset":
            br.reset(ins.targets[0])
        elif ins.kind == "measure":
            br.measure(ins.targets[0])
            if not keep_records:
                br.items = {(): sum(br.items.values())}
        elif ins.kind == "noise" and ins.role != "muted":
            ev = ins.noise
            terms = [(1 - ev.total, np.eye(2 ** len(ev.targets)))]
            terms += [(p, pauli.to_matrix()) for pauli, p in ev.pauli_distribution()]
            br.mixture(terms, ev.targets)
    return br


def dense_distribution(program: CircuitProgram) -> dict[tuple[int, ...], float]:
    """Exact joint distribution of all measurement bits (in schema order)."""
    br = _run(program, keep_records=True)
    return {k: _trace(v, program.n) for k, v in br.items.items()}


def dense_final_state(program: CircuitProgram) -> DenseState:
    """Density matrix at the end of a program, averaged over measurement records."""
    br = _run(program, keep_records=False)
    d = 2**program.n
    return DenseState(program.n, br.items[()].reshape(d, d))


def dense_reference_run(program: CircuitProgram, shots: int, rng: np.random.Generator) -> Counter:
    """Empirical outcome histogram drawn from the exact distribution."""
    dist = dense_distribution(program)
    keys = list(dist)
    p = np.array([dist[k] for k in keys])
    draws = rng.choice(len(keys), size=shots, p=p / p.sum())
    return Counter(keys[i] for i in draws)
