"""Timed instruction lists over named elements."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .pauli import NoiseEvent, get_gate

KINDS = ("reset", "gate", "measure", "noise", "barrier")


@dataclass(frozen=True)
class Instruction:
    """One operation.  ``start`` and ``duration`` are in ns.

    ``name`` is the gate name for ``gate`` instructions and the measurement
    tag for ``measure`` instructions.  ``role`` records what the operation
    is physically (``sqg``, ``cz``, ``move``, ``readout``, ``prep``) so that
    noise compilation can pick the right channel.
    """

    kind: str
    targets: tuple[int, ...]
    name: str = ""
    start: float = 0.0
    duration: float = 0.0
    role: str = ""
    noise: NoiseEvent | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown instruction kind {self.kind!r}")
        if self.kind == "gate":
            g = get_gate(self.name)
            if g.arity != len(self.targets):
                raise ValueError(f"{self.name} takes {g.arity} targets")
        if self.kind == "noise" and self.noise is None:
            raise ValueError("noise instruction without an event")
        if self.kind in ("measure", "reset") and len(self.targets) != 1:
            raise ValueError(f"{self.kind} takes exactly one target")

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class MeasureSlot:
    tag: str
    cycle: int | None  # None for final data readout
    element: int


@dataclass
class CircuitProgram:
    """Time-sorted instructions plus the measurement schema.

    ``meta`` carries experiment bookkeeping (kind, input state, readout
    basis, tomography setting, cycle count) that analysis code reads back.
    """

    elements: tuple[str, ...]
    instructions: list[Instruction] = field(default_factory=list)
    schema: list[MeasureSlot] = field(default_factory=list)
    compiled: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.elements)

    @property
    def tags(self) -> list[str]:
        return [s.tag for s in self.schema]

    @property
    def duration(self) -> float:
        return max((i.end for i in self.instructions), default=0.0)

    def validate(self) -> None:
        tags = [i.name for i in self.instructions if i.kind == "measure"]
        if len(set(tags)) != len(tags):
            raise ValueError("measurement tags must be unique")
        if tags != self.tags:
            raise ValueError("measurement schema does not match instructions")
        for ins in self.instructions:
            if any(not 0 <= q < self.n for q in ins.targets):
                raise IndexError(f"instruction {ins} targets a missing element")
        # timed operations on one element must not overlap
        busy: dict[int, list[tuple[float, float]]] = {}
        for ins in self.instructions:
            if ins.kind in ("noise", "barrier") or ins.duration == 0:
                continue
            for q in ins.targets:
                busy.setdefault(q, []).append((ins.start, ins.end))
        for q, spans in busy.items():
            spans.sort()
            for (s0, e0), (s1, _) in zip(spans, spans[1:]):
                if s1 < e0 - 1e-9:
                    raise ValueError(f"overlapping operations on {self.elements[q]} at {s1} ns")

    def digest(self) -> str:
        """Content hash of everything that affects sampling."""
        h = hashlib.sha256()
        h.update(json.dumps(list(self.elements)).encode())
        for ins in self.instructions:
            ev = ins.noise
            h.update(repr((ins.kind, ins.targets, ins.name, ins.role == "muted",
                           None if ev is None else (ev.kind, tuple(float(p).hex() for p in ev.probs),
                                                    ev.targets))).encode())
        return h.hexdigest()

    def busy_time(self, q: int) -> float:
        return sum(i.duration for i in self.instructions
                   if q in i.targets and i.kind not in ("noise", "barrier"))

    def count(self, kind: str, name: str | None = None, role: str | None = None) -> int:
        return sum(1 for i in self.instructions if i.kind == kind
                   and (name is None or i.name == name) and (role is None or i.role == role))


def simple_program(n: int, ops: Iterable[Sequence], names: Sequence[str] | None = None) -> CircuitProgram:
    """Build an untimed program from compact tuples.

    ``("R", q)`` reset, ``("G", name, q0, ...)`` gate, ``("M", q)`` measure,
    ``("N", kind, probs, q0, ...)`` noise.  Measurement tags are ``m0, m1, ...``.
    """
    prog = CircuitProgram(tuple(names or (f"q{i}" for i in range(n))))
    for op in ops:
        code = op[0]
        if code == "R":
            prog.instructions.append(Instruction("reset", (op[1],)))
        elif code == "G":
            prog.instructions.append(Instruction("gate", tuple(op[2:]), op[1]))
        elif code == "M":
            tag = f"m{len(prog.schema)}"
            prog.instructions.append(Instruction("measure", (op[1],), tag))
            prog.schema.append(MeasureSlot(tag, None, op[1]))
        elif code == "N":
            ev = NoiseEvent(op[1], tuple(op[2]), tuple(op[3:]))
            prog.instructions.append(Instruction("noise", ev.targets, noise=ev))
        else:
            raise ValueError(f"unknown op code {code!r}")
    prog.validate()
    return prog


def shifted(ins: Instruction, dt: float) -> Instruction:
    return replace(ins, start=ins.start + dt)
