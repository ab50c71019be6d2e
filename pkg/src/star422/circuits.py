"""Timed circuit construction for every experiment, and noise compilation.

Elements are indexed in the device's element order (QB1..QB6, Res).  MOVE
is the same iSWAP-like gate in both directions; a round trip through the
resonator therefore leaves a ``Z`` on the qubit, which is why each ancilla
gets two ``SQRT_Y`` gates (not ``SQRT_Y`` then ``SQRT_Y_DAG``): with that
choice the measured bit of a cycle is ``d_n = d_{n-1} XOR parity``.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Iterable, Sequence

from .device import DATA_ROLES, DeviceModel, channel_params, idling_channel
from .pauli import NoiseEvent
from .program import CircuitProgram, Instruction, MeasureSlot

EXPERIMENTS = ("single_stabilizer", "lifetime", "tomography", "bell_lifetime", "bell_tomography")

_PREP_GATE = {"0": None, "1": "X", "+": "SQRT_Y", "-": "SQRT_Y_DAG"}
# rotation U applied before Z readout so that U^dag Z U is the listed Pauli
READOUT_ROTATION = {"Z": None, "X": "SQRT_Y_DAG", "Y": "SQRT_X"}

Z_STATES = ("0000", "0011", "0101", "1001", "1111", "1100", "1010", "0110")
X_STATES = ("++++", "+-+-", "++--", "-++-", "----", "-+-+", "--++", "+--+")
LIFETIME_STATES = ("0000", "0011", "0101", "1001", "++++", "+-+-", "++--", "-++-")
TOMOGRAPHY_STATES = ("0000", "1111", "0011", "1100", "0101", "1010", "0110", "1001",
                     "----", "++++", "+-+-", "-+-+", "--++", "++--", "+--+", "-++-")


def readout_basis(psi_in: str) -> str:
    if set(psi_in) <= set("01"):
        return "Z"
    if set(psi_in) <= set("+-"):
        return "X"
    raise ValueError(f"mixed-basis input {psi_in!r} has no single readout basis")


class _Builder:
    """ASAP scheduler: an operation starts once all its elements are free."""

    def __init__(self, device: DeviceModel):
        self.dev = device
        self.n = len(device.elements)
        self.free = [0.0] * self.n
        self.ins: list[Instruction] = []
        self.cycles: dict[str, int | None] = {}

    def q(self, role: str) -> int:
        return self.dev.index(role)

    def gate(self, name: str, roles: Sequence[str] | str, at: float = 0.0) -> Instruction:
        roles = (roles,) if isinstance(roles, str) else tuple(roles)
        targets = tuple(self.q(r) for r in roles)
        if name in ("CZ", "MOVE"):
            kind = name.lower()
        else:
            kind = "sqg"
        dur = self.dev.durations_ns[kind]
        start = max([at] + [self.free[t] for t in targets])
        ins = Instruction("gate", targets, name, start, dur, role=kind)
        self.ins.append(ins)
        for t in targets:
            self.free[t] = start + dur
        return ins

    def measure(self, role: str, tag: str, cycle: int | None, at: float = 0.0) -> Instruction:
        t = self.q(role)
        dur = self.dev.durations_ns["readout"]
        start = max(at, self.free[t])
        ins = Instruction("measure", (t,), tag, start, dur, role="readout")
        self.ins.append(ins)
        self.free[t] = start + dur
        self.cycles[tag] = cycle
        return ins

    def reset_all(self) -> None:
        for t in range(self.n):
            self.ins.append(Instruction("reset", (t,), start=0.0, role="prep"))

    def end(self) -> float:
        return max(self.free)

    def program(self, meta: dict | None = None) -> CircuitProgram:
        ins = sorted(self.ins, key=lambda i: i.start)  # stable: keeps issue order at ties
        schema = [MeasureSlot(i.name, self.cycles[i.name], i.targets[0]) for i in ins if i.kind == "measure"]
        prog = CircuitProgram(self.dev.element_names, ins, schema, meta=dict(meta or {}))
        prog.validate()
        return prog


# ---------------------------------------------------------------------------
# fragments


def _prep(b: _Builder, psi_in: str) -> None:
    if len(psi_in) != 4 or any(c not in _PREP_GATE for c in psi_in):
        raise ValueError(f"unsupported product state {psi_in!r}")
    b.reset_all()
    for role, c in zip(DATA_ROLES, psi_in):
        if _PREP_GATE[c]:
            b.gate(_PREP_GATE[c], role)


def _bell_prep(b: _Builder) -> None:
    # qubit-qubit CZ through the resonator: MOVE in, CZ, MOVE out; the MOVE
    # round trip adds Z on the moved qubit, absorbed by the basis choices
    b.reset_all()
    for first, second in (("D1", "D4"), ("D2", "D3")):
        b.gate("SQRT_Y", first)
        b.gate("SQRT_Y", second)
        b.gate("MOVE", (first, "Res"))
        b.gate("CZ", ("Res", second))
        b.gate("MOVE", (first, "Res"))
        b.gate("SQRT_Y_DAG", second)


def _x_half(b: _Builder, t0: float, cycle: int) -> None:
    res = b.q("Res")
    at = max(t0, b.free[res] - b.dev.durations_ns["sqg"])
    b.gate("SQRT_Y", "A_X", at=at)
    for d in DATA_ROLES:
        b.gate("SQRT_Y", d, at=at)
    b.gate("MOVE", ("A_X", "Res"))
    for d in b.dev.cz_order:
        b.gate("CZ", ("Res", d))
    b.gate("MOVE", ("A_X", "Res"))
    layer = b.free[b.q("A_X")]
    b.gate("SQRT_Y", "A_X", at=layer)
    for d in DATA_ROLES:
        b.gate("SQRT_Y_DAG", d, at=layer)
    b.measure("A_X", f"AX_{cycle}", cycle)


def _z_half(b: _Builder, t0: float, cycle: int) -> None:
    res = b.q("Res")
    b.gate("SQRT_Y", "A_Z", at=max(t0, b.free[res] - b.dev.durations_ns["sqg"]))
    b.gate("MOVE", ("A_Z", "Res"))
    for d in b.dev.cz_order:
        b.gate("CZ", ("Res", d))
    b.gate("MOVE", ("A_Z", "Res"))
    b.gate("SQRT_Y", "A_Z")
    b.measure("A_Z", f"AZ_{cycle}", cycle)


def _cycle(b: _Builder, t0: float, cycle: int) -> float:
    halves = (_x_half, _z_half) if b.dev.stab_order == "xz" else (_z_half, _x_half)
    for half in halves:
        half(b, t0, cycle)
    t_end = t0 + b.dev.t_cycle_us * 1e3
    if b.end() > t_end + 1e-6:
        raise ValueError(
            f"cycle operations need {b.end() - t0:.0f} ns, longer than t_cycle={t_end - t0:.0f} ns")
    return t_end


def _final_readout(b: _Builder, t0: float, bases: str) -> None:
    rot = [READOUT_ROTATION[c] for c in bases]
    if any(rot):
        for d, g in zip(DATA_ROLES, rot):
            if g:
                b.gate(g, d, at=t0)
        t0 = max(b.free[b.q(d)] for d in DATA_ROLES)
    for d in DATA_ROLES:
        b.measure(d, d, None, at=t0)


def build_prep(psi_in: str, device: DeviceModel) -> CircuitProgram:
    b = _Builder(device)
    _prep(b, psi_in)
    return b.program({"fragment": "prep", "psi_in": psi_in})


def build_bell_prep(device: DeviceModel) -> CircuitProgram:
    b = _Builder(device)
    _bell_prep(b)
    return b.program({"fragment": "bell_prep"})


def build_cycle(device: DeviceModel, cycle: int = 1) -> CircuitProgram:
    b = _Builder(device)
    _cycle(b, 0.0, cycle)
    return b.program({"fragment": "cycle"})


def build_experiment(kind: str, device: DeviceModel, state: str = "0000", cycles: int = 1,
                     setting: str | None = None, stabilizer: str | None = None) -> CircuitProgram:
    """Noise-free timed program for one experiment.

    ``state`` is a product input state (ignored for Bell experiments);
    ``setting`` is a 4-letter tomography basis string over {Z, X, Y};
    ``stabilizer`` selects the half-circuit for ``single_stabilizer``.
    """
    if kind not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {kind!r}")
    if cycles < 0:
        raise ValueError("cycle count must be >= 0")
    if kind == "single_stabilizer":
        if cycles != 1:
            raise ValueError("single_stabilizer runs exactly one half-cycle")
        if stabilizer not in ("X", "Z"):
            raise ValueError("single_stabilizer needs stabilizer='X' or 'Z'")
    if kind in ("lifetime", "bell_lifetime") and cycles < 1:
        raise ValueError(f"{kind} needs at least one cycle")
    tomo = kind in ("tomography", "bell_tomography")
    if tomo:
        if setting is None or len(setting) != 4 or set(setting) - set("ZXY"):
            raise ValueError("tomography needs a 4-letter setting over Z/X/Y")
    elif setting is not None:
        raise ValueError(f"{kind} does not take a tomography setting")

    b = _Builder(device)
    bell = kind.startswith("bell")
    if bell:
        _bell_prep(b)
        basis = "Z"
    else:
        _prep(b, state)
        basis = readout_basis(state)
    t = b.end()
    if kind == "single_stabilizer":
        (_x_half if stabilizer == "X" else _z_half)(b, t, 1)
        t = max(b.free[b.q(d)] for d in DATA_ROLES)
    else:
        for n in range(1, cycles + 1):
            t = _cycle(b, t, n)
    bases = setting if tomo else basis * 4
    _final_readout(b, t, bases)
    meta = {"kind": kind, "state": "bell" if bell else state, "cycles": cycles,
            "basis": basis, "setting": setting, "stabilizer": stabilizer,
            "t_cycle_us": device.t_cycle_us}
    return b.program(meta)


# ---------------------------------------------------------------------------
# noise


def _timeline(program: CircuitProgram, q: int) -> list[Instruction]:
    return [i for i in program.instructions if q in i.targets and i.kind in ("gate", "measure", "reset")]


def idle_windows(program: CircuitProgram, q: int) -> list[tuple[float, float]]:
    """Idle ``(start, end)`` windows of element ``q`` that precede an operation."""
    out, last = [], 0.0
    for ins in _timeline(program, q):
        if ins.start > last + 1e-9:
            out.append((last, ins.start))
        last = max(last, ins.end)
    return out


def idle_time(program: CircuitProgram, q: int) -> float:
    """Total idle time including the tail after the element's last operation."""
    return program.duration - program.busy_time(q)


def compile_noise(program: CircuitProgram, device: DeviceModel,
                  suppress: Iterable[str] = ()) -> CircuitProgram:
    """Insert the error model around every operation and idle window.

    ``suppress`` removes whole error types (see ``ERROR_TYPES``).  The
    resonator only receives idling noise while it holds a moved state; in
    between it sits in its ground state.
    """
    if program.compiled:
        raise ValueError("program is already noise-compiled")
    suppress = set(suppress)
    cp = channel_params(device)
    names = program.elements
    res = device.index("Res")
    last_end = [0.0] * program.n
    res_loaded = False
    out: list[Instruction] = []

    def emit(kind, probs, targets, source, t):
        if source in suppress:
            return
        ev = NoiseEvent(kind, tuple(probs), tuple(targets), source)
        out.append(Instruction("noise", ev.targets, start=t, noise=ev))

    for ins in program.instructions:
        if ins.kind in ("noise", "barrier"):
            out.append(ins)
            continue
        for q in ins.targets:
            gap = ins.start - last_end[q]
            if gap > 1e-9 and (q != res or res_loaded):
                el = names[q]
                t1, t2 = device.elements[el].t1_us, device.t2(el)
                if q == res:
                    t2 = min(t2, 2 * t1)
                emit("pauli_channel_1", idling_channel(gap, t1, t2), (q,), "idling", last_end[q])
            last_end[q] = max(last_end[q], ins.end)
        if ins.kind == "measure":
            emit("depolarize1", (cp.readout[names[ins.targets[0]]],), ins.targets, "readout", ins.start)
        out.append(ins)
        if ins.kind == "reset":
            emit("bitflip", (cp.thermal[names[ins.targets[0]]],), ins.targets, "thermal", ins.end)
        elif ins.kind == "gate":
            if ins.role == "sqg":
                emit("depolarize1", (cp.sqg[names[ins.targets[0]]],), ins.targets, "sqg", ins.end)
            else:
                qubit = next(t for t in ins.targets if t != res)
                table = cp.move if ins.role == "move" else cp.cz
                emit("depolarize2", (table[names[qubit]],), ins.targets, ins.role, ins.end)
                if ins.role == "move":
                    res_loaded = not res_loaded
    return replace(program, instructions=out, compiled=True, meta=dict(program.meta))


def experiment_program(kind: str, device: DeviceModel, state: str = "0000", cycles: int = 1,
                       setting: str | None = None, stabilizer: str | None = None,
                       noisy: bool = True, suppress: Iterable[str] = ()) -> CircuitProgram:
    """``build_experiment`` followed by ``compile_noise``."""
    prog = build_experiment(kind, device, state, cycles, setting, stabilizer)
    if not noisy:
        return prog
    return compile_noise(prog, device, suppress)


def mute_noise(program: CircuitProgram, sources: Iterable[str]) -> CircuitProgram:
    """Disable noise events of the given error types without removing them.

    Muted events keep their place, so the sampler consumes the same random
    numbers as for the unmuted program.  Ablations built this way share
    their randomness with the full-noise run (common random numbers).
    """
    if not program.compiled:
        raise ValueError("program has no noise to mute")
    sources = set(sources)
    out = [replace(i, role="muted") if i.kind == "noise" and i.noise.source in sources else i
           for i in program.instructions]
    return replace(program, instructions=out, meta=dict(program.meta))
