"""Device calibration model and the gate/idle/readout/thermal channel parameters."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Mapping

import yaml

PLANCK = 6.62607015e-34
BOLTZMANN = 1.380649e-23

ROLES = ("D1", "D2", "D3", "D4", "A_X", "A_Z", "Res")
DATA_ROLES = ("D1", "D2", "D3", "D4")
ERROR_TYPES = ("sqg", "move", "cz", "readout", "idling", "thermal")
# last two CZ partners set which weight-2 hook error goes undetected
DEFAULT_CZ_ORDER = ("D1", "D3", "D2", "D4")
DEFAULT_DURATIONS_NS = {"sqg": 32.0, "cz": 60.0, "move": 100.0, "readout": 1100.0}


@dataclass(frozen=True)
class ElementParams:
    """Calibration of one qubit or of the resonator (fidelities as fractions)."""

    freq_ghz: float
    t1_us: float
    t2_star_us: float
    temp_mk: float | None = None
    t2_echo_us: float | None = None
    f_ro: float = 1.0
    f_sqg_ind: float = 1.0
    f_sqg_sim: float = 1.0
    f_move: float = 1.0
    f_cz: float = 1.0


@dataclass(frozen=True)
class DeviceModel:
    name: str
    elements: dict[str, ElementParams]
    roles: dict[str, str]  # element name -> role
    durations_ns: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_DURATIONS_NS))
    t_cycle_us: float = 2.05
    t2_choice: str = "star"
    stab_order: str = "xz"
    cz_order: tuple[str, ...] = DEFAULT_CZ_ORDER

    def __post_init__(self) -> None:
        if sorted(self.roles.values()) != sorted(ROLES) or set(self.roles) != set(self.elements):
            raise ValueError("role map must be a bijection from elements onto the seven roles")
        for el, p in self.elements.items():
            for f in ("f_ro", "f_sqg_ind", "f_sqg_sim", "f_move", "f_cz"):
                if not 0 < getattr(p, f) <= 1:
                    raise ValueError(f"{el}.{f} must lie in (0, 1]")
            if p.t1_us <= 0 or p.t2_star_us <= 0 or (p.t2_echo_us is not None and p.t2_echo_us <= 0):
                raise ValueError(f"{el}: coherence times must be positive")
        if any(v <= 0 for v in self.durations_ns.values()) or self.t_cycle_us <= 0:
            raise ValueError("durations must be positive")
        if self.t2_choice not in ("star", "echo"):
            raise ValueError("t2_choice must be 'star' or 'echo'")
        if self.stab_order not in ("xz", "zx"):
            raise ValueError("stab_order must be 'xz' or 'zx'")
        if sorted(self.cz_order) != sorted(DATA_ROLES):
            raise ValueError("cz_order must be a permutation of D1..D4")

    # -- lookups -----------------------------------------------------------

    @property
    def element_names(self) -> tuple[str, ...]:
        return tuple(self.elements)

    def element(self, role: str) -> str:
        for el, r in self.roles.items():
            if r == role:
                return el
        raise KeyError(role)

    def index(self, role: str) -> int:
        return self.element_names.index(self.element(role))

    def params(self, role: str) -> ElementParams:
        return self.elements[self.element(role)]

    def t2(self, element: str) -> float:
        p = self.elements[element]
        if self.t2_choice == "echo" and p.t2_echo_us is not None:
            return p.t2_echo_us
        return p.t2_star_us

    def temperature_mk(self, element: str) -> float:
        """Qubit temperature; the resonator uses the mean over qubits."""
        t = self.elements[element].temp_mk
        if t is not None:
            return t
        temps = [p.temp_mk for p in self.elements.values() if p.temp_mk is not None]
        return sum(temps) / len(temps)

    def with_options(self, **kw) -> "DeviceModel":
        return replace(self, **kw)

    # -- io ----------------------------------------------------------------

    @classmethod
    def from_dict(cls, d: Mapping) -> "DeviceModel":
        elements = {k: ElementParams(**v) for k, v in d["elements"].items()}
        durations = dict(DEFAULT_DURATIONS_NS)
        durations.update({k: float(v) for k, v in d.get("durations_ns", {}).items()})
        return cls(
            name=d.get("name", "custom"),
            elements=elements,
            roles=dict(d["roles"]),
            durations_ns=durations,
            t_cycle_us=float(d.get("t_cycle_us", 2.05)),
            t2_choice=d.get("t2_choice", "star"),
            stab_order=d.get("stab_order", "xz"),
            cz_order=tuple(d.get("cz_order", DEFAULT_CZ_ORDER)),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "t_cycle_us": self.t_cycle_us,
            "t2_choice": self.t2_choice,
            "stab_order": self.stab_order,
            "cz_order": list(self.cz_order),
            "durations_ns": dict(self.durations_ns),
            "roles": dict(self.roles),
            "elements": {k: {f: v for f, v in asdict(p).items() if v is not None}
                         for k, p in self.elements.items()},
        }

    @classmethod
    def from_yaml(cls, path: str | Path) -> "DeviceModel":
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh))


PRESETS = ("A", "B", "ideal")


def load_device(name: str) -> DeviceModel:
    """Load a bundled preset (``A``, ``B``, ``ideal``) or a YAML file path."""
    key = name.removeprefix("config_")
    if key in ("A", "B"):
        text = resources.files("star422.presets").joinpath(f"config_{key}.yaml").read_text()
        return DeviceModel.from_dict(yaml.safe_load(text))
    if key == "ideal":
        return noiseless_device()
    path = Path(name)
    if not path.exists():
        raise ValueError(f"unknown device preset or missing file: {name!r}")
    return DeviceModel.from_yaml(path)


def noiseless_device(base: DeviceModel | None = None) -> DeviceModel:
    """Same layout and timing as ``base`` (config A by default) with every error off."""
    base = base or load_device("A")
    clean = {
        el: ElementParams(freq_ghz=p.freq_ghz, t1_us=math.inf, t2_star_us=math.inf,
                          temp_mk=0.0, t2_echo_us=math.inf)
        for el, p in base.elements.items()
    }
    return replace(base, name="ideal", elements=clean)


# ---------------------------------------------------------------------------
# channel parameters


def thermal_probability(freq_ghz: float, temp_mk: float) -> float:
    """Boltzmann excitation ``exp(-h f / k_B T)``."""
    if temp_mk <= 0:
        return 0.0
    return math.exp(-PLANCK * freq_ghz * 1e9 / (BOLTZMANN * temp_mk * 1e-3))


@dataclass(frozen=True)
class ChannelParams:
    """Per-element error probabilities, keyed by element name.

    ``move`` and ``cz`` are keyed by the qubit partnering the resonator.
    """

    sqg: dict[str, float]
    move: dict[str, float]
    cz: dict[str, float]
    readout: dict[str, float]
    thermal: dict[str, float]


def channel_params(device: DeviceModel) -> ChannelParams:
    qubits = [el for el, r in device.roles.items() if r != "Res"]
    e = device.elements
    return ChannelParams(
        sqg={q: 2 * (1 - e[q].f_sqg_sim) for q in qubits},
        move={q: 4 / 3 * (1 - math.sqrt(e[q].f_move)) for q in qubits},
        cz={q: 4 / 3 * (1 - e[q].f_cz) for q in qubits},
        readout={q: 1 - e[q].f_ro for q in qubits},
        thermal={el: thermal_probability(e[el].freq_ghz, device.temperature_mk(el)) for el in e},
    )


def idling_channel(t_idle_ns: float, t1_us: float, t2_us: float) -> tuple[float, float, float]:
    """Pauli-twirled amplitude and phase damping over an idle window.

    Returns ``(px, py, pz)``.  Raises ``ValueError`` when ``T2 > 2 T1``
    drives ``pz`` negative.
    """
    if t_idle_ns < 0:
        raise ValueError("idle time must be non-negative")
    t = t_idle_ns * 1e-3
    decay1 = -math.expm1(-t / t1_us)
    decay2 = -math.expm1(-t / t2_us)
    px = py = decay1 / 4
    pz = decay2 / 2 - decay1 / 4
    if pz < -1e-12:
        raise ValueError(f"T2={t2_us} us exceeds 2*T1={2 * t1_us} us (pz={pz:.3g})")
    return px, py, max(pz, 0.0)
