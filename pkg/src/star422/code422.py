"""The [[4,2,2]] code: stabilizers, logical operators and codewords.

Data qubits D1..D4 are indices 0..3 of every 4-qubit object here, with D1
the most significant tensor factor of dense vectors.  Logical qubit ``i``
is defined by its operator pair ``(X_Li, Z_Li)``; ket labels such as
``"01"`` follow the codeword table, whose first digit tracks logical
qubit 2 (see :func:`label_eigenvalues`).
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np

from .pauli import PauliString

S_X = PauliString.from_label("XXXX")
S_Z = PauliString.from_label("ZZZZ")

X_L1 = PauliString.from_label("IIXX")
Z_L1 = PauliString.from_label("ZIZI")
X_L2 = PauliString.from_label("IXIX")
Z_L2 = PauliString.from_label("ZZII")

LOGICALS = {"X": (X_L1, X_L2), "Z": (Z_L1, Z_L2)}

Z_LABELS = ("00", "01", "10", "11")
X_LABELS = ("++", "+-", "-+", "--")
MIXED_LABELS = ("0+", "+0")

# Branches of every codeword, as product-state strings over D1..D4.
_BRANCHES = {
    "00": ["0000", "1111"],
    "01": ["0011", "1100"],
    "10": ["0101", "1010"],
    "11": ["1001", "0110"],
    "++": ["++++", "----"],
    "+-": ["+-+-", "-+-+"],
    "-+": ["++--", "--++"],
    "--": ["-++-", "+--+"],
    "0+": ["++00", "++11", "--00", "--11"],
    "+0": ["+0+0", "+1+1", "-0-0", "-1-1"],
}

_KETS = {
    "0": np.array([1, 0], complex),
    "1": np.array([0, 1], complex),
    "+": np.array([1, 1], complex) / np.sqrt(2),
    "-": np.array([1, -1], complex) / np.sqrt(2),
}


def product_state(label: str) -> np.ndarray:
    """Dense vector of a product state such as ``"0+1-"``."""
    try:
        return reduce(np.kron, [_KETS[c] for c in label])
    except KeyError:
        raise ValueError(f"unsupported product state {label!r}") from None


def _basis_of(label: str) -> str:
    if label in Z_LABELS:
        return "Z"
    if label in X_LABELS:
        return "X"
    if label in MIXED_LABELS:
        return "mixed"
    raise ValueError(f"unknown codeword label {label!r}")


def codeword(label: str, basis: str | None = None) -> np.ndarray:
    """Normalized 16-dim vector of the codeword ``|label>_L``.

    ``basis`` is optional and only cross-checked against the label.
    """
    inferred = _basis_of(label)
    if basis is not None and basis != inferred:
        raise ValueError(f"label {label!r} is not a {basis}-basis codeword")
    v = sum(product_state(b) for b in _BRANCHES[label])
    return v / np.linalg.norm(v)


def codeword_branches(label: str) -> list[str]:
    _basis_of(label)
    return list(_BRANCHES[label])


def codeword_for_input(psi_in: str) -> str:
    """Label of the codeword whose branches contain the product state ``psi_in``."""
    for label, branches in _BRANCHES.items():
        if label not in MIXED_LABELS and psi_in in branches:
            return label
    raise ValueError(f"{psi_in!r} is not a branch of any Z- or X-basis codeword")


def evaluate_logicals(bits: Sequence[int] | np.ndarray, basis: str) -> tuple[int, int] | np.ndarray:
    """Logical eigenvalue pair from four data bits read out in ``basis``.

    ``bits`` may be a length-4 sequence or an array of shape ``(..., 4)``;
    the array form returns an ``int8`` array of shape ``(..., 2)``.
    """
    b = np.asarray(bits, dtype=np.uint8)
    if b.shape[-1] != 4:
        raise ValueError("expected 4 data bits")
    if basis == "Z":
        p1, p2 = b[..., 0] ^ b[..., 2], b[..., 0] ^ b[..., 1]
    elif basis == "X":
        p1, p2 = b[..., 2] ^ b[..., 3], b[..., 1] ^ b[..., 3]
    else:
        raise ValueError(f"basis must be 'Z' or 'X', got {basis!r}")
    out = np.stack([1 - 2 * p1.astype(np.int8), 1 - 2 * p2.astype(np.int8)], axis=-1)
    if b.ndim == 1:
        return int(out[0]), int(out[1])
    return out


def in_logical_subspace(bits: Sequence[int] | np.ndarray, basis: str = "Z") -> bool | np.ndarray:
    """True iff the readout-basis stabilizer evaluates to +1 (even parity).

    ``basis`` does not change the rule; it is accepted for symmetry with
    :func:`evaluate_logicals`.
    """
    if basis not in ("Z", "X"):
        raise ValueError(f"basis must be 'Z' or 'X', got {basis!r}")
    b = np.asarray(bits, dtype=np.uint8)
    if b.shape[-1] != 4:
        raise ValueError("expected 4 data bits")
    even = (b[..., 0] ^ b[..., 1] ^ b[..., 2] ^ b[..., 3]) == 0
    return bool(even) if b.ndim == 1 else even


def logical_basis_projectors() -> np.ndarray:
    """16x4 matrix whose columns are the Z-basis codewords in label order."""
    return np.stack([codeword(lbl) for lbl in Z_LABELS], axis=1)


def label_eigenvalues(label: str) -> tuple[int, int]:
    """Operator eigenvalues ``(Z_L1, Z_L2)`` (or ``(X_L1, X_L2)``) of a codeword."""
    basis = _basis_of(label)
    if basis == "mixed":
        raise ValueError("mixed-basis codewords are not eigenstates of a single logical pair")
    v = codeword(label)
    return tuple(int(round(float(np.real(v.conj() @ op.to_matrix() @ v)))) for op in LOGICALS[basis])


def logical_vector(label: str) -> np.ndarray:
    """A codeword expressed in the logical basis of :func:`logical_basis_projectors`."""
    return logical_basis_projectors().conj().T @ codeword(label)


def bell_state() -> np.ndarray:
    """Product of Bell pairs on (D1, D4) and (D2, D3), as a 16-dim vector."""
    v = np.zeros(16, complex)
    for s in ("0000", "0110", "1001", "1111"):
        v[int(s, 2)] = 0.5
    return v
