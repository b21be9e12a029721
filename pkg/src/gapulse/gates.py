"""Target unitaries for the synthesis: selective rotations and standard gates.

Qubit 0 is the leftmost (most significant) bit of a basis label, so |110>
means qubits 0 and 1 excited and has row index 6 in an 8-dimensional space.
Tomography letters X and Y denote +90-degree rotations about the x and y
axes (exp(-i pi/4 sigma)), not Pauli matrices.
"""

from __future__ import annotations

import numpy as np

from .spinsys import SIGMA_X, SIGMA_Y

ROT90_X = np.array([[1.0, -1.0j], [-1.0j, 1.0]], dtype=complex) / np.sqrt(2.0)
ROT90_Y = np.array([[1.0, -1.0], [1.0, 1.0]], dtype=complex) / np.sqrt(2.0)

_AXIS_ROT = {"X": ROT90_X, "Y": ROT90_Y}


def _embed_single(gate2: np.ndarray, k: int, n: int) -> np.ndarray:
    op = np.eye(1, dtype=complex)
    for i in range(n):
        op = np.kron(op, gate2 if i == k else np.eye(2, dtype=complex))
    return op


def selective_90(k: int, axis: str, n: int) -> np.ndarray:
    """90-degree rotation of qubit k about the given axis, identity elsewhere."""
    if axis not in _AXIS_ROT:
        raise ValueError(f"axis must be 'X' or 'Y', got {axis!r}")
    if not 0 <= k < n:
        raise IndexError(f"qubit index {k} out of range for n={n}")
    return _embed_single(_AXIS_ROT[axis], k, n)


def cnot(control: int, target: int, n: int) -> np.ndarray:
    """Controlled-NOT: flips the target bit where the control bit is 1."""
    if control == target:
        raise ValueError("control and target must differ")
    for name, q in (("control", control), ("target", target)):
        if not 0 <= q < n:
            raise IndexError(f"{name} index {q} out of range for n={n}")
    dim = 2 ** n
    u = np.zeros((dim, dim), dtype=complex)
    for s in range(dim):
        if (s >> (n - 1 - control)) & 1:
            t = s ^ (1 << (n - 1 - target))
        else:
            t = s
        u[t, s] = 1.0
    return u


def fredkin(n: int = 3) -> np.ndarray:
    """Controlled-SWAP on three qubits: exchanges |101> and |110>."""
    if n != 3:
        raise ValueError("the Fredkin constructor supports exactly 3 qubits")
    u = np.eye(8, dtype=complex)
    u[[5, 6], :] = u[[6, 5], :]
    return u


def toffoli(n: int = 3) -> np.ndarray:
    """Controlled-controlled-NOT on three qubits: exchanges |110> and |111>."""
    if n != 3:
        raise ValueError("the Toffoli constructor supports exactly 3 qubits")
    u = np.eye(8, dtype=complex)
    u[[6, 7], :] = u[[7, 6], :]
    return u


def pauli_word(word: str, n: int) -> np.ndarray:
    """Tensor product of per-qubit readout rotations, e.g. "IIY" or "XXX".

    I is the identity; X and Y are +90-degree rotations on that qubit.
    """
    if len(word) != n:
        raise ValueError(f"word length {len(word)} != qubit count {n}")
    op = np.eye(1, dtype=complex)
    for c in word:
        if c == "I":
            factor = np.eye(2, dtype=complex)
        elif c in _AXIS_ROT:
            factor = _AXIS_ROT[c]
        else:
            raise ValueError(f"invalid character {c!r} in word (use I, X, Y)")
        op = np.kron(op, factor)
    return op


def basis_state(label: str) -> np.ndarray:
    """Column vector |label> for a bitstring label such as "110"."""
    if not label or any(c not in "01" for c in label):
        raise ValueError(f"label must be a non-empty bitstring, got {label!r}")
    vec = np.zeros(2 ** len(label), dtype=complex)
    vec[int(label, 2)] = 1.0
    return vec


GATE_NAME_FORMS = (
    "selective90:<k>:<X|Y>",
    "cnot:<control>:<target>",
    "fredkin",
    "toffoli",
    "word:<string over I,X,Y>",
)


def parse_gate(name: str, n: int) -> np.ndarray:
    """Build a target unitary from its CLI name for an n-qubit system."""
    parts = name.split(":")
    kind = parts[0]
    try:
        if kind == "selective90" and len(parts) == 3:
            return selective_90(int(parts[1]), parts[2], n)
        if kind == "cnot" and len(parts) == 3:
            return cnot(int(parts[1]), int(parts[2]), n)
        if kind == "fredkin" and len(parts) == 1:
            return fredkin(n)
        if kind == "toffoli" and len(parts) == 1:
            return toffoli(n)
        if kind == "word" and len(parts) == 2:
            return pauli_word(parts[1], n)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"bad gate name {name!r}: {exc}") from exc
    raise ValueError(
        f"unknown gate name {name!r}; known forms: {', '.join(GATE_NAME_FORMS)}"
    )
