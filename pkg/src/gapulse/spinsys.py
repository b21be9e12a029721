"""Coupled spin-1/2 systems and their rotating-frame Hamiltonians.

All Hamiltonians are returned in angular-frequency units (rad/s), so that
``exp(-i H t)`` takes ``t`` in seconds with no hidden 2*pi factors.
Frequency inputs (chemical shifts, couplings) are plain Hz.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

_PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}

#: Dense 2^n matrices are used throughout; refuse silly spin counts.
DEFAULT_MAX_SPINS = 6


@dataclass(frozen=True, eq=False)
class SpinSystem:
    """A homonuclear system of n coupled spin-1/2 nuclei driven by one rf channel.

    Parameters
    ----------
    n_spins : number of spins (dimension is 2**n_spins).
    chemical_shifts : per-spin resonance frequencies nu_i in Hz.
    frame_freqs : per-spin rotating-frame frequencies nu_rf_i in Hz.
    couplings : symmetric n x n scalar-coupling matrix J_ij in Hz, zero diagonal.
    rf_amplitude : fixed rf drive amplitude Omega in rad/s (> 0).
    """

    n_spins: int
    chemical_shifts: np.ndarray
    frame_freqs: np.ndarray
    couplings: np.ndarray
    rf_amplitude: float
    max_spins: int = DEFAULT_MAX_SPINS

    def __post_init__(self):
        n = self.n_spins
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ValueError(f"n_spins must be a positive integer, got {n!r}")
        if n > self.max_spins:
            raise ValueError(
                f"n_spins={n} exceeds the dense-matrix cap of {self.max_spins}"
            )
        shifts = np.asarray(self.chemical_shifts, dtype=float).reshape(-1)
        frame = np.asarray(self.frame_freqs, dtype=float).reshape(-1)
        j = np.asarray(self.couplings, dtype=float)
        if shifts.shape != (n,):
            raise ValueError(f"chemical_shifts must have length {n}")
        if frame.shape != (n,):
            raise ValueError(f"frame_freqs must have length {n}")
        if j.shape != (n, n):
            raise ValueError(f"couplings must be an {n}x{n} matrix")
        if not np.allclose(j, j.T, atol=1e-12):
            raise ValueError("couplings matrix must be symmetric")
        if np.any(np.abs(np.diag(j)) > 1e-12):
            raise ValueError("couplings matrix must have zero diagonal")
        if not (self.rf_amplitude > 0):
            raise ValueError("rf_amplitude must be > 0")
        for name, arr in (("chemical_shifts", shifts), ("frame_freqs", frame),
                          ("couplings", j)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "rf_amplitude", float(self.rf_amplitude))

    @property
    def dim(self) -> int:
        return 2 ** self.n_spins

    @property
    def offsets_hz(self) -> np.ndarray:
        """Per-spin rotating-frame offsets nu_i - nu_rf_i in Hz."""
        return self.chemical_shifts - self.frame_freqs

    def with_shifts(self, shifts) -> "SpinSystem":
        """Copy of this system with replaced chemical shifts."""
        return SpinSystem(self.n_spins, np.asarray(shifts, dtype=float),
                          self.frame_freqs, self.couplings, self.rf_amplitude,
                          self.max_spins)

    def with_rf_amplitude(self, omega: float) -> "SpinSystem":
        """Copy of this system with replaced rf amplitude."""
        return SpinSystem(self.n_spins, self.chemical_shifts, self.frame_freqs,
                          self.couplings, omega, self.max_spins)


def pauli_embed(axis: str, spin_index: int, n: int) -> np.ndarray:
    """Pauli matrix on one spin, identity on the rest (dimensionless).

    Kronecker order puts spin 0 as the leftmost (most significant) factor,
    so basis state |b0 b1 ... b_{n-1}> has row index int(b0 b1 ... b_{n-1}, 2).
    """
    if axis not in _PAULI:
        raise ValueError(f"axis must be one of 'x', 'y', 'z', got {axis!r}")
    if not 0 <= spin_index < n:
        raise IndexError(f"spin_index {spin_index} out of range for n={n}")
    op = np.eye(1, dtype=complex)
    for k in range(n):
        op = np.kron(op, _PAULI[axis] if k == spin_index else IDENTITY_2)
    return op


@lru_cache(maxsize=32)
def _sigma_z_signs(n: int) -> np.ndarray:
    """(n, 2^n) array of sigma_z eigenvalues: signs[i, s] = <s|sigma_z^i|s>."""
    dim = 2 ** n
    states = np.arange(dim)
    signs = np.empty((n, dim))
    for i in range(n):
        bit = (states >> (n - 1 - i)) & 1
        signs[i] = 1.0 - 2.0 * bit
    signs.setflags(write=False)
    return signs


@lru_cache(maxsize=32)
def _collective_xy(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Total in-phase operators (Fx, Fy) = (sum_k sigma_x^k / 2, sum_k sigma_y^k / 2)."""
    dim = 2 ** n
    fx = np.zeros((dim, dim), dtype=complex)
    fy = np.zeros((dim, dim), dtype=complex)
    for k in range(n):
        fx += 0.5 * pauli_embed("x", k, n)
        fy += 0.5 * pauli_embed("y", k, n)
    fx.setflags(write=False)
    fy.setflags(write=False)
    return fx, fy


def drift_diagonal(sys: SpinSystem) -> np.ndarray:
    """Diagonal of the free-evolution Hamiltonian, real, in rad/s.

    Zeeman part: -pi * sum_i (nu_i - nu_rf_i) * sigma_z^i.
    Coupling part: sum_{i<j} (pi/2) * J_ij * sigma_z^i sigma_z^j.
    """
    n = sys.n_spins
    signs = _sigma_z_signs(n)
    diag = -np.pi * (sys.offsets_hz @ signs)
    for i in range(n):
        for jj in range(i + 1, n):
            diag = diag + (np.pi / 2.0) * sys.couplings[i, jj] * signs[i] * signs[jj]
    return diag


def drift_hamiltonian(sys: SpinSystem) -> np.ndarray:
    """Free-evolution Hamiltonian as a dense matrix in rad/s (diagonal)."""
    return np.diag(drift_diagonal(sys)).astype(complex)


def rf_hamiltonian(sys: SpinSystem, phase: float) -> np.ndarray:
    """Hard-pulse drive Hamiltonian at the given phase (radians), in rad/s.

    All spins are driven simultaneously (single homonuclear channel):
    Omega * sum_k (sigma_x^k cos(phase) + sigma_y^k sin(phase)) / 2.
    """
    fx, fy = _collective_xy(sys.n_spins)
    return sys.rf_amplitude * (np.cos(phase) * fx + np.sin(phase) * fy)
