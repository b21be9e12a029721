"""Hard-pulse/delay sequences, their unitary propagators, and fidelity measures.

A sequence is a list of segments, each a hard pulse of integer width tau (us)
and discretized phase (0.01 degree steps), followed by a free-evolution delay
of integer length delta (us).  Chronology: segment 1 acts first in time, and
within a segment the pulse acts before the delay.  The assembled matrix is
therefore ``D_N P_N ... D_1 P_1`` when propagators left-multiply states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spinsys import SpinSystem, _collective_xy, drift_diagonal

PHASE_STEPS = 36000  # 0.01-degree resolution
_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PulseSegment:
    """One hard pulse plus the free-evolution delay that follows it.

    tau_us : pulse width in integer microseconds (>= 0).
    sign : 0 or 1; 1 subtracts 180 degrees from the encoded phase.
    phase_centideg : pulse phase in hundredths of a degree, in [0, 36000).
    delay_us : free evolution after the pulse, integer microseconds (>= 0).
    """

    tau_us: int
    sign: int
    phase_centideg: int
    delay_us: int

    def __post_init__(self):
        for name in ("tau_us", "sign", "phase_centideg", "delay_us"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise ValueError(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.tau_us < 0:
            raise ValueError(f"tau_us must be >= 0, got {self.tau_us}")
        if self.delay_us < 0:
            raise ValueError(f"delay_us must be >= 0, got {self.delay_us}")
        if self.sign not in (0, 1):
            raise ValueError(f"sign must be 0 or 1, got {self.sign}")
        if not 0 <= self.phase_centideg < PHASE_STEPS:
            raise ValueError(
                f"phase_centideg must be in [0, {PHASE_STEPS}), got {self.phase_centideg}"
            )


@dataclass(frozen=True)
class PulseSequence:
    """An ordered, non-empty list of pulse segments."""

    segments: tuple[PulseSegment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        if len(segs) < 1:
            raise ValueError("a pulse sequence needs at least one segment")
        if not all(isinstance(s, PulseSegment) for s in segs):
            raise ValueError("segments must all be PulseSegment instances")
        object.__setattr__(self, "segments", segs)

    def __len__(self) -> int:
        return len(self.segments)

    @classmethod
    def from_rows(cls, rows) -> "PulseSequence":
        """Build from an iterable of (tau_us, sign, phase_centideg, delay_us) rows."""
        return cls(tuple(PulseSegment(int(t), int(s), int(p), int(d))
                         for t, s, p, d in rows))

    def to_array(self) -> np.ndarray:
        """N x 4 integer array with columns (tau_us, sign, phase_centideg, delay_us)."""
        return np.array([(s.tau_us, s.sign, s.phase_centideg, s.delay_us)
                         for s in self.segments], dtype=np.int64)


def effective_phase(seg: PulseSegment) -> float:
    """Resolved pulse phase in radians, wrapped into [0, 2*pi).

    sign = 1 means the encoded phase is shifted by -180 degrees.
    """
    phi = (seg.phase_centideg / 100.0) * np.pi / 180.0
    if seg.sign:
        phi -= np.pi
    return phi % _TWO_PI


def resolved_phase_centideg(seg: PulseSegment) -> int:
    """Resolved phase in integer centidegrees, in [0, 36000)."""
    cd = seg.phase_centideg - (18000 if seg.sign else 0)
    return cd % PHASE_STEPS


def max_pulse_width_us(sys: SpinSystem) -> int:
    """Largest legal pulse width: flip angle Omega*tau capped at 3*pi/2.

    The cap is quantized to the 1 us pulse-width resolution (nearest integer).
    """
    return int(round(1.5 * np.pi / sys.rf_amplitude * 1e6))


def validate_flip_angles(seq: PulseSequence, sys: SpinSystem) -> None:
    """Raise ValueError if any pulse exceeds the 3*pi/2 flip-angle cap."""
    cap = max_pulse_width_us(sys)
    for i, seg in enumerate(seq.segments):
        if seg.tau_us > cap:
            raise ValueError(
                f"segment {i + 1}: tau_us={seg.tau_us} exceeds flip-angle cap "
                f"({cap} us at rf_amplitude={sys.rf_amplitude} rad/s)"
            )


def total_duration(seq: PulseSequence) -> int:
    """Total sequence length in integer microseconds (pulses plus delays)."""
    return sum(s.tau_us + s.delay_us for s in seq.segments)


def _check_hermitian(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    tol = 1e-10 * max(1.0, float(np.abs(h).max()))
    if np.abs(h - h.conj().T).max() > tol:
        raise ValueError("matrix is not Hermitian")
    return h


def matrix_exp(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) for Hermitian H (rad/s) and t in seconds, by eigendecomposition."""
    h = _check_hermitian(h)
    evals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(-1j * evals * t)) @ vecs.conj().T


def _segment_parts(sys: SpinSystem, seq: PulseSequence):
    """Stacked pulse propagators and delay phase vectors for all segments."""
    diag = drift_diagonal(sys)
    fx, fy = _collective_xy(sys.n_spins)
    n_seg = len(seq)
    dim = sys.dim

    taus = np.array([s.tau_us for s in seq.segments], dtype=float) * 1e-6
    delays = np.array([s.delay_us for s in seq.segments], dtype=float) * 1e-6
    phases = np.array([effective_phase(s) for s in seq.segments])

    hams = np.broadcast_to(np.diag(diag).astype(complex), (n_seg, dim, dim)).copy()
    hams += sys.rf_amplitude * (np.cos(phases)[:, None, None] * fx
                                + np.sin(phases)[:, None, None] * fy)
    evals, vecs = np.linalg.eigh(hams)
    pulse_ops = (vecs * np.exp(-1j * evals * taus[:, None])[:, None, :]) \
        @ vecs.conj().transpose(0, 2, 1)
    delay_phases = np.exp(-1j * np.outer(delays, diag))
    return pulse_ops, delay_phases


def segment_propagator(sys: SpinSystem, seg: PulseSegment) -> np.ndarray:
    """Unitary of a single segment: pulse first, then free evolution."""
    return sequence_propagator(sys, PulseSequence((seg,)))


def sequence_propagator(sys: SpinSystem, seq: PulseSequence) -> np.ndarray:
    """Unitary of the whole sequence, segment 1 acting first in time."""
    pulse_ops, delay_phases = _segment_parts(sys, seq)
    u = np.eye(sys.dim, dtype=complex)
    for l in range(len(seq)):
        u = pulse_ops[l] @ u
        u = delay_phases[l][:, None] * u
    return u


def unitarity_residual(u: np.ndarray) -> float:
    """Max elementwise deviation of U U-dagger from the identity."""
    u = np.asarray(u)
    return float(np.abs(u @ u.conj().T - np.eye(u.shape[0])).max())


def gate_fidelity(u_tgt: np.ndarray, u_opt: np.ndarray) -> float:
    """Normalized trace overlap |Tr(U_tgt U_opt^dag)| / sqrt(Tr(U_tgt U_tgt^dag) Tr(U_opt U_opt^dag)).

    Equals |Tr(U_tgt U_opt^dag)| / 2^n when both arguments are unitary; global
    phase cancels.  Symmetric in its arguments.
    """
    u_tgt = np.asarray(u_tgt, dtype=complex)
    u_opt = np.asarray(u_opt, dtype=complex)
    if u_tgt.shape != u_opt.shape or u_tgt.ndim != 2 or u_tgt.shape[0] != u_tgt.shape[1]:
        raise ValueError(
            f"dimension mismatch: {u_tgt.shape} vs {u_opt.shape}"
        )
    overlap = abs(np.trace(u_tgt @ u_opt.conj().T))
    norm = np.sqrt(np.trace(u_tgt @ u_tgt.conj().T).real
                   * np.trace(u_opt @ u_opt.conj().T).real)
    return float(min(1.0, overlap / norm))


def assert_density_operator(rho: np.ndarray, name: str = "rho") -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity of a density operator."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > 1e-12:
        raise ValueError(f"{name} is not Hermitian within 1e-12")
    if abs(np.trace(rho).real - 1.0) > 1e-12 or abs(np.trace(rho).imag) > 1e-12:
        raise ValueError(f"{name} does not have unit trace")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise ValueError(f"{name} has a negative eigenvalue beyond tolerance")
    return rho


def apply_to_state(u: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Conjugate a density operator by a gate: U rho U-dagger."""
    u = np.asarray(u, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if u.shape != rho.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {rho.shape}")
    return u @ rho @ u.conj().T


def _clip_spectrum(evals: np.ndarray) -> np.ndarray:
    """Zero out eigenvalue noise so sqrt() does not amplify it to ~1e-8."""
    tol = max(np.abs(evals).max(), 0.0) * evals.size * np.finfo(float).eps
    return np.where(evals > tol, evals, 0.0)


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    evals, vecs = np.linalg.eigh(rho)
    return (vecs * np.sqrt(_clip_spectrum(evals))) @ vecs.conj().T


def state_fidelity(rho_th: np.ndarray, rho_exp: np.ndarray) -> float:
    """Uhlmann-Jozsa fidelity Tr sqrt(sqrt(rho_th) rho_exp sqrt(rho_th)).

    For a pure rho_th = |psi><psi| this reduces to sqrt(<psi|rho_exp|psi>).
    """
    rho_th = assert_density_operator(rho_th, "rho_th")
    rho_exp = assert_density_operator(rho_exp, "rho_exp")
    if rho_th.shape != rho_exp.shape:
        raise ValueError(f"dimension mismatch: {rho_th.shape} vs {rho_exp.shape}")
    s = _psd_sqrt(rho_th)
    inner = _clip_spectrum(np.linalg.eigvalsh(s @ rho_exp @ s))
    return float(min(1.0, np.sqrt(inner).sum()))


def pseudopure_state(label: str, epsilon: float) -> np.ndarray:
    """Pseudopure density operator ((1 - eps)/2^n) I + eps |label><label|.

    ``label`` is a computational-basis bitstring such as "110" (qubit 0 first).
    """
    if not label or any(c not in "01" for c in label):
        raise ValueError(f"label must be a non-empty bitstring, got {label!r}")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    dim = 2 ** len(label)
    rho = np.eye(dim, dtype=complex) * ((1.0 - epsilon) / dim)
    idx = int(label, 2)
    rho[idx, idx] += epsilon
    return rho
