"""gapulse: genetic search for hard-pulse/delay sequences on coupled spin systems."""

from .spinsys import SpinSystem, pauli_embed, drift_hamiltonian, rf_hamiltonian
from .propagator import (
    PulseSegment,
    PulseSequence,
    effective_phase,
    segment_propagator,
    sequence_propagator,
    matrix_exp,
    gate_fidelity,
    state_fidelity,
    total_duration,
    apply_to_state,
    pseudopure_state,
)
from .gates import selective_90, cnot, fredkin, toffoli, pauli_word, parse_gate
from .ga import GAConfig, Chromosome, Population, RunRecord, evolve, refine, optimize_pipeline
from .robustness import FidelityGrid, apply_offset_error, apply_flip_error, scan

__version__ = "0.1.0"

__all__ = [
    "SpinSystem",
    "pauli_embed",
    "drift_hamiltonian",
    "rf_hamiltonian",
    "PulseSegment",
    "PulseSequence",
    "effective_phase",
    "segment_propagator",
    "sequence_propagator",
    "matrix_exp",
    "gate_fidelity",
    "state_fidelity",
    "total_duration",
    "apply_to_state",
    "pseudopure_state",
    "selective_90",
    "cnot",
    "fredkin",
    "toffoli",
    "pauli_word",
    "parse_gate",
    "GAConfig",
    "Chromosome",
    "Population",
    "RunRecord",
    "evolve",
    "refine",
    "optimize_pipeline",
    "FidelityGrid",
    "apply_offset_error",
    "apply_flip_error",
    "scan",
    "__version__",
]
