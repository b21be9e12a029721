"""Systematic-error sweeps: fidelity of a fixed sequence on a perturbed system.

Two error models:
  * offset error: a uniform transmitter-frequency shift, added to every
    chemical shift;
  * flip-angle error: rf-amplitude miscalibration, expressed as the error
    in degrees of a nominal 90-degree pulse and applied multiplicatively
    to the amplitude (so every pulse scales by the same factor).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spinsys import SpinSystem
from .propagator import PulseSequence, gate_fidelity, sequence_propagator


@dataclass(frozen=True)
class FidelityGrid:
    """Fidelity over a (flip-angle error, offset error) grid.

    values[i][j] is the fidelity at flip_errors[i] degrees and offsets[j] Hz.
    """

    flip_errors: tuple[float, ...]
    offsets: tuple[float, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.flip_errors), len(self.offsets)):
            raise ValueError(
                f"values shape {v.shape} does not match axes "
                f"({len(self.flip_errors)}, {len(self.offsets)})"
            )
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise ValueError("fidelities must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "flip_errors", tuple(float(x) for x in self.flip_errors))
        object.__setattr__(self, "offsets", tuple(float(x) for x in self.offsets))

    def at(self, flip: float, offset: float) -> float:
        i = self.flip_errors.index(flip)
        j = self.offsets.index(offset)
        return float(self.values[i, j])


def apply_offset_error(sys: SpinSystem, d_nu: float) -> SpinSystem:
    """System with every chemical shift moved by d_nu Hz (transmitter offset)."""
    return sys.with_shifts(sys.chemical_shifts + d_nu)


def apply_flip_error(sys: SpinSystem, d_theta: float) -> SpinSystem:
    """System with the rf amplitude scaled by (90 + d_theta)/90.

    d_theta is the miscalibration, in degrees, of a nominal 90-degree pulse.
    """
    scale = (90.0 + d_theta) / 90.0
    if scale <= 0.0:
        raise ValueError(f"flip error {d_theta} deg makes the rf amplitude non-positive")
    return sys.with_rf_amplitude(sys.rf_amplitude * scale)


def error_axis(lo: float, hi: float, step: float) -> list[float]:
    """Closed range [lo, hi] sampled at `step`, always including 0.0."""
    if step <= 0.0:
        raise ValueError(f"step must be > 0, got {step}")
    if hi < lo:
        raise ValueError(f"range [{lo}, {hi}] is reversed")
    n = int(np.floor((hi - lo) / step + 1e-9))
    vals = [lo + k * step for k in range(n + 1)]
    if not any(abs(v) < 1e-12 for v in vals) and lo <= 0.0 <= hi:
        vals = sorted(set(vals) | {0.0})
    if not vals:
        vals = [lo]
    return [float(v) for v in vals]


def scan(sys: SpinSystem, seq: PulseSequence, target: np.ndarray,
         flip_range: tuple[float, float, float],
         offset_range: tuple[float, float, float]) -> FidelityGrid:
    """Fidelity of the sequence against the target at every grid point.

    Axes are built from (lo, hi, step) triples; the exact zero-error point
    is always part of the grid, so values[flip=0][offset=0] is the nominal
    fidelity.
    """
    flips = error_axis(*flip_range)
    offsets = error_axis(*offset_range)
    values = np.empty((len(flips), len(offsets)))
    for i, d_theta in enumerate(flips):
        sys_flip = apply_flip_error(sys, d_theta)
        for j, d_nu in enumerate(offsets):
            perturbed = apply_offset_error(sys_flip, d_nu)
            values[i, j] = gate_fidelity(target, sequence_propagator(perturbed, seq))
    return FidelityGrid(tuple(flips), tuple(offsets), values)
