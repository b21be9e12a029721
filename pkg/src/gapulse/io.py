"""File formats: spin-system configs, pulse-sequence CSVs, GA configs,
run records, fidelity grids, and run manifests.

All text formats are deliberately plain so fixtures stay portable:
key-value configs (``key = value``, ``#`` comments), CSV with fixed headers.
Parsers report errors with ``path:line:`` prefixes.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__ as _version
from .ga import GAConfig, RunRecord
from .propagator import (
    PHASE_STEPS,
    PulseSegment,
    PulseSequence,
    resolved_phase_centideg,
)
from .robustness import FidelityGrid
from .spinsys import SpinSystem

SEQUENCE_HEADER = "l,tau_us,sign,phi_centideg,delta_us"
RESOLVED_HEADER = "l,tau_us,phi_deg,delta_us"
RECORD_HEADER = "generation,best_fitness,wall_ms,evals"
SEQUENCE_JSON_SCHEMA = "pulse-sequence/1"


class ParseError(ValueError):
    """A file-format error with a file/line location."""

    def __init__(self, path, line_no: int | None, message: str):
        self.path = str(path)
        self.line_no = line_no
        loc = f"{self.path}:{line_no}: " if line_no is not None else f"{self.path}: "
        super().__init__(loc + message)


# ---------------------------------------------------------------- key-value

def parse_kv_text(text: str, path="<string>") -> dict[str, tuple[str, int]]:
    """``key = value`` lines into {key: (raw value, line number)}."""
    out: dict[str, tuple[str, int]] = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(path, no, f"expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ParseError(path, no, "empty key")
        if key in out:
            raise ParseError(path, no, f"duplicate key {key!r}")
        out[key] = (value.strip(), no)
    return out


def _parse_number_list(raw: str, path, line_no) -> list[float]:
    body = raw.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise ParseError(path, line_no, f"expected a [..] list, got {raw!r}")
    body = body[1:-1].strip()
    if not body:
        return []
    try:
        return [float(tok) for tok in re.split(r"[,\s]+", body) if tok]
    except ValueError as exc:
        raise ParseError(path, line_no, f"bad number in list: {exc}") from exc


def _parse_matrix(raw: str, path, line_no) -> list[list[float]]:
    body = raw.strip()
    if not (body.startswith("[[") and body.endswith("]]")):
        raise ParseError(path, line_no, f"expected a [[..]] matrix, got {raw!r}")
    rows = []
    for chunk in re.findall(r"\[([^\[\]]*)\]", body):
        rows.append(_parse_number_list(f"[{chunk}]", path, line_no))
    return rows


# -------------------------------------------------------------- spin system

def load_spin_system(path) -> SpinSystem:
    """Read a spin-system config.

    Fields: ``n_spins``, ``nu_hz = [..]``, ``nu_rf_hz = [..]``,
    ``j_hz = [[..]]`` (full matrix) or ``j_hz = [..]`` (upper triangle,
    row-major), ``omega_rad_s``.
    """
    path = Path(path)
    kv = parse_kv_text(path.read_text(), path)

    def need(key):
        if key not in kv:
            raise ParseError(path, None, f"missing required key {key!r}")
        return kv[key]

    raw, no = need("n_spins")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ParseError(path, no, f"n_spins must be an integer: {exc}") from exc
    nu = _parse_number_list(need("nu_hz")[0], path, need("nu_hz")[1])
    nu_rf = _parse_number_list(need("nu_rf_hz")[0], path, need("nu_rf_hz")[1])
    raw_j, no_j = need("j_hz")
    if raw_j.strip().startswith("[["):
        j = np.array(_parse_matrix(raw_j, path, no_j))
    else:
        tri = _parse_number_list(raw_j, path, no_j)
        expect = n * (n - 1) // 2
        if len(tri) != expect:
            raise ParseError(path, no_j,
                             f"upper-triangle j_hz needs {expect} values, got {len(tri)}")
        j = np.zeros((n, n))
        k = 0
        for i in range(n):
            for jj in range(i + 1, n):
                j[i, jj] = j[jj, i] = tri[k]
                k += 1
    raw_om, no_om = need("omega_rad_s")
    try:
        omega = float(raw_om)
    except ValueError as exc:
        raise ParseError(path, no_om, f"omega_rad_s must be a number: {exc}") from exc
    try:
        return SpinSystem(n, np.array(nu), np.array(nu_rf), j, omega)
    except ValueError as exc:
        raise ParseError(path, None, str(exc)) from exc


def format_spin_system(sys: SpinSystem) -> str:
    rows = ", ".join(
        "[" + ", ".join(f"{v:g}" for v in row) + "]" for row in sys.couplings
    )
    return (
        f"n_spins = {sys.n_spins}\n"
        f"nu_hz = [{', '.join(f'{v:g}' for v in sys.chemical_shifts)}]\n"
        f"nu_rf_hz = [{', '.join(f'{v:g}' for v in sys.frame_freqs)}]\n"
        f"j_hz = [{rows}]\n"
        f"omega_rad_s = {sys.rf_amplitude:g}\n"
    )


# ----------------------------------------------------------- pulse sequence

def _parse_int_field(tok: str, name: str, path, line_no: int) -> int:
    try:
        v = int(tok)
    except ValueError as exc:
        raise ParseError(path, line_no, f"{name} must be an integer, got {tok!r}") from exc
    return v


def load_pulse_sequence(path) -> PulseSequence:
    """Read a sequence CSV; accepts the raw or the resolved header."""
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines()]
    if not lines or not lines[0].strip():
        raise ParseError(path, 1, "empty sequence file")
    header = lines[0].strip()
    if header == SEQUENCE_HEADER:
        resolved = False
    elif header == RESOLVED_HEADER:
        resolved = True
    else:
        raise ParseError(path, 1,
                         f"unknown header {header!r}; expected {SEQUENCE_HEADER!r} "
                         f"or {RESOLVED_HEADER!r}")
    segments = []
    for no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        toks = [t.strip() for t in raw.split(",")]
        want = 4 if resolved else 5
        if len(toks) != want:
            raise ParseError(path, no, f"expected {want} fields, got {len(toks)}")
        l_no = _parse_int_field(toks[0], "l", path, no)
        if l_no != len(segments) + 1:
            raise ParseError(path, no, f"row index l={l_no}, expected {len(segments) + 1}")
        tau = _parse_int_field(toks[1], "tau_us", path, no)
        if resolved:
            try:
                phi_deg = float(toks[2])
            except ValueError as exc:
                raise ParseError(path, no, f"phi_deg must be a number, got {toks[2]!r}") from exc
            cd = int(round(phi_deg * 100.0))
            if not 0 <= cd < PHASE_STEPS:
                raise ParseError(path, no, f"phi_deg {phi_deg} outside [0, 360)")
            sign, phase = 0, cd
            delta = _parse_int_field(toks[3], "delta_us", path, no)
        else:
            sign = _parse_int_field(toks[2], "sign", path, no)
            phase = _parse_int_field(toks[3], "phi_centideg", path, no)
            delta = _parse_int_field(toks[4], "delta_us", path, no)
        try:
            segments.append(PulseSegment(tau, sign, phase, delta))
        except ValueError as exc:
            raise ParseError(path, no, str(exc)) from exc
    if not segments:
        raise ParseError(path, len(lines), "sequence file has no segment rows")
    return PulseSequence(tuple(segments))


def format_pulse_sequence(seq: PulseSequence) -> str:
    lines = [SEQUENCE_HEADER]
    for i, s in enumerate(seq.segments, start=1):
        lines.append(f"{i},{s.tau_us},{s.sign},{s.phase_centideg},{s.delay_us}")
    return "\n".join(lines) + "\n"


def format_pulse_sequence_resolved(seq: PulseSequence) -> str:
    """Export with the sign folded into a two-decimal phase in degrees."""
    lines = [RESOLVED_HEADER]
    for i, s in enumerate(seq.segments, start=1):
        cd = resolved_phase_centideg(s)
        lines.append(f"{i},{s.tau_us},{cd // 100}.{cd % 100:02d},{s.delay_us}")
    return "\n".join(lines) + "\n"


def format_pulse_sequence_json(seq: PulseSequence) -> str:
    obj = {
        "schema": SEQUENCE_JSON_SCHEMA,
        "segments": [
            {"tau_us": s.tau_us, "sign": s.sign,
             "phi_centideg": s.phase_centideg, "delta_us": s.delay_us}
            for s in seq.segments
        ],
    }
    return json.dumps(obj, indent=2) + "\n"


def load_pulse_sequence_json(path) -> PulseSequence:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, f"bad JSON: {exc.msg}") from exc
    if obj.get("schema") != SEQUENCE_JSON_SCHEMA:
        raise ParseError(path, None, f"unsupported schema {obj.get('schema')!r}")
    try:
        segs = [PulseSegment(s["tau_us"], s["sign"], s["phi_centideg"], s["delta_us"])
                for s in obj["segments"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(path, None, f"bad segment entry: {exc}") from exc
    if not segs:
        raise ParseError(path, None, "sequence has no segments")
    return PulseSequence(tuple(segs))


# ----------------------------------------------------------------- GA config

_GA_INT_FIELDS = {"rows", "seed", "population", "max_delay_us", "max_tau_us",
                  "mutation_step_trigger", "max_generations",
                  "max_local_generations", "local_tau_width_us",
                  "local_phase_width_centideg", "rows_min", "rows_max"}
_GA_FLOAT_FIELDS = {"mutation_initial", "mutation_step", "mutation_ceiling",
                    "stagnation_eps", "selection_pressure", "pressure_step",
                    "pressure_max", "crossover_rate", "flip_rate",
                    "budget_main_s", "budget_local_s", "acceptance_threshold",
                    "local_trigger", "local_delay_width_frac"}


def load_ga_config(path, **overrides) -> GAConfig:
    """Read a GA config (key-value; every GAConfig field by name)."""
    path = Path(path)
    kv = parse_kv_text(path.read_text(), path)
    kwargs: dict = {}
    for key, (raw, no) in kv.items():
        if key == "local_milestones":
            kwargs[key] = tuple(_parse_number_list(raw, path, no))
        elif key in _GA_INT_FIELDS:
            if raw.lower() == "none":
                kwargs[key] = None
                continue
            try:
                kwargs[key] = int(raw)
            except ValueError as exc:
                raise ParseError(path, no, f"{key} must be an integer: {exc}") from exc
        elif key in _GA_FLOAT_FIELDS:
            try:
                kwargs[key] = float(raw)
            except ValueError as exc:
                raise ParseError(path, no, f"{key} must be a number: {exc}") from exc
        else:
            raise ParseError(path, no, f"unknown GA config key {key!r}")
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    if "rows" not in kwargs:
        raise ParseError(path, None, "missing required key 'rows'")
    if "seed" not in kwargs:
        raise ParseError(path, None, "missing required key 'seed'")
    try:
        return GAConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ParseError(path, None, str(exc)) from exc


def format_ga_config(cfg: GAConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            v = "none"
        elif isinstance(v, tuple):
            v = "[" + ", ".join(f"{x:g}" for x in v) + "]"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- run record

def format_run_record(*records: RunRecord) -> str:
    """Concatenated stages as CSV, generations numbered continuously."""
    lines = [RECORD_HEADER]
    gen = 0
    for rec in records:
        if rec is None:
            continue
        for f, w, e in zip(rec.best_fitness, rec.wall_ms, rec.evals):
            lines.append(f"{gen},{f:.12f},{w},{e}")
            gen += 1
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------- fidelity grid

def format_grid_csv(grid: FidelityGrid) -> str:
    """First row: offset axis; first column: flip axis; body: fidelities."""
    lines = ["flip_deg\\offset_hz," + ",".join(f"{v:g}" for v in grid.offsets)]
    for i, flip in enumerate(grid.flip_errors):
        vals = ",".join(f"{grid.values[i, j]:.6f}" for j in range(len(grid.offsets)))
        lines.append(f"{flip:g},{vals}")
    return "\n".join(lines) + "\n"


# -------------------------------------------------------------------- ranges

def parse_error_range(text: str) -> tuple[float, float, float]:
    """``lo:hi:step`` into floats; step > 0 and lo <= hi required."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"range must be lo:hi:step, got {text!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ValueError(f"bad number in range {text!r}: {exc}") from exc
    if step <= 0:
        raise ValueError(f"range step must be > 0, got {step}")
    if hi < lo:
        raise ValueError(f"range [{lo}, {hi}] is reversed")
    return lo, hi, step


def parse_budget(text: str) -> float:
    """Duration with unit suffix: '90s', '5m', '1.5h'; bare numbers are seconds."""
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+)\s*([smh]?)\s*", text)
    if not m:
        raise ValueError(f"bad duration {text!r} (use e.g. 90s, 5m, 1h)")
    value = float(m.group(1))
    unit = m.group(2) or "s"
    return value * {"s": 1.0, "m": 60.0, "h": 3600.0}[unit]


# ------------------------------------------------------------------ manifest

def file_sha256(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


@dataclass
class RunManifest:
    """Everything needed to reproduce a command's outputs bit-for-bit."""

    command: str
    seed: int
    config: dict
    inputs: dict
    outputs: dict
    tool_version: str = _version
    wall_time_s: float = 0.0

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        obj = json.loads(text)
        return cls(command=obj["command"], seed=obj["seed"], config=obj["config"],
                   inputs=obj["inputs"], outputs=obj["outputs"],
                   tool_version=obj.get("tool_version", "?"),
                   wall_time_s=obj.get("wall_time_s", 0.0))


def manifest_path(out_path) -> Path:
    out = Path(out_path)
    return out.with_name(out.name + ".manifest.json")


def write_manifest(out_path, manifest: RunManifest) -> Path:
    p = manifest_path(out_path)
    p.write_text(manifest.to_json())
    return p
