"""Command-line front end: optimize, evaluate, scan, export, gates."""

from __future__ import annotations

import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .ga import Chromosome, GAConfig, optimize_pipeline
from .gates import GATE_NAME_FORMS, parse_gate
from .io import (
    ParseError,
    RunManifest,
    file_sha256,
    format_ga_config,
    format_grid_csv,
    format_pulse_sequence,
    format_pulse_sequence_json,
    format_pulse_sequence_resolved,
    format_run_record,
    load_ga_config,
    load_pulse_sequence,
    load_pulse_sequence_json,
    load_spin_system,
    manifest_path,
    parse_budget,
    parse_error_range,
    write_manifest,
)
from .propagator import (
    PulseSequence,
    gate_fidelity,
    sequence_propagator,
    total_duration,
    unitarity_residual,
)
from .robustness import scan as robustness_scan

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_THRESHOLD_MISS = 2


def _fail(message: str) -> "click.exceptions.Exit":
    click.echo(f"error: {message}", err=True)
    return click.exceptions.Exit(EXIT_ERROR)


def _load_system(path):
    try:
        return load_spin_system(path)
    except (ParseError, OSError) as exc:
        raise _fail(str(exc))


def _load_sequence(path):
    try:
        p = Path(path)
        if p.suffix == ".json":
            return load_pulse_sequence_json(p)
        return load_pulse_sequence(p)
    except (ParseError, OSError) as exc:
        raise _fail(str(exc))


def _resolve_gate(name: str, n: int) -> np.ndarray:
    try:
        return parse_gate(name, n)
    except ValueError as exc:
        raise _fail(str(exc))


@click.group()
@click.version_option(version=__version__, prog_name="gapulse")
def main():
    """Synthesize and analyze hard-pulse/delay sequences for spin-system gates."""


@main.command()
@click.option("--system", "system_path", required=True, type=click.Path(exists=True),
              help="Spin-system config file.")
@click.option("--gate", "gate_name", required=True, help="Target gate name.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="GA config file (key-value).")
@click.option("--seed", type=int, default=None, help="RNG seed (overrides config).")
@click.option("--rows", type=int, default=None, help="Sequence rows N (overrides config).")
@click.option("--pop", "population", type=int, default=None,
              help="Population size (overrides config).")
@click.option("--budget-main", default=None, help="Main-stage wall budget (90s, 5m, 1h).")
@click.option("--budget-local", default=None, help="Local-stage wall budget.")
@click.option("--max-delay", "max_delay_us", type=int, default=None,
              help="Largest delay gene in microseconds.")
@click.option("--max-generations", type=int, default=None,
              help="Generation cap for the main stage (reproducible runs).")
@click.option("--max-local-generations", type=int, default=None,
              help="Generation cap for the local stage (reproducible runs).")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Fitness-evaluation concurrency (results identical for any value).")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Output sequence CSV; record and manifest written alongside.")
def optimize(system_path, gate_name, config_path, seed, rows, population,
             budget_main, budget_local, max_delay_us, max_generations,
             max_local_generations, threads, out_path):
    """Search for a pulse sequence implementing GATE on SYSTEM."""
    sys_ = _load_system(system_path)
    target = _resolve_gate(gate_name, sys_.n_spins)
    overrides = dict(seed=seed, rows=rows, population=population,
                     max_delay_us=max_delay_us, max_generations=max_generations,
                     max_local_generations=max_local_generations)
    try:
        if budget_main is not None:
            overrides["budget_main_s"] = parse_budget(budget_main)
        if budget_local is not None:
            overrides["budget_local_s"] = parse_budget(budget_local)
    except ValueError as exc:
        raise _fail(str(exc))
    try:
        if config_path is not None:
            cfg = load_ga_config(config_path, **overrides)
        else:
            if rows is None or seed is None:
                raise _fail("without --config, both --rows and --seed are required")
            cfg = GAConfig(**{k: v for k, v in overrides.items() if v is not None})
    except ParseError as exc:
        raise _fail(str(exc))
    except (TypeError, ValueError) as exc:
        raise _fail(str(exc))

    t0 = time.monotonic()
    best, rec_main, rec_local = optimize_pipeline(cfg, sys_, target, threads=threads)
    wall = time.monotonic() - t0

    out = Path(out_path)
    seq = best.decode()
    out.write_text(format_pulse_sequence(seq))
    record_path = out.with_name(out.stem + ".record.csv")
    record_path.write_text(format_run_record(rec_main, rec_local))

    # snapshot with the executed generation counts so a re-run is bit-for-bit
    import dataclasses
    resolved = dataclasses.replace(
        cfg,
        max_generations=max(rec_main.generations - 1, 0),
        max_local_generations=(max(rec_local.generations - 1, 0)
                               if rec_local is not None else cfg.max_local_generations),
    )
    manifest = RunManifest(
        command="optimize",
        seed=cfg.seed,
        config={"ga": format_ga_config(resolved), "gate": gate_name,
                "threads_hint": threads},
        inputs={"system": str(system_path), "system_sha256": file_sha256(system_path)},
        outputs={"sequence": str(out), "record": str(record_path),
                 "best_fitness": f"{best.fitness:.12f}",
                 "duration_us": total_duration(seq),
                 "stop_reason_main": rec_main.stop_reason,
                 "stop_reason_local": rec_local.stop_reason if rec_local else "skipped"},
        wall_time_s=round(wall, 3),
    )
    write_manifest(out, manifest)

    click.echo(f"best_fitness {best.fitness:.6f}")
    click.echo(f"duration_us {total_duration(seq)}")
    click.echo(f"sequence {out}")
    click.echo(f"record {record_path}")
    click.echo(f"manifest {manifest_path(out)}")
    if best.fitness < cfg.acceptance_threshold:
        click.echo(f"threshold {cfg.acceptance_threshold} not reached", err=True)
        raise click.exceptions.Exit(EXIT_THRESHOLD_MISS)


@main.command()
@click.option("--system", "system_path", required=True, type=click.Path(exists=True))
@click.option("--sequence", "sequence_path", required=True, type=click.Path(exists=True))
@click.option("--gate", "gate_name", required=True)
def evaluate(system_path, sequence_path, gate_name):
    """Score a sequence file against a target gate."""
    sys_ = _load_system(system_path)
    seq = _load_sequence(sequence_path)
    target = _resolve_gate(gate_name, sys_.n_spins)
    u = sequence_propagator(sys_, seq)
    if u.shape != target.shape:
        raise _fail(f"gate dimension {target.shape[0]} != system dimension {u.shape[0]}")
    click.echo(f"fidelity {gate_fidelity(target, u):.6f}")
    click.echo(f"duration_us {total_duration(seq)}")
    click.echo(f"unitarity_residual {unitarity_residual(u):.3e}")


@main.command(name="scan")
@click.option("--system", "system_path", required=True, type=click.Path(exists=True))
@click.option("--sequence", "sequence_path", required=True, type=click.Path(exists=True))
@click.option("--gate", "gate_name", required=True)
@click.option("--flip", "flip_range", default="-14:14:0.5", show_default=True,
              help="Flip-angle error range lo:hi:step in degrees.")
@click.option("--offset", "offset_range", default="-20:20:0.5", show_default=True,
              help="Offset error range lo:hi:step in Hz.")
@click.option("--out", "out_path", required=True, type=click.Path())
def scan_cmd(system_path, sequence_path, gate_name, flip_range, offset_range, out_path):
    """Map fidelity over flip-angle and offset errors."""
    sys_ = _load_system(system_path)
    seq = _load_sequence(sequence_path)
    target = _resolve_gate(gate_name, sys_.n_spins)
    try:
        flips = parse_error_range(flip_range)
        offsets = parse_error_range(offset_range)
    except ValueError as exc:
        raise _fail(str(exc))
    t0 = time.monotonic()
    grid = robustness_scan(sys_, seq, target, flips, offsets)
    out = Path(out_path)
    out.write_text(format_grid_csv(grid))
    manifest = RunManifest(
        command="scan",
        seed=0,
        config={"gate": gate_name, "flip": flip_range, "offset": offset_range},
        inputs={"system": str(system_path), "system_sha256": file_sha256(system_path),
                "sequence": str(sequence_path),
                "sequence_sha256": file_sha256(sequence_path)},
        outputs={"grid": str(out)},
        wall_time_s=round(time.monotonic() - t0, 3),
    )
    write_manifest(out, manifest)
    click.echo(f"grid {out}")
    click.echo(f"manifest {manifest_path(out)}")


@main.command()
@click.option("--sequence", "sequence_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["csv", "resolved", "json"]),
              required=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Output path (stdout when omitted).")
def export(sequence_path, fmt, out_path):
    """Re-emit a sequence file in another format."""
    seq = _load_sequence(sequence_path)
    if fmt == "csv":
        text = format_pulse_sequence(seq)
    elif fmt == "resolved":
        text = format_pulse_sequence_resolved(seq)
    else:
        text = format_pulse_sequence_json(seq)
    if out_path is None:
        click.echo(text, nl=False)
    else:
        Path(out_path).write_text(text)
        click.echo(f"wrote {out_path}")


@main.group()
def gates():
    """Target-gate helpers."""


@gates.command(name="list")
def gates_list():
    """List the recognized gate-name forms."""
    for form in GATE_NAME_FORMS:
        click.echo(form)


if __name__ == "__main__":
    main()
