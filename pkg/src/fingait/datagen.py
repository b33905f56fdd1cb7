"""Dataset synthesis mirroring the tank protocol: the 864-gait experiment
grid, ten-cycle runs with middle-cycle extraction, cycle averaging into
training rows, and the frequency/SPO/amplitude holdout split."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .gait import (SUPPLY_VOLTAGE, CycleTrace, Gait, Material, cycle_summary,
                   material)
from .plant import PlantParams, plant_trace
from .util import derive_seed, fmt

STROKE_VALUES = (0.0, 15.0, 25.0, 32.5, 40.0, 55.0)
PITCH_VALUES = (0.0, 15.0, 25.0, 32.0, 38.0, 55.0)
FREQUENCY_VALUES = (0.75, 1.0, 1.25, 1.5, 1.75, 2.0)
SPO_VALUES = (-22.5, 0.0, 22.5, 45.0)

CYCLES_PER_GAIT = 10
# Cycles kept for analysis (0-based): drop the first two and last three,
# keeping five 'middle' cycles clear of actuator start/stop transients.
KEPT_CYCLES = (2, 3, 4, 5, 6)

HOLDOUT_FREQUENCY = 1.25
HOLDOUT_SPO = 0.0
HOLDOUT_AMPLITUDE = 25.0


@dataclass(frozen=True)
class DatasetRow:
    """One post-processed training example: a gait and its cycle averages."""

    material: Material
    gait: Gait
    voltage: float
    thrust_avg: float
    power_avg: float
    trace_ref: str | None = None


def experiment_grid() -> list[Gait]:
    """Full factorial of the tested kinematic values: 864 unique gaits in
    stroke-major order (then pitch, frequency, SPO)."""
    grid = []
    for stroke in STROKE_VALUES:
        for pitch in PITCH_VALUES:
            for freq in FREQUENCY_VALUES:
                for spo in SPO_VALUES:
                    grid.append(Gait(frequency=freq, stroke_amp=stroke,
                                     pitch_amp=pitch, spo=spo))
    return grid


def run_and_postprocess(grid: list[Gait], m: Material, seed: int,
                        samples_per_cycle: int = 50,
                        params: PlantParams | None = None,
                        with_traces: bool = False):
    """Run every gait for ten cycles on the plant and average the five kept
    middle cycles into one DatasetRow per gait.

    Per-gait, per-cycle seeds derive deterministically from the master seed,
    so rows are reproducible and independent of execution order. With
    ``with_traces`` the kept cycles are also averaged sample-by-sample into
    one mean CycleTrace per gait (for sequence-model training); returns
    (rows, traces) in that case, else just rows.
    """
    if not grid:
        raise ValueError("experiment grid is empty")
    rows: list[DatasetRow] = []
    mean_traces: list[CycleTrace] = []
    for idx, g in enumerate(grid):
        cycles = [
            plant_trace(g, m, derive_seed(seed, m.name, idx, c),
                        samples_per_cycle, params=params)
            for c in range(CYCLES_PER_GAIT)
        ]
        kept = [cycles[c] for c in KEPT_CYCLES]
        summaries = [cycle_summary(t) for t in kept]
        rows.append(DatasetRow(
            material=m, gait=g, voltage=SUPPLY_VOLTAGE,
            thrust_avg=float(np.mean([s.thrust_avg for s in summaries])),
            power_avg=float(np.mean([s.power_avg for s in summaries])),
        ))
        if with_traces:
            first = kept[0]
            mean_traces.append(CycleTrace(
                time=first.time, stroke_angle=first.stroke_angle,
                pitch_angle=first.pitch_angle,
                thrust=np.mean([t.thrust for t in kept], axis=0),
                lift=np.mean([t.lift for t in kept], axis=0),
                side=np.mean([t.side for t in kept], axis=0),
                current_stroke=np.mean([t.current_stroke for t in kept], axis=0),
                current_pitch=np.mean([t.current_pitch for t in kept], axis=0),
                voltage=first.voltage,
            ))
    return (rows, mean_traces) if with_traces else rows


def is_holdout(g: Gait) -> bool:
    return (g.frequency == HOLDOUT_FREQUENCY or g.spo == HOLDOUT_SPO
            or g.stroke_amp == HOLDOUT_AMPLITUDE or g.pitch_amp == HOLDOUT_AMPLITUDE)


def holdout_split(rows: list[DatasetRow]) -> tuple[list[DatasetRow], list[DatasetRow]]:
    """Split rows into (train, holdout). Holdout: frequency 1.25 Hz, or SPO
    0 deg, or stroke/pitch amplitude 25 deg."""
    train = [r for r in rows if not is_holdout(r.gait)]
    holdout = [r for r in rows if is_holdout(r.gait)]
    return train, holdout


DATASET_CSV_COLUMNS = ("material", "frequency_hz", "stroke_amp_deg", "pitch_amp_deg",
                       "spo_deg", "voltage_v", "thrust_avg_n", "power_avg_w", "trace_ref")


def write_dataset_csv(rows: list[DatasetRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(DATASET_CSV_COLUMNS)
        for r in rows:
            writer.writerow([
                r.material.name, fmt(r.gait.frequency), fmt(r.gait.stroke_amp),
                fmt(r.gait.pitch_amp), fmt(r.gait.spo), fmt(r.voltage),
                fmt(r.thrust_avg), fmt(r.power_avg), r.trace_ref or "",
            ])


def read_dataset_csv(path) -> list[DatasetRow]:
    rows = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != DATASET_CSV_COLUMNS:
            raise ValueError(f"{path}: bad dataset CSV header {header!r}")
        for rec in reader:
            if not rec:
                continue
            rows.append(DatasetRow(
                material=material(rec[0]),
                gait=Gait(frequency=float(rec[1]), stroke_amp=float(rec[2]),
                          pitch_amp=float(rec[3]), spo=float(rec[4])),
                voltage=float(rec[5]),
                thrust_avg=float(rec[6]),
                power_avg=float(rec[7]),
                trace_ref=rec[8] or None,
            ))
    return rows
