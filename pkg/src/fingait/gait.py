"""Core gait domain: kinematic settings, attainability bounds, waveforms,
electrical power, the normalized kinematic metric, and per-cycle traces.

A gait is one static kinematic setting held over a single up/down flap
cycle: flap frequency, stroke amplitude, pitch amplitude, and the
stroke-pitch phase offset (SPO). Angles are degrees everywhere at the API
surface; radians appear only inside trig evaluation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import isfinite

import numpy as np

from .util import fmt

#: Supply voltage of both actuators during every experiment.
SUPPLY_VOLTAGE = 4.98

#: Default number of samples per flap cycle. Resolves the two-peak thrust
#: waveform while keeping sequence-model training cheap.
DEFAULT_SAMPLES_PER_CYCLE = 50


@dataclass(frozen=True)
class Gait:
    """One static kinematic setting.

    frequency   flap frequency, Hz
    stroke_amp  stroke amplitude, degrees (max stroke angle over a cycle)
    pitch_amp   pitch amplitude, degrees (max pitch angle over a cycle)
    spo         stroke-pitch offset, degrees (phase lead of pitch vs stroke)
    """

    frequency: float
    stroke_amp: float
    pitch_amp: float
    spo: float

    def __post_init__(self):
        for name in ("frequency", "stroke_amp", "pitch_amp", "spo"):
            v = getattr(self, name)
            if not isfinite(v):
                raise ValueError(f"gait field {name} must be finite, got {v!r}")
        if self.frequency <= 0:
            raise ValueError(f"frequency must be > 0, got {self.frequency}")

    def astuple(self) -> tuple[float, float, float, float]:
        """(frequency, stroke, pitch, spo) — the lexicographic order used
        for tie-breaking."""
        return (self.frequency, self.stroke_amp, self.pitch_amp, self.spo)


@dataclass(frozen=True)
class StepSizes:
    """User-selected equivalent step per kinematic: a change of one step in
    any kinematic costs the same kinematic-smoothness loss."""

    s_stroke: float = 5.0
    s_pitch: float = 5.0
    s_freq: float = 0.125
    s_spo: float = 11.25

    def __post_init__(self):
        for name in ("s_stroke", "s_pitch", "s_freq", "s_spo"):
            v = getattr(self, name)
            if not (isfinite(v) and v > 0):
                raise ValueError(f"step size {name} must be strictly positive, got {v!r}")

    def asarray(self) -> np.ndarray:
        return np.array([self.s_stroke, self.s_pitch, self.s_freq, self.s_spo])


@dataclass(frozen=True)
class Material:
    """Fin design. Young's modulus is carried for documentation only."""

    name: str
    youngs_modulus: float  # Pa


RIGID = Material("rigid", 1.0e9)
PDMS_1_10 = Material("pdms_1_10", 850.0e3)
PDMS_1_20 = Material("pdms_1_20", 310.0e3)

MATERIALS = {m.name: m for m in (RIGID, PDMS_1_10, PDMS_1_20)}


def material(name: str) -> Material:
    try:
        return MATERIALS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown material {name!r}; expected one of {sorted(MATERIALS)}") from None


@dataclass
class CycleTrace:
    """Sampled time histories over one flap cycle.

    All series share one length (>= 8); arrays are frozen after construction
    so traces are safe to share across threads.
    """

    time: np.ndarray            # s
    stroke_angle: np.ndarray    # deg
    pitch_angle: np.ndarray     # deg
    thrust: np.ndarray          # N
    lift: np.ndarray            # N
    side: np.ndarray            # N
    current_stroke: np.ndarray  # A
    current_pitch: np.ndarray   # A
    voltage: float              # V, constant over the trace

    def __post_init__(self):
        series = ("time", "stroke_angle", "pitch_angle", "thrust", "lift",
                  "side", "current_stroke", "current_pitch")
        n = None
        for name in series:
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if n is None:
                n = arr.shape[0]
            elif arr.shape != (n,):
                raise ValueError(f"trace series {name} has shape {arr.shape}, expected ({n},)")
        if n is None or n < 8:
            raise ValueError(f"trace needs >= 8 samples per cycle, got {n}")
        if not self.voltage > 0:
            raise ValueError(f"voltage must be > 0, got {self.voltage}")
        if np.any(self.current_stroke < 0) or np.any(self.current_pitch < 0):
            raise ValueError("actuator currents must be >= 0")
        for name in series:
            getattr(self, name).flags.writeable = False

    def __len__(self) -> int:
        return self.time.shape[0]


@dataclass(frozen=True)
class CycleSummary:
    """Cycle averages for one gait. ``fom`` stays None until the
    figure-of-merit stage fills it in (undefined below the power floor)."""

    thrust_avg: float
    power_avg: float
    fom: float | None = None


@dataclass(frozen=True)
class Feasibility:
    """Verdict of the attainable-gait check; ``violations`` names each
    violated bound when infeasible."""

    feasible: bool
    stroke_limit: float
    pitch_limit: float
    violations: tuple[str, ...] = field(default=())


def stroke_limit(frequency: float) -> float:
    """Frequency-dependent strict upper bound on stroke amplitude, degrees."""
    return 97.0 - 30.0 * frequency


def pitch_limit(frequency: float) -> float:
    """Frequency-dependent strict upper bound on pitch amplitude, degrees."""
    return 75.0 - 26.0 * frequency


def validate_gait(g: Gait) -> Feasibility:
    """Check the attainable-gait constraint: 0 < stroke < 97 - 30 f and
    0 < pitch < 75 - 26 f, all inequalities strict."""
    s_lim = stroke_limit(g.frequency)
    p_lim = pitch_limit(g.frequency)
    violations = []
    if not 0.0 < g.stroke_amp:
        violations.append(f"stroke_amp {g.stroke_amp} not > 0")
    if not g.stroke_amp < s_lim:
        violations.append(f"stroke_amp {g.stroke_amp} not < {s_lim} (97 - 30 f)")
    if not 0.0 < g.pitch_amp:
        violations.append(f"pitch_amp {g.pitch_amp} not > 0")
    if not g.pitch_amp < p_lim:
        violations.append(f"pitch_amp {g.pitch_amp} not < {p_lim} (75 - 26 f)")
    return Feasibility(not violations, s_lim, p_lim, tuple(violations))


def synthesize_waveforms(g: Gait, samples_per_cycle: int = DEFAULT_SAMPLES_PER_CYCLE):
    """Sinusoidal stroke/pitch time histories for one cycle.

    stroke(t) = stroke_amp * sin(2 pi f t); pitch leads by the SPO:
    pitch(t) = pitch_amp * sin(2 pi f t + spo_rad). Returns
    (time, stroke_angle, pitch_angle) arrays of length samples_per_cycle.
    """
    if samples_per_cycle < 8:
        raise ValueError(f"samples_per_cycle must be >= 8, got {samples_per_cycle}")
    j = np.arange(samples_per_cycle)
    t = j / (g.frequency * samples_per_cycle)
    phase = 2.0 * np.pi * g.frequency * t
    spo_rad = np.deg2rad(g.spo)
    stroke = g.stroke_amp * np.sin(phase)
    pitch = g.pitch_amp * np.sin(phase + spo_rad)
    return t, stroke, pitch


def instantaneous_power(i_stroke, i_pitch, v):
    """Total electrical power of both actuators: (I_stroke + I_pitch) * V.

    Accepts scalars or arrays; currents must be non-negative, voltage > 0.
    """
    i_s = np.asarray(i_stroke, dtype=float)
    i_p = np.asarray(i_pitch, dtype=float)
    if np.any(i_s < 0) or np.any(i_p < 0):
        raise ValueError("actuator currents must be >= 0")
    if not np.all(np.asarray(v, dtype=float) > 0):
        raise ValueError("voltage must be > 0")
    p = i_s * v + i_p * v
    return float(p) if np.ndim(p) == 0 else p


def kinematic_distance(current: Gait, proposed: Gait, s: StepSizes = StepSizes()) -> float:
    """Euclidean distance between two gaits in the step-normalized space."""
    d = np.array([
        (proposed.stroke_amp - current.stroke_amp) / s.s_stroke,
        (proposed.pitch_amp - current.pitch_amp) / s.s_pitch,
        (proposed.frequency - current.frequency) / s.s_freq,
        (proposed.spo - current.spo) / s.s_spo,
    ])
    return float(np.sqrt(np.sum(d * d)))


def cycle_summary(trace: CycleTrace) -> CycleSummary:
    """Cycle-average thrust and electrical power of a trace."""
    thrust_avg = float(np.mean(trace.thrust))
    power_avg = float(np.mean(
        instantaneous_power(trace.current_stroke, trace.current_pitch, trace.voltage)))
    return CycleSummary(thrust_avg=thrust_avg, power_avg=power_avg)


TRACE_CSV_COLUMNS = ("time_s", "stroke_deg", "pitch_deg", "thrust_n", "lift_n",
                     "side_n", "current_stroke_a", "current_pitch_a", "voltage_v")


def write_trace_csv(trace: CycleTrace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_CSV_COLUMNS)
        for i in range(len(trace)):
            writer.writerow([
                fmt(trace.time[i]), fmt(trace.stroke_angle[i]), fmt(trace.pitch_angle[i]),
                fmt(trace.thrust[i]), fmt(trace.lift[i]), fmt(trace.side[i]),
                fmt(trace.current_stroke[i]), fmt(trace.current_pitch[i]), fmt(trace.voltage),
            ])


def read_trace_csv(path) -> CycleTrace:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRACE_CSV_COLUMNS:
            raise ValueError(f"{path}: bad trace CSV header {header!r}")
        rows = [list(map(float, row)) for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: empty trace CSV")
    cols = np.array(rows, dtype=float).T
    voltages = cols[8]
    if np.ptp(voltages) != 0.0:
        raise ValueError(f"{path}: voltage column is not constant")
    return CycleTrace(time=cols[0], stroke_angle=cols[1], pitch_angle=cols[2],
                      thrust=cols[3], lift=cols[4], side=cols[5],
                      current_stroke=cols[6], current_pitch=cols[7],
                      voltage=float(voltages[0]))
