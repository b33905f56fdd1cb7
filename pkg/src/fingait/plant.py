"""Synthetic ground-truth plant standing in for the tank experiments.

The real force/current logs are not distributable, so this module provides
deterministic mean thrust/power surfaces per fin material plus noisy
per-cycle trace generation. The surfaces are calibrated to the reported
per-material extremes (peak thrust 1.2 / 2.1 / 1.6 N, peak power
7.6 / 7.1 / 7.1 W over the experiment grid), the material orderings, and
the monotone trends; they make no claim to hydrodynamic fidelity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import isfinite

import numpy as np

from .gait import (SUPPLY_VOLTAGE, CycleTrace, Gait, Material, material,
                   synthesize_waveforms)
from .util import parse_kv_text

PLANT_PARAMS_FORMAT = "fin-plant-params/1"

#: Fraction of electrical power drawn by the stroke actuator; the stroke
#: motor dominates consumption.
STROKE_POWER_SHARE = 0.7

#: Mean of |sin| over a full period; used to size current amplitudes.
MEAN_ABS_SIN = 2.0 / np.pi


@dataclass(frozen=True)
class PlantParams:
    """Calibration constants of the synthetic plant for one material."""

    t_scale: float             # N, peak thrust over the experiment grid
    p_scale: float             # W, power coefficient
    p_pitch_gain: float        # dimensionless pitch sensitivity of power
    noise_base: float = 0.02   # N, thrust noise floor
    noise_lowfreq_gain: float = 0.01  # N/Hz, extra noise at low frequency

    def __post_init__(self):
        if not (self.t_scale > 0 and self.p_scale > 0):
            raise ValueError("t_scale and p_scale must be > 0")
        if self.p_pitch_gain < 0 or self.noise_base < 0 or self.noise_lowfreq_gain < 0:
            raise ValueError("gains and noise levels must be >= 0")


def _params(t_scale: float, p_max: float, p_pitch_gain: float) -> PlantParams:
    # p_scale chosen so the grid maximum (stroke 55, f 2, pitch 55) is p_max.
    return PlantParams(t_scale=t_scale, p_scale=p_max / (1.0 + p_pitch_gain),
                       p_pitch_gain=p_pitch_gain)


PLANT_PARAMS: dict[str, PlantParams] = {
    "rigid": _params(1.2, 7.6, 0.15),
    "pdms_1_10": _params(2.1, 7.1, 0.30),
    "pdms_1_20": _params(1.6, 7.1, 0.10),
}


def params_for(m: Material | str, params: PlantParams | None = None) -> PlantParams:
    if params is not None:
        return params
    name = m.name if isinstance(m, Material) else material(m).name
    return PLANT_PARAMS[name]


def plant_thrust_avg(g: Gait, m: Material, params: PlantParams | None = None) -> float:
    """Deterministic cycle-average thrust surface, N.

    Separable in the four kinematics: rises with frequency (^1.5) and
    stroke (^1.2), peaks at pitch 37.5 deg, and is maximized over the SPO at
    -22.5 deg (SPO beyond +22.5 deg reverses thrust).
    """
    p = params_for(m, params)
    spo_rad = np.deg2rad(g.spo)
    return float(
        p.t_scale
        * (g.frequency / 2.0) ** 1.5
        * (g.stroke_amp / 55.0) ** 1.2
        * np.sin(np.pi * g.pitch_amp / 75.0)
        * np.cos(2.0 * (spo_rad + np.pi / 8.0))
    )


def plant_power_avg(g: Gait, m: Material, params: PlantParams | None = None) -> float:
    """Deterministic cycle-average electrical power surface, W (>= 0).

    Near-linear in stroke amplitude (saturating at 45 deg), quadratic in
    frequency, mildly increasing in pitch.
    """
    p = params_for(m, params)
    return float(
        p.p_scale
        * (min(g.stroke_amp, 45.0) / 45.0)
        * (g.frequency / 2.0) ** 2
        * (1.0 + p.p_pitch_gain * g.pitch_amp / 55.0)
    )


def thrust_noise_sigma(frequency: float, p: PlantParams) -> float:
    """Per-sample thrust noise level; low-frequency gaits are noisier."""
    return max(p.noise_base + p.noise_lowfreq_gain * (2.0 - frequency), 0.0)


def plant_trace(g: Gait, m: Material, seed: int, samples_per_cycle: int = 50,
                params: PlantParams | None = None) -> CycleTrace:
    """One noisy measured cycle for a gait.

    Thrust carries a two-peak waveform around the deterministic mean plus
    Gaussian actuator noise; currents are rectified sinusoids sized so the
    sampled electrical power averages the deterministic power surface with
    a 70/30 stroke/pitch split. Deterministic given (inputs, seed).
    """
    p = params_for(m, params)
    rng = np.random.default_rng(seed)
    t, stroke, pitch = synthesize_waveforms(g, samples_per_cycle)
    phase = 2.0 * np.pi * g.frequency * t
    spo_rad = np.deg2rad(g.spo)

    t_avg = plant_thrust_avg(g, m, p)
    sigma = thrust_noise_sigma(g.frequency, p)
    thrust = t_avg * (1.0 + 0.6 * np.cos(2.0 * phase))
    if sigma > 0:
        thrust = thrust + rng.normal(0.0, sigma, samples_per_cycle)

    p_avg = plant_power_avg(g, m, p)
    amp_stroke = STROKE_POWER_SHARE * p_avg / (SUPPLY_VOLTAGE * MEAN_ABS_SIN)
    amp_pitch = (1.0 - STROKE_POWER_SHARE) * p_avg / (SUPPLY_VOLTAGE * MEAN_ABS_SIN)
    current_stroke = amp_stroke * np.abs(np.sin(phase))
    current_pitch = amp_pitch * np.abs(np.cos(phase + spo_rad))

    zeros = np.zeros(samples_per_cycle)
    return CycleTrace(time=t, stroke_angle=stroke, pitch_angle=pitch,
                      thrust=thrust, lift=zeros, side=zeros.copy(),
                      current_stroke=current_stroke, current_pitch=current_pitch,
                      voltage=SUPPLY_VOLTAGE)


def noiseless(params: PlantParams) -> PlantParams:
    """Copy of params with thrust noise switched off."""
    return replace(params, noise_base=0.0, noise_lowfreq_gain=0.0)


def write_plant_params(params: PlantParams, m: Material, path) -> None:
    """Persist calibration constants as an auditable key/value text file."""
    lines = [
        f"format = {PLANT_PARAMS_FORMAT}",
        f"material = {m.name}",
        f"t_scale_n = {params.t_scale!r}",
        f"p_scale_w = {params.p_scale!r}",
        f"p_pitch_gain = {params.p_pitch_gain!r}",
        f"noise_base_n = {params.noise_base!r}",
        f"noise_lowfreq_gain_n_per_hz = {params.noise_lowfreq_gain!r}",
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_plant_params(path) -> tuple[PlantParams, Material]:
    with open(path, "r", encoding="utf-8") as fh:
        kv = parse_kv_text(fh.read())
    if kv.get("format") != PLANT_PARAMS_FORMAT:
        raise ValueError(f"{path}: unsupported plant params format {kv.get('format')!r}")
    m = material(kv["material"])
    params = PlantParams(
        t_scale=float(kv["t_scale_n"]),
        p_scale=float(kv["p_scale_w"]),
        p_pitch_gain=float(kv["p_pitch_gain"]),
        noise_base=float(kv["noise_base_n"]),
        noise_lowfreq_gain=float(kv["noise_lowfreq_gain_n_per_hz"]),
    )
    for key in ("t_scale_n", "p_scale_w"):
        if not isfinite(float(kv[key])):
            raise ValueError(f"{path}: non-finite {key}")
    return params, m
