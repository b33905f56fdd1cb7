"""Shared forward-model machinery: the gait feature convention, min-max
input normalization over the experiment-grid axis ranges, model metadata,
and the versioned flat-array model file format (little-endian binary
payload plus a text manifest)."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .. import datagen
from ..gait import Gait, material
from ..util import parse_kv_text

MODEL_FORMAT = "fin-gait-model/1"

AXIS_NAMES = ("stroke", "pitch", "freq", "spo")

#: Experiment-grid axis ranges used for affine normalization to [-1, 1].
AXIS_RANGES = ((0.0, 55.0), (0.0, 55.0), (0.75, 2.0), (-22.5, 45.0))

TARGETS = ("thrust", "power")


class ModelMismatchError(ValueError):
    """A model's (target, material) metadata does not match its use site."""


def gait_row(g: Gait) -> np.ndarray:
    """Raw feature row in the canonical axis order (stroke, pitch, freq, spo)."""
    return np.array([g.stroke_amp, g.pitch_amp, g.frequency, g.spo])


def gait_matrix(gaits) -> np.ndarray:
    return np.array([[g.stroke_amp, g.pitch_amp, g.frequency, g.spo] for g in gaits])


def row_target(row: datagen.DatasetRow, target: str) -> float:
    if target == "thrust":
        return row.thrust_avg
    if target == "power":
        return row.power_avg
    raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")


def rows_material(rows) -> str:
    names = {r.material.name for r in rows}
    if len(names) != 1:
        raise ValueError(f"training rows mix materials {sorted(names)}; fit one material at a time")
    return names.pop()


@dataclass
class Normalization:
    """Per-axis affine map onto [-1, 1]."""

    ranges: tuple = AXIS_RANGES

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo = np.array([r[0] for r in self.ranges])
        hi = np.array([r[1] for r in self.ranges])
        return 2.0 * (x - lo) / (hi - lo) - 1.0


class ForwardModel:
    """Base of all trained gait -> scalar predictors.

    Subclasses implement ``_predict_normalized`` on an (N, 4) matrix of
    normalized inputs and declare their persisted arrays/fields. Trained
    models are immutable and safe to share across threads.
    """

    kind = "abstract"

    def __init__(self, target: str, material_name: str,
                 norm: Normalization | None = None):
        if target not in TARGETS:
            raise ValueError(f"unknown target {target!r}")
        self.target = target
        self.material_name = material(material_name).name
        self.norm = norm or Normalization()

    # -- prediction ----------------------------------------------------

    def predict_batch(self, raw: np.ndarray) -> np.ndarray:
        """Predict for an (N, 4) matrix of raw (stroke, pitch, freq, spo) rows."""
        raw = np.atleast_2d(np.asarray(raw, dtype=float))
        return self._predict_normalized(self.norm.apply(raw))

    def predict_avg(self, g: Gait) -> float:
        """Deterministic cycle-average prediction for one gait. No
        feasibility check: searches probe outside the attainable box and
        project afterwards."""
        return float(self.predict_batch(gait_row(g)[None, :])[0])

    def _predict_normalized(self, xn: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- persistence ---------------------------------------------------

    def _manifest_fields(self) -> dict:
        raise NotImplementedError

    def _arrays(self) -> list[tuple[str, np.ndarray]]:
        raise NotImplementedError

    @classmethod
    def _from_saved(cls, fields: dict, arrays: dict) -> "ForwardModel":
        raise NotImplementedError


MODEL_KINDS: dict[str, type] = {}


def register_kind(cls) -> type:
    MODEL_KINDS[cls.kind] = cls
    return cls


def _norm_fields(norm: Normalization) -> dict:
    return {f"norm_{name}": f"{lo!r},{hi!r}"
            for name, (lo, hi) in zip(AXIS_NAMES, norm.ranges)}


def _norm_from_fields(fields: dict) -> Normalization:
    ranges = []
    for name in AXIS_NAMES:
        lo, hi = fields[f"norm_{name}"].split(",")
        ranges.append((float(lo), float(hi)))
    return Normalization(tuple(ranges))


def save_model(model: ForwardModel, path) -> None:
    """Write the binary payload to ``path`` and the text manifest to
    ``path + '.manifest'``. Arrays are stored float64 little-endian in
    declared order, so save -> load -> predict is bit-identical."""
    arrays = model._arrays()
    lines = [
        f"format = {MODEL_FORMAT}",
        f"kind = {model.kind}",
        f"target = {model.target}",
        f"material = {model.material_name}",
    ]
    lines += [f"{k} = {v}" for k, v in _norm_fields(model.norm).items()]
    lines += [f"{k} = {v}" for k, v in model._manifest_fields().items()]
    for i, (name, arr) in enumerate(arrays):
        shape = "x".join(str(s) for s in arr.shape)
        lines.append(f"array{i} = {name} float64 {shape}")
    with open(str(path) + ".manifest", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(path, "wb") as fh:
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path, expect_target: str | None = None,
               expect_material: str | None = None) -> ForwardModel:
    """Load a model saved by :func:`save_model`. Refuses target/material
    mismatches when expectations are given."""
    manifest_path = str(path) + ".manifest"
    if not os.path.exists(manifest_path):
        raise ValueError(f"missing model manifest {manifest_path}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        fields = parse_kv_text(fh.read())
    if fields.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: unsupported model format {fields.get('format')!r}")
    kind = fields.get("kind")
    if kind not in MODEL_KINDS:
        raise ValueError(f"{path}: unknown model kind {kind!r}")

    arrays: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        i = 0
        while f"array{i}" in fields:
            name, dtype, shape_s = fields[f"array{i}"].split()
            shape = tuple(int(s) for s in shape_s.split("x"))
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ValueError(f"{path}: truncated payload for array {name!r}")
            arrays[name] = np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)
            i += 1
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after declared arrays")

    model = MODEL_KINDS[kind]._from_saved(fields, arrays)
    if expect_target is not None and model.target != expect_target:
        raise ModelMismatchError(
            f"{path}: model targets {model.target!r}, expected {expect_target!r}")
    if expect_material is not None and model.material_name != material(expect_material).name:
        raise ModelMismatchError(
            f"{path}: model is for material {model.material_name!r}, expected {expect_material!r}")
    return model


def check_pair(thrust_model: ForwardModel, power_model: ForwardModel,
               material_name: str | None = None) -> None:
    """Validate a (thrust, power) model pair for joint use."""
    if thrust_model.target != "thrust":
        raise ModelMismatchError(f"thrust slot holds a {thrust_model.target!r} model")
    if power_model.target != "power":
        raise ModelMismatchError(f"power slot holds a {power_model.target!r} model")
    if thrust_model.material_name != power_model.material_name:
        raise ModelMismatchError(
            f"model pair mixes materials {thrust_model.material_name!r} "
            f"and {power_model.material_name!r}")
    if material_name is not None and thrust_model.material_name != material(material_name).name:
        raise ModelMismatchError(
            f"model pair is for {thrust_model.material_name!r}, request is for {material_name!r}")
