"""Neural forward models trained with seeded mini-batch gradient descent:
a fully-connected net on the four static kinematics, and a gated recurrent
sequence model that predicts per-timestep thrust and power over one flap
cycle (cycle averages are the mean of its per-timestep outputs).

Everything is plain numpy so that training is bit-reproducible from a seed
and model files round-trip exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..gait import DEFAULT_SAMPLES_PER_CYCLE, Gait, instantaneous_power
from .base import (ForwardModel, Normalization, gait_matrix, gait_row,
                   register_kind, row_target, rows_material)


class TrainingError(RuntimeError):
    """Training diverged (non-finite loss)."""


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class _MomentumSgd:
    """Plain gradient descent with momentum over a list of parameter arrays."""

    def __init__(self, params, learning_rate, momentum):
        self.params = params
        self.lr = learning_rate
        self.mu = momentum
        self.velocity = [np.zeros_like(p) for p in params]

    def step(self, grads):
        for p, v, g in zip(self.params, self.velocity, grads):
            v *= self.mu
            v -= self.lr * g
            p += v


def _clip_global_norm(grads, max_norm):
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total > max_norm > 0:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return grads


class _EarlyStopper:
    """Keep the best-scoring parameter snapshot; stop after ``patience``
    epochs without improvement."""

    def __init__(self, params, patience):
        self.params = params
        self.patience = patience
        self.best_score = np.inf
        self.best_snapshot = [p.copy() for p in params]
        self.stale = 0

    def update(self, score) -> bool:
        if score < self.best_score:
            self.best_score = score
            self.best_snapshot = [p.copy() for p in self.params]
            self.stale = 0
        else:
            self.stale += 1
        return self.stale > self.patience

    def restore(self):
        for p, best in zip(self.params, self.best_snapshot):
            p[...] = best


# ---------------------------------------------------------------------------
# Feedforward net
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeedforwardConfig:
    hidden: tuple[int, ...] = (64, 64)
    epochs: int = 1000
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    patience: int = 50


@register_kind
class FeedforwardModel(ForwardModel):
    """Fully-connected tanh net (default 4 -> 64 -> 64 -> 1) predicting one
    cycle-average target; trained on normalized inputs and affinely
    normalized targets."""

    kind = "feedforward"

    def __init__(self, layers, y_offset, y_scale, target, material_name,
                 norm=None, train_mae=float("nan"), holdout_mae=float("nan")):
        super().__init__(target, material_name, norm)
        self.layers = [(np.asarray(w, dtype=float), np.asarray(b, dtype=float))
                       for w, b in layers]
        self.y_offset = float(y_offset)
        self.y_scale = float(y_scale)
        self.train_mae = float(train_mae)
        self.holdout_mae = float(holdout_mae)

    def _forward(self, xn):
        h = xn
        for w, b in self.layers[:-1]:
            h = np.tanh(h @ w + b)
        w, b = self.layers[-1]
        return h @ w + b

    def _predict_normalized(self, xn):
        return self._forward(xn)[:, 0] * self.y_scale + self.y_offset

    def _manifest_fields(self):
        return {
            "hidden": ",".join(str(w.shape[1]) for w, _ in self.layers[:-1]),
            "y_offset": repr(self.y_offset),
            "y_scale": repr(self.y_scale),
            "train_mae": repr(self.train_mae),
            "holdout_mae": repr(self.holdout_mae),
        }

    def _arrays(self):
        out = []
        for i, (w, b) in enumerate(self.layers):
            out.append((f"W{i}", w))
            out.append((f"b{i}", b))
        return out

    @classmethod
    def _from_saved(cls, fields, arrays):
        from .base import _norm_from_fields
        layers = []
        i = 0
        while f"W{i}" in arrays:
            layers.append((arrays[f"W{i}"], arrays[f"b{i}"]))
            i += 1
        return cls(layers=layers, y_offset=float(fields["y_offset"]),
                   y_scale=float(fields["y_scale"]), target=fields["target"],
                   material_name=fields["material"], norm=_norm_from_fields(fields),
                   train_mae=float(fields.get("train_mae", "nan")),
                   holdout_mae=float(fields.get("holdout_mae", "nan")))


def _init_mlp(rng, widths):
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        layers.append((_glorot(rng, fan_in, fan_out), np.zeros(fan_out)))
    return layers


def fit_feedforward(train_rows, config: FeedforwardConfig, target: str, seed: int,
                    holdout_rows=None) -> FeedforwardModel:
    """Train the fully-connected net on cycle-average rows.

    Deterministic given the seed. When holdout rows are supplied, training
    early-stops on holdout MAE (patience from config) and the best-epoch
    parameters are kept.
    """
    material_name = rows_material(train_rows)
    norm = Normalization()
    xn = norm.apply(gait_matrix([r.gait for r in train_rows]))
    y = np.array([row_target(r, target) for r in train_rows])
    y_offset = float(np.mean(y))
    y_scale = float(max(np.std(y), 1e-12))
    yn = (y - y_offset) / y_scale

    rng = np.random.default_rng(seed)
    layers = _init_mlp(rng, (xn.shape[1], *config.hidden, 1))
    model = FeedforwardModel(layers, y_offset, y_scale, target, material_name, norm)
    params = [a for pair in model.layers for a in pair]
    opt = _MomentumSgd(params, config.learning_rate, config.momentum)

    xh = yh = None
    stopper = None
    if holdout_rows:
        xh = norm.apply(gait_matrix([r.gait for r in holdout_rows]))
        yh = np.array([row_target(r, target) for r in holdout_rows])
        stopper = _EarlyStopper(params, config.patience)

    n = xn.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, yb = xn[idx], yn[idx]
            # forward with caches
            acts = [xb]
            h = xb
            for w, b in model.layers[:-1]:
                h = np.tanh(h @ w + b)
                acts.append(h)
            w_out, b_out = model.layers[-1]
            out = h @ w_out + b_out
            loss = float(np.mean((out[:, 0] - yb) ** 2))
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            # backward
            grads = []
            delta = (2.0 / out.size) * (out - yb[:, None])
            for li in range(len(model.layers) - 1, -1, -1):
                w, _ = model.layers[li]
                grads.append(np.sum(delta, axis=0))       # db
                grads.append(acts[li].T @ delta)          # dW
                if li > 0:
                    delta = (delta @ w.T) * (1.0 - acts[li] ** 2)
            grads.reverse()
            opt.step(grads)

        if stopper is not None:
            holdout_mae = float(np.mean(np.abs(model._predict_normalized(xh) - yh)))
            if stopper.update(holdout_mae):
                break

    if stopper is not None:
        stopper.restore()
        model.holdout_mae = stopper.best_score
    model.train_mae = float(np.mean(np.abs(model._predict_normalized(xn) - y)))
    return model


# ---------------------------------------------------------------------------
# Recurrent sequence model
# ---------------------------------------------------------------------------

SEQUENCE_CHANNELS = ("thrust", "power")


@dataclass(frozen=True)
class SequenceConfig:
    hidden: int = 32
    epochs: int = 1000
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    patience: int = 50
    # BPTT gradients occasionally spike early in training; clipping keeps
    # the spec'd optimizer stable without changing its fixed points.
    clip_norm: float = 1.0


def _phase_features(samples_per_cycle: int) -> np.ndarray:
    """(T, 2) sin/cos of the within-cycle phase; identical for every gait
    because sample times are phase-locked to the cycle."""
    phase = 2.0 * np.pi * np.arange(samples_per_cycle) / samples_per_cycle
    return np.stack([np.sin(phase), np.cos(phase)], axis=1)


@register_kind
class SequenceModel(ForwardModel):
    """Gated recurrent net over one flap cycle.

    Per-timestep input is (normalized stroke, pitch, freq, spo, sin phase,
    cos phase); per-timestep output is (instantaneous thrust, instantaneous
    power). One trained instance serves both targets: ``retargeted`` returns
    a view over the same parameters with the other target selected.
    """

    kind = "sequence"
    N_INPUTS = 6

    def __init__(self, wx, wh, b, wy, by, y_offset, y_scale, hidden,
                 samples_per_cycle, target, material_name, norm=None,
                 train_mae=(float("nan"), float("nan")),
                 holdout_mae=(float("nan"), float("nan")), _cache=None):
        super().__init__(target, material_name, norm)
        self.wx = np.asarray(wx, dtype=float)
        self.wh = np.asarray(wh, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.wy = np.asarray(wy, dtype=float)
        self.by = np.asarray(by, dtype=float)
        self.y_offset = np.asarray(y_offset, dtype=float)
        self.y_scale = np.asarray(y_scale, dtype=float)
        self.hidden = int(hidden)
        self.samples_per_cycle = int(samples_per_cycle)
        self.train_mae = tuple(float(v) for v in train_mae)
        self.holdout_mae = tuple(float(v) for v in holdout_mae)
        self._phase = _phase_features(self.samples_per_cycle)
        # predict_avg cache shared across retargeted views; entries are
        # write-once and deterministic, so sharing is race-free in practice.
        self._avg_cache = {} if _cache is None else _cache

    def retargeted(self, target: str) -> "SequenceModel":
        """A view over the same parameters predicting the other channel."""
        return SequenceModel(self.wx, self.wh, self.b, self.wy, self.by,
                             self.y_offset, self.y_scale, self.hidden,
                             self.samples_per_cycle, target, self.material_name,
                             self.norm, self.train_mae, self.holdout_mae,
                             _cache=self._avg_cache)

    # -- forward pass ----------------------------------------------------

    def _inputs(self, xn: np.ndarray) -> np.ndarray:
        n, t = xn.shape[0], self.samples_per_cycle
        inputs = np.empty((n, t, self.N_INPUTS))
        inputs[:, :, :4] = xn[:, None, :]
        inputs[:, :, 4:] = self._phase[None, :, :]
        return inputs

    def _forward(self, inputs, want_cache=False):
        n, t, _ = inputs.shape
        hdim = self.hidden
        pre = inputs @ self.wx + self.b
        h = np.zeros((n, hdim))
        c = np.zeros((n, hdim))
        outputs = np.empty((n, t, 2))
        cache = {k: np.empty((t, n, hdim)) for k in
                 ("i", "f", "g", "o", "c_prev", "h_prev", "tc")} if want_cache else None
        for step in range(t):
            z = pre[:, step] + h @ self.wh
            gi = _sigmoid(z[:, :hdim])
            gf = _sigmoid(z[:, hdim:2 * hdim])
            gg = np.tanh(z[:, 2 * hdim:3 * hdim])
            go = _sigmoid(z[:, 3 * hdim:])
            if want_cache:
                cache["c_prev"][step] = c
                cache["h_prev"][step] = h
            c = gf * c + gi * gg
            tc = np.tanh(c)
            h = go * tc
            if want_cache:
                cache["i"][step] = gi
                cache["f"][step] = gf
                cache["g"][step] = gg
                cache["o"][step] = go
                cache["tc"][step] = tc
            outputs[:, step] = h @ self.wy + self.by
        return (outputs, cache) if want_cache else outputs

    def predict_traces(self, gaits) -> np.ndarray:
        """(N, T, 2) per-timestep thrust/power histories in physical units."""
        xn = self.norm.apply(gait_matrix(gaits))
        return self._forward(self._inputs(xn)) * self.y_scale + self.y_offset

    def _predict_normalized(self, xn):
        outputs = self._forward(self._inputs(xn))
        channel = SEQUENCE_CHANNELS.index(self.target)
        avg = outputs[:, :, channel].mean(axis=1)
        return avg * self.y_scale[channel] + self.y_offset[channel]

    def _avg_both(self, g: Gait) -> tuple[float, float]:
        key = g.astuple()
        hit = self._avg_cache.get(key)
        if hit is None:
            xn = self.norm.apply(gait_row(g)[None, :])
            outputs = self._forward(self._inputs(xn))
            avg = outputs[0].mean(axis=0) * self.y_scale + self.y_offset
            if len(self._avg_cache) > 65536:
                self._avg_cache.clear()
            hit = (float(avg[0]), float(avg[1]))
            self._avg_cache[key] = hit
        return hit

    def predict_avg(self, g: Gait) -> float:
        return self._avg_both(g)[SEQUENCE_CHANNELS.index(self.target)]

    # -- persistence -------------------------------------------------------

    def _manifest_fields(self):
        return {
            "hidden": str(self.hidden),
            "samples_per_cycle": str(self.samples_per_cycle),
            "train_mae_thrust": repr(self.train_mae[0]),
            "train_mae_power": repr(self.train_mae[1]),
            "holdout_mae_thrust": repr(self.holdout_mae[0]),
            "holdout_mae_power": repr(self.holdout_mae[1]),
        }

    def _arrays(self):
        return [("wx", self.wx), ("wh", self.wh), ("b", self.b),
                ("wy", self.wy), ("by", self.by),
                ("y_offset", self.y_offset), ("y_scale", self.y_scale)]

    @classmethod
    def _from_saved(cls, fields, arrays):
        from .base import _norm_from_fields
        return cls(wx=arrays["wx"], wh=arrays["wh"], b=arrays["b"],
                   wy=arrays["wy"], by=arrays["by"],
                   y_offset=arrays["y_offset"], y_scale=arrays["y_scale"],
                   hidden=int(fields["hidden"]),
                   samples_per_cycle=int(fields["samples_per_cycle"]),
                   target=fields["target"], material_name=fields["material"],
                   norm=_norm_from_fields(fields),
                   train_mae=(float(fields["train_mae_thrust"]),
                              float(fields["train_mae_power"])),
                   holdout_mae=(float(fields["holdout_mae_thrust"]),
                                float(fields["holdout_mae_power"])))


def _trace_targets(traces) -> np.ndarray:
    """Stack per-timestep (thrust, power) targets from cycle traces."""
    lengths = {len(t) for t in traces}
    if len(lengths) != 1:
        raise ValueError(f"traces must share one length, got lengths {sorted(lengths)}")
    out = np.empty((len(traces), lengths.pop(), 2))
    for i, trace in enumerate(traces):
        out[i, :, 0] = trace.thrust
        out[i, :, 1] = instantaneous_power(trace.current_stroke,
                                           trace.current_pitch, trace.voltage)
    return out


def _sequence_backward(model, inputs, cache, outputs, targets):
    """BPTT for the mean-squared per-timestep loss; returns grads in
    (wx, wh, b, wy, by) order."""
    n, t, _ = inputs.shape
    hdim = model.hidden
    d_out = (2.0 / outputs.size) * (outputs - targets)   # (N, T, 2)

    d_wy = np.zeros_like(model.wy)
    d_by = d_out.sum(axis=(0, 1))
    d_wh = np.zeros_like(model.wh)
    d_zs = np.empty((n, t, 4 * hdim))
    dh_next = np.zeros((n, hdim))
    dc_next = np.zeros((n, hdim))
    for step in range(t - 1, -1, -1):
        gi, gf, gg, go = (cache[k][step] for k in ("i", "f", "g", "o"))
        tc = cache["tc"][step]
        h_t = go * tc
        dy = d_out[:, step]
        d_wy += h_t.T @ dy
        dh = dy @ model.wy.T + dh_next
        do = dh * tc
        dc = dh * go * (1.0 - tc * tc) + dc_next
        di = dc * gg
        df = dc * cache["c_prev"][step]
        dg = dc * gi
        dc_next = dc * gf
        dz = d_zs[:, step]
        dz[:, :hdim] = di * gi * (1.0 - gi)
        dz[:, hdim:2 * hdim] = df * gf * (1.0 - gf)
        dz[:, 2 * hdim:3 * hdim] = dg * (1.0 - gg * gg)
        dz[:, 3 * hdim:] = do * go * (1.0 - go)
        d_wh += cache["h_prev"][step].T @ dz
        dh_next = dz @ model.wh.T
    flat_in = inputs.reshape(-1, inputs.shape[2])
    flat_dz = d_zs.reshape(-1, 4 * hdim)
    d_wx = flat_in.T @ flat_dz
    d_b = flat_dz.sum(axis=0)
    return [d_wx, d_wh, d_b, d_wy, d_by]


def fit_sequence(train_rows, train_traces, config: SequenceConfig, seed: int,
                 holdout_rows=None, holdout_traces=None) -> SequenceModel:
    """Train the recurrent model on per-timestep trace targets.

    ``train_traces[i]`` is the measured cycle for ``train_rows[i].gait``.
    Early-stops on the holdout cycle-average MAE (normalized units, both
    channels) when holdout traces are given; caps at ``config.epochs``.
    Deterministic given the seed.
    """
    if len(train_rows) != len(train_traces):
        raise ValueError("rows and traces must align one-to-one")
    material_name = rows_material(train_rows)
    norm = Normalization()
    xn = norm.apply(gait_matrix([r.gait for r in train_rows]))
    targets = _trace_targets(train_traces)
    samples_per_cycle = targets.shape[1]

    y_offset = targets.reshape(-1, 2).mean(axis=0)
    y_scale = np.maximum(targets.reshape(-1, 2).std(axis=0), 1e-12)
    targets_n = (targets - y_offset) / y_scale

    rng = np.random.default_rng(seed)
    hdim = config.hidden
    wx = _glorot(rng, SequenceModel.N_INPUTS, 4 * hdim)
    wh = _glorot(rng, hdim, 4 * hdim)
    b = np.zeros(4 * hdim)
    b[hdim:2 * hdim] = 1.0  # forget-gate bias opens the memory path at init
    wy = _glorot(rng, hdim, 2)
    by = np.zeros(2)
    model = SequenceModel(wx, wh, b, wy, by, y_offset, y_scale, hdim,
                          samples_per_cycle, "thrust", material_name, norm)
    params = [model.wx, model.wh, model.b, model.wy, model.by]
    opt = _MomentumSgd(params, config.learning_rate, config.momentum)

    inputs = model._inputs(xn)

    xh = true_h_avg = None
    stopper = None
    if holdout_rows is not None and holdout_traces:
        xh = norm.apply(gait_matrix([r.gait for r in holdout_rows]))
        true_h_avg = _trace_targets(holdout_traces).mean(axis=1)  # (Nh, 2)
        stopper = _EarlyStopper(params, config.patience)

    n = xn.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch_in = inputs[idx]
            outputs, cache = model._forward(batch_in, want_cache=True)
            loss = float(np.mean((outputs - targets_n[idx]) ** 2))
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            grads = _sequence_backward(model, batch_in, cache, outputs, targets_n[idx])
            _clip_global_norm(grads, config.clip_norm)
            opt.step(grads)

        if stopper is not None:
            pred_avg = (model._forward(model._inputs(xh)).mean(axis=1)
                        * y_scale + y_offset)
            score = float(np.mean(np.abs((pred_avg - true_h_avg) / y_scale).sum(axis=1)))
            if stopper.update(score):
                break

    def _avg_mae(x_inputs, true_avg):
        pred = model._forward(x_inputs).mean(axis=1) * y_scale + y_offset
        return tuple(np.mean(np.abs(pred - true_avg), axis=0))

    if stopper is not None:
        stopper.restore()
        model.holdout_mae = _avg_mae(model._inputs(xh), true_h_avg)
    model.train_mae = _avg_mae(inputs, targets.mean(axis=1))
    model._avg_cache.clear()
    return model
