"""Dimension-sequence LSTM classifier with weighted-average output.

Each raw sample is shuffled to the target dimension, sliced to the focal
zone, and the zone's scalars are fed one per step through a shared dense
embedding stack into a two-layer LSTM.  The readout averages the top
layer's last two hidden states (weights w1, w2) before a linear output
layer and softmax.
"""

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .data import DEFAULT_CLASSES
from .errors import NumericError, ShapeError, ValidationError
from .rs import apply_shuffle_batch
from .zonesearch import FocalZone

DEFAULT_DENSE_SIZES = (164, 164, 164)
DEFAULT_HIDDEN_SIZE = 164


@dataclass
class TrainConfig:
    """Classifier training hyperparameters."""

    learning_rate: float = 0.001
    l2_lambda: float = 0.001
    batch_size: int = 9
    iterations: int = 1000
    seed: int = 0
    grad_clip: float = 5.0
    dense_sizes: tuple = DEFAULT_DENSE_SIZES
    hidden_size: int = DEFAULT_HIDDEN_SIZE
    forget_bias_offset: float = 0.3
    w1: float = 0.5
    w2: float = 0.5

    def __post_init__(self):
        if self.learning_rate <= 0 or self.l2_lambda < 0:
            raise ValidationError("learning_rate must be > 0 and l2_lambda >= 0")
        if self.batch_size < 1 or self.iterations < 0:
            raise ValidationError("batch_size must be >= 1 and iterations >= 0")


@dataclass
class ClassifierModel:
    """Trained parameters plus the shuffle map and focal zone they assume."""

    dense_stack: list
    lstm_stack: list
    output: nn.DenseLayer
    w1: float
    w2: float
    shuffle_map: object
    zone: FocalZone
    l2_lambda: float = 0.001
    class_count: int = DEFAULT_CLASSES

    @property
    def hidden_size(self):
        return self.lstm_stack[0].hidden_size

    @property
    def dense_sizes(self):
        return tuple(layer.out_size for layer in self.dense_stack)


def init_classifier(shuffle_map, zone, config=None, class_count=DEFAULT_CLASSES):
    """Build a fresh model.

    Initialization is tuned so the untrained network already propagates
    input variation to the logits: sharp spread thresholds on the scalar
    embedding layer, variance-preserving gains on the sigmoid stack, and a
    forget-gate bias that makes the cell state integrate the whole zone.
    """
    config = config or TrainConfig()
    if zone.length < 2:
        raise ValidationError("focal zone must span at least 2 steps")
    rng = np.random.default_rng(config.seed)
    dense_stack = []
    prev = 1
    for depth, size in enumerate(config.dense_sizes):
        if depth == 0:
            layer = nn.init_dense(rng, prev, size, activation="sigmoid",
                                  weight_scale=2.0, bias_scale=4.0)
        else:
            scale = 6.0 * np.sqrt(6.0 / (prev + size))
            layer = nn.init_dense(rng, prev, size, activation="sigmoid",
                                  weight_scale=scale)
        dense_stack.append(layer)
        prev = size
    lstm_stack = []
    hidden = config.hidden_size
    for depth in range(2):
        in_size = prev if depth == 0 else hidden
        xavier = np.sqrt(6.0 / (in_size + 2 * hidden))
        cell = nn.init_lstm(
            rng,
            in_size,
            hidden,
            forget_bias_offset=config.forget_bias_offset,
            gate_scales={
                "input": 4.0 * xavier,
                "forget": 4.0 * xavier,
                "cell": 1.0 * xavier,
                "output": 4.0 * xavier,
            },
            forget_bias_init=2.0,
        )
        lstm_stack.append(cell)
    output = nn.init_dense(
        rng, hidden, class_count, activation="linear",
        weight_scale=8.0 * np.sqrt(6.0 / (hidden + class_count)),
    )
    return ClassifierModel(
        dense_stack=dense_stack,
        lstm_stack=lstm_stack,
        output=output,
        w1=config.w1,
        w2=config.w2,
        shuffle_map=shuffle_map,
        zone=zone,
        l2_lambda=config.l2_lambda,
        class_count=class_count,
    )


def parameter_dict(model):
    """Live {name: array} references to every trainable array."""
    params = {}
    for i, layer in enumerate(model.dense_stack):
        params[f"dense{i}.weights"] = layer.weights
        params[f"dense{i}.biases"] = layer.biases
    for i, cell in enumerate(model.lstm_stack):
        for gate in ("input", "forget", "cell", "output"):
            params[f"lstm{i}.w_{gate}"] = getattr(cell, f"w_{gate}")
            params[f"lstm{i}.b_{gate}"] = getattr(cell, f"b_{gate}")
    params["output.weights"] = model.output.weights
    params["output.biases"] = model.output.biases
    return params


def assign_parameters(model, params):
    for i, layer in enumerate(model.dense_stack):
        layer.weights = params[f"dense{i}.weights"]
        layer.biases = params[f"dense{i}.biases"]
    for i, cell in enumerate(model.lstm_stack):
        for gate in ("input", "forget", "cell", "output"):
            setattr(cell, f"w_{gate}", params[f"lstm{i}.w_{gate}"])
            setattr(cell, f"b_{gate}", params[f"lstm{i}.b_{gate}"])
    model.output.weights = params["output.weights"]
    model.output.biases = params["output.biases"]


_WEIGHT_KEYS = ("weights", "w_input", "w_forget", "w_cell", "w_output")


def _is_weight(name):
    return name.split(".", 1)[1] in _WEIGHT_KEYS


def _gate_views(cell):
    in_size = cell.input_size
    wx = {g: getattr(cell, f"w_{g}")[:, :in_size] for g in ("input", "forget", "cell", "output")}
    wh = {g: getattr(cell, f"w_{g}")[:, in_size:] for g in ("input", "forget", "cell", "output")}
    b = {g: getattr(cell, f"b_{g}") for g in ("input", "forget", "cell", "output")}
    return wx, wh, b


def _forward_zone(model, zone_rows, want_cache=False):
    """Forward a [batch, zone_length] matrix of focal-zone scalars.

    Returns (logits, step_outputs, cache); step_outputs is the top LSTM
    layer's hidden state per step, [steps, batch, hidden].
    """
    batch, steps = zone_rows.shape
    if steps < 2:
        raise ValidationError("focal zone must span at least 2 steps for the readout")
    act = zone_rows.reshape(batch * steps, 1)
    dense_acts = [act]
    for layer in model.dense_stack:
        act = nn.sigmoid(act @ layer.weights.T + layer.biases)
        dense_acts.append(act)
    hidden = model.hidden_size
    inputs = act.reshape(batch, steps, -1)
    layer_caches = []
    for cell in model.lstm_stack:
        wx, wh, b = _gate_views(cell)
        flat = inputs.reshape(batch * steps, -1)
        pre = {g: (flat @ wx[g].T).reshape(batch, steps, hidden) for g in wx}
        h = np.zeros((batch, hidden))
        c = np.zeros((batch, hidden))
        hs = np.empty((steps, batch, hidden))
        if want_cache:
            cs = np.empty((steps, batch, hidden))
            gates = {g: np.empty((steps, batch, hidden))
                     for g in ("input", "forget", "cell", "output")}
        else:
            cs = gates = None
        for t in range(steps):
            gi = nn.sigmoid(pre["input"][:, t] + h @ wh["input"].T + b["input"])
            gf = nn.sigmoid(pre["forget"][:, t] + h @ wh["forget"].T + b["forget"]
                            + cell.forget_bias_offset)
            gc = np.tanh(pre["cell"][:, t] + h @ wh["cell"].T + b["cell"])
            go = nn.sigmoid(pre["output"][:, t] + h @ wh["output"].T + b["output"])
            c = gf * c + gi * gc
            h = go * np.tanh(c)
            hs[t] = h
            if want_cache:
                cs[t] = c
                gates["input"][t] = gi
                gates["forget"][t] = gf
                gates["cell"][t] = gc
                gates["output"][t] = go
        layer_caches.append((inputs, hs, cs, gates))
        inputs = np.transpose(hs, (1, 0, 2))
    top_hs = layer_caches[-1][1]
    averaged = model.w1 * top_hs[steps - 2] + model.w2 * top_hs[steps - 1]
    logits = averaged @ model.output.weights.T + model.output.biases
    cache = (dense_acts, layer_caches, averaged) if want_cache else None
    return logits, top_hs, cache


def _l2_penalty(model):
    total = 0.0
    for name, arr in parameter_dict(model).items():
        if _is_weight(name):
            total += float((arr ** 2).sum()) / arr.size
    return model.l2_lambda * total


def loss_and_gradients(model, zone_rows, labels):
    """Mean cross-entropy plus L2, with analytic gradients for every array.

    The L2 term is the per-array mean square of each weight matrix (biases
    excluded), scaled by l2_lambda.
    """
    batch, steps = zone_rows.shape
    labels = np.asarray(labels, dtype=int)
    logits, _, cache = _forward_zone(model, zone_rows, want_cache=True)
    dense_acts, layer_caches, averaged = cache
    probs = nn.softmax(logits)
    ce = -np.log(probs[np.arange(batch), labels] + 1e-300).mean()
    loss = float(ce) + _l2_penalty(model)

    grads = {}
    dlogits = probs.copy()
    dlogits[np.arange(batch), labels] -= 1.0
    dlogits /= batch
    grads["output.weights"] = dlogits.T @ averaged
    grads["output.biases"] = dlogits.sum(axis=0)
    d_avg = dlogits @ model.output.weights

    hidden = model.hidden_size
    d_above = None
    for depth in range(len(model.lstm_stack) - 1, -1, -1):
        cell = model.lstm_stack[depth]
        inputs, hs, cs, gates = layer_caches[depth]
        wx, wh, _ = _gate_views(cell)
        in_size = inputs.shape[2]
        dh_steps = np.zeros((steps, batch, hidden))
        if depth == len(model.lstm_stack) - 1:
            dh_steps[steps - 2] += model.w1 * d_avg
            dh_steps[steps - 1] += model.w2 * d_avg
        else:
            dh_steps += d_above
        dwx = {g: np.zeros((hidden, in_size)) for g in wx}
        dwh = {g: np.zeros((hidden, hidden)) for g in wh}
        db = {g: np.zeros(hidden) for g in wx}
        d_inputs = np.zeros_like(inputs)
        dh = np.zeros((batch, hidden))
        dc = np.zeros((batch, hidden))
        for t in range(steps - 1, -1, -1):
            dh = dh + dh_steps[t]
            tanh_c = np.tanh(cs[t])
            gi = gates["input"][t]
            gf = gates["forget"][t]
            gc = gates["cell"][t]
            go = gates["output"][t]
            d_go = dh * tanh_c
            dc = dc + dh * go * (1.0 - tanh_c ** 2)
            c_prev = cs[t - 1] if t > 0 else np.zeros((batch, hidden))
            h_prev = hs[t - 1] if t > 0 else np.zeros((batch, hidden))
            d_gf = dc * c_prev
            d_gi = dc * gc
            d_gc = dc * gi
            dz = {
                "input": d_gi * gi * (1.0 - gi),
                "forget": d_gf * gf * (1.0 - gf),
                "cell": d_gc * (1.0 - gc ** 2),
                "output": d_go * go * (1.0 - go),
            }
            x_t = inputs[:, t]
            for g, dzg in dz.items():
                dwx[g] += dzg.T @ x_t
                dwh[g] += dzg.T @ h_prev
                db[g] += dzg.sum(axis=0)
            d_inputs[:, t] = sum(dz[g] @ wx[g] for g in dz)
            dh = sum(dz[g] @ wh[g] for g in dz)
            dc = dc * gf
        for g in dwx:
            grads[f"lstm{depth}.w_{g}"] = np.concatenate([dwx[g], dwh[g]], axis=1)
            grads[f"lstm{depth}.b_{g}"] = db[g]
        d_above = np.transpose(d_inputs, (1, 0, 2))
        d_to_dense = d_inputs

    d_act = d_to_dense.reshape(batch * steps, -1)
    for depth in range(len(model.dense_stack) - 1, -1, -1):
        layer = model.dense_stack[depth]
        a_out = dense_acts[depth + 1]
        a_in = dense_acts[depth]
        dz = d_act * a_out * (1.0 - a_out)
        grads[f"dense{depth}.weights"] = dz.T @ a_in
        grads[f"dense{depth}.biases"] = dz.sum(axis=0)
        d_act = dz @ layer.weights

    params = parameter_dict(model)
    for name, arr in params.items():
        if _is_weight(name):
            grads[name] = grads[name] + (2.0 * model.l2_lambda / arr.size) * arr
    return loss, grads


def zone_slices(model, features):
    """Shuffle raw [n, source_dim] features and slice the focal zone."""
    shuffled = apply_shuffle_batch(model.shuffle_map, features)
    return shuffled[:, model.zone.start:model.zone.end]


def forward(model, x):
    """Classify one raw sample; returns (probs, step_outputs)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.shuffle_map.source_dim,):
        raise ShapeError(
            f"sample has shape {x.shape}, expected ({model.shuffle_map.source_dim},)"
        )
    rows = zone_slices(model, x[None, :])
    logits, top_hs, _ = _forward_zone(model, rows)
    return nn.softmax(logits)[0], top_hs[:, 0, :]


def predict(model, x):
    """Return (label, probs); ties break to the lowest class index."""
    probs, _ = forward(model, x)
    return int(np.argmax(probs)), probs


def predict_batch(model, features):
    """Vectorized prediction over [n, source_dim] features."""
    features = np.asarray(features, dtype=float)
    rows = zone_slices(model, features)
    logits, _, _ = _forward_zone(model, rows)
    probs = nn.softmax(logits)
    return np.argmax(probs, axis=1), probs


def train_classifier(train_set, shuffle_map, zone, config=None):
    """Train a fresh model with minibatch Adam; deterministic given the seed.

    Raises NumericError naming the iteration if the loss ever goes
    non-finite.
    """
    config = config or TrainConfig()
    if len(train_set) == 0:
        raise ValidationError("training set is empty")
    model = init_classifier(shuffle_map, zone, config, class_count=train_set.class_count)
    rows = apply_shuffle_batch(shuffle_map, train_set.features)[:, zone.start:zone.end]
    labels = train_set.labels
    rng = np.random.default_rng(config.seed)
    params = parameter_dict(model)
    adam = nn.AdamState.for_params(params)
    for iteration in range(1, config.iterations + 1):
        batch_idx = rng.choice(len(train_set), size=min(config.batch_size, len(train_set)),
                               replace=False)
        loss, grads = loss_and_gradients(model, rows[batch_idx], labels[batch_idx])
        if not np.isfinite(loss):
            raise NumericError(f"loss became non-finite at iteration {iteration}")
        grads, _ = nn.clip_gradients(grads, config.grad_clip)
        params, adam = nn.adam_update(params, grads, adam, config.learning_rate)
        assign_parameters(model, params)
    return model
