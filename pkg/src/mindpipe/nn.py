"""Minimal neural-network substrate: dense layers, LSTM cells, losses, Adam.

Everything operates on plain float64 numpy arrays.  Parameters travel as
``{name: array}`` dicts so the optimizer and the gradient checker stay
agnostic of model structure.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError

ACTIVATIONS = ("sigmoid", "relu", "linear")


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _apply_activation(name, z):
    if name == "sigmoid":
        return sigmoid(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "linear":
        return z
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class DenseLayer:
    """Fully connected layer: activation(W @ x + b).

    weights has shape [out, in], biases [out].
    """

    weights: np.ndarray
    biases: np.ndarray
    activation: str = "linear"

    def __post_init__(self):
        if self.weights.ndim != 2:
            raise ShapeError(f"weights must be 2-D, got {self.weights.ndim}-D")
        if self.biases.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"biases shape {self.biases.shape} does not match out size "
                f"{self.weights.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def in_size(self):
        return self.weights.shape[1]

    @property
    def out_size(self):
        return self.weights.shape[0]


def init_dense(rng, n_in, n_out, activation="linear", weight_scale=None, bias_scale=0.0):
    """Create a DenseLayer with uniform init.

    Default weight range is +-1/sqrt(fan_in); pass ``weight_scale`` to
    override the half-width.  Biases default to zero, or uniform in
    +-bias_scale.
    """
    w = weight_scale if weight_scale is not None else 1.0 / np.sqrt(n_in)
    weights = rng.uniform(-w, w, size=(n_out, n_in))
    if bias_scale > 0.0:
        biases = rng.uniform(-bias_scale, bias_scale, size=n_out)
    else:
        biases = np.zeros(n_out)
    return DenseLayer(weights=weights, biases=biases, activation=activation)


def dense_forward(layer, x):
    """activation(W @ x + b) for a single input vector (or a [batch, in] matrix)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != layer.in_size:
        raise ShapeError(
            f"dense input has size {x.shape[-1]}, layer expects {layer.in_size}"
        )
    z = x @ layer.weights.T + layer.biases
    return _apply_activation(layer.activation, z)


@dataclass
class LstmCell:
    """One LSTM layer's parameters.

    Each gate weight matrix has shape [hidden, input + hidden] and acts on
    the concatenation [x, h_prev].  ``forget_bias_offset`` is added to the
    forget-gate preactivation at every step.
    """

    w_input: np.ndarray
    w_forget: np.ndarray
    w_cell: np.ndarray
    w_output: np.ndarray
    b_input: np.ndarray
    b_forget: np.ndarray
    b_cell: np.ndarray
    b_output: np.ndarray
    forget_bias_offset: float = 0.0

    def __post_init__(self):
        shape = self.w_input.shape
        for name in ("w_forget", "w_cell", "w_output"):
            if getattr(self, name).shape != shape:
                raise ShapeError(f"{name} shape {getattr(self, name).shape} != {shape}")
        for name in ("b_input", "b_forget", "b_cell", "b_output"):
            if getattr(self, name).shape != (shape[0],):
                raise ShapeError(f"{name} must have shape ({shape[0]},)")

    @property
    def hidden_size(self):
        return self.w_input.shape[0]

    @property
    def input_size(self):
        return self.w_input.shape[1] - self.w_input.shape[0]


def init_lstm(rng, input_size, hidden_size, forget_bias_offset=0.0,
              weight_scale=None, gate_scales=None, forget_bias_init=0.0):
    """Create an LstmCell.  Default weights uniform +-1/sqrt(input+hidden).

    ``gate_scales`` optionally maps gate name ('input', 'forget', 'cell',
    'output') to a half-width override.
    """
    base = weight_scale if weight_scale is not None else 1.0 / np.sqrt(input_size + hidden_size)
    scales = dict.fromkeys(("input", "forget", "cell", "output"), base)
    if gate_scales:
        scales.update(gate_scales)
    shape = (hidden_size, input_size + hidden_size)
    weights = {g: rng.uniform(-s, s, size=shape) for g, s in scales.items()}
    return LstmCell(
        w_input=weights["input"],
        w_forget=weights["forget"],
        w_cell=weights["cell"],
        w_output=weights["output"],
        b_input=np.zeros(hidden_size),
        b_forget=np.full(hidden_size, float(forget_bias_init)),
        b_cell=np.zeros(hidden_size),
        b_output=np.zeros(hidden_size),
        forget_bias_offset=forget_bias_offset,
    )


def lstm_step(cell, x, h_prev, c_prev):
    """One LSTM step.  Accepts vectors or [batch, size] matrices.

    i = sigma(Wi [x,h] + bi), f = sigma(Wf [x,h] + bf + offset),
    g = tanh(Wg [x,h] + bg), o = sigma(Wo [x,h] + bo),
    c = f*c_prev + i*g, h = o*tanh(c).
    """
    x = np.asarray(x, dtype=float)
    h_prev = np.asarray(h_prev, dtype=float)
    c_prev = np.asarray(c_prev, dtype=float)
    if x.shape[-1] != cell.input_size:
        raise ShapeError(f"lstm input has size {x.shape[-1]}, cell expects {cell.input_size}")
    if h_prev.shape[-1] != cell.hidden_size or c_prev.shape[-1] != cell.hidden_size:
        raise ShapeError(
            f"lstm state has size {h_prev.shape[-1]}/{c_prev.shape[-1]}, "
            f"cell expects {cell.hidden_size}"
        )
    z = np.concatenate([x, h_prev], axis=-1)
    i = sigmoid(z @ cell.w_input.T + cell.b_input)
    f = sigmoid(z @ cell.w_forget.T + cell.b_forget + cell.forget_bias_offset)
    g = np.tanh(z @ cell.w_cell.T + cell.b_cell)
    o = sigmoid(z @ cell.w_output.T + cell.b_output)
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


def softmax(logits):
    """Row-wise softmax with max subtraction for stability."""
    logits = np.asarray(logits, dtype=float)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, label):
    """Return (loss, probs) for one logit vector and an integer class label."""
    logits = np.asarray(logits, dtype=float)
    if not 0 <= label < logits.shape[-1]:
        raise IndexError(f"label {label} out of range for {logits.shape[-1]} classes")
    probs = softmax(logits)
    loss = -np.log(probs[..., label])
    return float(loss), probs


@dataclass
class AdamState:
    """Bias-corrected Adam moments for a dict of parameter arrays."""

    first_moment: dict
    second_moment: dict
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params, beta1=0.9, beta2=0.999, epsilon=1e-8):
        return cls(
            first_moment={k: np.zeros_like(v) for k, v in params.items()},
            second_moment={k: np.zeros_like(v) for k, v in params.items()},
            step_count=0,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )


def adam_update(params, grads, state, learning_rate):
    """One Adam step over a {name: array} dict.  Returns (new_params, state).

    The input arrays are not mutated; ``state`` is updated in place and
    returned for convenience.
    """
    state.step_count += 1
    t = state.step_count
    b1, b2, eps = state.beta1, state.beta2, state.epsilon
    new_params = {}
    for name, p in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter group {name!r}")
        m = state.first_moment[name] = b1 * state.first_moment[name] + (1 - b1) * g
        v = state.second_moment[name] = b2 * state.second_moment[name] + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_params[name] = p - learning_rate * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, state


def clip_gradients(grads, max_norm):
    """Scale the whole gradient dict so its global L2 norm is <= max_norm."""
    total = np.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
    if total > max_norm and total > 0.0:
        scale = max_norm / total
        return {k: g * scale for k, g in grads.items()}, total
    return grads, total


def grad_check(loss_fn, params, analytic, epsilon=1e-5):
    """Compare analytic gradients against central finite differences.

    ``loss_fn`` must recompute the scalar loss from the live arrays in
    ``params`` (they are perturbed in place and restored).  Returns the max
    over elements of |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    base = loss_fn()
    if not np.isfinite(base):
        raise NumericError("loss is non-finite at the probe point")
    worst = 0.0
    for name, arr in params.items():
        a = analytic[name]
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            saved = arr[idx]
            arr[idx] = saved + epsilon
            up = loss_fn()
            arr[idx] = saved - epsilon
            down = loss_fn()
            arr[idx] = saved
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericError(f"loss non-finite while probing {name!r}")
            numeric = (up - down) / (2 * epsilon)
            denom = max(1e-8, abs(float(a[idx])) + abs(numeric))
            worst = max(worst, abs(float(a[idx]) - numeric) / denom)
            it.iternext()
    return worst
