"""Versioned model persistence: one human-diffable JSON document.

Floats are written with Python's shortest round-trip representation, so a
save/load cycle reproduces predictions bit for bit.  Loading validates
every structural invariant and fails closed on corrupt input.
"""

import hashlib
import json

import numpy as np

from . import nn
from .classifier import ClassifierModel
from .errors import ModelFormatError
from .intent import INVALID_LABEL, ROBOT_COMMANDS, TYPING_COMMANDS
from .rs import ShuffleMap
from .zonesearch import FocalZone

FORMAT_VERSION = 1


def dataset_fingerprint(dataset):
    """Stable hash of a dataset's features and labels."""
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(dataset.features).tobytes())
    digest.update(np.ascontiguousarray(dataset.labels).tobytes())
    return "sha256:" + digest.hexdigest()


def _require(document, key, kind, context="model file"):
    if key not in document:
        raise ModelFormatError(f"{context}: missing field {key!r}")
    value = document[key]
    if kind is not None and not isinstance(value, kind):
        raise ModelFormatError(f"{context}: field {key!r} has wrong type")
    return value


def save_model(model, path, hyperparameters=None, metadata=None):
    """Write the model (with its shuffle map and zone) to ``path``."""
    arrays = {}
    for i, layer in enumerate(model.dense_stack):
        arrays[f"dense{i}.weights"] = layer.weights
        arrays[f"dense{i}.biases"] = layer.biases
    for i, cell in enumerate(model.lstm_stack):
        for gate in ("input", "forget", "cell", "output"):
            arrays[f"lstm{i}.w_{gate}"] = getattr(cell, f"w_{gate}")
            arrays[f"lstm{i}.b_{gate}"] = getattr(cell, f"b_{gate}")
    arrays["output.weights"] = model.output.weights
    arrays["output.biases"] = model.output.biases
    document = {
        "format_version": FORMAT_VERSION,
        "shuffle_map": {
            "source_dim": model.shuffle_map.source_dim,
            "target_dim": model.shuffle_map.target_dim,
            "copies": model.shuffle_map.copies,
            "permutation": model.shuffle_map.permutation.tolist(),
        },
        "focal_zone": {"start": model.zone.start, "end": model.zone.end},
        "architecture": {
            "dense_sizes": list(model.dense_sizes),
            "hidden_size": model.hidden_size,
            "class_count": model.class_count,
            "w1": model.w1,
            "w2": model.w2,
            "l2_lambda": model.l2_lambda,
            "forget_bias_offset": model.lstm_stack[0].forget_bias_offset,
        },
        "parameters": {name: arr.tolist() for name, arr in sorted(arrays.items())},
        "command_maps": {
            "typing": {str(k): v for k, v in TYPING_COMMANDS.items()},
            "robot": {str(k): v for k, v in ROBOT_COMMANDS.items()},
            "invalid_label": INVALID_LABEL,
        },
        "hyperparameters": hyperparameters or {},
        "metadata": metadata or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(document, fh, indent=1)
        fh.write("\n")


def _load_array(parameters, name, shape):
    if name not in parameters:
        raise ModelFormatError(f"parameters: missing array {name!r}")
    try:
        arr = np.array(parameters[name], dtype=float)
    except (TypeError, ValueError):
        raise ModelFormatError(f"parameters: array {name!r} is not numeric") from None
    if arr.shape != shape:
        raise ModelFormatError(
            f"parameters: array {name!r} has shape {arr.shape}, expected {shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ModelFormatError(f"parameters: array {name!r} contains non-finite values")
    return arr


def load_model(path):
    """Read and validate a model file; returns (model, document)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            document = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not a valid model document: {exc}") from None
    if not isinstance(document, dict):
        raise ModelFormatError("not a valid model document: top level must be an object")
    version = _require(document, "format_version", int)
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported format_version {version}, expected {FORMAT_VERSION}"
        )

    raw_map = _require(document, "shuffle_map", dict)
    try:
        shuffle_map = ShuffleMap(
            source_dim=_require(raw_map, "source_dim", int, "shuffle_map"),
            target_dim=_require(raw_map, "target_dim", int, "shuffle_map"),
            copies=_require(raw_map, "copies", int, "shuffle_map"),
            permutation=np.array(_require(raw_map, "permutation", list, "shuffle_map"),
                                 dtype=np.int64),
        )
    except ValueError as exc:
        raise ModelFormatError(f"shuffle_map: {exc}") from None

    raw_zone = _require(document, "focal_zone", dict)
    zone = FocalZone(
        start=_require(raw_zone, "start", int, "focal_zone"),
        end=_require(raw_zone, "end", int, "focal_zone"),
    )
    if not (0 <= zone.start < zone.end <= shuffle_map.target_dim):
        raise ModelFormatError(
            f"focal_zone: [{zone.start}, {zone.end}) out of bounds for "
            f"target_dim {shuffle_map.target_dim}"
        )

    arch = _require(document, "architecture", dict)
    dense_sizes = _require(arch, "dense_sizes", list, "architecture")
    hidden = _require(arch, "hidden_size", int, "architecture")
    class_count = _require(arch, "class_count", int, "architecture")
    offset = float(_require(arch, "forget_bias_offset", (int, float), "architecture"))
    parameters = _require(document, "parameters", dict)

    dense_stack = []
    prev = 1
    for i, size in enumerate(dense_sizes):
        dense_stack.append(nn.DenseLayer(
            weights=_load_array(parameters, f"dense{i}.weights", (size, prev)),
            biases=_load_array(parameters, f"dense{i}.biases", (size,)),
            activation="sigmoid",
        ))
        prev = size
    lstm_stack = []
    for i in range(2):
        in_size = prev if i == 0 else hidden
        shape = (hidden, in_size + hidden)
        lstm_stack.append(nn.LstmCell(
            w_input=_load_array(parameters, f"lstm{i}.w_input", shape),
            w_forget=_load_array(parameters, f"lstm{i}.w_forget", shape),
            w_cell=_load_array(parameters, f"lstm{i}.w_cell", shape),
            w_output=_load_array(parameters, f"lstm{i}.w_output", shape),
            b_input=_load_array(parameters, f"lstm{i}.b_input", (hidden,)),
            b_forget=_load_array(parameters, f"lstm{i}.b_forget", (hidden,)),
            b_cell=_load_array(parameters, f"lstm{i}.b_cell", (hidden,)),
            b_output=_load_array(parameters, f"lstm{i}.b_output", (hidden,)),
            forget_bias_offset=offset,
        ))
    output = nn.DenseLayer(
        weights=_load_array(parameters, "output.weights", (class_count, hidden)),
        biases=_load_array(parameters, "output.biases", (class_count,)),
        activation="linear",
    )
    model = ClassifierModel(
        dense_stack=dense_stack,
        lstm_stack=lstm_stack,
        output=output,
        w1=float(_require(arch, "w1", (int, float), "architecture")),
        w2=float(_require(arch, "w2", (int, float), "architecture")),
        shuffle_map=shuffle_map,
        zone=zone,
        l2_lambda=float(_require(arch, "l2_lambda", (int, float), "architecture")),
        class_count=class_count,
    )
    return model, document
