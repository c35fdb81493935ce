"""Streaming decision protocol: per-window mode vote, run-of-three consensus,
invalid-class suppression, and label-to-command mapping."""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .classifier import predict_batch
from .errors import ShapeError, ValidationError

INVALID_LABEL = 4
DEFAULT_WINDOW_SIZE = 64
DEFAULT_REQUIRED_RUN = 3

TYPING_COMMANDS = {0: "Up", 1: "Cancel", 2: "Left", 3: "Right", 4: "Nothing", 5: "Confirm"}
ROBOT_COMMANDS = {0: "Forward", 1: "Turn Left", 2: "Grasp", 3: "Loose", 4: "Nothing",
                  5: "Stop/Start"}


@dataclass(frozen=True)
class CommandMap:
    """Label-to-command table for one interaction mode."""

    mode: str
    table: dict
    invalid_label: int = INVALID_LABEL


def command_map(mode):
    if mode == "typing":
        return CommandMap(mode="typing", table=dict(TYPING_COMMANDS))
    if mode == "robot":
        return CommandMap(mode="robot", table=dict(ROBOT_COMMANDS))
    raise ValidationError(f"unknown command mode {mode!r}")


def map_command(label, cmd_map):
    """Exact table lookup; out-of-range labels are rejected."""
    if label not in cmd_map.table:
        raise ValidationError(f"label {label} not in {cmd_map.mode} command table")
    return cmd_map.table[label]


@dataclass(frozen=True)
class ConsensusState:
    """Run of identical recent window decisions awaiting consensus."""

    pending: tuple = ()
    required_run: int = DEFAULT_REQUIRED_RUN


def consensus_update(state, decision, cmd_map):
    """Advance the consensus machine by one window decision.

    Returns (new_state, emitted) where emitted is None or a
    (label, command) pair.  The invalid label resets the pending run and
    never emits; a mismatching decision restarts the run at that decision.
    """
    decision = int(decision)
    if decision not in cmd_map.table:
        raise ValidationError(f"label {decision} not in {cmd_map.mode} command table")
    if decision == cmd_map.invalid_label:
        return replace(state, pending=()), None
    if state.pending and state.pending[0] != decision:
        return replace(state, pending=(decision,)), None
    pending = state.pending + (decision,)
    if len(pending) >= state.required_run:
        return replace(state, pending=()), (decision, cmd_map.table[decision])
    return replace(state, pending=pending), None


def window_mode(labels, class_count):
    """Most frequent label; ties break to the lowest label."""
    counts = np.bincount(np.asarray(labels, dtype=int), minlength=class_count)
    return int(np.argmax(counts))


def window_decide(model, window):
    """Classify every sample in a window and return the modal label."""
    window = np.asarray(window, dtype=float)
    if window.ndim != 2 or window.shape[1] != model.shuffle_map.source_dim:
        raise ShapeError(
            f"window has shape {window.shape}, expected "
            f"(n, {model.shuffle_map.source_dim})"
        )
    labels, _ = predict_batch(model, window)
    return window_mode(labels, model.class_count)


def decide_and_update(model, window, state, cmd_map):
    """One full pipeline step; returns (decision, new_state, emitted, seconds)."""
    started = time.perf_counter()
    decision = window_decide(model, window)
    state, emitted = consensus_update(state, decision, cmd_map)
    return decision, state, emitted, time.perf_counter() - started
