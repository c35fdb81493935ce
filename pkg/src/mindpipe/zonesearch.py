"""Reinforcement-learning search for the best focal zone.

The state is a contiguous index window over the shuffled vector, the four
actions shift or resize it, and a dueling Q-network trained from an
experience-replay buffer drives epsilon-greedy exploration toward the
window with the highest reward.
"""

import copy
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple, Optional

import numpy as np

from . import nn
from .errors import ValidationError
from .reward import RewardBreakdown, make_reward_fn

DEFAULT_MIN_LENGTH = 10


@dataclass(frozen=True)
class FocalZone:
    """Half-open index window [start, end) over the shuffled vector."""

    start: int
    end: int

    @property
    def length(self):
        return self.end - self.start


class ZoneAction(IntEnum):
    SHIFT_LEFT = 0
    SHIFT_RIGHT = 1
    EXTEND = 2
    CONDENSE = 3


def initial_zone(total_length, initial_length, min_length=DEFAULT_MIN_LENGTH):
    """Centered starting window: [(L-K)//2, (L-K)//2 + K)."""
    if not min_length <= initial_length <= total_length:
        raise ValidationError(
            f"initial length {initial_length} must lie in "
            f"[{min_length}, {total_length}]"
        )
    start = (total_length - initial_length) // 2
    return FocalZone(start=start, end=start + initial_length)


def apply_action(zone, action, step_size, total_length, min_length=DEFAULT_MIN_LENGTH):
    """Transition the window by one action, clamped to stay valid.

    Shifts that would cross a boundary slide to touch it, preserving length.
    An extend or condense that would violate the bounds or the minimum
    length returns the zone unchanged.
    """
    action = ZoneAction(action)
    length = zone.length
    if action == ZoneAction.SHIFT_LEFT:
        start = max(zone.start - step_size, 0)
        return FocalZone(start, start + length)
    if action == ZoneAction.SHIFT_RIGHT:
        end = min(zone.end + step_size, total_length)
        return FocalZone(end - length, end)
    if action == ZoneAction.EXTEND:
        start, end = zone.start - step_size, zone.end + step_size
        if start < 0 or end > total_length:
            return zone
        return FocalZone(start, end)
    start, end = zone.start + step_size, zone.end - step_size
    if end - start < min_length:
        return zone
    return FocalZone(start, end)


@dataclass
class QNetwork:
    """Dueling Q-network: shared 2->32 layer, value and advantage heads."""

    shared: nn.DenseLayer
    value: nn.DenseLayer
    advantage: nn.DenseLayer


def init_qnetwork(rng, state_size=2, hidden_size=32, action_count=4):
    return QNetwork(
        shared=nn.init_dense(rng, state_size, hidden_size, activation="relu"),
        value=nn.init_dense(rng, hidden_size, 1, activation="linear"),
        advantage=nn.init_dense(rng, hidden_size, action_count, activation="linear"),
    )


def _q_batch(net, states):
    """Q-values for a [batch, 2] matrix of normalized states."""
    hidden = nn.dense_forward(net.shared, states)
    value = nn.dense_forward(net.value, hidden)
    advantage = nn.dense_forward(net.advantage, hidden)
    return value + advantage - advantage.mean(axis=-1, keepdims=True)


def zone_state(zone, total_length):
    """Normalized network input (start/L, end/L)."""
    return np.array([zone.start / total_length, zone.end / total_length])


def q_values(net, zone, total_length):
    """Q-vector over the four actions for one zone."""
    return _q_batch(net, zone_state(zone, total_length)[None, :])[0]


def select_action(q, epsilon, rng):
    """Epsilon-greedy over a Q-vector; greedy ties break to the lowest index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValidationError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return ZoneAction(int(rng.integers(len(q))))
    return ZoneAction(int(np.argmax(q)))


class Transition(NamedTuple):
    state: FocalZone
    action: int
    reward: float
    next_state: FocalZone


class ReplayMemory:
    """FIFO ring buffer of transitions with uniform sampling."""

    def __init__(self, capacity=2000):
        self.capacity = capacity
        self._items = []
        self._cursor = 0

    def push(self, transition):
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._cursor] = transition
            self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, rng, count):
        idx = rng.integers(len(self._items), size=count)
        return [self._items[i] for i in idx]

    def __len__(self):
        return len(self._items)


@dataclass
class ZoneSearchConfig:
    """Hyperparameters of the focal-zone search."""

    gamma: float = 0.8
    epsilon: float = 0.2
    learning_rate: float = 0.01
    episodes: int = 50
    steps_per_episode: int = 50
    penalty_coeff: float = 0.1
    min_length: int = DEFAULT_MIN_LENGTH
    step_size: int = 4
    batch_size: int = 32
    target_sync_interval: int = 100
    memory_capacity: int = 2000
    initial_length: int = 128
    eval_per_class: int = 40
    ar_order: int = 3
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValidationError("epsilon must lie in [0, 1]")
        if not 0.0 < self.gamma < 1.0:
            raise ValidationError("gamma must lie in (0, 1)")

    @property
    def total_steps(self):
        return self.episodes * self.steps_per_episode


def _net_params(net):
    return {
        "shared.weights": net.shared.weights,
        "shared.biases": net.shared.biases,
        "value.weights": net.value.weights,
        "value.biases": net.value.biases,
        "advantage.weights": net.advantage.weights,
        "advantage.biases": net.advantage.biases,
    }


def _assign_params(net, params):
    net.shared.weights = params["shared.weights"]
    net.shared.biases = params["shared.biases"]
    net.value.weights = params["value.weights"]
    net.value.biases = params["value.biases"]
    net.advantage.weights = params["advantage.weights"]
    net.advantage.biases = params["advantage.biases"]


def td_loss_and_grads(net, states, actions, targets):
    """Mean squared TD error on the taken actions, with analytic gradients."""
    batch = states.shape[0]
    z1 = states @ net.shared.weights.T + net.shared.biases
    a1 = np.maximum(z1, 0.0)
    value = a1 @ net.value.weights.T + net.value.biases
    advantage = a1 @ net.advantage.weights.T + net.advantage.biases
    q = value + advantage - advantage.mean(axis=1, keepdims=True)
    taken = q[np.arange(batch), actions]
    residual = taken - targets
    loss = float((residual ** 2).mean())

    dq = np.zeros_like(q)
    dq[np.arange(batch), actions] = 2.0 * residual / batch
    dvalue = dq.sum(axis=1, keepdims=True)
    dadv = dq - dq.sum(axis=1, keepdims=True) / q.shape[1]
    da1 = dvalue @ net.value.weights + dadv @ net.advantage.weights
    dz1 = da1 * (z1 > 0)
    grads = {
        "shared.weights": dz1.T @ states,
        "shared.biases": dz1.sum(axis=0),
        "value.weights": dvalue.T @ a1,
        "value.biases": dvalue.sum(axis=0),
        "advantage.weights": dadv.T @ a1,
        "advantage.biases": dadv.sum(axis=0),
    }
    return loss, grads


class QTrainer:
    """Owns the online/target networks and their Adam state."""

    def __init__(self, net, config):
        self.net = net
        self.target_net = copy.deepcopy(net)
        self.config = config
        self.adam = nn.AdamState.for_params(_net_params(net))
        self.update_count = 0

    def replay_train_step(self, memory, rng, total_length):
        """One TD update from a uniform replay batch.

        Returns the TD loss, or None (skip, no update) when the memory
        holds fewer transitions than a batch.
        """
        cfg = self.config
        if len(memory) < cfg.batch_size:
            return None
        batch = memory.sample(rng, cfg.batch_size)
        states = np.stack([zone_state(t.state, total_length) for t in batch])
        next_states = np.stack([zone_state(t.next_state, total_length) for t in batch])
        actions = np.array([int(t.action) for t in batch])
        rewards = np.array([t.reward for t in batch])
        next_q = _q_batch(self.target_net, next_states)
        targets = rewards + cfg.gamma * next_q.max(axis=1)
        loss, grads = td_loss_and_grads(self.net, states, actions, targets)
        params, self.adam = nn.adam_update(
            _net_params(self.net), grads, self.adam, cfg.learning_rate
        )
        _assign_params(self.net, params)
        self.update_count += 1
        if self.update_count % cfg.target_sync_interval == 0:
            self.target_net = copy.deepcopy(self.net)
        return loss


class StepRecord(NamedTuple):
    episode: int
    step: int
    zone: FocalZone
    breakdown: RewardBreakdown


def _as_breakdown(value):
    if isinstance(value, RewardBreakdown):
        return value
    return RewardBreakdown(
        silhouette=float("nan"), length_penalty=float("nan"), reward=float(value)
    )


def optimize_focal_zone(train_set, shuffle_map, config, reward_fn=None):
    """Run the search; return (best_zone, best_reward, history).

    ``reward_fn`` maps a FocalZone to a RewardBreakdown (or a bare float);
    when omitted it is built from a fixed stratified subset of the training
    set.  The best zone is the argmax over every state visited, earliest
    visit winning ties.  Deterministic given config.seed.
    """
    if reward_fn is None:
        reward_fn = make_reward_fn(
            train_set,
            shuffle_map,
            config.penalty_coeff,
            per_class=config.eval_per_class,
            seed=config.seed,
            order=config.ar_order,
        )
    total_length = shuffle_map.target_dim
    rng = np.random.default_rng(config.seed)
    net = init_qnetwork(rng)
    trainer = QTrainer(net, config)
    memory = ReplayMemory(config.memory_capacity)
    cache = {}

    def cached_reward(zone):
        if zone not in cache:
            cache[zone] = _as_breakdown(reward_fn(zone))
        return cache[zone]

    history = []
    best_zone = None
    best_reward = -np.inf
    for episode in range(config.episodes):
        zone = initial_zone(total_length, config.initial_length, config.min_length)
        for step in range(config.steps_per_episode):
            q = q_values(trainer.net, zone, total_length)
            action = select_action(q, config.epsilon, rng)
            next_zone = apply_action(
                zone, action, config.step_size, total_length, config.min_length
            )
            breakdown = cached_reward(next_zone)
            memory.push(Transition(zone, int(action), breakdown.reward, next_zone))
            trainer.replay_train_step(memory, rng, total_length)
            history.append(StepRecord(episode, step, next_zone, breakdown))
            if breakdown.reward > best_reward:
                best_reward = breakdown.reward
                best_zone = next_zone
            zone = next_zone
    return best_zone, best_reward, history
