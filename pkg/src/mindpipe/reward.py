"""Focal-zone reward: per-sample autoregressive fits scored by silhouette.

The reward for a zone is exp(ss + 1) / (e^2 - 1) - beta * L / L_total,
where ss is the silhouette score of the per-sample AR coefficient vectors
grouped by true label, L the zone length, and L_total the shuffled
dimension count.
"""

from dataclasses import dataclass

import numpy as np

from .data import stratified_sample_indices
from .errors import ValidationError
from .rs import apply_shuffle_batch

DEFAULT_AR_ORDER = 3
_RIDGE = 1e-8


def fit_autoregressive(series, order=DEFAULT_AR_ORDER):
    """Least-squares lag-regression coefficients of one series.

    Solves series[t] ~ sum_j coeff[j] * series[t-1-j] over t in
    [order, len) via normal equations with a small ridge term, so constant
    or degenerate series still yield finite coefficients.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 1:
        raise ValidationError("series must be 1-D")
    if series.size < 2 * order + 1:
        raise ValidationError(
            f"series of length {series.size} too short for order {order} "
            f"(need >= {2 * order + 1})"
        )
    design, targets = _lag_matrix(series, order)
    gram = design.T @ design + _RIDGE * np.eye(order)
    return np.linalg.solve(gram, design.T @ targets)


def _lag_matrix(series, order):
    # row t has [series[t-1], series[t-2], ..., series[t-order]]
    windows = np.lib.stride_tricks.sliding_window_view(series, order)
    design = windows[:-1, ::-1]
    targets = series[order:]
    return design, targets


def fit_autoregressive_batch(rows, order=DEFAULT_AR_ORDER):
    """AR coefficients for each row of a [n, length] matrix."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise ValidationError("rows must be 2-D")
    if rows.shape[1] < 2 * order + 1:
        raise ValidationError(
            f"rows of length {rows.shape[1]} too short for order {order}"
        )
    windows = np.lib.stride_tricks.sliding_window_view(rows, order, axis=1)
    design = windows[:, :-1, ::-1]
    targets = rows[:, order:]
    gram = np.einsum("nro,nrp->nop", design, design) + _RIDGE * np.eye(order)
    moment = np.einsum("nro,nr->no", design, targets)
    return np.linalg.solve(gram, moment[..., None])[..., 0]


def silhouette_score(points, labels):
    """Mean silhouette over points with Euclidean distance.

    a(i) is the mean distance to the other members of i's cluster (a point
    alone in its cluster scores 0), b(i) the smallest mean distance to any
    other cluster, s(i) = (b - a) / max(a, b) with 0/0 treated as 0.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    labels = np.asarray(labels)
    n = points.shape[0]
    if labels.shape != (n,):
        raise ValidationError("labels length must match number of points")
    if n < 2:
        raise ValidationError("need at least 2 points")
    unique = np.unique(labels)
    if unique.size < 2:
        raise ValidationError("need at least 2 distinct clusters")
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    scores = np.zeros(n)
    masks = {lab: labels == lab for lab in unique}
    for i in range(n):
        own = masks[labels[i]]
        own_size = own.sum()
        b = min(dist[i, masks[lab]].mean() for lab in unique if lab != labels[i])
        if own_size == 1:
            continue  # singleton cluster scores 0
        a = dist[i, own].sum() / (own_size - 1)
        top = max(a, b)
        scores[i] = (b - a) / top if top > 0 else 0.0
    return float(scores.mean())


@dataclass
class RewardBreakdown:
    """Silhouette, length penalty, and the resulting reward for one zone."""

    silhouette: float
    length_penalty: float
    reward: float


def reward_from_silhouette(silhouette, zone_length, total_length, penalty_coeff):
    """Map a silhouette score and zone length to a RewardBreakdown."""
    penalty = penalty_coeff * zone_length / total_length
    reward = np.exp(silhouette + 1.0) / (np.exp(2.0) - 1.0) - penalty
    return RewardBreakdown(
        silhouette=float(silhouette),
        length_penalty=float(penalty),
        reward=float(reward),
    )


def evaluate_reward(zone, shuffled, labels, penalty_coeff, total_length,
                    order=DEFAULT_AR_ORDER):
    """Reward of one focal zone over an evaluation set.

    ``shuffled`` is an [n, total_length] matrix of already-transformed
    samples; each row is sliced to [zone.start, zone.end), fitted with an
    AR model, and the coefficient vectors are scored by silhouette against
    the true labels.
    """
    shuffled = np.asarray(shuffled, dtype=float)
    labels = np.asarray(labels)
    length = zone.end - zone.start
    if length < 2 * order + 1:
        raise ValidationError(
            f"focal zone of length {length} too short for AR order {order}"
        )
    if np.unique(labels).size < 2:
        raise ValidationError("reward evaluation needs samples from >= 2 classes")
    coeffs = fit_autoregressive_batch(shuffled[:, zone.start:zone.end], order)
    ss = silhouette_score(coeffs, labels)
    return reward_from_silhouette(ss, length, total_length, penalty_coeff)


def make_reward_fn(train_set, shuffle_map, penalty_coeff, per_class=40, seed=0,
                   order=DEFAULT_AR_ORDER):
    """Bind evaluate_reward to a fixed stratified evaluation subset.

    The subset is drawn once so rewards stay comparable across zones within
    one optimization run.
    """
    idx = stratified_sample_indices(train_set.labels, per_class, seed=seed)
    shuffled = apply_shuffle_batch(shuffle_map, train_set.features[idx])
    labels = train_set.labels[idx]

    def reward_fn(zone):
        return evaluate_reward(
            zone, shuffled, labels, penalty_coeff, shuffle_map.target_dim, order
        )

    return reward_fn
