"""Replicate-and-shuffle dimension transform.

A source vector of length ``source_dim`` is conceptually tiled ``copies``
times, permuted by one frozen permutation, and truncated to ``target_dim``.
The same map is applied to every sample of an experiment so that a given
output position always draws from the same source channel.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError


@dataclass
class ShuffleMap:
    """Frozen replication count and permutation defining the transform."""

    source_dim: int
    target_dim: int
    copies: int
    permutation: np.ndarray

    def __post_init__(self):
        self.permutation = np.asarray(self.permutation, dtype=np.int64)
        validate_map(self)

    @property
    def column_sources(self):
        """Source channel feeding each output position."""
        return self.permutation[: self.target_dim] % self.source_dim


def validate_map(smap):
    """Check the ShuffleMap invariants; raise ValidationError on violation."""
    if smap.source_dim < 1:
        raise ValidationError("source_dim must be >= 1")
    if smap.target_dim <= smap.source_dim:
        raise ValidationError(
            f"target_dim ({smap.target_dim}) must exceed source_dim ({smap.source_dim})"
        )
    total = smap.copies * smap.source_dim
    if total < smap.target_dim:
        raise ValidationError(
            f"copies * source_dim = {total} is shorter than target_dim {smap.target_dim}"
        )
    if smap.permutation.shape != (total,):
        raise ValidationError(
            f"permutation length {smap.permutation.shape} != copies*source_dim {total}"
        )
    seen = np.zeros(total, dtype=bool)
    if smap.permutation.min(initial=0) < 0 or smap.permutation.max(initial=-1) >= total:
        raise ValidationError("permutation not bijective: index out of range")
    seen[smap.permutation] = True
    if not seen.all():
        raise ValidationError("permutation not bijective: repeated or missing index")


def make_shuffle_map(source_dim, target_dim, seed=0):
    """Build a seeded ShuffleMap with copies = ceil(target_dim / source_dim)."""
    if source_dim < 1:
        raise ValidationError("source_dim must be >= 1")
    if target_dim <= source_dim:
        raise ValidationError(
            f"target_dim ({target_dim}) must exceed source_dim ({source_dim})"
        )
    copies = -(-target_dim // source_dim)
    rng = np.random.default_rng(seed)
    permutation = rng.permutation(copies * source_dim)
    return ShuffleMap(
        source_dim=source_dim,
        target_dim=target_dim,
        copies=copies,
        permutation=permutation,
    )


def apply_shuffle(smap, x):
    """Transform one source vector to its shuffled target vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (smap.source_dim,):
        raise ShapeError(f"input has shape {x.shape}, expected ({smap.source_dim},)")
    return x[smap.column_sources]


def apply_shuffle_batch(smap, features):
    """Transform a [n, source_dim] matrix to [n, target_dim]."""
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != smap.source_dim:
        raise ShapeError(
            f"input has shape {features.shape}, expected (n, {smap.source_dim})"
        )
    return features[:, smap.column_sources]
