import numpy as np
import pytest

from mindpipe.errors import ShapeError, ValidationError
from mindpipe.rs import (ShuffleMap, apply_shuffle, apply_shuffle_batch,
                         make_shuffle_map)


class TestMakeShuffleMap:
    def test_copies_is_ceiling(self):
        smap = make_shuffle_map(4, 8, seed=0)
        assert smap.copies == 2
        assert smap.permutation.shape == (8,)

    def test_exact_multiple(self):
        smap = make_shuffle_map(14, 224, seed=0)
        assert smap.copies == 16
        assert smap.permutation.shape == (224,)

    def test_ceiling_covers_target(self):
        smap = make_shuffle_map(14, 256, seed=0)
        assert smap.copies == 19
        assert smap.copies * 14 >= 256

    def test_target_must_exceed_source(self):
        with pytest.raises(ValidationError):
            make_shuffle_map(14, 14, seed=0)

    def test_deterministic(self):
        a = make_shuffle_map(14, 224, seed=5)
        b = make_shuffle_map(14, 224, seed=5)
        assert np.array_equal(a.permutation, b.permutation)

    def test_permutation_is_bijective(self):
        smap = make_shuffle_map(7, 30, seed=3)
        assert sorted(smap.permutation.tolist()) == list(range(smap.copies * 7))


class TestApplyShuffle:
    def test_known_shuffle_example(self):
        # tiles of (1,3,4,2) are (1,3,4,2,1,3,4,2); this permutation realizes
        # the output (3,1,2,3,4,4,1,2)
        smap = ShuffleMap(source_dim=4, target_dim=8, copies=2,
                          permutation=np.array([1, 0, 3, 5, 2, 6, 4, 7]))
        out = apply_shuffle(smap, [1.0, 3.0, 4.0, 2.0])
        assert np.array_equal(out, [3, 1, 2, 3, 4, 4, 1, 2])

    def test_identity_permutation_tiles(self):
        smap = ShuffleMap(source_dim=2, target_dim=4, copies=2,
                          permutation=np.arange(4))
        assert np.array_equal(apply_shuffle(smap, [5.0, 7.0]), [5, 7, 5, 7])

    def test_output_multiset_bounded_by_copies(self):
        rng = np.random.default_rng(0)
        for seed in range(20):
            source, target = 5, 17
            smap = make_shuffle_map(source, target, seed=seed)
            x = rng.normal(size=source)
            out = apply_shuffle(smap, x)
            assert out.shape == (target,)
            for k in range(source):
                count = int(np.sum(out == x[k]))
                assert 0 <= count <= smap.copies
            assert sum(int(np.sum(out == x[k])) for k in range(source)) == target

    def test_element_provenance_exhaustive(self):
        smap = make_shuffle_map(3, 7, seed=2)
        x = np.array([10.0, 20.0, 30.0])
        out = apply_shuffle(smap, x)
        for j in range(smap.target_dim):
            assert out[j] == x[smap.permutation[j] % 3]

    def test_determinism_bit_identical(self):
        smap = make_shuffle_map(6, 20, seed=9)
        x = np.random.default_rng(1).normal(size=6)
        assert np.array_equal(apply_shuffle(smap, x), apply_shuffle(smap, x))

    def test_alignment_across_samples(self):
        # position j draws from the same source channel for every sample
        smap = make_shuffle_map(5, 12, seed=4)
        rng = np.random.default_rng(2)
        a, b = rng.normal(size=5), rng.normal(size=5)
        out = apply_shuffle_batch(smap, np.stack([a, b]))
        for j, src in enumerate(smap.column_sources):
            assert out[0, j] == a[src]
            assert out[1, j] == b[src]

    def test_length_mismatch(self):
        smap = make_shuffle_map(4, 8, seed=0)
        with pytest.raises(ShapeError):
            apply_shuffle(smap, [1.0, 2.0])


class TestMapValidation:
    def test_repeated_index_rejected(self):
        with pytest.raises(ValidationError, match="bijective"):
            ShuffleMap(source_dim=2, target_dim=3, copies=2,
                       permutation=np.array([0, 0, 1, 2]))

    def test_short_permutation_rejected(self):
        with pytest.raises(ValidationError):
            ShuffleMap(source_dim=2, target_dim=3, copies=2,
                       permutation=np.array([0, 1, 2]))

    def test_target_not_above_source_rejected(self):
        with pytest.raises(ValidationError):
            ShuffleMap(source_dim=4, target_dim=4, copies=1,
                       permutation=np.arange(4))
