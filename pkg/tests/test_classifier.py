import numpy as np
import pytest

from mindpipe import nn
from mindpipe.classifier import (ClassifierModel, TrainConfig, forward,
                                 init_classifier, loss_and_gradients,
                                 parameter_dict, predict, predict_batch,
                                 train_classifier, zone_slices, _forward_zone)
from mindpipe.data import Dataset
from mindpipe.errors import NumericError, ShapeError, ValidationError
from mindpipe.rs import make_shuffle_map
from mindpipe.zonesearch import FocalZone

MINI = TrainConfig(dense_sizes=(5, 5), hidden_size=4, seed=0)


def mini_model(seed=0, zone=FocalZone(1, 7), target=12):
    config = TrainConfig(dense_sizes=(5, 5), hidden_size=4, seed=seed)
    smap = make_shuffle_map(4, target, seed=seed)
    return init_classifier(smap, zone, config)


def zero_out(model):
    for name, arr in parameter_dict(model).items():
        arr[:] = 0.0
    for cell in model.lstm_stack:
        cell.forget_bias_offset = 0.0
    return model


class TestForward:
    def test_zero_network_uniform_probs(self):
        model = zero_out(mini_model())
        probs, step_outputs = forward(model, np.array([1.0, -2.0, 0.5, 3.0]))
        assert probs == pytest.approx(np.full(6, 1 / 6), abs=1e-12)
        assert np.allclose(step_outputs, 0.0)

    def test_penultimate_only_readout(self):
        model = mini_model(seed=1)
        x = np.random.default_rng(0).normal(size=4)
        rows = zone_slices(model, x[None, :])
        _, top_hs, _ = _forward_zone(model, rows)
        model.w1, model.w2 = 1.0, 0.0
        probs, _ = forward(model, x)
        logits = top_hs[-2, 0] @ model.output.weights.T + model.output.biases
        assert probs == pytest.approx(nn.softmax(logits), abs=1e-12)

    def test_readout_is_weighted_average_of_last_two(self):
        model = mini_model(seed=2)
        model.w1, model.w2 = 0.3, 0.7
        x = np.random.default_rng(1).normal(size=4)
        rows = zone_slices(model, x[None, :])
        _, top_hs, _ = _forward_zone(model, rows)
        averaged = 0.3 * top_hs[-2, 0] + 0.7 * top_hs[-1, 0]
        logits = averaged @ model.output.weights.T + model.output.biases
        probs, _ = forward(model, x)
        assert probs == pytest.approx(nn.softmax(logits), abs=1e-12)

    def test_equal_weights_average(self):
        # manually averaging two basis-like hidden states gives (w1*a + w2*b)
        a = np.array([1.0, 0.0, 0.0, 0.0])
        b = np.array([0.0, 1.0, 0.0, 0.0])
        assert np.array_equal(0.5 * a + 0.5 * b, [0.5, 0.5, 0.0, 0.0])

    def test_probs_sum_to_one(self):
        model = mini_model(seed=3)
        rng = np.random.default_rng(2)
        for _ in range(10):
            probs, _ = forward(model, rng.normal(size=4))
            assert abs(probs.sum() - 1.0) < 1e-12
            assert np.all(probs > 0) and np.all(probs < 1)

    def test_sequence_order_sensitivity(self):
        # the dimension axis is a real sequence: swapping two positions in the
        # zone changes the output
        model = mini_model(seed=4)
        rows = np.random.default_rng(3).normal(size=(1, model.zone.length))
        logits_a, _, _ = _forward_zone(model, rows)
        swapped = rows.copy()
        swapped[0, [0, 3]] = swapped[0, [3, 0]]
        logits_b, _, _ = _forward_zone(model, swapped)
        assert not np.allclose(logits_a, logits_b)

    def test_shape_error(self):
        model = mini_model()
        with pytest.raises(ShapeError):
            forward(model, np.zeros(5))

    def test_zone_must_span_two_steps(self):
        with pytest.raises(ValidationError):
            mini_model(zone=FocalZone(3, 4))


class TestPredict:
    def test_zero_network_tie_breaks_low(self):
        model = zero_out(mini_model())
        label, probs = predict(model, np.zeros(4))
        assert label == 0
        assert probs == pytest.approx(np.full(6, 1 / 6), abs=1e-12)

    def test_pure_and_repeatable(self):
        model = mini_model(seed=5)
        x = np.random.default_rng(4).normal(size=4)
        first = predict(model, x)
        second = predict(model, x)
        assert first[0] == second[0]
        assert np.array_equal(first[1], second[1])

    def test_batch_matches_single(self):
        model = mini_model(seed=6)
        X = np.random.default_rng(5).normal(size=(8, 4))
        labels, probs = predict_batch(model, X)
        for i in range(8):
            label, p = predict(model, X[i])
            assert labels[i] == label
            assert probs[i] == pytest.approx(p, rel=1e-12)


class TestGradients:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_full_gradient_check_miniature(self, seed):
        config = TrainConfig(dense_sizes=(5, 5), hidden_size=4, seed=seed)
        smap = make_shuffle_map(4, 12, seed=seed)
        model = init_classifier(smap, FocalZone(3, 9), config)
        rng = np.random.default_rng(seed + 10)
        rows = rng.normal(size=(3, 6))
        labels = np.array([0, 2, 5])
        _, grads = loss_and_gradients(model, rows, labels)
        params = parameter_dict(model)
        err = nn.grad_check(
            lambda: loss_and_gradients(model, rows, labels)[0],
            params, grads, epsilon=1e-5,
        )
        assert err < 1e-4


def planted_dataset(n_per_class=40, channels=4, shift=1.5, sigma=0.1, seed=0):
    """Two classes separated by a scalar shift on every channel."""
    rng = np.random.default_rng(seed)
    n = 2 * n_per_class
    features = rng.normal(0.0, sigma, size=(n, channels))
    labels = np.tile(np.array([0, 1]), n_per_class)
    features[labels == 1] += shift
    return Dataset(features=features, labels=labels, channel_count=channels,
                   class_count=6)


class TestTrainClassifier:
    def test_learns_planted_shift(self):
        ds = planted_dataset()
        smap = make_shuffle_map(4, 12, seed=0)
        config = TrainConfig(dense_sizes=(8, 8), hidden_size=8, iterations=300,
                             seed=0)
        model = train_classifier(ds, smap, FocalZone(2, 10), config)
        labels, _ = predict_batch(model, ds.features)
        assert np.mean(labels == ds.labels) >= 0.95
        holdout = planted_dataset(seed=9)
        labels, _ = predict_batch(model, holdout.features)
        assert np.mean(labels == holdout.labels) >= 0.9

    def test_zero_iterations_returns_initialized_model(self):
        ds = planted_dataset()
        smap = make_shuffle_map(4, 12, seed=0)
        config = TrainConfig(dense_sizes=(8, 8), hidden_size=8, iterations=0, seed=0)
        model = train_classifier(ds, smap, FocalZone(2, 10), config)
        fresh = init_classifier(smap, FocalZone(2, 10), config)
        for name, arr in parameter_dict(model).items():
            assert np.array_equal(arr, parameter_dict(fresh)[name]), name
        _, probs = predict_batch(model, ds.features[:10])
        assert np.all(probs > 0) and np.all(probs < 1)

    def test_huge_regularization_collapses_weights(self):
        from mindpipe.data import generate_synthetic
        ds = generate_synthetic(20, channel_count=4, noise_sigma=0.1, seed=0)
        smap = make_shuffle_map(4, 12, seed=0)
        config = TrainConfig(dense_sizes=(8, 8), hidden_size=8, iterations=500,
                             l2_lambda=1e3, learning_rate=0.05, seed=0)
        model = train_classifier(ds, smap, FocalZone(2, 10), config)
        fresh = init_classifier(smap, FocalZone(2, 10), config)
        trained_norm = sum(np.abs(a).sum() for n, a in parameter_dict(model).items()
                           if "weights" in n or n.split(".")[1].startswith("w_"))
        fresh_norm = sum(np.abs(a).sum() for n, a in parameter_dict(fresh).items()
                         if "weights" in n or n.split(".")[1].startswith("w_"))
        assert trained_norm < 0.2 * fresh_norm
        _, probs = predict_batch(model, ds.features[:10])
        assert np.max(np.abs(probs - 1 / 6)) < 0.05

    def test_deterministic_given_seed(self):
        ds = planted_dataset(n_per_class=15)
        smap = make_shuffle_map(4, 12, seed=0)
        config = TrainConfig(dense_sizes=(6, 6), hidden_size=5, iterations=40, seed=3)
        a = train_classifier(ds, smap, FocalZone(2, 10), config)
        b = train_classifier(ds, smap, FocalZone(2, 10), config)
        for name, arr in parameter_dict(a).items():
            assert np.array_equal(arr, parameter_dict(b)[name]), name

    def test_nonfinite_loss_reports_iteration(self):
        ds = planted_dataset(n_per_class=10)
        smap = make_shuffle_map(4, 12, seed=0)
        config = TrainConfig(dense_sizes=(6, 6), hidden_size=5, iterations=5,
                             learning_rate=1e200, seed=0)
        with pytest.raises(NumericError, match="iteration"):
            train_classifier(ds, smap, FocalZone(2, 10), config)

    def test_empty_training_set_rejected(self):
        smap = make_shuffle_map(4, 12, seed=0)
        ds = planted_dataset(n_per_class=1)
        empty = Dataset(features=ds.features[:0], labels=ds.labels[:0],
                        channel_count=4, class_count=6)
        with pytest.raises(ValidationError):
            train_classifier(empty, smap, FocalZone(2, 10), TrainConfig())

    def test_model_embeds_map_and_zone(self):
        ds = planted_dataset(n_per_class=10)
        smap = make_shuffle_map(4, 12, seed=0)
        zone = FocalZone(2, 10)
        config = TrainConfig(dense_sizes=(6, 6), hidden_size=5, iterations=5, seed=0)
        model = train_classifier(ds, smap, zone, config)
        assert model.zone == zone
        assert model.shuffle_map is smap
