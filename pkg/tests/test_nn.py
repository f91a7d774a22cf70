import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mridangam import nn
from mridangam.types import LabeledDataset, StrokeLabel

from .oracles import finite_difference_grads, perceptron_separates

FIG4_COUNTS = [180_015_000, 135_009_000, 40_504_500, 6_751_500, 675_450, 45_100, 606]


def toy_net(seed=0, dropout=0.5):
    arch = [nn.LayerSpec(8, 5, "relu", dropout), nn.LayerSpec(5, 6, "softmax")]
    return nn.init_network(arch, seed=seed, dtype=np.float64)


def separable_toy(n=200, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, (n, 2))
    score = x @ np.array([1.0, -0.7]) + 0.1
    keep = np.abs(score) > 0.2  # margin
    x, score = x[keep], score[keep]
    return x, (score > 0).astype(int)


class TestArchitecture:
    def test_param_counts(self):
        arch = nn.build_architecture()
        assert [nn.param_count(s) for s in arch] == FIG4_COUNTS
        assert sum(FIG4_COUNTS) == 363_001_156

    def test_smallest(self):
        assert nn.param_count(nn.LayerSpec(1, 1)) == 2

    def test_dropout_placement(self):
        arch = nn.build_architecture()
        assert [s.dropout_after for s in arch] == [0.25] * 4 + [None] * 3
        assert arch[-1].activation == "softmax"

    def test_chain_check(self):
        with pytest.raises(ValueError, match="chain"):
            nn.init_network([nn.LayerSpec(4, 3), nn.LayerSpec(2, 6, "softmax")])

    def test_softmax_only_last(self):
        with pytest.raises(ValueError):
            nn.check_architecture([nn.LayerSpec(4, 3, "softmax"), nn.LayerSpec(3, 6, "softmax")])


class TestInit:
    def test_deterministic(self):
        a = nn.init_network(nn.build_architecture(20, (10,)), seed=3)
        b = nn.init_network(nn.build_architecture(20, (10,)), seed=3)
        for p, q in zip(a.params(), b.params()):
            np.testing.assert_array_equal(p, q)

    def test_bias_zero(self):
        net = nn.init_network(nn.build_architecture(20, (10,)), seed=3)
        assert all(not layer.bias.any() for layer in net.layers)

    def test_he_std(self):
        net = nn.init_network([nn.LayerSpec(1000, 1000), nn.LayerSpec(1000, 6, "softmax")], seed=0)
        w = net.layers[0].weight
        assert abs(w.std() / np.sqrt(2 / 1000) - 1) < 0.05


class TestForward:
    def test_zero_weights_uniform(self):
        net = toy_net()
        for p in net.params():
            p[...] = 0
        probs, _ = nn.forward(net, np.random.default_rng(0).random((4, 8)))
        np.testing.assert_allclose(probs, 1 / 6)

    def test_eval_deterministic(self, rng):
        net = toy_net()
        x = rng.random((3, 8))
        np.testing.assert_array_equal(nn.forward(net, x)[0], nn.forward(net, x)[0])

    def test_two_class_closed_form(self):
        net = nn.Network([nn.Layer(nn.LayerSpec(2, 2, "softmax"), np.eye(2), np.zeros(2))])
        a, b = 0.3, -1.2
        probs, _ = nn.forward(net, np.array([[a, b]]))
        assert probs[0, 0] == pytest.approx(np.exp(a) / (np.exp(a) + np.exp(b)), abs=1e-15)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError, match="input dim"):
            nn.forward(toy_net(), np.zeros((1, 7)))

    def test_non_finite(self):
        x = np.zeros((1, 8))
        x[0, 2] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            nn.forward(toy_net(), x)

    def test_inverted_dropout(self):
        net = toy_net(dropout=0.5)
        _, cache = nn.forward(net, np.ones((50, 8)), training=True, seed=1)
        mask = cache.masks[0]
        assert set(np.unique(mask)) <= {0.0, 2.0}


@settings(max_examples=50)
@given(arrays(np.float64, (5, 6), elements=st.floats(-50, 50)), st.floats(-100, 100))
def test_softmax_rows_and_shift(logits, c):
    p = nn.softmax(logits)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-6)
    np.testing.assert_allclose(nn.softmax(logits + c), p, atol=1e-6)


class TestCrossEntropy:
    def test_perfect(self):
        assert nn.cross_entropy(np.eye(6)[[2]], [2]) == 0.0

    def test_uniform(self):
        assert nn.cross_entropy(np.full((3, 6), 1 / 6), [0, 3, 5]) == pytest.approx(np.log(6), abs=1e-12)

    def test_weighted_clamped(self):
        probs = np.array([[0.5, 0.25, 0.25, 0, 0, 0]])
        w = np.array([1, 2, 1, 1, 1, 1.0])
        assert nn.cross_entropy(probs, [1], w) == pytest.approx(2 * -np.log(0.25), abs=1e-12)
        assert nn.cross_entropy(probs, [3]) == pytest.approx(-np.log(1e-12))

    def test_invalid_index(self):
        with pytest.raises(ValueError):
            nn.cross_entropy(np.full((1, 6), 1 / 6), [6])


class TestBackward:
    def test_zero_net_bias_gradient(self):
        net = toy_net()
        for p in net.params():
            p[...] = 0
        targets = np.array([0, 2, 2, 5])
        _, cache = nn.forward(net, np.zeros((4, 8)))
        grads = nn.backward(net, cache, targets)
        expected = (1 / 6 - np.eye(6)[targets]).mean(axis=0)
        np.testing.assert_allclose(grads[-1][1], expected, atol=1e-15)

    @pytest.mark.parametrize("weighted", [False, True])
    def test_finite_differences(self, rng, weighted):
        net = toy_net(seed=5, dropout=0.4)
        x = rng.standard_normal((7, 8))
        y = rng.integers(0, 6, 7)
        w = rng.uniform(0.5, 2.0, 6) if weighted else None
        _, cache = nn.forward(net, x, training=True, seed=11)
        masks = cache.masks
        assert masks[0] is not None and (masks[0] == 0).any()
        analytic = [g for pair in nn.backward(net, cache, y, w) for g in pair]

        def loss():
            probs, _ = nn.forward(net, x, training=True, masks=masks)
            return nn.cross_entropy(probs, y, w)

        numeric = finite_difference_grads(loss, net.params(), h=1e-4)
        for a, n in zip(analytic, numeric):
            rel = np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), 1e-8)
            assert rel.max() < 1e-4

    def test_dropped_unit_has_zero_incoming_gradient(self, rng):
        net = toy_net(seed=1, dropout=0.5)
        x = rng.standard_normal((1, 8))
        _, cache = nn.forward(net, x, training=True, seed=2)
        dropped = np.flatnonzero(cache.masks[0][0] == 0)
        assert dropped.size
        dW, db = nn.backward(net, cache, [3])[0]
        assert not dW[dropped].any() and not db[dropped].any()

    def test_unit_weights_bit_identical(self, rng):
        net = toy_net(seed=2)
        x = rng.standard_normal((6, 8))
        y = rng.integers(0, 6, 6)
        probs, cache = nn.forward(net, x)
        assert nn.cross_entropy(probs, y) == nn.cross_entropy(probs, y, np.ones(6))
        for (a, b), (c, d) in zip(nn.backward(net, cache, y), nn.backward(net, cache, y, np.ones(6))):
            np.testing.assert_array_equal(a, c)
            np.testing.assert_array_equal(b, d)

    def test_stale_cache(self, rng):
        net = toy_net()
        _, cache = nn.forward(net, rng.random((2, 8)))
        net.version += 1
        with pytest.raises(ValueError, match="stale"):
            nn.backward(net, cache, [0, 1])


class TestAdam:
    def test_first_step(self):
        p = [np.array([0.5])]
        state = nn.AdamState.zeros_like(p)
        nn.adam_step(p, [np.array([1.0])], state, lr=2e-4)
        assert p[0][0] - 0.5 == pytest.approx(-2e-4, rel=1e-6)
        assert state.t == 1

    def test_zero_gradient(self):
        p = [np.array([0.5, -1.0])]
        state = nn.AdamState.zeros_like(p)
        nn.adam_step(p, [np.zeros(2)], state)
        np.testing.assert_array_equal(p[0], [0.5, -1.0])

    def test_symmetric(self):
        p = [np.array([1.0, 3.0])]
        state = nn.AdamState.zeros_like(p)
        for _ in range(3):
            nn.adam_step(p, [np.array([0.7, 0.7])], state)
        assert p[0][0] - 1.0 == pytest.approx(p[0][1] - 3.0, abs=1e-15)

    def test_shape_mismatch(self):
        p = [np.zeros(3)]
        with pytest.raises(ValueError):
            nn.adam_step(p, [np.zeros(2)], nn.AdamState.zeros_like(p))


class TestTrain:
    def test_separable_toy(self):
        x, y = separable_toy()
        assert perceptron_separates(x, y)
        ds = LabeledDataset(x, y)
        tr, va = ds.subset(np.arange(0, len(ds), 2)), ds.subset(np.arange(1, len(ds), 2))
        arch = nn.build_architecture(2, (16,), dropout=0)
        net, hist = nn.train(tr, va, arch, nn.TrainConfig(learning_rate=0.02, batch_size=8, seed=0,
                                                          patience=25))
        assert max(hist.val_acc) == 1.0
        assert nn.evaluate(net, va)[1] == 1.0

    def test_patience_plateau(self):
        # every label identical: val accuracy is 1.0 from the first epoch on
        ds = LabeledDataset(np.random.default_rng(0).random((20, 3)), np.zeros(20, int))
        net, hist = nn.train(ds, ds, nn.build_architecture(3, (4,)), nn.TrainConfig(patience=1))
        assert len(hist) == 2
        assert hist.best_epoch == 0

    def test_deterministic(self):
        x, y = separable_toy(seed=3)
        ds = LabeledDataset(x, y)
        arch = nn.build_architecture(2, (8,))
        conf = nn.TrainConfig(epochs=4, seed=9)
        _, h1 = nn.train(ds, ds, arch, conf)
        _, h2 = nn.train(ds, ds, arch, conf)
        assert h1.to_csv() == h2.to_csv()

    def test_loss_non_increasing_full_batch(self):
        x, y = separable_toy(n=64, seed=2)
        net = nn.init_network(nn.build_architecture(2, (16,), dropout=0), seed=0, dtype=np.float64)
        losses = []
        for _ in range(10):
            probs, cache = nn.forward(net, x)
            losses.append(nn.cross_entropy(probs, y))
            for p, g in zip(net.params(), [g for pair in nn.backward(net, cache, y) for g in pair]):
                p -= 1e-4 * g
            net.version += 1
        assert all(b <= a for a, b in zip(losses, losses[1:]))

    def test_empty(self):
        ds = LabeledDataset(np.zeros((0, 2)), np.zeros(0, int))
        with pytest.raises(ValueError):
            nn.train(ds, ds, nn.build_architecture(2, (4,)))

    def test_history_csv(self):
        hist = nn.TrainHistory([1.0], [0.5], [0.9], [0.25], 0)
        assert hist.to_csv().splitlines() == [
            "epoch,train_loss,train_acc,val_loss,val_acc",
            "1,1.00000000,0.50000000,0.90000000,0.25000000",
        ]


class TestPredict:
    def test_tie_break(self):
        net = toy_net()
        for p in net.params():
            p[...] = 0
        label, probs = nn.predict(net, np.ones(8))
        assert label is StrokeLabel.LO

    def test_argmax(self):
        net = nn.Network([nn.Layer(nn.LayerSpec(6, 6, "softmax"), 50 * np.eye(6), np.zeros(6))])
        assert nn.predict(net, np.eye(6)[4])[0] is StrokeLabel.MID3

    def test_agrees_with_forward(self, rng):
        net = toy_net(seed=4)
        x = rng.standard_normal((100, 8))
        probs, _ = nn.forward(net, x)
        assert [int(nn.predict(net, v)[0]) for v in x] == list(np.argmax(probs, axis=1))


def test_model_round_trip(tmp_path, rng):
    net = nn.init_network(nn.build_architecture(12, (7, 5), dropout=0.25), seed=1)
    path = tmp_path / "m.bin"
    nn.save_model(path, net)
    assert path.read_bytes()[:4] == b"MRDN"
    back = nn.load_model(path)
    assert back.arch == net.arch
    x = rng.random((10, 12)).astype(np.float32)
    np.testing.assert_array_equal(nn.predict_proba(back, x), nn.predict_proba(net, x))


def test_model_bad_magic(tmp_path):
    path = tmp_path / "x.bin"
    path.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(ValueError, match="magic"):
        nn.load_model(path)
