import math

import numpy as np
import pytest

from aiive import nn
from conftest import finite_difference_gradients, max_relative_gradient_error


def small_net(seed=0, sizes=(4, 3, 3, 2)):
    return nn.init_network(list(sizes), seed)


def zero_net(sizes=(5, 3, 4, 7)):
    net = nn.init_network(list(sizes), 0)
    for a in net.arrays():
        a[...] = 0.0
    return net


class TestInit:
    def test_same_seed_bit_identical(self):
        a = nn.init_network([2304, 3, 4, 7], seed=42)
        b = nn.init_network([2304, 3, 4, 7], seed=42)
        for x, y in zip(a.arrays(), b.arrays()):
            assert np.array_equal(x, y)

    def test_different_seed_differs(self):
        a = nn.init_network([10, 4, 4, 3], seed=1)
        b = nn.init_network([10, 4, 4, 3], seed=2)
        assert not np.array_equal(a.W1, b.W1)

    def test_biases_zero(self):
        net = nn.init_network([1, 1, 1, 1], seed=99)
        assert net.b1 == pytest.approx([0.0])
        assert net.b2 == pytest.approx([0.0])
        assert net.b3 == pytest.approx([0.0])

    def test_fan_in_bound(self):
        net = nn.init_network([2304, 10, 10, 7], seed=5)
        assert np.all(np.abs(net.W1) <= 1.0 / math.sqrt(2304))
        assert np.all(np.abs(net.W2) <= 1.0 / math.sqrt(10))
        assert np.all(np.abs(net.W3) <= 1.0 / math.sqrt(10))

    @pytest.mark.parametrize("sizes", [[0, 1, 1, 1], [4, -2, 3, 2], [4, 3, 2], []])
    def test_invalid_sizes(self, sizes):
        with pytest.raises(ValueError):
            nn.init_network(sizes, seed=0)

    def test_layer_sizes_property(self):
        net = nn.init_network([6, 5, 4, 3], seed=0)
        assert net.layer_sizes == [6, 5, 4, 3]


class TestForward:
    def test_zero_net_uniform_output(self):
        net = zero_net((5, 3, 4, 7))
        y = nn.forward(net, np.random.default_rng(0).uniform(size=(4, 5))).y
        assert np.allclose(y, 1.0 / 7.0)

    def test_large_logit_stability(self):
        net = zero_net((3, 2, 2, 7))
        net.b3[0] = 1000.0
        y = nn.forward(net, np.zeros((1, 3))).y
        assert np.all(np.isfinite(y))
        assert y[0, 0] == pytest.approx(1.0)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        net = small_net(seed=7, sizes=(6, 5, 4, 3))
        x = rng.normal(size=(10, 6))
        y = nn.forward(net, x).y
        assert np.max(np.abs(y.sum(axis=1) - 1.0)) < 1e-9
        assert np.all(y >= 0.0)

    def test_dimension_mismatch(self):
        net = small_net()
        with pytest.raises(ValueError):
            nn.forward(net, np.zeros((2, 5)))


class TestCrossEntropy:
    def test_perfect_prediction_zero_loss(self):
        y = np.array([[1.0, 0.0], [0.0, 1.0]])
        t = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert nn.cross_entropy(y, t) == pytest.approx(0.0)

    def test_uniform_is_ln_c(self):
        y = np.full((3, 7), 1.0 / 7.0)
        t = nn.one_hot(np.array([0, 3, 6]), 7)
        assert nn.cross_entropy(y, t) == pytest.approx(math.log(7.0), abs=1e-12)

    def test_batch_mean(self):
        y = np.array([[0.9, 0.1], [0.4, 0.6]])
        t = np.array([[1.0, 0.0], [1.0, 0.0]])
        a = -math.log(0.9)
        b = -math.log(0.4)
        assert nn.cross_entropy(y, t) == pytest.approx((a + b) / 2.0)

    def test_clamp_prevents_infinity(self):
        y = np.array([[0.0, 1.0]])
        t = np.array([[1.0, 0.0]])
        loss = nn.cross_entropy(y, t)
        assert math.isfinite(loss)
        assert loss == pytest.approx(-math.log(1e-12))


class TestBackward:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        net = small_net(seed=8, sizes=(4, 3, 3, 2))
        for b in (net.b1, net.b2, net.b3):  # keep every ReLU off its kink
            b += rng.uniform(-0.5, 0.5, size=b.shape)
        x = rng.uniform(size=(5, 4))
        t = nn.one_hot(rng.integers(0, 2, size=5), 2)
        cache = nn.forward(net, x)
        analytic = nn.backward(net, x, cache, t).arrays()
        numeric = finite_difference_gradients(net, x, t)
        assert max_relative_gradient_error(analytic, numeric) < 1e-5

    def test_zero_delta_zero_gradients(self):
        net = small_net(seed=3)
        x = np.random.default_rng(4).uniform(size=(3, 4))
        cache = nn.forward(net, x)
        grads = nn.backward(net, x, cache, cache.y.copy())  # t = y exactly
        for g in grads.arrays():
            assert np.allclose(g, 0.0, atol=1e-15)

    def test_duplicated_batch_mean_invariance(self):
        rng = np.random.default_rng(9)
        net = small_net(seed=5, sizes=(6, 4, 3, 3))
        x = rng.uniform(size=(4, 6))
        t = nn.one_hot(rng.integers(0, 3, size=4), 3)
        g1 = nn.backward(net, x, nn.forward(net, x), t)
        x2 = np.vstack([x, x])
        t2 = np.vstack([t, t])
        g2 = nn.backward(net, x2, nn.forward(net, x2), t2)
        for a, b in zip(g1.arrays(), g2.arrays()):
            # Mean invariance is exact in real arithmetic; BLAS summation
            # order leaves last-ulp noise.
            assert np.allclose(a, b, rtol=1e-13, atol=1e-16)

    def test_shape_mismatch(self):
        net = small_net()
        x = np.random.default_rng(0).uniform(size=(3, 4))
        cache = nn.forward(net, x)
        with pytest.raises(ValueError):
            nn.backward(net, x, cache, np.zeros((3, 5)))


class TestSgdMomentumStep:
    def _scalar_net(self, w):
        net = zero_net((1, 1, 1, 1))
        net.W1[0, 0] = w
        return net

    def test_zero_momentum_is_plain_sgd(self):
        hp = nn.Hyperparams(learning_rate=0.5, momentum=0.0, batch_size=1)
        net = self._scalar_net(1.0)
        grads = nn.GradientSet.zeros_like(net)
        grads.W1[0, 0] = 0.25
        vel = nn.GradientSet.zeros_like(net)
        vel.W1[0, 0] = 123.0  # stale buffer must not leak through mu=0
        nn.sgd_momentum_step(net, grads, vel, hp)
        assert net.W1[0, 0] == pytest.approx(1.0 - 0.5 * 0.25)

    def test_standard_mode_arithmetic(self):
        hp = nn.Hyperparams(learning_rate=0.01, momentum=0.9, batch_size=1)
        net = self._scalar_net(1.0)
        grads = nn.GradientSet.zeros_like(net)
        grads.W1[0, 0] = 0.5
        vel = nn.GradientSet.zeros_like(net)
        vel.W1[0, 0] = 0.1
        nn.sgd_momentum_step(net, grads, vel, hp)
        assert vel.W1[0, 0] == pytest.approx(0.9 * 0.1 - 0.01 * 0.5)  # 0.085
        assert net.W1[0, 0] == pytest.approx(1.085)

    def test_paper_literal_arithmetic(self):
        hp = nn.Hyperparams(learning_rate=0.01, momentum=0.9, batch_size=1)
        net = self._scalar_net(1.0)
        grads = nn.GradientSet.zeros_like(net)
        grads.W1[0, 0] = 0.5
        prev = nn.GradientSet.zeros_like(net)
        prev.W1[0, 0] = 0.1
        nn.sgd_momentum_step(net, grads, prev, hp, paper_literal=True)
        assert net.W1[0, 0] == pytest.approx(1.0 + 0.9 * 0.1 - 0.01 * 0.5)  # 1.085
        assert prev.W1[0, 0] == pytest.approx(0.5)  # buffer now holds the raw gradient

    def test_nonfinite_gradient_refused(self):
        hp = nn.Hyperparams()
        net = self._scalar_net(1.0)
        grads = nn.GradientSet.zeros_like(net)
        grads.W2[0, 0] = np.nan
        vel = nn.GradientSet.zeros_like(net)
        before = net.W1[0, 0]
        with pytest.raises(nn.NumericError):
            nn.sgd_momentum_step(net, grads, vel, hp)
        assert net.W1[0, 0] == before

    def test_hyperparam_validation(self):
        with pytest.raises(ValueError):
            nn.Hyperparams(learning_rate=0.0)
        with pytest.raises(ValueError):
            nn.Hyperparams(momentum=1.0)
        with pytest.raises(ValueError):
            nn.Hyperparams(batch_size=0)


class TestTrainEpoch:
    def test_step_count_paper_split(self):
        batches = nn.epoch_batches(np.random.default_rng(0), 3374, 64)
        assert len(batches) == 53  # ceil(3374/64)
        assert sum(len(b) for b in batches) == 3374
        assert len(batches[-1]) == 3374 - 52 * 64

    def test_zero_net_metrics(self, tiny_dataset):
        net = zero_net((tiny_dataset.input_dim, 3, 4, 7))
        acc, loss = nn.evaluate(
            net,
            tiny_dataset.images[tiny_dataset.val_idx],
            tiny_dataset.labels[tiny_dataset.val_idx],
            7,
        )
        assert loss == pytest.approx(math.log(7.0), abs=1e-9)
        # argmax of a uniform row is class 0: accuracy is class 0's share.
        share = np.mean(tiny_dataset.labels[tiny_dataset.val_idx] == 0)
        assert acc == pytest.approx(share)

    def test_deterministic_metrics(self, tiny_dataset):
        runs = []
        for _ in range(2):
            net = nn.init_network([tiny_dataset.input_dim, 5, 4, 7], seed=2)
            vel = nn.GradientSet.zeros_like(net)
            rng = np.random.default_rng(77)
            hp = nn.Hyperparams(learning_rate=0.05, momentum=0.5, batch_size=16)
            runs.append(
                [nn.train_epoch(net, tiny_dataset, hp, vel, rng, epoch=e) for e in range(3)]
            )
        for a, b in zip(*runs):
            assert a == b  # bit-identical dataclasses

    def test_batch_size_exceeds_split(self, tiny_dataset):
        net = nn.init_network([tiny_dataset.input_dim, 3, 3, 7], seed=0)
        vel = nn.GradientSet.zeros_like(net)
        hp = nn.Hyperparams(batch_size=10_000)
        with pytest.raises(ValueError):
            nn.train_epoch(net, tiny_dataset, hp, vel, np.random.default_rng(0))


class TestResize:
    def test_grow_then_shrink_restores(self):
        net = nn.init_network([8, 3, 4, 5], seed=20)
        grown, _ = nn.resize_hidden_layer(net, 1, 4, seed=21)
        back, _ = nn.resize_hidden_layer(grown, 1, 3, seed=22, remove_index=3)
        for a, b in zip(net.arrays(), back.arrays()):
            assert np.array_equal(a, b)

    def test_grow_h2_shapes(self):
        net = nn.init_network([8, 3, 4, 5], seed=1)
        grown, _ = nn.resize_hidden_layer(net, 2, 5, seed=2)
        assert grown.W2.shape == (5, 3)
        assert grown.b2.shape == (5,)
        assert grown.W3.shape == (5, 5)
        assert np.array_equal(grown.W2[:4], net.W2)
        assert np.array_equal(grown.W3[:, :4], net.W3)
        assert grown.b2[4] == 0.0

    def test_velocity_resized_with_zeros(self):
        net = nn.init_network([8, 3, 4, 5], seed=1)
        vel = nn.GradientSet.zeros_like(net)
        for a in vel.arrays():
            a[...] = 1.0
        grown, vel2 = nn.resize_hidden_layer(net, 1, 5, seed=3, velocity=vel)
        assert vel2.W1.shape == grown.W1.shape
        assert np.all(vel2.W1[3:] == 0.0)
        assert np.all(vel2.W1[:3] == 1.0)
        assert np.all(vel2.W2[:, 3:] == 0.0)

    def test_forward_valid_after_resize(self):
        rng = np.random.default_rng(0)
        net = nn.init_network([8, 3, 4, 5], seed=1)
        x = rng.uniform(size=(6, 8))
        for which, count in [(1, 7), (2, 2), (1, 2)]:
            net, _ = nn.resize_hidden_layer(net, which, count, seed=count)
            y = nn.forward(net, x).y
            assert np.max(np.abs(y.sum(axis=1) - 1.0)) < 1e-9

    def test_shrink_removes_specified(self):
        net = nn.init_network([8, 4, 3, 5], seed=6)
        shrunk, _ = nn.resize_hidden_layer(net, 1, 3, seed=0, remove_index=1)
        assert np.array_equal(shrunk.W1, net.W1[[0, 2, 3]])
        assert np.array_equal(shrunk.W2, net.W2[:, [0, 2, 3]])

    def test_invalid_counts(self):
        net = nn.init_network([8, 3, 4, 5], seed=1)
        with pytest.raises(ValueError):
            nn.resize_hidden_layer(net, 1, 0, seed=0)
        with pytest.raises(ValueError):
            nn.resize_hidden_layer(net, 3, 2, seed=0)


class TestSetEdgeWeight:
    def test_set_then_read_back(self):
        net = nn.init_network([8, 3, 4, 5], seed=1)
        nn.set_edge_weight(net, 2, 2, 1, -0.625)
        assert net.W2[2, 1] == -0.625

    def test_zeroed_single_path(self):
        net = nn.init_network([1, 1, 1, 2], seed=4)
        net.b1[...] = 0.0
        nn.set_edge_weight(net, 1, 0, 0, 0.0)
        cache = nn.forward(net, np.array([[5.0]]))
        assert cache.h1[0, 0] == 0.0  # input contribution severed

    def test_edit_changes_evaluation(self, tiny_dataset):
        net = nn.init_network([tiny_dataset.input_dim, 4, 4, 7], seed=9)
        val_x = tiny_dataset.images[tiny_dataset.val_idx]
        val_y = tiny_dataset.labels[tiny_dataset.val_idx]
        before = nn.evaluate(net, val_x, val_y, 7)
        nn.set_edge_weight(net, 2, 0, 0, net.W2[0, 0] + 5.0)
        after = nn.evaluate(net, val_x, val_y, 7)
        assert before[1] != after[1]

    def test_out_of_range_and_nonfinite(self):
        net = nn.init_network([8, 3, 4, 5], seed=1)
        with pytest.raises(ValueError):
            nn.set_edge_weight(net, 2, 9, 0, 1.0)
        with pytest.raises(nn.NumericError):
            nn.set_edge_weight(net, 1, 0, 0, float("inf"))


class TestMomentumModeAgreement:
    def test_zero_momentum_trajectories_identical(self, tiny_dataset):
        hp = nn.Hyperparams(learning_rate=0.05, momentum=0.0, batch_size=16)
        nets = []
        for literal in (False, True):
            net = nn.init_network([tiny_dataset.input_dim, 5, 4, 7], seed=31)
            vel = nn.GradientSet.zeros_like(net)
            rng = np.random.default_rng(13)
            for e in range(3):
                nn.train_epoch(net, tiny_dataset, hp, vel, rng, epoch=e, paper_literal=literal)
            nets.append(net)
        for a, b in zip(nets[0].arrays(), nets[1].arrays()):
            assert np.array_equal(a, b)
