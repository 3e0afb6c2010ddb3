import numpy as np
import pytest

from evt import nn
from helpers import kink_safe


class TestActivations:
    def test_relu_clamps_negatives(self):
        x = np.array([[-2.0, -0.5, 0.0, 0.5, 2.0]])
        np.testing.assert_array_equal(nn.relu(x), [[0.0, 0.0, 0.0, 0.5, 2.0]])

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = rng.normal(size=(5, 7)) * rng.uniform(0.1, 10)
            s = nn.softmax(x)
            np.testing.assert_allclose(s.sum(axis=1), 1.0, rtol=1e-6)
            assert (s > 0).all()

    def test_softmax_symmetric_input(self):
        np.testing.assert_allclose(nn.softmax(np.zeros((1, 4))), 0.25)

    def test_softmax_shift_invariant(self):
        x = np.array([[1.0, 2.0, 3.0]])
        np.testing.assert_allclose(nn.softmax(x), nn.softmax(x + 100.0), rtol=1e-6)

    def test_softmax_extreme_logits_finite(self):
        x = np.array([[1000.0, 0.0, -1000.0]], dtype=np.float32)
        s = nn.softmax(x)
        assert np.isfinite(s).all()
        np.testing.assert_allclose(s.sum(axis=1), 1.0, rtol=1e-6)

    def test_entropy_uniform_and_point_mass(self):
        np.testing.assert_allclose(nn.entropy(np.full((1, 2), 0.5)), np.log(2), rtol=1e-7)
        np.testing.assert_allclose(nn.entropy(np.array([[1.0, 0.0]])), 0.0, atol=1e-9)


class TestDenseLayer:
    def test_create_shapes_and_dtype(self):
        layer = nn.DenseLayer.create(4, 3, "relu", np.random.default_rng(0))
        assert layer.weights.shape == (4, 3)
        assert layer.biases.shape == (3,)
        assert layer.weights.dtype == np.float32
        assert layer.in_size == 4 and layer.out_size == 3

    def test_create_glorot_bound(self):
        layer = nn.DenseLayer.create(30, 20, "linear", np.random.default_rng(1))
        bound = np.sqrt(6.0 / (30 + 20))
        assert np.abs(layer.weights).max() <= bound
        np.testing.assert_array_equal(layer.biases, 0.0)

    def test_unknown_activation(self):
        with pytest.raises(ValueError):
            nn.DenseLayer.create(2, 2, "tanh", np.random.default_rng(0))

    def test_forward_linear_identity(self):
        layer = nn.DenseLayer(np.eye(3, dtype=np.float32),
                              np.zeros(3, dtype=np.float32), "linear")
        x = np.random.default_rng(2).normal(size=(4, 3)).astype(np.float32)
        np.testing.assert_allclose(layer(x), x, rtol=1e-6)


class TestNetwork:
    def _net(self, seed=0):
        rng = np.random.default_rng(seed)
        return nn.Network([
            nn.DenseLayer.create(6, 4, "relu", rng),
            nn.DenseLayer.create(4, 2, "linear", rng),
            nn.DenseLayer.create(2, 4, "relu", rng),
            nn.DenseLayer.create(4, 6, "linear", rng),
        ], bottleneck_index=1)

    def test_chained_dims_validated(self):
        rng = np.random.default_rng(0)
        with pytest.raises(nn.ShapeError):
            nn.Network([nn.DenseLayer.create(3, 2, "relu", rng),
                        nn.DenseLayer.create(4, 3, "linear", rng)], 0)

    def test_bottleneck_index_range(self):
        rng = np.random.default_rng(0)
        layers = [nn.DenseLayer.create(3, 2, "relu", rng)]
        with pytest.raises(ValueError):
            nn.Network(layers, 1)

    def test_encode_matches_forward(self):
        model = self._net()
        x = np.random.default_rng(3).normal(size=(5, 6)).astype(np.float32)
        acts = model.forward(x)
        np.testing.assert_array_equal(model.encode(x), acts[1])
        np.testing.assert_array_equal(model.reconstruct(x), acts[-1])

    def test_parameters_order_and_identity(self):
        model = self._net()
        params = model.parameters()
        assert len(params) == 8
        assert params[0] is model.layers[0].weights
        assert params[1] is model.layers[0].biases

    def test_copy_is_deep(self):
        model = self._net()
        clone = model.copy()
        clone.layers[0].weights[0, 0] += 1.0
        assert model.layers[0].weights[0, 0] != clone.layers[0].weights[0, 0]

    def test_duplicate_rows_get_identical_codes(self):
        model = self._net()
        x = np.random.default_rng(4).normal(size=(1, 6)).astype(np.float32)
        both = np.vstack([x, x])
        z = model.encode(both)
        np.testing.assert_array_equal(z[0], z[1])


class TestLosses:
    def test_mse_sums_features_averages_samples(self):
        x = np.zeros((2, 3))
        recon = np.array([[1.0, 1.0, 1.0], [0.0, 0.0, 0.0]])
        # sample errors: 3 and 0, mean 1.5
        assert nn.mse_loss(x, recon) == pytest.approx(1.5)

    def test_mse_matches_manual(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            x = rng.normal(size=(8, 5))
            r = rng.normal(size=(8, 5))
            manual = float(np.mean(np.sum((x - r) ** 2, axis=1)))
            np.testing.assert_allclose(nn.mse_loss(x, r), manual, rtol=1e-12)

    def test_cross_entropy_uniform(self):
        t = np.full((4, 3), 1 / 3)
        assert nn.cross_entropy(t, t) == pytest.approx(np.log(3), rel=1e-6)

    def test_cross_entropy_asymmetric(self):
        t = np.array([[0.9, 0.1]])
        p = np.array([[0.5, 0.5]])
        manual = -(0.9 * np.log(0.5 + 1e-12) + 0.1 * np.log(0.5 + 1e-12))
        assert nn.cross_entropy(t, p) == pytest.approx(manual, rel=1e-9)
        assert nn.cross_entropy(t, p) != pytest.approx(nn.cross_entropy(p, t), rel=1e-3)

    def test_cross_entropy_rejects_bad_rows(self):
        good = np.full((1, 2), 0.5)
        with pytest.raises(ValueError):
            nn.cross_entropy(np.array([[0.9, 0.3]]), good)
        with pytest.raises(ValueError):
            nn.cross_entropy(good, np.array([[-0.1, 1.1]]))

    def test_grad_shapes(self):
        rng = np.random.default_rng(6)
        x, r = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
        assert nn.mse_grad(x, r).shape == (4, 3)
        t = nn.softmax(rng.normal(size=(4, 3)))
        p = nn.softmax(rng.normal(size=(4, 3)))
        assert nn.cross_entropy_grad(t, p).shape == (4, 3)


def _random_net(rng, layout, acts, dtype=np.float32):
    layers = [nn.DenseLayer.create(layout[i], layout[i + 1], acts[i], rng, dtype)
              for i in range(len(acts))]
    return nn.Network(layers, bottleneck_index=len(acts) // 2)


class TestBackprop:
    def test_matches_finite_differences_mse(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            model = _random_net(rng, [4, 6, 3, 4], ["relu", "linear", "relu"])
            x = rng.normal(size=(7, 4)).astype(np.float32)
            kink_safe(model, x)
            report = nn.gradient_check(model, x, ("mse", x))
            assert report.passed, f"seed {seed}: {report.max_rel_error}"

    def test_matches_finite_differences_cross_entropy(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            model = _random_net(rng, [5, 4, 3], ["relu", "softmax"])
            x = rng.normal(size=(6, 5)).astype(np.float32)
            kink_safe(model, x)
            t = nn.softmax(rng.normal(size=(6, 3)))
            report = nn.gradient_check(model, x, ("cross_entropy", t))
            assert report.passed, f"seed {seed}: {report.max_rel_error}"

    def test_softmax_everywhere(self):
        rng = np.random.default_rng(11)
        model = _random_net(rng, [4, 4, 4], ["softmax", "softmax"])
        x = nn.softmax(rng.normal(size=(5, 4))).astype(np.float32)
        report = nn.gradient_check(model, x, ("mse", x))
        assert report.passed

    def test_input_grad_propagates(self):
        rng = np.random.default_rng(12)
        model = _random_net(rng, [3, 5, 3], ["relu", "linear"])
        x = rng.normal(size=(4, 3)).astype(np.float32)
        acts = model.forward(x)
        _, g_in = nn.backprop(model.layers, x, acts, nn.mse_grad(x, acts[-1]))
        assert g_in.shape == x.shape
        assert np.abs(g_in).sum() > 0

    def test_loss_and_gradients_returns_loss(self):
        rng = np.random.default_rng(13)
        model = _random_net(rng, [3, 4, 3], ["relu", "linear"])
        x = rng.normal(size=(5, 3)).astype(np.float32)
        loss, grads = nn.loss_and_gradients(model, x, ("mse", x))
        assert loss == pytest.approx(nn.mse_loss(x, model.reconstruct(x)), rel=1e-6)
        assert len(grads) == len(model.parameters())


class TestOptimizers:
    def test_sgd_known_update(self):
        # lr=0.1, grad=1 on scalar w=1 -> 0.9
        w = np.array([1.0], dtype=np.float32)
        nn.SGD(0.1).step([w], [np.array([1.0], dtype=np.float32)])
        np.testing.assert_allclose(w, [0.9], rtol=1e-6)

    def test_adam_first_step_magnitude(self):
        # bias correction makes the first step ~lr regardless of grad scale
        for scale in (1e-3, 1.0, 1e3):
            w = np.array([0.0], dtype=np.float32)
            nn.Adam(0.1).step([w], [np.array([scale], dtype=np.float32)])
            np.testing.assert_allclose(np.abs(w), 0.1, rtol=1e-3)

    def test_positive_lr_required(self):
        with pytest.raises(ValueError):
            nn.SGD(0.0)
        with pytest.raises(ValueError):
            nn.Adam(-1e-3)

    def test_small_lr_step_never_increases_loss(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            model = _random_net(rng, [4, 5, 4], ["relu", "linear"])
            x = rng.normal(size=(6, 4)).astype(np.float32)
            before, grads = nn.loss_and_gradients(model, x, ("mse", x))
            nn.SGD(1e-4).step(model.parameters(), grads)
            after = nn.mse_loss(x, model.reconstruct(x))
            assert after <= before + 1e-9, f"seed {seed}"

    def test_adam_decreases_loss_over_steps(self):
        rng = np.random.default_rng(3)
        model = _random_net(rng, [4, 6, 4], ["relu", "linear"])
        x = rng.normal(size=(16, 4)).astype(np.float32)
        opt = nn.Adam(1e-2)
        first = nn.mse_loss(x, model.reconstruct(x))
        for _ in range(200):
            _, grads = nn.loss_and_gradients(model, x, ("mse", x))
            opt.step(model.parameters(), grads)
        assert nn.mse_loss(x, model.reconstruct(x)) < 0.5 * first

    def test_make_optimizer_dispatch(self):
        assert isinstance(nn.make_optimizer("adam", 1e-3), nn.Adam)
        assert isinstance(nn.make_optimizer("sgd", 1e-3), nn.SGD)
        with pytest.raises(ValueError):
            nn.make_optimizer("rmsprop", 1e-3)


class TestGradientCheckHarness:
    def test_reports_tolerance_and_flags(self):
        rng = np.random.default_rng(7)
        model = _random_net(rng, [3, 4, 3], ["relu", "linear"])
        x = rng.normal(size=(4, 3)).astype(np.float32)
        report = nn.gradient_check(model, x, ("mse", x))
        assert report.tol == 1e-4
        assert report.passed and not report.flagged
        assert len(report.per_param_max) == len(model.parameters())

    def test_detects_wrong_gradient(self):
        analytic = [np.ones((2, 2))]
        numeric = [np.full((2, 2), 2.0)]
        cmp = nn.compare_gradients(analytic, numeric)
        assert not cmp.passed
        assert cmp.flagged == [0]

    def test_model_dtype_untouched(self):
        rng = np.random.default_rng(8)
        model = _random_net(rng, [3, 3], ["linear"])
        x = rng.normal(size=(2, 3)).astype(np.float32)
        nn.gradient_check(model, x, ("mse", x))
        assert model.layers[0].weights.dtype == np.float32
