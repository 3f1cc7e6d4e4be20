"""Layer gradients against central finite differences, losses, Adam,
far-field slopes, and checkpoint round-trips."""

import numpy as np
import pytest

import sanlab.nn_autodiff as nn
from sanlab.rng import philox
from sanlab.tensor_core import KernelBank


def finite_difference_grads(loss_of_params, params, h=1e-4):
    flat = np.concatenate([p.ravel() for p in params])
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        up = flat.copy()
        up[i] += h
        down = flat.copy()
        down[i] -= h
        grad[i] = (loss_of_params(up) - loss_of_params(down)) / (2 * h)
    return grad


def check_model_grads(model, x, seed=0):
    """Quadratic loss on outputs; analytic vs numeric parameter grads."""
    params = model.parameters()

    def loss_of(flat):
        i = 0
        for p in params:
            p.flat[:] = flat[i : i + p.size]
            i += p.size
        y, _ = model.forward(x)
        return float((y**2).sum())

    start = np.concatenate([p.ravel() for p in params])
    numeric = finite_difference_grads(loss_of, params)
    loss_of(start)  # restore
    y, cache = model.forward(x)
    grads, _ = model.backward(cache, 2.0 * y)
    analytic = np.concatenate([g.ravel() for g in grads])
    denom = np.maximum(np.abs(numeric) + np.abs(analytic), 1e-8)
    rel = np.abs(numeric - analytic) / denom
    assert (rel < 1e-4).mean() >= 0.95
    assert rel.max() < 1e-3


@pytest.fixture
def rng():
    return philox(0xA11CE)


class TestLayerGradients:
    def test_conv_cyclic(self, rng):
        model = nn.Model([nn.init_conv(2, 3, 3, 3, rng)], ("image", 2, 5, 5))
        check_model_grads(model, rng.standard_normal((2, 2, 5, 5)))

    def test_dense(self, rng):
        model = nn.Model([nn.init_dense(4, 3, rng)], ("vector", 4))
        check_model_grads(model, rng.standard_normal((5, 4)))

    def test_relu_chain(self, rng):
        model = nn.Model(
            [nn.init_dense(4, 8, rng), nn.ReLU(), nn.init_dense(8, 2, rng)],
            ("vector", 4),
        )
        check_model_grads(model, rng.standard_normal((6, 4)) + 0.3)

    def test_leaky_relu_chain(self, rng):
        model = nn.Model(
            [nn.init_dense(4, 8, rng), nn.LeakyReLU(0.1), nn.init_dense(8, 2, rng)],
            ("vector", 4),
        )
        check_model_grads(model, rng.standard_normal((6, 4)))

    def test_tanh_chain(self, rng):
        model = nn.Model(
            [nn.init_dense(3, 6, rng), nn.Tanh(), nn.init_dense(6, 1, rng)],
            ("vector", 3),
        )
        check_model_grads(model, rng.standard_normal((4, 3)))

    def test_spatial_mean_and_scale(self, rng):
        model = nn.Model(
            [
                nn.init_conv(1, 4, 3, 3, rng),
                nn.Scale(2.5),
                nn.SpatialMean(),
                nn.init_dense(4, 2, rng),
            ],
            ("image", 1, 4, 4),
        )
        check_model_grads(model, rng.standard_normal((3, 1, 4, 4)))

    def test_reshape_path(self, rng):
        model = nn.Model(
            [nn.init_dense(4, 16, rng), nn.Reshape(1, 4, 4),
             nn.init_conv(1, 2, 3, 3, rng), nn.SpatialMean()],
            ("vector", 4),
        )
        check_model_grads(model, rng.standard_normal((3, 4)))

    def test_input_gradient(self, rng):
        # gradient wrt the input, used by the generator update
        model = nn.Model(
            [nn.init_dense(4, 8, rng), nn.Tanh(), nn.init_dense(8, 1, rng)],
            ("vector", 4),
        )
        x = rng.standard_normal((3, 4))

        def loss_of_input(flat):
            y, _ = model.forward(flat.reshape(x.shape))
            return float((y**2).sum())

        numeric = np.zeros(x.size)
        h = 1e-4
        for i in range(x.size):
            up = x.ravel().copy()
            up[i] += h
            down = x.ravel().copy()
            down[i] -= h
            numeric[i] = (loss_of_input(up) - loss_of_input(down)) / (2 * h)
        y, cache = model.forward(x)
        _, gx = model.backward(cache, 2.0 * y)
        rel = np.abs(numeric - gx.ravel()) / np.maximum(
            np.abs(numeric) + np.abs(gx.ravel()), 1e-8
        )
        assert rel.max() < 1e-3

    def test_relu_subgradient_zero_at_zero(self):
        relu = nn.ReLU()
        x = np.array([[-1.0, 0.0, 2.0]])
        gx, _ = relu.backward(x, np.ones_like(x))
        assert gx.tolist() == [[0.0, 0.0, 1.0]]


class TestModel:
    def test_empty_model_is_identity(self, rng):
        model = nn.Model([], ("vector", 3))
        x = rng.standard_normal((2, 3))
        y, _ = model.forward(x)
        assert np.array_equal(y, x)

    def test_identity_dense_passthrough(self):
        model = nn.Model([nn.Dense(np.eye(4), np.zeros(4))], ("vector", 4))
        x = np.arange(8.0).reshape(2, 4)
        y, _ = model.forward(x)
        assert np.allclose(y, x)

    def test_delta_conv_passthrough(self, rng):
        data = np.zeros((2, 2, 3, 3))
        data[0, 0, 0, 0] = 1.0
        data[1, 1, 0, 0] = 1.0
        model = nn.Model(
            [nn.ConvCyclic(KernelBank(data), np.zeros(2))], ("image", 2, 6, 6)
        )
        x = rng.standard_normal((3, 2, 6, 6))
        y, _ = model.forward(x)
        assert np.abs(y - x).max() < 1e-12

    def test_shape_mismatch_rejected_at_construction(self, rng):
        with pytest.raises(nn.DimensionError):
            nn.Model(
                [nn.init_dense(4, 8, rng), nn.init_dense(9, 2, rng)], ("vector", 4)
            )

    def test_forward_rejects_wrong_batch_shape(self, rng):
        model = nn.Model([nn.init_dense(4, 2, rng)], ("vector", 4))
        with pytest.raises(nn.DimensionError):
            model.forward(rng.standard_normal((2, 5)))

    def test_zero_output_gradient_gives_zero_param_grads(self, rng):
        model = nn.Model(
            [nn.init_dense(3, 4, rng), nn.ReLU(), nn.init_dense(4, 1, rng)],
            ("vector", 3),
        )
        x = rng.standard_normal((2, 3))
        y, cache = model.forward(x)
        grads, gx = model.backward(cache, np.zeros_like(y))
        assert all(np.all(g == 0) for g in grads)
        assert np.all(gx == 0)


class TestLosses:
    def test_hinge_critic_balanced_zero_scores(self):
        zeros = np.zeros(8)
        assert nn.hinge_critic_loss(zeros, zeros) == pytest.approx(2.0)

    def test_hinge_critic_saturated_margins(self):
        real = np.full(8, 1.5)
        fake = np.full(8, -2.0)
        assert nn.hinge_critic_loss(real, fake) == 0.0
        gr, gf = nn.hinge_critic_loss_grad(real, fake)
        assert np.all(gr == 0) and np.all(gf == 0)

    def test_hinge_matches_elementwise(self, rng):
        real = rng.standard_normal(32)
        fake = rng.standard_normal(32)
        expected = np.maximum(0, 1 - real).mean() + np.maximum(0, 1 + fake).mean()
        assert nn.hinge_critic_loss(real, fake) == pytest.approx(expected)

    def test_hinge_gradient_finite_difference(self, rng):
        real = rng.standard_normal(16)
        fake = rng.standard_normal(16)
        gr, gf = nn.hinge_critic_loss_grad(real, fake)
        h = 1e-6
        for k in range(16):
            up = real.copy()
            up[k] += h
            down = real.copy()
            down[k] -= h
            num = (nn.hinge_critic_loss(up, fake) - nn.hinge_critic_loss(down, fake)) / (2 * h)
            assert num == pytest.approx(gr[k], abs=1e-6)

    def test_generator_loss_and_grad(self, rng):
        fake = rng.standard_normal(16)
        assert nn.generator_loss(fake) == pytest.approx(-fake.mean())
        g = nn.generator_loss_grad(fake)
        assert np.allclose(g, -np.ones(16) / 16)

    def test_mse_matches_closed_form(self, rng):
        # linear regression: grad = 2 X^T (Xw - y) / M
        X = rng.standard_normal((10, 3))
        w = rng.standard_normal(3)
        y = rng.standard_normal(10)
        pred = X @ w
        loss = nn.mse_loss(pred, y)
        assert loss == pytest.approx(((pred - y) ** 2).mean())
        g_pred = nn.mse_loss_grad(pred, y)
        grad_w = X.T @ g_pred
        expected = 2 * X.T @ (X @ w - y) / 10
        assert np.allclose(grad_w, expected)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            nn.hinge_critic_loss(np.array([]), np.array([]))
        with pytest.raises(ValueError):
            nn.generator_loss(np.array([]))


class TestAdam:
    def test_zero_gradient_keeps_params(self, rng):
        p = rng.standard_normal((3, 3))
        orig = p.copy()
        state = nn.AdamState.for_params([p], lr=0.1)
        nn.adam_step([p], [np.zeros_like(p)], state)
        assert np.array_equal(p, orig)

    def test_first_step_is_signed_lr(self, rng):
        p = np.zeros((4,))
        g = np.array([3.0, -0.5, 1e-3, 0.0])
        state = nn.AdamState.for_params([p], lr=0.01)
        nn.adam_step([p], [g], state)
        expected = -0.01 * np.sign(g) * (np.abs(g) / (np.abs(g) + 1e-8 * np.sqrt(1 - 0.9)))
        # first bias-corrected step is -lr * sign(g) up to the epsilon term
        assert np.allclose(p[:3], expected[:3], atol=1e-9)
        assert p[3] == 0.0

    def test_quadratic_bowl_descent(self, rng):
        p = rng.standard_normal(5) * 3
        state = nn.AdamState.for_params([p], lr=0.05)
        losses = []
        for _ in range(100):
            losses.append(float((p**2).sum()))
            nn.adam_step([p], [2 * p], state)
        assert losses[-1] < losses[0] * 1e-2
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_rejects_bad_betas(self):
        with pytest.raises(ValueError):
            nn.AdamState.for_params([np.zeros(2)], lr=0.1, beta1=1.0)

    def test_sgd_step(self):
        p = np.array([1.0, 2.0])
        nn.sgd_step([p], [np.array([0.5, -1.0])], lr=0.1)
        assert np.allclose(p, [0.95, 2.1])


class TestSlopeAtInfinity:
    def test_single_relu_identity(self):
        neg, pos = nn.slope_at_infinity(np.array([1.0]), np.array([0.0]), np.array([1.0]))
        assert (neg, pos) == (0.0, 1.0)

    def test_single_relu_negated(self):
        neg, pos = nn.slope_at_infinity(np.array([1.0]), np.array([0.0]), np.array([-1.0]))
        assert (neg, pos) == (0.0, -1.0)

    def test_matches_far_field_evaluation(self, rng):
        for _ in range(10):
            n = 16
            w1 = rng.standard_normal(n)
            b1 = rng.standard_normal(n)
            w2 = rng.standard_normal(n)
            neg, pos = nn.slope_at_infinity(w1, b1, w2)

            def f(x):
                return float(w2 @ np.maximum(w1 * x + b1, 0.0))

            big = 1e6
            num_pos = (f(2 * big) - f(big)) / big
            num_neg = (f(-big) - f(-2 * big)) / big
            assert num_pos == pytest.approx(pos, abs=1e-6)
            assert num_neg == pytest.approx(neg, abs=1e-6)

    def test_bound_for_unit_ball_weights(self, rng):
        # |f'(-inf) + f'(+inf)| <= |w1| |w2| <= 1
        for _ in range(200):
            n = int(rng.integers(1, 32))
            w1 = rng.standard_normal(n)
            w2 = rng.standard_normal(n)
            w1 /= max(1.0, np.linalg.norm(w1))
            w2 /= max(1.0, np.linalg.norm(w2))
            b1 = rng.standard_normal(n)
            neg, pos = nn.slope_at_infinity(w1, b1, w2)
            assert abs(neg + pos) <= 1 + 1e-9

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            nn.slope_at_infinity(np.ones(3), np.ones(3), np.ones(4))


class TestCheckpoints:
    def test_roundtrip(self, tmp_path, rng):
        model = nn.Model(
            [
                nn.init_conv(1, 4, 3, 3, rng),
                nn.LeakyReLU(0.2),
                nn.Scale(3.0),
                nn.SpatialMean(),
                nn.init_dense(4, 1, rng),
            ],
            ("image", 1, 8, 8),
        )
        nn.save_checkpoint(model, tmp_path / "ckpt", seed=7, step=42,
                           extra={"dataset": "textures16"})
        loaded, manifest = nn.load_checkpoint(tmp_path / "ckpt")
        assert manifest["seed"] == 7
        assert manifest["step"] == 42
        assert manifest["extra"]["dataset"] == "textures16"
        x = rng.standard_normal((2, 1, 8, 8))
        y0, _ = model.forward(x)
        y1, _ = loaded.forward(x)
        # weights live on disk as f32, so agreement is at f32 precision
        assert np.abs(y0 - y1).max() < 1e-5

    def test_loaded_layer_kinds_match(self, tmp_path, rng):
        model = nn.Model(
            [nn.init_dense(4, 4, rng), nn.Tanh(), nn.Reshape(1, 2, 2)],
            ("vector", 4),
        )
        nn.save_checkpoint(model, tmp_path / "ckpt", seed=0, step=0)
        loaded, _ = nn.load_checkpoint(tmp_path / "ckpt")
        assert [l.kind for l in loaded.layers] == [l.kind for l in model.layers]


class TestLipschitzComposition:
    def test_exact_normalized_chain_is_nonexpansive(self, rng):
        from sanlab.normalizer import NormalizationPolicy, apply_normalization

        model = nn.Model(
            [
                nn.init_conv(1, 4, 3, 3, rng),
                nn.ReLU(),
                nn.init_conv(4, 4, 3, 3, rng),
                nn.LeakyReLU(0.1),
                nn.SpatialMean(),
                nn.init_dense(4, 1, rng),
            ],
            ("image", 1, 8, 8),
        )
        apply_normalization(model, NormalizationPolicy(method="exact_sn"), step=1)
        worst = 0.0
        for _ in range(1000):
            x = rng.standard_normal((2, 1, 8, 8))
            y, _ = model.forward(x)
            dx = np.linalg.norm(x[0] - x[1])
            dy = abs(float(y[0] - y[1]))
            if dx > 0:
                worst = max(worst, dy / dx)
        assert worst <= 1 + 1e-3
