"""Tests for the optimizer against a hand-rolled reference update."""

import numpy as np
import pytest

from taxograft import Adam, Parameter


def reference_adam(data, grads, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, decay=0.0):
    """Independent re-derivation of the update rule, scalar loop."""
    m = np.zeros_like(data)
    v = np.zeros_like(data)
    x = data.copy()
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        if decay:
            x = x - lr * decay * x
        x = x - lr * m_hat / (np.sqrt(v_hat) + eps)
    return x


class TestStep:
    def test_matches_reference_over_steps(self):
        rng = np.random.default_rng(0)
        start = rng.normal(size=(3, 2))
        grads = [rng.normal(size=(3, 2)) for _ in range(5)]
        p = Parameter("w", start.copy())
        opt = Adam([p], lr=0.01)
        for g in grads:
            p.grad = g.copy()
            opt.step()
        np.testing.assert_allclose(p.data, reference_adam(start, grads, lr=0.01), rtol=1e-12)

    def test_decay_matches_reference(self):
        rng = np.random.default_rng(1)
        start = rng.normal(size=(4,))
        grads = [rng.normal(size=(4,)) for _ in range(3)]
        p = Parameter("w", start.copy())
        opt = Adam([p], lr=0.05, weight_decay=0.1)
        for g in grads:
            p.grad = g.copy()
            opt.step()
        np.testing.assert_allclose(
            p.data, reference_adam(start, grads, lr=0.05, decay=0.1), rtol=1e-12
        )

    def test_decay_skipped_for_flagged_parameters(self):
        bias = Parameter("b", np.ones(3), decay=False)
        weight = Parameter("w", np.ones(3), decay=True)
        opt = Adam([bias, weight], lr=0.1, weight_decay=0.5)
        bias.grad = np.zeros(3)
        weight.grad = np.zeros(3)
        opt.step()
        np.testing.assert_allclose(bias.data, np.ones(3))
        np.testing.assert_allclose(weight.data, np.ones(3) * (1 - 0.1 * 0.5))

    def test_missing_grad_means_zero(self):
        p = Parameter("w", np.full(2, 7.0))
        opt = Adam([p], lr=0.1)
        opt.step()
        np.testing.assert_allclose(p.data, np.full(2, 7.0))

    def test_first_step_size_is_learning_rate(self):
        # bias correction makes the first step lr * sign(grad) up to eps
        p = Parameter("w", np.zeros(3))
        opt = Adam([p], lr=0.25)
        p.grad = np.array([1.0, -2.0, 0.5])
        opt.step()
        np.testing.assert_allclose(p.data, [-0.25, 0.25, -0.25], atol=1e-7)


class TestHousekeeping:
    def test_zero_grad(self):
        p = Parameter("w", np.ones(2))
        p.grad = np.ones(2)
        Adam([p]).zero_grad()
        assert p.grad is None

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError):
            Adam([Parameter("w", np.ones(1)), Parameter("w", np.ones(1))])

    def test_negative_lr_rejected(self):
        with pytest.raises(ValueError):
            Adam([Parameter("w", np.ones(1))], lr=-0.1)
