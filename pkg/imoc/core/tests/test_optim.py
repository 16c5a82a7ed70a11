# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Tests for :mod:`~imoc.core.optim`
####################################
"""
import numpy as np
from unittest import TestCase
from imoc.core.error import ShapeError
from imoc.core.tensor import Tensor, backward
from imoc.core.optim import Adam, SGD, OptimizerState, adam_step, make_optimizer


class AdamTest(TestCase):
    def test_first_step_is_sign(self):
        """Bias correction makes the first update lr * g / |g|."""
        p = np.array([1.0, -2.0, 3.0])
        g = np.array([0.5, -4.0, 1e-3])
        state = OptimizerState([p], lr=0.1)
        adam_step(state, [p], [g])
        self.assertTrue(np.allclose(p, [0.9, -1.9, 2.9], atol=1e-4))
        self.assertEqual(state.step, 1)

    def test_shape_mismatch(self):
        p = np.zeros(3)
        with self.assertRaises(ShapeError):
            adam_step(OptimizerState([p]), [p], [np.zeros(4)])

    def test_minimizes_quadratic(self):
        x = Tensor(np.array([1.0, -1.0]), requires_grad=True)
        opt = Adam([x], lr=0.01)
        for _ in range(2000):
            opt.zero_grad()
            backward(x.sqnorm())
            opt.step()
        self.assertLess(np.abs(x.data).max(), 0.05)

    def test_float32_params_stay_float32(self):
        x = Tensor(np.ones(3, dtype=np.float32), requires_grad=True)
        opt = Adam([x])
        opt.zero_grad()
        backward(x.sum())
        opt.step()
        self.assertEqual(x.dtype, np.float32)


class SGDTest(TestCase):
    def test_momentum(self):
        x = Tensor(np.zeros(1), requires_grad=True)
        opt = SGD([x], lr=0.1, momentum=0.9)
        for _ in range(2):
            opt.zero_grad()
            backward((x * 2.0).sum())
            opt.step()
        # buffers: 2, then 0.9 * 2 + 2
        self.assertAlmostEqual(x.data[0], -0.1*2 - 0.1*3.8)

    def test_factory(self):
        params = [Tensor(np.zeros(2), requires_grad=True)]
        self.assertIsInstance(make_optimizer('adam', params, 1e-3), Adam)
        self.assertIsInstance(make_optimizer('sgd', params, 1e-3), SGD)
        with self.assertRaises(ValueError):
            make_optimizer('lbfgs', params, 1e-3)
