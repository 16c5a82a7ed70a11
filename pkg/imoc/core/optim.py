# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Optimizers
###################################
First-order updates applied in place to parameter tensors. The adaptive
moment method (:class:`~imoc.core.optim.Adam`) is the default; SGD with
momentum is the alternative.

.. code-block:: python

    opt = Adam(encoder.parameters(), lr=2e-4)
    opt.zero_grad()
    backward(loss, opt.params)
    opt.step()
"""
import logging
import numpy as np
from imoc.core.error import ShapeError


class OptimizerState(object):
    """
    Per-parameter moment accumulators plus the step counter.

    Attributes:
        m (list): First-moment accumulators (zero at init)
        v (list): Second-moment accumulators (zero at init)
        step (int): Number of updates applied so far
    """
    def __init__(self, params, lr=2e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise ValueError("Learning rate must be positive.")
        if not (0 < beta1 < 1 and 0 < beta2 < 1):
            raise ValueError("Decay rates must lie in (0, 1).")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.step = 0


def adam_step(state, params, grads):
    """
    One bias-corrected adaptive-moment update, in place.

    Args:
        state (OptimizerState): Accumulators, updated in place
        params (list): Parameter arrays, updated in place
        grads (list): Gradients, one per parameter

    Returns:
        params (list): The same (updated) arrays
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError('adam', (len(params), ), (len(grads), ))
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeError('adam', p.shape, g.shape)
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        update = (state.lr / bc1) * m / (np.sqrt(v / bc2) + state.eps)
        p -= update.astype(p.dtype, copy=False)
    return params


class Optimizer(object):
    """Base class holding parameter tensors."""
    @property
    def log(self):
        name = '.'.join([self.__module__,
                         self.__class__.__name__])
        return logging.getLogger(name)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        raise NotImplementedError()

    def __init__(self, params):
        self.params = list(params)


class Adam(Optimizer):
    """
    Adaptive moment estimation (decay rates 0.9/0.999, eps 1e-8).

    Args:
        params (iterable): Tensors with ``requires_grad``
        lr (float): Learning rate (default 2e-4)
    """
    def step(self):
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        adam_step(self.state, [p.data for p in self.params], grads)

    def __init__(self, params, lr=2e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        super(Adam, self).__init__(params)
        self.state = OptimizerState([p.data for p in self.params], lr, beta1, beta2, eps)


class SGD(Optimizer):
    """
    Stochastic gradient descent with heavy-ball momentum.

    Args:
        params (iterable): Tensors with ``requires_grad``
        lr (float): Learning rate
        momentum (float): Momentum factor in [0, 1)
    """
    def step(self):
        self.steps += 1
        for p, buf in zip(self.params, self.buffers):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            buf *= self.momentum
            buf += g
            p.data -= (self.lr * buf).astype(p.dtype, copy=False)

    def __init__(self, params, lr=2e-4, momentum=0.9):
        super(SGD, self).__init__(params)
        if not 0 <= momentum < 1:
            raise ValueError("Momentum must lie in [0, 1).")
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.buffers = [np.zeros_like(p.data) for p in self.params]
        self.steps = 0


def make_optimizer(name, params, lr, momentum=0.9):
    """Build the optimizer named by a run configuration (adam or sgd)."""
    if name == 'adam':
        return Adam(params, lr=lr)
    if name == 'sgd':
        return SGD(params, lr=lr, momentum=momentum)
    raise ValueError("Unknown optimizer {!r}".format(name))
