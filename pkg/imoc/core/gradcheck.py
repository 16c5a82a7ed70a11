# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Finite Difference Checks
###################################
Compare reverse-mode gradients against central differences. Checks are only
meaningful at 64-bit precision, so float32 parameters are rejected.

.. code-block:: python

    x = Tensor(rng.normal(size=5), requires_grad=True)
    finite_difference_check(lambda: x.sqnorm(), [x])    # ~1e-10
"""
import numpy as np
from imoc.core.error import GradientError
from imoc.core.tensor import Tensor, backward, conv2d, stack


EPS = 1e-5


def finite_difference_check(fn, params, eps=EPS, entries=None):
    """
    Maximum relative error between analytic and central-difference gradients.

    Args:
        fn (callable): Zero-argument graph builder returning a scalar tensor
        params (list): Float64 tensors (``requires_grad``) to differentiate
        eps (float): Central difference step
        entries (list): Per parameter, flat indices to perturb (None: all)

    Returns:
        err (float): max |analytic - fd| / max(1, |fd|) over all coordinates
    """
    for p in params:
        if p.dtype != np.float64:
            raise GradientError("Finite difference checks require float64, got {}.".format(p.dtype))
    for p in params:
        p.data = np.ascontiguousarray(p.data)
        p.grad = None
    backward(fn(), params)
    err = 0.0
    entries = [None]*len(params) if entries is None else entries
    for p, picked in zip(params, entries):
        analytic = p.grad.copy()
        flat = p.data.reshape(-1)
        for i in (range(flat.size) if picked is None else picked):
            orig = flat[i]
            flat[i] = orig + eps
            up = fn().item()
            flat[i] = orig - eps
            down = fn().item()
            flat[i] = orig
            fd = (up - down) / (2*eps)
            err = max(err, abs(analytic.reshape(-1)[i] - fd) / max(1.0, abs(fd)))
    return err


def _away_from_zero(rng, shape, low=0.1):
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(low, 1.0, size=shape)


def _param(values):
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)


def _case(rng, name):
    """Return (fn, params) for one random instance of the named primitive."""
    n, m = rng.integers(1, 5, size=2)
    shape = (int(n), int(m))
    x = _param(rng.normal(size=shape))
    w = Tensor(rng.normal(size=shape))    # fixed random projection of the output
    if name == 'matmul':
        k = int(rng.integers(1, 5))
        y = _param(rng.normal(size=(int(m), k)))
        proj = Tensor(rng.normal(size=(int(n), k)))
        return (lambda: ((x @ y) * proj).sum()), [x, y]
    if name == 'conv2d':
        k, stride, pad = int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(0, 2))
        h = int(rng.integers(k, k + 4))
        xi = _param(rng.normal(size=(2, int(rng.integers(1, 3)), h, h + 1)))
        wi = _param(rng.normal(size=(int(rng.integers(1, 3)), xi.shape[1], k, k)))
        out = conv2d(xi, wi, stride, pad)
        proj = Tensor(rng.normal(size=out.shape))
        return (lambda: (conv2d(xi, wi, stride, pad) * proj).sum()), [xi, wi]
    if name == 'relu':
        x = _param(_away_from_zero(rng, shape))
        return (lambda: (x.relu() * w).sum()), [x]
    if name == 'tanh':
        return (lambda: (x.tanh() * w).sum()), [x]
    if name == 'softplus':
        return (lambda: (x.softplus() * w).sum()), [x]
    if name == 'exp':
        return (lambda: (x.exp() * w).sum()), [x]
    if name == 'log':
        x = _param(rng.uniform(0.5, 2.0, size=shape))
        return (lambda: (x.ln() * w).sum()), [x]
    if name == 'logsumexp':
        axis = int(rng.integers(0, 2))
        v = Tensor(rng.normal(size=shape[1 - axis]))
        return (lambda: (x.logsumexp(axis=axis) * v).sum()), [x]
    if name == 'sum':
        axis = int(rng.integers(0, 2))
        v = Tensor(rng.normal(size=shape[1 - axis]))
        return (lambda: (x.sum(axis=axis) * v).sum()), [x]
    if name == 'mean':
        axis = int(rng.integers(0, 2))
        v = Tensor(rng.normal(size=shape[1 - axis]))
        return (lambda: (x.mean(axis=axis) * v).sum()), [x]
    if name == 'add':
        y = _param(rng.normal(size=(1, shape[1])))
        return (lambda: ((x + y) * w).sum()), [x, y]
    if name == 'sub':
        y = _param(rng.normal(size=shape))
        return (lambda: ((x - y) * w).sum()), [x, y]
    if name == 'mul':
        y = _param(rng.normal(size=shape))
        return (lambda: ((x * y) * w).sum()), [x, y]
    if name == 'scalar-mul':
        c = float(rng.normal())
        return (lambda: ((x * c) * w).sum()), [x]
    if name == 'pnorm1':
        x = _param(_away_from_zero(rng, shape))
        v = Tensor(rng.normal(size=shape[0]))
        return (lambda: (x.norm(1) * v).sum()), [x]
    if name == 'pnorm2':
        x = _param(_away_from_zero(rng, shape))
        v = Tensor(rng.normal(size=shape[0]))
        return (lambda: (x.norm(2) * v).sum()), [x]
    if name == 'sqnorm':
        v = Tensor(rng.normal(size=shape[0]))
        return (lambda: (x.sqnorm() * v).sum()), [x]
    if name == 'reshape':
        proj = Tensor(rng.normal(size=(shape[0]*shape[1], )))
        return (lambda: (x.reshape(-1) * proj).sum()), [x]
    if name == 'transpose':
        proj = Tensor(rng.normal(size=shape[::-1]))
        return (lambda: (x.T * proj).sum()), [x]
    if name == 'getitem':
        idx = rng.integers(0, shape[0], size=3)
        proj = Tensor(rng.normal(size=(3, shape[1])))
        return (lambda: (x[idx] * proj).sum()), [x]
    if name == 'stack':
        y = _param(rng.normal(size=shape))
        proj = Tensor(rng.normal(size=(2, ) + shape))
        return (lambda: (stack([x, y]) * proj).sum()), [x, y]
    raise KeyError(name)


PRIMITIVES = ('matmul', 'conv2d', 'relu', 'tanh', 'softplus', 'exp', 'log', 'logsumexp',
              'sum', 'mean', 'add', 'sub', 'mul', 'scalar-mul', 'pnorm1', 'pnorm2',
              'sqnorm', 'reshape', 'transpose', 'getitem', 'stack')


def primitive_suite(seed=0, trials=100, names=PRIMITIVES):
    """
    Run random finite-difference checks for every primitive.

    Args:
        seed (int): Generator seed
        trials (int): Random shapes/inputs per primitive
        names (iterable): Primitive names to check

    Returns:
        errors (dict): Primitive name to worst relative error
    """
    rng = np.random.default_rng(seed)
    errors = {}
    for name in names:
        worst = 0.0
        for _ in range(trials):
            fn, params = _case(rng, name)
            worst = max(worst, finite_difference_check(fn, params))
        errors[name] = worst
    return errors
