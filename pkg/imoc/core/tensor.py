# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Differentiable Tensors
###################################
A small reverse-mode differentiation substrate over dense numpy arrays. A
:class:`~imoc.core.tensor.Tensor` wraps an array; every primitive op is a
:class:`~imoc.core.tensor.Function` subclass that computes its value eagerly
and remembers what it needs for the reverse pass.

.. code-block:: python

    x = Tensor(np.random.rand(3, 4), requires_grad=True)
    w = Tensor(np.random.rand(4, 2), requires_grad=True)
    loss = (x @ w).tanh().sum()
    backward(loss)
    x.grad.shape    # (3, 4)

The reverse pass orders the graph with :func:`networkx.topological_sort` (the
graph's edges point from an op's output to its inputs) so that every node's
gradient is complete before it is propagated further.

Supported primitives: matrix multiply, 2-D convolution (stride, zero padding),
relu, tanh, softplus, exp, log, log-sum-exp over an axis, sum/mean over axes,
elementwise add/sub/mul, scalar multiply, p-norms (p = 1, 2) and the squared
L2 norm over the last axis, plus the structural ops reshape, transpose,
indexing and stacking.

Warning:
    Tensors are treated as immutable once consumed by an op. Mutating
    ``.data`` in place invalidates any graph built on top of it.
"""
import logging
import numpy as np
import networkx as nx
from contextlib import contextmanager
from scipy.special import expit, logsumexp
from imoc.core.error import ShapeError, DomainError, GradientError
from imoc.core import kernels


_grad_enabled = [True]


@contextmanager
def no_grad():
    """
    Context in which ops do not record graph history (evaluation mode).

    .. code-block:: python

        with no_grad():
            z = encoder(x)    # z.requires_grad is False
    """
    prev = _grad_enabled[0]
    _grad_enabled[0] = False
    try:
        yield
    finally:
        _grad_enabled[0] = prev


class Tensor(object):
    """
    Dense floating point array that participates in a computation graph.

    Args:
        data (array-like): Values (integer input is promoted to float64)
        requires_grad (bool): Whether gradients are accumulated for this tensor
        dtype: Optional dtype to cast to (float32 or float64)
        name (str): Optional label (used for parameters)

    Attributes:
        grad (array): Same-shape gradient, populated by :func:`~imoc.core.tensor.backward`
    """
    __array_priority__ = 1000    # ndarray (op) Tensor dispatches to Tensor

    @property
    def log(self):
        name = '.'.join([self.__module__,
                         self.__class__.__name__])
        return logging.getLogger(name)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def T(self):
        return self.transpose()

    def item(self):
        """Return the value of a single element tensor as a Python float."""
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data.item()

    def detach(self):
        """Return a graph-free tensor sharing the same values."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def backward(self):
        """Alias for :func:`~imoc.core.tensor.backward` with this tensor as root."""
        backward(self)

    def astype(self, dtype):
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad, name=self.name)

    # Operators
    def __add__(self, other):
        return Add.apply(self, other)

    def __radd__(self, other):
        return Add.apply(other, self)

    def __sub__(self, other):
        return Sub.apply(self, other)

    def __rsub__(self, other):
        return Sub.apply(other, self)

    def __mul__(self, other):
        if np.isscalar(other):
            return Scale.apply(self, factor=other)
        return Mul.apply(self, other)

    def __rmul__(self, other):
        if np.isscalar(other):
            return Scale.apply(self, factor=other)
        return Mul.apply(other, self)

    def __truediv__(self, other):
        if not np.isscalar(other):
            raise TypeError("Tensors may only be divided by scalars.")
        return Scale.apply(self, factor=1.0/other)

    def __neg__(self):
        return Scale.apply(self, factor=-1.0)

    def __matmul__(self, other):
        return MatMul.apply(self, other)

    def __getitem__(self, index):
        return GetItem.apply(self, index=index)

    # Reductions and elementwise functions
    def sum(self, axis=None, keepdims=False):
        return Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return Mean.apply(self, axis=axis, keepdims=keepdims)

    def logsumexp(self, axis=-1, keepdims=False):
        return LogSumExp.apply(self, axis=axis, keepdims=keepdims)

    def norm(self, p=2):
        return PNorm.apply(self, p=p)

    def sqnorm(self):
        return SquaredNorm.apply(self)

    def relu(self):
        return ReLU.apply(self)

    def tanh(self):
        return Tanh.apply(self)

    def softplus(self):
        return Softplus.apply(self)

    def exp(self):
        return Exp.apply(self)

    def ln(self):
        return Log.apply(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Reshape.apply(self, shape=shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return Transpose.apply(self, axes=axes or None)

    def __repr__(self):
        return 'Tensor{0}'.format(self.shape)

    def __init__(self, data, requires_grad=False, dtype=None, name=None, _ctx=None):
        data = np.asarray(data, dtype=dtype)
        if data.dtype.kind != 'f':
            data = data.astype(np.float64)
        self.data = data
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._ctx = _ctx


class Function(object):
    """
    Base class of every primitive op. Subclasses implement ``forward`` (on
    numpy arrays) and ``backward`` (returning one gradient, or None, per
    parent).
    """
    name = None

    @classmethod
    def apply(cls, *args, **kwargs):
        tensors = [a for a in args if isinstance(a, Tensor)]
        dtype = np.result_type(*[t.dtype for t in tensors]) if tensors else np.float64
        parents = tuple(a if isinstance(a, Tensor) else Tensor(a, dtype=dtype) for a in args)
        fn = cls()
        fn.parents = parents
        data = fn.forward(*[p.data for p in parents], **kwargs)
        rg = _grad_enabled[0] and any(p.requires_grad for p in parents)
        if not rg:
            fn.saved = None
            fn = None
        return Tensor(data, requires_grad=rg, _ctx=fn)

    def save(self, *arrays):
        self.saved = arrays

    def forward(self, *arrays, **kwargs):
        raise NotImplementedError()

    def backward(self, grad):
        raise NotImplementedError()

    def __repr__(self):
        return self.name or self.__class__.__name__


def _broadcast(op, *arrays):
    try:
        return np.broadcast_shapes(*[a.shape for a in arrays])
    except ValueError:
        raise ShapeError(op, *[a.shape for a in arrays])


def unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to the operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Add(Function):
    name = 'add'

    def forward(self, x, y):
        _broadcast(self.name, x, y)
        self.save(x.shape, y.shape)
        return x + y

    def backward(self, grad):
        sx, sy = self.saved
        return unbroadcast(grad, sx), unbroadcast(grad, sy)


class Sub(Function):
    name = 'sub'

    def forward(self, x, y):
        _broadcast(self.name, x, y)
        self.save(x.shape, y.shape)
        return x - y

    def backward(self, grad):
        sx, sy = self.saved
        return unbroadcast(grad, sx), unbroadcast(-grad, sy)


class Mul(Function):
    name = 'mul'

    def forward(self, x, y):
        _broadcast(self.name, x, y)
        self.save(x, y)
        return x * y

    def backward(self, grad):
        x, y = self.saved
        return unbroadcast(grad*y, x.shape), unbroadcast(grad*x, y.shape)


class Scale(Function):
    name = 'scalar-mul'

    def forward(self, x, factor):
        self.factor = x.dtype.type(factor)
        return x * self.factor

    def backward(self, grad):
        return (grad * self.factor, )


class MatMul(Function):
    """
    Matrix product ``x @ y`` where y is 2-D and x has at least two dimensions
    (leading dimensions are batch dimensions).
    """
    name = 'matmul'

    def forward(self, x, y):
        if x.ndim < 2 or y.ndim != 2 or x.shape[-1] != y.shape[0]:
            raise ShapeError(self.name, x.shape, y.shape)
        self.save(x, y)
        return x @ y

    def backward(self, grad):
        x, y = self.saved
        gx = grad @ y.T
        gy = x.reshape(-1, x.shape[-1]).T @ grad.reshape(-1, grad.shape[-1])
        return gx, gy


class Conv2d(Function):
    """
    2-D cross-correlation of an (N, C, H, W) input with (O, C, k, k) weights,
    symmetric zero padding and floor-division output sizing.
    """
    name = 'conv2d'

    def forward(self, x, w, stride=1, padding=0):
        if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1] or w.shape[2] != w.shape[3]:
            raise ShapeError(self.name, x.shape, w.shape)
        k = w.shape[2]
        h, wd = x.shape[2] + 2*padding, x.shape[3] + 2*padding
        ho = (h - k)//stride + 1
        wo = (wd - k)//stride + 1
        if h < k or wd < k:
            raise ShapeError(self.name, x.shape, w.shape)
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
        cols = kernels.im2col(np.ascontiguousarray(xp), k, stride, ho, wo)
        self.save(cols, w, x.shape, stride, padding)
        out = np.tensordot(cols, w, axes=([3, 4, 5], [1, 2, 3]))
        return np.ascontiguousarray(out.transpose(0, 3, 1, 2))

    def backward(self, grad):
        cols, w, shape, stride, padding = self.saved
        gw = np.tensordot(grad, cols, axes=([0, 2, 3], [0, 1, 2]))
        gcols = np.tensordot(grad, w, axes=([1], [0]))
        h, wd = shape[2] + 2*padding, shape[3] + 2*padding
        gx = kernels.col2im(np.ascontiguousarray(gcols), h, wd, stride)
        gx = gx[:, :, padding:padding+shape[2], padding:padding+shape[3]]
        return gx, gw


class ReLU(Function):
    name = 'relu'

    def forward(self, x):
        self.save(x > 0)
        return np.maximum(x, 0)

    def backward(self, grad):
        mask, = self.saved
        return (grad * mask, )


class Tanh(Function):
    name = 'tanh'

    def forward(self, x):
        out = np.tanh(x)
        self.save(out)
        return out

    def backward(self, grad):
        out, = self.saved
        return (grad * (1 - out*out), )


class Softplus(Function):
    """log(1 + exp(x)), computed without overflow."""
    name = 'softplus'

    def forward(self, x):
        self.save(x)
        return np.logaddexp(0, x)

    def backward(self, grad):
        x, = self.saved
        return (grad * expit(x), )


class Exp(Function):
    name = 'exp'

    def forward(self, x):
        out = np.exp(x)
        self.save(out)
        return out

    def backward(self, grad):
        out, = self.saved
        return (grad * out, )


class Log(Function):
    name = 'log'

    def forward(self, x):
        bad = ~(x > 0)
        if bad.any():
            i = np.unravel_index(np.argmax(bad), x.shape) if x.ndim else ()
            raise DomainError(self.name, 'non-positive argument {!r} at {}'.format(x[i], i))
        self.save(x)
        return np.log(x)

    def backward(self, grad):
        x, = self.saved
        return (grad / x, )


class LogSumExp(Function):
    name = 'logsumexp'

    def forward(self, x, axis=-1, keepdims=False):
        out = logsumexp(x, axis=axis, keepdims=True)
        self.save(x, out, axis, keepdims)
        return out if keepdims else np.squeeze(out, axis=axis)

    def backward(self, grad):
        x, out, axis, keepdims = self.saved
        if not keepdims:
            grad = np.expand_dims(grad, axis)
        return (grad * np.exp(x - out), )


def _axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis, )
    return tuple(sorted(a % ndim for a in axis))


class Sum(Function):
    name = 'sum'

    def forward(self, x, axis=None, keepdims=False):
        self.save(x.shape, _axes(axis, x.ndim), keepdims)
        return np.sum(x, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        shape, axes, keepdims = self.saved
        if not keepdims:
            grad = np.expand_dims(grad, axes)
        return (np.broadcast_to(grad, shape).copy(), )


class Mean(Function):
    name = 'mean'

    def forward(self, x, axis=None, keepdims=False):
        axes = _axes(axis, x.ndim)
        self.save(x.shape, axes, keepdims, int(np.prod([x.shape[a] for a in axes])))
        return np.mean(x, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        shape, axes, keepdims, n = self.saved
        if not keepdims:
            grad = np.expand_dims(grad, axes)
        return (np.broadcast_to(grad, shape) / n, )


class PNorm(Function):
    """p-norm (p = 1 or 2) over the last axis; the gradient at 0 is 0."""
    name = 'pnorm'

    def forward(self, x, p=2):
        if p not in (1, 2):
            raise DomainError(self.name, 'p must be 1 or 2, got {!r}'.format(p))
        self.p = p
        if p == 1:
            self.save(x)
            return np.abs(x).sum(axis=-1)
        out = np.sqrt((x*x).sum(axis=-1))
        self.save(x, out)
        return out

    def backward(self, grad):
        g = grad[..., None]
        if self.p == 1:
            x, = self.saved
            return (g * np.sign(x), )
        x, out = self.saved
        n = out[..., None]
        unit = np.divide(x, n, out=np.zeros_like(x), where=n > 0)
        return (g * unit, )


class SquaredNorm(Function):
    name = 'sqnorm'

    def forward(self, x):
        self.save(x)
        return (x*x).sum(axis=-1)

    def backward(self, grad):
        x, = self.saved
        return (2 * grad[..., None] * x, )


class Reshape(Function):
    name = 'reshape'

    def forward(self, x, shape):
        self.save(x.shape)
        try:
            return np.reshape(x, shape)
        except ValueError:
            raise ShapeError(self.name, x.shape, shape)

    def backward(self, grad):
        shape, = self.saved
        return (np.reshape(grad, shape), )


class Transpose(Function):
    name = 'transpose'

    def forward(self, x, axes=None):
        self.axes = axes
        return np.transpose(x, axes)

    def backward(self, grad):
        if self.axes is None:
            return (np.transpose(grad), )
        return (np.transpose(grad, np.argsort(self.axes)), )


class GetItem(Function):
    name = 'getitem'

    def forward(self, x, index):
        self.save(x.shape, x.dtype, index)
        return x[index]

    def backward(self, grad):
        shape, dtype, index = self.saved
        out = np.zeros(shape, dtype=dtype)
        np.add.at(out, index, grad)
        return (out, )


class Stack(Function):
    name = 'stack'

    def forward(self, *arrays, axis=0):
        shapes = set(a.shape for a in arrays)
        if len(shapes) != 1:
            raise ShapeError(self.name, *[a.shape for a in arrays])
        self.axis = axis
        return np.stack(arrays, axis=axis)

    def backward(self, grad):
        return tuple(np.take(grad, i, axis=self.axis) for i in range(grad.shape[self.axis]))


def conv2d(x, w, stride=1, padding=0):
    """Functional form of :class:`~imoc.core.tensor.Conv2d`."""
    return Conv2d.apply(x, w, stride=stride, padding=padding)


def stack(tensors, axis=0):
    """Stack same-shape tensors along a new axis."""
    return Stack.apply(*tensors, axis=axis)


def as_tensor(x, dtype=None):
    """Wrap a value as a constant tensor (no-op for tensors of the right dtype)."""
    if isinstance(x, Tensor) and (dtype is None or x.dtype == dtype):
        return x
    if isinstance(x, Tensor):
        return x.astype(dtype)
    return Tensor(x, dtype=dtype)


def backward(root, leaves=()):
    """
    Reverse pass: accumulate d(root)/d(leaf) into the ``grad`` of every
    leaf tensor that requires gradients.

    Args:
        root (Tensor): Scalar output
        leaves (iterable): Tensors that must end up with a gradient; any that
            are not on a path to root receive zeros

    Raises:
        GradientError: If root is not a scalar
    """
    if root.data.size != 1:
        raise GradientError('Reverse pass requires a scalar root, got shape {}.'.format(root.shape))
    graph = nx.DiGraph()
    graph.add_node(root)
    stack_ = [root]
    while stack_:
        node = stack_.pop()
        if node._ctx is None:
            continue
        for parent in node._ctx.parents:
            if parent.requires_grad:
                if parent not in graph:
                    stack_.append(parent)
                graph.add_edge(node, parent)
    grads = {root: np.ones_like(root.data)}
    for node in nx.topological_sort(graph):
        grad = grads.pop(node, None)
        if grad is None:
            continue
        if node._ctx is None:
            if node.requires_grad:
                node.grad = grad.copy() if node.grad is None else node.grad + grad
            continue
        for parent, pgrad in zip(node._ctx.parents, node._ctx.backward(grad)):
            if pgrad is None or not parent.requires_grad:
                continue
            pgrad = np.asarray(pgrad, dtype=parent.dtype)
            grads[parent] = grads[parent] + pgrad if parent in grads else pgrad
    for leaf in leaves:
        if leaf.grad is None:
            leaf.grad = np.zeros_like(leaf.data)
