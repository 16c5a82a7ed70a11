# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Encoders
###################################
Encoder networks producing a global feature vector and a local feature map,
plus the nonlinear projection head applied to local features by the extension
model.

Three variants are available:

- ``tiny``: flatten, affine 256, relu, affine 128, relu, affine 32. The local
  map is the global vector viewed as a 1x1 map.
- ``small``: conv stem followed by six residual blocks (ndf=128, nrkhs=1024,
  ndepth=10 by default); local features come from the fourth block.
- ``big``: two conv stems and six residual blocks (ndf=192, nrkhs=1536,
  ndepth=8 by default).

A residual block ``(in, out, kernel, stride, depth)`` has a branch of
``max(1, depth)`` conv+relu sublayers: the first uses the block's kernel and
stride without padding, the rest are 3x3 convolutions with padding 1. The
shortcut crops the input to the branch's receptive-field grid and applies a
strided 1x1 convolution whenever channels or stride change. Global features
are the spatial mean of the last block.

.. code-block:: python

    cfg = EncoderConfig(variant='small', input_shape=(3, 32, 32), ndf=8, nrkhs=16, ndepth=1)
    plan_encoder(cfg)                 # per-layer output shapes, no weights allocated
    enc = build_encoder(cfg, seed=0)
    out = encode(enc, x)              # out.z_global: (N, 16), out.z_local: (N, 32, 5, 5)
"""
import logging
import numpy as np
from collections import OrderedDict
from imoc.typed import Typed, TypedClass
from imoc.core.error import EncoderError, InputRangeError, ShapeError
from imoc.core.tensor import Tensor, conv2d, as_tensor
from imoc.core.numerical import DataFrame


RANGE_TOL = 1e-6
TINY_WIDTHS = (256, 128, 32)
VARIANT_DEFAULTS = {
    'tiny': dict(ndf=0, nrkhs=TINY_WIDTHS[-1], ndepth=0),
    'small': dict(ndf=128, nrkhs=1024, ndepth=10),
    'big': dict(ndf=192, nrkhs=1536, ndepth=8),
}


def _positive_ints(shape):
    return len(shape) in (1, 3) and all(int(s) > 0 for s in shape)


class EncoderConfig(TypedClass):
    """
    Encoder architecture. Widths left unset take the variant's defaults.
    """
    variant = Typed(str, default='tiny', check=lambda v: v in VARIANT_DEFAULTS,
                    doc="tiny | small | big")
    input_shape = Typed(tuple, default=(16, ), check=_positive_ints,
                        doc="(features, ) or (channels, height, width)")
    ndf = Typed(int, check=lambda v: v >= 0, allow_none=True, doc="Base width")
    nrkhs = Typed(int, check=lambda v: v > 0, allow_none=True, doc="Global feature dimension")
    ndepth = Typed(int, check=lambda v: v >= 0, allow_none=True, doc="Sublayers per residual block")
    projection = Typed(bool, default=False, doc="Build the local projection head")

    @property
    def widths(self):
        """(ndf, nrkhs, ndepth) with variant defaults filled in."""
        defaults = VARIANT_DEFAULTS[self.variant]
        if self.variant == 'tiny':
            return 0, defaults['nrkhs'], 0
        return tuple(defaults[k] if getattr(self, k) is None else getattr(self, k)
                     for k in ('ndf', 'nrkhs', 'ndepth'))

    @property
    def latent_dim(self):
        return self.widths[1]


class EncoderOutput(object):
    """
    Attributes:
        z_global (Tensor): (N, nrkhs) global features
        z_local (Tensor): (N, C_l, h, w) local feature map
    """
    def __init__(self, z_global, z_local):
        self.z_global = z_global
        self.z_local = z_local


class Module(object):
    """
    Container of parameter tensors and child modules; iteration order is
    registration order so parameter names are stable across runs.
    """
    @property
    def log(self):
        name = '.'.join([self.__module__,
                         self.__class__.__name__])
        return logging.getLogger(name)

    def register(self, name, value):
        if isinstance(value, Module):
            self._children[name] = value
        else:
            self._params[name] = value
        return value

    def named_parameters(self, prefix=''):
        for name, p in self._params.items():
            yield prefix + name, p
        for name, child in self._children.items():
            for item in child.named_parameters(prefix + name + '.'):
                yield item

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def state_dict(self):
        """Ordered mapping of parameter name to array."""
        return OrderedDict((name, p.data) for name, p in self.named_parameters())

    def load_state_dict(self, state):
        """Copy arrays into parameters (names and shapes must match)."""
        own = OrderedDict(self.named_parameters())
        missing = set(own).symmetric_difference(state)
        if missing:
            raise KeyError("Parameter names differ: {}".format(sorted(missing)))
        for name, p in own.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ShapeError('load_state_dict', p.shape, value.shape)
            p.data = value.astype(p.dtype).copy()

    def parameter_count(self):
        return int(sum(p.size for p in self.parameters()))

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def __init__(self):
        self._params = OrderedDict()
        self._children = OrderedDict()


def _uniform(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True)


class Linear(Module):
    """Affine map x @ W + b with fan-in uniform initialization."""
    def forward(self, x):
        return x @ self.weight + self.bias

    def __init__(self, n_in, n_out, rng, dtype=np.float32, zero_bias=False):
        super(Linear, self).__init__()
        self.weight = self.register('weight', _uniform(rng, (n_in, n_out), n_in, dtype))
        bias = (Tensor(np.zeros(n_out, dtype=dtype), requires_grad=True) if zero_bias
                else _uniform(rng, (n_out, ), n_in, dtype))
        self.bias = self.register('bias', bias)


class Conv(Module):
    """2-D convolution with bias."""
    def forward(self, x):
        out = conv2d(x, self.weight, self.stride, self.padding)
        return out + self.bias.reshape(1, -1, 1, 1)

    def __init__(self, n_in, n_out, kernel, stride, padding, rng, dtype=np.float32, zero_bias=False):
        super(Conv, self).__init__()
        fan_in = n_in * kernel * kernel
        self.stride = stride
        self.padding = padding
        self.weight = self.register('weight', _uniform(rng, (n_out, n_in, kernel, kernel), fan_in, dtype))
        bias = (Tensor(np.zeros(n_out, dtype=dtype), requires_grad=True) if zero_bias
                else _uniform(rng, (n_out, ), fan_in, dtype))
        self.bias = self.register('bias', bias)


def _conv_out(size, kernel, stride, padding):
    return (size + 2*padding - kernel)//stride + 1


class ResBlock(Module):
    """Residual block; see the module docstring for the layout."""
    def forward(self, x):
        h = x
        for i, conv in enumerate(self.branch):
            h = conv(h)
            if i < len(self.branch) - 1:
                h = h.relu()
        ho, wo = h.shape[2], h.shape[3]
        off = (self.kernel - 1)//2
        short = x
        if (ho, wo) != x.shape[2:] or self.stride > 1:
            rows = slice(off, off + (ho - 1)*self.stride + 1)
            cols = slice(off, off + (wo - 1)*self.stride + 1)
            short = x[:, :, rows, cols]
        if self.shortcut is not None:
            short = self.shortcut(short)
        return (h + short).relu()

    def __init__(self, n_in, n_out, kernel, stride, depth, rng, dtype=np.float32):
        super(ResBlock, self).__init__()
        self.kernel = kernel
        self.stride = stride
        self.branch = []
        for i in range(max(1, depth)):
            conv = (Conv(n_in, n_out, kernel, stride, 0, rng, dtype) if i == 0
                    else Conv(n_out, n_out, 3, 1, 1, rng, dtype))
            self.branch.append(self.register('branch{}'.format(i), conv))
        self.shortcut = None
        if n_in != n_out or stride > 1:
            self.shortcut = self.register('shortcut', Conv(n_in, n_out, 1, stride, 0, rng, dtype))


def _layer_specs(cfg):
    """(name, kind, n_in, n_out, kernel, stride, pad_or_depth, role) per layer."""
    ndf, nrkhs, nd = cfg.widths
    c = cfg.input_shape[0]
    if cfg.variant == 'small':
        return [('conv0', 'conv', c, ndf, 3, 1, 0, None),
                ('block1', 'res', ndf, ndf, 1, 1, 0, None),
                ('block2', 'res', ndf, 2*ndf, 4, 2, nd, None),
                ('block3', 'res', 2*ndf, 4*ndf, 2, 2, nd, None),
                ('block4', 'res', 4*ndf, 4*ndf, 3, 1, nd, 'local'),
                ('block5', 'res', 4*ndf, 4*ndf, 3, 1, nd, None),
                ('block6', 'res', 4*ndf, nrkhs, 3, 1, 1, 'global')]
    return [('conv0', 'conv', c, ndf, 5, 2, 2, None),
            ('conv1', 'conv', ndf, ndf, 3, 1, 0, None),
            ('block1', 'res', ndf, 2*ndf, 4, 2, nd, None),
            ('block2', 'res', 2*ndf, 4*ndf, 4, 2, nd, None),
            ('block3', 'res', 4*ndf, 8*ndf, 2, 2, nd, None),
            ('block4', 'res', 8*ndf, 8*ndf, 3, 1, nd, 'local'),
            ('block5', 'res', 8*ndf, 8*ndf, 3, 1, nd, None),
            ('block6', 'res', 8*ndf, nrkhs, 3, 1, 1, 'global')]


def _conv_params(n_in, n_out, kernel):
    return n_out*n_in*kernel*kernel + n_out


class EncoderPlan(DataFrame):
    """Per-layer output shapes and parameter counts (no weights allocated)."""
    _schema = 'plan'
    _columns = ['layer', 'out_shape', 'params', 'role']


def plan_encoder(cfg):
    """
    Layer-by-layer output shapes and parameter counts for an encoder config.

    Returns:
        plan (DataFrame): Columns layer, out_shape, params, role

    Raises:
        EncoderError: If the input is too small for a layer (names the layer)
    """
    ndf, nrkhs, nd = cfg.widths
    rows = []
    if cfg.variant == 'tiny':
        n_in = int(np.prod(cfg.input_shape))
        for i, width in enumerate(TINY_WIDTHS):
            role = 'global' if i == len(TINY_WIDTHS) - 1 else None
            rows.append(('fc{}'.format(i), (width, ), n_in*width + width, role))
            n_in = width
    else:
        if len(cfg.input_shape) != 3:
            raise EncoderError('input', 'variant {} needs (channels, height, width) input'.format(cfg.variant))
        _, h, w = cfg.input_shape
        for name, kind, n_in, n_out, k, s, extra, role in _layer_specs(cfg):
            pad = extra if kind == 'conv' else 0
            if h + 2*pad < k or w + 2*pad < k:
                raise EncoderError(name, 'input {}x{} smaller than kernel {}'.format(h, w, k))
            h, w = _conv_out(h, k, s, pad), _conv_out(w, k, s, pad)
            if kind == 'conv':
                params = _conv_params(n_in, n_out, k)
            else:
                params = _conv_params(n_in, n_out, k)
                params += (max(1, extra) - 1) * _conv_params(n_out, n_out, 3)
                if n_in != n_out or s > 1:
                    params += _conv_params(n_in, n_out, 1)
            rows.append((name, (n_out, h, w), params, role))
        rows.append(('pool', (nrkhs, ), 0, None))
    if cfg.projection:
        local = [r[1] for r in rows if r[3] == 'local']
        d_l, h, w = local[0] if local else (nrkhs, 1, 1)
        params = _conv_params(d_l, d_l, 1) + _conv_params(d_l, nrkhs, 1)
        rows.append(('projection', (nrkhs, h, w), params, None))
    return EncoderPlan(rows, columns=['layer', 'out_shape', 'params', 'role'])


class ProjectionHead(Module):
    """Per-location map: 1x1 conv, relu, 1x1 conv to nrkhs (zero biases)."""
    def forward(self, z_local):
        return self.conv2(self.conv1(z_local).relu())

    def __init__(self, d_local, nrkhs, rng, dtype=np.float32):
        super(ProjectionHead, self).__init__()
        self.conv1 = self.register('conv1', Conv(d_local, d_local, 1, 1, 0, rng, dtype, zero_bias=True))
        self.conv2 = self.register('conv2', Conv(d_local, nrkhs, 1, 1, 0, rng, dtype, zero_bias=True))


class Encoder(Module):
    """
    Encoder for one :class:`~imoc.models.EncoderConfig`; build with
    :func:`~imoc.models.build_encoder`.
    """
    @property
    def dtype(self):
        return self.parameters()[0].dtype

    @property
    def latent_dim(self):
        return self.cfg.latent_dim

    def forward(self, x):
        x = as_tensor(x, self.dtype)
        if tuple(x.shape[1:]) != tuple(self.cfg.input_shape):
            raise ShapeError('encode', x.shape, (None, ) + tuple(self.cfg.input_shape))
        if self.cfg.variant == 'tiny':
            h = x.reshape(x.shape[0], -1)
            for i, layer in enumerate(self.layers):
                h = layer(h)
                if i < len(self.layers) - 1:
                    h = h.relu()
            return EncoderOutput(h, h.reshape(h.shape[0], h.shape[1], 1, 1))
        h, local = x, None
        for (name, kind, *_), layer in zip(self.specs, self.layers):
            h = layer(h)
            if kind == 'conv':
                h = h.relu()
            if name == self.local_layer:
                local = h
        return EncoderOutput(h.mean(axis=(2, 3)), local)

    def project_local(self, z_local):
        """Apply the projection head to a (N, C_l, h, w) local map."""
        if self.head is None:
            raise EncoderError('projection', 'encoder was built without a projection head')
        return self.head(as_tensor(z_local, self.dtype))

    def __repr__(self):
        return 'Encoder({}, params={})'.format(self.cfg.variant, self.parameter_count())

    def __init__(self, cfg, seed=0, dtype=np.float32):
        super(Encoder, self).__init__()
        self.cfg = cfg
        self.plan = plan_encoder(cfg)
        rng = np.random.default_rng(seed)
        self.layers = []
        self.specs = []
        self.local_layer = None
        if cfg.variant == 'tiny':
            n_in = int(np.prod(cfg.input_shape))
            for i, width in enumerate(TINY_WIDTHS):
                self.layers.append(self.register('fc{}'.format(i), Linear(n_in, width, rng, dtype)))
                n_in = width
            d_local = TINY_WIDTHS[-1]
        else:
            self.specs = _layer_specs(cfg)
            for name, kind, n_in, n_out, k, s, extra, role in self.specs:
                if kind == 'conv':
                    layer = Conv(n_in, n_out, k, s, extra, rng, dtype)
                else:
                    layer = ResBlock(n_in, n_out, k, s, extra, rng, dtype)
                self.layers.append(self.register(name, layer))
                if role == 'local':
                    self.local_layer = name
                    d_local = n_out
        self.head = None
        if cfg.projection:
            self.head = self.register('head', ProjectionHead(d_local, cfg.latent_dim, rng, dtype))
        self.log.debug('built {}'.format(self))


def build_encoder(cfg, seed=0, precision=32):
    """
    Deterministically initialized encoder.

    Args:
        cfg (EncoderConfig): Architecture
        seed (int): Initialization seed
        precision (int): 32 or 64

    Raises:
        EncoderError: If the input shape cannot pass through the conv stack
    """
    dtype = np.float64 if int(precision) == 64 else np.float32
    return Encoder(cfg, seed, dtype)


def check_range(x, tol=RANGE_TOL):
    """Reject inputs outside the normalized [-1, 1] range."""
    data = x.data if isinstance(x, Tensor) else np.asarray(x)
    if data.size and (data.min() < -1 - tol or data.max() > 1 + tol):
        raise InputRangeError('Encoder input outside [-1, 1]: min {:.6g}, max {:.6g}.'.format(
            data.min(), data.max()))


def encode(encoder, batch):
    """
    Encode a normalized batch.

    Args:
        encoder (Encoder): Model
        batch (array): (N, ...) inputs in [-1, 1]

    Returns:
        out (EncoderOutput): Global and local features
    """
    check_range(batch)
    return encoder(batch)


def project_local(encoder, z_local):
    """Projected local features, (N, nrkhs, h, w)."""
    return encoder.project_local(z_local)
