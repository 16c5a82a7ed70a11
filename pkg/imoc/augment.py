# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
View Augmentation
###################################
Stochastic views for contrastive training. Images (C, H, W) in [-1, 1] go
through a random resized crop, a horizontal flip, color jitter (brightness,
contrast, saturation, hue) and random grayscale; feature vectors receive
Gaussian jitter and random feature masking. Every view is clamped to [-1, 1].

Randomness comes from a per-sample generator (see
:func:`~imoc.util.utility.sample_stream`), so views depend only on
(seed, epoch, sample index), never on batch composition.

.. code-block:: python

    policy = AugmentPolicy()
    rng = sample_stream(seed=0, epoch=3, index=17)
    v1, v2 = make_views(x, rng, policy)
"""
import numpy as np
from scipy import ndimage
from imoc.typed import Typed, TypedClass
from imoc.core.error import ShapeError, ConfigError
from imoc.util.utility import sample_stream


_prob = lambda v: 0 <= v <= 1
_nonneg = lambda v: v >= 0
# RGB <-> YIQ, used for hue rotation and luminance
_YIQ = np.array([[0.299, 0.587, 0.114],
                 [0.596, -0.274, -0.322],
                 [0.211, -0.523, 0.312]])
_RGB = np.linalg.inv(_YIQ)


class AugmentPolicy(TypedClass):
    """
    Augmentation parameters; defaults are the common contrastive settings.
    """
    crop_min = Typed(float, default=0.3, check=lambda v: 0 < v <= 1, doc="Smallest crop area fraction")
    crop_max = Typed(float, default=1.0, check=lambda v: 0 < v <= 1, doc="Largest crop area fraction")
    flip_p = Typed(float, default=0.5, check=_prob, doc="Horizontal flip probability")
    jitter_p = Typed(float, default=0.8, check=_prob, doc="Color jitter probability")
    brightness = Typed(float, default=0.4, check=_nonneg)
    contrast = Typed(float, default=0.4, check=_nonneg)
    saturation = Typed(float, default=0.4, check=_nonneg)
    hue = Typed(float, default=0.1, check=lambda v: 0 <= v <= 0.5)
    grayscale_p = Typed(float, default=0.2, check=_prob, doc="Random grayscale probability (RGB only)")
    noise_std = Typed(float, default=0.1, check=_nonneg, doc="Feature jitter (vector data)")
    mask_p = Typed(float, default=0.1, check=_prob, doc="Feature masking probability (vector data)")

    @classmethod
    def identity(cls):
        """Policy whose views equal the input."""
        return cls(crop_min=1.0, crop_max=1.0, flip_p=0.0, jitter_p=0.0, brightness=0.0,
                   contrast=0.0, saturation=0.0, hue=0.0, grayscale_p=0.0, noise_std=0.0,
                   mask_p=0.0)

    def for_grayscale(self):
        """Crop, flip and brightness/contrast jitter only."""
        return self.replace(saturation=0.0, hue=0.0, grayscale_p=0.0)

    def __init__(self, **kwargs):
        super(AugmentPolicy, self).__init__(**kwargs)
        if self.crop_min > self.crop_max:
            raise ConfigError('augment.crop_min', 'exceeds augment.crop_max')


def _resized_crop(img, rng, policy):
    c, h, w = img.shape
    area = rng.uniform(policy.crop_min, policy.crop_max)
    ratio = np.exp(rng.uniform(np.log(3/4), np.log(4/3)))
    ch = min(h, max(1.0, np.sqrt(area*ratio) * h))
    cw = min(w, max(1.0, np.sqrt(area/ratio) * w))
    top = rng.uniform(0, h - ch)
    left = rng.uniform(0, w - cw)
    rows = top + (np.arange(h) + 0.5) * ch / h - 0.5
    cols = left + (np.arange(w) + 0.5) * cw / w - 0.5
    rr, cc = np.meshgrid(rows, cols, indexing='ij')
    return np.stack([ndimage.map_coordinates(img[i], [rr, cc], order=1, mode='nearest')
                     for i in range(c)])


def _luminance(img):
    if img.shape[0] == 3:
        return np.tensordot(_YIQ[0], img, axes=1)[None]
    return img.mean(axis=0, keepdims=True)


def _jitter(img, rng, policy):
    b = rng.uniform(1 - policy.brightness, 1 + policy.brightness)
    c = rng.uniform(1 - policy.contrast, 1 + policy.contrast)
    s = rng.uniform(1 - policy.saturation, 1 + policy.saturation)
    hue = rng.uniform(-policy.hue, policy.hue)
    img = np.clip(img * b, 0, 1)
    img = np.clip((img - _luminance(img).mean()) * c + _luminance(img).mean(), 0, 1)
    if img.shape[0] == 3:
        gray = _luminance(img)
        img = np.clip(gray + (img - gray) * s, 0, 1)
        if hue:
            theta = 2*np.pi*hue
            rot = np.array([[1, 0, 0],
                            [0, np.cos(theta), -np.sin(theta)],
                            [0, np.sin(theta), np.cos(theta)]])
            img = np.clip(np.tensordot(_RGB @ rot @ _YIQ, img, axes=1), 0, 1)
    return img


def augment_image(x, rng, policy):
    """One random view of a (C, H, W) image in [-1, 1]."""
    x = np.asarray(x)
    img = (x.astype(np.float64) + 1) / 2
    changed = False
    if policy.crop_min < 1:
        img, changed = _resized_crop(img, rng, policy), True
    if rng.uniform() < policy.flip_p:
        img, changed = img[:, :, ::-1], True
    if rng.uniform() < policy.jitter_p:
        img, changed = _jitter(img, rng, policy), True
    if img.shape[0] == 3 and rng.uniform() < policy.grayscale_p:
        img, changed = np.repeat(_luminance(img), 3, axis=0), True
    if not changed:
        return x.copy()
    return np.clip(2*img - 1, -1, 1).astype(np.asarray(x).dtype)


def augment_vector(x, rng, policy):
    """One random view of a feature vector in [-1, 1]."""
    x = np.asarray(x)
    v = x.astype(np.float64)
    if policy.noise_std > 0:
        v = v + rng.normal(0, policy.noise_std, size=v.shape)
    if policy.mask_p > 0:
        v = np.where(rng.uniform(size=v.shape) < policy.mask_p, 0.0, v)
    return np.clip(v, -1, 1).astype(x.dtype)


def augment(x, rng, policy):
    """One random view of an image or feature vector."""
    x = np.asarray(x)
    if x.ndim == 3:
        return augment_image(x, rng, policy)
    if x.ndim == 1:
        return augment_vector(x, rng, policy)
    raise ShapeError('augment', x.shape)


def make_views(x, rng, policy):
    """
    Two independent random views of one sample.

    Args:
        x (array): (C, H, W) image or (d, ) vector in [-1, 1]
        rng (Generator): The sample's stream
        policy (AugmentPolicy): Parameters

    Returns:
        views (tuple): Two arrays shaped like x
    """
    return augment(x, rng, policy), augment(x, rng, policy)


def paired_views(X, indices, seed, epoch, policy, purpose='views'):
    """
    Build a (2N, ...) paired-view batch: rows 2k and 2k+1 are the views of
    sample ``indices[k]``.
    """
    out = np.empty((2*len(indices), ) + X.shape[1:], dtype=X.dtype)
    for k, index in enumerate(indices):
        rng = sample_stream(seed, epoch, index, purpose)
        out[2*k], out[2*k + 1] = make_views(X[index], rng, policy)
    return out


def expand_grayscale(x):
    """
    Repeat a single channel three times: (1, H, W) -> (3, H, W), or
    (N, 1, H, W) -> (N, 3, H, W).
    """
    x = np.asarray(x)
    axis = x.ndim - 3
    if x.ndim not in (3, 4) or x.shape[axis] != 1:
        raise ShapeError('expand_grayscale', x.shape)
    return np.repeat(x, 3, axis=axis)
