# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Tests for :mod:`~imoc.augment`
###############################
"""
import numpy as np
import pytest
from unittest import TestCase
from imoc.core.error import ConfigError, ShapeError
from imoc.augment import (AugmentPolicy, augment, make_views, paired_views, expand_grayscale)
from imoc.util.utility import sample_stream


class ImageViewTest(TestCase):
    def setUp(self):
        rng = np.random.default_rng(0)
        self.images = rng.uniform(-1, 1, size=(6, 3, 12, 12)).astype(np.float32)
        self.policy = AugmentPolicy()

    def test_range_shape_dtype(self):
        for i in range(6):
            v1, v2 = make_views(self.images[i], sample_stream(0, 0, i), self.policy)
            for v in (v1, v2):
                self.assertEqual(v.shape, (3, 12, 12))
                self.assertEqual(v.dtype, np.float32)
                self.assertTrue(np.all(np.abs(v) <= 1))
            self.assertFalse(np.array_equal(v1, v2))

    def test_identity(self):
        views = paired_views(self.images, [0, 4], 3, 1, AugmentPolicy.identity())
        self.assertTrue(np.array_equal(views[0], self.images[0]))
        self.assertTrue(np.array_equal(views[3], self.images[4]))

    def test_reproducible(self):
        a = paired_views(self.images, [1, 2], 7, 3, self.policy)
        b = paired_views(self.images, [1, 2], 7, 3, self.policy)
        c = paired_views(self.images, [1, 2], 7, 4, self.policy)
        self.assertTrue(np.array_equal(a, b))
        self.assertFalse(np.array_equal(a, c))

    def test_independent_of_batch(self):
        full = paired_views(self.images, [3, 5], 2, 0, self.policy)
        alone = paired_views(self.images, [5], 2, 0, self.policy)
        self.assertTrue(np.array_equal(full[2:], alone))

    def test_grayscale_image(self):
        gray = self.images[:, :1]
        policy = self.policy.for_grayscale()
        self.assertEqual(policy.hue, 0.0)
        v = augment(gray[0], sample_stream(0, 0, 0), policy)
        self.assertEqual(v.shape, (1, 12, 12))


def test_default_views_differ():
    rng = np.random.default_rng(4)
    images = rng.uniform(-1, 1, size=(1000, 3, 12, 12)).astype(np.float32)
    views = paired_views(images, np.arange(1000), 0, 1, AugmentPolicy())
    differ = [not np.array_equal(views[2*k], views[2*k + 1]) for k in range(1000)]
    assert np.mean(differ) >= 0.99


def test_vector_views():
    x = np.linspace(-1, 1, 16)
    policy = AugmentPolicy(noise_std=0.5, mask_p=0.3)
    v = augment(x, sample_stream(1, 0, 0), policy)
    assert v.shape == x.shape and np.all(np.abs(v) <= 1)
    assert np.array_equal(augment(x, sample_stream(1, 0, 0), AugmentPolicy.identity()), x)


def test_policy_validation():
    with pytest.raises(ConfigError) as ctx:
        AugmentPolicy(crop_min=0.9, crop_max=0.5)
    assert ctx.value.key == 'augment.crop_min'
    with pytest.raises(ConfigError):
        AugmentPolicy(flip_p=1.5)


def test_bad_shapes():
    with pytest.raises(ShapeError):
        augment(np.zeros((4, 4)), sample_stream(0, 0, 0), AugmentPolicy())
    with pytest.raises(ShapeError):
        expand_grayscale(np.zeros((3, 4, 4)))
    assert expand_grayscale(np.zeros((2, 1, 4, 4))).shape == (2, 3, 4, 4)
    assert expand_grayscale(np.zeros((1, 4, 4))).shape == (3, 4, 4)
