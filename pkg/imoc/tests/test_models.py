# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Tests for :mod:`~imoc.models`
##############################
"""
import numpy as np
import pytest
from unittest import TestCase
from imoc.core.error import EncoderError, InputRangeError, ShapeError, ConfigError
from imoc.core.tensor import backward
from imoc.models import EncoderConfig, build_encoder, plan_encoder, encode, project_local
from imoc.estimators import SimilarityConfig, total_loss_base, total_loss_extension


SMALL = dict(variant='small', input_shape=(3, 32, 32), ndf=4, nrkhs=8, ndepth=1)


@pytest.fixture(scope='module')
def small():
    return build_encoder(EncoderConfig(projection=True, **SMALL), seed=1)


@pytest.fixture(scope='module')
def images():
    return np.random.default_rng(0).uniform(-1, 1, size=(2, 3, 32, 32)).astype(np.float32)


def test_small_shapes(small, images):
    out = encode(small, images)
    assert out.z_global.shape == (2, 8)
    assert out.z_local.shape == (2, 16, 5, 5)
    assert project_local(small, out.z_local).shape == (2, 8, 5, 5)
    assert out.z_global.dtype == np.float32


def test_extension_gradients_reach_every_parameter():
    enc = build_encoder(EncoderConfig(projection=True, **SMALL), seed=2, precision=64)
    x = np.random.default_rng(5).uniform(-1, 1, size=(4, 3, 32, 32))
    out = encode(enc, x)
    local = project_local(enc, out.z_local)
    local = local.reshape(local.shape[0], local.shape[1], -1)
    loss = total_loss_extension(out.z_global, local, 20.0, 1, SimilarityConfig(c1=8)).total
    backward(loss, enc.parameters())
    for name, p in enc.named_parameters():
        assert np.abs(p.grad).sum() > 0, name


def test_plan_matches_encoder(small):
    plan = small.plan
    assert plan['params'].sum() == small.parameter_count()
    local = plan.loc[plan['role'] == 'local', 'out_shape'].iloc[0]
    assert local == (16, 5, 5)
    assert plan.loc[plan['role'] == 'global', 'out_shape'].iloc[0] == (8, 1, 1)


def test_too_small_input():
    cfg = EncoderConfig(**dict(SMALL, input_shape=(3, 8, 8)))
    with pytest.raises(EncoderError) as ctx:
        plan_encoder(cfg)
    assert ctx.value.layer == 'block4'


def test_big_needs_image_input():
    with pytest.raises(EncoderError):
        plan_encoder(EncoderConfig(variant='big', input_shape=(16, )))


class TinyEncoderTest(TestCase):
    def setUp(self):
        self.cfg = EncoderConfig(variant='tiny', input_shape=(16, ))
        self.x = np.random.default_rng(2).uniform(-1, 1, size=(5, 16))

    def test_shapes(self):
        enc = build_encoder(self.cfg)
        out = encode(enc, self.x)
        self.assertEqual(out.z_global.shape, (5, 32))
        self.assertEqual(out.z_local.shape, (5, 32, 1, 1))
        self.assertTrue(np.array_equal(out.z_local.data[:, :, 0, 0], out.z_global.data))
        self.assertEqual(enc.latent_dim, 32)

    def test_deterministic_init(self):
        a, b = build_encoder(self.cfg, seed=4), build_encoder(self.cfg, seed=4)
        c = build_encoder(self.cfg, seed=5)
        for (na, pa), (nb, pb), (_, pc) in zip(a.named_parameters(), b.named_parameters(),
                                               c.named_parameters()):
            self.assertEqual(na, nb)
            self.assertTrue(np.array_equal(pa.data, pb.data))
        self.assertFalse(np.array_equal(a.parameters()[0].data, c.parameters()[0].data))

    def test_precision(self):
        enc = build_encoder(self.cfg, precision=64)
        self.assertEqual(enc.dtype, np.float64)
        self.assertEqual(encode(enc, self.x).z_global.dtype, np.float64)

    def test_range_and_shape(self):
        enc = build_encoder(self.cfg)
        with self.assertRaises(InputRangeError):
            encode(enc, self.x * 1.5 + 0.6)
        with self.assertRaises(ShapeError):
            encode(enc, self.x[:, :8])

    def test_no_projection_head(self):
        enc = build_encoder(self.cfg)
        with self.assertRaises(EncoderError):
            project_local(enc, encode(enc, self.x).z_local)

    def test_state_dict(self):
        a, b = build_encoder(self.cfg, seed=0), build_encoder(self.cfg, seed=9)
        b.load_state_dict(a.state_dict())
        self.assertTrue(np.array_equal(encode(a, self.x).z_global.data, encode(b, self.x).z_global.data))
        state = a.state_dict()
        state.pop('fc0.bias')
        with self.assertRaises(KeyError):
            b.load_state_dict(state)

    def test_gradients_reach_every_parameter(self):
        enc = build_encoder(self.cfg, precision=64)
        x = np.random.default_rng(3).uniform(-1, 1, size=(6, 16))
        loss = total_loss_base(encode(enc, x).z_global, 20.0, 1, SimilarityConfig(c1=32)).total
        backward(loss, enc.parameters())
        for name, p in enc.named_parameters():
            self.assertEqual(p.grad.shape, p.shape, name)
            self.assertGreater(np.abs(p.grad).sum(), 0, name)

    def test_config_validation(self):
        with self.assertRaises(ConfigError):
            EncoderConfig(variant='huge')
        self.assertEqual(EncoderConfig(variant='small').widths, (128, 1024, 10))
        self.assertEqual(EncoderConfig(variant='big', ndf=16).widths, (16, 1536, 8))
