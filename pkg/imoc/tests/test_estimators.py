# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Tests for :mod:`~imoc.estimators`
##################################
"""
import numpy as np
import sympy as sy
from unittest import TestCase
from scipy.special import logsumexp
from imoc.core.error import DomainError, ShapeError, ConfigError
from imoc.core.tensor import Tensor
from imoc.core.gradcheck import finite_difference_check
from imoc.estimators import (SimilarityConfig, clamp_similarity, nce_pair_loss, nce_from_similarity,
                             jsd_pair_loss, jsd_mi_loss, nce_map_loss, interleave_maps, entropy_regularizer,
                             total_loss_base, total_loss_extension)


def _reference_nce(Z, cfg):
    """Row by row InfoNCE with numpy/scipy."""
    S = cfg.c2 * np.tanh((Z @ Z.T) / (cfg.c1 * cfg.c2))
    m = len(Z)
    losses = []
    for i in range(m):
        others = [S[i, j] for j in range(m) if j != i]
        losses.append(logsumexp(others) - S[i, i ^ 1])
    return np.mean(losses)


class ClampTest(TestCase):
    def test_symbolic_value(self):
        cfg = SimilarityConfig(c1=2)
        expected = float(20*sy.tanh(sy.Rational(25, 40)))
        self.assertAlmostEqual(float(clamp_similarity(25.0, cfg)), expected, places=12)

    def test_bounded_and_monotone(self):
        cfg = SimilarityConfig(c1=4)
        s = np.linspace(-1e4, 1e4, 1001)
        out = clamp_similarity(s, cfg)
        self.assertTrue(np.all(np.abs(out) <= cfg.c2))
        self.assertTrue(np.all(np.diff(out) >= 0))

    def test_tensor_matches_array(self):
        cfg = SimilarityConfig(c1=3, c2=5)
        s = np.array([-30.0, 0.0, 2.5])
        self.assertTrue(np.allclose(clamp_similarity(Tensor(s), cfg).data, clamp_similarity(s, cfg)))

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            SimilarityConfig(c1=0)

    def test_cubic_remainder(self):
        rng = np.random.default_rng(7)
        for c1 in (1.0, 0.5, 32.0):
            cfg = SimilarityConfig(c1=c1)
            s = rng.normal(size=2000) * c1 * cfg.c2 * rng.uniform(0.01, 3.0, size=2000)
            gap = np.abs(clamp_similarity(s, cfg) - s/c1)
            bound = np.abs(s)**3 / (3 * c1**3 * cfg.c2**2)
            self.assertTrue(np.all(gap <= bound * (1 + 1e-9) + 1e-12))


class NCETest(TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(0)
        self.cfg = SimilarityConfig(c1=6)

    def test_matches_reference(self):
        Z = self.rng.normal(size=(8, 6)) * 3
        self.assertAlmostEqual(nce_pair_loss(Tensor(Z), self.cfg).item(), _reference_nce(Z, self.cfg), places=10)

    def test_bounds(self):
        for scale in (0.0, 1.0, 100.0):
            Z = self.rng.normal(size=(10, 6)) * scale
            loss = nce_pair_loss(Tensor(Z), self.cfg).item()
            self.assertGreaterEqual(loss, 0.0)
            self.assertLessEqual(loss, 4*self.cfg.c2 + np.log(9) + 1e-9)

    def test_non_negative_on_random_batches(self):
        for _ in range(1000):
            n = int(self.rng.integers(2, 17))
            d = int(self.rng.integers(1, 9))
            Z = self.rng.normal(size=(2*n, d)) * 10**self.rng.uniform(-2, 2)
            self.assertGreaterEqual(nce_pair_loss(Tensor(Z), self.cfg).item(), 0.0)

    def test_max_shift_matches_unshifted(self):
        for scale in (0.1, 3.0, 30.0):
            Z = self.rng.normal(size=(10, 6)) * scale
            self.assertLess(abs(nce_pair_loss(Tensor(Z), self.cfg).item() - _reference_nce(Z, self.cfg)), 1e-9)

    def test_constant_shift(self):
        """With the clamp effectively linear, shifting every similarity is a no-op."""
        cfg = SimilarityConfig(c1=1, c2=1e8)
        for _ in range(20):
            S = self.rng.uniform(-50, 50, size=(8, 8))
            S = (S + S.T) / 2
            c = self.rng.uniform(-50, 50)
            self.assertLess(abs(nce_from_similarity(Tensor(S + c), cfg).item() -
                                nce_from_similarity(Tensor(S), cfg).item()), 1e-9)

    def test_constant_latents(self):
        """Identical rows give ln(2N - 1)."""
        Z = np.ones((6, 6))
        self.assertAlmostEqual(nce_pair_loss(Tensor(Z), self.cfg).item(), np.log(5), places=12)

    def test_row_count(self):
        with self.assertRaises(DomainError):
            nce_pair_loss(Tensor(np.ones((5, 6))), self.cfg)
        with self.assertRaises(DomainError):
            nce_pair_loss(Tensor(np.ones((2, 6))), self.cfg)
        with self.assertRaises(ShapeError):
            nce_pair_loss(Tensor(np.ones(6)), self.cfg)

    def test_gradient(self):
        Z = Tensor(self.rng.normal(size=(6, 6)), requires_grad=True)
        self.assertLess(finite_difference_check(lambda: nce_pair_loss(Z, self.cfg), [Z]), 1e-4)

    def test_map_loss_with_single_location(self):
        """One spatial location reduces the map loss to the pair loss."""
        a = self.rng.normal(size=(4, 6, 1))
        b = self.rng.normal(size=(4, 6, 1))
        Z = interleave_maps(Tensor(a), Tensor(b)).data
        self.assertTrue(np.allclose(Z[0::2], a[..., 0]))
        self.assertTrue(np.allclose(Z[1::2], b[..., 0]))
        self.assertAlmostEqual(nce_map_loss(Tensor(a), Tensor(b), self.cfg).item(),
                               nce_pair_loss(Tensor(Z), self.cfg).item(), places=12)


class JSDTest(TestCase):
    def test_non_negative(self):
        rng = np.random.default_rng(2)
        cfg = SimilarityConfig(c1=4)
        Z = Tensor(rng.normal(size=(8, 4)) * 5)
        self.assertGreaterEqual(jsd_pair_loss(Z, cfg).item(), 0.0)

    def test_zero_scores(self):
        loss = jsd_mi_loss(Tensor(np.zeros(3)), Tensor(np.zeros(5)))
        self.assertAlmostEqual(loss.item(), 2*np.log(2), places=14)
        with self.assertRaises(DomainError):
            jsd_mi_loss(Tensor(np.zeros(0)), Tensor(np.zeros(2)))


class EntropyTest(TestCase):
    def setUp(self):
        self.Z = Tensor(np.array([[3.0, -4.0], [0.0, 0.0]]))

    def test_values(self):
        self.assertAlmostEqual(entropy_regularizer(self.Z, 1).item(), 3.5)
        self.assertAlmostEqual(entropy_regularizer(self.Z, 1, squared=True).item(), 24.5)
        self.assertAlmostEqual(entropy_regularizer(self.Z, 2).item(), 12.5)
        self.assertAlmostEqual(entropy_regularizer(self.Z, 2, squared=False).item(), 2.5)

    def test_zero(self):
        self.assertEqual(entropy_regularizer(Tensor(np.zeros((4, 3))), 1).item(), 0.0)

    def test_scaling(self):
        rng = np.random.default_rng(6)
        Z = rng.normal(size=(6, 4))
        for lam in rng.uniform(0.1, 10, size=5):
            base1 = entropy_regularizer(Tensor(Z), 1).item()
            base2 = entropy_regularizer(Tensor(Z), 2).item()
            self.assertAlmostEqual(entropy_regularizer(Tensor(lam*Z), 1).item(), lam*base1, places=10)
            self.assertAlmostEqual(entropy_regularizer(Tensor(lam*Z), 2).item(), lam**2*base2, places=9)

    def test_invalid_p(self):
        with self.assertRaises(DomainError):
            entropy_regularizer(self.Z, 3)

    def test_gradient_p2(self):
        rng = np.random.default_rng(5)
        Z = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        self.assertLess(finite_difference_check(lambda: entropy_regularizer(Z, 2), [Z]), 1e-6)


class TotalLossTest(TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(3)
        self.cfg = SimilarityConfig(c1=5)
        self.Z = Tensor(self.rng.normal(size=(8, 5)))

    def test_base_total(self):
        parts = total_loss_base(self.Z, 20.0, 1, self.cfg)
        self.assertAlmostEqual(parts.total.item(), parts.nce + 20.0*parts.entropy, places=10)
        self.assertEqual(parts.gvg, 0.0)
        record = parts.as_record()
        self.assertEqual(sorted(record), ['loss_entropy', 'loss_gvg', 'loss_gvl', 'loss_nce', 'loss_total'])

    def test_beta_zero(self):
        parts = total_loss_base(self.Z, 0.0, 1, self.cfg)
        self.assertAlmostEqual(parts.total.item(), parts.nce)

    def test_invalid(self):
        with self.assertRaises(DomainError):
            total_loss_base(self.Z, -1.0, 1, self.cfg)
        with self.assertRaises(DomainError):
            total_loss_base(self.Z, 1.0, 1, self.cfg, estimator='dv')

    def test_extension_degenerates(self):
        """With the locals equal to the globals both MI terms coincide."""
        G = self.Z
        L = Tensor(self.Z.data[..., None])
        ext = total_loss_extension(G, L, 2.0, 1, self.cfg)
        base = total_loss_base(G, 2.0, 1, self.cfg)
        self.assertAlmostEqual(ext.gvg, base.nce, places=10)
        self.assertAlmostEqual(ext.gvl, ext.gvg, places=10)
        self.assertAlmostEqual(ext.entropy, 2*base.entropy, places=10)
        self.assertAlmostEqual(ext.total.item(), ext.gvg + ext.gvl + 2.0*ext.entropy, places=10)

    def test_extension_shape(self):
        with self.assertRaises(ShapeError):
            total_loss_extension(self.Z, Tensor(np.ones((8, 4, 2))), 1.0, 1, self.cfg)

    def test_extension_gradient(self):
        G = Tensor(self.rng.normal(size=(4, 3)), requires_grad=True)
        L = Tensor(self.rng.normal(size=(4, 3, 2)), requires_grad=True)
        cfg = SimilarityConfig(c1=3)
        fn = lambda: total_loss_extension(G, L, 0.5, 2, cfg, estimator='jsd').total
        self.assertLess(finite_difference_check(fn, [G, L]), 1e-4)
