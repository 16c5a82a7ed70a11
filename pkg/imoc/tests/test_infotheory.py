# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Tests for :mod:`~imoc.infotheory`
##################################
Closed-form values are checked against exact symbolic evaluation.
"""
import numpy as np
import sympy as sy
import pytest
from unittest import TestCase
from imoc.core.error import SupportError, DomainError, ShapeError
from imoc.infotheory import (DiscreteJoint, kl_divergence, mutual_information, entropy,
                             expected_conditional_cross_entropy, decomposition_residual,
                             chain_rule_residual, assumption_holds, lower_bound_check,
                             random_bound_pair, verify)


PN = [[sy.Rational(1, 2), sy.Rational(1, 8)], [sy.Rational(1, 8), sy.Rational(1, 4)]]
PA = [[sy.Rational(1, 4), sy.Rational(1, 4)], [sy.Rational(1, 4), sy.Rational(1, 4)]]


def _exact(table):
    return np.array([[float(v) for v in row] for row in table])


def _sym_kl(p, q):
    return sum(p[i][j]*sy.log(p[i][j]/q[i][j]) for i in range(2) for j in range(2))


class ClosedFormTest(TestCase):
    def setUp(self):
        self.pn = DiscreteJoint(_exact(PN))
        self.pa = DiscreteJoint(_exact(PA))

    def test_kl(self):
        self.assertAlmostEqual(kl_divergence(self.pn, self.pa), float(_sym_kl(PN, PA)), places=14)

    def test_mutual_information(self):
        px = [PN[0][0] + PN[0][1], PN[1][0] + PN[1][1]]
        pz = [PN[0][0] + PN[1][0], PN[0][1] + PN[1][1]]
        prod = [[px[i]*pz[j] for j in range(2)] for i in range(2)]
        self.assertAlmostEqual(mutual_information(self.pn), float(_sym_kl(PN, prod)), places=14)

    def test_entropy(self):
        pz = [PN[0][0] + PN[1][0], PN[0][1] + PN[1][1]]
        expected = -sum(v*sy.log(v) for v in pz)
        self.assertAlmostEqual(entropy(self.pn, 'z'), float(expected), places=14)
        self.assertAlmostEqual(entropy([0.5, 0.5, 0.0]), np.log(2), places=14)
        with self.assertRaises(ValueError):
            entropy(self.pn, 'y')

    def test_cross_entropy_uniform(self):
        # p_a(z|x) = 1/2 everywhere
        self.assertAlmostEqual(expected_conditional_cross_entropy(self.pn, self.pa), np.log(2), places=14)

    def test_residuals(self):
        self.assertLess(abs(decomposition_residual(self.pn, self.pa)), 1e-14)
        self.assertLess(abs(chain_rule_residual(self.pn, self.pa)), 1e-14)


class ValidationTest(TestCase):
    def test_support_error(self):
        p = np.array([0.5, 0.5, 0.0])
        q = np.array([1.0, 0.0, 0.0])
        with self.assertRaises(SupportError) as ctx:
            kl_divergence(p, q)
        self.assertEqual(ctx.exception.index, (1, ))
        self.assertEqual(kl_divergence(q, p), np.log(2))

    def test_bad_tables(self):
        with self.assertRaises(DomainError):
            DiscreteJoint([[0.5, 0.6], [0.0, -0.1]])
        with self.assertRaises(DomainError):
            DiscreteJoint([[0.5, 0.4]])
        with self.assertRaises(ShapeError):
            DiscreteJoint([0.5, 0.5])
        with self.assertRaises(ShapeError):
            kl_divergence(np.ones(2)/2, np.ones(3)/3)

    def test_independent_has_zero_information(self):
        p = DiscreteJoint.independent([0.2, 0.8], [0.1, 0.3, 0.6])
        self.assertLess(abs(mutual_information(p)), 1e-15)


def test_bound_pairs_satisfy_assumption():
    rng = np.random.default_rng(7)
    for _ in range(20):
        pn, pa = random_bound_pair(rng, int(rng.integers(2, 6)), int(rng.integers(3, 6)))
        holds, gap = lower_bound_check(pn, pa)
        assert holds and assumption_holds(pn, pa)
        assert gap >= -1e-12


def test_bound_pairs_with_full_rows():
    rng = np.random.default_rng(11)
    for _ in range(100):
        pn, pa = random_bound_pair(rng, int(rng.integers(2, 9)), int(rng.integers(2, 9)), full=True)
        assert np.all(pn.table > 0)
        holds, gap = lower_bound_check(pn, pa)
        assert holds
        assert gap >= -1e-12


def test_bound_pairs_mix_both_kinds():
    rng = np.random.default_rng(3)
    dense = [np.all(random_bound_pair(rng, 4, 5)[0].table > 0) for _ in range(60)]
    assert 0 < sum(dense) < len(dense)


def test_assumption_depends_on_support():
    pn = DiscreteJoint(np.array([[0.5, 0.0], [0.0, 0.5]]))
    pa = DiscreteJoint(np.array([[0.1, 0.4], [0.4, 0.1]]))
    assert assumption_holds(pn, pa)
    pn = DiscreteJoint(np.array([[0.7, 0.1], [0.1, 0.1]]))
    assert not assumption_holds(pn, pa)


def test_verify_passes():
    report, line = verify(n_pairs=200, n_bound=20, seed=1)
    assert line == 'PASS, max residual < 1e-10'
    assert report['passed'].all()
    assert list(report['check']) == ['decomposition', 'chain_rule', 'non_negativity',
                                     'mi_below_entropy', 'lower_bound']


@pytest.mark.slow
def test_verify_full():
    _, line = verify()
    assert line.startswith('PASS')
