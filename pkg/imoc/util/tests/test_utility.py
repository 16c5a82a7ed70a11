# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Tests for :mod:`~imoc.util.utility`
####################################
"""
import os
import tempfile
import numpy as np
from unittest import TestCase
from imoc.util.utility import mkp, sample_stream, run_stream


class UtilityTest(TestCase):
    def test_mkp(self):
        self.assertEqual(mkp('a', 'b', 'c'), os.sep.join(['a', 'b', 'c']))
        self.assertEqual(mkp('a' + os.sep, os.sep + 'b'), 'a' + os.sep + 'b')

    def test_mkp_creates(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = mkp(tmp, 'x', 'y', mk=True)
            self.assertTrue(os.path.isdir(path))


class StreamTest(TestCase):
    def test_same_key(self):
        a = sample_stream(1, 2, 3).uniform(size=4)
        b = sample_stream(1, 2, 3, 'views').uniform(size=4)
        self.assertTrue(np.array_equal(a, b))

    def test_keys_separate(self):
        base = sample_stream(1, 2, 3).uniform()
        for other in (sample_stream(2, 2, 3), sample_stream(1, 3, 3), sample_stream(1, 2, 4),
                      sample_stream(1, 2, 3, 'score')):
            self.assertNotEqual(base, other.uniform())

    def test_run_stream(self):
        self.assertTrue(np.array_equal(run_stream(0).permutation(10), run_stream(0).permutation(10)))
        self.assertNotEqual(run_stream(0, 'synth').uniform(), run_stream(0).uniform())
