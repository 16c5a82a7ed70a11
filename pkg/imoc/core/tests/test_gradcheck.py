# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Tests for :mod:`~imoc.core.gradcheck`
#######################################
Every primitive's reverse-mode gradient must agree with central differences
to a relative error below 1e-4 at 64-bit precision.
"""
import numpy as np
import pytest
from imoc.core.error import GradientError
from imoc.core.tensor import Tensor
from imoc.core.gradcheck import PRIMITIVES, finite_difference_check, primitive_suite


@pytest.mark.parametrize("name", PRIMITIVES)
def test_primitive(name):
    errors = primitive_suite(seed=3, trials=10, names=[name])
    assert errors[name] < 1e-4


def test_float32_rejected():
    x = Tensor(np.ones(3, dtype=np.float32), requires_grad=True)
    with pytest.raises(GradientError):
        finite_difference_check(lambda: x.sqnorm(), [x])


def test_detects_wrong_gradient():
    x = Tensor(np.array([0.3, -0.7]), requires_grad=True)
    # detached copies share values but carry no gradient
    fn = lambda: (x * 0.0).sum() + x.detach().sqnorm()
    assert finite_difference_check(fn, [x]) > 0.1
