# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Tests for :mod:`~imoc.static`
#############################
"""
import os
import pytest
from imoc.static import staticdir, resource


def test_staticdir():
    assert os.path.isdir(staticdir())


def test_resource():
    assert os.path.isfile(resource('defaults.yml'))
    with pytest.raises(FileNotFoundError):
        resource('no-such-file.yml')
