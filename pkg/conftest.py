# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Test configuration: long-running experiments are marked ``slow`` and only run
with ``pytest --runslow``.
"""
import pytest


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow experiments")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running training experiment")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
