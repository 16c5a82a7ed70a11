# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Utilities
#####################
Commonly used functions (paths, random stream derivation).
"""
import os
import numpy as np


sep2 = os.sep + os.sep
# Purposes keep streams used for different jobs of the same sample apart
PURPOSES = {'views': 0, 'score': 1, 'permutation': 2, 'synth': 3}


def mkp(*args, **kwargs):
    """
    Generate a directory path, and create it if requested.

    .. code-block:: Python

        filepath = mkp('base', 'folder', 'file')
        dirpath = mkp('root', 'path', 'folder', mk=True)

    Args:
        \\*args: File or directory path segments to be concatenated
        mk (bool): Make the directory (if it doesn't exist)

    Returns:
        path (str): File or directory path
    """
    mk = kwargs.pop('mk', False)
    path = os.sep.join(list(args))
    while sep2 in path:
        path = path.replace(sep2, os.sep)
    if mk:
        os.makedirs(path, exist_ok=True)
    return path


def sample_stream(seed, epoch, index, purpose='views'):
    """
    Independent generator for one (seed, epoch, sample index, purpose) tuple.

    Streams depend only on the tuple, never on batch composition or on the
    order in which samples are processed.
    """
    key = PURPOSES[purpose] if isinstance(purpose, str) else int(purpose)
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(epoch), int(index), key]))


def run_stream(seed, purpose='permutation', epoch=0):
    """Generator for run-level draws (epoch permutations, synthetic data)."""
    return sample_stream(seed, epoch, 2**32 - 1, purpose)
