# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Numba Kernels
####################
Compiled gather/scatter kernels used by the 2-D convolution primitive. The
`numba`_ options mirror the usual choice: parallel compilation on Linux,
cached serial compilation elsewhere.

Each parallel loop runs over the batch axis only, so every output element is
accumulated by a single thread in a fixed order; results are bitwise identical
for any thread count.

.. _numba: http://numba.pydata.org/
"""
import os
import logging
import numpy as np
import numba as nb
from platform import system


log = logging.getLogger(__name__)
if "linux" in system().lower():
    jitkwargs = dict(nopython=True, nogil=True, parallel=True, cache=True)
else:
    jitkwargs = dict(nopython=True, nogil=True, parallel=False, cache=True)


def set_threads(n=None):
    """
    Cap the number of numba worker threads.

    Args:
        n (int): Thread count (default from the IMOC_THREADS environment variable, else 1)

    Returns:
        n (int): The thread count actually applied
    """
    if n is None:
        n = int(os.environ.get("IMOC_THREADS", 1))
    n = max(1, min(int(n), nb.config.NUMBA_NUM_THREADS))
    nb.set_num_threads(n)
    log.debug('numba threads: {}'.format(n))
    return n


@nb.jit(**jitkwargs)
def im2col(x, k, stride, ho, wo):
    """
    Gather sliding windows.

    Args:
        x (array): Padded input (N, C, H, W)
        k (int): Kernel size
        stride (int): Stride
        ho (int): Output height
        wo (int): Output width

    Returns:
        cols (array): Windows with shape (N, ho, wo, C, k, k)
    """
    n, c = x.shape[0], x.shape[1]
    cols = np.empty((n, ho, wo, c, k, k), dtype=x.dtype)
    for b in nb.prange(n):
        for i in range(ho):
            for j in range(wo):
                for ch in range(c):
                    for u in range(k):
                        for v in range(k):
                            cols[b, i, j, ch, u, v] = x[b, ch, i*stride + u, j*stride + v]
    return cols


@nb.jit(**jitkwargs)
def col2im(cols, h, w, stride):
    """
    Scatter-add window gradients back onto the (padded) input grid; the
    adjoint of :func:`~imoc.core.kernels.im2col`.

    Args:
        cols (array): Window gradients (N, ho, wo, C, k, k)
        h (int): Padded input height
        w (int): Padded input width
        stride (int): Stride

    Returns:
        x (array): Gradient with shape (N, C, h, w)
    """
    n, ho, wo, c, k = cols.shape[0], cols.shape[1], cols.shape[2], cols.shape[3], cols.shape[4]
    x = np.zeros((n, c, h, w), dtype=cols.dtype)
    for b in nb.prange(n):
        for i in range(ho):
            for j in range(wo):
                for ch in range(c):
                    for u in range(k):
                        for v in range(k):
                            x[b, ch, i*stride + u, j*stride + v] += cols[b, i, j, ch, u, v]
    return x
