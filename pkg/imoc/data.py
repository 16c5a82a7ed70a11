# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Datasets
###################################
Readers for the IDX (MNIST, Fashion-MNIST) and CIFAR binary formats,
synthetic desk-scale generators and the one-class task protocol: train on one
class only, test on the full default test split with label 1 for the normal
class and 0 for everything else.

Pixels are mapped affinely from [0, 255] to [-1, 1].

.. code-block:: python

    ds = synth_generate({'generator': 'gauss-clusters', 'separation': 6.0}, seed=0)
    task = make_one_class_task(ds, normal_class=0)
    task.x_train.shape, task.y_test.mean()
"""
import os
import gzip
import struct
import logging
import numpy as np
from imoc.core.error import FormatError, DomainError, ConfigError
from imoc.augment import expand_grayscale
from imoc.util.utility import run_stream


log = logging.getLogger(__name__)
IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801
CIFAR_PIXELS = 3 * 32 * 32
CIFAR_RECORD = {'c10': 1 + CIFAR_PIXELS, 'c100-coarse': 2 + CIFAR_PIXELS}
CIFAR_CLASSES = {'c10': 10, 'c100-coarse': 20}
IDX_FILES = {'train': ('train-images-idx3-ubyte', 'train-labels-idx1-ubyte'),
             'test': ('t10k-images-idx3-ubyte', 't10k-labels-idx1-ubyte')}
CIFAR_FILES = {'cifar10': (['data_batch_{}.bin'.format(i) for i in range(1, 6)], ['test_batch.bin']),
               'cifar100': (['train.bin'], ['test.bin'])}


def normalize_bytes(values):
    """Map uint8 values from [0, 255] to float32 [-1, 1]."""
    return (np.asarray(values, dtype=np.float32) / np.float32(127.5)) - np.float32(1.0)


def _maybe_gunzip(data):
    if data[:2] == b'\x1f\x8b':
        return gzip.decompress(data)
    return data


def parse_idx(data):
    """
    Parse an IDX file (u8 images, magic 0x803, or u8 labels, magic 0x801).

    Args:
        data (bytes): File content (gzip compressed content is accepted)

    Returns:
        array: float32 images in [-1, 1] with the header's dimensions, or int64 labels

    Raises:
        FormatError: Bad magic, truncated header/payload or trailing bytes
    """
    data = _maybe_gunzip(bytes(data))
    if len(data) < 4:
        raise FormatError('idx', len(data), 'truncated magic number')
    magic, = struct.unpack('>I', data[:4])
    if magic not in (IDX_IMAGES, IDX_LABELS):
        raise FormatError('idx', 0, 'bad magic 0x{:08x}'.format(magic))
    ndim = magic & 0xff
    header = 4 + 4*ndim
    if len(data) < header:
        raise FormatError('idx', len(data), 'truncated header, expected {} bytes'.format(header))
    dims = struct.unpack('>' + 'I'*ndim, data[4:header])
    expected = int(np.prod(dims))
    available = len(data) - header
    if available < expected:
        raise FormatError('idx', len(data), 'payload holds {} of {} bytes'.format(available, expected))
    if available > expected:
        raise FormatError('idx', header + expected, 'trailing bytes after payload')
    values = np.frombuffer(data, dtype=np.uint8, count=expected, offset=header).reshape(dims)
    if magic == IDX_LABELS:
        return values.astype(np.int64)
    return normalize_bytes(values)


def parse_cifar(data, variant='c10'):
    """
    Parse a CIFAR binary batch.

    Args:
        data (bytes): File content
        variant (str): 'c10' (1 label byte) or 'c100-coarse' (coarse, fine label bytes)

    Returns:
        images (array): (N, 3, 32, 32) float32 in [-1, 1], channel-major planes
        labels (array): (N, ) int64 (coarse labels for CIFAR-100)
    """
    if variant not in CIFAR_RECORD:
        raise ConfigError('variant', 'unknown CIFAR variant {!r}'.format(variant))
    data = bytes(data)
    record = CIFAR_RECORD[variant]
    if len(data) % record:
        raise FormatError('cifar', len(data) - len(data) % record,
                          'length {} is not a multiple of the {} byte record'.format(len(data), record))
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, record)
    labels = raw[:, 0].astype(np.int64)
    bad = np.flatnonzero(labels >= CIFAR_CLASSES[variant])
    if bad.size:
        raise FormatError('cifar', int(bad[0]) * record, 'label {} out of range'.format(labels[bad[0]]))
    images = normalize_bytes(raw[:, record - CIFAR_PIXELS:]).reshape(-1, 3, 32, 32)
    return images, labels


class Dataset(object):
    """
    Labeled train and test splits.

    Attributes:
        grayscale (bool): Source images had one channel (expanded to three)
    """
    @property
    def n_classes(self):
        return int(np.unique(np.concatenate([self.y_train, self.y_test])).size)

    @property
    def input_shape(self):
        return tuple(self.x_train.shape[1:])

    def __repr__(self):
        return 'Dataset({}, train={}, test={})'.format(self.name, len(self.x_train), len(self.x_test))

    def __init__(self, name, x_train, y_train, x_test, y_test, grayscale=False):
        self.name = name
        self.x_train = x_train
        self.y_train = np.asarray(y_train, dtype=np.int64)
        self.x_test = x_test
        self.y_test = np.asarray(y_test, dtype=np.int64)
        self.grayscale = grayscale


class OneClassTask(object):
    """
    Attributes:
        normal_class (int): Class used as normal
        x_train (array): Normal training samples only
        x_test (array): Full test split
        y_test (array): 1 = normal, 0 = anomalous
        test_classes (array): Original test labels
        n_classes (int): Number of source classes
    """
    def __repr__(self):
        return 'OneClassTask(class={}, train={}, test={}, normal={})'.format(
            self.normal_class, len(self.x_train), len(self.x_test), int(self.y_test.sum()))

    def __init__(self, normal_class, x_train, x_test, y_test, test_classes, n_classes, grayscale=False):
        self.normal_class = normal_class
        self.x_train = x_train
        self.x_test = x_test
        self.y_test = y_test
        self.test_classes = test_classes
        self.n_classes = n_classes
        self.grayscale = grayscale


def make_one_class_task(dataset, normal_class):
    """
    One-class protocol: train on ``normal_class`` only, test on everything.

    Raises:
        DomainError: Fewer than two classes
        ConfigError: Class id out of range
    """
    classes = np.unique(np.concatenate([dataset.y_train, dataset.y_test]))
    if classes.size < 2:
        raise DomainError('make_one_class_task', 'need at least two classes, got {}'.format(classes.size))
    if normal_class not in classes:
        raise ConfigError('normal_class', '{} not in classes {}'.format(normal_class, classes.tolist()))
    train = dataset.x_train[dataset.y_train == normal_class]
    labels = (dataset.y_test == normal_class).astype(np.int64)
    task = OneClassTask(int(normal_class), train, dataset.x_test, labels, dataset.y_test,
                        int(classes.size), dataset.grayscale)
    log.info('{}'.format(task))
    return task


def subsample(task, limit_train=None, limit_test=None, seed=0):
    """Deterministic subsets of a task (order preserved)."""
    rng = run_stream(seed, 'synth', epoch=1)
    def pick(n, limit):
        if not limit or limit >= n:
            return np.arange(n)
        return np.sort(rng.permutation(n)[:limit])
    tr = pick(len(task.x_train), limit_train)
    te = pick(len(task.x_test), limit_test)
    return OneClassTask(task.normal_class, task.x_train[tr], task.x_test[te], task.y_test[te],
                        task.test_classes[te], task.n_classes, task.grayscale)


# dims of the unit-covariance plane each cluster varies in
_PLANE = 2
# residual standard deviation off the plane
_FLOOR = 0.05
# separation from which every cluster plane is orthogonal to the others
_TURN = 6.0


def _gauss_clusters(rng, n_classes, n_train, n_test, separation, dim=16, offset=1.0):
    """
    Class ``k`` varies with unit covariance inside a plane and only by the
    residual noise elsewhere. Its mean sits ``separation`` residual standard
    deviations from the common offset along coordinate ``k``, and its plane
    turns from a plane shared by all classes to one of its own as the
    separation grows. Every class has the same input-norm distribution;
    separation 0 makes the classes identical.
    """
    if n_classes + _PLANE*(n_classes + 1) > dim:
        raise ConfigError('synth.n_classes', 'at most {} clusters fit in {} dims'.format(
            (dim - _PLANE)//(_PLANE + 1), dim))
    angle = 0.5*np.pi*min(separation/_TURN, 1.0)
    shared = n_classes + np.arange(_PLANE)

    def draw(n):
        parts = []
        for k in range(n_classes):
            x = rng.normal(0, _FLOOR, size=(n, dim)) + offset/np.sqrt(dim)
            x[:, k] += separation*_FLOOR
            g = rng.normal(size=(n, _PLANE))
            x[:, shared] += np.cos(angle)*g
            x[:, shared + _PLANE*(k + 1)] += np.sin(angle)*g
            parts.append(x)
        return np.concatenate(parts), np.repeat(np.arange(n_classes), n)

    x_train, y_train = draw(n_train)
    x_test, y_test = draw(n_test)
    scale = max(np.abs(x_train).max(), np.abs(x_test).max())
    return (x_train/scale).astype(np.float32), y_train, (x_test/scale).astype(np.float32), y_test


def _shape_mask(kind, size, cy, cx, r):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    if kind == 0:
        return (np.abs(dy) <= r) & (np.abs(dx) <= r)
    if kind == 1:
        return dy*dy + dx*dx <= r*r
    if kind == 2:
        return ((np.abs(dy) <= r/3) & (np.abs(dx) <= r)) | ((np.abs(dx) <= r/3) & (np.abs(dy) <= r))
    return (dy <= r) & (dy >= -r) & (np.abs(dx) <= (dy + r) / 2)


def _blobs_images(rng, n_classes, n_train, n_test, noise, size=16):
    if n_classes > 4:
        raise ConfigError('synth.n_classes', 'blobs-images has 4 shape classes')

    def draw(n):
        x = np.empty((n*n_classes, 1, size, size), dtype=np.float32)
        for k in range(n_classes):
            for i in range(n):
                r = rng.uniform(3.0, 5.0)
                cy, cx = rng.uniform(r, size - 1 - r, size=2)
                img = np.where(_shape_mask(k, size, cy, cx, r), 1.0, -1.0)
                img = img + rng.normal(0, noise, size=img.shape)
                x[k*n + i, 0] = np.clip(img, -1, 1)
        return x, np.repeat(np.arange(n_classes), n)

    x_train, y_train = draw(n_train)
    x_test, y_test = draw(n_test)
    return x_train, y_train, x_test, y_test


SYNTH_DEFAULTS = dict(generator='gauss-clusters', n_classes=4, n_train=500, n_test=250,
                      separation=6.0, offset=1.0, noise=0.1)


def synth_generate(spec, seed=0):
    """
    Deterministic synthetic labeled dataset.

    Args:
        spec (dict): ``generator`` ('gauss-clusters' or 'blobs-images') plus
            ``n_classes``, ``n_train``/``n_test`` (per class), ``separation``
            and ``offset`` (clusters) or ``noise`` (images)
        seed (int): Generator seed

    Returns:
        dataset (Dataset): Values in [-1, 1]
    """
    params = dict(SYNTH_DEFAULTS)
    params.update({k: v for k, v in dict(spec).items() if v is not None})
    rng = run_stream(seed, 'synth')
    name = params['generator']
    if name == 'gauss-clusters':
        parts = _gauss_clusters(rng, int(params['n_classes']), int(params['n_train']),
                                int(params['n_test']), float(params['separation']),
                                offset=float(params['offset']))
        return Dataset(name, *parts)
    if name == 'blobs-images':
        parts = _blobs_images(rng, int(params['n_classes']), int(params['n_train']),
                              int(params['n_test']), float(params['noise']))
        return Dataset(name, *parts, grayscale=True)
    raise ConfigError('synth.generator', 'unknown generator {!r}'.format(name))


def _read(path):
    for candidate in (path, path + '.gz'):
        if os.path.exists(candidate):
            with open(candidate, 'rb') as f:
                return f.read()
    raise FileNotFoundError(path)


def pad_images(x, size):
    """Pad (N, C, H, W) images symmetrically with -1 up to size x size."""
    h, w = x.shape[2:]
    if size is None or (h >= size and w >= size):
        return x
    top, left = (size - h)//2, (size - w)//2
    return np.pad(x, ((0, 0), (0, 0), (top, size - h - top), (left, size - w - left)),
                  constant_values=-1.0)


def load_idx_dataset(name, path, pad_to=None, expand=True):
    """MNIST or Fashion-MNIST from the four standard IDX files in path."""
    parts = []
    for split in ('train', 'test'):
        images_file, labels_file = IDX_FILES[split]
        images = parse_idx(_read(os.path.join(path, images_file)))[:, None]
        if expand:
            images = expand_grayscale(images)
        parts += [pad_images(images, pad_to), parse_idx(_read(os.path.join(path, labels_file)))]
    return Dataset(name, *parts, grayscale=True)


def load_cifar_dataset(name, path):
    """CIFAR-10 or CIFAR-100 (coarse labels) from the standard binary files."""
    variant = 'c10' if name == 'cifar10' else 'c100-coarse'
    parts = []
    for files in CIFAR_FILES[name]:
        batches = [parse_cifar(_read(os.path.join(path, f)), variant) for f in files]
        parts += [np.concatenate([b[0] for b in batches]), np.concatenate([b[1] for b in batches])]
    return Dataset(name, *parts)


def load_dataset(cfg):
    """
    Dataset named by a run configuration.

    Raises:
        FileNotFoundError: Missing dataset file (path named)
    """
    name = cfg.dataset
    if name in ('mnist', 'fashion-mnist'):
        ds = load_idx_dataset(name, cfg.data_path, cfg.data_pad_to)
    elif name in CIFAR_FILES:
        ds = load_cifar_dataset(name, cfg.data_path)
    elif name == 'synth':
        ds = synth_generate(cfg.synth_spec(), cfg.seed)
    else:
        raise ConfigError('dataset', 'unknown dataset {!r}'.format(name))
    log.info('loaded {}'.format(ds))
    return ds
