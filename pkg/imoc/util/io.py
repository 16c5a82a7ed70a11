# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Disk I/O Utilities
#######################################
Checkpoints and schema-versioned CSV tables.

A checkpoint is a little-endian binary file:

+----------------+-----------------------------------------------------+
| Field          | Layout                                              |
+================+=====================================================+
| magic          | ``b'IMOC'``                                         |
+----------------+-----------------------------------------------------+
| version        | u16 (currently 1)                                   |
+----------------+-----------------------------------------------------+
| config         | u32 byte length + UTF-8 YAML (encoder and run keys) |
+----------------+-----------------------------------------------------+
| tensor count   | u32                                                 |
+----------------+-----------------------------------------------------+
| per tensor     | u16 name length + UTF-8 name, u8 dtype tag          |
|                | (1 = float32, 2 = float64), u8 rank, u32 per dim,   |
|                | raw little-endian values                            |
+----------------+-----------------------------------------------------+

CSV files start with a ``# imoc-schema: <name>/<version>`` line followed by
the table's required columns in declared order.
"""
import io
import struct
import logging
import numpy as np
import pandas as pd
import yaml
from imoc.core.error import FormatError
from imoc.models import EncoderConfig, build_encoder
from imoc.config import load_mapping


log = logging.getLogger(__name__)
MAGIC = b'IMOC'
VERSION = 1
SCHEMA_VERSION = 1
DTYPE_TAGS = {np.dtype('<f4'): 1, np.dtype('<f8'): 2}
TAG_DTYPES = {v: k for k, v in DTYPE_TAGS.items()}


def _encoder_dict(cfg):
    values = cfg.to_dict()
    values['input_shape'] = list(values['input_shape'])
    return values


def checkpoint_bytes(encoder, cfg=None):
    """Serialize an encoder (and optionally its run configuration)."""
    doc = {'encoder': _encoder_dict(encoder.cfg)}
    if cfg is not None:
        doc['run'] = dict(cfg.to_flat())
    text = yaml.safe_dump(doc, sort_keys=False).encode('utf-8')
    state = encoder.state_dict()
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack('<HI', VERSION, len(text)))
    buf.write(text)
    buf.write(struct.pack('<I', len(state)))
    for name, value in state.items():
        value = np.ascontiguousarray(value, dtype=value.dtype.newbyteorder('<'))
        raw = name.encode('utf-8')
        buf.write(struct.pack('<H', len(raw)))
        buf.write(raw)
        buf.write(struct.pack('<BB', DTYPE_TAGS[value.dtype], value.ndim))
        buf.write(struct.pack('<' + 'I'*value.ndim, *value.shape))
        buf.write(value.tobytes())
    return buf.getvalue()


def checkpoint_save(encoder, cfg, path):
    """
    Write a checkpoint file.

    Args:
        encoder (Encoder): Model whose parameters are stored
        cfg (RunConfig): Run configuration stored alongside (may be None)
        path (str): Output file
    """
    data = checkpoint_bytes(encoder, cfg)
    with open(path, 'wb') as f:
        f.write(data)
    log.info('saved checkpoint {} ({} bytes)'.format(path, len(data)))


class _Reader(object):
    """Cursor over checkpoint bytes raising FormatError at the failing offset."""
    def take(self, n, what):
        if self.offset + n > len(self.data):
            raise FormatError('checkpoint', self.offset, 'truncated {}'.format(what))
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def __init__(self, data):
        self.data = data
        self.offset = 0


def parse_checkpoint(data):
    """
    Decode checkpoint bytes.

    Returns:
        doc (dict): Config document ('encoder' and optionally 'run' keys)
        state (OrderedDict): Parameter name to array

    Raises:
        FormatError: Bad magic or version, truncation, unknown dtype tag
    """
    r = _Reader(bytes(data))
    if r.take(4, 'magic') != MAGIC:
        raise FormatError('checkpoint', 0, 'bad magic')
    version, = r.unpack('<H', 'version')
    if version != VERSION:
        raise FormatError('checkpoint', 4, 'unsupported version {}'.format(version))
    length, = r.unpack('<I', 'config length')
    start = r.offset
    try:
        doc = yaml.safe_load(r.take(length, 'config').decode('utf-8'))
    except (UnicodeDecodeError, yaml.YAMLError) as e:
        raise FormatError('checkpoint', start, 'unreadable config: {}'.format(e))
    if not isinstance(doc, dict) or 'encoder' not in doc:
        raise FormatError('checkpoint', start, 'config lacks the encoder section')
    count, = r.unpack('<I', 'tensor count')
    state = {}
    for _ in range(count):
        n, = r.unpack('<H', 'name length')
        name = r.take(n, 'name').decode('utf-8')
        tag_offset = r.offset
        tag, rank = r.unpack('<BB', 'dtype tag')
        if tag not in TAG_DTYPES:
            raise FormatError('checkpoint', tag_offset, 'unknown dtype tag {}'.format(tag))
        dims = r.unpack('<' + 'I'*rank, 'dims')
        dtype = TAG_DTYPES[tag]
        raw = r.take(int(np.prod(dims, dtype=np.int64))*dtype.itemsize, 'values of ' + name)
        state[name] = np.frombuffer(raw, dtype=dtype).reshape(dims)
    if r.offset != len(r.data):
        raise FormatError('checkpoint', r.offset, 'trailing bytes')
    return doc, state


def checkpoint_load(path, precision=None):
    """
    Rebuild an encoder from a checkpoint.

    Args:
        path (str): Checkpoint file
        precision (int): 32 or 64 to cast parameters (default: stored precision)

    Returns:
        encoder (Encoder): Model with the stored parameters
        cfg (RunConfig): Stored run configuration, or None
    """
    with open(path, 'rb') as f:
        doc, state = parse_checkpoint(f.read())
    values = dict(doc['encoder'])
    values['input_shape'] = tuple(values['input_shape'])
    if precision is None:
        stored = next(iter(state.values()), np.zeros(0, np.float32)).dtype
        precision = 64 if stored == np.float64 else 32
    encoder = build_encoder(EncoderConfig(**values), precision=precision)
    encoder.load_state_dict(state)
    cfg = load_mapping(doc['run']) if doc.get('run') is not None else None
    log.info('loaded checkpoint {} ({}-bit)'.format(path, precision))
    return encoder, cfg


def schema_header(table):
    return '# imoc-schema: {}/{}\n'.format(table._schema, SCHEMA_VERSION)


def write_csv(table, path):
    """
    Write a table with its schema header line first.

    Args:
        table (DataFrame): An imoc table with ``_schema`` set
        path (str): Output file
    """
    frame = table.ordered()
    with open(path, 'w', newline='', encoding='utf-8') as f:
        f.write(schema_header(table))
        frame.to_csv(f, index=table._index is not None, float_format='%.17g')


def read_csv(path, cls=None):
    """
    Read a table written by :func:`~imoc.util.io.write_csv`.

    Raises:
        FormatError: Missing or mismatching schema header
    """
    with open(path, 'r', encoding='utf-8') as f:
        header = f.readline()
        if not header.startswith('# imoc-schema:'):
            raise FormatError('csv', 0, 'missing schema header')
        if cls is not None and header.strip() != schema_header(cls).strip():
            raise FormatError('csv', 0, 'schema {!r} is not {}/{}'.format(
                header.strip(), cls._schema, SCHEMA_VERSION))
        frame = pd.read_csv(f, index_col=0 if cls is not None and cls._index else None)
    return frame if cls is None else cls(frame)
