# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Tests for :mod:`~imoc.util.io`
###############################
"""
import os
import struct
import tempfile
import numpy as np
import pytest
from unittest import TestCase
from imoc.core.error import FormatError
from imoc.config import RunConfig
from imoc.models import EncoderConfig, build_encoder
from imoc.evaluate import ScoreTable
from imoc.trainer import TrainHistory
from imoc.util.io import (checkpoint_bytes, checkpoint_save, checkpoint_load, parse_checkpoint,
                          write_csv, read_csv)


class CheckpointTest(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, 'model.imoc')
        self.cfg = RunConfig(beta=7.5, seed=3, extension=True)
        self.encoder = build_encoder(EncoderConfig(variant='tiny', input_shape=(10, ), projection=True), seed=3)

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip(self):
        checkpoint_save(self.encoder, self.cfg, self.path)
        encoder, cfg = checkpoint_load(self.path)
        self.assertEqual(cfg, self.cfg)
        self.assertEqual(encoder.cfg, self.encoder.cfg)
        self.assertEqual(encoder.dtype, np.float32)
        for (na, a), (nb, b) in zip(self.encoder.state_dict().items(), encoder.state_dict().items()):
            self.assertEqual(na, nb)
            self.assertEqual(a.tobytes(), b.tobytes())

    def test_without_run_config(self):
        doc, state = parse_checkpoint(checkpoint_bytes(self.encoder))
        self.assertNotIn('run', doc)
        self.assertEqual(list(state), list(self.encoder.state_dict()))

    def test_precision_cast(self):
        enc64 = build_encoder(self.encoder.cfg, seed=1, precision=64)
        checkpoint_save(enc64, None, self.path)
        enc32, cfg = checkpoint_load(self.path, precision=32)
        self.assertIsNone(cfg)
        for a, b in zip(enc64.parameters(), enc32.parameters()):
            self.assertEqual(b.dtype, np.float32)
            self.assertTrue(np.array_equal(b.data, a.data.astype(np.float32)))

    def test_bad_header(self):
        data = checkpoint_bytes(self.encoder, self.cfg)
        with self.assertRaises(FormatError) as ctx:
            parse_checkpoint(b'XMOC' + data[4:])
        self.assertEqual(ctx.exception.offset, 0)
        with self.assertRaises(FormatError) as ctx:
            parse_checkpoint(data[:4] + struct.pack('<H', 9) + data[6:])
        self.assertEqual(ctx.exception.offset, 4)

    def test_truncated_and_trailing(self):
        data = checkpoint_bytes(self.encoder, self.cfg)
        with self.assertRaises(FormatError):
            parse_checkpoint(data[:-3])
        with self.assertRaises(FormatError) as ctx:
            parse_checkpoint(data + b'\x00')
        self.assertEqual(ctx.exception.offset, len(data))

    def test_unknown_dtype_tag(self):
        data = bytearray(checkpoint_bytes(self.encoder))
        length, = struct.unpack('<I', bytes(data[6:10]))
        name = list(self.encoder.state_dict())[0].encode('utf-8')
        tag_offset = 10 + length + 4 + 2 + len(name)
        data[tag_offset] = 7
        with self.assertRaises(FormatError) as ctx:
            parse_checkpoint(bytes(data))
        self.assertEqual(ctx.exception.offset, tag_offset)


@pytest.fixture
def csv_path():
    with tempfile.TemporaryDirectory() as tmp:
        yield os.path.join(tmp, 'table.csv')


def test_csv_schema(csv_path):
    table = ScoreTable.from_scores([0.1, 1/3, -2.5], [1, 0, 0])
    write_csv(table, csv_path)
    with open(csv_path, encoding='utf-8') as f:
        lines = f.read().splitlines()
    assert lines[0] == '# imoc-schema: scores/1'
    assert lines[1] == 'sample_id,score,label'
    back = read_csv(csv_path, ScoreTable)
    assert np.array_equal(back['score'].values, table['score'].values)
    with pytest.raises(FormatError):
        read_csv(csv_path, TrainHistory)


def test_csv_column_order(csv_path):
    history = TrainHistory([dict(wall_time_s=0.0, auroc=0.5, epoch=0, loss_total=1.0, loss_nce=1.0,
                                 loss_entropy=0.0, mean_norm_normal=1.0, mean_norm_anom=2.0)])
    write_csv(history, csv_path)
    frame = read_csv(csv_path)
    assert list(frame.columns) == TrainHistory._columns


def test_csv_missing_header(csv_path):
    with open(csv_path, 'w', encoding='utf-8') as f:
        f.write('a,b\n1,2\n')
    with pytest.raises(FormatError) as ctx:
        read_csv(csv_path)
    assert ctx.value.offset == 0
