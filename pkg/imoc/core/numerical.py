# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Tabular Results
###################################
Every tabular artifact (training history, scores, theory reports, sweeps) is a
:class:`~imoc.core.numerical.DataFrame` subclass declaring its required
columns. Construction with a missing required column fails loudly, so CSV
schemas cannot drift silently.

.. code-block:: Python

    class ScoreTable(DataFrame):
        _schema = 'scores'
        _index = 'row'
        _columns = ['sample_id', 'score', 'label']
"""
import logging
import pandas as pd
from imoc.core.error import ImocException


class RequiredColumnError(ImocException):
    """A table was built without one of its declared columns."""
    _msg = 'Missing required column(s) {0} for {1}.'

    def __init__(self, missing, clsname):
        self.missing = sorted(missing)
        super().__init__(self._msg.format(', '.join(self.missing), clsname))


class Numerical(object):
    """
    Base mixin providing logging and a clean representation.
    """
    @property
    def log(self):
        name = '.'.join([self.__module__,
                         self.__class__.__name__])
        return logging.getLogger(name)

    def __repr__(self):
        name = self.__class__.__name__
        return '{0}{1}'.format(name, self.shape)

    def __str__(self):
        return self.__repr__()


class DataFrame(Numerical, pd.DataFrame):
    """
    A data table with required columns and a schema name.

    Attributes:
        _schema (str): Schema name written in CSV headers (see :mod:`~imoc.util.io`)
        _index (str): Name of index
        _columns (list): Required columns, also the leading column order
    """
    _schema = None
    _index = None
    _columns = []

    @property
    def _constructor(self):
        return pd.DataFrame

    def ordered(self):
        """Return a plain frame with required columns first (extra columns after)."""
        extra = [c for c in self.columns if c not in self._columns]
        return pd.DataFrame(self[list(self._columns) + extra])

    def copy(self, *args, **kwargs):
        cls = self.__class__
        return cls(pd.DataFrame(self).copy(*args, **kwargs))

    def __init__(self, *args, **kwargs):
        super(DataFrame, self).__init__(*args, **kwargs)
        if len(self) > 0 and self._columns:
            missing = set(self._columns).difference(self.columns)
            if missing:
                raise RequiredColumnError(missing, self.__class__.__name__)
        if self._index is not None and self.index.name != self._index:
            self.index.name = self._index
