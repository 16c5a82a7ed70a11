# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Exceptions
#################################
Every error raised by imoc derives from :class:`~imoc.core.error.ImocException`.
Structured details (op names, shapes, byte offsets, config keys) are kept as
attributes so that the command line can report them machine-readably.
"""
import re


class ImocException(Exception):
    """
    Exception with support for logging.
    """
    def fields(self):
        """Structured attributes of the error (used by the CLI report)."""
        return {k: v for k, v in vars(self).items() if not k.startswith('_')}

    def __init__(self, msg):
        spacer = '\n' + ' ' * len(self.__class__.__name__) + '  '    # Align the message
        msg = re.sub(r'\s*\n\s*', spacer, msg)
        super().__init__(msg)


class ShapeError(ImocException):
    """Operand shapes are incompatible for the named op."""
    _msg = 'Op {0} cannot combine shapes {1}.'

    def __init__(self, op, *shapes):
        self.op = op
        self.shapes = [tuple(s) for s in shapes]
        super().__init__(self._msg.format(op, ', '.join(str(s) for s in self.shapes)))


class DomainError(ImocException):
    """Input outside the mathematical domain of the op (e.g. log of 0)."""
    _msg = 'Op {0} domain violation: {1}'

    def __init__(self, op, detail):
        self.op = op
        super().__init__(self._msg.format(op, detail))


class GradientError(ImocException):
    """Misuse of the reverse pass (non-scalar root, wrong precision)."""
    pass


class SupportError(ImocException):
    """
    Absolute continuity violated: p > 0 where q = 0.
    """
    _msg = 'Support violation at index {0}: p={1!r} but q={2!r}.'

    def __init__(self, index, p, q):
        self.index = tuple(int(i) for i in index)
        super().__init__(self._msg.format(self.index, p, q))


class FormatError(ImocException):
    """
    Malformed binary payload (IDX, CIFAR, checkpoint); offset is in bytes.
    """
    _msg = 'Malformed {0} at byte offset {1}: {2}'

    def __init__(self, fmt, offset, detail):
        self.format = fmt
        self.offset = int(offset)
        super().__init__(self._msg.format(fmt, offset, detail))


class ConfigError(ImocException):
    """Bad configuration key or value."""
    _msg = 'Config key {0!r}: {1}'

    def __init__(self, key, detail):
        self.key = key
        self.detail = detail
        super().__init__(self._msg.format(key, detail))


class InputRangeError(ImocException):
    """Encoder input outside the normalized [-1, 1] range."""
    pass


class EncoderError(ImocException):
    """Encoder cannot be built for the requested input shape."""
    _msg = 'Layer {0}: {1}'

    def __init__(self, layer, detail):
        self.layer = layer
        super().__init__(self._msg.format(layer, detail))


class NonFiniteLossError(ImocException):
    """
    Training produced a NaN/Inf loss; parameters were restored to the last
    good step.
    """
    _msg = 'Non-finite loss {0!r} at epoch {1}, batch {2}.'

    def __init__(self, loss, epoch, batch_index):
        self.epoch = int(epoch)
        self.batch_index = int(batch_index)
        super().__init__(self._msg.format(loss, epoch, batch_index))


class UsageError(ImocException):
    """Command line arguments rejected by the parser."""
    _msg = '{0}: {1}'

    def __init__(self, prog, detail):
        self.prog = prog
        super().__init__(self._msg.format(prog, detail))
