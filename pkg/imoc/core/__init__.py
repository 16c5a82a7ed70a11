# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
from .error import (ImocException, ShapeError, DomainError, GradientError, SupportError,
                    FormatError, ConfigError, InputRangeError, EncoderError,
                    NonFiniteLossError)
from .numerical import DataFrame
from .tensor import Tensor, backward, no_grad, conv2d, stack, as_tensor
from .optim import Adam, SGD, OptimizerState, adam_step
