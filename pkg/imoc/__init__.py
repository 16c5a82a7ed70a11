# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
IMOC
#########
Information-maximizing one-class anomaly detection: contrastive encoders
trained with an entropy-regularized mutual information objective, normal
score evaluation and an exact discrete oracle for the underlying KL theory.
"""
import os
import logging.config
import yaml

with open(os.path.join(os.path.dirname(__file__),
          'conf', 'logging.yml'), 'r') as f:
    _log = yaml.safe_load(f.read())
logging.config.dictConfig(_log)

from .core import Tensor, backward, no_grad, Adam, SGD, DataFrame
from .config import RunConfig, load_config
from .models import EncoderConfig, build_encoder
from .evaluate import auroc


from ._version import __version__
