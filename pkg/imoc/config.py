# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Run Configuration
###################################
Every hyperparameter of a run lives in a :class:`~imoc.config.RunConfig`.
Config files are UTF-8 YAML mappings with flat dotted keys; nested mappings
are accepted and flattened, so the two documents below are equivalent.

.. code-block:: yaml

    beta: 20.0
    augment.flip_p: 0.5
    data.path: /data/mnist

.. code-block:: yaml

    beta: 20.0
    augment:
        flip_p: 0.5
    data:
        path: /data/mnist

Defaults come from the packaged ``defaults.yml``. Keys map to attributes by
replacing dots with underscores (``data.path`` -> ``data_path``), except
``augment.*`` keys which set the :class:`~imoc.augment.AugmentPolicy`.
"""
import yaml
from functools import lru_cache
from collections import OrderedDict
from imoc.typed import Typed, TypedClass, yield_typed
from imoc.static import resource
from imoc.core.error import ConfigError
from imoc.augment import AugmentPolicy
from imoc.estimators import SimilarityConfig
from imoc.models import EncoderConfig, VARIANT_DEFAULTS


DATASETS = ('mnist', 'fashion-mnist', 'cifar10', 'cifar100', 'synth')
GENERATORS = ('gauss-clusters', 'blobs-images')
SCORES = ('ori', 'rand', 'mc')


def _read_yaml(path):
    with open(path, 'r', encoding='utf-8') as f:
        try:
            doc = yaml.safe_load(f.read())
        except yaml.YAMLError as e:
            raise ConfigError('<document>', 'malformed YAML: {}'.format(e))
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError('<document>', 'expected a key-value mapping, got {}'.format(type(doc).__name__))
    return doc


def flatten(mapping, prefix=''):
    """Yield (dotted key, value) pairs of a nested mapping in document order."""
    for key, value in mapping.items():
        key = prefix + str(key)
        if isinstance(value, dict):
            for item in flatten(value, key + '.'):
                yield item
        else:
            yield key, value


@lru_cache(maxsize=1)
def default_items():
    """Packaged defaults as (dotted key, value) pairs."""
    return tuple(flatten(_read_yaml(resource('defaults.yml'))))


def _nonneg(v):
    return v >= 0


def _positive(v):
    return v > 0


def _optional_positive(v):
    return v is None or v > 0


def _betas(v):
    return len(v) > 0 and all(float(b) >= 0 for b in v)


class RunConfig(TypedClass):
    """
    Hyperparameters of one training or evaluation run.

    Constructing with no arguments gives the packaged defaults; keyword
    arguments use attribute names (``data_path``, not ``data.path``).
    ``c1`` scales similarities inside the clamp; null means the encoder's
    latent dimension.
    """
    dataset = Typed(str, check=lambda v: v in DATASETS, doc="mnist | fashion-mnist | cifar10 | cifar100 | synth")
    normal_class = Typed(int, check=_nonneg, doc="Class used as normal")
    beta = Typed(float, check=_nonneg, doc="Entropy weight")
    p_norm = Typed(int, check=lambda v: v in (1, 2), doc="Entropy reference: 1 Laplace, 2 Gaussian")
    entropy_squared = Typed(bool, allow_none=True, doc="Square the norm (default: p_norm == 2)")
    estimator = Typed(str, check=lambda v: v in ('nce', 'jsd'), doc="Mutual information estimator")
    variant = Typed(str, check=lambda v: v in VARIANT_DEFAULTS, doc="Encoder variant")
    extension = Typed(bool, doc="Train the global+local extension model")
    epochs = Typed(int, check=_nonneg)
    batch_size = Typed(int, check=lambda v: v >= 2, doc="Samples per batch (2N views)")
    lr = Typed(float, check=_positive, doc="Learning rate")
    optimizer = Typed(str, check=lambda v: v in ('adam', 'sgd'))
    momentum = Typed(float, check=lambda v: 0 <= v < 1, doc="SGD momentum")
    seed = Typed(int, check=lambda v: 0 <= v < 2**64)
    c1 = Typed(float, allow_none=True, check=_optional_positive, doc="Similarity scale (null: latent dimension)")
    c2 = Typed(float, check=_positive, doc="Similarity clamp bound")
    eval_every = Typed(int, check=_positive, doc="Epochs between evaluations")
    precision = Typed(int, check=lambda v: v in (32, 64))
    score = Typed(str, check=lambda v: v in SCORES, doc="Normal score of the eval command (base model)")
    score_h = Typed(int, check=_positive, doc="Monte Carlo view pairs")
    eval_batch = Typed(int, check=_positive)
    eval_repeats = Typed(int, check=_positive, doc="Repeated test evaluations")
    record_wall_time = Typed(bool, doc="Record wall time in histories (breaks byte identity)")
    checkpoint = Typed(str, doc="Checkpoint file name inside the output directory")
    data_path = Typed(str, doc="Directory of the dataset files")
    data_pad_to = Typed(int, allow_none=True, check=_optional_positive, doc="Pad images to this size")
    data_limit_train = Typed(int, allow_none=True, check=_optional_positive)
    data_limit_test = Typed(int, allow_none=True, check=_optional_positive)
    synth_generator = Typed(str, check=lambda v: v in GENERATORS)
    synth_n_classes = Typed(int, check=lambda v: v >= 2)
    synth_n_train = Typed(int, check=_positive, doc="Training samples per class")
    synth_n_test = Typed(int, check=_positive, doc="Test samples per class")
    synth_separation = Typed(float, check=_nonneg, doc="Cluster separation in residual standard deviations")
    synth_offset = Typed(float, check=_nonneg)
    synth_noise = Typed(float, check=_nonneg)
    model_ndf = Typed(int, allow_none=True, check=_optional_positive)
    model_nrkhs = Typed(int, allow_none=True, check=_optional_positive)
    model_ndepth = Typed(int, allow_none=True, check=_optional_positive)
    sweep_betas = Typed(tuple, check=_betas, doc="Entropy weights of the sweep-beta command")
    augment = Typed(AugmentPolicy, autoconv=False, doc="View augmentation policy")

    def similarity(self, latent_dim):
        """Clamp constants for an encoder of the given latent dimension."""
        return SimilarityConfig(c1=latent_dim if self.c1 is None else self.c1, c2=self.c2)

    def encoder_config(self, input_shape):
        return EncoderConfig(variant=self.variant, input_shape=tuple(input_shape),
                             ndf=self.model_ndf, nrkhs=self.model_nrkhs,
                             ndepth=self.model_ndepth, projection=self.extension)

    def synth_spec(self):
        return {k: getattr(self, 'synth_' + k) for k in
                ('generator', 'n_classes', 'n_train', 'n_test', 'separation', 'offset', 'noise')}

    def policy(self, grayscale=False):
        return self.augment.for_grayscale() if grayscale else self.augment

    def to_flat(self):
        """Dotted key to plain value mapping (round trips through load_mapping)."""
        flat = OrderedDict()
        for name in yield_typed(self):
            value = getattr(self, name)
            if name == 'augment':
                for field, v in value.to_dict().items():
                    flat['augment.' + field] = v
            else:
                flat[ATTR_KEYS[name]] = list(value) if isinstance(value, tuple) else value
        return flat

    def dumps(self):
        """YAML text of :meth:`~imoc.config.RunConfig.to_flat`."""
        return yaml.safe_dump(dict(self.to_flat()), sort_keys=False, allow_unicode=True)

    def __init__(self, **kwargs):
        super(RunConfig, self).__init__()
        for key, value in default_items():
            _set(self, key, value)
        self.augment = AugmentPolicy()
        names = set(yield_typed(self))
        for name, value in kwargs.items():
            if name not in names:
                raise ConfigError(name, 'unknown attribute of RunConfig')
            try:
                setattr(self, name, value)
            except ConfigError as e:
                raise ConfigError(ATTR_KEYS.get(name, name), e.detail)


def _set(cfg, key, value):
    try:
        setattr(cfg, KEY_ATTRS[key], value)
    except ConfigError as e:
        raise ConfigError(key, e.detail)


KEY_ATTRS = OrderedDict((key, key.replace('.', '_')) for key, _ in default_items())
ATTR_KEYS = OrderedDict((attr, key) for key, attr in KEY_ATTRS.items())
AUGMENT_FIELDS = tuple(yield_typed(AugmentPolicy))


def load_mapping(mapping, base=None):
    """
    Build a run configuration from a (possibly nested) key-value mapping.

    Keys are validated in document order; the first unknown key or illegal
    value raises :class:`~imoc.core.error.ConfigError` naming that key.

    Args:
        mapping (dict): Dotted or nested keys
        base (RunConfig): Starting point (defaults if None)
    """
    cfg = RunConfig() if base is None else base.replace()
    policy = cfg.augment.replace()
    for key, value in flatten(mapping):
        if key.startswith('augment.'):
            field = key[len('augment.'):]
            if field not in AUGMENT_FIELDS:
                raise ConfigError(key, 'unknown key')
            try:
                setattr(policy, field, value)
            except ConfigError as e:
                raise ConfigError(key, e.detail)
        elif key in KEY_ATTRS:
            _set(cfg, key, value)
        else:
            raise ConfigError(key, 'unknown key')
    cfg.augment = policy.replace()
    return cfg


def load_config(path=None, **overrides):
    """
    Load a run configuration file.

    Args:
        path (str): YAML file (None for the defaults)
        \\*\\*overrides: Attribute values applied last (e.g. ``seed=3``)

    Returns:
        cfg (RunConfig): Validated configuration
    """
    cfg = RunConfig() if path is None else load_mapping(_read_yaml(path))
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return cfg.replace(**overrides) if overrides else cfg
