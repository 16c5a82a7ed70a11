# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Strongly Typed Class Attributes
######################################
Value objects (run configuration, encoder configuration, augmentation policy)
are declared with :class:`~imoc.typed.Typed` attributes. Each attribute is a
property whose setter converts the value to the declared type and runs an
optional validator.

.. code-block:: Python

    class Foo(TypedClass):
        bar = Typed(int, default=3, check=lambda v: v > 0, doc="Positive int")

    Foo(bar="4").bar     # 4
    Foo(bar=-1)          # ConfigError

Conversion or validation failures raise
:class:`~imoc.core.error.ConfigError` naming the attribute.
"""
from numbers import Integral, Real
from imoc.core.error import ConfigError


_TRUE = ("true", "yes", "on", "1")
_FALSE = ("false", "no", "off", "0")


def _to_bool(value):
    if isinstance(value, str):
        v = value.strip().lower()
        if v in _TRUE:
            return True
        if v in _FALSE:
            return False
        raise ValueError("not a boolean: {!r}".format(value))
    if value in (0, 1):
        return bool(value)
    raise ValueError("not a boolean: {!r}".format(value))


def _to_int(value):
    if isinstance(value, Real) and not isinstance(value, Integral) and not float(value).is_integer():
        raise ValueError("not integral: {!r}".format(value))
    return int(value)


def _typed_from_items(items):
    dct = {}
    for name, attr in items:
        if isinstance(attr, Typed):
            dct[name] = attr(name)
    return dct


def yield_typed(obj_or_cls):
    """
    Generator that yields typed attribute names of the class (or object's class)
    in declaration order.
    """
    if not isinstance(obj_or_cls, type):
        obj_or_cls = type(obj_or_cls)
    seen = set()
    for klass in reversed(obj_or_cls.__mro__):
        for attrname, attr in vars(klass).items():
            if (isinstance(attr, property) and isinstance(attr.__doc__, str)
                    and "__typed__" in attr.__doc__ and attrname not in seen):
                seen.add(attrname)
                yield attrname


class Typed(object):
    """
    A representation of a strongly typed class attribute.

    Args:
        types (iterable, type): Iterable of types or type
        default: Value returned when the attribute was never set
        check (callable): Validator returning True for legal (converted) values
        doc (str): Documentation
        autoconv (bool): Attempt automatic type conversion when setting (default true)
        allow_none (bool): As an additional type, allow None (default false)
    """
    def __call__(self, name):
        priv = "_" + name

        def getter(this):
            return getattr(this, priv, self.default)

        def setter(this, value):
            if value is None:
                if not self.allow_none:
                    raise ConfigError(name, "may not be None")
            elif not isinstance(value, self.types) or (bool in self.types and not isinstance(value, bool)):
                if not self.autoconv:
                    raise ConfigError(name, "cannot have type {}, must be {}".format(
                        type(value).__name__, self.typenames))
                for t in self.types:
                    try:
                        value = _to_bool(value) if t is bool else _to_int(value) if t is int else t(value)
                        break
                    except (TypeError, ValueError):
                        continue
                else:
                    raise ConfigError(name, "cannot convert {!r} to {}".format(value, self.typenames))
            if value is not None and self.check is not None and not self.check(value):
                raise ConfigError(name, "illegal value {!r}".format(value))
            setattr(this, priv, value)

        return property(getter, setter, doc=self.doc)

    @property
    def typenames(self):
        return "/".join(t.__name__ for t in self.types)

    def __init__(self, types, default=None, check=None, doc=None, autoconv=True,
                 allow_none=False):
        self.types = types if isinstance(types, (tuple, list)) else (types, )
        self.types = tuple(self.types)
        self.default = default
        self.check = check
        self.doc = str(doc) + "\n\n__typed__"
        self.autoconv = autoconv
        self.allow_none = allow_none


class TypedMeta(type):
    """
    Metaclass converting :class:`~imoc.typed.Typed` declarations into
    properties at class creation.
    """
    def __new__(mcs, name, bases, namespace):
        namespace.update(_typed_from_items(namespace.items()))
        return super(TypedMeta, mcs).__new__(mcs, name, bases, namespace)


class TypedClass(object, metaclass=TypedMeta):
    """
    Base class for value objects with strongly typed attributes. Keyword
    arguments to the constructor set attributes; unknown names are rejected.

    .. code-block:: Python

        class Foo(TypedClass):
            bar = Typed(int, default=1)

        Foo(bar=2).to_dict()    # {'bar': 2}
    """
    def to_dict(self):
        """Attribute name to value mapping, in declaration order."""
        return {name: getattr(self, name) for name in yield_typed(self)}

    def replace(self, **kwargs):
        """Copy with some attributes changed."""
        values = self.to_dict()
        values.update(kwargs)
        return self.__class__(**values)

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __repr__(self):
        args = ", ".join("{}={!r}".format(k, v) for k, v in self.to_dict().items())
        return "{}({})".format(self.__class__.__name__, args)

    def __init__(self, **kwargs):
        names = set(yield_typed(self))
        for key, value in kwargs.items():
            if key not in names:
                raise ConfigError(key, "unknown attribute of {}".format(self.__class__.__name__))
            setattr(self, key, value)
