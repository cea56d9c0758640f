"""
basic inference routines

the number predicates are adapted from pandas
(https://github.com/pandas-dev/pandas) License BSD

"""

from numbers import Integral, Number

import numpy
import pandas


def is_number(obj):
    return isinstance(obj, (Number, numpy.number))


def is_integer(obj):
    return (isinstance(obj, (Integral, numpy.integer)) and
            not isinstance(obj, bool))


def is_pandas_like(x):

    return isinstance(x, (pandas.Series, pandas.DataFrame))


def as_matrix(x, what="matrix"):
    """Return a float64 two dimensional array for x.

    Accepts numpy arrays, nested lists, pandas frames and objects with a
    ``features`` attribute (FeatureSequence). Vectors become one row.
    """

    if hasattr(x, 'features'):
        x = x.features

    if is_pandas_like(x):
        x = x.to_numpy()

    x = numpy.asarray(x, dtype=numpy.float64)

    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2:
        raise ValueError(
            "{} must be two dimensional, got {} dimensions".format(
                what, x.ndim))

    return x


def as_vector(x, what="vector"):
    """Return a float64 one dimensional array for x."""

    x = numpy.asarray(x, dtype=numpy.float64)

    if x.ndim != 1:
        raise ValueError(
            "{} must be one dimensional, got {} dimensions".format(
                what, x.ndim))

    return x
