import os

import numpy


# Errors and Exception handlers
class ShapeError(ValueError):
    """Error class for arrays with non-conforming shapes."""

    def __init__(self, message, *shapes):
        if shapes:
            message = "{} (shapes: {})".format(
                message, ", ".join(str(tuple(s)) for s in shapes))
        super(ShapeError, self).__init__(message)
        self.shapes = shapes


class FormatError(ValueError):
    """Error class for corrupt or unsupported binary files."""

    def __init__(self, message, offset=None, path=None):
        where = ""
        if path is not None:
            where += " in {}".format(path)
        if offset is not None:
            where += " at byte offset {}".format(offset)
        super(FormatError, self).__init__(message + where)
        self.offset = offset
        self.path = path


class _ItemizedError(ValueError):

    def __init__(self, problems, title=None):
        problems = listify(problems)
        title = title or self.title
        message = "{}: {}".format(title, "; ".join(problems))
        super(_ItemizedError, self).__init__(message)
        self.problems = problems


class ManifestError(_ItemizedError):
    """Error class for invalid dataset manifests."""
    title = "invalid manifest"


class ConfigError(_ItemizedError):
    """Error class for invalid model, training or generator settings."""
    title = "invalid configuration"


class GradientCheckError(ArithmeticError):
    """Error class for failed or non-evaluable finite difference checks."""

    def __init__(self, message, name=None, index=None):
        if name is not None:
            message = "{} [{}{}]".format(
                message, name, "" if index is None else list(index))
        super(GradientCheckError, self).__init__(message)
        self.name = name
        self.index = index


class LearningError(Exception):
    """Learning error"""


# Checks and conversions

def listify(x):
    """Make a list of the argument if it is not a list."""

    if isinstance(x, list):
        return x
    elif isinstance(x, tuple):
        return list(x)
    else:
        return [x]


def merge_dicts(*dict_args):
    '''
    Given any number of dicts, shallow copy and merge into a new dict,
    precedence goes to key value pairs in latter dicts. Values that are None
    do not override earlier values.
    '''
    result = {}
    for dictionary in dict_args:
        if dictionary is None:
            continue
        result.update(
            {k: v for k, v in dictionary.items() if v is not None})
    return result


def check_finite(x, what="array"):
    """Raise a ValueError when x holds NaN or Inf."""

    if not numpy.all(numpy.isfinite(x)):
        raise ValueError("{} contains non-finite values".format(what))
    return x


def counter_rng(*keys):
    """Counter-based random generator derived from integer keys.

    The generator is a Philox stream whose key is derived from all ``keys``
    (for example ``(seed, video_index)``), so draws do not depend on the order
    in which independent streams are consumed.
    """

    keys = [int(k) for k in keys]
    if any(k < 0 for k in keys):
        raise ValueError("random keys must be non-negative integers")

    return numpy.random.Generator(
        numpy.random.Philox(numpy.random.SeedSequence(keys)))


def worker_count(default=None):
    """Number of worker processes allowed by the SWR_THREADS variable."""

    value = os.environ.get("SWR_THREADS")

    if value is None or value.strip() == "":
        return default if default is not None else (os.cpu_count() or 1)

    try:
        n = int(value)
    except ValueError:
        raise ConfigError("SWR_THREADS must be a positive integer, got "
                          "{!r}".format(value))
    if n <= 0:
        raise ConfigError("SWR_THREADS must be a positive integer, got "
                          "{!r}".format(value))
    return n


def to_builtin(value):
    """Convert nested mappings, sequences and numpy scalars to plain Python.

    The result can be written with ``yaml.safe_dump``; mapping order is kept
    and NaN becomes None.
    """

    if isinstance(value, dict):
        return {to_builtin(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, numpy.ndarray):
        return to_builtin(value.tolist())
    if isinstance(value, (bool, numpy.bool_)):
        return bool(value)
    if isinstance(value, numpy.integer):
        return int(value)
    if isinstance(value, (float, numpy.floating)):
        return None if numpy.isnan(value) else float(value)
    return value
