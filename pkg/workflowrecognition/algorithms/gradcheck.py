"""Finite difference verification of analytic gradients."""

import numpy as np

from workflowrecognition.utils import GradientCheckError

# floor of the relative error denominator
_DENOMINATOR_FLOOR = 1e-8


class GradCheckReport(object):
    """Outcome of a finite difference check.

    Attributes
    ----------
    max_rel_err : float
        The largest relative error over all checked coordinates.
    passed : bool
        True iff max_rel_err < tol.
    worst : tuple
        (parameter name, coordinate, analytic, numeric) of the worst
        coordinate.
    n_checked : int
        The number of checked coordinates.
    n_skipped : int
        Coordinates skipped because the perturbation crossed a kink.
    """

    def __init__(self, max_rel_err, tol, step, worst=None, n_checked=0,
                 n_skipped=0):

        self.max_rel_err = float(max_rel_err)
        self.tol = tol
        self.step = step
        self.worst = worst
        self.n_checked = n_checked
        self.n_skipped = n_skipped
        self.passed = self.max_rel_err < tol

    def __bool__(self):
        return self.passed

    def __repr__(self):
        return "GradCheckReport(max_rel_err={:.3e}, passed={}, worst={})"\
            .format(self.max_rel_err, self.passed, self.worst)

    @property
    def location(self):
        """Human readable 'name[i, j]' of the worst coordinate."""

        if self.worst is None:
            return "-"
        name, index = self.worst[0], self.worst[1]
        return "{}[{}]".format(name, ", ".join(str(i) for i in index))


def relative_error(analytic, numeric):
    """|a - n| / max(|a|, |n|, 1e-8)."""

    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)),
                       _DENOMINATOR_FLOOR)

    return np.abs(analytic - numeric) / denom


def _evaluate(func, params, name=None, index=None):

    result = func(params)
    value = result[0] if isinstance(result, tuple) else result
    value = float(value)

    if not np.isfinite(value):
        raise GradientCheckError(
            "function value is not finite ({})".format(value), name, index)

    return value


def finite_diff_check(func, params, step=1e-5, tol=1e-4, kink_tol=None):
    """Compare analytic gradients with central differences.

    Each coordinate ``theta_i`` is perturbed by ``+step`` and ``-step`` in
    place (and restored) and the numeric derivative
    ``(f(theta + h e_i) - f(theta - h e_i)) / (2h)`` is compared with the
    analytic one.

    Parameters
    ----------
    func : callable
        Called as ``func(params)``; returns ``(value, grads)`` where grads
        maps every parameter name onto an array of the parameter's shape.
    params : mapping
        Parameter name to float64 numpy.ndarray, for example a ParamStore.
    step : float
        The perturbation h, larger than 0.
    tol : float
        The check passes iff the maximum relative error is below tol.
    kink_tol : float, optional
        When given, coordinates with a second difference
        ``|f(theta + h) - 2 f(theta) + f(theta - h)|`` above kink_tol are
        skipped: the perturbation crossed a non-differentiable point (relu)
        and the central difference is meaningless there.

    Returns
    -------
    GradCheckReport
        The maximum relative error and the worst coordinate.

    """

    if step <= 0:
        raise ValueError("step must be larger than 0, got {}".format(step))

    value, grads = func(params)
    if not np.isfinite(value):
        raise GradientCheckError(
            "function value is not finite ({})".format(value))

    analytic = {name: np.array(grads[name], dtype=np.float64, copy=True)
                for name, _ in params.items()}

    max_err = 0.0
    worst = None
    n_checked = 0
    n_skipped = 0

    for name, theta in params.items():

        if analytic[name].shape != theta.shape:
            raise GradientCheckError(
                "gradient shape {} does not match the parameter shape "
                "{}".format(analytic[name].shape, theta.shape), name)

        for index in np.ndindex(*theta.shape):

            original = theta[index]

            theta[index] = original + step
            f_plus = _evaluate(func, params, name, index)
            theta[index] = original - step
            f_minus = _evaluate(func, params, name, index)
            theta[index] = original

            if kink_tol is not None and \
                    abs(f_plus - 2.0 * value + f_minus) > kink_tol:
                n_skipped += 1
                continue

            numeric = (f_plus - f_minus) / (2.0 * step)
            a = analytic[name][index]
            err = float(relative_error(a, numeric))
            n_checked += 1

            if worst is None or err > max_err:
                max_err = err
                worst = (name, index, float(a), float(numeric))

    return GradCheckReport(max_err, tol, step, worst=worst,
                           n_checked=n_checked, n_skipped=n_skipped)


def node_check(kernel, inputs, step=1e-5, tol=1e-6, random_state=None):
    """Finite difference check of a single differentiable kernel.

    The kernel output is reduced to the scalar ``sum(R * output)`` with a
    fixed random projection R, whose gradient is the kernel's backward of R.

    Parameters
    ----------
    kernel : callable
        Called with the input arrays as positional arguments (in the order
        of ``inputs``); returns a DiffNode whose backward yields one
        gradient per input.
    inputs : dict
        Input name to array; checked in insertion order.
    random_state : numpy.random.Generator or int, optional
        Source of the projection.

    Returns
    -------
    GradCheckReport

    """

    if not isinstance(random_state, np.random.Generator):
        random_state = np.random.default_rng(random_state)

    params = {name: np.array(value, dtype=np.float64, copy=True)
              for name, value in inputs.items()}
    names = list(params)

    projection = random_state.standard_normal(
        kernel(*[params[n] for n in names]).output.shape)

    def func(p):
        node = kernel(*[p[n] for n in names])
        grads = node.backward(projection)
        return float(np.sum(projection * node.output)), dict(zip(names, grads))

    return finite_diff_check(func, params, step=step, tol=tol)
