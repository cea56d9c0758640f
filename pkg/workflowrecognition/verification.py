"""Finite difference suites for the kernels, the losses and the models."""

from collections import OrderedDict

import numpy as np
import pandas

from workflowrecognition.base import LabelTrack
from workflowrecognition.base import ModelSpec
from workflowrecognition.models import get_model
from workflowrecognition.algorithms.gradcheck import finite_diff_check
from workflowrecognition.algorithms.gradcheck import node_check
from workflowrecognition.algorithms.kernels import activation
from workflowrecognition.algorithms.kernels import add_bias
from workflowrecognition.algorithms.kernels import conv1d_causal
from workflowrecognition.algorithms.kernels import linear
from workflowrecognition.algorithms.losses import bce
from workflowrecognition.algorithms.losses import cross_entropy
from workflowrecognition.algorithms.losses import multistage_loss

from workflowrecognition import wr_logging as logging

SCOPES = ('ops', 'losses', 'models', 'all')

OP_TOL = 1e-6
LOSS_TOL = 1e-6
MODEL_TOL = 1e-4

# second difference above which a model coordinate crossed a relu kink
MODEL_KINK_TOL = 1e-8

RESULT_COLUMNS = ['unit', 'max_rel_err', 'tol', 'passed', 'seed', 'worst',
                  'checked', 'skipped']

# instance sizes of the suites
T, D, C, F = 6, 3, 3, 4


def _away_from_zero(rng, shape):
    # relu inputs stay clear of the kink
    return np.sign(rng.standard_normal(shape)) * rng.uniform(0.1, 1.5, shape)


def _op_units():

    units = OrderedDict()

    units['linear'] = lambda rng: node_check(
        linear, OrderedDict([('x', rng.standard_normal((T, D))),
                             ('W', rng.standard_normal((D, F))),
                             ('b', rng.standard_normal(F))]),
        tol=OP_TOL, random_state=rng)

    for k, d in ((1, 1), (2, 1), (3, 2), (3, 4)):
        units['conv1d_causal[k={},d={}]'.format(k, d)] = \
            lambda rng, k=k, d=d: node_check(
                lambda x, K: conv1d_causal(x, K, dilation=d),
                OrderedDict([('x', rng.standard_normal((T, D))),
                             ('K', rng.standard_normal((k, D, F)))]),
                tol=OP_TOL, random_state=rng)

    units['activation[relu]'] = lambda rng: node_check(
        lambda x: activation(x, 'relu'),
        {'x': _away_from_zero(rng, (T, F))}, tol=OP_TOL, random_state=rng)

    for kind in ('sigmoid', 'tanh', 'softmax'):
        units['activation[{}]'.format(kind)] = \
            lambda rng, kind=kind: node_check(
                lambda x: activation(x, kind),
                {'x': rng.standard_normal((T, F))},
                tol=OP_TOL, random_state=rng)

    units['add_bias'] = lambda rng: node_check(
        add_bias, OrderedDict([('x', rng.standard_normal((T, F))),
                               ('b', rng.standard_normal(F))]),
        tol=OP_TOL, random_state=rng)

    return units


def _random_labels(rng, mode):

    if mode == 'multiclass':
        return LabelTrack(rng.integers(0, C, T), C, mode)
    return LabelTrack(rng.integers(0, 2, (T, C)), C, mode)


def _loss_check(loss, labels, scores):

    def func(p):
        value, grad = loss(p['scores'], labels)
        return value, {'scores': grad}

    return finite_diff_check(func, {'scores': scores}, tol=LOSS_TOL)


def _multistage_check(rng, mode):

    labels = _random_labels(rng, mode)
    params = OrderedDict(('stage{}'.format(s), rng.standard_normal((T, C)))
                         for s in range(2))

    def func(p):
        value, grads = multistage_loss(list(p.values()), labels, mode)
        return value, dict(zip(p.keys(), grads))

    return finite_diff_check(func, params, tol=LOSS_TOL)


def _loss_units():

    units = OrderedDict()

    units['cross_entropy'] = lambda rng: _loss_check(
        cross_entropy, _random_labels(rng, 'multiclass'),
        rng.standard_normal((T, C)))
    units['bce'] = lambda rng: _loss_check(
        bce, _random_labels(rng, 'multilabel'), rng.standard_normal((T, C)))

    for mode in ('multiclass', 'multilabel'):
        units['multistage_loss[{}]'.format(mode)] = \
            lambda rng, mode=mode: _multistage_check(rng, mode)

    return units


def check_model(spec, seed=0, X=None, labels=None, tol=MODEL_TOL):
    """Finite difference check of a model composed with its loss.

    Parameters
    ----------
    spec : ModelSpec
        The architecture, best kept tiny.
    seed : int
        Seed of the parameters and, when not given, of the input features
        and labels.

    Returns
    -------
    GradCheckReport
    """

    rng = np.random.default_rng(seed)
    model = get_model(spec)
    params = model.init_params(seed)

    if X is None:
        X = rng.standard_normal((T, spec.feature_dim))
    if labels is None:
        if spec.label_mode == 'multiclass':
            labels = LabelTrack(rng.integers(0, spec.num_classes, len(X)),
                                spec.num_classes)
        else:
            labels = LabelTrack(
                rng.integers(0, 2, (len(X), spec.num_classes)),
                spec.num_classes, 'multilabel')

    def func(p):
        p.zero_grads()
        loss, _ = model.loss_and_grad(p, X, labels)
        return loss, p.grads()

    return finite_diff_check(func, params, tol=tol, kink_tol=MODEL_KINK_TOL)


def model_specs():
    """The tiny architectures of the model suite, by unit name."""

    base = dict(feature_dim=D, num_classes=C, num_filters=F)
    specs = OrderedDict()

    for mode in ('multiclass', 'multilabel'):
        specs['frame-mlp[{}]'.format(mode)] = ModelSpec(
            'frame-mlp', label_mode=mode, **base)
        specs['clip-conv[{}]'.format(mode)] = ModelSpec(
            'clip-conv', window=3, label_mode=mode, **base)
        specs['gru[{}]'.format(mode)] = ModelSpec(
            'gru', num_layers=2, label_mode=mode, **base)
        specs['mstcn[{}]'.format(mode)] = ModelSpec(
            'mstcn', num_stages=2, layers_per_stage=2, kernel_size=3,
            label_mode=mode, **base)

    return specs


def _model_units():

    return OrderedDict(
        (name, lambda rng, spec=spec: check_model(
            spec, seed=int(rng.integers(0, 2 ** 31))))
        for name, spec in model_specs().items())


def suite_units(scope):
    """The check functions of a scope, by unit name."""

    if scope not in SCOPES:
        raise ValueError("scope {!r} unknown. Choose {}".format(
            scope, ", ".join(SCOPES)))

    units = OrderedDict()
    if scope in ('ops', 'all'):
        units.update(_op_units())
    if scope in ('losses', 'all'):
        units.update(_loss_units())
    if scope in ('models', 'all'):
        units.update(_model_units())
    return units


def run_gradcheck(scope='all', seeds=20):
    """Run the finite difference suites of a scope.

    Every unit is checked on ``seeds`` random instances; the worst relative
    error over the instances is reported.

    Parameters
    ----------
    scope : str
        'ops', 'losses', 'models' or 'all'.
    seeds : int
        Number of random instances per unit. Default 20.

    Returns
    -------
    pandas.DataFrame
        One row per unit: the worst relative error, the tolerance, whether
        the unit passed, the seed and coordinate of the worst error and the
        number of checked and skipped coordinates.
    """

    rows = []

    for name, check in suite_units(scope).items():

        worst_report, worst_seed = None, None
        checked = skipped = 0

        for seed in range(seeds):
            report = check(np.random.default_rng(seed))
            checked += report.n_checked
            skipped += report.n_skipped
            if worst_report is None or \
                    report.max_rel_err > worst_report.max_rel_err:
                worst_report, worst_seed = report, seed

        rows.append(OrderedDict([
            ('unit', name), ('max_rel_err', worst_report.max_rel_err),
            ('tol', worst_report.tol), ('passed', worst_report.passed),
            ('seed', worst_seed), ('worst', worst_report.location),
            ('checked', checked), ('skipped', skipped)]))

        logging.info("Gradcheck - {} max rel err {:.3e} ({})".format(
            name, worst_report.max_rel_err,
            "ok" if worst_report.passed else "FAILED"))

    return pandas.DataFrame(rows, columns=RESULT_COLUMNS)
