"""Adam optimisation and the training loop of the models."""

from collections import OrderedDict

import numpy as np
import pandas

from workflowrecognition.base import BACKBONE_KINDS
from workflowrecognition.base import LabelTrack
from workflowrecognition.evaluation import evaluate_pairs
from workflowrecognition.models import extract_features
from workflowrecognition.models import get_model
from workflowrecognition.utils import ConfigError
from workflowrecognition.utils import LearningError
from workflowrecognition.utils import counter_rng
from workflowrecognition.types import is_integer
from workflowrecognition.types import is_number

from workflowrecognition import wr_logging as logging

HISTORY_COLUMNS = ['epoch', 'lr', 'loss']


class TrainConfig(object):
    """Optimisation settings.

    Parameters
    ----------
    lr : float
        Initial learning rate, larger than 0. Default 1e-3.
    lr_decay : float
        Multiplicative decay of the step schedule, in (0, 1]. Default 0.1.
    lr_interval : int
        Epochs between two decays. Default 10.
    epochs : int
        Number of epochs. Default 30; 0 returns the initial parameters.
    beta1, beta2, eps : float
        Adam constants. Default 0.9, 0.999, 1e-8.
    seed : int
        Seed of the initialisation and of the shuffling. Default 0.
    frame_batch : int
        Minibatch size (frames) of the frame-mlp. Default 64.
    """

    _fields = ('lr', 'lr_decay', 'lr_interval', 'epochs', 'beta1', 'beta2',
               'eps', 'seed', 'frame_batch')

    def __init__(self, lr=1e-3, lr_decay=0.1, lr_interval=10, epochs=30,
                 beta1=0.9, beta2=0.999, eps=1e-8, seed=0, frame_batch=64):

        self.lr = lr
        self.lr_decay = lr_decay
        self.lr_interval = lr_interval
        self.epochs = epochs
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.seed = seed
        self.frame_batch = frame_batch

        self.validate()

    def validate(self):

        problems = []

        if not is_number(self.lr) or not self.lr > 0:
            problems.append("lr must be larger than 0, got {!r}".format(
                self.lr))
        if not is_number(self.lr_decay) or not 0 < self.lr_decay <= 1:
            problems.append("lr_decay must be in (0, 1], got {!r}".format(
                self.lr_decay))
        for field, lower in (('lr_interval', 1), ('epochs', 0),
                             ('seed', 0), ('frame_batch', 1)):
            value = getattr(self, field)
            if not is_integer(value) or value < lower:
                problems.append("{} must be an integer >= {}, got {!r}".format(
                    field, lower, value))
        for field in ('beta1', 'beta2'):
            value = getattr(self, field)
            if not is_number(value) or not 0 <= value < 1:
                problems.append("{} must be in [0, 1), got {!r}".format(
                    field, value))
        if not is_number(self.eps) or not self.eps > 0:
            problems.append("eps must be larger than 0, got {!r}".format(
                self.eps))

        if problems:
            raise ConfigError(problems)

    def to_dict(self):
        return OrderedDict((f, getattr(self, f)) for f in self._fields)

    @classmethod
    def from_dict(cls, d):

        unknown = sorted(set(d) - set(cls._fields))
        if unknown:
            raise ConfigError(
                ["unknown training setting {!r}".format(k) for k in unknown])
        return cls(**d)

    def replace(self, **changes):
        d = self.to_dict()
        d.update(changes)
        return TrainConfig.from_dict(d)


class AdamState(object):
    """First and second moment estimates of every parameter.

    Parameters
    ----------
    params : ParamStore
        The parameters to track; moments start at zero.
    """

    def __init__(self, params):

        self.m = OrderedDict((k, np.zeros_like(v)) for k, v in params.items())
        self.v = OrderedDict((k, np.zeros_like(v)) for k, v in params.items())
        self.t = 0


def adam_step(params, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Apply one Adam update and zero the gradients.

    ``m <- b1 m + (1 - b1) g``, ``v <- b2 v + (1 - b2) g^2`` and
    ``theta <- theta - lr m_hat / (sqrt(v_hat) + eps)`` with the bias
    corrected moments ``m_hat = m / (1 - b1^t)``, ``v_hat = v / (1 - b2^t)``.

    Parameters
    ----------
    params : ParamStore
        Parameters with populated gradients; updated in place.
    state : AdamState
        The moment estimates; updated in place.
    lr : float
        The learning rate of this step.

    Returns
    -------
    (ParamStore, AdamState)

    """

    for name in params.keys():
        if not np.all(np.isfinite(params.grad(name))):
            raise LearningError(
                "non-finite gradient in parameter {!r}".format(name))

    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t

    for name, theta in params.items():

        g = params.grad(name)
        m = state.m[name]
        v = state.v[name]

        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)

        m_hat = m / bc1
        v_hat = v / bc2
        theta -= lr * m_hat / (np.sqrt(v_hat) + eps)

    params.zero_grads()

    return params, state


def lr_at(epoch, cfg):
    """Step schedule: ``lr * decay ** floor(epoch / interval)``.

    Parameters
    ----------
    epoch : int
        The epoch, counted from 0.
    cfg : TrainConfig
        Provides lr, lr_decay and lr_interval.

    Returns
    -------
    float
        The learning rate of the epoch.
    """

    if epoch < 0:
        raise ValueError("epoch must be >= 0, got {}".format(epoch))

    return cfg.lr * cfg.lr_decay ** (epoch // cfg.lr_interval)


def _as_pairs(dataset):

    if dataset is None:
        return []
    if hasattr(dataset, 'pairs'):
        return list(dataset.pairs())
    return list(dataset)


def _check_dataset(spec, pairs, what):

    for seq, labels in pairs:

        if seq.D != spec.feature_dim:
            raise LearningError(
                "{} video {} has {} features per frame, the model expects "
                "{}".format(what, seq.video_id, seq.D, spec.feature_dim))
        if labels.mode != spec.label_mode or labels.C != spec.num_classes:
            raise LearningError(
                "{} video {} has {} labels with {} classes, the model expects "
                "{} with {}".format(what, seq.video_id, labels.mode, labels.C,
                                    spec.label_mode, spec.num_classes))
        if labels.T != seq.T:
            raise LearningError(
                "{} video {} has {} frames but {} labels".format(
                    what, seq.video_id, seq.T, labels.T))


def _frame_batches(pairs, batch_size, rng):

    X = np.vstack([seq.features for seq, _ in pairs])
    y = np.concatenate([labels.values for _, labels in pairs], axis=0)

    order = rng.permutation(X.shape[0])

    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        yield X[idx], y[idx]


def train(spec, cfg, train_set, valid_set=None):
    """Train a model from scratch.

    Temporal models (clip-conv, gru, mstcn) take one optimiser step per
    video, the video order is reshuffled every epoch. The frame-mlp steps
    over shuffled minibatches of frames. The learning rate follows the step
    schedule of :func:`lr_at`.

    Parameters
    ----------
    spec : ModelSpec
        The architecture.
    cfg : TrainConfig
        Optimisation settings; ``cfg.seed`` seeds the initialisation and the
        shuffling.
    train_set : list of (FeatureSequence, LabelTrack)
        The training videos.
    valid_set : list of (FeatureSequence, LabelTrack), optional
        When given, the validation metrics of every epoch are added to the
        history.

    Returns
    -------
    (ParamStore, pandas.DataFrame)
        The final parameters and one history row per epoch with the
        columns epoch, lr, loss (and validation metrics).

    """

    pairs = _as_pairs(train_set)
    valid_pairs = _as_pairs(valid_set)

    if not pairs:
        raise LearningError("the training set is empty")

    _check_dataset(spec, pairs, "training")
    _check_dataset(spec, valid_pairs, "validation")

    model = get_model(spec)
    params = model.init_params(cfg.seed)
    state = AdamState(params)

    logging.info("Training - start {} on {} videos, {} parameters".format(
        spec.kind, len(pairs), params.size))

    rows = []

    for epoch in range(cfg.epochs):

        lr = lr_at(epoch, cfg)
        rng = counter_rng(cfg.seed, epoch)
        losses = []

        if spec.kind == 'frame-mlp':
            batches = _frame_batches(pairs, cfg.frame_batch, rng)
        else:
            batches = (pairs[i] for i in rng.permutation(len(pairs)))

        for X, y in batches:

            if not isinstance(y, LabelTrack):
                y = LabelTrack(y, spec.num_classes, spec.label_mode)

            loss, _ = model.loss_and_grad(params, X, y)
            adam_step(params, state, lr, cfg.beta1, cfg.beta2, cfg.eps)
            losses.append(loss)

        row = OrderedDict([('epoch', epoch), ('lr', lr),
                           ('loss', float(np.mean(losses)))])

        if valid_pairs:
            summary = evaluate_pairs(
                [predict(params, spec, seq) for seq, _ in valid_pairs],
                [labels for _, labels in valid_pairs]).summary
            for key, value in summary.items():
                row['valid_' + key] = value

        rows.append(row)

        logging.info("Training - epoch {} lr={:g} loss={:.6f}".format(
            epoch, lr, row['loss']))

    history = pandas.DataFrame(rows, columns=HISTORY_COLUMNS if not rows
                               else list(rows[0].keys()))

    return params, history


def predict(params, spec, V):
    """Pure forward pass of a model.

    Parameters
    ----------
    params : ParamStore
        The model parameters (not modified).
    spec : ModelSpec
        The architecture.
    V : FeatureSequence, numpy.ndarray
        The (T, D) features of one video.

    Returns
    -------
    Prediction
    """

    return get_model(spec).forward(params, V)


def embed_dataset(params, spec, dataset):
    """Replace the features of every video by a backbone embedding.

    Parameters
    ----------
    params : ParamStore
        Trained frame-mlp or clip-conv parameters.
    spec : ModelSpec
        The backbone architecture.
    dataset : list of (FeatureSequence, LabelTrack)

    Returns
    -------
    list of (FeatureSequence, LabelTrack)
        The embedded videos with the original labels.
    """

    if spec.kind not in BACKBONE_KINDS:
        raise ConfigError("backbone must be one of {}, got {!r}".format(
            ", ".join(BACKBONE_KINDS), spec.kind))

    return [(extract_features(params, seq, spec), labels)
            for seq, labels in _as_pairs(dataset)]


def write_history(history, path):
    """Write the training history as JSON lines, one record per epoch."""

    history.to_json(path, orient='records', lines=True, double_precision=15)


def read_history(path):
    """Read a JSON lines training history."""

    return pandas.read_json(path, orient='records', lines=True)

