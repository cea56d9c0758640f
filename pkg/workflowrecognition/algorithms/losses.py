"""Frame-wise classification losses with their score gradients."""

import numpy as np
from scipy import special

from workflowrecognition.utils import ShapeError
from workflowrecognition.types import as_matrix

MULTICLASS = 'multiclass'
MULTILABEL = 'multilabel'


def _label_array(labels):

    # LabelTrack or plain array
    return np.asarray(getattr(labels, 'values', labels))


def label_mode(labels):
    """Return 'multiclass' for a class id track, 'multilabel' for masks."""

    mode = getattr(labels, 'mode', None)
    if mode is not None:
        return mode
    return MULTICLASS if _label_array(labels).ndim == 1 else MULTILABEL


def cross_entropy(scores, labels):
    """Mean softmax cross-entropy over frames.

    Parameters
    ----------
    scores : numpy.ndarray
        Pre-activation scores of shape (T, C).
    labels : LabelTrack, numpy.ndarray
        Class id per frame, in [0, C).

    Returns
    -------
    (float, numpy.ndarray)
        The loss and its gradient ``(softmax(scores) - onehot) / T``.

    """

    scores = as_matrix(scores, "scores")
    y = _label_array(labels)
    T, C = scores.shape

    if y.ndim != 1 or y.shape[0] != T:
        raise ShapeError("scores and class labels do not conform",
                         scores.shape, y.shape)

    if not np.issubdtype(y.dtype, np.integer):
        if np.any(y != np.round(y)):
            raise ValueError("class labels must be integers")
        y = y.astype(np.int64)

    bad = np.flatnonzero((y < 0) | (y >= C))
    if len(bad):
        raise ValueError("label {} at frame {} outside [0, {})".format(
            y[bad[0]], bad[0], C))

    log_p = special.log_softmax(scores, axis=1)
    loss = -np.sum(log_p[np.arange(T), y]) / T

    d_scores = np.exp(log_p)
    d_scores[np.arange(T), y] -= 1.0
    d_scores /= T

    return float(loss), d_scores


def bce(scores, labels):
    """Mean binary cross-entropy over all frames and classes.

    Computed in the stable form ``max(s, 0) - s y + log(1 + exp(-|s|))``.

    Parameters
    ----------
    scores : numpy.ndarray
        Pre-activation scores of shape (T, C).
    labels : LabelTrack, numpy.ndarray
        Binary mask of shape (T, C).

    Returns
    -------
    (float, numpy.ndarray)
        The loss and its gradient ``(sigmoid(scores) - y) / (T C)``.

    """

    scores = as_matrix(scores, "scores")
    y = _label_array(labels)

    if y.shape != scores.shape:
        raise ShapeError("scores and label masks do not conform",
                         scores.shape, y.shape)

    if np.any((y != 0) & (y != 1)):
        t, c = np.argwhere((y != 0) & (y != 1))[0]
        raise ValueError(
            "non-binary label {} at frame {}, class {}".format(y[t, c], t, c))

    y = y.astype(np.float64)
    n = scores.size

    loss = np.sum(np.maximum(scores, 0.0) - scores * y +
                  np.log1p(np.exp(-np.abs(scores)))) / n
    d_scores = (special.expit(scores) - y) / n

    return float(loss), d_scores


def frame_loss(scores, labels, mode=None):
    """Dispatch to cross_entropy or bce on the label mode."""

    mode = mode or label_mode(labels)

    if mode == MULTICLASS:
        return cross_entropy(scores, labels)
    elif mode == MULTILABEL:
        return bce(scores, labels)

    raise ValueError("label mode {!r} unknown. Choose 'multiclass' or "
                     "'multilabel'".format(mode))


def multistage_loss(stage_scores, labels, mode=None):
    """Unweighted sum of the frame loss of every stage.

    Parameters
    ----------
    stage_scores : list of numpy.ndarray
        One (T, C) score matrix per stage.
    labels : LabelTrack, numpy.ndarray
        The ground truth shared by every stage.

    Returns
    -------
    (float, list of numpy.ndarray)
        The summed loss and the gradient per stage.

    """

    if len(stage_scores) < 1:
        raise ValueError("expected at least one stage")

    total = 0.0
    grads = []

    for scores in stage_scores:
        loss, d_scores = frame_loss(scores, labels, mode)
        total += loss
        grads.append(d_scores)

    return total, grads
