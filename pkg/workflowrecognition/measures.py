# measures.py

import numpy
import pandas
from sklearn.metrics import confusion_matrix as _sk_confusion_matrix
from sklearn.metrics import multilabel_confusion_matrix

PR_COLUMNS = ['tp', 'fp', 'fn', 'precision', 'recall',
              'precision_defined', 'recall_defined']


def _track(x):
    """Return the values of a LabelTrack, Prediction or array."""

    if hasattr(x, 'argmax_track') and x.argmax_track is not None:
        return numpy.asarray(x.argmax_track)
    return numpy.asarray(getattr(x, 'values', x))


def _check_multiclass(pred, labels):

    if getattr(labels, 'mode', 'multiclass') != 'multiclass' or \
            getattr(pred, 'label_mode', 'multiclass') != 'multiclass':
        raise ValueError("this measure needs multiclass tracks")

    pred, labels = _track(pred), _track(labels)

    if pred.ndim != 1 or labels.ndim != 1:
        raise ValueError("this measure needs multiclass tracks")
    if len(pred) != len(labels):
        raise ValueError("prediction has {} frames, labels have {}".format(
            len(pred), len(labels)))

    return pred, labels


def video_accuracy(pred, labels):
    """Compute the frame accuracy of one video.

    The accuracy is given by correct/T.

    Parameters
    ----------
    pred: numpy.array, Prediction
        The predicted class id per frame (argmax track).
    labels: numpy.array, LabelTrack
        The true class id per frame.

    Returns
    -------
    float
        The accuracy
    """

    pred, labels = _check_multiclass(pred, labels)

    return float(numpy.sum(pred == labels) / len(labels))


def _pr_frame(tp, fp, fn):

    tp, fp, fn = (numpy.asarray(a, dtype=numpy.int64) for a in (tp, fp, fn))

    frame = pandas.DataFrame({'tp': tp, 'fp': fp, 'fn': fn})
    frame['precision_defined'] = (tp + fp) > 0
    frame['recall_defined'] = (tp + fn) > 0

    with numpy.errstate(divide='ignore', invalid='ignore'):
        frame['precision'] = numpy.where(
            frame['precision_defined'], tp / (tp + fp), numpy.nan)
        frame['recall'] = numpy.where(
            frame['recall_defined'], tp / (tp + fn), numpy.nan)

    frame.index.name = 'class'

    return frame[PR_COLUMNS]


def confusion_matrix(pred, labels, num_classes):
    """Compute the C x C confusion matrix of one video.

    Rows are true classes, columns predicted classes.

    Parameters
    ----------
    pred: numpy.array, Prediction
        The predicted class id per frame.
    labels: numpy.array, LabelTrack
        The true class id per frame.
    num_classes: int
        The number of classes C.

    Returns
    -------
    numpy.array
        The frame counts.
    """

    pred, labels = _check_multiclass(pred, labels)

    return _sk_confusion_matrix(labels, pred, labels=numpy.arange(num_classes))


def per_class_pr(pred, labels, num_classes):
    """Compute the precision and recall of every class in one video.

    The precision of class c is given by tp/(tp+fp) and is defined iff
    tp+fp > 0, the recall by tp/(tp+fn) and is defined iff tp+fn > 0.
    Undefined values are NaN.

    Parameters
    ----------
    pred: numpy.array, Prediction
        The predicted class id per frame.
    labels: numpy.array, LabelTrack
        The true class id per frame.
    num_classes: int
        The number of classes C.

    Returns
    -------
    pandas.DataFrame
        One row per class with tp, fp, fn, precision, recall and the
        defined flags.
    """

    cm = confusion_matrix(pred, labels, num_classes)
    tp = numpy.diag(cm)

    return _pr_frame(tp, cm.sum(axis=0) - tp, cm.sum(axis=1) - tp)


def multilabel_pr(probabilities, masks, threshold=0.5):
    """Per-class precision and recall of multilabel decisions.

    A class is predicted active when its probability is at least the
    threshold.

    Parameters
    ----------
    probabilities: numpy.array, Prediction
        The (T, C) probabilities.
    masks: numpy.array, LabelTrack
        The (T, C) binary ground truth.
    threshold: float
        The decision threshold. Default 0.5.

    Returns
    -------
    pandas.DataFrame
        Same layout as :func:`per_class_pr`.
    """

    probabilities = numpy.asarray(
        getattr(probabilities, 'probabilities', probabilities))
    masks = numpy.asarray(getattr(masks, 'values', masks))

    if probabilities.shape != masks.shape or masks.ndim != 2:
        raise ValueError("probabilities {} and masks {} do not conform".format(
            probabilities.shape, masks.shape))

    decisions = (probabilities >= threshold).astype(numpy.int64)
    mcm = multilabel_confusion_matrix(masks.astype(numpy.int64), decisions,
                                      labels=numpy.arange(masks.shape[1]))

    return _pr_frame(mcm[:, 1, 1], mcm[:, 0, 1], mcm[:, 1, 0])


def f1_video(per_class):
    """Compute the video-level precision, recall and F1.

    The mean precision (recall) is averaged over the classes where it is
    defined. The F1 is the harmonic mean of these averages,
    2*P*R/(P+R), and 0 when both are 0.

    Parameters
    ----------
    per_class: pandas.DataFrame
        The output of :func:`per_class_pr` or :func:`multilabel_pr`.

    Returns
    -------
    (float, float, float)
        The mean precision, mean recall and F1.

    Note
    ----
    A side without any defined class (no frame predicted positive, or no
    positive frame at all) counts as 0, which makes the F1 0. Only a video
    where neither precision nor recall is defined raises a ValueError.
    """

    precision = per_class['precision'][per_class['precision_defined']]
    recall = per_class['recall'][per_class['recall_defined']]

    if len(precision) == 0 and len(recall) == 0:
        raise ValueError("no class with defined precision or recall, the "
                         "video metric is empty")

    mean_p = float(precision.mean()) if len(precision) else 0.0
    mean_r = float(recall.mean()) if len(recall) else 0.0

    if mean_p + mean_r == 0:
        return mean_p, mean_r, 0.0

    return mean_p, mean_r, float(2 * mean_p * mean_r / (mean_p + mean_r))


def average_precision(scores, labels):
    """Compute the average precision of one class in one video.

    Frames are ranked by descending score, ties are broken by ascending
    frame index. The AP is the sum of (R_k - R_{k-1}) * P_k over the ranks k
    that hold a positive frame.

    Parameters
    ----------
    scores: numpy.array
        The score per frame.
    labels: numpy.array
        The binary ground truth per frame.

    Returns
    -------
    float
        The average precision, NaN when there are no positive frames.
    """

    scores = numpy.asarray(scores, dtype=numpy.float64)
    labels = numpy.asarray(labels)

    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores {} and labels {} do not conform".format(
            scores.shape, labels.shape))

    n_pos = int(numpy.sum(labels != 0))

    if n_pos == 0:
        return numpy.nan

    order = numpy.argsort(-scores, kind='stable')
    hits = labels[order] != 0

    ranks = numpy.flatnonzero(hits) + 1
    precision_at_hits = numpy.arange(1, n_pos + 1) / ranks

    return float(numpy.sum(precision_at_hits) / n_pos)


def class_average_precisions(probabilities, masks):
    """Average precision of every class of one multilabel video.

    Returns
    -------
    numpy.array
        The AP per class, NaN for classes without positive frames.
    """

    probabilities = numpy.asarray(
        getattr(probabilities, 'probabilities', probabilities))
    masks = numpy.asarray(getattr(masks, 'values', masks))

    return numpy.array([average_precision(probabilities[:, c], masks[:, c])
                        for c in range(masks.shape[1])])
