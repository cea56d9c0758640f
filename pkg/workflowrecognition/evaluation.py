"""Video-level evaluation, multi-seed aggregation and report tables."""

from collections import OrderedDict

import numpy
import pandas
import yaml

from workflowrecognition.measures import class_average_precisions
from workflowrecognition.measures import f1_video
from workflowrecognition.measures import multilabel_pr
from workflowrecognition.measures import per_class_pr
from workflowrecognition.measures import video_accuracy
from workflowrecognition.utils import ShapeError
from workflowrecognition.utils import to_builtin

MULTICLASS_METRICS = ['accuracy', 'precision', 'recall', 'f1']
MULTILABEL_METRICS = ['mean_ap', 'precision', 'recall', 'f1']

# columns of the comparative table per label mode
TABLE_COLUMNS = {
    'multiclass': [('Acc', 'accuracy'), ('F1', 'f1')],
    'multilabel': [('mAP', 'mean_ap'), ('F1', 'f1')],
}


class VideoMetrics(object):
    """Metrics of one video.

    Attributes
    ----------
    video_id : str
    accuracy : float
        Frame accuracy (multiclass), NaN otherwise.
    mean_precision, mean_recall, f1 : float
        Class-averaged precision and recall and their harmonic mean.
    ap_per_class : numpy.ndarray
        AP per class (multilabel), NaN where undefined.
    mean_ap : float
        Mean of the defined class APs (multilabel), NaN otherwise.
    per_class : pandas.DataFrame
        tp, fp, fn, precision and recall per class.
    """

    def __init__(self, video_id, per_class, accuracy=numpy.nan,
                 ap_per_class=None):

        self.video_id = video_id
        self.per_class = per_class
        self.accuracy = accuracy
        self.mean_precision, self.mean_recall, self.f1 = f1_video(per_class)
        self.ap_per_class = ap_per_class

        if ap_per_class is not None and not numpy.all(
                numpy.isnan(ap_per_class)):
            self.mean_ap = float(numpy.nanmean(ap_per_class))
        else:
            self.mean_ap = numpy.nan

    def as_row(self, label_mode):

        values = {'accuracy': self.accuracy, 'mean_ap': self.mean_ap,
                  'precision': self.mean_precision,
                  'recall': self.mean_recall, 'f1': self.f1}
        keys = MULTICLASS_METRICS if label_mode == 'multiclass' \
            else MULTILABEL_METRICS

        row = OrderedDict([('video_id', self.video_id)])
        row.update((k, values[k]) for k in keys)
        return row


class EvaluationReport(object):
    """Per-video metrics and their unweighted split means.

    Attributes
    ----------
    details : list of VideoMetrics
    videos : pandas.DataFrame
        One row per video, in input order.
    summary : collections.OrderedDict
        Metric name to the mean over videos.
    """

    def __init__(self, details, label_mode):

        self.details = details
        self.label_mode = label_mode
        self.videos = pandas.DataFrame(
            [d.as_row(label_mode) for d in details])

        keys = MULTICLASS_METRICS if label_mode == 'multiclass' \
            else MULTILABEL_METRICS
        self.summary = OrderedDict(
            (k, float(self.videos[k].mean())) for k in keys)

    def to_dict(self):

        return to_builtin(OrderedDict([
            ('label_mode', self.label_mode),
            ('summary', self.summary),
            ('videos', self.videos.to_dict(orient='records')),
        ]))


def video_metrics(prediction, labels, video_id=None, threshold=0.5):
    """Compute the metrics of one video.

    Multiclass videos get the accuracy and the precision/recall/F1 chain,
    multilabel videos the AP per class, the mAP and the precision/recall/F1
    of the decisions at the threshold.

    Parameters
    ----------
    prediction : Prediction
        The model output for the video.
    labels : LabelTrack
        The ground truth.

    Returns
    -------
    VideoMetrics
    """

    video_id = video_id if video_id is not None else prediction.video_id

    if prediction.label_mode != labels.mode:
        raise ValueError("video {}: prediction is {}, labels are {}".format(
            video_id, prediction.label_mode, labels.mode))
    if prediction.T != labels.T or prediction.C != labels.C:
        raise ShapeError(
            "video {}: prediction and labels do not conform".format(video_id),
            prediction.scores.shape, (labels.T, labels.C))

    if labels.mode == 'multiclass':
        per_class = per_class_pr(prediction, labels, labels.C)
        return VideoMetrics(video_id, per_class,
                            accuracy=video_accuracy(prediction, labels))

    per_class = multilabel_pr(prediction, labels, threshold)
    return VideoMetrics(video_id, per_class,
                        ap_per_class=class_average_precisions(prediction,
                                                              labels))


def evaluate_pairs(predictions, labels, video_ids=None, threshold=0.5):
    """Evaluate aligned lists of predictions and label tracks.

    Returns
    -------
    EvaluationReport
    """

    if len(predictions) != len(labels):
        raise ValueError("got {} predictions for {} videos".format(
            len(predictions), len(labels)))
    if not labels:
        raise ValueError("nothing to evaluate")

    if video_ids is None:
        video_ids = [p.video_id if p.video_id is not None else str(i)
                     for i, p in enumerate(predictions)]

    details = [video_metrics(p, y, vid, threshold)
               for p, y, vid in zip(predictions, labels, video_ids)]

    return EvaluationReport(details, labels[0].mode)


def evaluate(predictions, manifest, split='test', threshold=0.5):
    """Evaluate the predictions of every video of a split.

    Every video counts equally in the split means, regardless of its
    length.

    Parameters
    ----------
    predictions : dict
        Video id to Prediction.
    manifest : Manifest
        The dataset; labels are read from its feature files.
    split : str
        The split to evaluate. Default 'test'.

    Returns
    -------
    EvaluationReport

    """

    from workflowrecognition.fileio import read_features

    entries = manifest.split_entries(split)
    if len(entries) == 0:
        raise ValueError("split {!r} holds no videos".format(split))

    preds, tracks, ids = [], [], []

    for _, entry in entries.iterrows():

        vid = entry['video_id']
        if vid not in predictions:
            raise ValueError("no prediction for video {}".format(vid))

        _, labels = read_features(manifest.resolve(entry['feature_path']),
                                  expected=manifest.expected())
        preds.append(predictions[vid])
        tracks.append(labels)
        ids.append(vid)

    return evaluate_pairs(preds, tracks, ids, threshold)


class AggregateReport(object):
    """Split metrics of several seeds with their mean and std.

    Attributes
    ----------
    per_seed : pandas.DataFrame
        One row per seed (index), one column per metric.
    mean : pandas.Series
        Mean over seeds.
    std : pandas.Series
        Sample standard deviation (n - 1) over seeds; 0 for a single seed.
    single_seed : bool
        True when only one seed was aggregated.
    """

    def __init__(self, per_seed, label_mode=None, videos=None):

        self.per_seed = per_seed
        self.label_mode = label_mode
        self.videos = videos
        self.single_seed = len(per_seed) == 1
        self.mean = per_seed.mean(axis=0)

        if self.single_seed:
            self.std = pandas.Series(0.0, index=per_seed.columns)
        else:
            self.std = per_seed.std(axis=0, ddof=1)

    @property
    def seeds(self):
        return list(self.per_seed.index)

    def to_dict(self):

        d = OrderedDict()
        d['label_mode'] = self.label_mode
        d['seeds'] = self.seeds
        d['single_seed'] = self.single_seed
        d['mean'] = self.mean.to_dict()
        d['std'] = self.std.to_dict()
        d['per_seed'] = OrderedDict(
            (seed, row.to_dict()) for seed, row in self.per_seed.iterrows())
        if self.videos is not None:
            d['videos'] = self.videos
        return to_builtin(d)

    @classmethod
    def from_dict(cls, d):

        per_seed = pandas.DataFrame.from_dict(
            {seed: dict(values) for seed, values in d['per_seed'].items()},
            orient='index')
        per_seed = per_seed.astype(numpy.float64)
        per_seed.index.name = 'seed'
        return cls(per_seed, label_mode=d.get('label_mode'),
                   videos=d.get('videos'))


def aggregate_seeds(reports, seeds=None):
    """Mean and sample standard deviation of split metrics over seeds.

    Parameters
    ----------
    reports : list of EvaluationReport or dict
        The split-level metrics of every seed.
    seeds : list of int, optional
        The seed of every report. Default 0, 1, ...

    Returns
    -------
    AggregateReport

    """

    if len(reports) < 1:
        raise ValueError("expected at least one report")

    summaries = [OrderedDict(getattr(r, 'summary', r)) for r in reports]
    keys = list(summaries[0].keys())

    for i, s in enumerate(summaries[1:], start=1):
        if set(s.keys()) != set(keys):
            raise ValueError("report {} has metrics {}, expected {}".format(
                i, sorted(s.keys()), sorted(keys)))

    seeds = list(seeds) if seeds is not None else list(range(len(reports)))
    if len(seeds) != len(reports):
        raise ValueError("got {} seeds for {} reports".format(
            len(seeds), len(reports)))

    per_seed = pandas.DataFrame([[s[k] for k in keys] for s in summaries],
                                index=pandas.Index(seeds, name='seed'),
                                columns=keys, dtype=numpy.float64)

    label_mode = getattr(reports[0], 'label_mode', None)

    return AggregateReport(per_seed, label_mode=label_mode)


def _cell(mean, std):
    return u"{:.2f}±{:.2f}".format(100 * mean, 100 * std)


def render_table(rows, title="Comparative study of architectures"):
    """Render aggregate reports as a fixed-width comparison table.

    Parameters
    ----------
    rows : list of (str, AggregateReport)
        Architecture name and its aggregate report.

    Returns
    -------
    str
        One line per architecture with "mean±std" entries in percent.
    """

    if not rows:
        raise ValueError("expected at least one architecture")

    modes = {report.label_mode or 'multiclass' for _, report in rows}
    if len(modes) != 1:
        raise ValueError("cannot mix multiclass and multilabel reports")
    columns = TABLE_COLUMNS[modes.pop()]

    table = pandas.DataFrame(
        [[_cell(report.mean[key], report.std[key]) for _, key in columns]
         for _, report in rows],
        index=pandas.Index([name for name, _ in rows], name='Model'),
        columns=[header for header, _ in columns])

    return title + "\n" + table.to_string() + "\n"


def write_report(report, path):
    """Write an evaluation or aggregate report as YAML."""

    with open(path, 'w') as f:
        yaml.safe_dump(report.to_dict(), f, sort_keys=False,
                       default_flow_style=False, allow_unicode=True)


def read_aggregate_report(path):
    """Read an aggregate report written by :func:`write_report`."""

    with open(path) as f:
        d = yaml.safe_load(f)

    if not isinstance(d, dict) or 'per_seed' not in d:
        raise ValueError("{} is not an aggregate report".format(path))

    return AggregateReport.from_dict(d)
