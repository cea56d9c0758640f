"""Synthetic surgical workflows with local and global ambiguities.

Every phase emits from a cluster centroid. Phases listed in a global pair
share one centroid (they look alike and only the context tells them apart)
and occlusions temporarily replace the emission by a dedicated occlusion
centroid while the phase continues.
"""

import os
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pandas
import yaml

from workflowrecognition.base import LABEL_MODES
from workflowrecognition.base import FeatureSequence
from workflowrecognition.base import LabelTrack
from workflowrecognition.fileio import Manifest
from workflowrecognition.fileio import save_manifest
from workflowrecognition.fileio import write_features
from workflowrecognition.splitting import group_split
from workflowrecognition.utils import ConfigError
from workflowrecognition.utils import counter_rng
from workflowrecognition.utils import to_builtin
from workflowrecognition.types import is_integer
from workflowrecognition.types import is_number

from workflowrecognition import wr_logging as logging

CONFIG_DIR = os.path.join(os.path.dirname(__file__), 'configs')

# key of the centroid stream; videos use (seed, _VIDEO_STREAM, index)
_CENTROID_STREAM = 0
_VIDEO_STREAM = 1


class SynthConfig(object):
    """Settings of the synthetic workflow generator.

    Parameters
    ----------
    num_classes : int
        The number of phases (classes) C.
    feature_dim : int
        The feature dimension D.
    grammar : list of (int, int, int)
        Ordered (phase, min_duration, max_duration) triples. Every video
        runs through the phases in this order; durations are drawn
        uniformly from [min_duration, max_duration] frames.
    global_pairs : list of (int, int)
        Phase pairs emitting from one shared centroid.
    occlusion_rate : float
        Probability per frame of starting an occlusion, in [0, 1].
    occlusion_length : (int, int)
        Range [Lmin, Lmax] of the occlusion lengths in frames.
    noise : float
        Standard deviation of the isotropic gaussian emission noise.
    num_videos : int
        The number of videos.
    videos_per_group : int
        Consecutive videos sharing one group id (views of one case).
    label_mode : str
        'multiclass' or 'multilabel'. In multilabel mode every class has an
        independent activity track on top of the phase track.
    activity_rate, activity_length, activity_gain
        Start probability per frame, length range and feature gain of the
        multilabel activity tracks.
    test_fraction : float, optional
        When set, written datasets are split into train and test with
        :func:`group_split`.
    seed : int
        Seed of the centroids and of all videos.
    name : str
        The dataset name.
    """

    _fields = ('name', 'num_classes', 'feature_dim', 'label_mode', 'grammar',
               'global_pairs', 'occlusion_rate', 'occlusion_length', 'noise',
               'num_videos', 'videos_per_group', 'activity_rate',
               'activity_length', 'activity_gain', 'test_fraction', 'seed')

    def __init__(self, num_classes=7, feature_dim=8, grammar=None,
                 global_pairs=(), occlusion_rate=0.0, occlusion_length=(2, 8),
                 noise=0.0, num_videos=10, videos_per_group=1,
                 label_mode='multiclass', activity_rate=0.0,
                 activity_length=(5, 20), activity_gain=0.5,
                 test_fraction=None, seed=0, name='synthetic'):

        if grammar is None:
            grammar = [(c, 10, 20) for c in range(num_classes)] \
                if is_integer(num_classes) else []

        self.name = name
        self.num_classes = num_classes
        self.feature_dim = feature_dim
        self.label_mode = label_mode
        self.grammar = [tuple(step) for step in grammar]
        self.global_pairs = [tuple(pair) for pair in global_pairs]
        self.occlusion_rate = occlusion_rate
        self.occlusion_length = tuple(occlusion_length)
        self.noise = noise
        self.num_videos = num_videos
        self.videos_per_group = videos_per_group
        self.activity_rate = activity_rate
        self.activity_length = tuple(activity_length)
        self.activity_gain = activity_gain
        self.test_fraction = test_fraction
        self.seed = seed

        self.validate()

    def problems(self):
        """List every violated constraint."""

        problems = []

        for field, lower in (('num_classes', 2), ('feature_dim', 1),
                             ('num_videos', 1), ('videos_per_group', 1),
                             ('seed', 0)):
            value = getattr(self, field)
            if not is_integer(value) or value < lower:
                problems.append("{} must be an integer >= {}, got {!r}".format(
                    field, lower, value))

        if self.label_mode not in LABEL_MODES:
            problems.append("label_mode {!r} unknown".format(self.label_mode))

        C = self.num_classes if is_integer(self.num_classes) else 0

        if not self.grammar:
            problems.append("grammar must list at least one phase")

        seen = set()
        for i, step in enumerate(self.grammar):
            if len(step) != 3 or not all(is_integer(v) for v in step):
                problems.append("grammar step {} must be (phase, min, max), "
                                "got {!r}".format(i, step))
                continue
            phase, lo, hi = step
            if not 0 <= phase < C:
                problems.append("grammar step {}: phase {} outside [0, {})"
                                .format(i, phase, C))
            if phase in seen:
                problems.append("grammar step {}: phase {} repeats".format(
                    i, phase))
            seen.add(phase)
            if lo < 1:
                problems.append("grammar step {}: minimum duration must be "
                                ">= 1, got {}".format(i, lo))
            if lo > hi:
                problems.append("grammar step {}: minimum duration {} exceeds "
                                "maximum {}".format(i, lo, hi))

        for pair in self.global_pairs:
            if len(pair) != 2 or not all(is_integer(p) and 0 <= p < C
                                         for p in pair) or pair[0] == pair[1]:
                problems.append("global pair {!r} must hold two distinct "
                                "phases in [0, {})".format(pair, C))

        for field in ('occlusion_rate', 'activity_rate'):
            value = getattr(self, field)
            if not is_number(value) or not 0 <= value <= 1:
                problems.append("{} must be in [0, 1], got {!r}".format(
                    field, value))

        for field in ('occlusion_length', 'activity_length'):
            value = getattr(self, field)
            if len(value) != 2 or not all(is_integer(v) for v in value):
                problems.append("{} must be (min, max), got {!r}".format(
                    field, value))
            elif value[0] < 1 or value[0] > value[1]:
                problems.append(
                    "{} needs 1 <= min <= max, got min={} max={}".format(
                        field, value[0], value[1]))

        if not is_number(self.noise) or not self.noise >= 0:
            problems.append("noise must be >= 0, got {!r}".format(self.noise))
        if not is_number(self.activity_gain):
            problems.append("activity_gain must be a number, got {!r}".format(
                self.activity_gain))
        if self.test_fraction is not None and (
                not is_number(self.test_fraction) or
                not 0 < self.test_fraction < 1):
            problems.append("test_fraction must be in (0, 1), got {!r}".format(
                self.test_fraction))

        return problems

    def validate(self):

        problems = self.problems()
        if problems:
            raise ConfigError(problems)

    def cluster_map(self):
        """Cluster id of every phase; phases of a global pair share one."""

        cluster = list(range(self.num_classes))
        for a, b in self.global_pairs:
            old, new = cluster[b], cluster[a]
            cluster = [new if c == old else c for c in cluster]

        # renumber by first appearance
        ids = OrderedDict()
        for c in cluster:
            ids.setdefault(c, len(ids))
        return np.array([ids[c] for c in cluster], dtype=np.int64)

    @property
    def num_clusters(self):
        """Number of phase clusters, the occlusion cluster excluded."""
        return int(self.cluster_map().max()) + 1

    @property
    def occlusion_cluster(self):
        return self.num_clusters

    def to_dict(self):

        d = OrderedDict((f, getattr(self, f)) for f in self._fields)
        d['grammar'] = [list(step) for step in self.grammar]
        d['global_pairs'] = [list(pair) for pair in self.global_pairs]
        d['occlusion_length'] = list(self.occlusion_length)
        d['activity_length'] = list(self.activity_length)
        return d

    @classmethod
    def from_dict(cls, d):

        if not isinstance(d, dict):
            raise ConfigError("a synthetic config must be a mapping")

        unknown = sorted(set(d) - set(cls._fields))
        if unknown:
            raise ConfigError(
                ["unknown generator setting {!r}".format(k) for k in unknown])

        d = dict(d)
        if d.get('grammar') is not None:
            d['grammar'] = [_grammar_step(step) for step in d['grammar']]
        if d.get('global_pairs') is None:
            d['global_pairs'] = ()

        try:
            return cls(**d)
        except TypeError as err:
            raise ConfigError(str(err))

    def replace(self, **changes):
        d = self.to_dict()
        d.update(changes)
        return SynthConfig.from_dict(d)

    def __eq__(self, other):
        return isinstance(other, SynthConfig) and \
            self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self.__eq__(other)


def _grammar_step(step):

    if isinstance(step, dict):
        return (step.get('phase'), step.get('min'), step.get('max'))
    return tuple(step)


def bundled_configs():
    """Names of the synthetic configs shipped with the package."""

    return sorted(os.path.splitext(f)[0] for f in os.listdir(CONFIG_DIR)
                  if f.endswith('.yml'))


def load_synth_config(name_or_path):
    """Load a synthetic config by bundled name (e.g. 'internal-7') or path.

    Returns
    -------
    SynthConfig
    """

    path = name_or_path
    if not os.path.exists(path):
        path = os.path.join(CONFIG_DIR, name_or_path + '.yml')
    if not os.path.exists(path):
        raise ConfigError("no synthetic config {!r}; bundled configs: {}"
                          .format(name_or_path, ", ".join(bundled_configs())))

    with open(path) as f:
        try:
            d = yaml.safe_load(f)
        except yaml.YAMLError as err:
            raise ConfigError("{} is not valid YAML ({})".format(path, err))

    return SynthConfig.from_dict(d)


def save_synth_config(cfg, path):

    with open(path, 'w') as f:
        yaml.safe_dump(to_builtin(cfg.to_dict()), f, sort_keys=False,
                       default_flow_style=None)


###########################
#        Generation       #
###########################

class SyntheticDataset(object):
    """Generated videos with their ambiguity annotations.

    Attributes
    ----------
    config : SynthConfig
    sequences : list of FeatureSequence
    labels : list of LabelTrack
    annotations : list of pandas.DataFrame
        Per video and frame: phase, cluster, occluded and shared (the frame
        emits from a centroid shared by several phases).
    groups : list of str
        The group id of every video.
    centroids : numpy.ndarray
        The unit-norm centroids; the last row is the occlusion centroid.
    """

    def __init__(self, config, sequences, labels, annotations, groups,
                 centroids):

        self.config = config
        self.sequences = sequences
        self.labels = labels
        self.annotations = annotations
        self.groups = groups
        self.centroids = centroids

    @property
    def video_ids(self):
        return [seq.video_id for seq in self.sequences]

    def pairs(self):
        return list(zip(self.sequences, self.labels))

    def subset(self, video_ids):
        """The videos with the given ids, in dataset order."""

        keep = set(video_ids)
        idx = [i for i, vid in enumerate(self.video_ids) if vid in keep]
        return SyntheticDataset(
            self.config, [self.sequences[i] for i in idx],
            [self.labels[i] for i in idx],
            [self.annotations[i] for i in idx],
            [self.groups[i] for i in idx], self.centroids)

    def annotation_frame(self):
        """All annotations in one frame with a video_id column."""

        return pandas.concat(
            [a.assign(video_id=vid) for vid, a in
             zip(self.video_ids, self.annotations)],
            ignore_index=True)

    def __len__(self):
        return len(self.sequences)

    def __getitem__(self, i):
        return self.sequences[i], self.labels[i]

    def __repr__(self):
        return "SyntheticDataset({!r}, {} videos)".format(
            self.config.name, len(self))


def make_centroids(cfg):
    """Unit-norm centroids of the phase clusters and the occlusion."""

    rng = counter_rng(cfg.seed, _CENTROID_STREAM)
    centroids = rng.standard_normal((cfg.num_clusters + 1, cfg.feature_dim))
    return centroids / np.linalg.norm(centroids, axis=1, keepdims=True)


def _bursts(rng, T, rate, length):
    """Boolean track of bursts starting with ``rate`` per frame."""

    lo, hi = length
    on = np.zeros(T, dtype=bool)
    starts = rng.random(T)

    t = 0
    while t < T:
        if starts[t] < rate:
            n = int(rng.integers(lo, hi + 1))
            on[t:t + n] = True
            t += n
        else:
            t += 1

    return on


def _video_id(index):
    return "video{:03d}".format(index)


def _generate_video(cfg, index, centroids):

    rng = counter_rng(cfg.seed, _VIDEO_STREAM, index)
    cluster_of = cfg.cluster_map()

    phase_ids = np.array([phase for phase, _, _ in cfg.grammar])
    durations = [int(rng.integers(lo, hi + 1)) for _, lo, hi in cfg.grammar]
    phases = np.repeat(phase_ids, durations)
    T = len(phases)

    occluded = _bursts(rng, T, cfg.occlusion_rate, cfg.occlusion_length)
    clusters = np.where(occluded, cfg.occlusion_cluster, cluster_of[phases])
    features = centroids[clusters].copy()

    if cfg.label_mode == 'multilabel':
        masks = np.zeros((T, cfg.num_classes), dtype=np.uint8)
        masks[np.arange(T), phases] = 1
        for c in range(cfg.num_classes):
            active = _bursts(rng, T, cfg.activity_rate, cfg.activity_length)
            masks[active, c] = 1
            features[active] += cfg.activity_gain * centroids[cluster_of[c]]
        labels = LabelTrack(masks, cfg.num_classes, 'multilabel')
    else:
        labels = LabelTrack(phases, cfg.num_classes, 'multiclass')

    if cfg.noise > 0:
        features += cfg.noise * rng.standard_normal(features.shape)

    counts = np.bincount(cluster_of, minlength=cfg.num_clusters)
    shared = ~occluded & (counts[cluster_of[phases]] > 1)

    annotations = pandas.DataFrame({'phase': phases, 'cluster': clusters,
                                    'occluded': occluded, 'shared': shared})
    annotations.index.name = 'frame'

    return FeatureSequence(_video_id(index), features), labels, annotations


def _generate_star(args):
    return _generate_video(*args)


def synth_generate(cfg, n_jobs=1):
    """Generate a synthetic workflow dataset.

    Every video draws its phase durations, occlusions, activity tracks and
    noise from its own counter-based stream keyed on (seed, video index),
    so the result does not depend on ``n_jobs``.

    Parameters
    ----------
    cfg : SynthConfig
        The generator settings.
    n_jobs : int
        Number of worker processes. Default 1.

    Returns
    -------
    SyntheticDataset

    Example
    -------
    >>> cfg = load_synth_config('internal-7')
    >>> data = synth_generate(cfg)
    >>> framewise_bayes_bound(data)

    """

    cfg.validate()
    centroids = make_centroids(cfg)
    jobs = [(cfg, i, centroids) for i in range(cfg.num_videos)]

    if n_jobs > 1 and cfg.num_videos > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            videos = list(pool.map(_generate_star, jobs))
    else:
        videos = [_generate_star(job) for job in jobs]

    sequences, labels, annotations = (list(x) for x in zip(*videos))
    groups = ["group{:03d}".format(i // cfg.videos_per_group)
              for i in range(cfg.num_videos)]

    logging.info("Synth - generated {} videos of {!r} ({} frames)".format(
        cfg.num_videos, cfg.name, sum(seq.T for seq in sequences)))

    return SyntheticDataset(cfg, sequences, labels, annotations, groups,
                            centroids)


def framewise_bayes_bound(dataset):
    """Best accuracy any frame-level classifier can reach on noiseless data.

    Frames are grouped by the cluster they emit from; a frame-level
    classifier sees the same input for all frames of a cluster and can at
    best predict the most frequent class of each cluster. The bound is the
    sum of these maxima over the total number of frames.

    Parameters
    ----------
    dataset : SyntheticDataset
        A multiclass dataset generated with noise 0.

    Returns
    -------
    float
        The bound in [0, 1].
    """

    cfg = dataset.config

    if cfg.noise != 0:
        raise ValueError("the frame-wise bound is exact only for noise 0, "
                         "got {}".format(cfg.noise))
    if cfg.label_mode != 'multiclass':
        raise ValueError("the frame-wise bound needs multiclass labels")

    frames = pandas.concat(
        [pandas.DataFrame({'cluster': a['cluster'].values,
                           'label': y.values})
         for a, y in zip(dataset.annotations, dataset.labels)],
        ignore_index=True)

    counts = pandas.crosstab(frames['cluster'], frames['label'])

    return float(counts.max(axis=1).sum() / len(frames))


def write_synthetic(dataset, out_dir, test_fraction=None):
    """Write a generated dataset as SWRF files plus a manifest.

    The directory receives ``features/<video_id>.swrf``, ``manifest.yml``,
    ``annotations.csv``, ``synth_config.yml`` and, for noiseless multiclass
    data, ``bayes_bound.yml``.

    Parameters
    ----------
    dataset : SyntheticDataset
    out_dir : str
    test_fraction : float, optional
        Overrides the split fraction of the config. Without a fraction all
        videos stay unassigned.

    Returns
    -------
    Manifest
    """

    cfg = dataset.config
    test_fraction = test_fraction if test_fraction is not None \
        else cfg.test_fraction

    feature_dir = os.path.join(out_dir, 'features')
    if not os.path.isdir(feature_dir):
        os.makedirs(feature_dir)

    entries = []
    for seq, labels, group in zip(dataset.sequences, dataset.labels,
                                  dataset.groups):
        rel_path = os.path.join('features', seq.video_id + '.swrf')
        write_features(seq, labels, os.path.join(out_dir, rel_path))
        entries.append(OrderedDict([
            ('video_id', seq.video_id), ('group_id', group),
            ('feature_path', rel_path), ('split', 'unassigned'),
            ('num_frames', seq.T)]))

    manifest = Manifest(cfg.name, cfg.num_classes, cfg.label_mode,
                        cfg.feature_dim, entries, root=out_dir)

    if test_fraction is not None:
        manifest = group_split(manifest, test_fraction, seed=cfg.seed)

    save_manifest(manifest, os.path.join(out_dir, 'manifest.yml'))
    save_synth_config(cfg, os.path.join(out_dir, 'synth_config.yml'))
    dataset.annotation_frame().to_csv(
        os.path.join(out_dir, 'annotations.csv'), index=False)

    if cfg.noise == 0 and cfg.label_mode == 'multiclass':
        splits = dict(zip(manifest.entries['video_id'],
                          manifest.entries['split']))
        bounds = OrderedDict([('all', framewise_bayes_bound(dataset))])
        for split in ('train', 'test'):
            ids = [vid for vid in dataset.video_ids if splits[vid] == split]
            if ids:
                bounds[split] = framewise_bayes_bound(dataset.subset(ids))

        with open(os.path.join(out_dir, 'bayes_bound.yml'), 'w') as f:
            yaml.safe_dump(to_builtin(bounds), f, sort_keys=False)

    logging.info("Synth - wrote {} videos to {}".format(len(dataset),
                                                        out_dir))

    return manifest
