import os
from collections import OrderedDict

import numpy

from workflowrecognition.base import FeatureSequence
from workflowrecognition.base import LabelTrack
from workflowrecognition.fileio import Manifest
from workflowrecognition.fileio import save_manifest
from workflowrecognition.fileio import write_features
from workflowrecognition.splitting import group_split
from workflowrecognition.utils import ManifestError

from workflowrecognition import wr_logging as logging


def convert_embeddings(features, labels, out_dir, num_classes,
                       label_mode='multiclass', groups=None, name='external',
                       test_fraction=None, seed=0):
    """Convert embeddings produced elsewhere into SWRF files and a manifest.

    Use this to ingest per-frame embeddings of real recordings (for example
    the 1 fps features of a pretrained image or clip backbone) so that the
    temporal models can be trained and evaluated on them.

    Parameters
    ----------
    features : dict
        Video id to a (T, D) array of embeddings. All videos share D.
    labels : dict
        Video id to the class id per frame (multiclass, shape (T,)) or the
        binary masks (multilabel, shape (T, C)).
    out_dir : str
        Target directory. Receives ``features/<video_id>.swrf`` and
        ``manifest.yml``.
    num_classes : int
        The number of classes C.
    label_mode : str
        'multiclass' or 'multilabel'. Default 'multiclass'.
    groups : dict, optional
        Video id to group id, for example the case several camera views
        belong to. By default every video is its own group.
    name : str
        The dataset name. Default 'external'.
    test_fraction : float, optional
        When given, the videos are split into train and test by groups.
    seed : int
        Seed of the split. Default 0.

    Returns
    -------
    Manifest
        The written manifest.

    """

    if not features:
        raise ManifestError("no videos to convert")

    missing = sorted(set(features) ^ set(labels))
    if missing:
        raise ManifestError(["video {} has features or labels, not "
                             "both".format(vid) for vid in missing])

    groups = groups or {}
    feature_dir = os.path.join(out_dir, 'features')
    if not os.path.isdir(feature_dir):
        os.makedirs(feature_dir)

    dims = set()
    entries = []

    for vid in features:

        seq = FeatureSequence(vid, numpy.asarray(features[vid]))
        track = LabelTrack(labels[vid], num_classes, label_mode)
        dims.add(seq.D)

        rel_path = os.path.join('features', '{}.swrf'.format(vid))
        write_features(seq, track, os.path.join(out_dir, rel_path))

        entries.append(OrderedDict([
            ('video_id', seq.video_id), ('group_id', str(groups.get(vid, vid))),
            ('feature_path', rel_path), ('split', 'unassigned'),
            ('num_frames', seq.T)]))

    if len(dims) > 1:
        raise ManifestError("videos have different feature dimensions: "
                            "{}".format(sorted(dims)))

    manifest = Manifest(name, num_classes, label_mode, dims.pop(), entries,
                        root=out_dir)
    if test_fraction is not None:
        manifest = group_split(manifest, test_fraction, seed=seed)

    save_manifest(manifest, os.path.join(out_dir, 'manifest.yml'))

    logging.info("External - converted {} videos into {}".format(
        len(entries), out_dir))

    return manifest
