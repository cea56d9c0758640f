import numpy
import pandas

from workflowrecognition.utils import counter_rng
from workflowrecognition.types import is_number

from workflowrecognition import wr_logging as logging


def group_frames(manifest):
    """Total number of frames per group (index group_id, sorted)."""

    counts = manifest.frame_counts()
    groups = pandas.Series(list(manifest.entries['group_id']),
                           index=counts.index)

    return counts.groupby(groups).sum().sort_index()


def group_split(manifest, test_fraction, seed=0):
    """Split a dataset into train and test by whole groups.

    Videos of one group (for example the views of one intervention) never
    end up in different splits. Groups are visited in a seeded random order
    and moved to the test split as long as the test split stays at or
    below the target fraction of frames. If the target is not reached
    after one pass, the first remaining group in visiting order is moved as
    well, so the realised test fraction is at least the target and
    exceeds it by less than the share of the largest group.

    Parameters
    ----------
    manifest : Manifest
        The dataset. Frame counts come from the manifest or the feature
        file headers.
    test_fraction : float
        Target fraction of frames in the test split, in (0, 1).
    seed : int
        Seed of the visiting order. Default 0.

    Returns
    -------
    Manifest
        A copy with every video assigned to 'train' or 'test'.

    """

    if not is_number(test_fraction) or not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1), got {!r}".format(
            test_fraction))

    sizes = group_frames(manifest)

    if len(sizes) < 2:
        raise ValueError(
            "a leak-free split needs at least two groups, got {}".format(
                len(sizes)))

    total = float(sizes.sum())
    target = test_fraction * total

    order = counter_rng(seed).permutation(len(sizes))
    visited = [sizes.index[i] for i in order]

    test_groups = []
    test_frames = 0

    for group in visited:
        if test_frames + sizes[group] <= target:
            test_groups.append(group)
            test_frames += sizes[group]

    if test_frames < target:
        group = next(g for g in visited if g not in test_groups)
        test_groups.append(group)
        test_frames += sizes[group]

    test_groups = set(test_groups)
    splits = {vid: 'test' if group in test_groups else 'train'
              for vid, group in zip(manifest.entries['video_id'],
                                    manifest.entries['group_id'])}
    result = manifest.with_splits(splits)

    n_test = int(numpy.sum(result.entries['split'] == 'test'))
    n_train = len(result) - n_test

    logging.info(
        "Splitting - {} train / {} test videos, {} of {} groups in test, "
        "test frame fraction {:.3f} (target {:.3f})".format(
            n_train, n_test, len(test_groups), len(sizes),
            test_frames / total, test_fraction))

    if n_train == 0:
        logging.warning("Splitting - every group landed in the test split")

    return result


def split_summary(manifest):
    """Videos, groups and frames per split.

    Returns
    -------
    pandas.DataFrame
        One row per split with the columns videos, groups, frames and
        frame_fraction.
    """

    entries = manifest.entries.assign(
        num_frames=list(manifest.frame_counts()))

    summary = entries.groupby('split').agg(
        videos=('video_id', 'count'), groups=('group_id', 'nunique'),
        frames=('num_frames', 'sum'))
    summary['frame_fraction'] = summary['frames'] / summary['frames'].sum()

    return summary
