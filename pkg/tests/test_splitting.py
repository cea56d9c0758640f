import unittest
from itertools import permutations

import numpy
from parameterized import parameterized

from workflowrecognition.fileio import Manifest
from workflowrecognition.splitting import group_frames
from workflowrecognition.splitting import group_split
from workflowrecognition.splitting import split_summary


def make_manifest(group_sizes, videos_per_group=1):
    """Manifest with the given number of frames per group."""

    entries = []
    for g, size in enumerate(group_sizes):
        per_video = numpy.array_split(numpy.arange(size), videos_per_group)
        for v, frames in enumerate(per_video):
            vid = 'g{}v{}'.format(g, v)
            entries.append({'video_id': vid, 'group_id': 'g{}'.format(g),
                            'feature_path': vid + '.swrf',
                            'split': 'unassigned', 'num_frames': len(frames)})
    return Manifest('groups', 7, 'multiclass', 8, entries)


def realised_fraction(manifest):

    counts = manifest.frame_counts()
    test = (manifest.entries['split'] == 'test').values
    return counts[test].sum() / float(counts.sum())


def groups_in_test(manifest):

    entries = manifest.entries
    return set(entries.loc[entries['split'] == 'test', 'group_id'])


class TestGroupSplit(unittest.TestCase):

    def test_equal_groups(self):

        for seed in range(10):
            split = group_split(make_manifest([25] * 4), 0.5, seed=seed)
            self.assertEqual(len(groups_in_test(split)), 2)
            self.assertEqual(realised_fraction(split), 0.5)

    def test_never_splits_the_large_group(self):

        for seed in range(20):
            split = group_split(make_manifest([80, 10, 10]), 0.2, seed=seed)
            groups = groups_in_test(split)

            self.assertNotIn('g0', groups)
            self.assertTrue(1 <= len(groups) <= 2)

    def test_large_group_visit_orders(self):

        # every visiting order of {80, 10, 10} at fraction 0.2
        sizes = [80, 10, 10]
        for order in permutations(range(3)):
            test, frames = [], 0
            for g in order:
                if frames + sizes[g] <= 20:
                    test.append(g)
                    frames += sizes[g]
            self.assertNotIn(0, test)
            self.assertEqual(frames, 20)

    def test_deterministic(self):

        manifest = make_manifest([12, 30, 7, 19, 44, 5], videos_per_group=2)

        a = group_split(manifest, 0.3, seed=4)
        b = group_split(manifest, 0.3, seed=4)

        self.assertEqual(a, b)

    def test_keeps_other_fields(self):

        manifest = make_manifest([10, 10, 10])
        split = group_split(manifest, 0.3, seed=0)

        self.assertListEqual(split.video_ids, manifest.video_ids)
        self.assertEqual(set(split.entries['split']), {'train', 'test'})
        self.assertTrue(all(manifest.entries['split'] == 'unassigned'))

    @parameterized.expand([(0.0,), (1.0,), (-0.2,), (1.5,), ('half',)])
    def test_invalid_fraction(self, fraction):

        with self.assertRaises(ValueError):
            group_split(make_manifest([10, 10]), fraction)

    def test_single_group(self):

        with self.assertRaisesRegex(ValueError, "two groups"):
            group_split(make_manifest([40], videos_per_group=4), 0.25)

    def test_leakage_property(self):

        rng = numpy.random.default_rng(0)

        for i in range(1000):
            n_groups = int(rng.integers(2, 8))
            sizes = rng.integers(1, 60, n_groups)
            manifest = make_manifest(sizes, int(rng.integers(1, 4)))
            fraction = float(rng.uniform(0.05, 0.95))

            split = group_split(manifest, fraction, seed=i)

            per_group = split.entries.groupby('group_id')['split'].nunique()
            self.assertTrue((per_group == 1).all())

            realised = realised_fraction(split)
            largest = sizes.max() / float(sizes.sum())
            self.assertGreaterEqual(realised, fraction - 1e-12)
            self.assertLess(realised, fraction + largest)


class TestSummaries(unittest.TestCase):

    def test_group_frames(self):

        sizes = group_frames(make_manifest([9, 4], videos_per_group=2))

        self.assertEqual(list(sizes.index), ['g0', 'g1'])
        self.assertEqual(list(sizes), [9, 4])

    def test_split_summary(self):

        split = group_split(make_manifest([30, 10, 10, 50]), 0.1, seed=0)
        summary = split_summary(split)

        self.assertEqual(summary['frames'].sum(), 100)
        self.assertAlmostEqual(summary['frame_fraction'].sum(), 1.0)
        self.assertEqual(summary.loc['test', 'groups'], 1)
