import unittest

import numpy
from numpy.testing import assert_array_equal
from parameterized import parameterized

import workflowrecognition
from workflowrecognition.base import LabelTrack
from workflowrecognition.base import Prediction

GT = numpy.array([0, 0, 1, 1])
PRED = numpy.array([0, 1, 1, 1])


def count_oracle(pred, labels, num_classes):
    """Precision and recall means from raw frame counts."""

    precisions, recalls = [], []

    for c in range(num_classes):
        tp = sum(1 for p, y in zip(pred, labels) if p == c and y == c)
        fp = sum(1 for p, y in zip(pred, labels) if p == c and y != c)
        fn = sum(1 for p, y in zip(pred, labels) if p != c and y == c)
        if tp + fp > 0:
            precisions.append(tp / (tp + fp))
        if tp + fn > 0:
            recalls.append(tp / (tp + fn))

    mean_p = sum(precisions) / len(precisions)
    mean_r = sum(recalls) / len(recalls)
    f1 = 0.0 if mean_p + mean_r == 0 else \
        2 * mean_p * mean_r / (mean_p + mean_r)

    return mean_p, mean_r, f1


def rank_walk_oracle(scores, labels):
    """AP by recomputing precision and recall at every rank."""

    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    n_pos = sum(1 for y in labels if y)

    ap, hits, last_recall = 0.0, 0, 0.0
    for k, i in enumerate(order, start=1):
        if labels[i]:
            hits += 1
        recall = hits / n_pos
        ap += (recall - last_recall) * (hits / k)
        last_recall = recall

    return ap


class TestAccuracy(unittest.TestCase):

    @parameterized.expand([
        ([0, 1, 2, 3], [0, 1, 2, 3], 1.0),
        ([0, 1, 2, 0], [0, 1, 2, 3], 0.75),
        ([1, 2, 3, 0], [0, 1, 2, 3], 0.0),
    ])
    def test_video_accuracy(self, pred, labels, expected):

        self.assertEqual(
            workflowrecognition.video_accuracy(numpy.array(pred),
                                               numpy.array(labels)),
            expected)

    def test_prediction_argmax(self):

        prediction = Prediction(numpy.eye(4)[PRED], 'multiclass')

        self.assertEqual(
            workflowrecognition.video_accuracy(prediction,
                                               LabelTrack(GT, 4)), 0.75)

    def test_mode_mismatch(self):

        masks = LabelTrack(numpy.eye(4, dtype=int), 4, 'multilabel')

        with self.assertRaises(ValueError):
            workflowrecognition.video_accuracy(PRED, masks)

    def test_length_mismatch(self):

        with self.assertRaises(ValueError):
            workflowrecognition.video_accuracy(PRED, GT[:3])


class TestPrecisionRecall(unittest.TestCase):

    def test_hand_example(self):

        pr = workflowrecognition.per_class_pr(PRED, GT, 2)

        self.assertEqual(pr.loc[0, 'precision'], 1.0)
        self.assertEqual(pr.loc[0, 'recall'], 0.5)
        self.assertAlmostEqual(pr.loc[1, 'precision'], 2.0 / 3)
        self.assertEqual(pr.loc[1, 'recall'], 1.0)
        assert_array_equal(pr['tp'], [1, 2])

    def test_f1_hand_example(self):

        p, r, f1 = workflowrecognition.f1_video(
            workflowrecognition.per_class_pr(PRED, GT, 2))

        self.assertAlmostEqual(p, 5.0 / 6, places=12)
        self.assertAlmostEqual(r, 0.75, places=12)
        self.assertAlmostEqual(f1, 0.789474, delta=1e-6)

    def test_perfect(self):

        pr = workflowrecognition.per_class_pr(GT, GT, 3)

        self.assertTrue((pr['precision'][pr['precision_defined']] == 1).all())
        self.assertTrue((pr['recall'][pr['recall_defined']] == 1).all())
        self.assertEqual(workflowrecognition.f1_video(pr)[2], 1.0)

    def test_undefined_classes(self):

        pr = workflowrecognition.per_class_pr(numpy.array([0, 0]),
                                              numpy.array([0, 1]), 3)

        # class 1 present but never predicted
        self.assertTrue(pr.loc[1, 'recall_defined'])
        self.assertEqual(pr.loc[1, 'recall'], 0.0)
        self.assertFalse(pr.loc[1, 'precision_defined'])
        self.assertTrue(numpy.isnan(pr.loc[1, 'precision']))

        # class 2 absent from both tracks
        self.assertFalse(pr.loc[2, 'precision_defined'])
        self.assertFalse(pr.loc[2, 'recall_defined'])

    def test_degenerate_f1(self):

        pr = workflowrecognition.per_class_pr(numpy.array([1, 1]),
                                              numpy.array([0, 0]), 2)

        self.assertEqual(workflowrecognition.f1_video(pr), (0.0, 0.0, 0.0))

    def test_empty_video_metric(self):

        pr = workflowrecognition.per_class_pr(GT, GT, 2)
        pr['precision_defined'] = False
        pr['recall_defined'] = False

        with self.assertRaises(ValueError):
            workflowrecognition.f1_video(pr)

    def test_nothing_predicted(self):

        probabilities = numpy.full((4, 3), 0.1)
        masks = numpy.array([[1, 0, 0]] * 4)

        pr = workflowrecognition.multilabel_pr(probabilities, masks)

        self.assertFalse(pr['precision_defined'].any())
        self.assertEqual(workflowrecognition.f1_video(pr), (0.0, 0.0, 0.0))

    def test_no_positive_frames(self):

        probabilities = numpy.array([[0.9, 0.1], [0.2, 0.1]])
        masks = numpy.zeros((2, 2), dtype=int)

        p, r, f1 = workflowrecognition.f1_video(
            workflowrecognition.multilabel_pr(probabilities, masks))

        self.assertEqual((p, r, f1), (0.0, 0.0, 0.0))

    def test_confusion_matrix(self):

        cm = workflowrecognition.confusion_matrix(PRED, GT, 3)

        assert_array_equal(cm, [[1, 1, 0], [0, 2, 0], [0, 0, 0]])

    def test_multilabel(self):

        probabilities = numpy.array([[0.9, 0.1], [0.6, 0.7], [0.2, 0.5]])
        masks = numpy.array([[1, 0], [0, 1], [0, 0]])

        pr = workflowrecognition.multilabel_pr(probabilities, masks)

        assert_array_equal(pr['tp'], [1, 1])
        assert_array_equal(pr['fp'], [1, 1])
        assert_array_equal(pr['fn'], [0, 0])


class TestAveragePrecision(unittest.TestCase):

    def test_hand_example(self):

        ap = workflowrecognition.average_precision([0.9, 0.8, 0.7],
                                                   [1, 0, 1])

        self.assertAlmostEqual(ap, 5.0 / 6, places=12)

    def test_positives_first(self):

        ap = workflowrecognition.average_precision([0.1, 0.9, 0.8, 0.2],
                                                   [0, 1, 1, 0])

        self.assertEqual(ap, 1.0)

    def test_ties_by_frame_index(self):

        self.assertEqual(
            workflowrecognition.average_precision([0.5, 0.5], [1, 0]), 1.0)
        self.assertEqual(
            workflowrecognition.average_precision([0.5, 0.5], [0, 1]), 0.5)

    def test_no_positives(self):

        self.assertTrue(numpy.isnan(
            workflowrecognition.average_precision([0.3, 0.2], [0, 0])))

    def test_class_average_precisions(self):

        probabilities = numpy.array([[0.9, 0.2], [0.8, 0.1], [0.7, 0.3]])
        masks = numpy.array([[1, 0], [0, 0], [1, 0]])

        aps = workflowrecognition.class_average_precisions(probabilities,
                                                           masks)

        self.assertAlmostEqual(aps[0], 5.0 / 6)
        self.assertTrue(numpy.isnan(aps[1]))


class TestOracles(unittest.TestCase):

    @classmethod
    def setUpClass(cls):

        rng = numpy.random.default_rng(2024)
        cls.instances = []
        for _ in range(1000):
            T = int(rng.integers(1, 13))
            C = int(rng.integers(2, 5))
            cls.instances.append((rng.integers(0, C, T),
                                  rng.integers(0, C, T), C))
        cls.rng = rng

    def test_accuracy(self):

        for pred, labels, _ in self.instances:
            correct = sum(1 for p, y in zip(pred, labels) if p == y)
            self.assertEqual(
                workflowrecognition.video_accuracy(pred, labels),
                correct / len(labels))

    def test_f1(self):

        for pred, labels, C in self.instances:
            expected = count_oracle(pred, labels, C)
            result = workflowrecognition.f1_video(
                workflowrecognition.per_class_pr(pred, labels, C))
            numpy.testing.assert_allclose(result, expected, rtol=0,
                                          atol=1e-12)

    def test_average_precision(self):

        for _ in range(1000):
            T = int(self.rng.integers(1, 13))
            labels = self.rng.integers(0, 2, T)
            if not labels.any():
                labels[int(self.rng.integers(0, T))] = 1
            # few distinct values to provoke ties
            scores = self.rng.integers(0, 4, T) / 4.0

            self.assertAlmostEqual(
                workflowrecognition.average_precision(scores, labels),
                rank_walk_oracle(list(scores), list(labels)), places=12)
