import os
import shutil
import tempfile
import unittest

import numpy
import pandas
from numpy.testing import assert_array_equal
from parameterized import parameterized

from workflowrecognition.base import ModelSpec
from workflowrecognition.base import ParamStore
from workflowrecognition.datasets.generate import SynthConfig
from workflowrecognition.datasets.generate import synth_generate
from workflowrecognition.measures import video_accuracy
from workflowrecognition.models import init_params
from workflowrecognition.training import AdamState
from workflowrecognition.training import HISTORY_COLUMNS
from workflowrecognition.training import TrainConfig
from workflowrecognition.training import adam_step
from workflowrecognition.training import embed_dataset
from workflowrecognition.training import lr_at
from workflowrecognition.training import predict
from workflowrecognition.training import read_history
from workflowrecognition.training import train
from workflowrecognition.training import write_history
from workflowrecognition.utils import ConfigError
from workflowrecognition.utils import LearningError


def separable_videos(num_videos=2, seed=0):

    cfg = SynthConfig(num_classes=7, feature_dim=8,
                      grammar=[(c, 14, 15) for c in range(7)],
                      noise=0.0, num_videos=num_videos, seed=seed)
    return synth_generate(cfg).pairs()


def train_accuracy(params, spec, pairs):

    return numpy.mean([video_accuracy(predict(params, spec, seq), labels)
                       for seq, labels in pairs])


class TestAdam(unittest.TestCase):

    def setUp(self):

        self.params = ParamStore()
        self.params.add('theta', numpy.zeros(1))
        self.state = AdamState(self.params)

    def test_first_step(self):

        self.params.accumulate({'theta': numpy.ones(1)})
        adam_step(self.params, self.state, 0.1)

        self.assertAlmostEqual(self.params['theta'][0], -0.0999999990,
                               places=10)
        self.assertEqual(self.state.t, 1)
        self.assertFalse(numpy.any(self.params.grad('theta')))

    def test_constant_gradient(self):

        for _ in range(2):
            self.params.accumulate({'theta': numpy.ones(1)})
            adam_step(self.params, self.state, 0.1)

        self.assertAlmostEqual(self.params['theta'][0], -0.2, delta=1e-6)

    def test_non_finite_gradient(self):

        self.params.accumulate({'theta': numpy.array([numpy.nan])})

        with self.assertRaisesRegex(LearningError, "theta"):
            adam_step(self.params, self.state, 0.1)

        self.assertEqual(self.params['theta'][0], 0.0)


class TestSchedule(unittest.TestCase):

    @parameterized.expand([
        (0, 1e-3),
        (9, 1e-3),
        (10, 1e-4),
        (25, 1e-5),
    ])
    def test_step_decay(self, epoch, expected):

        cfg = TrainConfig(lr=1e-3, lr_decay=0.1, lr_interval=10)

        self.assertAlmostEqual(lr_at(epoch, cfg), expected, places=15)

    def test_negative_epoch(self):

        with self.assertRaises(ValueError):
            lr_at(-1, TrainConfig())

    def test_invalid_config(self):

        with self.assertRaises(ConfigError) as cm:
            TrainConfig(lr=0, lr_decay=1.5, epochs=-1)

        self.assertEqual(len(cm.exception.problems), 3)

    def test_unknown_setting(self):

        with self.assertRaisesRegex(ConfigError, "momentum"):
            TrainConfig.from_dict({'momentum': 0.9})


class TestTrain(unittest.TestCase):

    @classmethod
    def setUpClass(cls):

        cls.pairs = separable_videos()
        cls.cfg = TrainConfig(lr=0.02, lr_interval=30, epochs=30, seed=0)

    def test_videos(self):

        self.assertEqual(len(self.pairs), 2)
        for seq, labels in self.pairs:
            self.assertTrue(98 <= seq.T <= 105)
            self.assertEqual(seq.D, 8)

    @parameterized.expand([
        ('mstcn', ModelSpec('mstcn', 8, 7, num_filters=16,
                            layers_per_stage=4)),
        ('gru', ModelSpec('gru', 8, 7)),
    ])
    def test_overfit_separable(self, kind, spec):

        params, history = train(spec, self.cfg, self.pairs)

        self.assertEqual(len(history), 30)
        self.assertLess(history['loss'].iloc[-1], history['loss'].iloc[0])
        self.assertEqual(train_accuracy(params, spec, self.pairs), 1.0)

        for seq, labels in self.pairs:
            assert_array_equal(predict(params, spec, seq).argmax_track,
                               labels.values)

    def test_frame_mlp_minibatches(self):

        spec = ModelSpec('frame-mlp', 8, 7, num_filters=16)
        cfg = self.cfg.replace(epochs=10, frame_batch=32)
        params, history = train(spec, cfg, self.pairs)

        self.assertLess(history['loss'].iloc[-1], history['loss'].iloc[0])

    def test_deterministic(self):

        spec = ModelSpec('clip-conv', 8, 7, num_filters=6, window=4)
        cfg = self.cfg.replace(epochs=3)

        a, history_a = train(spec, cfg, self.pairs)
        b, history_b = train(spec, cfg, self.pairs)
        c, _ = train(spec, cfg.replace(seed=1), self.pairs)

        self.assertTrue(a.equals(b))
        pandas.testing.assert_frame_equal(history_a, history_b)
        self.assertFalse(a.equals(c))

    def test_zero_epochs(self):

        spec = ModelSpec('gru', 8, 7)
        params, history = train(spec, self.cfg.replace(epochs=0),
                                self.pairs)

        self.assertTrue(params.equals(init_params(spec, 0)))
        self.assertListEqual(list(history.columns), HISTORY_COLUMNS)
        self.assertEqual(len(history), 0)

    def test_learning_rate_history(self):

        spec = ModelSpec('frame-mlp', 8, 7, num_filters=4)
        cfg = TrainConfig(lr=1e-2, lr_interval=2, epochs=5)
        _, history = train(spec, cfg, self.pairs)

        numpy.testing.assert_allclose(history['lr'],
                                      [1e-2, 1e-2, 1e-3, 1e-3, 1e-4])
        assert_array_equal(history['epoch'], numpy.arange(5))

    def test_validation_metrics(self):

        spec = ModelSpec('frame-mlp', 8, 7, num_filters=4)
        _, history = train(spec, self.cfg.replace(epochs=2), self.pairs[:1],
                           valid_set=self.pairs[1:])

        self.assertIn('valid_accuracy', history.columns)
        self.assertIn('valid_f1', history.columns)

    def test_empty_training_set(self):

        with self.assertRaises(LearningError):
            train(ModelSpec('gru', 8, 7), self.cfg, [])

    def test_dimension_mismatch(self):

        with self.assertRaisesRegex(LearningError, "features per frame"):
            train(ModelSpec('gru', 6, 7), self.cfg, self.pairs)

    def test_embed_dataset(self):

        spec = ModelSpec('frame-mlp', 8, 7, num_filters=5)
        params = init_params(spec, 0)
        embedded = embed_dataset(params, spec, self.pairs)

        self.assertEqual(embedded[0][0].D, 5)
        self.assertIs(embedded[0][1], self.pairs[0][1])

        with self.assertRaises(ConfigError):
            embed_dataset(init_params(ModelSpec('gru', 8, 7), 0),
                          ModelSpec('gru', 8, 7), self.pairs)


class TestHistoryFile(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.dir)

    def test_roundtrip(self):

        history = pandas.DataFrame({'epoch': [0, 1], 'lr': [1e-3, 1e-3],
                                    'loss': [1.25, 0.5]},
                                   columns=HISTORY_COLUMNS)
        path = os.path.join(self.dir, 'history.jsonl')
        write_history(history, path)

        with open(path) as f:
            self.assertEqual(len(f.readlines()), 2)
        pandas.testing.assert_frame_equal(read_history(path), history)
