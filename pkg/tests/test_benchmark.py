"""Comparative study on the bundled internal-7 benchmark.

Trains every model kind with the default settings and three seeds, which
takes several minutes on a desktop CPU. Set SWR_SLOW_TESTS=1 to run it.
"""

import io
import os
import shutil
import tempfile
import unittest
from unittest import mock

import yaml

from workflowrecognition.base import MODEL_KINDS
from workflowrecognition.cli import main
from workflowrecognition.evaluation import read_aggregate_report


def run(*argv):

    with mock.patch('sys.stdout', new_callable=io.StringIO), \
            mock.patch('sys.stderr', new_callable=io.StringIO) as err:
        code = main(list(argv))
    return code, err.getvalue()


@unittest.skipUnless(os.environ.get('SWR_SLOW_TESTS'),
                     "set SWR_SLOW_TESTS=1 to train the comparative study")
class TestComparativeStudy(unittest.TestCase):

    @classmethod
    def setUpClass(cls):

        cls.dir = tempfile.mkdtemp()
        data = os.path.join(cls.dir, 'internal-7')

        code, err = run('synth', '--config', 'internal-7', '--out', data)
        assert code == 0, err

        with open(os.path.join(data, 'bayes_bound.yml')) as f:
            cls.bound = yaml.safe_load(f)['test']

        cls.accuracy = {}
        for kind in MODEL_KINDS:
            out = os.path.join(cls.dir, kind)
            code, err = run('train-eval', '--manifest',
                            os.path.join(data, 'manifest.yml'),
                            '--model', kind, '--out', out)
            assert code == 0, err
            report = read_aggregate_report(os.path.join(out, 'report.yml'))
            cls.accuracy[kind] = report.mean['accuracy']

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.dir)

    def test_frame_mlp_within_bound(self):

        self.assertLessEqual(self.accuracy['frame-mlp'], self.bound + 0.01)

    def test_temporal_models_resolve_global_ambiguities(self):

        for kind in ('gru', 'mstcn'):
            self.assertGreaterEqual(self.accuracy[kind],
                                    self.accuracy['frame-mlp'] + 0.10, kind)

    def test_clip_conv_bridges_occlusions(self):

        self.assertGreaterEqual(self.accuracy['clip-conv'],
                                self.accuracy['frame-mlp'] + 0.03)
