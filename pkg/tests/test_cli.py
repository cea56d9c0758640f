import io
import os
import shutil
import tempfile
import unittest
from unittest import mock

import yaml

from workflowrecognition.cli import main
from workflowrecognition.evaluation import read_aggregate_report
from workflowrecognition.fileio import load_manifest


def run(*argv):
    """Run the command line; returns (exit code, stdout, stderr)."""

    with mock.patch('sys.stdout', new_callable=io.StringIO) as out, \
            mock.patch('sys.stderr', new_callable=io.StringIO) as err:
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


class CliTestCase(unittest.TestCase):

    def setUp(self):

        patcher = mock.patch.dict(os.environ, {'SWR_THREADS': '1'})
        patcher.start()
        self.addCleanup(patcher.stop)

    @classmethod
    def setUpClass(cls):

        cls.dir = tempfile.mkdtemp()
        cls.data = os.path.join(cls.dir, 'data')
        with mock.patch.dict(os.environ, {'SWR_THREADS': '1'}):
            code, _, err = run('synth', '--config', 'separable-7',
                               '--num-videos', '4', '--test-fraction', '0.5',
                               '--out', cls.data)
        assert code == 0, err
        cls.manifest = os.path.join(cls.data, 'manifest.yml')

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.dir)

    def path(self, *names):
        return os.path.join(self.dir, *names)

    def train_eval(self, out, *extra):
        return run('train-eval', '--manifest', self.manifest,
                   '--model', 'frame-mlp', '--epochs', '1',
                   '--seeds', '0,1', '--out', self.path(out), *extra)


class TestSynth(CliTestCase):

    def test_separable_dataset(self):

        manifest = load_manifest(self.manifest)

        self.assertEqual(len(manifest), 4)
        self.assertEqual(set(manifest.entries['split']), {'train', 'test'})

        with open(os.path.join(self.data, 'bayes_bound.yml')) as f:
            self.assertEqual(yaml.safe_load(f)['all'], 1.0)

    def test_reports_bound(self):

        code, out, _ = run('synth', '--config', 'separable-7',
                           '--num-videos', '2', '--out', self.path('s2'))

        self.assertEqual(code, 0)
        self.assertIn("wrote 2 videos", out)
        self.assertIn("frame-wise bound: 1.000000", out)

    def test_invalid_config_file(self):

        config = self.path('bad.yml')
        with open(config, 'w') as f:
            yaml.safe_dump({'num_classes': 3, 'occlusion_length': [8, 2]}, f)

        code, _, err = run('synth', '--config', config,
                           '--out', self.path('bad'))

        self.assertEqual(code, 1)
        self.assertIn("occlusion_length", err)
        self.assertEqual(len(err.strip().splitlines()), 1)

    def test_unknown_config(self):

        code, _, err = run('synth', '--config', 'nowhere',
                           '--out', self.path('x'))

        self.assertEqual(code, 1)
        self.assertIn("separable-7", err)

    def test_no_overwrite(self):

        code, _, _ = run('synth', '--config', 'separable-7', '--out',
                         self.data, '--no-overwrite')

        self.assertEqual(code, 1)


class TestTrainEval(CliTestCase):

    def test_run_directory(self):

        code, out, err = self.train_eval('run')

        self.assertEqual(code, 0, err)
        self.assertIn("frame-mlp", out)

        for name in ('config.yml', 'report.yml', 'table.txt'):
            self.assertTrue(os.path.exists(self.path('run', name)))
        self.assertFalse(os.path.exists(self.path('run', 'INCOMPLETE')))

        for seed in (0, 1):
            for name in ('model.swrc', 'history.jsonl', 'report.yml'):
                self.assertTrue(os.path.exists(
                    self.path('run', 'seed{}'.format(seed), name)))

        report = read_aggregate_report(self.path('run', 'report.yml'))
        self.assertEqual(report.seeds, [0, 1])

    def test_rerun_is_byte_identical(self):

        self.assertEqual(self.train_eval('a')[0], 0)
        self.assertEqual(self.train_eval('b')[0], 0)

        with open(self.path('a', 'report.yml'), 'rb') as a, \
                open(self.path('b', 'report.yml'), 'rb') as b:
            self.assertEqual(a.read(), b.read())

    def test_worker_count_independent(self):

        seeds = (0, 1, 2, 3)
        for threads in ('1', '4'):
            with mock.patch.dict(os.environ, {'SWR_THREADS': threads}):
                code, _, err = run(
                    'train-eval', '--manifest', self.manifest,
                    '--model', 'clip-conv', '--epochs', '2',
                    '--seeds', ','.join(str(s) for s in seeds),
                    '--out', self.path('threads' + threads))
            self.assertEqual(code, 0, err)

        names = ['report.yml'] + \
            [os.path.join('seed{}'.format(s), f) for s in seeds
             for f in ('model.swrc', 'history.jsonl', 'report.yml')]
        for name in names:
            with open(self.path('threads1', name), 'rb') as a, \
                    open(self.path('threads4', name), 'rb') as b:
                self.assertEqual(a.read(), b.read(), name)

    def test_resolved_config(self):

        self.train_eval('resolved')

        with open(self.path('resolved', 'config.yml')) as f:
            cfg = yaml.safe_load(f)

        self.assertEqual(cfg['model']['feature_dim'], 8)
        self.assertEqual(cfg['model']['num_classes'], 7)
        self.assertEqual(cfg['train']['epochs'], 1)
        self.assertEqual(cfg['seeds'], [0, 1])

    def test_single_seed(self):

        code, out, _ = run('train-eval', '--manifest', self.manifest,
                           '--model', 'gru', '--epochs', '1',
                           '--seeds', '3', '--out', self.path('single'))

        self.assertEqual(code, 0)
        self.assertIn("single seed", out)

    def test_backbone(self):

        code, out, err = run('train-eval', '--manifest', self.manifest,
                             '--backbone', 'frame-mlp', '--model', 'gru',
                             '--epochs', '1', '--seeds', '0',
                             '--out', self.path('two-step'))

        self.assertEqual(code, 0, err)
        self.assertIn("frame-mlp+gru", out)
        self.assertTrue(os.path.exists(
            self.path('two-step', 'seed0', 'backbone.swrc')))

    def test_unknown_model(self):

        code, _, err = run('train-eval', '--manifest', self.manifest,
                           '--model', 'lstm', '--out', self.path('lstm'))

        self.assertEqual(code, 1)
        self.assertIn("lstm", err)
        self.assertIn("mstcn", err)
        self.assertFalse(os.path.exists(self.path('lstm')))

    def test_no_overwrite(self):

        self.assertEqual(self.train_eval('once')[0], 0)

        code, _, err = self.train_eval('once', '--no-overwrite')

        self.assertEqual(code, 1)
        self.assertIn("no-overwrite", err)

    def test_invalid_seeds(self):

        code, _, _ = run('train-eval', '--manifest', self.manifest,
                         '--model', 'gru', '--seeds', '0,x',
                         '--out', self.path('seeds'))

        self.assertEqual(code, 1)

    def test_invalid_thread_count(self):

        with mock.patch.dict(os.environ, {'SWR_THREADS': '0'}):
            code, _, err = self.train_eval('threads')

        self.assertEqual(code, 1)
        self.assertIn("SWR_THREADS", err)

    def test_config_file(self):

        config = self.path('run.yml')
        with open(config, 'w') as f:
            yaml.safe_dump({'manifest': self.manifest,
                            'model': {'kind': 'frame-mlp', 'num_filters': 8},
                            'train': {'epochs': 1}, 'seeds': [2]}, f)

        code, _, err = run('train-eval', '--config', config,
                           '--out', self.path('from-file'))

        self.assertEqual(code, 0, err)
        with open(self.path('from-file', 'config.yml')) as f:
            self.assertEqual(yaml.safe_load(f)['model']['num_filters'], 8)


class TestReport(CliTestCase):

    def test_table(self):

        self.train_eval('r1')
        table_file = self.path('table.txt')

        code, out, _ = run('report', self.path('r1'), '--out', table_file)

        self.assertEqual(code, 0)
        self.assertTrue(out.startswith("Comparative study"))
        self.assertIn("frame-mlp", out)
        with open(table_file) as f:
            self.assertEqual(f.read(), out)

    def test_missing_report(self):

        code, _, err = run('report', self.path('nothing'))

        self.assertEqual(code, 1)
        self.assertIn("no aggregate report", err)


class TestUsage(unittest.TestCase):

    def test_no_command(self):

        self.assertEqual(run()[0], 1)

    def test_bad_flag(self):

        code, _, err = run('train-eval', '--epochs', 'many')

        self.assertEqual(code, 1)
        self.assertIn("usage error", err)

    def test_bad_scope(self):

        self.assertEqual(run('gradcheck', 'everything')[0], 1)
