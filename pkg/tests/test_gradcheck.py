import io
import unittest
from unittest import mock

import numpy
from parameterized import parameterized

from workflowrecognition.algorithms.gradcheck import finite_diff_check
from workflowrecognition.algorithms.gradcheck import relative_error
from workflowrecognition.base import ModelSpec
from workflowrecognition.cli import main
from workflowrecognition.models import GRU
from workflowrecognition.utils import GradientCheckError
from workflowrecognition.verification import RESULT_COLUMNS
from workflowrecognition.verification import check_model
from workflowrecognition.verification import model_specs
from workflowrecognition.verification import run_gradcheck
from workflowrecognition.verification import suite_units


def square_sum(params):
    theta = params['theta']
    return float(numpy.sum(theta ** 2)), {'theta': 2 * theta}


def flipped_update_gate(self, d_z, z):
    return -self._sigmoid_grad(d_z, z)


class TestFiniteDifferences(unittest.TestCase):

    def test_quadratic(self):

        report = finite_diff_check(square_sum,
                                   {'theta': numpy.array([1.0, -2.0])})

        self.assertLess(report.max_rel_err, 1e-9)
        self.assertTrue(report.passed)
        self.assertEqual(report.n_checked, 2)

    def test_parameters_restored(self):

        theta = numpy.array([[0.5, 1.5], [-3.0, 2.0]])
        params = {'theta': theta.copy()}
        finite_diff_check(square_sum, params)

        numpy.testing.assert_array_equal(params['theta'], theta)

    def test_wrong_gradient(self):

        def func(params):
            value, grads = square_sum(params)
            grads['theta'][1] *= -1
            return value, grads

        report = finite_diff_check(func, {'theta': numpy.array([1.0, -2.0])})

        self.assertFalse(report.passed)
        self.assertEqual(report.worst[0], 'theta')
        self.assertEqual(report.worst[1], (1,))
        self.assertEqual(report.location, "theta[1]")

    def test_non_finite_value(self):

        def func(params):
            x = params['x']
            value = numpy.inf if x[1] < 0 else float(numpy.sum(numpy.sqrt(x)))
            return value, {'x': 0.5 / numpy.sqrt(x)}

        with self.assertRaisesRegex(GradientCheckError, r"x\[1\]"):
            finite_diff_check(func, {'x': numpy.array([1.0, 1e-6])})

    def test_invalid_step(self):

        with self.assertRaises(ValueError):
            finite_diff_check(square_sum, {'theta': numpy.ones(2)}, step=0)

    def test_kinks_skipped(self):

        def func(params):
            x = params['x']
            return float(numpy.sum(numpy.maximum(x, 0))), \
                {'x': (x > 0).astype(float)}

        params = {'x': numpy.array([1e-7, 1.0, -1.0])}

        self.assertFalse(finite_diff_check(func, params).passed)

        report = finite_diff_check(func, params, kink_tol=1e-8)
        self.assertTrue(report.passed)
        self.assertEqual(report.n_skipped, 1)
        self.assertEqual(report.n_checked, 2)

    def test_relative_error_floor(self):

        self.assertAlmostEqual(float(relative_error(0.0, 1e-12)), 1e-4)
        self.assertEqual(float(relative_error(2.0, 1.0)), 0.5)


class TestSuites(unittest.TestCase):

    @parameterized.expand(['ops', 'losses'])
    def test_elementary_suites_pass(self, scope):

        results = run_gradcheck(scope, seeds=3)

        self.assertListEqual(list(results.columns), RESULT_COLUMNS)
        self.assertTrue(results['passed'].all(), results.to_string())
        self.assertTrue((results['max_rel_err'] < 1e-6).all())

    @parameterized.expand(list(model_specs().keys()))
    def test_model_passes(self, unit):

        spec = model_specs()[unit]
        report = check_model(spec, seed=7)

        self.assertTrue(report.passed, report)
        self.assertGreater(report.n_checked, 0)

    def test_mstcn_six_frames(self):

        spec = ModelSpec('mstcn', feature_dim=4, num_classes=3,
                         num_filters=5, num_stages=2, layers_per_stage=3)
        X = numpy.random.default_rng(11).standard_normal((6, 4))

        self.assertTrue(check_model(spec, seed=3, X=X).passed)

    def test_gru_multilabel_five_frames(self):

        spec = ModelSpec('gru', feature_dim=3, num_classes=4,
                         label_mode='multilabel')
        X = numpy.random.default_rng(12).standard_normal((5, 3))

        self.assertTrue(check_model(spec, seed=4, X=X).passed)

    def test_scopes(self):

        all_units = suite_units('all')

        self.assertIn('conv1d_causal[k=3,d=2]', all_units)
        self.assertIn('multistage_loss[multilabel]', all_units)
        self.assertIn('gru[multiclass]', all_units)
        self.assertEqual(
            len(all_units),
            sum(len(suite_units(s)) for s in ('ops', 'losses', 'models')))

        with self.assertRaises(ValueError):
            suite_units('everything')


class TestMutation(unittest.TestCase):

    def test_gru_sign_flip_fails(self):

        spec = model_specs()['gru[multiclass]']

        with mock.patch.object(GRU, '_update_gate_grad', flipped_update_gate):
            report = check_model(spec, seed=0)

        self.assertFalse(report.passed)
        self.assertGreater(report.max_rel_err, 1e-2)

    def test_cli_exit_code(self):

        stderr = io.StringIO()

        with mock.patch.object(GRU, '_update_gate_grad', flipped_update_gate), \
                mock.patch('sys.stdout', new_callable=io.StringIO), \
                mock.patch('sys.stderr', stderr):
            code = main(['gradcheck', 'models', '--seeds', '1'])

        self.assertEqual(code, 2)
        self.assertIn("gru[multiclass]", stderr.getvalue())
        self.assertIn("gru[multilabel]", stderr.getvalue())
        self.assertNotIn("mstcn", stderr.getvalue())

    def test_cli_passes(self):

        with mock.patch('sys.stdout', new_callable=io.StringIO) as stdout:
            code = main(['gradcheck', 'losses', '--seeds', '2'])

        self.assertEqual(code, 0)
        self.assertIn("cross_entropy", stdout.getvalue())
