import unittest

import numpy
from numpy.testing import assert_array_equal, assert_allclose
from parameterized import parameterized

from workflowrecognition.algorithms.kernels import activation
from workflowrecognition.algorithms.kernels import add_bias
from workflowrecognition.algorithms.kernels import conv1d_causal
from workflowrecognition.algorithms.kernels import linear
from workflowrecognition.algorithms.gradcheck import node_check
from workflowrecognition.utils import ShapeError


class TestLinear(unittest.TestCase):

    def test_zero_input_passes_bias(self):

        node = linear(numpy.zeros((4, 3)), numpy.ones((3, 2)), [1., 2.])

        assert_array_equal(node.output, numpy.tile([1., 2.], (4, 1)))

    def test_identity(self):

        x = numpy.random.default_rng(0).standard_normal((5, 3))
        node = linear(x, numpy.eye(3), numpy.zeros(3))

        assert_array_equal(node.output, x)

    def test_gradients(self):

        rng = numpy.random.default_rng(1)
        report = node_check(linear, {'x': rng.standard_normal((3, 2)),
                                     'W': rng.standard_normal((2, 2)),
                                     'b': rng.standard_normal(2)},
                            random_state=rng)

        self.assertTrue(report.passed, report)

    def test_shape_mismatch(self):

        with self.assertRaisesRegex(ShapeError, r"\(4, 3\).*\(2, 2\)"):
            linear(numpy.zeros((4, 3)), numpy.zeros((2, 2)), numpy.zeros(2))

        with self.assertRaises(ShapeError):
            linear(numpy.zeros((4, 3)), numpy.zeros((3, 2)), numpy.zeros(3))

    def test_zero_output_gradient(self):

        rng = numpy.random.default_rng(2)
        node = linear(rng.standard_normal((4, 3)),
                      rng.standard_normal((3, 2)), rng.standard_normal(2))

        for grad, shape in zip(node.backward(numpy.zeros((4, 2))),
                               [(4, 3), (3, 2), (2,)]):
            self.assertEqual(grad.shape, shape)
            self.assertFalse(numpy.any(grad))


class TestConvolution(unittest.TestCase):

    def test_pointwise_identity(self):

        x = numpy.random.default_rng(0).standard_normal((6, 3))
        node = conv1d_causal(x, numpy.eye(3).reshape(1, 3, 3), 1)

        assert_array_equal(node.output, x)

    def test_impulse_response(self):

        x = numpy.zeros((12, 1))
        x[5] = 1.0
        node = conv1d_causal(x, numpy.ones((3, 1, 1)), dilation=2)

        assert_array_equal(numpy.flatnonzero(node.output[:, 0]), [5, 7, 9])

    @parameterized.expand([(1, 1), (2, 1), (3, 2), (3, 4), (4, 3)])
    def test_causality(self, k, d):

        rng = numpy.random.default_rng(k * 10 + d)
        x = rng.standard_normal((15, 2))
        K = rng.standard_normal((k, 2, 3))
        reference = conv1d_causal(x, K, d).output

        for t0 in range(15):
            perturbed = x.copy()
            perturbed[t0] += rng.standard_normal(2)
            output = conv1d_causal(perturbed, K, d).output

            assert_array_equal(output[:t0], reference[:t0])

    def test_kernel_longer_than_video(self):

        x = numpy.array([[1.0], [2.0]])
        K = numpy.arange(1.0, 6.0).reshape(5, 1, 1)
        node = conv1d_causal(x, K, dilation=3)

        # only the tap on the current frame reaches inside the video
        assert_array_equal(node.output[:, 0], [5.0, 10.0])

    def test_gradients(self):

        rng = numpy.random.default_rng(3)
        report = node_check(
            lambda x, K: conv1d_causal(x, K, dilation=2),
            {'x': rng.standard_normal((8, 2)),
             'K': rng.standard_normal((3, 2, 2))},
            random_state=rng)

        self.assertTrue(report.passed, report)

    @parameterized.expand([(0, 1), (3, 0), (3, -1)])
    def test_invalid_sizes(self, k, d):

        with self.assertRaises(ValueError):
            conv1d_causal(numpy.zeros((4, 2)), numpy.zeros((k, 2, 2)), d)

    def test_channel_mismatch(self):

        with self.assertRaises(ShapeError):
            conv1d_causal(numpy.zeros((4, 2)), numpy.zeros((3, 3, 2)), 1)


class TestActivation(unittest.TestCase):

    def test_sigmoid_of_zero(self):

        node = activation(numpy.zeros((3, 4)), 'sigmoid')

        assert_array_equal(node.output, numpy.full((3, 4), 0.5))

    def test_softmax_uniform_row(self):

        node = activation(numpy.full((2, 7), 3.2), 'softmax')

        assert_allclose(node.output, numpy.full((2, 7), 1.0 / 7), rtol=1e-12)

    def test_softmax_rows_sum_to_one(self):

        x = 50 * numpy.random.default_rng(0).standard_normal((20, 5))
        node = activation(x, 'softmax-rows')

        assert_allclose(node.output.sum(axis=1), numpy.ones(20), atol=1e-12)
        self.assertTrue(numpy.all(numpy.isfinite(node.output)))

    def test_relu(self):

        node = activation(numpy.array([[-1.0, 0.0, 2.0]]), 'relu')

        assert_array_equal(node.output, [[0.0, 0.0, 2.0]])
        assert_array_equal(node.backward(numpy.ones((1, 3)))[0],
                           [[0.0, 0.0, 1.0]])

    @parameterized.expand(['sigmoid', 'tanh', 'softmax'])
    def test_gradients(self, kind):

        rng = numpy.random.default_rng(4)
        report = node_check(lambda x: activation(x, kind),
                            {'x': rng.standard_normal((4, 3))},
                            random_state=rng)

        self.assertTrue(report.passed, report)

    def test_unknown_kind(self):

        with self.assertRaisesRegex(ValueError, "relu"):
            activation(numpy.zeros((2, 2)), 'gelu')


class TestAddBias(unittest.TestCase):

    def test_backward(self):

        dy = numpy.arange(6.0).reshape(3, 2)
        node = add_bias(numpy.zeros((3, 2)), [1.0, -1.0])
        dx, db = node.backward(dy)

        assert_array_equal(node.output, numpy.tile([1.0, -1.0], (3, 1)))
        assert_array_equal(dx, dy)
        assert_array_equal(db, [6.0, 9.0])

    def test_output_gradient_shape(self):

        node = add_bias(numpy.zeros((3, 2)), numpy.zeros(2))

        with self.assertRaises(ShapeError):
            node.backward(numpy.zeros((2, 3)))
