"""Dense differentiable kernels.

Every kernel returns a :class:`DiffNode` holding the forward output and a
closure that maps the gradient of the output onto the gradients of the
inputs. All computations are carried out in float64. Sums over taps and
channels run in ascending index order, so results are bit-reproducible.
"""

import numpy as np
from scipy import special

from workflowrecognition.utils import ShapeError
from workflowrecognition.types import as_matrix
from workflowrecognition.types import as_vector

ACTIVATIONS = ('relu', 'sigmoid', 'tanh', 'softmax')


class DiffNode(object):
    """Output of a differentiable kernel.

    Parameters
    ----------
    output : numpy.ndarray
        The forward value.
    backward : callable
        Maps the output gradient onto a tuple of input gradients, in the
        order of the kernel's arguments.
    saved : dict, optional
        The inputs retained for the backward pass.

    Note
    ----
    The saved state is owned by a single caller; do not run backward for the
    same node from several threads.
    """

    def __init__(self, output, backward, saved=None):

        self.output = output
        self.saved = saved if saved is not None else {}
        self._backward = backward

    @property
    def shape(self):
        return self.output.shape

    def backward(self, grad_output):
        """Return the input gradients for the given output gradient."""

        grad_output = np.asarray(grad_output, dtype=np.float64)

        if grad_output.shape != self.output.shape:
            raise ShapeError("output gradient does not match the output",
                             grad_output.shape, self.output.shape)

        return self._backward(grad_output)


def linear(x, W, b):
    """Affine map of every row: ``y[t] = x[t] W + b``.

    Parameters
    ----------
    x : numpy.ndarray
        Input of shape (T, Din).
    W : numpy.ndarray
        Weights of shape (Din, Dout).
    b : numpy.ndarray
        Bias of shape (Dout,).

    Returns
    -------
    DiffNode
        Output (T, Dout); backward returns (dX, dW, db).
    """

    x = as_matrix(x, "linear input")
    W = as_matrix(W, "linear weights")
    b = as_vector(b, "linear bias")

    if x.shape[1] != W.shape[0]:
        raise ShapeError("linear input and weights do not conform",
                         x.shape, W.shape)
    if b.shape[0] != W.shape[1]:
        raise ShapeError("linear weights and bias do not conform",
                         W.shape, b.shape)

    y = x.dot(W) + b

    def backward(dy):
        return dy.dot(W.T), x.T.dot(dy), dy.sum(axis=0)

    return DiffNode(y, backward, saved={'x': x, 'W': W})


def conv1d_causal(x, K, dilation=1):
    """Causal dilated one dimensional convolution.

    ``(k - 1) * dilation`` zero rows are virtually prepended to the input,
    so the output at time t only touches inputs at times
    ``t - (k - 1) * dilation, ..., t``.

    Parameters
    ----------
    x : numpy.ndarray
        Input of shape (T, Cin).
    K : numpy.ndarray
        Kernel of shape (k, Cin, Cout). Tap ``k - 1`` sees the current frame.
    dilation : int
        Spacing between taps, at least 1.

    Returns
    -------
    DiffNode
        Output (T, Cout); backward returns (dX, dK).
    """

    x = as_matrix(x, "convolution input")
    K = np.asarray(K, dtype=np.float64)

    if K.ndim != 3:
        raise ShapeError("convolution kernel must be (k, Cin, Cout)", K.shape)

    k, c_in, c_out = K.shape

    if k < 1:
        raise ValueError("kernel size must be at least 1, got {}".format(k))
    if not isinstance(dilation, (int, np.integer)) or dilation < 1:
        raise ValueError(
            "dilation must be a positive integer, got {}".format(dilation))
    if x.shape[0] < 1:
        raise ShapeError("convolution input needs at least one frame",
                         x.shape)
    if x.shape[1] != c_in:
        raise ShapeError("convolution input and kernel do not conform",
                         x.shape, K.shape)

    T = x.shape[0]

    # Tap i reads the frame (k - 1 - i) * dilation steps back. Taps that
    # reach further back than the first frame only see padding zeros and
    # are skipped instead of materialising the padding.
    shifts = [(k - 1 - i) * dilation for i in range(k)]

    y = np.zeros((T, c_out))
    for i, s in enumerate(shifts):
        if s < T:
            y[s:] += x[:T - s].dot(K[i])

    def backward(dy):

        dx = np.zeros_like(x)
        dK = np.zeros_like(K)

        for i, s in enumerate(shifts):
            if s < T:
                dx[:T - s] += dy[s:].dot(K[i].T)
                dK[i] = x[:T - s].T.dot(dy[s:])

        return dx, dK

    return DiffNode(y, backward, saved={'x': x, 'K': K, 'dilation': dilation})


def _relu(x):

    mask = x > 0
    y = np.where(mask, x, 0.0)

    def backward(dy):
        return (dy * mask,)

    return y, backward


def _sigmoid(x):

    y = special.expit(x)

    def backward(dy):
        return (dy * y * (1.0 - y),)

    return y, backward


def _tanh(x):

    y = np.tanh(x)

    def backward(dy):
        return (dy * (1.0 - y * y),)

    return y, backward


def _softmax(x):

    if x.shape[1] < 1:
        raise ShapeError("softmax needs at least one column", x.shape)

    # scipy subtracts the row maximum before exponentiating
    y = special.softmax(x, axis=1)

    def backward(dy):
        inner = np.sum(dy * y, axis=1, keepdims=True)
        return (y * (dy - inner),)

    return y, backward


_ACTIVATION_FUNCS = {
    'relu': _relu,
    'sigmoid': _sigmoid,
    'tanh': _tanh,
    'softmax': _softmax,
    'softmax-rows': _softmax,
}


def activation(x, kind):
    """Elementwise (or row-wise softmax) nonlinearity.

    Parameters
    ----------
    x : numpy.ndarray
        Input matrix.
    kind : str
        One of 'relu', 'sigmoid', 'tanh' or 'softmax' ('softmax-rows').

    Returns
    -------
    DiffNode
        Output of the same shape; backward returns (dX,).
    """

    try:
        func = _ACTIVATION_FUNCS[kind]
    except KeyError:
        raise ValueError("activation {!r} unknown. Choose {}".format(
            kind, ", ".join(ACTIVATIONS)))

    x = as_matrix(x, "activation input")
    y, backward = func(x)

    return DiffNode(y, backward, saved={'x': x, 'kind': kind})


def add_bias(x, b):
    """Broadcast a bias row over every frame; backward returns (dX, db)."""

    x = as_matrix(x, "bias input")
    b = as_vector(b, "bias")

    if x.shape[1] != b.shape[0]:
        raise ShapeError("input and bias do not conform", x.shape, b.shape)

    def backward(dy):
        return dy, dy.sum(axis=0)

    return DiffNode(x + b, backward)
