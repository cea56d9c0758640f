"""Frame-level, clip-level and temporal models over feature sequences."""

from collections import OrderedDict

import numpy as np
from scipy import special

from workflowrecognition.base import BaseModel
from workflowrecognition.base import FeatureSequence
from workflowrecognition.base import ModelSpec
from workflowrecognition.base import MODEL_KINDS
from workflowrecognition.utils import ConfigError
from workflowrecognition.algorithms.kernels import activation
from workflowrecognition.algorithms.kernels import add_bias
from workflowrecognition.algorithms.kernels import conv1d_causal
from workflowrecognition.algorithms.kernels import linear


def _probability_kind(label_mode):
    return 'softmax' if label_mode == 'multiclass' else 'sigmoid'


class FrameMLP(BaseModel):
    """Frame-level model.

    One hidden layer of width F with relu and a linear output layer, applied
    to every frame on its own. The output at t is a function of frame t
    only; the model has no notion of time.
    """

    kind = 'frame-mlp'

    def _parameter_layout(self):

        D, F, C = (self.spec.feature_dim, self.spec.num_filters,
                   self.spec.num_classes)

        return OrderedDict([
            ('hidden.W', ((D, F), D)),
            ('hidden.b', ((F,), None)),
            ('output.W', ((F, C), F)),
            ('output.b', ((C,), None)),
        ])

    def _hidden(self, params, X):

        hidden = linear(X, params['hidden.W'], params['hidden.b'])
        act = activation(hidden.output, 'relu')
        return hidden, act

    def _forward(self, params, X):

        hidden, act = self._hidden(params, X)
        out = linear(act.output, params['output.W'], params['output.b'])

        def backward(d_stages):

            d_act, dW2, db2 = out.backward(d_stages[-1])
            d_hidden, = act.backward(d_act)
            _, dW1, db1 = hidden.backward(d_hidden)

            return {'hidden.W': dW1, 'hidden.b': db1,
                    'output.W': dW2, 'output.b': db2}

        return [out.output], backward

    def embed(self, params, X):
        return self._hidden(params, X)[1].output

    def receptive_field(self):
        return 1


class ClipConv(BaseModel):
    """Clip-level model.

    A causal convolution of width n (the clip size) with F filters, relu and
    a per-frame linear output layer. The output at t depends on frames
    t - n + 1, ..., t only; missing history at the start of a video is zero
    padded.
    """

    kind = 'clip-conv'

    def _parameter_layout(self):

        D, F, C, n = (self.spec.feature_dim, self.spec.num_filters,
                      self.spec.num_classes, self.spec.window)

        return OrderedDict([
            ('conv.K', ((n, D, F), n * D)),
            ('conv.b', ((F,), None)),
            ('output.W', ((F, C), F)),
            ('output.b', ((C,), None)),
        ])

    def _hidden(self, params, X):

        conv = conv1d_causal(X, params['conv.K'], 1)
        biased = add_bias(conv.output, params['conv.b'])
        act = activation(biased.output, 'relu')
        return conv, biased, act

    def _forward(self, params, X):

        conv, biased, act = self._hidden(params, X)
        out = linear(act.output, params['output.W'], params['output.b'])

        def backward(d_stages):

            d_act, dW, db = out.backward(d_stages[-1])
            d_biased, = act.backward(d_act)
            d_conv, d_bias = biased.backward(d_biased)
            _, dK = conv.backward(d_conv)

            return {'conv.K': dK, 'conv.b': d_bias,
                    'output.W': dW, 'output.b': db}

        return [out.output], backward

    def embed(self, params, X):
        return self._hidden(params, X)[2].output

    def receptive_field(self):
        return self.spec.window


class GRU(BaseModel):
    """Stacked gated recurrent unit with a linear output layer.

    Per layer and step::

        z_t = sigmoid(x_t W_z + h_{t-1} U_z + b_z)
        r_t = sigmoid(x_t W_r + h_{t-1} U_r + b_r)
        g_t = tanh(x_t W_h + (r_t * h_{t-1}) U_h + b_h)
        h_t = (1 - z_t) * h_{t-1} + z_t * g_t

    with h_0 = 0. The hidden size is shared by all layers. Gradients are
    computed with backpropagation through time over the whole video.
    """

    kind = 'gru'

    _gates = ('z', 'r', 'h')

    def _parameter_layout(self):

        D, H, C = (self.spec.feature_dim, self.spec.hidden_size,
                   self.spec.num_classes)

        layout = OrderedDict()
        for layer in range(self.spec.num_layers):
            d_in = D if layer == 0 else H
            prefix = 'gru{}.'.format(layer)
            for g in self._gates:
                layout[prefix + 'W_' + g] = ((d_in, H), d_in)
            for g in self._gates:
                layout[prefix + 'U_' + g] = ((H, H), H)
            for g in self._gates:
                layout[prefix + 'b_' + g] = ((H,), None)

        layout['output.W'] = ((H, C), H)
        layout['output.b'] = ((C,), None)

        return layout

    @staticmethod
    def _sigmoid_grad(d_out, out):
        return d_out * out * (1.0 - out)

    def _update_gate_grad(self, d_z, z):
        return self._sigmoid_grad(d_z, z)

    def _reset_gate_grad(self, d_r, r):
        return self._sigmoid_grad(d_r, r)

    def _layer(self, params, layer, X):

        p = {k: params['gru{}.{}'.format(layer, k)] for k in
             ('W_z', 'W_r', 'W_h', 'U_z', 'U_r', 'U_h', 'b_z', 'b_r', 'b_h')}

        T = X.shape[0]
        H = p['U_z'].shape[0]

        # input projections of all frames at once
        a_z = X.dot(p['W_z']) + p['b_z']
        a_r = X.dot(p['W_r']) + p['b_r']
        a_h = X.dot(p['W_h']) + p['b_h']

        h = np.zeros((T + 1, H))
        z = np.zeros((T, H))
        r = np.zeros((T, H))
        g = np.zeros((T, H))

        for t in range(T):
            h_prev = h[t]
            z[t] = special.expit(a_z[t] + h_prev.dot(p['U_z']))
            r[t] = special.expit(a_r[t] + h_prev.dot(p['U_r']))
            g[t] = np.tanh(a_h[t] + (r[t] * h_prev).dot(p['U_h']))
            h[t + 1] = (1.0 - z[t]) * h_prev + z[t] * g[t]

        def backward(d_h_out):

            d_az = np.zeros((T, H))
            d_ar = np.zeros((T, H))
            d_ah = np.zeros((T, H))
            dU = {k: np.zeros((H, H)) for k in ('U_z', 'U_r', 'U_h')}
            d_next = np.zeros(H)

            for t in reversed(range(T)):

                h_prev = h[t]
                d_h = d_h_out[t] + d_next

                d_g = d_h * z[t]
                d_z = d_h * (g[t] - h_prev)
                d_prev = d_h * (1.0 - z[t])

                d_ah[t] = d_g * (1.0 - g[t] * g[t])
                dU['U_h'] += np.outer(r[t] * h_prev, d_ah[t])
                d_rh = d_ah[t].dot(p['U_h'].T)
                d_prev += d_rh * r[t]

                d_ar[t] = self._reset_gate_grad(d_rh * h_prev, r[t])
                dU['U_r'] += np.outer(h_prev, d_ar[t])
                d_prev += d_ar[t].dot(p['U_r'].T)

                d_az[t] = self._update_gate_grad(d_z, z[t])
                dU['U_z'] += np.outer(h_prev, d_az[t])
                d_prev += d_az[t].dot(p['U_z'].T)

                d_next = d_prev

            prefix = 'gru{}.'.format(layer)
            grads = {
                prefix + 'W_z': X.T.dot(d_az),
                prefix + 'W_r': X.T.dot(d_ar),
                prefix + 'W_h': X.T.dot(d_ah),
                prefix + 'b_z': d_az.sum(axis=0),
                prefix + 'b_r': d_ar.sum(axis=0),
                prefix + 'b_h': d_ah.sum(axis=0),
            }
            for k, v in dU.items():
                grads[prefix + k] = v

            d_x = (d_az.dot(p['W_z'].T) + d_ar.dot(p['W_r'].T) +
                   d_ah.dot(p['W_h'].T))

            return d_x, grads

        return h[1:], backward

    def _forward(self, params, X):

        backwards = []
        hidden = X
        for layer in range(self.spec.num_layers):
            hidden, backward = self._layer(params, layer, hidden)
            backwards.append(backward)

        out = linear(hidden, params['output.W'], params['output.b'])

        def backward(d_stages):

            d_hidden, dW, db = out.backward(d_stages[-1])
            grads = {'output.W': dW, 'output.b': db}

            for layer_backward in reversed(backwards):
                d_hidden, layer_grads = layer_backward(d_hidden)
                grads.update(layer_grads)

            return grads

        return [out.output], backward

    def receptive_field(self):
        return None


class MSTCN(BaseModel):
    """Causal multi-stage temporal convolutional network.

    Every stage is a 1x1 convolution to F feature maps, L dilated residual
    layers (causal convolution of size k with dilation 2^l, relu, 1x1
    convolution, residual addition) and a 1x1 convolution to C classes. The
    first stage reads the features, every later stage the probabilities
    (softmax or sigmoid) of the previous stage's scores.
    """

    kind = 'mstcn'

    def _parameter_layout(self):

        D, F, C, k = (self.spec.feature_dim, self.spec.num_filters,
                      self.spec.num_classes, self.spec.kernel_size)

        layout = OrderedDict()
        for s in range(self.spec.num_stages):
            d_in = D if s == 0 else C
            stage = 'stage{}.'.format(s)
            layout[stage + 'input.W'] = ((d_in, F), d_in)
            layout[stage + 'input.b'] = ((F,), None)
            for l in range(self.spec.layers_per_stage):
                layer = stage + 'layer{}.'.format(l)
                layout[layer + 'conv.K'] = ((k, F, F), k * F)
                layout[layer + 'conv.b'] = ((F,), None)
                layout[layer + 'pointwise.W'] = ((F, F), F)
                layout[layer + 'pointwise.b'] = ((F,), None)
            layout[stage + 'output.W'] = ((F, C), F)
            layout[stage + 'output.b'] = ((C,), None)

        return layout

    def _stage(self, params, s, X):

        stage = 'stage{}.'.format(s)

        inp = linear(X, params[stage + 'input.W'], params[stage + 'input.b'])
        features = inp.output

        layers = []
        for l in range(self.spec.layers_per_stage):
            layer = stage + 'layer{}.'.format(l)
            conv = conv1d_causal(features, params[layer + 'conv.K'], 2 ** l)
            biased = add_bias(conv.output, params[layer + 'conv.b'])
            act = activation(biased.output, 'relu')
            pointwise = linear(act.output, params[layer + 'pointwise.W'],
                               params[layer + 'pointwise.b'])
            features = features + pointwise.output
            layers.append((layer, conv, biased, act, pointwise))

        out = linear(features, params[stage + 'output.W'],
                     params[stage + 'output.b'])

        def backward(d_scores, grads):

            d_features, dW, db = out.backward(d_scores)
            grads[stage + 'output.W'] = dW
            grads[stage + 'output.b'] = db

            for layer, conv, biased, act, pointwise in reversed(layers):

                d_act, dW, db = pointwise.backward(d_features)
                d_biased, = act.backward(d_act)
                d_conv, d_bias = biased.backward(d_biased)
                d_in, dK = conv.backward(d_conv)

                grads[layer + 'pointwise.W'] = dW
                grads[layer + 'pointwise.b'] = db
                grads[layer + 'conv.b'] = d_bias
                grads[layer + 'conv.K'] = dK

                # residual connection
                d_features = d_features + d_in

            d_x, dW, db = inp.backward(d_features)
            grads[stage + 'input.W'] = dW
            grads[stage + 'input.b'] = db

            return d_x

        return out.output, backward

    def _forward(self, params, X):

        prob_kind = _probability_kind(self.spec.label_mode)

        stage_scores = []
        stage_backwards = []
        prob_nodes = [None]

        stage_input = X
        for s in range(self.spec.num_stages):
            if s > 0:
                prob = activation(stage_scores[-1], prob_kind)
                prob_nodes.append(prob)
                stage_input = prob.output
            scores, backward = self._stage(params, s, stage_input)
            stage_scores.append(scores)
            stage_backwards.append(backward)

        def backward(d_stages):

            grads = {}
            carry = None

            for s in reversed(range(self.spec.num_stages)):
                d_scores = d_stages[s] if carry is None else \
                    d_stages[s] + carry
                d_x = stage_backwards[s](d_scores, grads)
                if s > 0:
                    carry, = prob_nodes[s].backward(d_x)

            return grads

        return stage_scores, backward

    def receptive_field(self):

        per_stage = (self.spec.kernel_size - 1) * \
            (2 ** self.spec.layers_per_stage - 1)
        return 1 + self.spec.num_stages * per_stage


MODEL_CLASSES = OrderedDict([
    ('frame-mlp', FrameMLP),
    ('clip-conv', ClipConv),
    ('gru', GRU),
    ('mstcn', MSTCN),
])


def get_model(spec):
    """Return the model object for a ModelSpec."""

    try:
        cls = MODEL_CLASSES[spec.kind]
    except KeyError:
        raise ConfigError("model kind {!r} unknown, valid kinds: {}".format(
            spec.kind, ", ".join(MODEL_KINDS)))
    return cls(spec)


def receptive_field(spec):
    """Past frames (including the current one) reaching an output frame.

    Returns None for models with unbounded memory (gru).
    """

    return get_model(spec).receptive_field()


def init_params(spec, seed=0):
    """Initialise the parameters of a model (see BaseModel.init_params)."""

    return get_model(spec).init_params(seed)


def _spec_of(params, spec):

    spec = spec if spec is not None else params.spec
    if spec is None:
        raise ValueError("the parameters carry no ModelSpec, pass spec=")
    return spec


def _kind_forward(kind, params, V, spec):

    spec = _spec_of(params, spec)
    if spec.kind != kind:
        raise ConfigError("parameters belong to a {!r} model, not {!r}".format(
            spec.kind, kind))
    return get_model(spec).forward(params, V)


def frame_mlp_forward(params, V, spec=None):
    """Frame-level predictions of a video."""
    return _kind_forward('frame-mlp', params, V, spec)


def clip_conv_forward(params, V, spec=None):
    """Clip-level predictions of a video."""
    return _kind_forward('clip-conv', params, V, spec)


def gru_forward(params, V, spec=None):
    """GRU predictions of a video."""
    return _kind_forward('gru', params, V, spec)


def mstcn_forward(params, V, spec=None):
    """Multi-stage TCN predictions of a video; see Prediction.stage_scores."""
    return _kind_forward('mstcn', params, V, spec)


def extract_features(params, V, spec=None):
    """Embed a video with a trained frame-level or clip-level model.

    The embedding is the relu hidden layer (F values per frame) that feeds
    the output layer. Temporal models are trained on these embeddings in a
    second step.

    Parameters
    ----------
    params : ParamStore
        Parameters of a 'frame-mlp' or 'clip-conv' model.
    V : FeatureSequence, numpy.ndarray
        The input features.

    Returns
    -------
    FeatureSequence
        The (T, F) embedding, same video id.
    """

    spec = _spec_of(params, spec)
    model = get_model(spec)

    if not hasattr(model, 'embed'):
        raise ValueError(
            "feature extraction needs a frame-mlp or clip-conv model, "
            "got {!r}".format(spec.kind))

    X = model._check(params, V)
    video_id = getattr(V, 'video_id', 'video')

    return FeatureSequence(video_id, model.embed(params, X))


__all__ = ['ModelSpec', 'FrameMLP', 'ClipConv', 'GRU', 'MSTCN', 'get_model',
           'init_params', 'receptive_field', 'frame_mlp_forward',
           'clip_conv_forward', 'gru_forward', 'mstcn_forward',
           'extract_features']
