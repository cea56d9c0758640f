"""Base module for workflow recognition."""

from collections import OrderedDict

import numpy as np
from scipy import special

from workflowrecognition.utils import ConfigError
from workflowrecognition.utils import ShapeError
from workflowrecognition.utils import check_finite
from workflowrecognition.utils import counter_rng
from workflowrecognition.types import as_matrix
from workflowrecognition.types import is_integer
from workflowrecognition.algorithms.losses import multistage_loss

from workflowrecognition import wr_logging as logging

MODEL_KINDS = ('frame-mlp', 'clip-conv', 'gru', 'mstcn')
LABEL_MODES = ('multiclass', 'multilabel')

# kinds whose output at t depends on earlier frames
TEMPORAL_KINDS = ('clip-conv', 'gru', 'mstcn')
BACKBONE_KINDS = ('frame-mlp', 'clip-conv')


###########################
#     Sequence types      #
###########################

class FeatureSequence(object):
    """Feature vectors of one video, one row per frame (1 fps).

    Parameters
    ----------
    video_id : str
        The identifier of the video.
    features : numpy.ndarray
        Matrix of shape (T, D), T >= 1. Stored as float64.
    """

    def __init__(self, video_id, features):

        features = as_matrix(features, "features")

        if features.shape[0] < 1:
            raise ShapeError("a feature sequence needs at least one frame",
                             features.shape)
        check_finite(features, "features of video {}".format(video_id))

        self.video_id = str(video_id)
        self.features = features

    @property
    def T(self):
        return self.features.shape[0]

    @property
    def D(self):
        return self.features.shape[1]

    def __len__(self):
        return self.T

    def __repr__(self):
        return "FeatureSequence({!r}, T={}, D={})".format(
            self.video_id, self.T, self.D)


class LabelTrack(object):
    """Ground truth of one video.

    Parameters
    ----------
    values : numpy.ndarray
        Class id per frame (multiclass, shape (T,)) or binary mask per frame
        (multilabel, shape (T, C)).
    num_classes : int
        The number of classes C.
    mode : str
        'multiclass' or 'multilabel'.
    """

    def __init__(self, values, num_classes, mode='multiclass'):

        if mode not in LABEL_MODES:
            raise ValueError("label mode {!r} unknown. Choose {}".format(
                mode, ", ".join(LABEL_MODES)))

        values = np.asarray(values)

        if mode == 'multiclass':
            if values.ndim != 1:
                raise ShapeError("class labels must be one dimensional",
                                 values.shape)
            if np.issubdtype(values.dtype, np.floating):
                frac = np.flatnonzero(values != np.round(values))
                if len(frac):
                    raise ValueError(
                        "label {} at frame {} is not an integer".format(
                            values[frac[0]], frac[0]))
            values = values.astype(np.int64)
            bad = np.flatnonzero((values < 0) | (values >= num_classes))
            if len(bad):
                raise ValueError("label {} at frame {} outside [0, {})".format(
                    values[bad[0]], bad[0], num_classes))
        else:
            if values.ndim != 2 or values.shape[1] != num_classes:
                raise ShapeError(
                    "label masks must have {} columns".format(num_classes),
                    values.shape)
            if np.any((values != 0) & (values != 1)):
                raise ValueError("label masks must be binary")
            values = values.astype(np.uint8)

        self.values = values
        self.num_classes = int(num_classes)
        self.mode = mode

    @property
    def T(self):
        return self.values.shape[0]

    @property
    def C(self):
        return self.num_classes

    def __len__(self):
        return self.T

    def __eq__(self, other):
        return (isinstance(other, LabelTrack) and
                self.mode == other.mode and self.C == other.C and
                np.array_equal(self.values, other.values))

    def __repr__(self):
        return "LabelTrack(mode={!r}, T={}, C={})".format(
            self.mode, self.T, self.C)


###########################
#      Model settings     #
###########################

class ModelSpec(object):
    """Architecture hyperparameters of a model.

    Parameters
    ----------
    kind : str
        One of 'frame-mlp', 'clip-conv', 'gru' or 'mstcn'.
    feature_dim : int
        The dimension D of the input features.
    num_classes : int
        The number of output classes C. Default 7.
    label_mode : str
        'multiclass' (softmax outputs) or 'multilabel' (sigmoid outputs).
    num_filters : int
        Hidden width F of the frame-mlp, filters of the clip-conv and the
        mstcn feature maps. Default 64.
    window : int
        Clip size n of the clip-conv. Default 16.
    hidden_size : int, optional
        GRU hidden size H. Defaults to the feature dimension.
    num_layers : int
        Number of stacked GRU layers. Default 2.
    num_stages : int
        Number of mstcn stages S. Default 2.
    layers_per_stage : int
        Number of dilated residual layers L per mstcn stage. Default 15.
    kernel_size : int
        Kernel size k of the dilated convolutions. Default 3.
    """

    _fields = ('kind', 'feature_dim', 'num_classes', 'label_mode',
               'num_filters', 'window', 'hidden_size', 'num_layers',
               'num_stages', 'layers_per_stage', 'kernel_size')

    def __init__(self, kind, feature_dim, num_classes=7,
                 label_mode='multiclass', num_filters=64, window=16,
                 hidden_size=None, num_layers=2, num_stages=2,
                 layers_per_stage=15, kernel_size=3):

        self.kind = kind
        self.feature_dim = feature_dim
        self.num_classes = num_classes
        self.label_mode = label_mode
        self.num_filters = num_filters
        self.window = window
        self.hidden_size = hidden_size if hidden_size is not None \
            else feature_dim
        self.num_layers = num_layers
        self.num_stages = num_stages
        self.layers_per_stage = layers_per_stage
        self.kernel_size = kernel_size

        self.validate()

    def validate(self):

        problems = []

        if self.kind not in MODEL_KINDS:
            problems.append("model kind {!r} unknown, valid kinds: {}".format(
                self.kind, ", ".join(MODEL_KINDS)))
        if self.label_mode not in LABEL_MODES:
            problems.append("label_mode {!r} unknown, choose {}".format(
                self.label_mode, " or ".join(LABEL_MODES)))

        minimum = {'feature_dim': 1, 'num_classes': 2, 'num_filters': 1,
                   'window': 1, 'hidden_size': 1, 'num_layers': 1,
                   'num_stages': 1, 'layers_per_stage': 1, 'kernel_size': 1}

        for field, lower in minimum.items():
            value = getattr(self, field)
            if not is_integer(value) or value < lower:
                problems.append("{} must be an integer >= {}, got {!r}".format(
                    field, lower, value))

        if problems:
            raise ConfigError(problems)

    def to_dict(self):
        return OrderedDict((f, getattr(self, f)) for f in self._fields)

    @classmethod
    def from_dict(cls, d):

        unknown = sorted(set(d) - set(cls._fields))
        if unknown:
            raise ConfigError(
                ["unknown model setting {!r}".format(k) for k in unknown])
        if 'kind' not in d or 'feature_dim' not in d:
            raise ConfigError("model settings need 'kind' and 'feature_dim'")

        return cls(**d)

    def replace(self, **changes):
        """Return a copy with some settings changed."""

        d = self.to_dict()
        if 'feature_dim' in changes and 'hidden_size' not in changes:
            # keep the hidden size tied to the features
            d['hidden_size'] = None
        d.update(changes)
        return ModelSpec.from_dict(d)

    def __eq__(self, other):
        return isinstance(other, ModelSpec) and \
            self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        return "ModelSpec({})".format(", ".join(
            "{}={!r}".format(k, v) for k, v in self.to_dict().items()))


###########################
#       Parameters        #
###########################

class ParamStore(object):
    """Named trainable arrays with paired gradient buffers.

    Every parameter has exactly one gradient buffer of the same shape. The
    store iterates in insertion order, which fixes the order of random
    initialisation and of serialisation.

    Parameters
    ----------
    spec : ModelSpec, optional
        The architecture the parameters belong to.
    seed : int, optional
        The initialisation seed.
    """

    def __init__(self, spec=None, seed=None):

        self.spec = spec
        self.seed = seed
        self._params = OrderedDict()
        self._grads = OrderedDict()

    def add(self, name, value):

        if name in self._params:
            raise KeyError("parameter {!r} already exists".format(name))

        value = np.array(value, dtype=np.float64, copy=True)
        self._params[name] = value
        self._grads[name] = np.zeros_like(value)

    def __getitem__(self, name):
        return self._params[name]

    def __setitem__(self, name, value):

        value = np.asarray(value, dtype=np.float64)
        if value.shape != self._params[name].shape:
            raise ShapeError("new value of {!r} changes its shape".format(
                name), self._params[name].shape, value.shape)
        self._params[name][...] = value

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def keys(self):
        return self._params.keys()

    def items(self):
        return self._params.items()

    def values(self):
        return self._params.values()

    def shapes(self):
        return OrderedDict((k, v.shape) for k, v in self._params.items())

    @property
    def size(self):
        """The total number of scalar parameters."""
        return int(sum(v.size for v in self._params.values()))

    def grad(self, name):
        return self._grads[name]

    def grads(self):
        return OrderedDict(self._grads)

    def accumulate(self, grads):
        """Add a mapping of gradients to the gradient buffers."""

        for name, g in grads.items():
            if g.shape != self._grads[name].shape:
                raise ShapeError(
                    "gradient of {!r} has the wrong shape".format(name),
                    self._grads[name].shape, g.shape)
            self._grads[name] += g

    def zero_grads(self):

        for g in self._grads.values():
            g[...] = 0.0

    def copy(self):

        other = ParamStore(spec=self.spec, seed=self.seed)
        for name, value in self._params.items():
            other.add(name, value)
            other._grads[name][...] = self._grads[name]
        return other

    def equals(self, other):
        """Bit-wise equality of names, shapes and values."""

        if list(self.keys()) != list(other.keys()):
            return False
        return all(np.array_equal(self[k], other[k]) for k in self.keys())

    def __repr__(self):
        return "ParamStore({} arrays, {} values, seed={})".format(
            len(self), self.size, self.seed)


###########################
#       Predictions       #
###########################

def scores_to_probabilities(scores, label_mode):
    """Softmax rows (multiclass) or elementwise sigmoid (multilabel)."""

    if label_mode == 'multiclass':
        return special.softmax(scores, axis=1)
    return special.expit(scores)


class Prediction(object):
    """Per-frame output of a model.

    Attributes
    ----------
    scores : numpy.ndarray
        Pre-activation scores (T, C) of the final stage.
    probabilities : numpy.ndarray
        Softmax rows (multiclass) or sigmoid (multilabel) of the scores.
    argmax_track : numpy.ndarray or None
        Class id per frame (multiclass only).
    stage_scores : list of numpy.ndarray
        The scores of every stage; a single entry for one-stage models.
    """

    def __init__(self, scores, label_mode, stage_scores=None, video_id=None):

        self.scores = scores
        self.label_mode = label_mode
        self.stage_scores = stage_scores if stage_scores is not None \
            else [scores]
        self.video_id = video_id
        self.probabilities = scores_to_probabilities(scores, label_mode)

        if label_mode == 'multiclass':
            self.argmax_track = np.argmax(self.probabilities, axis=1)
        else:
            self.argmax_track = None

    @property
    def T(self):
        return self.scores.shape[0]

    @property
    def C(self):
        return self.scores.shape[1]

    def decisions(self, threshold=0.5):
        """Binary mask (multilabel) or class ids (multiclass)."""

        if self.label_mode == 'multiclass':
            return self.argmax_track
        return (self.probabilities >= threshold).astype(np.uint8)

    def equals(self, other):
        return (self.label_mode == other.label_mode and
                len(self.stage_scores) == len(other.stage_scores) and
                all(np.array_equal(a, b) for a, b in
                    zip(self.stage_scores, other.stage_scores)))


###########################
#         Models          #
###########################

class BaseModel(object):
    """Base class for all models.

    A model is stateless apart from its ModelSpec: parameters live in a
    ParamStore that is passed to every call, so one model object can serve
    concurrent inference with several read-only stores.

    Example
    -------
    Make your own model class
    ```
    class CustomModel(BaseModel):

        kind = 'custom'

        def _parameter_layout(self):

            # name -> (shape, fan_in)
            return ...

        def _forward(self, params, X):

            # list of stage scores, closure mapping the list of stage
            # score gradients onto a dict of parameter gradients
            return ...
    ```
    """

    kind = None

    def __init__(self, spec):

        if spec.kind != self.kind:
            raise ConfigError("{} expects model kind {!r}, got {!r}".format(
                self.__class__.__name__, self.kind, spec.kind))

        self.spec = spec

    def _parameter_layout(self):

        raise NotImplementedError(
            "Not possible to call _parameter_layout for the BaseModel")

    def _forward(self, params, X):

        raise NotImplementedError(
            "Not possible to call _forward for the BaseModel")

    def parameter_shapes(self):
        return OrderedDict(
            (name, shape)
            for name, (shape, _) in self._parameter_layout().items())

    def init_params(self, seed=0):
        """Initialise the parameters.

        Weights are drawn uniformly from ``[-sqrt(1/fan_in), sqrt(1/fan_in)]``
        with a counter-based generator keyed on the seed; biases are zero.
        Identical (spec, seed) give bit-identical stores.

        Parameters
        ----------
        seed : int
            The initialisation seed.

        Returns
        -------
        ParamStore
            The initialised parameters.
        """

        rng = counter_rng(seed)
        params = ParamStore(spec=self.spec, seed=seed)

        for name, (shape, fan_in) in self._parameter_layout().items():

            if fan_in is None:
                params.add(name, np.zeros(shape))
            else:
                bound = np.sqrt(1.0 / fan_in)
                params.add(name, rng.uniform(-bound, bound, size=shape))

        logging.debug("Model - initialised {} {} (seed={})".format(
            self.kind, params, seed))

        return params

    def _check(self, params, X):

        X = as_matrix(X, "features")

        if X.shape[1] != self.spec.feature_dim:
            raise ShapeError(
                "dimension mismatch: {} expects {} features per frame".format(
                    self.kind, self.spec.feature_dim),
                X.shape)
        if X.shape[0] < 1:
            raise ShapeError("a video needs at least one frame", X.shape)

        for name, shape in self.parameter_shapes().items():
            if name not in params:
                raise ShapeError("parameter {!r} missing".format(name))
            if params[name].shape != shape:
                raise ShapeError("parameter {!r} has the wrong shape".format(
                    name), params[name].shape, shape)

        return X

    def forward(self, params, V):
        """Per-frame class scores of one video.

        Parameters
        ----------
        params : ParamStore
            The model parameters.
        V : FeatureSequence, numpy.ndarray
            The (T, D) features.

        Returns
        -------
        Prediction
            Final scores, probabilities and per-stage scores.
        """

        X = self._check(params, V)
        stage_scores, _ = self._forward(params, X)

        return Prediction(stage_scores[-1], self.spec.label_mode,
                          stage_scores=stage_scores,
                          video_id=getattr(V, 'video_id', None))

    def loss_and_grad(self, params, V, labels):
        """Loss of one video; adds the parameter gradients to params.

        Every stage is supervised with the frame loss of the label mode and
        the stage losses are summed.

        Returns
        -------
        (float, Prediction)
        """

        X = self._check(params, V)
        stage_scores, backward = self._forward(params, X)
        loss, d_stages = multistage_loss(stage_scores, labels,
                                         self.spec.label_mode)
        params.accumulate(backward(d_stages))

        prediction = Prediction(stage_scores[-1], self.spec.label_mode,
                                stage_scores=stage_scores)
        return loss, prediction

    def receptive_field(self):
        """Number of frames (up to and including t) that reach output t.

        None means unbounded.
        """

        raise NotImplementedError(
            "Not possible to call receptive_field for the BaseModel")
