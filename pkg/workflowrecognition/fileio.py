"""Binary feature files, model checkpoints and dataset manifests.

SWRF feature files (little-endian)::

    magic "SWRF" | u32 version | u32 T | u32 D | u8 mode | u32 C
    T*D float32 features, row-major
    T u16 class ids (mode 0, multiclass) or T*C u8 masks (mode 1)

SWRC checkpoints (little-endian)::

    magic "SWRC" | u32 version | u32 n | n bytes YAML model settings
    u32 number of tensors, then per tensor:
    u32 n | n bytes name | u32 ndim | ndim u32 dims | float64 payload

Manifests are YAML files listing the videos of a dataset.
"""

import os
import struct
from collections import OrderedDict

import numpy
import pandas
import yaml

from workflowrecognition.base import LABEL_MODES
from workflowrecognition.base import FeatureSequence
from workflowrecognition.base import LabelTrack
from workflowrecognition.base import ModelSpec
from workflowrecognition.base import ParamStore
from workflowrecognition.models import get_model
from workflowrecognition.utils import ConfigError
from workflowrecognition.utils import FormatError
from workflowrecognition.utils import ManifestError
from workflowrecognition.utils import ShapeError
from workflowrecognition.utils import to_builtin
from workflowrecognition.types import is_integer

from workflowrecognition import wr_logging as logging

FEATURE_MAGIC = b"SWRF"
CHECKPOINT_MAGIC = b"SWRC"
FORMAT_VERSION = 1

_HEADER = struct.Struct('<4sIIIBI')
_U32 = struct.Struct('<I')

# byte offsets of the SWRF header fields
_OFFSET_VERSION = 4
_OFFSET_T = 8
_OFFSET_D = 12
_OFFSET_MODE = 16
_OFFSET_C = 17

_MODE_CODES = {'multiclass': 0, 'multilabel': 1}
_MODE_NAMES = {0: 'multiclass', 1: 'multilabel'}

SPLITS = ('train', 'test', 'unassigned')
MANIFEST_FIELDS = ('name', 'num_classes', 'label_mode', 'feature_dim',
                   'entries')
ENTRY_FIELDS = ('video_id', 'group_id', 'feature_path', 'split')


###########################
#     SWRF features       #
###########################

def encode_header(T, D, mode, C):
    """The 21 byte SWRF header."""

    return _HEADER.pack(FEATURE_MAGIC, FORMAT_VERSION, T, D,
                        _MODE_CODES[mode], C)


def write_features(seq, labels, path):
    """Write the features and labels of one video to a SWRF file.

    Features are stored as float32.

    Parameters
    ----------
    seq : FeatureSequence
        The (T, D) features.
    labels : LabelTrack
        The ground truth of the T frames.
    path : str
        The target file.
    """

    if labels.T != seq.T:
        raise ShapeError("video {} has {} frames but {} labels".format(
            seq.video_id, seq.T, labels.T))
    if labels.mode == 'multiclass' and labels.C > 0xFFFF:
        raise ValueError("multiclass SWRF files hold at most 65535 classes")

    if labels.mode == 'multiclass':
        label_bytes = labels.values.astype('<u2').tobytes()
    else:
        label_bytes = labels.values.astype('u1').tobytes()

    with open(path, 'wb') as f:
        f.write(encode_header(seq.T, seq.D, labels.mode, labels.C))
        f.write(numpy.ascontiguousarray(seq.features, dtype='<f4').tobytes())
        f.write(label_bytes)


def _parse_header(data, path=None):

    if len(data) < _HEADER.size:
        raise FormatError("truncated header", offset=len(data), path=path)

    magic, version, T, D, mode, C = _HEADER.unpack_from(data)

    if magic != FEATURE_MAGIC:
        raise FormatError("bad magic {!r}, not a SWRF file".format(magic),
                          offset=0, path=path)
    if version != FORMAT_VERSION:
        raise FormatError("unsupported version {}".format(version),
                          offset=_OFFSET_VERSION, path=path)
    if T < 1:
        raise FormatError("frame count must be at least 1",
                          offset=_OFFSET_T, path=path)
    if D < 1:
        raise FormatError("feature dimension must be at least 1",
                          offset=_OFFSET_D, path=path)
    if mode not in _MODE_NAMES:
        raise FormatError("unknown label mode {}".format(mode),
                          offset=_OFFSET_MODE, path=path)
    if C < 2 or (mode == 0 and C > 0xFFFF):
        raise FormatError("invalid class count {}".format(C),
                          offset=_OFFSET_C, path=path)

    return OrderedDict([('T', T), ('D', D), ('label_mode', _MODE_NAMES[mode]),
                        ('C', C)])


def _check_expected(header, expected, path):

    if not expected:
        return

    checks = (('feature_dim', 'D', _OFFSET_D),
              ('num_classes', 'C', _OFFSET_C),
              ('label_mode', 'label_mode', _OFFSET_MODE))

    for key, field, offset in checks:
        if key in expected and expected[key] is not None and \
                header[field] != expected[key]:
            raise FormatError("header declares {}={!r}, expected {!r}".format(
                field, header[field], expected[key]), offset=offset, path=path)


def read_header(path, expected=None):
    """Read and validate the header of a SWRF file.

    Returns
    -------
    collections.OrderedDict
        The fields T, D, label_mode and C.
    """

    with open(path, 'rb') as f:
        data = f.read(_HEADER.size)

    header = _parse_header(data, path)
    _check_expected(header, expected, path)
    return header


def read_features(path, expected=None, video_id=None):
    """Read a SWRF file.

    Parameters
    ----------
    path : str
        The file to read.
    expected : dict, optional
        Values of feature_dim, num_classes and label_mode the header must
        match, usually :meth:`Manifest.expected`.
    video_id : str, optional
        The id of the returned sequence. Defaults to the file name without
        extension.

    Returns
    -------
    (FeatureSequence, LabelTrack)

    Raises
    ------
    FormatError
        For a bad magic or version, a truncated or oversized file, a header
        that contradicts ``expected`` and invalid label values. The message
        holds the byte offset.
    """

    with open(path, 'rb') as f:
        data = f.read()

    header = _parse_header(data, path)
    _check_expected(header, expected, path)

    T, D, C = header['T'], header['D'], header['C']
    multiclass = header['label_mode'] == 'multiclass'

    feature_end = _HEADER.size + 4 * T * D
    label_size = 2 * T if multiclass else T * C
    total = feature_end + label_size

    if len(data) < total:
        raise FormatError("truncated file, expected {} bytes".format(total),
                          offset=len(data), path=path)
    if len(data) > total:
        raise FormatError("{} trailing bytes".format(len(data) - total),
                          offset=total, path=path)

    features = numpy.frombuffer(data, dtype='<f4', count=T * D,
                                offset=_HEADER.size).reshape(T, D)
    features = features.astype(numpy.float64)

    bad = numpy.argwhere(~numpy.isfinite(features))
    if len(bad):
        t, d = bad[0]
        raise FormatError("non-finite feature at frame {}".format(t),
                          offset=_HEADER.size + 4 * (t * D + d), path=path)

    if multiclass:
        values = numpy.frombuffer(data, dtype='<u2', count=T,
                                  offset=feature_end)
        bad = numpy.flatnonzero(values >= C)
        if len(bad):
            raise FormatError(
                "label {} at frame {} outside [0, {})".format(
                    values[bad[0]], bad[0], C),
                offset=feature_end + 2 * bad[0], path=path)
    else:
        values = numpy.frombuffer(data, dtype='u1', count=T * C,
                                  offset=feature_end).reshape(T, C)
        bad = numpy.flatnonzero(values.ravel() > 1)
        if len(bad):
            raise FormatError("non-binary label mask value",
                              offset=feature_end + bad[0], path=path)

    if video_id is None:
        video_id = os.path.splitext(os.path.basename(path))[0]

    return (FeatureSequence(video_id, features),
            LabelTrack(values.copy(), C, header['label_mode']))


###########################
#       Checkpoints       #
###########################

class _Reader(object):

    def __init__(self, data, path):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise FormatError("truncated {}".format(what),
                              offset=len(self.data), path=self.path)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what):
        return _U32.unpack(self.take(4, what))[0]


def write_checkpoint(params, spec, path):
    """Write the parameters of a model to a SWRC checkpoint.

    The model settings and the initialisation seed are stored along with
    the float64 tensors in the parameter order of the store.
    """

    settings = to_builtin({'model': spec.to_dict(), 'seed': params.seed})
    blob = yaml.safe_dump(settings, sort_keys=False).encode('utf-8')

    with open(path, 'wb') as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(_U32.pack(FORMAT_VERSION))
        f.write(_U32.pack(len(blob)))
        f.write(blob)
        f.write(_U32.pack(len(params)))

        for name, value in params.items():
            encoded = name.encode('utf-8')
            f.write(_U32.pack(len(encoded)))
            f.write(encoded)
            f.write(_U32.pack(value.ndim))
            for dim in value.shape:
                f.write(_U32.pack(dim))
            f.write(numpy.ascontiguousarray(value, dtype='<f8').tobytes())


def read_checkpoint(path, spec=None):
    """Read a SWRC checkpoint.

    Parameters
    ----------
    path : str
        The checkpoint file.
    spec : ModelSpec, optional
        When given, the checkpoint must hold a model of this kind and
        every tensor must have the shape this architecture expects.

    Returns
    -------
    (ParamStore, ModelSpec)
        The parameters and the stored model settings.
    """

    with open(path, 'rb') as f:
        data = f.read()

    reader = _Reader(data, path)

    if reader.take(4, "magic") != CHECKPOINT_MAGIC:
        raise FormatError("bad magic, not a SWRC checkpoint", offset=0,
                          path=path)
    version = reader.u32("version")
    if version != FORMAT_VERSION:
        raise FormatError("unsupported version {}".format(version),
                          offset=4, path=path)

    blob_offset = reader.pos + 4
    blob = reader.take(reader.u32("settings length"), "model settings")
    try:
        settings = yaml.safe_load(blob.decode('utf-8'))
        stored_spec = ModelSpec.from_dict(settings['model'])
    except (yaml.YAMLError, UnicodeDecodeError, KeyError, TypeError,
            ConfigError) as err:
        raise FormatError("unreadable model settings ({})".format(err),
                          offset=blob_offset, path=path)

    if spec is not None and spec.kind != stored_spec.kind:
        raise ConfigError("checkpoint {} holds a {} model, expected {}".format(
            path, stored_spec.kind, spec.kind))

    params = ParamStore(spec=stored_spec, seed=settings.get('seed'))

    for _ in range(reader.u32("tensor count")):

        name = reader.take(reader.u32("tensor name"), "tensor name")
        name = name.decode('utf-8')
        shape = tuple(reader.u32("tensor shape")
                      for _ in range(reader.u32("tensor rank")))
        size = int(numpy.prod(shape, dtype=numpy.int64))
        payload = reader.take(8 * size, "tensor {}".format(name))
        params.add(name, numpy.frombuffer(payload, dtype='<f8')
                   .reshape(shape))

    if reader.pos != len(data):
        raise FormatError("{} trailing bytes".format(len(data) - reader.pos),
                          offset=reader.pos, path=path)

    reference = get_model(spec if spec is not None else stored_spec)
    _check_tensors(params, reference.parameter_shapes())

    if spec is not None:
        params.spec = spec

    return params, stored_spec


def _check_tensors(params, shapes):

    for name, shape in shapes.items():
        if name not in params:
            raise ShapeError("checkpoint misses tensor {!r}".format(name))
        if params[name].shape != tuple(shape):
            raise ShapeError("tensor {!r} does not fit the model".format(name),
                             params[name].shape, shape)

    extra = [name for name in params if name not in shapes]
    if extra:
        raise ShapeError("checkpoint holds unknown tensor {!r}".format(
            extra[0]))


###########################
#        Manifests        #
###########################

class Manifest(object):
    """The videos of a dataset and their splits.

    Parameters
    ----------
    name : str
        The dataset name.
    num_classes : int
        The number of classes C shared by all videos.
    label_mode : str
        'multiclass' or 'multilabel'.
    feature_dim : int
        The feature dimension D shared by all videos.
    entries : list of dict, pandas.DataFrame
        One entry per video with the fields video_id, group_id, feature_path
        and split, and optionally num_frames.
    root : str, optional
        Directory that relative feature paths are resolved against.
    """

    def __init__(self, name, num_classes, label_mode, feature_dim, entries,
                 root=None):

        self.name = name
        self.num_classes = num_classes
        self.label_mode = label_mode
        self.feature_dim = feature_dim
        self.root = root

        entries = pandas.DataFrame(entries)
        for field in ENTRY_FIELDS:
            if field not in entries.columns:
                entries[field] = pandas.Series(dtype=object)
        self.entries = entries.reset_index(drop=True)

    def problems(self):
        """List the structural problems of the manifest."""

        problems = []

        if not self.name:
            problems.append("missing field 'name'")
        if not is_integer(self.num_classes) or self.num_classes < 2:
            problems.append("num_classes must be an integer >= 2, got "
                            "{!r}".format(self.num_classes))
        if self.label_mode not in LABEL_MODES:
            problems.append("label_mode {!r} unknown".format(self.label_mode))
        if not is_integer(self.feature_dim) or self.feature_dim < 1:
            problems.append("feature_dim must be an integer >= 1, got "
                            "{!r}".format(self.feature_dim))

        for i, entry in self.entries.iterrows():
            for field in ENTRY_FIELDS:
                if pandas.isnull(entry[field]) or entry[field] == "":
                    problems.append("entry {} misses field {!r}".format(
                        i, field))
            if not pandas.isnull(entry['split']) and \
                    entry['split'] not in SPLITS:
                problems.append("entry {} has unknown split {!r}".format(
                    i, entry['split']))

        ids = self.entries['video_id'].dropna()
        for vid in ids[ids.duplicated()].unique():
            problems.append("duplicate video_id {!r}".format(vid))

        return problems

    def validate(self):

        problems = self.problems()
        if problems:
            raise ManifestError(problems)
        return self

    def expected(self):
        """Header values every feature file must match."""

        return {'feature_dim': self.feature_dim,
                'num_classes': self.num_classes,
                'label_mode': self.label_mode}

    def resolve(self, path):

        if self.root is None or os.path.isabs(path):
            return path
        return os.path.join(self.root, path)

    def split_entries(self, split):

        if split not in SPLITS:
            raise ValueError("split {!r} unknown. Choose {}".format(
                split, ", ".join(SPLITS)))
        return self.entries[self.entries['split'] == split]

    @property
    def video_ids(self):
        return list(self.entries['video_id'])

    def frame_counts(self):
        """Number of frames per video (index video_id).

        Counts recorded in the manifest are used as is, missing counts are
        read from the file headers.
        """

        if 'num_frames' in self.entries.columns:
            counts = self.entries['num_frames']
        else:
            counts = pandas.Series(numpy.nan, index=self.entries.index)

        counts = [int(n) if not pandas.isnull(n) else
                  read_header(self.resolve(path))['T']
                  for n, path in zip(counts, self.entries['feature_path'])]

        return pandas.Series(counts, index=self.entries['video_id'],
                             name='num_frames')

    def with_splits(self, splits):
        """Copy of the manifest with the splits of some videos replaced.

        Parameters
        ----------
        splits : dict
            Video id to split.
        """

        entries = self.entries.copy()
        entries['split'] = [splits.get(vid, split) for vid, split in
                            zip(entries['video_id'], entries['split'])]
        return Manifest(self.name, self.num_classes, self.label_mode,
                        self.feature_dim, entries, root=self.root)

    def to_dict(self):

        records = []
        for record in self.entries.to_dict(orient='records'):
            entry = OrderedDict((f, record[f]) for f in ENTRY_FIELDS)
            for key, value in record.items():
                if key in entry or pandas.isnull(value):
                    continue
                entry[key] = int(value) if key == 'num_frames' else value
            records.append(dict(entry))

        return OrderedDict([('name', self.name),
                            ('num_classes', self.num_classes),
                            ('label_mode', self.label_mode),
                            ('feature_dim', self.feature_dim),
                            ('entries', records)])

    @classmethod
    def from_dict(cls, d, root=None):

        if not isinstance(d, dict):
            raise ManifestError("a manifest must be a mapping")

        problems = ["missing field {!r}".format(f)
                    for f in MANIFEST_FIELDS if f not in d]
        if problems:
            raise ManifestError(problems)

        entries = d['entries'] or []
        if not isinstance(entries, list) or \
                not all(isinstance(e, dict) for e in entries):
            raise ManifestError("entries must be a list of mappings")

        return cls(d['name'], d['num_classes'], d['label_mode'],
                   d['feature_dim'], entries, root=root)

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return isinstance(other, Manifest) and \
            self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        return "Manifest({!r}, {} videos)".format(self.name, len(self))


def save_manifest(manifest, path):
    """Write a manifest as YAML."""

    d = manifest.to_dict()
    d['entries'] = [OrderedDict(e) for e in d['entries']]

    with open(path, 'w') as f:
        yaml.safe_dump(to_builtin(d), f, sort_keys=False,
                       default_flow_style=False)


def load_manifest(path, verify_integrity=True):
    """Load a YAML manifest.

    Parameters
    ----------
    path : str
        The manifest file. Relative feature paths are resolved against its
        directory.
    verify_integrity : bool
        Check that every feature file exists and that its header agrees
        with the feature dimension, class count and label mode of the
        manifest. Default True.

    Returns
    -------
    Manifest

    Raises
    ------
    ManifestError
        Listing every problem found: missing fields, duplicate ids,
        unresolvable paths and inconsistent feature files.
    """

    with open(path) as f:
        try:
            d = yaml.safe_load(f)
        except yaml.YAMLError as err:
            raise ManifestError("{} is not valid YAML ({})".format(path, err))

    manifest = Manifest.from_dict(d, root=os.path.dirname(
        os.path.abspath(path)))
    problems = manifest.problems()

    if verify_integrity and not problems:
        problems.extend(_file_problems(manifest))

    if problems:
        raise ManifestError(problems)

    logging.debug("Manifest - loaded {!r} with {} videos".format(
        manifest.name, len(manifest)))

    return manifest


def _file_problems(manifest):

    problems = []

    for _, entry in manifest.entries.iterrows():

        vid = entry['video_id']
        path = manifest.resolve(entry['feature_path'])

        if not os.path.isfile(path):
            problems.append("video {}: cannot resolve {}".format(vid, path))
            continue

        try:
            header = read_header(path)
        except FormatError as err:
            problems.append("video {}: {}".format(vid, err))
            continue

        for key, field in (('feature_dim', 'D'), ('num_classes', 'C'),
                           ('label_mode', 'label_mode')):
            if header[field] != getattr(manifest, key):
                problems.append(
                    "video {}: {}={!r} is inconsistent with the manifest "
                    "({!r})".format(vid, key, header[field],
                                    getattr(manifest, key)))

    return problems


def load_dataset(manifest, split):
    """Read the videos of one split into memory.

    Returns
    -------
    list of (FeatureSequence, LabelTrack)
        In manifest order.
    """

    dataset = []

    for _, entry in manifest.split_entries(split).iterrows():
        dataset.append(read_features(manifest.resolve(entry['feature_path']),
                                     expected=manifest.expected(),
                                     video_id=entry['video_id']))

    logging.info("Manifest - loaded {} {} videos of {!r}".format(
        len(dataset), split, manifest.name))

    return dataset
