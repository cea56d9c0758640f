"""Command line interface of the workflow recognition benchmark.

Subcommands::

    train-eval   train and evaluate a model over several seeds
    synth        generate a synthetic benchmark dataset
    gradcheck    run the finite difference suites
    report       render the comparison table of finished runs

Exit codes: 0 success, 1 usage, configuration or data error, 2 failed
verification.
"""

import argparse
import os
import sys
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor

import yaml

from workflowrecognition.base import BACKBONE_KINDS
from workflowrecognition.base import MODEL_KINDS
from workflowrecognition.base import ModelSpec
from workflowrecognition.evaluation import aggregate_seeds
from workflowrecognition.evaluation import evaluate_pairs
from workflowrecognition.evaluation import read_aggregate_report
from workflowrecognition.evaluation import render_table
from workflowrecognition.evaluation import write_report
from workflowrecognition.fileio import load_dataset
from workflowrecognition.fileio import load_manifest
from workflowrecognition.fileio import write_checkpoint
from workflowrecognition.training import TrainConfig
from workflowrecognition.training import embed_dataset
from workflowrecognition.training import predict
from workflowrecognition.training import train
from workflowrecognition.training import write_history
from workflowrecognition.utils import ConfigError
from workflowrecognition.utils import FormatError
from workflowrecognition.utils import GradientCheckError
from workflowrecognition.utils import LearningError
from workflowrecognition.utils import ManifestError
from workflowrecognition.utils import ShapeError
from workflowrecognition.utils import merge_dicts
from workflowrecognition.utils import to_builtin
from workflowrecognition.utils import worker_count
from workflowrecognition.verification import SCOPES
from workflowrecognition.verification import run_gradcheck
from workflowrecognition.types import is_integer

from workflowrecognition import wr_logging as logging

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERIFICATION = 2

DEFAULT_SEEDS = (0, 1, 2)

CONFIG_FILE = 'config.yml'
REPORT_FILE = 'report.yml'
TABLE_FILE = 'table.txt'
MARKER_FILE = 'INCOMPLETE'

# errors reported as a single line with exit code 1
DATA_ERRORS = (ConfigError, ManifestError, FormatError, ShapeError,
               LearningError, ValueError, OSError)


class UsageError(Exception):
    """Error class for invalid command line usage."""


class RunExistsError(Exception):
    """Error class for run directories that may not be overwritten."""


###########################
#      Run settings       #
###########################

class RunConfig(object):
    """Fully resolved settings of a train-eval run.

    Parameters
    ----------
    manifest : str
        Path of the dataset manifest with train and test splits.
    model : dict
        ModelSpec settings; 'kind' is required, the feature dimension, class
        count and label mode default to the manifest's.
    train : dict
        TrainConfig settings (the seed is set per run).
    seeds : list of int
        The seeds to train with. Default 0, 1, 2.
    out : str
        The run directory.
    backbone : dict, optional
        ModelSpec settings of a frame-mlp or clip-conv backbone whose
        embeddings feed the model.
    """

    _fields = ('manifest', 'model', 'backbone', 'train', 'seeds', 'out')

    def __init__(self, manifest=None, model=None, train=None,
                 seeds=DEFAULT_SEEDS, out=None, backbone=None):

        self.manifest = manifest
        self.model = dict(model or {})
        self.backbone = dict(backbone) if backbone else None
        self.train = dict(train or {})
        self.seeds = list(seeds) if seeds is not None else list(DEFAULT_SEEDS)
        self.out = out

    def problems(self):

        problems = []

        if not self.manifest:
            problems.append("no manifest given (--manifest)")
        if not self.out:
            problems.append("no output directory given (--out)")
        if 'kind' not in self.model:
            problems.append("no model kind given (--model), valid kinds: "
                            "{}".format(", ".join(MODEL_KINDS)))
        elif self.model['kind'] not in MODEL_KINDS:
            problems.append("model kind {!r} unknown, valid kinds: {}".format(
                self.model['kind'], ", ".join(MODEL_KINDS)))
        if self.backbone is not None and \
                self.backbone.get('kind') not in BACKBONE_KINDS:
            problems.append("backbone {!r} unknown, valid backbones: {}".format(
                self.backbone.get('kind'), ", ".join(BACKBONE_KINDS)))
        if not self.seeds:
            problems.append("at least one seed is needed")
        if any(not is_integer(s) or s < 0 for s in self.seeds):
            problems.append("seeds must be non-negative integers, got "
                            "{!r}".format(self.seeds))
        if len(set(self.seeds)) != len(self.seeds):
            problems.append("seeds repeat: {!r}".format(self.seeds))
        if 'seed' in self.train:
            problems.append("the training seed is set by --seeds")

        return problems

    def validate(self):

        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    @property
    def label(self):
        """Architecture name, e.g. 'mstcn' or 'frame-mlp+gru'."""

        if self.backbone:
            return "{}+{}".format(self.backbone['kind'], self.model['kind'])
        return self.model['kind']

    def to_dict(self):
        d = OrderedDict((f, getattr(self, f)) for f in self._fields)
        d['seeds'] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, d):

        if not isinstance(d, dict):
            raise ConfigError("a run config must be a mapping")

        unknown = sorted(set(d) - set(cls._fields))
        if unknown:
            raise ConfigError(
                ["unknown run setting {!r}".format(k) for k in unknown])
        return cls(**d)


def parse_seeds(value):
    """Parse a comma separated seed list such as '0,1,2'."""

    try:
        seeds = [int(s) for s in value.split(',') if s.strip() != '']
    except ValueError:
        raise ConfigError("--seeds must be comma separated integers, got "
                          "{!r}".format(value))
    if not seeds:
        raise ConfigError("--seeds must list at least one seed")
    return seeds


def load_run_config(path):

    with open(path) as f:
        try:
            d = yaml.safe_load(f) or {}
        except yaml.YAMLError as err:
            raise ConfigError("{} is not valid YAML ({})".format(path, err))

    return RunConfig.from_dict(d)


def resolve_run_config(args):
    """Merge the config file and the flags; flags take precedence."""

    cfg = load_run_config(args.config) if args.config else RunConfig()

    cfg.manifest = args.manifest or cfg.manifest
    cfg.out = args.out or cfg.out
    cfg.model = merge_dicts(cfg.model, {'kind': args.model})
    cfg.train = merge_dicts(cfg.train, {'epochs': args.epochs,
                                        'lr': args.lr})
    if args.seeds is not None:
        cfg.seeds = parse_seeds(args.seeds)
    if args.backbone is not None:
        cfg.backbone = merge_dicts(cfg.backbone, {'kind': args.backbone})

    cfg.validate()

    if cfg.manifest:
        cfg.manifest = os.path.abspath(cfg.manifest)

    return cfg


def _spec_for(settings, manifest, feature_dim=None):

    d = merge_dicts({'feature_dim': manifest.feature_dim,
                     'num_classes': manifest.num_classes,
                     'label_mode': manifest.label_mode}, settings)
    if feature_dim is not None:
        d['feature_dim'] = feature_dim
        if 'hidden_size' not in settings:
            d['hidden_size'] = None
    return ModelSpec.from_dict(d)


def _complete_config(cfg, manifest):
    """Fill the model and training settings with their resolved values."""

    spec = _spec_for(cfg.model, manifest)
    if spec.feature_dim != manifest.feature_dim and cfg.backbone is None:
        raise ConfigError(
            "model feature_dim {} does not match the manifest ({})".format(
                spec.feature_dim, manifest.feature_dim))
    if spec.num_classes != manifest.num_classes or \
            spec.label_mode != manifest.label_mode:
        raise ConfigError(
            "model expects {} {} classes, the manifest holds {} {}".format(
                spec.num_classes, spec.label_mode, manifest.num_classes,
                manifest.label_mode))

    if cfg.backbone is not None:
        backbone = _spec_for(cfg.backbone, manifest)
        cfg.backbone = dict(backbone.to_dict())
        spec = _spec_for(cfg.model, manifest,
                         feature_dim=backbone.num_filters)

    cfg.model = dict(spec.to_dict())
    train_cfg = TrainConfig.from_dict(cfg.train)
    cfg.train = {k: v for k, v in train_cfg.to_dict().items() if k != 'seed'}

    return cfg


###########################
#       train-eval        #
###########################

def run_seed(cfg, seed, train_set, test_set, seed_dir):
    """Train and evaluate one seed; writes the seed's artifacts.

    Returns
    -------
    EvaluationReport
        The test report of the seed.
    """

    if not os.path.isdir(seed_dir):
        os.makedirs(seed_dir)

    train_cfg = TrainConfig.from_dict(merge_dicts(cfg.train, {'seed': seed}))

    if cfg.backbone is not None:
        backbone = ModelSpec.from_dict(cfg.backbone)
        logging.info("Run - seed {} backbone {}".format(seed, backbone.kind))
        backbone_params, history = train(backbone, train_cfg, train_set)
        write_checkpoint(backbone_params, backbone,
                         os.path.join(seed_dir, 'backbone.swrc'))
        write_history(history, os.path.join(seed_dir,
                                            'backbone_history.jsonl'))
        train_set = embed_dataset(backbone_params, backbone, train_set)
        test_set = embed_dataset(backbone_params, backbone, test_set)

    spec = ModelSpec.from_dict(cfg.model)
    logging.info("Run - seed {} model {}".format(seed, spec.kind))

    params, history = train(spec, train_cfg, train_set)
    write_checkpoint(params, spec, os.path.join(seed_dir, 'model.swrc'))
    write_history(history, os.path.join(seed_dir, 'history.jsonl'))

    report = evaluate_pairs([predict(params, spec, seq)
                             for seq, _ in test_set],
                            [labels for _, labels in test_set])
    write_report(report, os.path.join(seed_dir, REPORT_FILE))

    return report


def _run_seed_star(args):
    return run_seed(*args)


def _prepare_out_dir(out, no_overwrite):

    if os.path.exists(os.path.join(out, CONFIG_FILE)) and no_overwrite:
        raise RunExistsError("{} exists, refusing to overwrite "
                             "(--no-overwrite)".format(out))
    if not os.path.isdir(out):
        os.makedirs(out)


def train_eval(cfg, no_overwrite=False):
    """Train and evaluate a model on every seed of a run config.

    The resolved config is written to the run directory before training;
    an INCOMPLETE marker stays behind when the run does not finish. Seeds
    run in worker processes (at most SWR_THREADS); reports are merged in
    ascending seed order.

    Returns
    -------
    AggregateReport
    """

    manifest = load_manifest(cfg.manifest)
    cfg = _complete_config(cfg, manifest)

    train_set = load_dataset(manifest, 'train')
    test_set = load_dataset(manifest, 'test')
    if not train_set or not test_set:
        raise ManifestError("the manifest needs videos in both the train and "
                            "the test split, got {} and {}".format(
                                len(train_set), len(test_set)))

    _prepare_out_dir(cfg.out, no_overwrite)

    marker = os.path.join(cfg.out, MARKER_FILE)
    with open(marker, 'w') as f:
        f.write("run in progress or aborted\n")

    with open(os.path.join(cfg.out, CONFIG_FILE), 'w') as f:
        yaml.safe_dump(to_builtin(cfg.to_dict()), f, sort_keys=False,
                       default_flow_style=False)

    seeds = sorted(cfg.seeds)
    jobs = [(cfg, seed, train_set, test_set,
             os.path.join(cfg.out, 'seed{}'.format(seed))) for seed in seeds]
    workers = min(worker_count(), len(jobs))

    logging.info("Run - {} on {} train / {} test videos, seeds {}, {} "
                 "workers".format(cfg.label, len(train_set), len(test_set),
                                  seeds, workers))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_seed_star, jobs))
    else:
        reports = [_run_seed_star(job) for job in jobs]

    aggregate = aggregate_seeds(reports, seeds=seeds)
    write_report(aggregate, os.path.join(cfg.out, REPORT_FILE))
    with open(os.path.join(cfg.out, TABLE_FILE), 'w') as f:
        f.write(render_table([(cfg.label, aggregate)]))

    os.remove(marker)

    return aggregate


###########################
#       Subcommands       #
###########################

def cmd_train_eval(args):

    cfg = resolve_run_config(args)
    aggregate = train_eval(cfg, no_overwrite=args.no_overwrite)

    sys.stdout.write(render_table([(cfg.label, aggregate)]))
    if aggregate.single_seed:
        sys.stdout.write("(single seed, no standard deviation)\n")

    return EXIT_OK


def cmd_synth(args):

    from workflowrecognition.datasets.generate import load_synth_config
    from workflowrecognition.datasets.generate import synth_generate
    from workflowrecognition.datasets.generate import write_synthetic

    cfg = load_synth_config(args.config)
    changes = merge_dicts({'seed': args.seed,
                           'test_fraction': args.test_fraction,
                           'num_videos': args.num_videos})
    if changes:
        cfg = cfg.replace(**changes)

    if os.path.exists(os.path.join(args.out, 'manifest.yml')) and \
            args.no_overwrite:
        raise RunExistsError("{} exists, refusing to overwrite "
                             "(--no-overwrite)".format(args.out))

    dataset = synth_generate(cfg, n_jobs=worker_count())
    manifest = write_synthetic(dataset, args.out)

    sys.stdout.write("wrote {} videos ({} train, {} test) to {}\n".format(
        len(manifest), len(manifest.split_entries('train')),
        len(manifest.split_entries('test')), args.out))

    bound_file = os.path.join(args.out, 'bayes_bound.yml')
    if os.path.exists(bound_file):
        with open(bound_file) as f:
            bounds = yaml.safe_load(f)
        sys.stdout.write("frame-wise bound: {:.6f}\n".format(bounds['all']))

    return EXIT_OK


def cmd_gradcheck(args):

    results = run_gradcheck(args.scope, seeds=args.seeds)

    sys.stdout.write(results.to_string(index=False) + "\n")

    failed = results[~results['passed']]
    if len(failed):
        for _, row in failed.iterrows():
            sys.stderr.write(
                "gradcheck failed: {} at {} (seed {}), rel err {:.3e} >= "
                "{:g}\n".format(row['unit'], row['worst'], row['seed'],
                                row['max_rel_err'], row['tol']))
        return EXIT_VERIFICATION

    return EXIT_OK


def cmd_report(args):

    rows = []
    for run_dir in args.runs:

        path = os.path.join(run_dir, REPORT_FILE)
        if not os.path.exists(path):
            raise OSError("{} holds no aggregate report".format(run_dir))

        label = os.path.basename(os.path.normpath(run_dir))
        config_path = os.path.join(run_dir, CONFIG_FILE)
        if os.path.exists(config_path):
            label = load_run_config(config_path).label

        rows.append((label, read_aggregate_report(path)))

    table = render_table(rows)
    sys.stdout.write(table)

    if args.out:
        with open(args.out, 'w') as f:
            f.write(table)

    return EXIT_OK


###########################
#         Parser          #
###########################

class _ArgumentParser(argparse.ArgumentParser):

    def error(self, message):
        raise UsageError(message)


def build_parser():

    parser = _ArgumentParser(
        prog='workflowrecognition',
        description="Train and compare frame-level, clip-level and temporal "
                    "models for surgical workflow recognition.")
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help="log progress (-vv for debug output)")

    commands = parser.add_subparsers(dest='command', parser_class=_ArgumentParser)

    te = commands.add_parser('train-eval', help="train and evaluate a model")
    te.add_argument('--manifest', help="dataset manifest with splits")
    te.add_argument('--model', help="one of {}".format(", ".join(MODEL_KINDS)))
    te.add_argument('--backbone', help="train a {} backbone first and feed its "
                    "embeddings to the model".format(" or ".join(BACKBONE_KINDS)))
    te.add_argument('--epochs', type=int)
    te.add_argument('--lr', type=float)
    te.add_argument('--seeds', help="comma separated seeds, default 0,1,2")
    te.add_argument('--out', help="run directory")
    te.add_argument('--config', help="YAML run config; flags override it")
    te.add_argument('--no-overwrite', action='store_true',
                    help="refuse to reuse an existing run directory")
    te.set_defaults(func=cmd_train_eval)

    synth = commands.add_parser('synth', help="generate a synthetic dataset")
    synth.add_argument('--config', default='internal-7',
                       help="bundled config name or YAML path, default "
                            "internal-7")
    synth.add_argument('--out', required=True, help="output directory")
    synth.add_argument('--seed', type=int)
    synth.add_argument('--num-videos', type=int)
    synth.add_argument('--test-fraction', type=float)
    synth.add_argument('--no-overwrite', action='store_true')
    synth.set_defaults(func=cmd_synth)

    gc = commands.add_parser('gradcheck', help="finite difference checks")
    gc.add_argument('scope', nargs='?', default='all', choices=SCOPES)
    gc.add_argument('--seeds', type=int, default=20,
                    help="random instances per unit, default 20")
    gc.set_defaults(func=cmd_gradcheck)

    rep = commands.add_parser('report', help="render the comparison table")
    rep.add_argument('runs', nargs='+', help="run directories")
    rep.add_argument('--out', help="also write the table to this file")
    rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    """Run the command line interface; returns the exit code."""

    parser = build_parser()

    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        sys.stderr.write("usage error: {}\n".format(err))
        return EXIT_ERROR

    if getattr(args, 'func', None) is None:
        parser.print_usage(sys.stderr)
        return EXIT_ERROR

    logging.set_verbosity(logging.verbosity_from_flags(args.verbose))

    try:
        return args.func(args)
    except GradientCheckError as err:
        sys.stderr.write("gradcheck failed: {}\n".format(err))
        return EXIT_VERIFICATION
    except RunExistsError as err:
        sys.stderr.write("error: {}\n".format(err))
        return EXIT_ERROR
    except DATA_ERRORS as err:
        message = str(err).replace("\n", " ")
        sys.stderr.write("error: {}\n".format(message))
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
