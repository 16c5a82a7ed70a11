# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Command Line
###################################
``imoc <command> [--config FILE] [--out DIR] [--seed N] [--precision 32|64]``

+----------------+------------------------------------------------------------+
| Command        | Artifacts written to ``--out``                             |
+================+============================================================+
| train          | config.yml, checkpoint, history.csv, run.log               |
+----------------+------------------------------------------------------------+
| eval           | scores.csv, repeats.csv, run.log (AUROC on stdout)         |
+----------------+------------------------------------------------------------+
| sweep-beta     | sweep.csv plus beta-<value>/history.csv per weight         |
+----------------+------------------------------------------------------------+
| verify-theory  | theory.csv (PASS/FAIL line on stdout)                      |
+----------------+------------------------------------------------------------+
| gradcheck      | gradcheck.csv (table on stdout)                            |
+----------------+------------------------------------------------------------+

Nothing is written outside the output directory; without ``--out``, the
verify-theory and gradcheck commands only print. Errors are printed to stderr
as a single JSON line; the exit code is 2 for imoc errors and 3 for missing
files. ``IMOC_THREADS`` caps the numba thread pool (default 1).
"""
import sys
import json
import logging
import argparse
from logging.handlers import RotatingFileHandler
import yaml
from imoc.core.error import ImocException, UsageError
from imoc.core.kernels import set_threads
from imoc.config import load_config
from imoc.data import load_dataset, make_one_class_task, subsample
from imoc.evaluate import evaluate_repeats
from imoc.infotheory import verify
from imoc.trainer import train, sweep_beta, gradient_report
from imoc.util.io import checkpoint_save, checkpoint_load, write_csv
from imoc.util.utility import mkp


log = logging.getLogger('imoc.cli')
COMMANDS = ('train', 'eval', 'sweep-beta', 'verify-theory', 'gradcheck')
EXIT_ERROR = 2
EXIT_MISSING = 3


class ExperimentManifest(object):
    """
    Artifacts of one command, recorded in ``manifest.yml`` of the output
    directory.
    """
    def add(self, name):
        path = mkp(self.out, name)
        self.artifacts.append(name)
        return path

    def write(self):
        doc = {'command': self.command, 'config': self.config, 'artifacts': self.artifacts + ['manifest.yml']}
        with open(mkp(self.out, 'manifest.yml'), 'w', encoding='utf-8') as f:
            f.write(yaml.safe_dump(doc, sort_keys=False))

    def __init__(self, command, config, out):
        self.command = command
        self.config = config
        self.out = out
        self.artifacts = []


class ImocParser(argparse.ArgumentParser):
    """Parser whose usage errors become the one-line JSON report (exit code 2)."""
    def error(self, message):
        error = UsageError(self.prog, message)
        _report(error, **error.fields())
        sys.exit(EXIT_ERROR)


def build_parser():
    parser = ImocParser(prog='imoc', description='Information-maximizing one-class anomaly detection')
    sub = parser.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument('--config', help='YAML run configuration')
        p.add_argument('--out', required=name in ('train', 'eval', 'sweep-beta'), help='Output directory')
        p.add_argument('--seed', type=int, help='Overrides the configured seed')
        p.add_argument('--precision', type=int, choices=(32, 64), help='Overrides the configured precision')
        if name == 'eval':
            p.add_argument('--checkpoint', help='Checkpoint file (default: <out>/<checkpoint>)')
            p.add_argument('--score', choices=('ori', 'rand', 'mc', 'extension'),
                           help='Normal score (default: configured score, extension for extension models)')
        if name == 'gradcheck':
            p.add_argument('--trials', type=int, default=100, help='Random cases per primitive')
    return parser


def _attach_file_log(out):
    handler = RotatingFileHandler(mkp(out, 'run.log'), mode='a', maxBytes=10485760, backupCount=5)
    handler.setLevel(logging.INFO)
    handler.setFormatter(logging.Formatter('[%(levelname)s %(asctime)s] %(name)s %(message)s'))
    logging.getLogger('imoc').addHandler(handler)
    return handler


def _task(cfg):
    task = make_one_class_task(load_dataset(cfg), cfg.normal_class)
    return subsample(task, cfg.data_limit_train, cfg.data_limit_test, cfg.seed)


def cmd_train(args, cfg, manifest):
    with open(manifest.add('config.yml'), 'w', encoding='utf-8') as f:
        f.write(cfg.dumps())
    encoder, history = train(cfg, _task(cfg), checkpoint_path=mkp(args.out, cfg.checkpoint))
    checkpoint_save(encoder, cfg, manifest.add(cfg.checkpoint))
    write_csv(history, manifest.add('history.csv'))
    print('auroc {:.6f}'.format(history['auroc'].iloc[-1]))
    return 0


def cmd_eval(args, cfg, manifest):
    path = args.checkpoint or mkp(args.out, cfg.checkpoint)
    encoder, stored = checkpoint_load(path, precision=args.precision)
    if args.config is None and stored is not None:
        given = (('seed', args.seed), ('precision', args.precision))
        cfg = stored.replace(**{k: v for k, v in given if v is not None})
    score = args.score or ('extension' if cfg.extension else cfg.score)
    task = _task(cfg)
    table, first = evaluate_repeats(encoder, task, cfg.similarity(encoder.latent_dim), score,
                                    cfg.eval_repeats, cfg.policy(task.grayscale), cfg.score_h,
                                    cfg.seed, cfg.eval_batch)
    write_csv(first.table, manifest.add('scores.csv'))
    write_csv(table, manifest.add('repeats.csv'))
    print('auroc {:.6f}'.format(first.auroc))
    return 0


def cmd_sweep(args, cfg, manifest):
    def save(beta, encoder, history):
        write_csv(history, manifest.add(mkp('beta-{:g}'.format(beta), 'history.csv')))

    for beta in cfg.sweep_betas:
        mkp(args.out, 'beta-{:g}'.format(float(beta)), mk=True)
    table = sweep_beta(cfg, _task(cfg), callback=save)
    write_csv(table, manifest.add('sweep.csv'))
    print(table.ordered().to_string(index=False))
    return 0


def cmd_verify(args, cfg, manifest):
    report, line = verify(seed=cfg.seed)
    if manifest is not None:
        write_csv(report, manifest.add('theory.csv'))
    print(line)
    return 0 if line.startswith('PASS') else 1


def cmd_gradcheck(args, cfg, manifest):
    report = gradient_report(seed=cfg.seed, trials=args.trials)
    if manifest is not None:
        write_csv(report, manifest.add('gradcheck.csv'))
    print(report.ordered().to_string(index=False))
    return 0 if report['passed'].all() else 1


HANDLERS = {'train': cmd_train, 'eval': cmd_eval, 'sweep-beta': cmd_sweep,
            'verify-theory': cmd_verify, 'gradcheck': cmd_gradcheck}


def _report(error, **fields):
    payload = dict(error=error.__class__.__name__, message=str(error), **fields)
    sys.stderr.write(json.dumps(payload, default=str, sort_keys=True) + '\n')


def main(argv=None):
    """
    Run one command.

    Args:
        argv (list): Arguments without the program name (default ``sys.argv[1:]``)

    Returns:
        code (int): 0 on success, 1 on a failed check, 2 on errors, 3 on missing files
    """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code
    set_threads()
    handler, manifest = None, None
    try:
        cfg = load_config(args.config, seed=args.seed, precision=args.precision)
        if args.out is not None:
            mkp(args.out, mk=True)
            handler = _attach_file_log(args.out)
            manifest = ExperimentManifest(args.command, args.config, args.out)
            manifest.artifacts.append('run.log')
        log.info('imoc {} (seed {}, {}-bit)'.format(args.command, cfg.seed, cfg.precision))
        code = HANDLERS[args.command](args, cfg, manifest)
        if manifest is not None:
            manifest.write()
        return code
    except ImocException as e:
        _report(e, **e.fields())
        return EXIT_ERROR
    except FileNotFoundError as e:
        _report(e, path=e.filename or str(e))
        return EXIT_MISSING
    finally:
        if handler is not None:
            logging.getLogger('imoc').removeHandler(handler)
            handler.close()


run_cli = main


if __name__ == '__main__':
    sys.exit(main())
