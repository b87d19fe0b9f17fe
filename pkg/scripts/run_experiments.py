#!/usr/bin/env python3
'''
Command-line driver for the post-selection experiments
'''

import os
import sys
import argparse
import logging
import typing
from dataclasses import MISSING, fields

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from postselect.errors import PostselectError
from postselect.experiments import COMMANDS, PRESETS, ExperimentConfig, load_config, run_experiment
from utils.config import load_yaml, project_path
from utils.logging_setup import setup_logging
from utils.output import assertion_table, plot_sweep, print_summary, save_svg, write_table


def _add_field_flags(parser: argparse.ArgumentParser):
    '''One flag per ExperimentConfig field; unset flags stay None so the config file wins'''
    for f in fields(ExperimentConfig):
        if f.name in ('experiment', 'seed', 'out'):
            continue
        default = f.default if f.default is not MISSING else None
        if f.type is bool:
            parser.add_argument(f'--{f.name}', action='store_true', default=None)
        elif typing.get_origin(f.type) is list:
            parser.add_argument(f'--{f.name}', type=float, nargs='+', default=None)
        else:
            kind = typing.get_args(f.type)[0] if typing.get_origin(f.type) is typing.Union else f.type
            parser.add_argument(f'--{f.name}', type=kind, default=None, help=f'default: {default}')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Post-selection-free state preparation experiments')
    subparsers = parser.add_subparsers(dest='experiment', required=True)
    for name in COMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument('--config', '-c', default=project_path('config', 'experiment_config.yaml'),
                         help='Experiment configuration file')
        sub.add_argument('--logging-config', default=project_path('config', 'logging_config.yaml'))
        sub.add_argument('--seed', type=int, default=None)
        sub.add_argument('--out', '-o', default=None, help='Output directory')
        sub.add_argument('--preset', choices=sorted(PRESETS), default=None)
        _add_field_flags(sub)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)

    setup_logging(args.logging_config)
    logger = logging.getLogger(__name__)

    overrides = {f.name: getattr(args, f.name, None) for f in fields(ExperimentConfig)}
    overrides['experiment'] = args.experiment

    try:
        cfg = load_config(load_yaml(args.config), args.preset, overrides)
        logger.info(f"Experiment {cfg.experiment}: output to {cfg.out}")
        outcome = run_experiment(cfg)

        written = []
        for name, table in outcome.tables.items():
            written.append(write_table(table, cfg.out, name))
        prefix = cfg.experiment.replace('-', '_')
        written.append(write_table(assertion_table(outcome.assertions), cfg.out, f'{prefix}_assertions'))
        for name, plot in outcome.plots.items():
            written.append(save_svg(plot_sweep(**plot), cfg.out, name))

        print_summary(f'{cfg.experiment} (seed {cfg.seed})', outcome.assertions, written)
        if not outcome.passed:
            logger.error(f"Experiment {cfg.experiment} failed one or more assertions")
            return 1
        logger.info(f"Experiment {cfg.experiment} completed successfully!")
        return 0

    except PostselectError as e:
        logger.error(f"Experiment {args.experiment} failed: {e}")
        return 1


if __name__ == "__main__":
    exit(main())
