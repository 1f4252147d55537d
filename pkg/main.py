#!/usr/bin/env python3
"""
GeoPAS 命令行入口
几何探测、切片编码与尾部感知的求解器选择：生成探测数据集、导入性能标签、
按协议评估并输出报告。

退出码：0 成功，2 配置错误，3 数据错误，1 意外错误。
"""

import argparse
import sys

from src.application.commands import (cmd_evaluate, cmd_generate, cmd_ingest, cmd_sweep,
                                      cmd_synthetic_labels)
from src.application.initializer import ApplicationInitializer
from src.domain.evaluation.splits import STRATEGIES
from src.infrastructure.container import Container
from src.infrastructure.logger import get_logger
from src.utils.exceptions import ConfigurationError, DataError

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3

COMMANDS = {
    'generate': cmd_generate,
    'ingest': cmd_ingest,
    'evaluate': cmd_evaluate,
    'sweep': cmd_sweep,
    'synthetic-labels': cmd_synthetic_labels,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='geopas', description='GeoPAS probing and solver selection')
    parser.add_argument('--config', default='configs/config.yaml', help='YAML configuration file')
    parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help='override a configuration value, e.g. --set probing.k=16 (repeatable)')
    parser.add_argument('--log-level', default=None, help='override logging.level')
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('generate', help='build one SliceSet file per (f, d, i, rep)')
    sub.add_parser('ingest', help='build the capped label table from a performance CSV')
    for name, text in (('evaluate', 'train and evaluate the selector under a protocol'),
                       ('sweep', 'run the (k, r) probing budget sweep')):
        p = sub.add_parser(name, help=text)
        p.add_argument('--protocol', choices=sorted(STRATEGIES), default=None,
                       help='override evaluation.protocol')
    sub.add_parser('synthetic-labels', help='write the two-family synthetic labels CSV')
    return parser


def run_command(args: argparse.Namespace, container: Container):
    run = container.get('run_config')
    command = COMMANDS[args.command]
    if args.command in ('evaluate', 'sweep'):
        return command(run, protocol=args.protocol)
    return command(run)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logger = get_logger('main')
    container = Container()

    try:
        ApplicationInitializer(container).initialize(args.config, args.overrides, args.log_level)
        run_command(args, container)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except DataError as e:
        logger.error(f"Data error: {e}")
        return EXIT_DATA
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return EXIT_UNEXPECTED
    finally:
        container.clear()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
