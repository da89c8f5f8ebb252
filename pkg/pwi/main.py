"""
分段线性插值滤波 - 命令行入口

    python -m pwi generate    --m 8 --q 64 --N 129 --noise additive:0.05 --seed 7 --out data/
    python -m pwi build-apply --x data/x --y data/y --p 5 --out runs/p5
    python -m pwi compare     --x data/x --y data/y --knots 1,35,70,105,141
    python -m pwi converge    --x data/x --y data/y --p-list 5,9,17,33

退出码: 0 成功，1 参数/配置/输入错误，2 读写错误，3 数值失败
"""

import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from . import __version__
from .commands import build_apply, compare, converge, generate
from .config import RunConfig, get_settings, read_config_file
from .errors import PwiError

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """用法错误以退出码 1 结束"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pwi", description="分段线性插值滤波器")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", default=None, help="key = value 配置文件，命令行参数优先")
    parser.add_argument("-v", "--verbose", action="store_true", help="输出调试日志")

    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for module in (generate, build_apply, compare, converge):
        module.add_parser(subparsers)
    return parser


def setup_logging(verbose: bool = False):
    settings = get_settings()
    level = logging.DEBUG if verbose or settings.debug else getattr(logging, settings.log_level.upper(), logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def make_run_config(args: argparse.Namespace) -> RunConfig:
    """配置文件与命令行参数合并，命令行优先"""
    values = read_config_file(args.config) if args.config else {}
    skip = {"config", "verbose", "handler"}
    values.update({k: v for k, v in vars(args).items() if v is not None and k not in skip})
    return RunConfig(**values)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        setup_logging(args.verbose)
        config = make_run_config(args)
        return args.handler(config)
    except ValidationError as e:
        print(f"pwi: 参数不合法:\n{e}", file=sys.stderr)
        return 1
    except PwiError as e:
        logger.error(f"[{args.command}] {e.detail}")
        print(f"pwi: {e.detail}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
