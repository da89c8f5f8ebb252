"""
子命令共用的输入解析: 信号集、划分、构造协议、初始估计
"""

import logging
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from ..analysis import BuildProtocol
from ..config import RunConfig, get_settings
from ..errors import ConfigurationError, StorageError
from ..signal_model import Partition, SignalSet, make_uniform_partition
from ..storage import load_signal_set, load_signal_set_csv, read_matrix

logger = logging.getLogger(__name__)


def add_data_arguments(parser):
    """build-apply / compare / converge 共用的参数"""
    parser.add_argument("--x", help="参考信号集 (目录或 .csv)")
    parser.add_argument("--y", help="观测信号集 (目录或 .csv)")
    parser.add_argument("--out", help="输出目录")
    parser.add_argument("--estimator", choices=["sampled", "additive", "prior"], default=None)
    parser.add_argument("--xi-power", type=float, default=None, help="加性噪声功率 E[xi^2]")
    parser.add_argument("--sign", type=int, choices=[1, -1], default=None)
    parser.add_argument("--initial", choices=["reconstruct", "oracle", "file"], default=None)
    parser.add_argument("--initial-file", default=None, help="X_hat_1 矩阵文件")
    parser.add_argument("--references", choices=["reconstruct", "oracle"], default=None)
    parser.add_argument("--threads", type=int, default=None)


def load_set(path: Optional[str], what: str) -> SignalSet:
    """目录按信号集目录读取，.csv 按归档读取"""
    if not path:
        raise ConfigurationError(f"缺少 --{what}")
    if Path(path).suffix.lower() == ".csv":
        return load_signal_set_csv(path)
    return load_signal_set(path)


def load_pair(config: RunConfig) -> Tuple[SignalSet, SignalSet]:
    x = load_set(config.x, "x")
    y = load_set(config.y, "y")
    logger.info(f"[输入] X: N={x.n_points} m={x.m} q={x.q}，Y: n={y.m}")
    return x, y


def resolve_partition(config: RunConfig, n_points: int) -> Partition:
    """--knots 或 --p，都未给出时取 p=2"""
    if config.knots is not None:
        return Partition.from_knots(config.knots, n_points)
    return make_uniform_partition(n_points, config.p or 2)


def make_protocol(config: RunConfig) -> BuildProtocol:
    return BuildProtocol(
        initial="given" if config.initial == "file" else config.initial,
        references=config.references,
        estimator=config.estimator,
        xi_power=config.xi_power,
        sign=config.sign,
        threads=config.effective_threads,
    )


def load_initial(config: RunConfig) -> Optional[np.ndarray]:
    if config.initial == "file":
        return read_matrix(config.initial_file)
    return None


def output_dir(config: RunConfig) -> Path:
    out = Path(config.out or get_settings().data_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(f"无法创建输出目录 {out}: {e}")
    return out
