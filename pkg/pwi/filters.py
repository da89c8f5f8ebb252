"""
分段线性插值滤波器
子滤波器 F_j[Y] = X_hat_j + B_j (Y - Y_j)，B_j = E_zw E_ww^+ (取 M_Bj = 0)，
按节点顺序链式构造；以及 GOL 滤波器和平均多项式滤波器两个基线
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .covariance import CovarianceEstimator, CovPair, SampledEstimator, residual_value, sample_cov
from .errors import InvalidInputError, NumericalFailureError
from .matrix_core import as_matrix, pinv
from .signal_model import Partition, SignalSet, check_grid_index, interval_of

logger = logging.getLogger(__name__)


# ======================== 数据类型 ========================

@dataclass(frozen=True, eq=False)
class SubFilter:
    """区间 [t_j, t_{j+1}] 上的子滤波器"""

    j: int
    b: np.ndarray           # m x n
    x_hat_knot: np.ndarray  # m x q，X_hat_j
    y_knot: np.ndarray      # n x q，Y_j
    residual: float
    cov: Optional[CovPair] = field(default=None, repr=False)

    def apply(self, y_k: np.ndarray) -> np.ndarray:
        return self.x_hat_knot + self.b @ (y_k - self.y_knot)

    def alpha(self) -> np.ndarray:
        """仿射项 alpha_j = X_hat_j - B_j Y_j"""
        return self.x_hat_knot - self.b @ self.y_knot


@dataclass(frozen=True, eq=False)
class PiecewiseFilter:
    """由 p-1 个子滤波器组成的分段线性插值滤波器"""

    partition: Partition
    subfilters: Tuple[SubFilter, ...]
    dims: Tuple[int, int, int]  # (m, n, q)

    def __post_init__(self):
        if len(self.subfilters) != self.partition.p - 1:
            raise InvalidInputError(
                f"子滤波器个数 {len(self.subfilters)} 与 p-1={self.partition.p - 1} 不一致"
            )

    def subfilter(self, j: int) -> SubFilter:
        return self.subfilters[j - 1]

    def apply(self, y_k, k: int) -> np.ndarray:
        """估计第 k 个时间点的参考信号"""
        check_grid_index(k, self.partition.n_points)
        y_k = as_matrix(y_k, "Y_k")
        _, n, q = self.dims
        if y_k.shape != (n, q):
            raise InvalidInputError(f"Y_k 维度应为 {(n, q)}，实际 {y_k.shape}")
        return self.subfilter(interval_of(k, self.partition)).apply(y_k)

    def apply_set(self, y: SignalSet, threads: Optional[int] = None) -> List[np.ndarray]:
        """对整个信号集批量估计"""
        if y.n_points != self.partition.n_points:
            raise InvalidInputError(f"信号集长度 {y.n_points} 与划分的 N={self.partition.n_points} 不一致")
        ks = range(1, y.n_points + 1)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda k: self.apply(y.at(k), k), ks))

    def knot_estimates(self) -> List[np.ndarray]:
        """各节点的链式估计 X_hat_1, ..., X_hat_{p-1}"""
        return [s.x_hat_knot for s in self.subfilters]


# ======================== 分段滤波器 ========================

def solve_b(cov: CovPair) -> np.ndarray:
    """B_j = E_zw E_ww^+"""
    if cov.e_ww.shape[0] != cov.e_zw.shape[1]:
        raise InvalidInputError(f"E_zw {cov.e_zw.shape} 与 E_ww {cov.e_ww.shape} 维度不匹配")
    return cov.e_zw @ pinv(cov.e_ww)


def build_piecewise(
    y: SignalSet,
    partition: Partition,
    x_hat_1,
    knot_reference_estimates: Optional[Sequence[np.ndarray]] = None,
    estimator: Optional[CovarianceEstimator] = None,
) -> PiecewiseFilter:
    """
    按节点顺序构造滤波器

    for j = 1..p-1:
        由 (X~_{j+1}, X_hat_j, Y_{j+1}, Y_j) 估计 CovPair
        B_j = E_zw E_ww^+
        X_hat_{j+1} = X_hat_j + B_j (Y_{j+1} - Y_j)

    整个构造恰好计算 p-1 次伪逆。
    """
    if partition.n_points != y.n_points:
        raise InvalidInputError(f"划分的 N={partition.n_points} 与信号集长度 {y.n_points} 不一致")
    if estimator is None:
        if knot_reference_estimates is None:
            raise InvalidInputError("需要提供节点参考估计或协方差估计策略")
        if len(knot_reference_estimates) != partition.p - 1:
            raise InvalidInputError(
                f"节点参考估计个数 {len(knot_reference_estimates)} 与 p-1={partition.p - 1} 不一致"
            )
        estimator = SampledEstimator(knot_reference_estimates)

    x_hat = as_matrix(x_hat_1, "X_hat_1")
    if x_hat.shape[1] != y.q:
        raise InvalidInputError(f"X_hat_1 的实现数 {x_hat.shape[1]} 与 Y 的 q={y.q} 不一致")
    dims = (x_hat.shape[0], y.m, y.q)

    subfilters = []
    for j in range(1, partition.p):
        y_j = y.at(partition.knot(j))
        y_next = y.at(partition.knot(j + 1))
        try:
            cov = estimator(j, x_hat, y_j, y_next)
            if cov.e_zw.shape != (dims[0], dims[1]):
                raise InvalidInputError(f"E_zw 维度应为 {dims[:2]}，实际 {cov.e_zw.shape}")
            b = solve_b(cov)
        except NumericalFailureError as e:
            raise NumericalFailureError(e.detail, j=j) from e

        residual = residual_value(cov, b)
        subfilters.append(SubFilter(j=j, b=b, x_hat_knot=x_hat, y_knot=y_j, residual=residual, cov=cov))
        logger.debug(f"[构建 j={j}] 节点 {partition.knot(j)}..{partition.knot(j + 1)}，残差 {residual:.6g}")
        x_hat = subfilters[-1].apply(y_next)

    logger.info(f"[构建] p={partition.p}，子滤波器 {len(subfilters)} 个，维度 m={dims[0]} n={dims[1]} q={dims[2]}")
    return PiecewiseFilter(partition=partition, subfilters=tuple(subfilters), dims=dims)


def apply_piecewise(f: PiecewiseFilter, y_k, k: int) -> np.ndarray:
    """X_hat^(k) = X_hat_j + B_j (Y^(k) - Y_j)，j = interval_of(k)"""
    return f.apply(y_k, k)


# ======================== 基线滤波器 ========================

def gol_estimate(x_ref_est, y_k) -> Tuple[np.ndarray, np.ndarray]:
    """单个信号的 GOL 滤波器 W_k = E_XY E_YY^+，估计 W_k Y^(k)"""
    x_ref_est = as_matrix(x_ref_est, "X~")
    y_k = as_matrix(y_k, "Y_k")
    if x_ref_est.shape[1] != y_k.shape[1]:
        raise InvalidInputError(f"列数不一致: {x_ref_est.shape[1]} 与 {y_k.shape[1]}")
    w = sample_cov(x_ref_est, y_k) @ pinv(sample_cov(y_k, y_k))
    return w, w @ y_k


def gol_estimate_set(
    x_ref_ests: Sequence[np.ndarray],
    ys: Sequence[np.ndarray],
    threads: Optional[int] = None,
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """对每个信号各自构造 GOL 滤波器 (N 次伪逆)"""
    if len(x_ref_ests) != len(ys):
        raise InvalidInputError(f"参考估计个数 {len(x_ref_ests)} 与观测个数 {len(ys)} 不一致")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(gol_estimate, x_ref_ests, ys))


def averaging_estimate(
    x_ref_ests: Sequence[np.ndarray],
    ys: Sequence[np.ndarray],
) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    平均多项式滤波器: 整个信号集只用一个 W
        E_XY = (1/N) sum_k X~^(k) Y^(k)T，E_YY = (1/N) sum_k Y^(k) Y^(k)T
    """
    if len(x_ref_ests) != len(ys) or not ys:
        raise InvalidInputError(f"参考估计个数 {len(x_ref_ests)} 与观测个数 {len(ys)} 不一致或为空")
    xs = [as_matrix(x, f"X~^({k + 1})") for k, x in enumerate(x_ref_ests)]
    ys = [as_matrix(y, f"Y^({k + 1})") for k, y in enumerate(ys)]
    if len({x.shape for x in xs}) > 1 or len({y.shape for y in ys}) > 1:
        raise InvalidInputError("信号集中矩阵维度不一致")
    if xs[0].shape[1] != ys[0].shape[1]:
        raise InvalidInputError(f"列数不一致: {xs[0].shape[1]} 与 {ys[0].shape[1]}")

    count = len(ys)
    e_xy = sum(x @ y.T for x, y in zip(xs, ys)) / count
    e_yy = sum(y @ y.T for y in ys) / count
    w = e_xy @ pinv(e_yy)
    return w, [w @ y for y in ys]
