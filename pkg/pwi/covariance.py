"""
协方差估计
由实现矩阵估计增量对 (z_j, w_j) 的 E_zw、E_ww、E_zz，
相邻列平均的参考信号重构，以及加性噪声情形下的 E_zw 表达式
"""

import logging
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from .errors import InvalidInputError
from .matrix_core import as_matrix, pinv, psd_part, symmetrize, trace_product

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CovPair:
    """一个子滤波器的协方差三元组"""

    e_zw: np.ndarray  # m x n
    e_ww: np.ndarray  # n x n
    e_zz: np.ndarray  # m x m

    def __post_init__(self):
        e_zw = as_matrix(self.e_zw, "E_zw")
        e_ww = as_matrix(self.e_ww, "E_ww")
        e_zz = as_matrix(self.e_zz, "E_zz")
        m, n = e_zw.shape
        if e_ww.shape != (n, n) or e_zz.shape != (m, m):
            raise InvalidInputError(
                f"协方差维度不一致: E_zw {e_zw.shape}, E_ww {e_ww.shape}, E_zz {e_zz.shape}"
            )
        object.__setattr__(self, "e_zw", e_zw)
        object.__setattr__(self, "e_ww", e_ww)
        object.__setattr__(self, "e_zz", e_zz)

    @property
    def m(self) -> int:
        return self.e_zw.shape[0]

    @property
    def n(self) -> int:
        return self.e_zw.shape[1]

    def scaled(self, c: float) -> "CovPair":
        return CovPair(c * self.e_zw, c * self.e_ww, c * self.e_zz)


# ======================== 基本估计 ========================

def reconstruct_reference(x) -> np.ndarray:
    """
    由奇数列重构参考信号
    奇数列 (从 1 计) 照抄，偶数列取左右相邻列的平均，最后一列等于前一列
    """
    x = as_matrix(x, "X")
    q = x.shape[1]
    if q < 2:
        raise InvalidInputError(f"重构至少需要 2 列，实际 {q}")
    out = x.copy()
    out[:, 1:q - 1:2] = 0.5 * (x[:, 0:q - 2:2] + x[:, 2:q:2])
    out[:, -1] = out[:, -2]
    return out


def sample_cov(a, b, normalize: bool = True) -> np.ndarray:
    """样本协方差 A B^T (normalize 时除以 q)"""
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    if a.shape[1] != b.shape[1]:
        raise InvalidInputError(f"列数不一致: {a.shape[1]} 与 {b.shape[1]}")
    product = a @ b.T
    if normalize:
        product /= a.shape[1]
    return product


def build_cov_pair(x_next_est, x_hat_j, y_next, y_j, normalize: bool = True) -> CovPair:
    """
    由参考估计与观测构造 CovPair
    Z = X_next_est - X_hat_j，W = Y_next - Y_j
    """
    x_next_est = as_matrix(x_next_est, "X_next_est")
    x_hat_j = as_matrix(x_hat_j, "X_hat_j")
    y_next = as_matrix(y_next, "Y_next")
    y_j = as_matrix(y_j, "Y_j")
    if x_next_est.shape != x_hat_j.shape or y_next.shape != y_j.shape:
        raise InvalidInputError("增量两端的维度不一致")
    if x_hat_j.shape[1] != y_j.shape[1]:
        raise InvalidInputError(f"参考与观测的实现数不一致: {x_hat_j.shape[1]} 与 {y_j.shape[1]}")

    z = x_next_est - x_hat_j
    w = y_next - y_j
    return CovPair(
        e_zw=sample_cov(z, w, normalize),
        e_ww=symmetrize(sample_cov(w, w, normalize)),
        e_zz=symmetrize(sample_cov(z, z, normalize)),
    )


def cov_zw_additive(y_j, y_next, x_hat_j, xi_power: float, sign: int = 1,
                    normalize: bool = True) -> np.ndarray:
    """
    加性噪声 Y = X + xi 下的 E_zw

        E_zw = E[y_{j+1} dy^T] - E[xi_{j+1} dy^T] - E[x_hat_j dy^T]

    不可观测的 E[xi_{j+1} dy^T] 按 Holder 不等式取
    sign * sqrt(E[xi^2]) * sqrt(E[dy_c^2])，dy_c 为 dy 的第 c 个分量
    """
    y_j = as_matrix(y_j, "Y_j")
    y_next = as_matrix(y_next, "Y_next")
    x_hat_j = as_matrix(x_hat_j, "X_hat_j")
    if y_j.shape != y_next.shape or x_hat_j.shape != y_j.shape:
        raise InvalidInputError(
            f"加性噪声模型要求维度一致: Y_j {y_j.shape}, Y_next {y_next.shape}, X_hat_j {x_hat_j.shape}"
        )
    if not np.isfinite(xi_power) or xi_power < 0:
        raise InvalidInputError(f"xi_power 必须非负，实际 {xi_power}")
    if sign not in (1, -1):
        raise InvalidInputError(f"sign 必须为 +1 或 -1，实际 {sign}")

    dy = y_next - y_j
    q = dy.shape[1]
    dy_rms = np.sqrt(np.mean(dy * dy, axis=1))
    cross = sign * np.sqrt(xi_power) * np.broadcast_to(dy_rms, (x_hat_j.shape[0], dy.shape[0]))
    if not normalize:
        cross = cross * q
    return sample_cov(y_next, dy, normalize) - cross - sample_cov(x_hat_j, dy, normalize)


def residual_value(cov: CovPair, b: Optional[np.ndarray] = None) -> float:
    """
    子滤波器目标函数的最小值
        trace(E_zz) - trace(E_zw E_ww^+ E_zw^T)
    已知 B = E_zw E_ww^+ 时直接用 trace(B E_zw^T)，不再计算伪逆
    """
    if b is None:
        b = cov.e_zw @ pinv(cov.e_ww)
    total = float(np.trace(cov.e_zz))
    return min(max(total - explained_value(cov, b), 0.0), total)


def explained_value(cov: CovPair, b: np.ndarray) -> float:
    """trace(E_zw E_ww^+ E_zw^T)"""
    return trace_product(b, cov.e_zw)


# ======================== 估计策略 ========================

class CovarianceEstimator(Protocol):
    """第 j 个区间的协方差估计策略"""

    def __call__(self, j: int, x_hat_j: np.ndarray, y_j: np.ndarray,
                 y_next: np.ndarray) -> CovPair:
        ...


class SampledEstimator:
    """由节点 t_{j+1} 处参考信号的样本估计 X~_{j+1}"""

    def __init__(self, knot_reference_estimates: Sequence[np.ndarray], normalize: bool = True):
        self.references = [as_matrix(r, f"X~_{j + 2}") for j, r in enumerate(knot_reference_estimates)]
        self.normalize = normalize

    def __call__(self, j, x_hat_j, y_j, y_next) -> CovPair:
        if not 1 <= j <= len(self.references):
            raise InvalidInputError(f"缺少节点 {j + 1} 的参考估计 (共 {len(self.references)} 个)")
        return build_cov_pair(self.references[j - 1], x_hat_j, y_next, y_j, self.normalize)


class AdditiveNoiseEstimator:
    """加性噪声下只依赖观测的估计"""

    def __init__(self, xi_power: float, sign: int = 1, normalize: bool = True):
        self.xi_power = xi_power
        self.sign = sign
        self.normalize = normalize

    def __call__(self, j, x_hat_j, y_j, y_next) -> CovPair:
        w = y_next - y_j
        e_zw = cov_zw_additive(y_j, y_next, x_hat_j, self.xi_power, self.sign, self.normalize)
        # E[(y_{j+1} - x_hat_j)(.)^T] 扣除噪声功率后投影到半正定锥
        u = y_next - x_hat_j
        noise = self.xi_power * np.eye(u.shape[0])
        if not self.normalize:
            noise *= u.shape[1]
        e_zz = psd_part(sample_cov(u, u, self.normalize) - noise)
        return CovPair(e_zw=e_zw, e_ww=symmetrize(sample_cov(w, w, self.normalize)), e_zz=e_zz)


class PriorIntervalEstimator:
    """
    以已知的节点估计 X_hat_j 代替未知的 x(t_{j+1})
    此时 Z~ = 0，E_zw = 0，子滤波器退化为保持 X_hat_j
    """

    def __init__(self, normalize: bool = True):
        self.normalize = normalize

    def __call__(self, j, x_hat_j, y_j, y_next) -> CovPair:
        return build_cov_pair(x_hat_j, x_hat_j, y_next, y_j, self.normalize)
