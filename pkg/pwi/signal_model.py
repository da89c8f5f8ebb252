"""
信号集模型
时间网格、信号集 (每个时间点一个 m x q 实现矩阵)、节点划分、区间查找、
Lipschitz 常数估计以及合成信号生成

对外接口中的网格下标 k 和区间下标 j 均从 1 开始。
"""

import bisect
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, field_validator, model_validator
from scipy.ndimage import gaussian_filter1d

from .errors import GridIndexError, InvalidInputError, InvalidPartitionError
from .matrix_core import as_matrix

logger = logging.getLogger(__name__)

# 仿真示例中的插值对步长 (N=141 时 p = 5, 8, 15, 29)
SCHEDULE_STEPS = (35, 20, 10, 5)

# 生成器中三角级数的阶数
HARMONICS = 3


# ======================== 数据类型 ========================

@dataclass(frozen=True)
class TimeGrid:
    """时间网格 tau_1 < ... < tau_N"""

    taus: np.ndarray

    def __post_init__(self):
        taus = np.array(self.taus, dtype=np.float64)
        if taus.ndim != 1 or taus.size < 2:
            raise InvalidInputError(f"时间网格至少需要 2 个点，实际 {taus.size}")
        if not np.all(np.isfinite(taus)) or np.any(np.diff(taus) <= 0):
            raise InvalidInputError("时间网格必须严格递增且有限")
        taus.setflags(write=False)
        object.__setattr__(self, "taus", taus)

    @classmethod
    def uniform(cls, n_points: int, start: float = 1.0, step: float = 1.0) -> "TimeGrid":
        """等距网格 start, start+step, ..."""
        return cls(start + step * np.arange(n_points, dtype=np.float64))

    @property
    def size(self) -> int:
        return int(self.taus.size)

    def tau(self, k: int) -> float:
        """第 k 个时间点 (k 从 1 开始)"""
        check_grid_index(k, self.size)
        return float(self.taus[k - 1])

    def is_uniform(self) -> bool:
        d = np.diff(self.taus)
        return bool(np.allclose(d, d[0], rtol=1e-12, atol=0.0))

    def weights(self) -> np.ndarray:
        """
        时间平均的离散权重 (和为 1)
        等距网格取平均，非等距网格用梯形公式
        """
        if self.is_uniform():
            return np.full(self.size, 1.0 / self.size)
        d = np.diff(self.taus)
        w = np.zeros(self.size)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
        return w / (self.taus[-1] - self.taus[0])

    def __eq__(self, other) -> bool:
        return isinstance(other, TimeGrid) and np.array_equal(self.taus, other.taus)

    def __hash__(self):
        return hash(self.taus.tobytes())


@dataclass(frozen=True, eq=False)
class SignalSet:
    """信号集: 网格上每个时间点一个 m x q 矩阵，列为等权实现"""

    grid: TimeGrid
    ensembles: np.ndarray  # 形状 (N, m, q)

    def __post_init__(self):
        ens = np.array(self.ensembles, dtype=np.float64)
        if ens.ndim != 3:
            raise InvalidInputError(f"ensembles 必须是 (N, m, q) 数组，实际维度 {ens.ndim}")
        if ens.shape[0] != self.grid.size:
            raise InvalidInputError(
                f"矩阵个数 {ens.shape[0]} 与网格长度 {self.grid.size} 不一致"
            )
        if ens.shape[1] == 0 or ens.shape[2] == 0:
            raise InvalidInputError(f"矩阵维度必须为正，实际 {ens.shape[1:]}")
        if not np.all(np.isfinite(ens)):
            raise InvalidInputError("信号集含有 NaN 或 Inf")
        ens.setflags(write=False)
        object.__setattr__(self, "ensembles", ens)

    @classmethod
    def from_matrices(cls, grid: TimeGrid, matrices: Sequence[np.ndarray]) -> "SignalSet":
        mats = [as_matrix(m, f"X^({k + 1})") for k, m in enumerate(matrices)]
        shapes = {m.shape for m in mats}
        if len(shapes) > 1:
            raise InvalidInputError(f"信号集中矩阵维度不一致: {sorted(shapes)}")
        return cls(grid, np.stack(mats))

    @property
    def n_points(self) -> int:
        return int(self.ensembles.shape[0])

    @property
    def m(self) -> int:
        return int(self.ensembles.shape[1])

    @property
    def q(self) -> int:
        return int(self.ensembles.shape[2])

    def at(self, k: int) -> np.ndarray:
        """时间点 k 处的矩阵 (k 从 1 开始)"""
        check_grid_index(k, self.n_points)
        return self.ensembles[k - 1]

    def matrices(self) -> List[np.ndarray]:
        return [self.ensembles[i] for i in range(self.n_points)]


class Partition(BaseModel):
    """节点划分 1 = j_1 < ... < j_p = N (网格下标)"""

    model_config = {"frozen": True}

    knot_indices: Tuple[int, ...]
    n_points: int

    @field_validator("n_points")
    @classmethod
    def _check_n_points(cls, v: int) -> int:
        if v < 2:
            raise ValueError(f"网格点数至少为 2，实际 {v}")
        return v

    @model_validator(mode="after")
    def _check_knots(self) -> "Partition":
        knots = self.knot_indices
        if len(knots) < 2:
            raise ValueError(f"节点数 p 至少为 2，实际 {len(knots)}")
        if knots[0] != 1 or knots[-1] != self.n_points:
            raise ValueError(f"节点必须以 1 开始、以 N={self.n_points} 结束，实际 {knots[0]}..{knots[-1]}")
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise ValueError("节点必须严格递增")
        return self

    @classmethod
    def from_knots(cls, knots: Sequence[int], n_points: int) -> "Partition":
        """由显式节点列表构造，校验失败时抛出 InvalidPartitionError"""
        try:
            return cls(knot_indices=tuple(int(k) for k in knots), n_points=n_points)
        except ValueError as e:
            raise InvalidPartitionError(f"节点划分不合法: {e}")

    @property
    def p(self) -> int:
        return len(self.knot_indices)

    def knot(self, j: int) -> int:
        """第 j 个节点的网格下标 (j 从 1 开始)"""
        if not 1 <= j <= self.p:
            raise GridIndexError(f"节点下标 j={j} 超出范围 1..{self.p}")
        return self.knot_indices[j - 1]

    def segment_counts(self) -> List[int]:
        """n_0 = 1, n_1, ..., n_{p-1}，满足 N = n_0 + ... + n_{p-1}"""
        return [1] + [b - a for a, b in zip(self.knot_indices, self.knot_indices[1:])]

    def delta_t(self, grid: TimeGrid) -> np.ndarray:
        """各区间长度 dt_j = t_{j+1} - t_j"""
        if grid.size != self.n_points:
            raise InvalidInputError(f"网格长度 {grid.size} 与划分的 N={self.n_points} 不一致")
        t = grid.taus[np.asarray(self.knot_indices) - 1]
        return np.diff(t)


class LipschitzEstimates(BaseModel):
    """各区间 Lipschitz 常数估计"""

    lambdas: List[float]
    gammas: List[float]
    c1: float

    @model_validator(mode="after")
    def _check_non_negative(self) -> "LipschitzEstimates":
        if len(self.lambdas) != len(self.gammas):
            raise ValueError("lambda 与 gamma 长度不一致")
        if min(self.lambdas + self.gammas + [self.c1]) < 0:
            raise ValueError("Lipschitz 常数必须非负")
        return self


# ======================== 划分与区间 ========================

def check_grid_index(k: int, n_points: int):
    if not 1 <= k <= n_points:
        raise GridIndexError(f"网格下标 k={k} 超出范围 1..{n_points}")


def make_uniform_partition(n_points: int, p: int) -> Partition:
    """
    等距划分: 节点 1, 1+d, 1+2d, ...，d = floor((N-1)/(p-1))
    最后一个节点强制为 N，余数并入最后一段
    """
    if p < 2 or p > n_points:
        raise InvalidPartitionError(f"需要 2 <= p <= N，实际 p={p}, N={n_points}")
    step = (n_points - 1) // (p - 1)
    knots = [1 + i * step for i in range(p - 1)] + [n_points]
    return Partition.from_knots(knots, n_points)


def stepped_partition(n_points: int, step: int) -> Partition:
    """
    步长划分: 节点 1, step, 2*step, ... (小于 N-1 的倍数), N
    N=141 时步长 35/20/10/5 给出 p = 5/8/15/29 的插值对
    """
    if step < 1:
        raise InvalidPartitionError(f"步长必须为正，实际 {step}")
    interior = [k for k in range(step, n_points - 1, step) if k > 1]
    return Partition.from_knots([1] + interior + [n_points], n_points)


def interval_of(k: int, partition: Partition) -> int:
    """
    网格点 k 所在的子滤波器下标 j (1..p-1)
    内部节点归右侧区间，k = N 归最后一个区间
    """
    check_grid_index(k, partition.n_points)
    j = bisect.bisect_right(partition.knot_indices, k)
    return min(j, partition.p - 1)


# ======================== Lipschitz 常数 ========================

def omega_norm_sq(a: np.ndarray) -> float:
    """||A||^2_Omega: 各实现列欧氏范数平方的均值"""
    return float(np.sum(a * a)) / a.shape[1]


def estimate_lipschitz(
    x: SignalSet,
    y: SignalSet,
    partition: Partition,
    x_hat_1: np.ndarray,
) -> LipschitzEstimates:
    """
    在网格上估计 Lipschitz 常数 (取最大比值，网格上精确成立)

    lambda_j = max_k ||X^(k) - X_j||^2_Omega / dt_j
    gamma_j  = max_k ||Y^(k) - Y_{j+1}||^2_Omega / dt_j
    c1       = max_k ||X^(k) - X_hat_1||^2_Omega / dt_1
    k 取遍 [t_j, t_{j+1}] 中的网格点
    """
    if x.grid != y.grid:
        raise InvalidInputError("X 与 Y 的时间网格不一致")
    x_hat_1 = as_matrix(x_hat_1, "X_hat_1")
    if x_hat_1.shape != (x.m, x.q):
        raise InvalidInputError(f"X_hat_1 维度应为 {(x.m, x.q)}，实际 {x_hat_1.shape}")

    dts = partition.delta_t(x.grid)
    lambdas, gammas = [], []
    for j in range(1, partition.p):
        lo, hi = partition.knot(j), partition.knot(j + 1)
        dt = float(dts[j - 1])
        x_j = x.at(lo)
        y_next = y.at(hi)
        lambdas.append(max(omega_norm_sq(x.at(k) - x_j) for k in range(lo, hi + 1)) / dt)
        gammas.append(max(omega_norm_sq(y.at(k) - y_next) for k in range(lo, hi + 1)) / dt)

    lo, hi = partition.knot(1), partition.knot(2)
    c1 = max(omega_norm_sq(x.at(k) - x_hat_1) for k in range(lo, hi + 1)) / float(dts[0])
    return LipschitzEstimates(lambdas=lambdas, gammas=gammas, c1=c1)


# ======================== 合成信号 ========================

def gen_lipschitz_set(
    m: int,
    q: int,
    n_points: int,
    smoothness: float,
    seed: int,
    column_coherence: float = 0.0,
    offset: float = 0.0,
    grid: Optional[TimeGrid] = None,
) -> SignalSet:
    """
    生成光滑随机信号集

    每个实现列是低阶三角级数
        x(u) = c0 + sum_l (a_l cos(2 pi l s u) + b_l sin(2 pi l s u)) / l^2
    其中 u 为归一化时间，s 为 smoothness；s = 0 时信号不随时间变化。
    column_coherence > 0 时系数沿实现下标做高斯平滑，使相邻列相近。
    """
    if min(m, q, n_points) < 1:
        raise InvalidInputError(f"维度必须为正: m={m}, q={q}, N={n_points}")
    if smoothness < 0 or column_coherence < 0:
        raise InvalidInputError("smoothness 与 column_coherence 必须非负")
    grid = grid or TimeGrid.uniform(n_points)
    if grid.size != n_points:
        raise InvalidInputError(f"网格长度 {grid.size} 与 N={n_points} 不一致")

    rng = np.random.default_rng(seed)
    # 系数: (2L+1, m, q)
    coeffs = rng.standard_normal((2 * HARMONICS + 1, m, q))
    if column_coherence > 0 and q > 1:
        coeffs = gaussian_filter1d(coeffs, sigma=column_coherence, axis=2, mode="nearest")
        coeffs /= np.std(coeffs, axis=(1, 2), keepdims=True) + np.finfo(float).tiny

    u = (grid.taus - grid.taus[0]) / (grid.taus[-1] - grid.taus[0])
    basis = [np.ones_like(u)]
    for l in range(1, HARMONICS + 1):
        phase = 2.0 * np.pi * l * smoothness * u
        basis.append(np.cos(phase) / l**2)
        basis.append(np.sin(phase) / l**2)
    basis = np.stack(basis, axis=1)  # (N, 2L+1)

    ensembles = np.einsum("nl,lmq->nmq", basis, coeffs) + offset
    logger.debug(f"[生成] m={m}, q={q}, N={n_points}, s={smoothness}, seed={seed}")
    return SignalSet(grid, ensembles)


def gen_two_cluster_pair(
    m: int,
    q: int,
    n_points: int,
    noise_scale: float,
    seed: int,
    smoothness: float = 1.0,
    offset: float = 2.0,
) -> Tuple[SignalSet, SignalSet]:
    """
    两类观测的信号对
    前半段 Y = X + 噪声，后半段 Y = 行翻转(X) + 噪声
    """
    x = gen_lipschitz_set(m, q, n_points, smoothness, seed, offset=offset)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    observed = np.array(x.ensembles)
    half = n_points // 2
    observed[half:] = observed[half:, ::-1, :]
    observed += noise_scale * rng.standard_normal(observed.shape)
    return x, SignalSet(x.grid, observed)


def duplicate_rows(y: SignalSet, count: int) -> SignalSet:
    """把第 1 行复制到第 2..count+1 行 (构造奇异的 E_ww)"""
    if not 1 <= count < y.m:
        raise InvalidInputError(f"count 必须在 1..{y.m - 1} 内，实际 {count}")
    ens = np.array(y.ensembles)
    ens[:, 1:count + 1, :] = ens[:, :1, :]
    return SignalSet(y.grid, ens)
