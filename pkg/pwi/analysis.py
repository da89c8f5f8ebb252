"""
误差分析
逐信号误差、误差上界、收敛性实验、基线比较与伪逆调用计数
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .covariance import (
    AdditiveNoiseEstimator,
    CovPair,
    PriorIntervalEstimator,
    SampledEstimator,
    reconstruct_reference,
    residual_value,
)
from .errors import ConfigurationError, InvalidInputError
from .filters import PiecewiseFilter, averaging_estimate, build_piecewise, gol_estimate_set
from .matrix_core import as_matrix, fro_norm_sq, pinv_meter, require_same_shape, spectral_norm
from .signal_model import (
    LipschitzEstimates,
    Partition,
    SignalSet,
    TimeGrid,
    make_uniform_partition,
)

logger = logging.getLogger(__name__)

# 报告中的尺度约定
RAW_SCALE = "squared Frobenius norm per signal, summed over q realizations"
OMEGA_SCALE = "time-weighted mean of per-signal error divided by q"


# ======================== 报告模型 ========================

class ErrorReport(BaseModel):
    """一个滤波器在整个信号集上的误差"""

    label: str
    per_signal: List[float]
    mean: float
    max: float
    pinv_calls: int
    wall_time: float
    scale: str = RAW_SCALE

    @model_validator(mode="after")
    def _check_aggregates(self) -> "ErrorReport":
        if not self.per_signal:
            raise ValueError("per_signal 不能为空")
        if any(e < 0 for e in self.per_signal):
            raise ValueError("误差必须非负")
        mean = float(np.mean(self.per_signal))
        top = float(np.max(self.per_signal))
        if not np.isclose(self.mean, mean, rtol=1e-12, atol=0.0) or not np.isclose(self.max, top, rtol=1e-12, atol=0.0):
            raise ValueError("mean/max 与 per_signal 不一致")
        return self

    @classmethod
    def from_errors(cls, label: str, errors: Sequence[float], pinv_calls: int,
                    wall_time: float) -> "ErrorReport":
        errors = [float(e) for e in errors]
        return cls(
            label=label,
            per_signal=errors,
            mean=float(np.mean(errors)),
            max=float(np.max(errors)),
            pinv_calls=pinv_calls,
            wall_time=wall_time,
        )


class IntervalTerm(BaseModel):
    """上界中第 j 个区间的各项"""

    lipschitz_term: float  # (lambda_j + gamma_j ||B_j||^2) dt_j
    trace_zz: float        # ||E_zz^{1/2}||^2
    explained: float       # ||E_zw (E_ww^{1/2})^+||^2

    @property
    def total(self) -> float:
        return self.lipschitz_term + max(self.trace_zz - self.explained, 0.0)


class BoundReport(BaseModel):
    """误差上界与时间平均的实际误差"""

    bound: float = Field(ge=0.0)
    per_interval_terms: List[IntervalTerm]
    empirical_error: float
    empirical_error_raw: float
    norm: Literal["spectral", "frobenius"] = "spectral"
    scale: str = OMEGA_SCALE
    raw_scale: str = RAW_SCALE


class ConvergenceRow(BaseModel):
    """收敛性实验的一行"""

    p: int
    mean: float
    max: float
    pinv_calls: int
    wall_time: float


class BuildProtocol(BaseModel):
    """构造滤波器的初值、参考估计与协方差估计方式"""

    initial: Literal["reconstruct", "oracle", "given"] = "reconstruct"
    references: Literal["reconstruct", "oracle"] = "reconstruct"
    estimator: Literal["sampled", "additive", "prior"] = "sampled"
    xi_power: Optional[float] = None
    sign: Literal[1, -1] = 1
    normalize: bool = True
    threads: Optional[int] = Field(None, ge=1)


# ======================== 误差 ========================

def per_signal_error(x_k, x_hat_k) -> float:
    """||X^(k) - X_hat^(k)||_F^2"""
    x_k = as_matrix(x_k, "X_k")
    x_hat_k = as_matrix(x_hat_k, "X_hat_k")
    require_same_shape(x_k, x_hat_k, "per_signal_error")
    return fro_norm_sq(x_k - x_hat_k)


def set_errors(x: SignalSet, estimates: Sequence[np.ndarray], threads: Optional[int] = None) -> List[float]:
    """整个信号集的逐信号误差"""
    if len(estimates) != x.n_points:
        raise InvalidInputError(f"估计个数 {len(estimates)} 与 N={x.n_points} 不一致")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(per_signal_error, x.matrices(), estimates))


def time_average(values: Sequence[float], grid: TimeGrid) -> float:
    """按网格权重做时间平均"""
    return float(np.dot(grid.weights(), np.asarray(values, dtype=np.float64)))


def error_bound(
    lip: LipschitzEstimates,
    filt: PiecewiseFilter,
    covs: Optional[Sequence[CovPair]],
    delta_t: Sequence[float],
    per_signal_errors: Sequence[float],
    grid: TimeGrid,
    norm: Literal["spectral", "frobenius"] = "spectral",
) -> BoundReport:
    """
    误差上界
        max_j [(lambda_j + gamma_j ||B_j||^2) dt_j + ||E_zz^{1/2}||^2 - ||E_zw (E_ww^{1/2})^+||^2]
    以及时间平均的实际误差 (逐信号误差除以 q)

    covs 为 None 时使用构造时保存在子滤波器中的协方差。
    """
    count = len(filt.subfilters)
    if covs is None:
        covs = [s.cov for s in filt.subfilters]
        if any(c is None for c in covs):
            raise InvalidInputError("滤波器未保存协方差，需要显式提供 covs")
    if not (len(lip.lambdas) == len(covs) == len(delta_t) == count):
        raise InvalidInputError(
            f"区间数不一致: lambda {len(lip.lambdas)}, covs {len(covs)}, dt {len(delta_t)}, 子滤波器 {count}"
        )
    if len(per_signal_errors) != grid.size:
        raise InvalidInputError(f"误差个数 {len(per_signal_errors)} 与网格长度 {grid.size} 不一致")

    terms = []
    for sub, cov, lam, gam, dt in zip(filt.subfilters, covs, lip.lambdas, lip.gammas, delta_t):
        if norm == "spectral":
            b_norm_sq = spectral_norm(sub.b) ** 2
        else:
            b_norm_sq = fro_norm_sq(sub.b)
        trace_zz = float(np.trace(cov.e_zz))
        terms.append(IntervalTerm(
            lipschitz_term=(lam + gam * b_norm_sq) * float(dt),
            trace_zz=trace_zz,
            explained=trace_zz - residual_value(cov, sub.b),
        ))

    raw = time_average(per_signal_errors, grid)
    q = filt.dims[2]
    return BoundReport(
        bound=max(t.total for t in terms),
        per_interval_terms=terms,
        empirical_error=raw / q,
        empirical_error_raw=raw,
        norm=norm,
    )


# ======================== 滤波器运行 ========================

def reference_estimates(x: SignalSet, ks: Sequence[int], mode: str) -> List[np.ndarray]:
    """网格点 ks 处的参考估计 X~ (重构或真值)"""
    if mode == "oracle":
        return [np.array(x.at(k)) for k in ks]
    return [reconstruct_reference(x.at(k)) for k in ks]


def initial_estimate(x: SignalSet, protocol: BuildProtocol, x_hat_1=None) -> np.ndarray:
    """X_hat_1: 重构、真值或调用方给定"""
    if protocol.initial == "given":
        if x_hat_1 is None:
            raise ConfigurationError("initial=given 时必须提供 X_hat_1")
        return as_matrix(x_hat_1, "X_hat_1")
    if protocol.initial == "oracle":
        return np.array(x.at(1))
    return reconstruct_reference(x.at(1))


def make_estimator(x: SignalSet, partition: Partition, protocol: BuildProtocol):
    """按协议构造协方差估计策略"""
    if protocol.estimator == "additive":
        if protocol.xi_power is None:
            raise ConfigurationError("estimator=additive 时必须提供 xi_power")
        return AdditiveNoiseEstimator(protocol.xi_power, protocol.sign, protocol.normalize)
    if protocol.estimator == "prior":
        return PriorIntervalEstimator(protocol.normalize)
    refs = reference_estimates(x, partition.knot_indices[1:], protocol.references)
    return SampledEstimator(refs, protocol.normalize)


def run_piecewise(
    x: SignalSet,
    y: SignalSet,
    partition: Partition,
    protocol: BuildProtocol,
    x_hat_1=None,
    label: Optional[str] = None,
) -> Tuple[PiecewiseFilter, List[np.ndarray], ErrorReport]:
    """构造并应用分段滤波器，返回滤波器、估计与误差报告"""
    _check_pair(x, y)
    x_hat_1 = initial_estimate(x, protocol, x_hat_1)
    estimator = make_estimator(x, partition, protocol)

    started = time.perf_counter()
    with pinv_meter() as meter:
        filt = build_piecewise(y, partition, x_hat_1, estimator=estimator)
    estimates = filt.apply_set(y, protocol.threads)
    errors = set_errors(x, estimates, protocol.threads)
    elapsed = time.perf_counter() - started

    report = ErrorReport.from_errors(label or f"piecewise p={partition.p}", errors, meter.calls, elapsed)
    logger.info(f"[分段滤波] p={partition.p}，平均误差 {report.mean:.6g}，最大误差 {report.max:.6g}")
    return filt, estimates, report


def run_gol(x: SignalSet, y: SignalSet, protocol: BuildProtocol,
            label: str = "gol") -> Tuple[List[np.ndarray], ErrorReport]:
    """逐信号 GOL 滤波"""
    _check_pair(x, y)
    refs = reference_estimates(x, range(1, x.n_points + 1), protocol.references)
    started = time.perf_counter()
    with pinv_meter() as meter:
        results = gol_estimate_set(refs, y.matrices(), protocol.threads)
    estimates = [est for _, est in results]
    errors = set_errors(x, estimates, protocol.threads)
    report = ErrorReport.from_errors(label, errors, meter.calls, time.perf_counter() - started)
    logger.info(f"[比较 gol] 平均误差 {report.mean:.6g}")
    return estimates, report


def run_averaging(x: SignalSet, y: SignalSet, protocol: BuildProtocol,
                  label: str = "averaging") -> Tuple[List[np.ndarray], ErrorReport]:
    """平均多项式滤波"""
    _check_pair(x, y)
    refs = reference_estimates(x, range(1, x.n_points + 1), protocol.references)
    started = time.perf_counter()
    with pinv_meter() as meter:
        _, estimates = averaging_estimate(refs, y.matrices())
    errors = set_errors(x, estimates, protocol.threads)
    report = ErrorReport.from_errors(label, errors, meter.calls, time.perf_counter() - started)
    logger.info(f"[比较 averaging] 平均误差 {report.mean:.6g}")
    return estimates, report


def compare_filters(
    x: SignalSet,
    y: SignalSet,
    partition: Partition,
    protocol: BuildProtocol,
    baselines: Sequence[str] = ("gol", "averaging"),
    x_hat_1=None,
) -> List[ErrorReport]:
    """在相同输入和相同参考估计方式下比较分段滤波器与基线"""
    unknown = set(baselines) - {"gol", "averaging"}
    if unknown:
        raise ConfigurationError(f"未知的基线滤波器: {sorted(unknown)}")

    reports = [run_piecewise(x, y, partition, protocol, x_hat_1)[2]]
    if "gol" in baselines:
        reports.append(run_gol(x, y, protocol)[1])
    if "averaging" in baselines:
        reports.append(run_averaging(x, y, protocol)[1])
    return reports


def convergence_study(
    x: SignalSet,
    y: SignalSet,
    schedule: Sequence[Union[int, Partition]],
    protocol: BuildProtocol,
    x_hat_1=None,
) -> List[ConvergenceRow]:
    """对一组 p (或显式划分) 依次构造滤波器并记录误差"""
    rows = []
    for item in schedule:
        if isinstance(item, Partition):
            partition = item
        else:
            partition = make_uniform_partition(x.n_points, int(item))
        _, _, report = run_piecewise(x, y, partition, protocol, x_hat_1)
        rows.append(ConvergenceRow(
            p=partition.p,
            mean=report.mean,
            max=report.max,
            pinv_calls=report.pinv_calls,
            wall_time=report.wall_time,
        ))
        logger.info(f"[收敛] p={partition.p}，平均误差 {report.mean:.6g}")
    return rows


def trend_holds(rows: Sequence[ConvergenceRow], slack: float = 0.05) -> bool:
    """
    误差随 p 增大而下降:
    每一步不超过上一步的 (1 + slack) 倍，且最后一行严格小于第一行
    """
    means = [r.mean for r in rows]
    if len(means) < 2:
        return True
    steps_ok = all(b <= a * (1.0 + slack) for a, b in zip(means, means[1:]))
    return steps_ok and means[-1] < means[0]


def _check_pair(x: SignalSet, y: SignalSet):
    if x.grid != y.grid:
        raise InvalidInputError("X 与 Y 的时间网格不一致")
    if x.q != y.q:
        raise InvalidInputError(f"X 与 Y 的实现数不一致: {x.q} 与 {y.q}")
