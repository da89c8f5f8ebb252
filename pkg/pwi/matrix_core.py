"""
稠密实矩阵基础运算
Moore-Penrose 伪逆、对称半正定平方根、Frobenius 范数、迹积
"""

import threading
import logging
from contextlib import contextmanager
from typing import Iterator, List, Optional

import numpy as np
import scipy.linalg

from .config import get_settings
from .errors import InvalidInputError, NumericalFailureError

logger = logging.getLogger(__name__)


# ======================== 输入校验 ========================

def as_matrix(a, name: str = "A") -> np.ndarray:
    """转换为二维 float64 矩阵并检查有限性"""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} 必须是二维矩阵，实际维度 {arr.ndim}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidInputError(f"{name} 行数和列数必须为正，实际 {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} 含有 NaN 或 Inf")
    return arr


def require_same_shape(a: np.ndarray, b: np.ndarray, what: str):
    """检查两个矩阵维度一致"""
    if a.shape != b.shape:
        raise InvalidInputError(f"{what} 维度不一致: {a.shape} 与 {b.shape}")


# ======================== 伪逆调用计数 ========================

class PinvMeter:
    """伪逆调用计数器"""

    def __init__(self):
        self.calls = 0


_meter_lock = threading.Lock()
_active_meters: List[PinvMeter] = []


@contextmanager
def pinv_meter() -> Iterator[PinvMeter]:
    """
    统计作用域内的 pinv 调用次数

    计数器是进程级的：作用域内任意线程的调用都会计入，
    嵌套的计数器各自累加。
    """
    meter = PinvMeter()
    with _meter_lock:
        _active_meters.append(meter)
    try:
        yield meter
    finally:
        with _meter_lock:
            _active_meters.remove(meter)


def _count_pinv_call():
    with _meter_lock:
        for meter in _active_meters:
            meter.calls += 1


# ======================== 基础运算 ========================

def default_rel_tol(shape) -> float:
    """默认截断容差 1e-12 * max(m, n)，可由配置覆盖"""
    configured = get_settings().pinv_rel_tol
    if configured is not None:
        return configured
    return 1e-12 * max(shape)


def _svd(a: np.ndarray):
    try:
        return scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        logger.warning(f"gesdd 未收敛，改用 gesvd 重试 (shape={a.shape})")
    try:
        return scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd")
    except np.linalg.LinAlgError as e:
        raise NumericalFailureError(f"SVD 不收敛: {e}")


def pinv(a, rel_tol: Optional[float] = None) -> np.ndarray:
    """
    Moore-Penrose 伪逆 (SVD 实现)

    奇异值 s_i <= rel_tol * s_max 视为零；零矩阵返回转置形状的零矩阵。
    """
    a = as_matrix(a)
    if rel_tol is None:
        rel_tol = default_rel_tol(a.shape)
    if not 0.0 < rel_tol < 1.0:
        raise InvalidInputError(f"rel_tol 必须在 (0, 1) 内，实际 {rel_tol}")

    _count_pinv_call()

    u, s, vt = _svd(a)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[1], a.shape[0]))

    keep = s > rel_tol * s[0]
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (vt.T * s_inv) @ u.T


def symmetrize(s: np.ndarray) -> np.ndarray:
    """(S + S^T) / 2"""
    return 0.5 * (s + s.T)


def _check_symmetric(s: np.ndarray, name: str) -> np.ndarray:
    if s.shape[0] != s.shape[1]:
        raise InvalidInputError(f"{name} 必须是方阵，实际 {s.shape}")
    scale = np.linalg.norm(s)
    if np.linalg.norm(s - s.T) > get_settings().symmetry_tol * max(scale, np.finfo(float).tiny):
        raise InvalidInputError(f"{name} 不对称")
    return symmetrize(s)


def psd_sqrt(s, clamp_tol: Optional[float] = None) -> np.ndarray:
    """
    对称半正定矩阵的平方根 (特征分解)

    绝对值不超过 clamp_tol * ||S|| 的负特征值截为零，更负的特征值视为输入错误。
    """
    s = _check_symmetric(as_matrix(s, "S"), "S")
    if clamp_tol is None:
        clamp_tol = get_settings().psd_clamp_tol

    w, q = scipy.linalg.eigh(s)
    scale = np.max(np.abs(w)) if w.size else 0.0
    if w.size and w[0] < -clamp_tol * scale:
        raise InvalidInputError(f"S 不是半正定矩阵，最小特征值 {w[0]:.3e}")
    w = np.clip(w, 0.0, None)
    return symmetrize((q * np.sqrt(w)) @ q.T)


def psd_part(s) -> np.ndarray:
    """对称矩阵在半正定锥上的投影 (负特征值置零)"""
    s = symmetrize(as_matrix(s, "S"))
    w, q = scipy.linalg.eigh(s)
    return symmetrize((q * np.clip(w, 0.0, None)) @ q.T)


def fro_norm_sq(a) -> float:
    """Frobenius 范数的平方"""
    a = as_matrix(a)
    return float(np.sum(a * a))


def trace_product(a, b) -> float:
    """trace(A B^T)"""
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    require_same_shape(a, b, "trace_product")
    return float(np.sum(a * b))


def spectral_norm(a) -> float:
    """谱范数 (最大奇异值)"""
    a = as_matrix(a)
    return float(scipy.linalg.svdvals(a)[0])
