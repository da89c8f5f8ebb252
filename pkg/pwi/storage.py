"""
文件格式
矩阵文本文件、信号集目录与 CSV 归档、PGM 图像、滤波器容器文件、报告与清单

矩阵文本格式: 第一行 "rows cols"，之后每行一行矩阵，按 %.17g 写出，读回逐位一致。
"""

import json
import logging
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from PIL import Image

from .analysis import BoundReport, ConvergenceRow, ErrorReport
from .config import get_settings
from .errors import InvalidInputError, PwiError, StorageError
from .filters import PiecewiseFilter, SubFilter
from .matrix_core import as_matrix
from .signal_model import Partition, SignalSet, TimeGrid

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.17g"
GRID_FILE = "grid.txt"
FILTER_MAGIC = "pwi-filter"


def _fmt(v: float) -> str:
    return FLOAT_FORMAT % v


def _matrix_lines(a: np.ndarray) -> List[str]:
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    lines.extend(" ".join(_fmt(v) for v in row) for row in a)
    return lines


def _parse_matrix(header: str, rows: Sequence[str], where: str) -> np.ndarray:
    try:
        n_rows, n_cols = (int(t) for t in header.split())
    except ValueError:
        raise StorageError(f"{where}: 矩阵头应为 'rows cols'，实际 '{header.strip()}'")
    if n_rows <= 0 or n_cols <= 0:
        raise StorageError(f"{where}: 矩阵维度必须为正，实际 {n_rows} x {n_cols}")
    if len(rows) != n_rows:
        raise StorageError(f"{where}: 期望 {n_rows} 行，实际 {len(rows)} 行")
    try:
        a = np.array([r.split() for r in rows], dtype=np.float64)
    except ValueError as e:
        raise StorageError(f"{where}: 无法解析矩阵元素: {e}")
    if a.shape != (n_rows, n_cols):
        raise StorageError(f"{where}: 元素个数与矩阵头 {n_rows} x {n_cols} 不一致")
    if not np.all(np.isfinite(a)):
        raise StorageError(f"{where}: 矩阵含有 NaN 或 Inf")
    return a


def _write_text(path: Path, lines: Sequence[str]):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise StorageError(f"写入 {path} 失败: {e}")


def _read_lines(path: Path) -> List[str]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise StorageError(f"读取 {path} 失败: {e}")
    return [line for line in text.splitlines() if line.strip()]


# ======================== 矩阵 ========================

def write_matrix(path: PathLike, a) -> Path:
    """写出单个矩阵文件"""
    path = Path(path)
    _write_text(path, _matrix_lines(as_matrix(a, path.name)))
    return path


def read_matrix(path: PathLike) -> np.ndarray:
    """读取单个矩阵文件"""
    path = Path(path)
    lines = _read_lines(path)
    if not lines:
        raise StorageError(f"{path}: 文件为空")
    return _parse_matrix(lines[0], lines[1:], str(path))


# ======================== 信号集 ========================

def _k_file(k: int) -> str:
    return f"k{k:04d}.txt"


def save_signal_set(directory: PathLike, s: SignalSet) -> Path:
    """信号集目录: grid.txt 加每个时间点一个 kNNNN.txt"""
    directory = Path(directory)
    write_matrix(directory / GRID_FILE, s.grid.taus.reshape(-1, 1))
    for k in range(1, s.n_points + 1):
        write_matrix(directory / _k_file(k), s.at(k))
    logger.info(f"[存储] 信号集 N={s.n_points} m={s.m} q={s.q} -> {directory}")
    return directory


def load_signal_set(directory: PathLike) -> SignalSet:
    """读取信号集目录"""
    directory = Path(directory)
    if not directory.is_dir():
        raise StorageError(f"信号集目录不存在: {directory}")

    files = {}
    for f in directory.glob("k*.txt"):
        try:
            files[int(f.stem[1:])] = f
        except ValueError:
            continue
    if not files:
        raise StorageError(f"{directory} 中没有 kNNNN.txt 文件")
    n_points = len(files)
    if sorted(files) != list(range(1, n_points + 1)):
        raise StorageError(f"{directory} 中的时间点文件编号不连续")

    grid_path = directory / GRID_FILE
    try:
        grid = TimeGrid(read_matrix(grid_path).ravel()) if grid_path.exists() else TimeGrid.uniform(n_points)
        return SignalSet.from_matrices(grid, [read_matrix(files[k]) for k in range(1, n_points + 1)])
    except InvalidInputError as e:
        raise StorageError(f"{directory}: {e.detail}")


def save_signal_set_csv(path: PathLike, s: SignalSet) -> Path:
    """单文件 CSV 归档 (k,row,col,value)，时间网格写入同名 .grid.txt"""
    path = Path(path)
    k, row, col = np.meshgrid(
        np.arange(1, s.n_points + 1), np.arange(1, s.m + 1), np.arange(1, s.q + 1), indexing="ij"
    )
    df = pd.DataFrame({
        "k": k.ravel(),
        "row": row.ravel(),
        "col": col.ravel(),
        "value": s.ensembles.ravel(),
    })
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise StorageError(f"写入 {path} 失败: {e}")
    write_matrix(_grid_sidecar(path), s.grid.taus.reshape(-1, 1))
    return path


def load_signal_set_csv(path: PathLike) -> SignalSet:
    """读取 CSV 归档"""
    path = Path(path)
    try:
        df = pd.read_csv(
            path,
            dtype={"k": np.int64, "row": np.int64, "col": np.int64, "value": np.float64},
            float_precision="round_trip",
        )
    except (OSError, ValueError) as e:
        raise StorageError(f"读取 {path} 失败: {e}")
    missing = {"k", "row", "col", "value"} - set(df.columns)
    if missing:
        raise StorageError(f"{path}: 缺少列 {sorted(missing)}")
    if df.empty or df[["k", "row", "col"]].min().min() < 1:
        raise StorageError(f"{path}: 下标必须从 1 开始")

    n_points, m, q = (int(df[c].max()) for c in ("k", "row", "col"))
    if len(df) != n_points * m * q or df.duplicated(["k", "row", "col"]).any():
        raise StorageError(f"{path}: 归档不完整或有重复条目 (期望 {n_points}x{m}x{q})")
    ens = np.empty((n_points, m, q))
    ens[df["k"].to_numpy() - 1, df["row"].to_numpy() - 1, df["col"].to_numpy() - 1] = df["value"].to_numpy()

    sidecar = _grid_sidecar(path)
    try:
        grid = TimeGrid(read_matrix(sidecar).ravel()) if sidecar.exists() else TimeGrid.uniform(n_points)
        return SignalSet(grid, ens)
    except InvalidInputError as e:
        raise StorageError(f"{path}: {e.detail}")


def _grid_sidecar(path: Path) -> Path:
    return path.with_name(path.stem + ".grid.txt")


def load_pgm_set(directory: PathLike) -> SignalSet:
    """目录中按文件名排序的 *.pgm，每幅图像作为一个时间点的矩阵，网格为 1..N"""
    directory = Path(directory)
    paths = sorted(directory.glob("*.pgm"))
    if not paths:
        raise StorageError(f"{directory} 中没有 .pgm 文件")
    mats = []
    for p in paths:
        try:
            with Image.open(p) as img:
                mats.append(np.asarray(img, dtype=np.float64))
        except OSError as e:
            raise StorageError(f"读取图像 {p} 失败: {e}")
    try:
        return SignalSet.from_matrices(TimeGrid.uniform(len(mats)), mats)
    except InvalidInputError as e:
        raise StorageError(f"{directory}: {e.detail}")


# ======================== 滤波器 ========================

def save_filter(path: PathLike, f: PiecewiseFilter) -> Path:
    """
    滤波器容器文件

        pwi-filter <schema>
        dims m n q
        knots N j_1 ... j_p
        subfilter j residual   (p-1 次)
        <B_j> <X_hat_j> <Y_j>  (各自带矩阵头)
    """
    m, n, q = f.dims
    lines = [
        f"{FILTER_MAGIC} {get_settings().schema_version}",
        f"dims {m} {n} {q}",
        "knots " + " ".join(str(k) for k in (f.partition.n_points,) + f.partition.knot_indices),
    ]
    for s in f.subfilters:
        lines.append(f"subfilter {s.j} {_fmt(s.residual)}")
        for a in (s.b, s.x_hat_knot, s.y_knot):
            lines.extend(_matrix_lines(a))
    path = Path(path)
    _write_text(path, lines)
    logger.info(f"[存储] 滤波器 p={f.partition.p} -> {path}")
    return path


def load_filter(path: PathLike) -> PiecewiseFilter:
    """读取滤波器容器文件"""
    path = Path(path)
    lines = iter(_read_lines(path))
    where = str(path)
    try:
        magic = next(lines).split()
        if not magic or magic[0] != FILTER_MAGIC:
            raise StorageError(f"{where}: 不是滤波器文件")
        dims_tokens = next(lines).split()
        knot_tokens = next(lines).split()
        if dims_tokens[0] != "dims" or knot_tokens[0] != "knots":
            raise StorageError(f"{where}: 缺少 dims/knots 行")
        dims = tuple(int(t) for t in dims_tokens[1:4])
        n_points, *knots = (int(t) for t in knot_tokens[1:])
        partition = Partition.from_knots(knots, n_points)

        subfilters = []
        for _ in range(partition.p - 1):
            tag, j, residual = next(lines).split()
            if tag != "subfilter":
                raise StorageError(f"{where}: 期望 subfilter 行，实际 '{tag}'")
            b, x_hat, y_j = [_next_matrix(lines, where) for _ in range(3)]
            subfilters.append(SubFilter(j=int(j), b=b, x_hat_knot=x_hat, y_knot=y_j, residual=float(residual)))
        return PiecewiseFilter(partition=partition, subfilters=tuple(subfilters), dims=dims)
    except StopIteration:
        raise StorageError(f"{where}: 文件被截断")
    except StorageError:
        raise
    except (PwiError, ValueError) as e:
        raise StorageError(f"{where}: 滤波器文件格式错误: {getattr(e, 'detail', e)}")


def _next_matrix(lines: Iterator[str], where: str) -> np.ndarray:
    header = next(lines)
    n_rows = int(header.split()[0])
    rows = [next(lines) for _ in range(n_rows)]
    return _parse_matrix(header, rows, where)


# ======================== 报告 ========================

def write_reports_csv(path: PathLike, reports: Sequence[ErrorReport]) -> Path:
    """逐信号误差表 (label, k, error)"""
    records = [
        {"label": r.label, "k": k, "error": e}
        for r in reports
        for k, e in enumerate(r.per_signal, start=1)
    ]
    return _write_frame(Path(path), pd.DataFrame(records, columns=["label", "k", "error"]))


def write_report_json(path: PathLike, reports: Sequence[ErrorReport],
                      bound: Optional[BoundReport] = None) -> Path:
    """完整报告对象"""
    payload = {
        "schema": get_settings().schema_version,
        "reports": [r.model_dump() for r in reports],
    }
    if bound is not None:
        payload["bound"] = bound.model_dump()
    return _write_json(Path(path), payload)


def read_report_json(path: PathLike) -> Tuple[List[ErrorReport], Optional[BoundReport]]:
    data = _read_json(Path(path))
    reports = [ErrorReport(**r) for r in data.get("reports", [])]
    bound = BoundReport(**data["bound"]) if "bound" in data else None
    return reports, bound


def write_convergence_csv(path: PathLike, rows: Sequence[ConvergenceRow]) -> Path:
    """收敛表 (p, mean, max, pinv_calls, wall_time)"""
    columns = ["p", "mean", "max", "pinv_calls", "wall_time"]
    return _write_frame(Path(path), pd.DataFrame([r.model_dump() for r in rows], columns=columns))


def write_manifest(path: PathLike, data: Dict) -> Path:
    """运行清单，带 schema 版本字段"""
    return _write_json(Path(path), {"schema": get_settings().schema_version, **data})


def read_manifest(path: PathLike) -> Dict:
    return _read_json(Path(path))


def _write_frame(path: Path, df: pd.DataFrame) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise StorageError(f"写入 {path} 失败: {e}")
    return path


def _write_json(path: Path, payload: Dict) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8")
    except OSError as e:
        raise StorageError(f"写入 {path} 失败: {e}")
    return path


def _read_json(path: Path) -> Dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise StorageError(f"读取 {path} 失败: {e}")
    except json.JSONDecodeError as e:
        raise StorageError(f"{path} 不是合法的 JSON: {e}")
