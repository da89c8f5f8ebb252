"""
错误类型
每个错误携带 detail 和 exit_code，命令行入口据此返回退出码
"""

from typing import Optional


class PwiError(Exception):
    """基础错误"""

    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InvalidInputError(PwiError, ValueError):
    """输入不合法 (维度不一致、非有限值等)"""


class InvalidPartitionError(InvalidInputError):
    """节点划分不合法"""


class GridIndexError(PwiError, IndexError):
    """时间网格下标越界"""


class ConfigurationError(PwiError):
    """配置错误 (未知噪声模型、缺少参数等)"""


class StorageError(PwiError, OSError):
    """文件读写错误"""

    exit_code = 2


class NumericalFailureError(PwiError):
    """数值计算失败 (SVD 不收敛等)"""

    exit_code = 3

    def __init__(self, detail: str, j: Optional[int] = None):
        if j is not None:
            detail = f"[子滤波器 j={j}] {detail}"
        super().__init__(detail)
        self.j = j
