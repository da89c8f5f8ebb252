"""
配置管理
全局设置 (环境变量 PWI_* 与 .env) 和单次运行参数
"""

from pathlib import Path
from functools import lru_cache
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator
from pydantic_settings import BaseSettings

from .errors import ConfigurationError


class Settings(BaseSettings):
    """应用配置"""

    model_config = {
        "extra": "ignore",
        "env_prefix": "PWI_",
        "env_file": ".env",
        "env_file_encoding": "utf-8",
    }

    # 数据目录 (generate 未指定 --out 时使用)
    data_dir: str = "./data"

    # 日志级别
    log_level: str = "INFO"

    # 调试模式
    debug: bool = False

    # 默认随机种子
    default_seed: int = 7

    # 伪逆截断容差，None 表示 1e-12 * max(m, n)
    pinv_rel_tol: Optional[float] = None

    # 协方差矩阵负特征值的截断容差 (相对 ||S||)
    psd_clamp_tol: float = 1e-10

    # 对称性检查容差 (相对 ||S||_F)
    symmetry_tol: float = 1e-8

    # 线程池大小，None 表示可用 CPU 数
    threads: Optional[int] = Field(None, ge=1)

    # 清单文件的 schema 版本
    schema_version: str = "pwi/1"


@lru_cache()
def get_settings() -> Settings:
    """获取配置单例"""
    return Settings()


# ======================== 运行参数 ========================

def _split_list(v):
    """逗号分隔的字符串拆成列表"""
    if isinstance(v, str):
        return [t.strip() for t in v.split(",") if t.strip()]
    return v


class RunConfig(BaseModel):
    """
    一次命令运行的参数
    来自 key = value 配置文件与命令行参数的合并，命令行优先
    """

    model_config = {"extra": "forbid", "populate_by_name": True}

    command: str

    # 输入输出
    x: Optional[str] = None
    y: Optional[str] = None
    out: Optional[str] = None

    # generate
    m: int = 8
    n: Optional[int] = None
    q: int = 64
    n_points: int = Field(129, alias="N")
    smoothness: float = 1.0
    column_coherence: float = 0.0
    offset: float = 0.0
    noise: str = "additive:0.05"
    seed: Optional[int] = None
    duplicate_rows: int = 0
    clusters: bool = False
    from_pgm: Optional[str] = None

    # 划分
    p: Optional[int] = None
    knots: Optional[List[int]] = None
    p_list: Optional[List[int]] = None
    schedule_steps: Optional[List[int]] = None

    # 构造协议
    estimator: Literal["sampled", "additive", "prior"] = "sampled"
    xi_power: Optional[float] = None
    sign: int = 1
    initial: Literal["reconstruct", "oracle", "file"] = "reconstruct"
    initial_file: Optional[str] = None
    references: Literal["reconstruct", "oracle"] = "reconstruct"
    baselines: List[str] = ["gol", "averaging"]

    # 输出与并行
    save_estimates: bool = False
    threads: Optional[int] = Field(None, ge=1)

    @field_validator("knots", "p_list", "schedule_steps", "baselines", mode="before")
    @classmethod
    def _split_lists(cls, v):
        return _split_list(v)

    @field_validator("m", "q", "n_points")
    @classmethod
    def _check_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"维度必须为正，实际 {v}")
        return v

    @field_validator("knots")
    @classmethod
    def _check_knots(cls, v: Optional[List[int]]) -> Optional[List[int]]:
        if v is None:
            return v
        if len(v) < 2 or v[0] != 1:
            raise ValueError("节点列表至少两个节点且以 1 开始")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("节点列表必须严格递增")
        return v

    @field_validator("baselines")
    @classmethod
    def _check_baselines(cls, v: List[str]) -> List[str]:
        unknown = set(v) - {"gol", "averaging", "none"}
        if unknown:
            raise ValueError(f"未知的基线: {sorted(unknown)}")
        return [b for b in v if b != "none"]

    @field_validator("sign")
    @classmethod
    def _check_sign(cls, v: int) -> int:
        if v not in (1, -1):
            raise ValueError(f"sign 必须为 1 或 -1，实际 {v}")
        return v

    @model_validator(mode="after")
    def _check_partition_form(self) -> "RunConfig":
        if self.p is not None and self.knots is not None:
            raise ValueError("--p 与 --knots 只能指定一个")
        if self.initial == "file" and not self.initial_file:
            raise ValueError("initial=file 时必须提供 initial_file")
        if self.estimator == "additive" and self.xi_power is None:
            raise ValueError("estimator=additive 时必须提供 xi_power")
        return self

    @property
    def effective_seed(self) -> int:
        return get_settings().default_seed if self.seed is None else self.seed

    @property
    def effective_threads(self) -> Optional[int]:
        return get_settings().threads if self.threads is None else self.threads


def read_config_file(path: str) -> Dict[str, str]:
    """
    解析 key = value 配置文件
    忽略空行和 # 注释，值两侧的引号会被去掉，键中的 - 视为 _
    """
    result = {}
    env_path = Path(path)
    if not env_path.exists():
        raise ConfigurationError(f"配置文件不存在: {path}")
    with open(env_path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#") and "=" in line:
                key, _, value = line.partition("=")
                key = key.strip().replace("-", "_")
                value = value.strip().strip('"').strip("'")
                if key and value:
                    result[key] = value
    return result
