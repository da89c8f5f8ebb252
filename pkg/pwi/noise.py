"""
观测噪声模型

    hadamard-randn-rand : Y = X . randn . rand  (Hadamard 乘积)
    hadamard-randn      : Y = X . randn
    additive:<s>        : Y = X + s * randn

随机数: 种子 -> numpy SeedSequence -> 每个时间点 spawn 一个子序列 -> PCG64。
同一种子在任何机器上得到同样的噪声，各时间点的噪声相互独立。
"""

import logging
from typing import List, Literal

import numpy as np
from pydantic import BaseModel, field_validator

from .errors import ConfigurationError
from .signal_model import SignalSet

logger = logging.getLogger(__name__)

NoiseKind = Literal["hadamard-randn-rand", "hadamard-randn", "additive"]


class NoiseModel(BaseModel):
    """噪声模型"""

    model_config = {"frozen": True}

    kind: NoiseKind
    scale: float = 0.0

    @field_validator("scale")
    @classmethod
    def _check_scale(cls, v: float) -> float:
        if not np.isfinite(v) or v < 0:
            raise ValueError(f"噪声强度必须为非负有限数，实际 {v}")
        return v

    @classmethod
    def parse(cls, text: str) -> "NoiseModel":
        """解析 "additive:0.1" / "hadamard-randn" / "hadamard-randn-rand" """
        name, _, arg = text.strip().partition(":")
        try:
            if name == "additive":
                if not arg:
                    raise ConfigurationError("additive 噪声需要强度，例如 additive:0.1")
                return cls(kind="additive", scale=float(arg))
            if arg:
                raise ConfigurationError(f"噪声模型 {name} 不接受参数")
            return cls(kind=name)
        except ValueError as e:
            raise ConfigurationError(f"未知或不合法的噪声模型 '{text}': {e}")

    def label(self) -> str:
        if self.kind == "additive":
            return f"additive:{self.scale:g}"
        return self.kind


def ensemble_generators(seed: int, count: int) -> List[np.random.Generator]:
    """每个时间点一个独立的 PCG64 生成器"""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.PCG64(child)) for child in children]


def apply_noise(x: SignalSet, model: NoiseModel, seed: int) -> SignalSet:
    """对信号集逐时间点加噪"""
    if isinstance(model, str):
        model = NoiseModel.parse(model)

    shape = (x.m, x.q)
    observed = np.empty_like(x.ensembles)
    for i, rng in enumerate(ensemble_generators(seed, x.n_points)):
        ref = x.ensembles[i]
        if model.kind == "additive":
            if model.scale == 0.0:
                observed[i] = ref
            else:
                observed[i] = ref + model.scale * rng.standard_normal(shape)
        elif model.kind == "hadamard-randn":
            observed[i] = ref * rng.standard_normal(shape)
        else:
            randn = rng.standard_normal(shape)
            observed[i] = ref * randn * rng.random(shape)

    logger.info(f"[噪声] 模型 {model.label()}，seed={seed}，N={x.n_points}")
    return SignalSet(x.grid, observed)
