"""
generate: 生成 (或从 PGM 读入) 参考信号集并加噪
"""

import logging

from ..config import RunConfig
from ..errors import ConfigurationError
from ..noise import NoiseModel, apply_noise
from ..signal_model import duplicate_rows, gen_lipschitz_set, gen_two_cluster_pair
from ..storage import load_pgm_set, save_signal_set, write_manifest
from .common import output_dir

logger = logging.getLogger(__name__)


def add_parser(subparsers):
    parser = subparsers.add_parser("generate", help="生成参考信号集 X 与观测信号集 Y")
    parser.add_argument("--m", type=int, default=None, help="参考信号维度")
    parser.add_argument("--n", type=int, default=None, help="观测信号维度 (噪声模型要求 n = m)")
    parser.add_argument("--q", type=int, default=None, help="实现个数")
    parser.add_argument("--N", type=int, default=None, help="时间点个数")
    parser.add_argument("--smoothness", type=float, default=None)
    parser.add_argument("--column-coherence", type=float, default=None)
    parser.add_argument("--offset", type=float, default=None)
    parser.add_argument("--noise", default=None, help="additive:<s> | hadamard-randn | hadamard-randn-rand")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--duplicate-rows", type=int, default=None, help="把 Y 的第 1 行复制到后续若干行")
    parser.add_argument("--clusters", action="store_true", default=None, help="两类观测的信号对")
    parser.add_argument("--from-pgm", default=None, help="从 PGM 图像目录读入 X")
    parser.add_argument("--out", default=None)
    parser.set_defaults(handler=run)


def run(config: RunConfig) -> int:
    seed = config.effective_seed
    noise = NoiseModel.parse(config.noise)
    out = output_dir(config)

    if config.from_pgm:
        x = load_pgm_set(config.from_pgm)
        source = f"pgm:{config.from_pgm}"
    else:
        if config.n is not None and config.n != config.m:
            raise ConfigurationError(f"噪声模型要求 n = m，实际 n={config.n}, m={config.m}")
        x = None
        source = "lipschitz"

    if config.clusters:
        if x is not None:
            raise ConfigurationError("--clusters 不能与 --from-pgm 同时使用")
        if noise.kind != "additive":
            raise ConfigurationError("--clusters 只支持 additive 噪声")
        x, y = gen_two_cluster_pair(
            config.m, config.q, config.n_points, noise.scale, seed, smoothness=config.smoothness
        )
        source = "two-cluster"
    else:
        if x is None:
            x = gen_lipschitz_set(
                config.m, config.q, config.n_points, config.smoothness, seed,
                column_coherence=config.column_coherence, offset=config.offset,
            )
        y = apply_noise(x, noise, seed)

    if config.duplicate_rows:
        y = duplicate_rows(y, config.duplicate_rows)

    save_signal_set(out / "x", x)
    save_signal_set(out / "y", y)
    write_manifest(out / "manifest.json", {
        "command": "generate",
        "source": source,
        "dims": {"m": x.m, "n": y.m, "q": x.q, "N": x.n_points},
        "seed": seed,
        "noise": noise.label(),
        "smoothness": config.smoothness,
        "column_coherence": config.column_coherence,
        "offset": config.offset,
        "duplicate_rows": config.duplicate_rows,
        "generator": "numpy SeedSequence + PCG64",
    })
    logger.info(f"[生成] {source}，噪声 {noise.label()}，seed={seed} -> {out}")
    print(f"generated N={x.n_points} m={x.m} n={y.m} q={x.q} noise={noise.label()} -> {out}")
    return 0
