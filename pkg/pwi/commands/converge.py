"""
converge: 不同插值对个数下的误差，检查误差随 p 增大而下降
"""

import logging

from ..analysis import convergence_study, trend_holds
from ..config import RunConfig
from ..errors import ConfigurationError
from ..signal_model import stepped_partition
from ..storage import write_convergence_csv, write_manifest
from .common import add_data_arguments, load_initial, load_pair, make_protocol, output_dir

logger = logging.getLogger(__name__)


def add_parser(subparsers):
    parser = subparsers.add_parser("converge", help="收敛性实验")
    add_data_arguments(parser)
    parser.add_argument("--p-list", default=None, help="等距划分的节点数，例如 5,8,15,28")
    parser.add_argument("--schedule-steps", default=None, help="步长划分，例如 35,20,10,5")
    parser.set_defaults(handler=run)


def run(config: RunConfig) -> int:
    if not config.p_list and not config.schedule_steps:
        raise ConfigurationError("converge 需要 --p-list 或 --schedule-steps")
    x, y = load_pair(config)
    protocol = make_protocol(config)
    out = output_dir(config)

    schedule = list(config.p_list or [])
    schedule += [stepped_partition(x.n_points, s) for s in config.schedule_steps or []]
    rows = convergence_study(x, y, schedule, protocol, load_initial(config))
    holds = trend_holds(rows)

    write_convergence_csv(out / "convergence.csv", rows)
    write_manifest(out / "manifest.json", {
        "command": "converge",
        "x": config.x,
        "y": config.y,
        "p": [r.p for r in rows],
        "trend_holds": holds,
        "protocol": protocol.model_dump(),
    })

    for r in rows:
        print(f"p={r.p:<4} mean={r.mean:.6g} max={r.max:.6g} pinv_calls={r.pinv_calls}")
    print(f"trend {'holds' if holds else 'violated'}")
    if not holds:
        logger.warning("[收敛] 误差没有随 p 增大而下降")
    return 0
