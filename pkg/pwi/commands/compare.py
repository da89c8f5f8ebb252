"""
compare: 分段滤波器与 GOL、平均多项式滤波器的比较
"""

import logging

from ..analysis import compare_filters
from ..config import RunConfig
from ..storage import write_manifest, write_report_json, write_reports_csv
from .common import (
    add_data_arguments,
    load_initial,
    load_pair,
    make_protocol,
    output_dir,
    resolve_partition,
)

logger = logging.getLogger(__name__)


def add_parser(subparsers):
    parser = subparsers.add_parser("compare", help="与基线滤波器比较")
    add_data_arguments(parser)
    parser.add_argument("--p", type=int, default=None)
    parser.add_argument("--knots", default=None)
    parser.add_argument("--baselines", default=None, help="gol,averaging 或 none")
    parser.set_defaults(handler=run)


def run(config: RunConfig) -> int:
    x, y = load_pair(config)
    partition = resolve_partition(config, x.n_points)
    protocol = make_protocol(config)
    out = output_dir(config)

    reports = compare_filters(x, y, partition, protocol, config.baselines, load_initial(config))

    write_reports_csv(out / "errors.csv", reports)
    write_report_json(out / "report.json", reports)
    write_manifest(out / "manifest.json", {
        "command": "compare",
        "x": config.x,
        "y": config.y,
        "knots": list(partition.knot_indices),
        "baselines": list(config.baselines),
        "protocol": protocol.model_dump(),
    })

    for r in reports:
        print(f"{r.label:<16} mean={r.mean:.6g} max={r.max:.6g} pinv_calls={r.pinv_calls} time={r.wall_time:.3f}s")
    return 0
