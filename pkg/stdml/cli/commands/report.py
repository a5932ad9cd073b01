"""
report - re-render a saved sweep table as text and SVG
"""
import argparse
import sys
from pathlib import Path
from typing import TextIO

import pandas as pd

from stdml.cli import deps
from stdml.core.exceptions import ConfigurationError, UsageError
from stdml.services.monte_carlo_service import MonteCarloService
from stdml.services.plot_service import PlotService


def register(subparsers) -> None:
    parser = subparsers.add_parser("report", help="render a sweep CSV (data=PATH) as a table and SVG")
    deps.add_config_arguments(parser)
    parser.set_defaults(handler=cmd_report)


def cmd_report(args: argparse.Namespace, out: TextIO = sys.stdout) -> int:
    config = deps.get_run_config(args)
    if not config.data:
        raise UsageError("report needs the sweep table (set data=PATH)")
    source = Path(config.data)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read sweep table {source}: {exc.strerror}") from exc
    summaries, header = MonteCarloService.parse_table_csv(text)

    replicates_path = deps.sibling(source, "_replicates", ".csv")
    svg_config = {**header, "report_seed": config.seed}
    if replicates_path.is_file() and "true_gamma" in header:
        replicates = pd.read_csv(replicates_path, comment="#", float_precision="round_trip")
        svg = PlotService.estimate_boxplot(
            replicates, float(header["true_gamma"]), [s.method for s in summaries], svg_config
        )
    else:
        svg = PlotService.bias_plot(summaries, svg_config)

    path = deps.resolve_path(config.output) if config.output else source.with_suffix(".report.svg")
    deps.write_text(path, svg)
    out.write(MonteCarloService.render_table(summaries))
    return 0
