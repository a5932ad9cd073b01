"""
knot-sweep - the STDML estimate as the number of Wendland basis functions grows
"""
import argparse
import sys
from typing import TextIO

from stdml.cli import deps
from stdml.core.exceptions import UsageError
from stdml.models.method import FeatureSet
from stdml.services.dml_service import DMLService
from stdml.services.grid_file_service import GridFileService
from stdml.services.plot_service import PlotService


def register(subparsers) -> None:
    parser = subparsers.add_parser("knot-sweep", help="estimate across L_values (0 = no spatial features)")
    deps.add_config_arguments(parser)
    parser.set_defaults(handler=cmd_knot_sweep)


def cmd_knot_sweep(args: argparse.Namespace, out: TextIO = sys.stdout) -> int:
    config = deps.get_run_config(args)
    if not config.L_values:
        raise UsageError("knot-sweep needs at least one value in L_values")
    data = deps.load_dataset(config)

    estimates = []
    for L in config.L_values:
        features = FeatureSet.X if L == 0 else FeatureSet.XSZ
        estimates.append(DMLService.run_stdml(data, config.stdml_config(features=features, L=L), method=f"L={L}"))

    labels = [str(L) for L in config.L_values]
    out.write(deps.estimates_table(estimates, labels, title="L"))

    header = config.resolved()
    path = deps.resolve_output(config, "knot_sweep.csv")
    lines = ["L,estimate,se,ci_lower,ci_upper"]
    lines += [f"{L},{e.gamma!r},{e.se!r},{e.ci_lower!r},{e.ci_upper!r}" for L, e in zip(config.L_values, estimates)]
    deps.write_text(path, GridFileService.header_block(header) + "\n".join(lines) + "\n")
    deps.write_text(path.with_suffix(".svg"), PlotService.knot_plot(config.L_values, estimates, header))
    return 0
