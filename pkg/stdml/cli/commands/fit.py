"""
fit - estimate the treatment effect on an ingested grid file
"""
import argparse
import sys
from typing import TextIO

from stdml.cli import deps
from stdml.core.exceptions import ConfigurationError
from stdml.models.method import EstimatorKind
from stdml.services.baseline_service import BaselineService
from stdml.services.dml_service import DMLService
from stdml.services.grid_file_service import GridFileService
from stdml.services.lattice_service import LatticeService


def register(subparsers) -> None:
    parser = subparsers.add_parser("fit", help="run OLS, DID and STDML on a grid file (data=PATH)")
    deps.add_config_arguments(parser)
    parser.set_defaults(handler=cmd_fit)


def cmd_fit(args: argparse.Namespace, out: TextIO = sys.stdout) -> int:
    config = deps.get_run_config(args)
    data = deps.load_dataset(config)
    out.write(GridFileService.format_summary(data))

    means = BaselineService.group_means(data)
    out.write(
        f"naive DID: ({means['post_treated']:.3f} - {means['post_control']:.3f}) - "
        f"({means['pre_treated']:.3f} - {means['pre_control']:.3f}) = {means['naive_did']:.3f}\n\n"
    )

    estimates = []
    for kind in config.methods:
        if kind == EstimatorKind.OLS:
            estimates.append(BaselineService.baseline_ols(data))
        elif kind == EstimatorKind.DID:
            nb = LatticeService.build_neighborhood(data.grid, config.nb_scheme)
            estimates.append(BaselineService.baseline_did(data, nb))
        elif kind == EstimatorKind.STDML:
            estimates.append(DMLService.run_stdml(data, config.stdml_config()))
        else:
            raise ConfigurationError(f"{kind.value} needs simulated ground truth and is only available in sweeps")

    out.write(deps.estimates_table(estimates))
    path = deps.resolve_output(config, "estimates.txt")
    deps.write_text(path, deps.estimate_records(estimates, config))
    return 0
