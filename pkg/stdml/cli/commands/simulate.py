"""
simulate - draw one dataset from a simulation design and write it as a grid file
"""
import argparse
import sys
from typing import TextIO

from stdml.cli import deps
from stdml.schemas.simulation import BlockSimConfig
from stdml.services.grid_file_service import GridFileService
from stdml.services.simulation_service import SimulationService


def register(subparsers) -> None:
    parser = subparsers.add_parser("simulate", help="simulate a pixel- or block-design dataset")
    deps.add_config_arguments(parser)
    parser.set_defaults(handler=cmd_simulate)


def cmd_simulate(args: argparse.Namespace, out: TextIO = sys.stdout) -> int:
    config = deps.get_run_config(args)
    scenario = config.scenario()
    if isinstance(scenario, BlockSimConfig):
        data, truth = SimulationService.simulate_block(scenario)
    else:
        data, truth = SimulationService.simulate_pixel(scenario)

    header = {**config.resolved(), "scenario": scenario.scenario, "regenerations": truth.regenerations}
    path = deps.resolve_output(config, "simulated.csv")
    GridFileService.export(data, path, header)
    truth_path = deps.resolve_path(config.truth_output) if config.truth_output else deps.sibling(path, "_truth", ".csv")
    deps.write_text(truth_path, GridFileService.truth_text(data, truth, config.resolved()))

    out.write(GridFileService.format_summary(data))
    out.write(f"wrote {path}\nwrote {truth_path}\n")
    return 0
