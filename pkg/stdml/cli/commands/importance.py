"""
importance - first-stage split counts per target, averaged over folds
"""
import argparse
import io
import sys
from typing import TextIO

import pandas as pd

from stdml.cli import deps
from stdml.services.dml_service import DMLService
from stdml.services.grid_file_service import GridFileService


def register(subparsers) -> None:
    parser = subparsers.add_parser("importance", help="variable importance of the cross-fitted first stage")
    deps.add_config_arguments(parser)
    parser.set_defaults(handler=cmd_importance)


def importance_tables(mean_counts: pd.DataFrame, covariates, spatial):
    """(summary with one aggregated 'spatial' column, per-feature detail)"""
    summary = mean_counts[list(covariates)].copy()
    summary["spatial"] = mean_counts[list(spatial)].sum(axis=1) if spatial else 0.0
    return summary, mean_counts


def cmd_importance(args: argparse.Namespace, out: TextIO = sys.stdout) -> int:
    config = deps.get_run_config(args)
    data = deps.load_dataset(config)
    stdml_config = config.stdml_config()
    _, predictions = DMLService.run_with_predictions(data, stdml_config)
    _, _, spatial = DMLService.build_features(data, stdml_config.features, stdml_config.L)

    summary, detail = importance_tables(predictions.mean_importance(), data.covariate_names, spatial)
    out.write(summary.to_string(float_format=lambda v: f"{v:.3f}") + "\n")

    buffer = io.StringIO()
    detail.rename_axis("target").to_csv(buffer, lineterminator="\n")
    path = deps.resolve_output(config, "importance.csv")
    deps.write_text(path, GridFileService.header_block(config.resolved()) + buffer.getvalue())
    return 0
