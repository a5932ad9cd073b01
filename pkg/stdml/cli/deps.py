"""
CLI dependencies - configuration resolution, dataset loading and output writing
shared by the verbs
"""
import argparse
import logging
from pathlib import Path
from typing import Optional, Sequence

from stdml.core.config import settings
from stdml.core.constants import ESTIMATE_COLUMNS
from stdml.core.exceptions import UsageError
from stdml.models.dataset import GridDataset
from stdml.models.estimate import EffectEstimate
from stdml.schemas.run import RunConfig
from stdml.services.grid_file_service import GridFileService

logger = logging.getLogger(__name__)

RECORD_SEPARATOR = "---"


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    """--config FILE and repeatable --set key=value"""
    parser.add_argument("--config", "-c", help="flat key=value run configuration file")
    parser.add_argument(
        "--set",
        "-s",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a configuration value (repeatable)",
    )


def get_run_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig.load(args.config, args.set)


def load_dataset(config: RunConfig) -> GridDataset:
    if not config.data:
        raise UsageError("this verb needs a data file (set data=PATH)")
    return GridFileService.ingest(config.data)


def resolve_output(config: RunConfig, default_name: str) -> Path:
    """config.output, relative paths under settings.OUTPUT_DIR"""
    return resolve_path(config.output or default_name)


def resolve_path(name: str) -> Path:
    path = Path(name)
    if not path.is_absolute():
        path = Path(settings.OUTPUT_DIR) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def sibling(path: Path, suffix: str, extension: str) -> Path:
    return path.with_name(f"{path.stem}{suffix}{extension}")


def write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8", newline="\n")
    logger.info(f"Wrote {path}", extra={"path": str(path), "bytes": len(text)})
    return path


def estimates_table(
    estimates: Sequence[EffectEstimate],
    labels: Optional[Sequence[str]] = None,
    title: str = "Method",
) -> str:
    """Estimate, Standard Error, CI Lower, CI Upper per row, three decimals"""
    labels = list(labels) if labels is not None else [e.method for e in estimates]
    width = max(len(title), *(len(label) for label in labels))
    lines = [f"{title:<{width}}" + "".join(f"{col:>16}" for col in ESTIMATE_COLUMNS)]
    for label, e in zip(labels, estimates):
        values = (e.gamma, e.se, e.ci_lower, e.ci_upper)
        lines.append(f"{label:<{width}}" + "".join(f"{v:>16.3f}" for v in values))
    return "\n".join(lines) + "\n"


def estimate_records(estimates: Sequence[EffectEstimate], config: RunConfig) -> str:
    """Config header, then one key=value record per estimate separated by '---' lines"""
    body = f"{RECORD_SEPARATOR}\n".join(e.to_record() for e in estimates)
    return GridFileService.header_block(config.resolved()) + body


def parse_estimate_records(text: str) -> list:
    records = []
    chunk: list = []
    for line in text.splitlines():
        if line.startswith("#"):
            continue
        if line.strip() == RECORD_SEPARATOR:
            records.append("\n".join(chunk))
            chunk = []
        else:
            chunk.append(line)
    if any(line.strip() for line in chunk):
        records.append("\n".join(chunk))
    return [EffectEstimate.from_record(r) for r in records]
