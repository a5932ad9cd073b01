"""
Grid file service - columnar grid files (comma-separated, header row, "NA" for
missing outcomes) with a '# key=value' comment block carrying grid geometry and
the run configuration
"""
import io
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from stdml.core.constants import GRID_FILE_MISSING, GRID_FILE_REQUIRED_COLUMNS
from stdml.core.exceptions import ConfigurationError, ValidationError
from stdml.models.dataset import GridDataset, TruthRecord
from stdml.services.lattice_service import LatticeService

logger = logging.getLogger(__name__)

GEOMETRY_KEYS = ("grid_spacing", "grid_origin_x", "grid_origin_y")


def _fmt(value: float) -> str:
    return GRID_FILE_MISSING if np.isnan(value) else repr(float(value))


def _split_header(text: str) -> Tuple[Dict[str, str], List[str], int]:
    """(header key/values, remaining lines, number of comment lines)"""
    lines = text.split("\n")
    header: Dict[str, str] = {}
    count = 0
    for line in lines:
        if not line.startswith("#"):
            break
        key, sep, value = line[1:].strip().partition("=")
        if sep:
            header[key.strip()] = value.strip()
        count += 1
    return header, lines[count:], count


class GridFileService:
    """Service class for reading and writing gridded datasets"""

    @staticmethod
    def _parse_column(
        values: pd.Series,
        name: str,
        first_line: int,
        errors: List[Dict[str, Any]],
        allow_missing: bool = False,
        integer: bool = False,
    ) -> np.ndarray:
        out = np.full(len(values), np.nan)
        for j, raw in enumerate(values.tolist()):
            text = raw.strip() if isinstance(raw, str) else ""
            line = first_line + j
            if text == GRID_FILE_MISSING and allow_missing:
                continue
            try:
                value = float(text)
            except ValueError:
                errors.append({"line": line, "column": name, "message": f"{name}: cannot parse '{raw}' as a number"})
                continue
            if not np.isfinite(value):
                errors.append({"line": line, "column": name, "message": f"{name}: value must be finite, got '{raw}'"})
            elif integer and value != int(value):
                errors.append({"line": line, "column": name, "message": f"{name}: expected an integer, got '{raw}'"})
            else:
                out[j] = value
        return out

    @staticmethod
    def read_text(text: str, source: str = "<text>") -> Tuple[GridDataset, Dict[str, str]]:
        """Parse a grid file; every problem is reported with its line number"""
        header, body, offset = _split_header(text)
        header_line = offset + 1
        if not body or not body[0].strip():
            raise ValidationError(f"{source}: missing header row", errors=[{"line": header_line, "message": "missing header row"}])

        try:
            frame = pd.read_csv(
                io.StringIO("\n".join(body)),
                dtype=str,
                keep_default_na=False,
                skip_blank_lines=False,
            )
        except pd.errors.ParserError as exc:
            raise ValidationError(
                f"{source}: malformed rows",
                errors=[{"line": None, "message": f"{exc} (line numbers counted from the header row)"}],
            ) from exc
        frame.columns = [c.strip() for c in frame.columns]
        missing = [c for c in GRID_FILE_REQUIRED_COLUMNS if c not in frame.columns]
        if missing:
            raise ValidationError(
                f"{source}: missing required columns",
                errors=[{"line": header_line, "message": f"missing required column '{c}'"} for c in missing],
            )
        if frame.columns.duplicated().any():
            raise ValidationError(
                f"{source}: duplicate column names",
                errors=[{"line": header_line, "message": "column names must be unique"}],
            )
        if frame.empty:
            raise ValidationError(f"{source}: no data rows", errors=[{"line": header_line + 1, "message": "no data rows"}])

        first = header_line + 1
        errors: List[Dict[str, Any]] = []
        rows = GridFileService._parse_column(frame["row"], "row", first, errors, integer=True)
        cols = GridFileService._parse_column(frame["col"], "col", first, errors, integer=True)
        y0 = GridFileService._parse_column(frame["Y0"], "Y0", first, errors, allow_missing=True)
        y1 = GridFileService._parse_column(frame["Y1"], "Y1", first, errors, allow_missing=True)
        d = GridFileService._parse_column(frame["D"], "D", first, errors)
        for j in np.flatnonzero(~np.isnan(d) & ~np.isin(d, (0.0, 1.0))):
            errors.append({"line": first + int(j), "column": "D", "message": f"D must be 0 or 1, got '{frame['D'].iloc[j]}'"})
        for name, values in (("row", rows), ("col", cols)):
            for j in np.flatnonzero(values < 0):
                errors.append({"line": first + int(j), "column": name, "message": f"{name} must be >= 0"})

        blocks = None
        if "block" in frame.columns:
            blocks = GridFileService._parse_column(frame["block"], "block", first, errors, integer=True)
        covariate_names = [c for c in frame.columns if c not in GRID_FILE_REQUIRED_COLUMNS and c != "block"]
        covariates = [GridFileService._parse_column(frame[c], c, first, errors) for c in covariate_names]

        seen: Dict[Tuple[int, int], int] = {}
        for j, (r, c) in enumerate(zip(rows, cols)):
            if np.isnan(r) or np.isnan(c):
                continue
            key = (int(r), int(c))
            if key in seen:
                errors.append({"line": first + j, "message": f"duplicate cell ({key[0]}, {key[1]}), first seen on line {seen[key]}"})
            else:
                seen[key] = first + j
        if errors:
            raise ValidationError(f"{source}: {len(errors)} invalid entries", errors=sorted(errors, key=lambda e: e["line"]))

        m_rows, m_cols = int(rows.max()) + 1, int(cols.max()) + 1
        if len(seen) != m_rows * m_cols:
            absent = [(r, c) for r in range(m_rows) for c in range(m_cols) if (r, c) not in seen]
            raise ValidationError(
                f"{source}: grid is incomplete ({len(absent)} of {m_rows * m_cols} cells absent)",
                errors=[{"line": None, "message": f"cell ({r}, {c}) absent"} for r, c in absent[:20]],
            )

        try:
            spacing = float(header.get("grid_spacing", 1.0))
            origin = (float(header.get("grid_origin_x", 0.0)), float(header.get("grid_origin_y", 0.0)))
        except ValueError as exc:
            raise ValidationError(f"{source}: bad grid geometry header", errors=[{"line": 1, "message": str(exc)}]) from exc
        grid = LatticeService.build_grid(m_rows, m_cols, spacing, origin)

        order = np.argsort(rows.astype(np.int64) * m_cols + cols.astype(np.int64), kind="stable")
        X = np.column_stack([v[order] for v in covariates]) if covariates else np.empty((grid.n, 0))
        data = GridDataset(
            grid=grid,
            y0=y0[order],
            y1=y1[order],
            d=d[order].astype(np.int64),
            X=X,
            covariate_names=covariate_names,
            blocks=LatticeService.partition_from_labels(blocks[order].astype(np.int64)) if blocks is not None else None,
        )
        return data, header

    @staticmethod
    def ingest(path: Union[str, Path]) -> GridDataset:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read data file {path}: {exc.strerror}") from exc
        data, _ = GridFileService.read_text(text, source=str(path))
        logger.info(
            f"Ingested {data.n} pixels from {path}",
            extra={"path": str(path), "n": data.n, "p": data.p},
        )
        return data

    @staticmethod
    def header_block(config: Optional[Dict[str, Any]] = None) -> str:
        """'# key=value' lines, sorted by key, that open every file the tool writes"""
        return "".join(f"# {key}={value}\n" for key, value in sorted((config or {}).items()))

    @staticmethod
    def export_text(data: GridDataset, config: Optional[Dict[str, Any]] = None) -> str:
        """Serialize a dataset; floats use repr so reading back is exact"""
        grid = data.grid
        geometry = {
            "grid_spacing": repr(grid.spacing),
            "grid_origin_x": repr(grid.origin[0]),
            "grid_origin_y": repr(grid.origin[1]),
        }
        extra = {k: v for k, v in (config or {}).items() if k not in GEOMETRY_KEYS}
        header = GridFileService.header_block({**extra, **geometry})

        columns = list(GRID_FILE_REQUIRED_COLUMNS)
        if data.blocks is not None:
            columns.append("block")
        columns += data.covariate_names
        lines = [",".join(columns)]
        rows, cols = grid.rows, grid.cols
        for i in range(grid.n):
            fields = [str(rows[i]), str(cols[i]), _fmt(data.y0[i]), _fmt(data.y1[i]), str(int(data.d[i]))]
            if data.blocks is not None:
                fields.append(str(int(data.blocks.labels[i])))
            fields += [repr(float(v)) for v in data.X[i]]
            lines.append(",".join(fields))
        return header + "\n".join(lines) + "\n"

    @staticmethod
    def export(data: GridDataset, path: Union[str, Path], config: Optional[Dict[str, Any]] = None) -> Path:
        path = Path(path)
        path.write_text(GridFileService.export_text(data, config), encoding="utf-8", newline="\n")
        return path

    @staticmethod
    def truth_text(data: GridDataset, truth: TruthRecord, config: Optional[Dict[str, Any]] = None) -> str:
        """Per-pixel ground truth: all five covariates, propensity, block effect and oracle means"""
        header = {
            **(config or {}),
            "scenario": truth.scenario,
            "gamma": repr(truth.gamma),
            "seed": truth.seed,
            "regenerations": truth.regenerations,
        }
        frame = pd.DataFrame({"row": data.grid.rows, "col": data.grid.cols})
        for j in range(truth.covariates.shape[1]):
            frame[f"X{j + 1}"] = truth.covariates[:, j]
        frame["propensity"] = truth.propensity
        if truth.block_effects is not None:
            frame["block_effect"] = truth.block_effects
        frame["oracle_Y0"] = truth.oracle.y0_hat
        frame["oracle_Y1"] = truth.oracle.y1_hat
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False, lineterminator="\n", float_format="%.17g")
        return GridFileService.header_block(header) + buffer.getvalue()

    @staticmethod
    def summary(data: GridDataset) -> Dict[str, Any]:
        return {
            "n_pixels": data.n,
            "grid": f"{data.grid.m_rows}x{data.grid.m_cols}",
            "treated_fraction": float(data.d.mean()),
            "missing_Y0": float(np.isnan(data.y0).mean()),
            "missing_Y1": float(np.isnan(data.y1).mean()),
            "covariates": ",".join(data.covariate_names) or "(none)",
            "blocks": data.blocks.G if data.blocks is not None else 0,
        }

    @staticmethod
    def format_summary(data: GridDataset) -> str:
        s = GridFileService.summary(data)
        return (
            f"pixels: {s['n_pixels']} ({s['grid']})\n"
            f"treated fraction: {s['treated_fraction']:.3f}\n"
            f"missing Y0: {s['missing_Y0']:.3f}  missing Y1: {s['missing_Y1']:.3f}\n"
            f"covariates: {s['covariates']}\n"
            f"blocks: {s['blocks']}\n"
        )
