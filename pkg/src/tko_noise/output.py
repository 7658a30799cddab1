"""CSV/JSON result documents: pydantic models, schema export and atomic file writing."""

import csv
import io
import json
import math
import os
import sys
import tempfile
from importlib import metadata
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np
import pydantic
import scipy
from numpy.typing import ArrayLike
from pydantic import BaseModel, Field

from tko_noise.errors import ValidationError
from tko_noise.logs import get_logger

logger = get_logger("output")

Cell = Union[float, int, str, bool, None]


class Table(BaseModel):
    """Column names carry units in brackets, e.g. "omega [rad/sample]"."""

    name: str
    columns: list[str]
    rows: list[list[Cell]]

    @classmethod
    def from_columns(cls, name: str, columns: dict[str, ArrayLike]) -> "Table":
        arrays = [np.asarray(v).reshape(-1) for v in columns.values()]
        lengths = {a.size for a in arrays}
        if len(lengths) > 1:
            raise ValidationError(f"table {name!r} has columns of unequal length {sorted(lengths)}")
        rows = [[_cell(a[i]) for a in arrays] for i in range(arrays[0].size if arrays else 0)]
        return cls(name=name, columns=list(columns), rows=rows)


def _cell(value: Any) -> Cell:
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    return str(value)


def _plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.generic, float, int, bool)) or value is None:
        return _cell(value) if value is not None else None
    return str(value)


class Report(BaseModel):
    """One subcommand's result: config echo, versions, seed, tables and a summary."""

    command: str
    status: str = "ok"
    config: dict[str, Any] = Field(default_factory=dict)
    versions: dict[str, str] = Field(default_factory=dict)
    seed: Optional[int] = None
    summary: dict[str, Any] = Field(default_factory=dict)
    tables: list[Table] = Field(default_factory=list)


def package_versions() -> dict[str, str]:
    try:
        own = metadata.version("tko-noise")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {
        "tko-noise": own,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
    }


def make_report(
    command: str,
    config: dict[str, Any],
    tables: Sequence[Table],
    summary: Optional[dict[str, Any]] = None,
    seed: Optional[int] = None,
    status: str = "ok",
) -> Report:
    return Report(
        command=command,
        status=status,
        config=_plain(config),
        versions=package_versions(),
        seed=seed,
        summary=_plain(summary or {}),
        tables=list(tables),
    )


def report_schema() -> dict[str, Any]:
    return Report.model_json_schema()


def render_json(report: Report) -> str:
    return json.dumps(report.model_dump(), indent=2, sort_keys=True, allow_nan=False) + "\n"


def render_csv(table: Table) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])
    return buffer.getvalue()


def _summary_table(report: Report) -> Optional[Table]:
    if not report.summary:
        return None
    rows: list[list[Cell]] = [
        [key, json.dumps(value, sort_keys=True)] for key, value in sorted(report.summary.items())
    ]
    return Table(name="summary", columns=["key", "value"], rows=rows)


def atomic_write(path: Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over the target."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    logger.info("wrote %s", path)


def write_report(report: Report, fmt: str, output: Optional[Path] = None) -> list[Path]:
    """Emit the report; CSV writes one file per table (<stem>_<table>.csv when several).

    Without an output path everything goes to stdout.
    """
    if fmt not in ("csv", "json"):
        raise ValidationError(f"unknown output format {fmt!r}")
    if fmt == "json":
        text = render_json(report)
        if output is None:
            sys.stdout.write(text)
            return []
        atomic_write(output, text)
        return [output]

    tables = list(report.tables)
    summary = _summary_table(report)
    if summary is not None:
        tables.append(summary)
    if output is None:
        sys.stdout.write("\n".join(render_csv(t) for t in tables))
        return []
    if len(tables) == 1:
        atomic_write(output, render_csv(tables[0]))
        return [output]
    written = []
    for table in tables:
        target = output.with_name(f"{output.stem}_{table.name}{output.suffix or '.csv'}")
        atomic_write(target, render_csv(table))
        written.append(target)
    return written
