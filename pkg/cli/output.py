"""
Shared CLI plumbing: JSON documents, plot-data CSV files, logging and exit codes
"""
import functools
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import click
import numpy as np
import pandas as pd
from pydantic import BaseModel
from rich.console import Console
from rich.markup import escape

from core.config import settings
from core.errors import EXIT_COMPUTATION, EXIT_INPUT, PigeonholeError
from schemas.result import ResultDocument
from schemas.variance import CellMap

console = Console(stderr=True, highlight=False)
logger = logging.getLogger(__name__)


def configure_logging(verbose: bool) -> None:
    """Logs go to standard error; standard output carries only the result document"""
    level = logging.DEBUG if verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.WARNING)
    logging.basicConfig(level=level, format=settings.LOG_FORMAT, stream=sys.stderr, force=True)


def to_jsonable(value: Any) -> Any:
    """Convert models and numpy values into plain JSON types"""
    if isinstance(value, CellMap):
        return {"rows": value.rows.tolist(), "cols": value.cols.tolist(), "values": value.values.tolist()}
    if isinstance(value, BaseModel):
        return {k: to_jsonable(getattr(value, k)) for k in type(value).model_fields}
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _null_non_finite(value: Any, path: str, found: List[str]) -> Any:
    """Replace NaN and infinities with None, recording where they were"""
    if isinstance(value, float) and not math.isfinite(value):
        found.append(path)
        return None
    if isinstance(value, dict):
        return {k: _null_non_finite(v, f"{path}.{k}" if path else k, found) for k, v in value.items()}
    if isinstance(value, list):
        return [_null_non_finite(v, f"{path}[{i}]", found) for i, v in enumerate(value)]
    return value


def emit(doc: ResultDocument, output: Optional[str] = None) -> None:
    """Write the document to stdout, or to output when given; non-finite numbers become null"""
    found: List[str] = []
    payload = _null_non_finite(to_jsonable(doc), "", found)
    if found:
        logger.warning(f"Reporting {len(found)} non-finite values as null")
        payload["warnings"].append(f"non-finite values reported as null: {', '.join(found)}")
    text = json.dumps(payload, indent=2, allow_nan=False)
    if output:
        Path(output).write_text(text + "\n", encoding="utf-8")
        logger.info(f"Wrote result document to {output}")
    else:
        click.echo(text)


def write_plot_data(directory: str, filename: str, rows: Iterable[Dict[str, Any]], columns: List[str]) -> Path:
    """Write plot rows as CSV; floats keep full precision"""
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    target = path / filename
    frame = pd.DataFrame(list(rows), columns=columns)
    frame.to_csv(target, index=False, float_format=settings.PLOT_FLOAT_FORMAT)
    logger.info(f"Wrote {len(frame)} plot rows to {target}")
    return target


def fail(message: str, exit_code: int) -> None:
    console.print(f"[bold red]error:[/bold red] {escape(message)}")
    sys.exit(exit_code)


def handle_errors(fn):
    """Turn library exceptions into an error line on stderr and the class exit code"""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PigeonholeError as e:
            logger.debug("command failed", exc_info=True)
            fail(str(e), e.exit_code)
        except OSError as e:
            fail(f"{e.filename or ''}: {e.strerror or e}".lstrip(": "), EXIT_INPUT)
        except ValueError as e:
            logger.debug("command failed", exc_info=True)
            fail(str(e), EXIT_COMPUTATION)

    return wrapper
