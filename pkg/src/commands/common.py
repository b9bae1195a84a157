"""
GreenLB - Command Helpers

Error reporting and table I/O shared by every subcommand.
"""

import functools
import json
import logging
import math
import sys

import click
import pandas as pd

from errors import ConfigError, ErrorCode, GreenLBError, ResultsFormatError

logger = logging.getLogger(__name__)


def reports_errors(func):
    """Turn any failure into one stderr line and its exit status.

    Unexpected exceptions report as ``UNKNOWN_ERROR``; the traceback goes
    to the DEBUG log only.
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except GreenLBError as e:
            logger.debug("command failed", exc_info=True)
            click.echo(f"greenlb: {e.one_line()}", err=True)
            sys.exit(e.exit_status)
        except (click.exceptions.Exit, click.exceptions.Abort, click.ClickException):
            raise
        except Exception as e:  # noqa: BLE001
            logger.debug("command crashed", exc_info=True)
            code = ErrorCode.UNKNOWN_ERROR
            detail = " ".join(f"{type(e).__name__}: {e}".split())
            click.echo(f"greenlb: error {code.code} {code.name}: {detail}", err=True)
            sys.exit(code.code)
    return wrapper


def read_results(path, required=()):
    """Load a results CSV and check it has ``required`` columns.

    Raises
    ------
    ResultsFormatError
        Unreadable file or missing columns.
    """
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as e:
        raise ResultsFormatError(f"cannot read results table {path}: {e}") from e
    except pd.errors.EmptyDataError:
        raise ResultsFormatError(f"results table {path} is empty (no header)") from None
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise ResultsFormatError(f"{path} lacks column(s): {', '.join(missing)}")
    return frame


def jsonable(value):
    """Recursively replace NaN with ``None`` and infinities with ``"inf"``."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
    if hasattr(value, "item"):
        return jsonable(value.item())
    return value


def echo_json(data):
    click.echo(json.dumps(jsonable(data), indent=2, sort_keys=False))


def write_frame(frame, out):
    """Write ``frame`` as CSV to ``out``, or to stdout when ``out`` is None."""
    if out is None:
        click.echo(frame.to_csv(index=False), nl=False)
    else:
        try:
            frame.to_csv(out, index=False)
        except OSError as e:
            raise ConfigError(f"cannot write {out}: {e.strerror or e}") from e
        logger.info("wrote %d row(s) to %s", len(frame), out)
