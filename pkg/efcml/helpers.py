"""Helpers for efcml."""
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import pandas as pd

from .const import FLOAT_FORMAT
from .exceptions import MalformedFileError

_LOGGER = logging.getLogger(__name__)

PathLike = Union[str, Path]


def ensure_output_dir(output_path: PathLike) -> Path:
    """Create the output directory if it does not exist yet."""
    path = Path(output_path)
    os.makedirs(path, exist_ok=True)
    return path


def write_rows(
    rows: Iterable[Sequence[Any]], columns: List[str], csv_path: PathLike
) -> None:
    """Write rows as CSV with a header, 9 significant digits and LF endings."""
    _LOGGER.debug("Writing %s", csv_path)
    frame = pd.DataFrame(list(rows), columns=columns)
    frame.to_csv(
        csv_path,
        index=False,
        float_format=FLOAT_FORMAT,
        lineterminator="\n",
        encoding="utf-8",
    )


def read_rows(csv_path: PathLike) -> pd.DataFrame:
    """Read a CSV written by ``write_rows``."""
    return pd.read_csv(csv_path, keep_default_na=False)


def write_json(data: Dict[str, Any], json_path: PathLike) -> None:
    """Write a JSON document with sorted keys."""
    _LOGGER.debug("Writing %s", json_path)
    with open(json_path, "w", encoding="utf-8", newline="\n") as outfile:
        json.dump(data, outfile, indent=2, sort_keys=True)
        outfile.write("\n")


def read_json(json_path: PathLike) -> Dict[str, Any]:
    """Read a JSON document written by ``write_json``."""
    try:
        with open(json_path, encoding="utf-8") as infile:
            return json.load(infile)
    except json.JSONDecodeError as err:
        raise MalformedFileError(f"Unable to parse {json_path}: {err}") from err
