import json
import logging
import os
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

CODE_VERSION = "1.0.0"
FLOAT_FORMAT = "%.10e"


def _header_lines(title: str, config_hash: str, extra: Optional[Mapping[str, Any]] = None) -> List[str]:
    lines = [f"# {title}", f"# config_hash: {config_hash}", f"# code_version: {CODE_VERSION}"]
    for key, value in (extra or {}).items():
        lines.append(f"# {key}: {value}")
    return lines


def _format_axis(values: np.ndarray) -> str:
    return ",".join(FLOAT_FORMAT % v for v in np.asarray(values, dtype=float))


def write_table(path: str, columns: Mapping[str, Sequence[float]], units: Mapping[str, str], title: str,
                config_hash: str, extra: Optional[Mapping[str, Any]] = None) -> str:
    """
    Write one curve family as a delimited table with a commented header

    Args:
        path: Output file
        columns: Column name -> values (equal lengths)
        units: Column name -> unit string
        title: First header line
        config_hash: Hash of the config that produced the data
        extra: Additional header entries

    Returns:
        The path written
    """
    df = pd.DataFrame({name: np.asarray(values) for name, values in columns.items()})
    header = _header_lines(title, config_hash, extra)
    header.append("# units: " + ", ".join(f"{name} [{units.get(name, '')}]" for name in df.columns))
    _write(path, header, lambda f: df.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"))
    return path


def write_heatmap(path: str, row_axis: np.ndarray, column_axis: np.ndarray, values: np.ndarray, title: str,
                  row_name: str, column_name: str, value_unit: str, config_hash: str,
                  extra: Optional[Mapping[str, Any]] = None) -> str:
    """
    Write a 2D grid row-major, with both axis vectors in the header

    Row i of the body holds values[i, :] at row_axis[i].
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (np.size(row_axis), np.size(column_axis)):
        raise ValueError(f"Heatmap shape {values.shape} does not match axes ({np.size(row_axis)}, {np.size(column_axis)})")
    header = _header_lines(title, config_hash, extra)
    header.append(f"# rows: {row_name} = {_format_axis(row_axis)}")
    header.append(f"# columns: {column_name} = {_format_axis(column_axis)}")
    header.append(f"# values: {value_unit}")
    df = pd.DataFrame(values)
    _write(path, header, lambda f: df.to_csv(f, index=False, header=False, float_format=FLOAT_FORMAT,
                                             lineterminator="\n"))
    return path


def _write(path: str, header: List[str], body) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("\n".join(header) + "\n")
        body(f)
    logger.info("Wrote %s", path)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def write_manifest(path: str, manifest: Dict[str, Any]) -> str:
    """
    Write the run manifest as JSON
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(manifest), f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info("Wrote manifest %s", path)
    return path


def read_table(path: str) -> pd.DataFrame:
    """
    Read a table written by write_table
    """
    return pd.read_csv(path, comment="#")


def read_heatmap(path: str) -> Dict[str, Any]:
    """
    Read a heatmap written by write_heatmap back into its axes and values
    """
    axes: Dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            for kind in ("rows", "columns"):
                prefix = f"# {kind}: "
                if line.startswith(prefix):
                    _, values = line[len(prefix):].split(" = ", 1)
                    axes[kind] = np.array([float(v) for v in values.strip().split(",")])
    values = pd.read_csv(path, comment="#", header=None).to_numpy()
    return {"rows": axes.get("rows"), "columns": axes.get("columns"), "values": values}
