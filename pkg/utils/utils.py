import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import numpy as np

from utils.logging_setup import get_logger

logger = get_logger("utils")


class NumpyJSONEncoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, Path):
            return str(o)
        return super().default(o)


class Utils:

    @staticmethod
    def stable_sum(values: Iterable[float]) -> float:
        """Correctly rounded sum: the result does not depend on how the terms were blocked."""
        return math.fsum(np.asarray(values, dtype=float).ravel())

    @staticmethod
    def stable_column_sums(matrix: np.ndarray) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim == 1:
            return np.array([Utils.stable_sum(matrix)])
        if matrix.shape[0] == 0:
            return np.zeros(matrix.shape[1:])
        flat = matrix.reshape(matrix.shape[0], -1)
        sums = np.array([math.fsum(flat[:, k]) for k in range(flat.shape[1])])
        return sums.reshape(matrix.shape[1:])

    @staticmethod
    def stable_segment_sums(values: np.ndarray, segment_ids: np.ndarray, n_segments: int) -> np.ndarray:
        """
        Sum values (rows) by segment id with fsum per segment.

        values has shape (m,) or (m, k); segment ids need not be sorted.
        """
        values = np.asarray(values, dtype=float)
        out_shape = (n_segments,) + values.shape[1:]
        out = np.zeros(out_shape)
        if values.shape[0] == 0:
            return out
        order = np.argsort(segment_ids, kind="stable")
        ids = np.asarray(segment_ids)[order]
        vals = values[order]
        boundaries = np.flatnonzero(np.diff(ids)) + 1
        starts = np.concatenate(([0], boundaries))
        stops = np.concatenate((boundaries, [len(ids)]))
        for start, stop in zip(starts, stops):
            seg = ids[start]
            if vals.ndim == 1:
                out[seg] = math.fsum(vals[start:stop])
            else:
                out[seg] = Utils.stable_column_sums(vals[start:stop])
        return out

    @staticmethod
    def ensure_dir(path) -> Path:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        return path

    @staticmethod
    def write_json(path, obj: Any) -> Path:
        path = Path(path)
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(obj, f, indent=2, cls=NumpyJSONEncoder, allow_nan=True)
            f.write("\n")
        logger.debug(f"Wrote {path}")
        return path

    @staticmethod
    def read_json(path) -> Any:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)

    @staticmethod
    def write_csv(path, rows: List[Dict], fieldnames: Optional[List[str]] = None, float_format: str = "%.10g") -> Path:
        """Rows of dicts as CSV; floats go through format_float so files are reproducible."""
        path = Path(path)
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        fieldnames = fieldnames or (list(rows[0].keys()) if rows else [])
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({key: Utils.format_float(value, float_format) if isinstance(value, (float, np.floating)) else value
                                 for key, value in row.items()})
        logger.debug(f"Wrote {path}")
        return path

    @staticmethod
    def format_float(value: float, float_format: str = "%.10g") -> str:
        if value is None:
            return ""
        if isinstance(value, (float, np.floating)) and not math.isfinite(value):
            return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
        return float_format % value
