"""On-disk formats: dataset/result CSVs and the versioned JSON model container.

CSV files have a header row, ``.`` decimals, ``\\n`` line endings and floats
written with ``repr`` (shortest round-trip form).  Arrays inside model files
are stored as base64 of little-endian float64 bytes in row-major order, so a
save/load cycle is bit exact.
"""

from __future__ import annotations

import base64
import csv
import json
import os

import numpy as np

from .density_matrix import DensityMatrixModel
from .errors import InvalidArgumentError
from .kernelspace import FeatureMap

__all__ = [
    "MODEL_FORMAT",
    "MODEL_FORMAT_VERSION",
    "encode_array",
    "decode_array",
    "feature_map_to_dict",
    "feature_map_from_dict",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "write_dataset_csv",
    "read_dataset_csv",
    "write_rows_csv",
    "write_json",
]

MODEL_FORMAT = "qaffde-model"
MODEL_FORMAT_VERSION = 1


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"dtype": "<f8", "shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def decode_array(rec: dict) -> np.ndarray:
    if rec.get("dtype") != "<f8":
        raise InvalidArgumentError(f"unsupported array dtype {rec.get('dtype')!r}")
    raw = base64.b64decode(rec["data"])
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(rec["shape"])


def feature_map_to_dict(fmap: FeatureMap) -> dict:
    return {
        "d": fmap.dim,
        "D": fmap.num_features,
        "gamma_target": fmap.gamma_target,
        "normalize": fmap.normalize,
        "W": encode_array(fmap.W),
        "b": encode_array(fmap.b),
    }


def feature_map_from_dict(rec: dict) -> FeatureMap:
    W = decode_array(rec["W"])
    b = decode_array(rec["b"])
    if W.shape != (rec["D"], rec["d"]):
        raise InvalidArgumentError("feature map record has inconsistent shapes")
    return FeatureMap(W, b, rec["gamma_target"], rec["normalize"])


def model_to_dict(model: DensityMatrixModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "gamma": model.gamma,
        "norm_const": model.norm_const,
        "rank": model.rank,
        "feature_map": feature_map_to_dict(model.feature_map),
        "V": encode_array(model.V),
        "Lambda": encode_array(model.Lambda),
    }


def model_from_dict(rec: dict) -> DensityMatrixModel:
    if rec.get("format") != MODEL_FORMAT:
        raise InvalidArgumentError("not a qaffde model file")
    if rec.get("format_version") != MODEL_FORMAT_VERSION:
        raise InvalidArgumentError(f"unsupported model format version {rec.get('format_version')!r}")
    model = DensityMatrixModel(
        decode_array(rec["V"]),
        decode_array(rec["Lambda"]),
        feature_map_from_dict(rec["feature_map"]),
        rec["norm_const"],
    )
    if model.rank != rec["rank"]:
        raise InvalidArgumentError("model record rank does not match V")
    return model


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_model(path, model: DensityMatrixModel) -> None:
    write_json(path, model_to_dict(model))


def load_model(path) -> DensityMatrixModel:
    with open(path, encoding="utf-8") as fh:
        try:
            rec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"{path}: not a JSON model file ({exc})") from exc
    return model_from_dict(rec)


def write_rows_csv(path, fieldnames, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fieldnames)
        for row in rows:
            if isinstance(row, dict):
                row = [row[k] for k in fieldnames]
            w.writerow([_fmt(v) for v in row])


def write_dataset_csv(path, points, true_density=None, labels=None) -> None:
    """Columns ``x1..xd`` then optional ``true_density`` and ``label``."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    header = [f"x{i + 1}" for i in range(X.shape[1])]
    cols = [X[:, i] for i in range(X.shape[1])]
    if true_density is not None:
        header.append("true_density")
        cols.append(np.asarray(true_density, dtype=np.float64))
    if labels is not None:
        header.append("label")
        cols.append(list(labels))
    write_rows_csv(path, header, zip(*cols))


def _parse_label(s: str):
    try:
        return int(s)
    except ValueError:
        return s


def read_dataset_csv(path) -> tuple[np.ndarray, np.ndarray | None, list | None]:
    """Read a dataset CSV; returns ``(points, true_density or None, labels or None)``."""
    if not os.path.exists(path):
        raise InvalidArgumentError(f"{path}: no such file")
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidArgumentError(f"{path}: empty file")
    header = rows[0]
    xcols = [i for i, h in enumerate(header) if h.startswith("x") and h[1:].isdigit()]
    if not xcols:
        raise InvalidArgumentError(f"{path}: no x1..xd columns in header")
    body = rows[1:]
    try:
        X = np.array([[float(r[i]) for i in xcols] for r in body], dtype=np.float64).reshape(len(body), len(xcols))
        td = None
        if "true_density" in header:
            j = header.index("true_density")
            td = np.array([float(r[j]) for r in body], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise InvalidArgumentError(f"{path}: malformed row ({exc})") from exc
    labels = None
    if "label" in header:
        j = header.index("label")
        labels = [_parse_label(r[j]) for r in body]
    return X, td, labels
