"""Model, dataset and report files."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .rbm import DeepStack, RbmLayer


class SchemaError(ValueError):
    """A file does not follow the documented schema; the message names where."""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: Path | str, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def write_csv(path: Path | str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


def model_to_dict(stack: DeepStack) -> dict:
    return {
        "layers": [
            {"W": L.weights.tolist(), "a": L.hidden_bias.tolist(), "b": L.visible_bias.tolist()}
            for L in stack.layers
        ],
        "meta": stack.meta,
    }


def model_from_dict(d: dict, source: str = "<model>") -> DeepStack:
    if not isinstance(d, dict) or not isinstance(d.get("layers"), list) or not d["layers"]:
        raise SchemaError(f"{source}: expected an object with a non-empty 'layers' array")
    layers = []
    for i, L in enumerate(d["layers"]):
        for key in ("W", "a", "b"):
            if key not in L:
                raise SchemaError(f"{source}: layers[{i}] is missing field '{key}'")
        try:
            layers.append(RbmLayer(np.array(L["W"], dtype=float), np.array(L["a"], dtype=float),
                                   np.array(L["b"], dtype=float)))
        except (ValueError, TypeError) as exc:
            raise SchemaError(f"{source}: layers[{i}]: {exc}") from exc
    meta = d.get("meta", {})
    if not isinstance(meta, dict):
        raise SchemaError(f"{source}: 'meta' must be an object")
    try:
        return DeepStack(tuple(layers), dict(meta))
    except ValueError as exc:
        raise SchemaError(f"{source}: {exc}") from exc


def save_model(path: Path | str, stack: DeepStack) -> Path:
    return write_json(path, model_to_dict(stack))


def load_model(path: Path | str) -> DeepStack:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return model_from_dict(d, str(path))


def write_dataset(path: Path | str, X: np.ndarray, y: Sequence[int]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for row, label in zip(np.asarray(X), y):
            fh.write(json.dumps({"x": [int(v) if float(v).is_integer() else float(v) for v in row],
                                 "y": int(label)}) + "\n")
    return path


def load_dataset(path: Path | str) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``{"x": [...], "y": int}``; ``y`` may be omitted (label -1)."""
    path = Path(path)
    X, y = [], []
    width = None
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(rec, dict) or "x" not in rec:
            raise SchemaError(f"{path}:{lineno}: missing field 'x'")
        x = rec["x"]
        if not isinstance(x, list) or not all(isinstance(v, (int, float)) for v in x):
            raise SchemaError(f"{path}:{lineno}: field 'x' must be an array of numbers")
        if any(v < 0 or v > 1 for v in x):
            raise SchemaError(f"{path}:{lineno}: field 'x' has entries outside [0, 1]")
        if width is None:
            width = len(x)
        elif len(x) != width:
            raise SchemaError(f"{path}:{lineno}: field 'x' has length {len(x)}, expected {width}")
        label = rec.get("y", -1)
        if not isinstance(label, int) or isinstance(label, bool):
            raise SchemaError(f"{path}:{lineno}: field 'y' must be an integer")
        X.append(x)
        y.append(label)
    if not X:
        raise SchemaError(f"{path}: empty dataset")
    return np.array(X, dtype=float), np.array(y, dtype=int)
