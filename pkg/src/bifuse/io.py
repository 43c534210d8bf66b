"""Matrix CSV and JSON reading/writing with atomic replacement.

CSV files are headerless, comma separated, one matrix row per line, LF line
endings, and written with 17 significant digits so values round-trip
exactly.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import InputError


def _atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_matrix(path, M):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise InputError("only 2-D matrices can be written as CSV")
    lines = [",".join(format(float(v), ".17g") for v in row) for row in M]
    _atomic_write(path, "".join(line + "\n" for line in lines))


def read_matrix(path) -> np.ndarray:
    """Read a headerless numeric CSV; errors name the offending line and field."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split(",")
        try:
            row = [float(f) for f in fields]
        except ValueError:
            bad = next(i for i, f in enumerate(fields, 1) if not _is_float(f))
            raise InputError(f"{path}:{lineno}: field {bad} is not a number: "
                             f"{fields[bad - 1].strip()!r}") from None
        if rows and len(row) != len(rows[0]):
            raise InputError(f"{path}:{lineno}: expected {len(rows[0])} fields, got {len(row)}")
        rows.append(row)
    if not rows:
        raise InputError(f"{path}: no data")
    M = np.array(rows, dtype=float)
    if not np.isfinite(M).all():
        raise InputError(f"{path}: contains non-finite values")
    return M


def _is_float(s) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"{type(o).__name__} is not JSON serialisable")


def write_json(path, obj):
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n")


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
