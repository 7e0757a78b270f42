"""CSV/JSON emission with provenance headers, and their readers."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np



def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))  # shortest string that round-trips
    return str(x)


def write_csv(path, header, rows, config_hash: str, meta: dict | None = None) -> Path:
    """Write rows under a ``# config_hash=...`` comment line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        line = f"# config_hash={config_hash}"
        for k, v in (meta or {}).items():
            line += f" {k}={v}"
        f.write(line + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def read_csv(path):
    """Return (meta, header, float array) for a file written by :func:`write_csv`."""
    meta, header, data = {}, None, []
    with open(path, newline="") as f:
        for line in f:
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    meta[key] = val
                continue
            row = next(csv.reader([line]))
            if header is None:
                header = row
            else:
                data.append([float(x) for x in row])
    arr = np.array(data, dtype=float).reshape(-1, len(header) if header else 0)
    return meta, header, arr


def write_json(path, payload: dict, config_hash: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"config_hash": config_hash, **payload}
    path.write_text(json.dumps(body, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, (np.bool_,)):
        return bool(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")
