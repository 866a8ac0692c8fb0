"""Append-only JSON-lines result store and CSV export of ladders and matrices."""
from __future__ import annotations

import csv
import json
import warnings
from pathlib import Path

import numpy as np

from .errors import ConfigError

REQUIRED = ("config_hash", "seed")
LADDER_COLUMNS = ("kind", "D", "value_re", "value_im", "stderr")
MATRIX_COLUMNS = ("a", "b", "value_re", "value_im", "stderr")


class ResultStore:
    """Records carry ``config_hash`` and ``seed``; floats are written with ``repr`` precision."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, record: dict) -> dict:
        for key in REQUIRED:
            if record.get(key) is None:
                raise ValueError(f"result record without {key}")
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a") as fh:
            fh.write(json.dumps(record, sort_keys=True, default=_jsonable) + "\n")
        return record

    def records(self) -> list[dict]:
        if not self.path.exists():
            return []
        with self.path.open() as fh:
            return [json.loads(line) for line in fh if line.strip()]


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, tuple):
        return list(v)
    raise TypeError(f"not serializable: {type(v)}")


def make_record(cfg, *, D, value: complex, stderr: float, n_paths: int, n_steps: int, wall_ms: float,
                x=None, y=None, element=None, **extra) -> dict:
    rec = dict(config_hash=cfg.config_hash, model=cfg.kahler_model().kind, symbol=cfg.symbol_spec().describe(),
               D=None if D is None else float(D), t=float(cfg.mc.t), value_re=float(np.real(value)),
               value_im=float(np.imag(value)), stderr=float(stderr), n_paths=int(n_paths), n_steps=int(n_steps),
               seed=int(cfg.mc.seed), wall_ms=round(float(wall_ms), 3))
    if element is not None:
        rec["a"], rec["b"] = int(element[0]), int(element[1])
    else:
        rec["x"] = list(x) if x is not None else None
        rec["y"] = list(y) if y is not None else None
    rec.update(extra)
    return rec


def write_ladder_csv(path: str | Path, D, values, stderr, fit: tuple | None = None) -> Path:
    """One row per D (``kind = data``), then a ``fit`` row with ``D = inf`` and the limit."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LADDER_COLUMNS)
        for d, v, s in zip(D, values, stderr):
            w.writerow(("data", repr(float(d)), repr(float(np.real(v))), repr(float(np.imag(v))), repr(float(s))))
        if fit is not None:
            lim, err = fit
            w.writerow(("fit", "inf", repr(float(np.real(lim))), repr(float(np.imag(lim))), repr(float(err))))
    if len(D) == 0:
        warnings.warn(f"empty ladder: wrote header-only {path}", stacklevel=2)
    return path


def write_matrix_csv(path: str | Path, values, stderr) -> Path:
    """Row-major ``(a, b)`` rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.atleast_2d(np.asarray(values, dtype=complex))
    stderr = np.broadcast_to(np.asarray(stderr, dtype=float), values.shape) if np.size(values) else stderr
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MATRIX_COLUMNS)
        for a in range(values.shape[0]):
            for b in range(values.shape[1]):
                v = values[a, b]
                w.writerow((a, b, repr(float(v.real)), repr(float(v.imag)), repr(float(stderr[a, b]))))
    if values.size == 0:
        warnings.warn(f"empty matrix: wrote header-only {path}", stacklevel=2)
    return path


def emit_plot_data(artifact: str | Path, out: str | Path) -> Path:
    """Convert a JSON artifact written by the CLI (ladder or matrix) into CSV."""
    artifact = Path(artifact)
    if not artifact.exists():
        raise ConfigError(f"artifact {artifact} does not exist")
    data = json.loads(artifact.read_text())
    if data.get("kind") == "ladder":
        fit = None
        if data.get("limit_re") is not None:
            fit = (complex(data["limit_re"], data["limit_im"]), data["limit_stderr"])
        vals = [complex(r, i) for r, i in zip(data["value_re"], data["value_im"])]
        return write_ladder_csv(out, data["D"], vals, data["stderr"], fit)
    if data.get("kind") == "matrix":
        v = np.asarray(data["value_re"], dtype=float) + 1j * np.asarray(data["value_im"], dtype=float)
        return write_matrix_csv(out, v.reshape(np.shape(data["value_re"])), np.asarray(data["stderr"], dtype=float))
    raise ConfigError(f"artifact {artifact} is neither a ladder nor a matrix")
