"""Scenario files and CSV datasets.

Scenario files are flat ``key = value`` lines; ``#`` starts a comment and
blank lines are ignored.  Datasets are CSV with a one-line ``# key=value``
parameter echo, a header row, then numbers printed with ``%.17g`` so they
read back bit-for-bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

COMMANDS = ("spectrum", "bound-states", "propagate", "thermal", "density-matrix", "lattice", "sweep", "compare-bm")


class ConfigError(ValueError):
    """Invalid scenario file; the message carries the file, line and key."""


@dataclass
class _Entry:
    value: str
    line: int


@dataclass
class ConfigFile:
    path: str
    entries: dict = field(default_factory=dict)
    used: set = field(default_factory=set)

    def _fail(self, key, why):
        where = f"{self.path}:{self.entries[key].line}" if key in self.entries else self.path
        raise ConfigError(f"{where}: field '{key}': {why}")

    def has(self, key) -> bool:
        return key in self.entries

    def raw(self, key, default=None):
        self.used.add(key)
        return self.entries[key].value if key in self.entries else default

    def get_float(self, key, default=None, lo=None, hi=None, lo_open=False):
        text = self.raw(key)
        if text is None:
            if default is None:
                self._fail(key, "required")
            return default
        try:
            val = float(text)
        except ValueError:
            self._fail(key, f"expected a number, got {text!r}")
        if not math.isfinite(val):
            self._fail(key, "must be finite")
        if lo is not None and (val < lo or (lo_open and val == lo)):
            self._fail(key, f"must be {'>' if lo_open else '>='} {lo}, got {val}")
        if hi is not None and val > hi:
            self._fail(key, f"must be <= {hi}, got {val}")
        return val

    def get_int(self, key, default=None, lo=None):
        text = self.raw(key)
        if text is None:
            if default is None:
                self._fail(key, "required")
            return default
        try:
            val = int(text)
        except ValueError:
            self._fail(key, f"expected an integer, got {text!r}")
        if lo is not None and val < lo:
            self._fail(key, f"must be >= {lo}, got {val}")
        return val

    def get_choice(self, key, choices, default):
        val = self.raw(key, default)
        if val not in choices:
            self._fail(key, f"must be one of {', '.join(choices)}, got {val!r}")
        return val

    def get_bool(self, key, default=False):
        val = self.raw(key)
        if val is None:
            return default
        low = val.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        self._fail(key, f"expected a boolean, got {val!r}")

    def get_list(self, key, default=None, kind=float):
        text = self.raw(key)
        if text is None:
            if default is None:
                self._fail(key, "required")
            return list(default)
        items = [s.strip() for s in text.split(",") if s.strip()]
        try:
            out = [kind(s) for s in items]
        except ValueError:
            self._fail(key, f"expected a comma-separated list, got {text!r}")
        if not out:
            self._fail(key, "list is empty")
        return out

    def get_sites(self, key, default=()):
        text = self.raw(key)
        if text is None:
            return list(default)
        sites = []
        for item in text.split(","):
            parts = item.strip().split(":")
            try:
                x, y = (int(p) for p in parts)
            except ValueError:
                self._fail(key, f"sites are written x:y, got {item.strip()!r}")
            sites.append((x, y))
        return sites

    def unused(self):
        return sorted(set(self.entries) - self.used)


def parse_config(text: str, path: str = "<config>") -> ConfigFile:
    """Parse ``key = value`` lines; duplicate or malformed lines are errors."""
    cfg = ConfigFile(path)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: missing key")
        if key in cfg.entries:
            raise ConfigError(f"{path}:{lineno}: field '{key}' repeats line {cfg.entries[key].line}")
        cfg.entries[key] = _Entry(value, lineno)
    return cfg


def load_config(path) -> ConfigFile:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read scenario file ({exc.strerror})") from None
    return parse_config(text, str(path))


# --- CSV ----------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def write_csv(path, columns, rows, params=None) -> Path:
    """Write a dataset; ``rows`` is any 2-D array-like matching ``columns``."""
    path = Path(path)
    echo = dict(params or {})
    echo["version"] = __version__
    for k, v in echo.items():
        if any(c.isspace() for c in _fmt(v)) or "=" in str(k):
            raise ValueError(f"parameter {k}={v!r} cannot be echoed on one line")
    rows = list(rows) if not isinstance(rows, np.ndarray) else rows
    with path.open("w", newline="") as fh:
        fh.write("# " + " ".join(f"{k}={_fmt(v)}" for k, v in echo.items()) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError("row length does not match the header")
            w.writerow([_fmt(v) for v in row])
    return path


@dataclass
class Dataset:
    params: dict
    columns: list
    rows: list

    def column(self, name) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])


def _parse_cell(text):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path) -> Dataset:
    """Read a dataset written by :func:`write_csv`."""
    with Path(path).open(newline="") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing parameter echo line")
        params = {}
        for item in first[2:].split():
            k, _, v = item.partition("=")
            params[k] = _parse_cell(v)
        reader = csv.reader(fh)
        columns = next(reader)
        rows = [[_parse_cell(c) for c in row] for row in reader]
    return Dataset(params, columns, rows)
