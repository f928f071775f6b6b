"""Piecewise-constant time series used for drives and detunings.

A Schedule holds samples on a uniform grid and evaluates as a step
function: value(t) = samples[floor((t - t0)/dt)], clipped to the grid.
CSV round-trips use columns t, value_re and, for complex data, value_im.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class Schedule:
    t0: float
    dt: float
    values: np.ndarray
    unit: str = "dimensionless"

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.values))
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("values must be a non-empty 1-D array")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not np.iscomplexobj(vals):
            vals = vals.astype(float)
        vals = np.ascontiguousarray(vals)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @staticmethod
    def constant(value, t0: float = 0.0, dt: float = 1.0, n: int = 1,
                 unit: str = "dimensionless") -> "Schedule":
        return Schedule(t0, dt, np.full(n, value), unit)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def t_end(self) -> float:
        """Right edge of the last sample interval."""
        return self.t0 + self.n * self.dt

    def grid(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    def is_complex(self) -> bool:
        return bool(np.iscomplexobj(self.values))

    def at(self, t) -> np.ndarray | float | complex:
        idx = np.floor((np.asarray(t, float) - self.t0) / self.dt).astype(int)
        idx = np.clip(idx, 0, self.n - 1)
        out = self.values[idx]
        return out if out.ndim else out[()]

    def map(self, fn, unit: str | None = None) -> "Schedule":
        return Schedule(self.t0, self.dt, fn(self.values),
                        self.unit if unit is None else unit)

    def to_csv(self, path, time_unit: str = "1/gamma"):
        with open(path, "w", newline="") as fh:
            self.write_csv(fh, time_unit)

    def write_csv(self, fh, time_unit: str = "1/gamma"):
        w = csv.writer(fh)
        cols = [f"t[{time_unit}]", "value_re"]
        cplx = self.is_complex()
        if cplx:
            cols.append("value_im")
        w.writerow(cols)
        for t, v in zip(self.grid(), self.values):
            row = [repr(float(t)), repr(float(np.real(v)))]
            if cplx:
                row.append(repr(float(np.imag(v))))
            w.writerow(row)

    @staticmethod
    def from_csv(path, unit: str = "dimensionless") -> "Schedule":
        if hasattr(path, "read"):
            rows = list(csv.reader(path))
        else:
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
        if not rows or len(rows) < 3:
            raise ValueError("schedule CSV needs a header and at least 2 rows")
        header = [h.strip() for h in rows[0]]
        if len(header) < 2 or not header[0].startswith("t"):
            raise ValueError(f"unrecognized schedule header {header}")
        has_im = len(header) >= 3
        data = np.array([[float(c) for c in r] for r in rows[1:] if r])
        t = data[:, 0]
        steps = np.diff(t)
        dt = float(steps[0])
        if dt <= 0 or np.abs(steps - dt).max() > 1e-9 * max(abs(dt), 1.0):
            raise ValueError("schedule CSV time column must be uniform")
        vals = data[:, 1] + (1j * data[:, 2] if has_im else 0.0)
        return Schedule(float(t[0]), dt, vals, unit)

    def to_csv_string(self, time_unit: str = "1/gamma") -> str:
        buf = io.StringIO()
        self.write_csv(buf, time_unit)
        return buf.getvalue()
