"""Periodic matrix-valued curves.

Three interchangeable representations, all exposing ``shape``, ``period``
and ``eval(t)``:

* ``MatrixCurve``: entries are trigonometric polynomials (the native
  form for model coefficients),
* ``TableCurve``: piecewise-constant on a uniform grid, left-continuous,
* ``GridCurve``: cubic Hermite interpolation of dense samples, used for
  synthesized gain curves that have no closed form.

Evaluation reduces the argument modulo the period first, so periodicity
is structural rather than numerical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SizeMismatch, ValidationError

__all__ = [
    "TrigPolynomial",
    "MatrixCurve",
    "TableCurve",
    "GridCurve",
    "constant_curve",
]


@dataclass(frozen=True)
class TrigPolynomial:
    """c0 + sum_k (a_k cos(k w t) + b_k sin(k w t)) with w = 2 pi / period."""

    period: float
    const: float = 0.0
    # parallel arrays: harmonic index k, cosine and sine coefficients
    harmonics: tuple[int, ...] = ()
    cos_coefs: tuple[float, ...] = ()
    sin_coefs: tuple[float, ...] = ()

    def __post_init__(self):
        if self.period <= 0.0:
            raise ValidationError("period must be positive")
        if not (len(self.harmonics) == len(self.cos_coefs) == len(self.sin_coefs)):
            raise ValidationError("harmonic arrays must have equal length")
        if any(k <= 0 for k in self.harmonics):
            raise ValidationError("harmonic indices must be positive integers")

    def eval(self, t):
        """Evaluate at scalar or array t (vectorized)."""
        phase = np.asarray(t, dtype=float) % self.period
        omega = 2.0 * np.pi / self.period
        out = np.full_like(phase, self.const, dtype=float)
        for k, a, b in zip(self.harmonics, self.cos_coefs, self.sin_coefs):
            ang = (k * omega) * phase
            out = out + a * np.cos(ang) + b * np.sin(ang)
        if np.ndim(t) == 0:
            return float(out)
        return out

    def __call__(self, t):
        return self.eval(t)


def _as_trig(entry, period: float) -> TrigPolynomial:
    if isinstance(entry, TrigPolynomial):
        if abs(entry.period - period) > 1e-12 * period:
            raise ValidationError("entry period disagrees with curve period")
        return entry
    return TrigPolynomial(period=period, const=float(entry))


@dataclass(frozen=True)
class MatrixCurve:
    """Matrix whose entries are trigonometric polynomials of a shared period."""

    period: float
    entries: tuple  # tuple of rows, each a tuple of TrigPolynomial

    @staticmethod
    def from_entries(entries, period: float) -> "MatrixCurve":
        rows = tuple(
            tuple(_as_trig(e, period) for e in row) for row in entries
        )
        if not rows or not rows[0]:
            raise ValidationError("curve must have at least one entry")
        ncols = len(rows[0])
        if any(len(r) != ncols for r in rows):
            raise SizeMismatch("ragged entry rows")
        return MatrixCurve(period=period, entries=rows)

    @staticmethod
    def constant(values, period: float) -> "MatrixCurve":
        arr = np.atleast_2d(np.asarray(values, dtype=float))
        return MatrixCurve.from_entries(arr.tolist(), period)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.entries), len(self.entries[0]))

    def eval(self, t: float) -> np.ndarray:
        n, m = self.shape
        out = np.empty((n, m))
        for i in range(n):
            for j in range(m):
                out[i, j] = self.entries[i][j].eval(t)
        return out

    def eval_many(self, ts: np.ndarray) -> np.ndarray:
        """Evaluate on a 1-d array of times, returns (len(ts), n, m)."""
        ts = np.asarray(ts, dtype=float)
        n, m = self.shape
        out = np.empty((ts.size, n, m))
        for i in range(n):
            for j in range(m):
                out[:, i, j] = self.entries[i][j].eval(ts)
        return out

    def __call__(self, t):
        return self.eval(t)


@dataclass(frozen=True)
class TableCurve:
    """Piecewise-constant curve on a uniform grid over one period.

    ``table[k]`` holds the value on [k h, (k+1) h) with h = period / len(table).
    """

    period: float
    table: np.ndarray = field(repr=False)  # (grid, n, m)

    @staticmethod
    def from_table(table, period: float) -> "TableCurve":
        arr = np.asarray(table, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None, None]
        elif arr.ndim == 2:
            # one matrix per row is ambiguous for vectors; treat rows as
            # scalar-per-node only when entries are scalars
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[0] < 1:
            raise ValidationError("table must be (grid, n, m)")
        return TableCurve(period=float(period), table=arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.table.shape[1:]

    def eval(self, t: float) -> np.ndarray:
        h = self.period / self.table.shape[0]
        k = int((float(t) % self.period) / h)
        k = min(k, self.table.shape[0] - 1)
        return self.table[k].copy()

    def eval_many(self, ts: np.ndarray) -> np.ndarray:
        h = self.period / self.table.shape[0]
        idx = np.minimum(
            ((np.asarray(ts, dtype=float) % self.period) / h).astype(int),
            self.table.shape[0] - 1,
        )
        return self.table[idx]

    def __call__(self, t):
        return self.eval(t)


class GridCurve:
    """Cubic Hermite interpolant of samples on a uniform periodic grid.

    Stores values and time-derivatives at nodes t_i = i * period / nodes,
    i = 0..nodes (both endpoints kept; eval uses the reduced phase so
    eval(period) returns the node-0 value).
    """

    def __init__(self, period: float, values: np.ndarray, derivs: np.ndarray):
        values = np.asarray(values, dtype=float)
        derivs = np.asarray(derivs, dtype=float)
        if values.shape != derivs.shape or values.shape[0] < 2:
            raise ValidationError("values/derivs must match and hold >= 2 nodes")
        self.period = float(period)
        self.values = values
        self.derivs = derivs

    @staticmethod
    def from_samples(values, period: float) -> "GridCurve":
        """Build from node values alone; derivatives by 4th-order periodic
        central differences. values[0] and values[-1] should agree."""
        v = np.asarray(values, dtype=float)
        n = v.shape[0] - 1
        if n < 4:
            raise ValidationError("need at least 5 nodes")
        h = period / n
        core = v[:-1]  # one period without the duplicate endpoint
        d = (
            -np.roll(core, -2, axis=0)
            + 8.0 * np.roll(core, -1, axis=0)
            - 8.0 * np.roll(core, 1, axis=0)
            + np.roll(core, 2, axis=0)
        ) / (12.0 * h)
        derivs = np.concatenate([d, d[:1]], axis=0)
        return GridCurve(period, v, derivs)

    @property
    def shape(self):
        return self.values.shape[1:]

    def _locate(self, t: float):
        n = self.values.shape[0] - 1
        h = self.period / n
        phase = float(t) % self.period
        i = min(int(phase / h), n - 1)
        s = (phase - i * h) / h
        return i, s, h

    def eval(self, t: float) -> np.ndarray:
        i, s, h = self._locate(t)
        h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
        h10 = s * (1.0 - s) ** 2
        h01 = s * s * (3.0 - 2.0 * s)
        h11 = s * s * (s - 1.0)
        return (
            h00 * self.values[i]
            + (h10 * h) * self.derivs[i]
            + h01 * self.values[i + 1]
            + (h11 * h) * self.derivs[i + 1]
        )

    def eval_deriv(self, t: float) -> np.ndarray:
        i, s, h = self._locate(t)
        d00 = 6.0 * s * (s - 1.0) / h
        d10 = (3.0 * s - 1.0) * (s - 1.0)
        d01 = -d00
        d11 = s * (3.0 * s - 2.0)
        return (
            d00 * self.values[i]
            + d10 * self.derivs[i]
            + d01 * self.values[i + 1]
            + d11 * self.derivs[i + 1]
        )

    def eval_many(self, ts) -> np.ndarray:
        return np.stack([self.eval(t) for t in np.asarray(ts, dtype=float)])

    def __call__(self, t):
        return self.eval(t)


def constant_curve(values, period: float) -> MatrixCurve:
    return MatrixCurve.constant(values, period)
