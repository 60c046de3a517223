"""Balanced-panel data model, validation, and preprocessing.

Holds the observed panel (y, X), performs first differencing, and computes
the cross-sectional averages that serve as the factor proxy. Averages are
accumulated in ascending unit-label order with compensated (Kahan) summation
so that results are bit-stable across runs and unit orderings.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import (
    DuplicateCell,
    NonFiniteValue,
    PanelDataError,
    TooSmall,
    UnbalancedPanel,
)

__all__ = ["PanelData", "FactorProxy", "validate_panel", "load_panel_csv",
           "first_difference", "cross_sectional_average"]


@dataclass(frozen=True)
class PanelData:
    """Balanced N x T panel with d regressors.

    ``y`` is N x T and ``x`` is N x T x d, both stored read-only. Unit labels
    are unique; time labels are strictly increasing and only their order
    matters (differencing assumes unit spacing).
    """

    y: np.ndarray
    x: np.ndarray
    unit_labels: tuple
    time_labels: tuple

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        if y.ndim != 2 or x.ndim != 3:
            raise PanelDataError(f"expected y 2-d and x 3-d, got {y.ndim}-d and {x.ndim}-d")
        n, t = y.shape
        if x.shape[:2] != (n, t):
            raise PanelDataError(f"y shape {y.shape} inconsistent with x shape {x.shape}")
        if n < 1 or t < 2 or x.shape[2] < 1:
            raise TooSmall(f"need N >= 1, T >= 2, d >= 1; got N={n}, T={t}, d={x.shape[2]}")
        if len(self.unit_labels) != n or len(self.time_labels) != t:
            raise PanelDataError("label lengths inconsistent with data shapes")
        if len(set(self.unit_labels)) != n:
            raise PanelDataError("unit labels must be unique")
        if any(b <= a for a, b in zip(self.time_labels, self.time_labels[1:])):
            raise PanelDataError("time labels must be strictly increasing")
        if not np.isfinite(y).all() or not np.isfinite(x).all():
            raise NonFiniteValue("panel contains NaN or infinite entries")
        y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "unit_labels", tuple(self.unit_labels))
        object.__setattr__(self, "time_labels", tuple(self.time_labels))

    @property
    def n_units(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        return self.y.shape[1]

    @property
    def n_regressors(self) -> int:
        return self.x.shape[2]


@dataclass(frozen=True)
class FactorProxy:
    """Cross-sectional averages, T x (d+1), column order [ybar, x1bar, ..., xdbar]."""

    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise PanelDataError("factor proxy must be a 2-d array")
        if not np.isfinite(values).all():
            raise NonFiniteValue("factor proxy contains non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_periods(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]


def validate_panel(records) -> PanelData:
    """Build a PanelData from long-format records ``(unit, time, y, x1, ..., xd)``.

    Every (unit, time) pair must appear exactly once and the unit x time grid
    must be complete. Rows may arrive in any order; units are stored in
    ascending label order and periods in ascending time order.
    """
    records = list(records)
    if not records:
        raise PanelDataError("no records supplied")
    width = len(records[0])
    if width < 4:
        raise PanelDataError("records need at least (unit, time, y, x1)")
    d = width - 3

    cells: dict[tuple, tuple] = {}
    for rec in records:
        if len(rec) != width:
            raise PanelDataError(f"inconsistent record width: expected {width}, got {len(rec)}")
        unit, time = rec[0], rec[1]
        try:
            vals = tuple(float(v) for v in rec[2:])
        except (TypeError, ValueError) as exc:
            raise PanelDataError(f"non-numeric value in cell (unit={unit!r}, time={time!r})") from exc
        key = (unit, time)
        if key in cells:
            raise DuplicateCell(unit, time)
        cells[key] = vals

    units = sorted({u for u, _ in cells})
    times = sorted({t for _, t in cells})
    n, t_len = len(units), len(times)
    if n < 2 or t_len < 2:
        raise TooSmall(f"need N >= 2 and T >= 2; got N={n}, T={t_len}")

    y = np.empty((n, t_len))
    x = np.empty((n, t_len, d))
    for i, u in enumerate(units):
        for j, tm in enumerate(times):
            try:
                vals = cells[(u, tm)]
            except KeyError:
                raise UnbalancedPanel(u, tm) from None
            if not all(np.isfinite(vals)):
                raise NonFiniteValue(f"non-finite value in cell (unit={u!r}, time={tm!r})")
            y[i, j] = vals[0]
            x[i, j, :] = vals[1:]

    return PanelData(y=y, x=x, unit_labels=tuple(units), time_labels=tuple(times))


def load_panel_csv(path) -> PanelData:
    """Read a panel from CSV in the long format ``unit,time,y,x1,...,xd``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelDataError(f"{path}: empty file") from None
        header = [h.strip().lower() for h in header]
        if header[:3] != ["unit", "time", "y"]:
            raise PanelDataError(f"{path}: header must start with 'unit,time,y', got {header[:3]}")
        records = []
        for row in reader:
            if not row:
                continue
            unit = row[0].strip()
            try:
                time = int(row[1])
            except ValueError:
                raise PanelDataError(f"{path}: time label {row[1]!r} is not an integer") from None
            records.append((unit, time, *row[2:]))
    return validate_panel(records)


def first_difference(p: PanelData) -> PanelData:
    """First-difference y and every regressor column per unit.

    Returns a panel with T-1 periods; time labels are shifted to periods
    2..T of the source.
    """
    if p.n_periods < 3:
        raise TooSmall(f"first differencing needs T >= 3, got T={p.n_periods}")
    return PanelData(
        y=np.diff(p.y, axis=1),
        x=np.diff(p.x, axis=1),
        unit_labels=p.unit_labels,
        time_labels=p.time_labels[1:],
    )


def _kahan_mean(stacked: np.ndarray) -> np.ndarray:
    """Mean over axis 0 with compensated summation, accumulated in order."""
    total = np.zeros(stacked.shape[1:])
    comp = np.zeros_like(total)
    for row in stacked:
        adj = row - comp
        new = total + adj
        comp = (new - total) - adj
        total = new
    return total / stacked.shape[0]


def cross_sectional_average(p: PanelData) -> FactorProxy:
    """Average the observables z_it = [y_it, x_it'] over units.

    Accumulation runs in ascending unit-label order regardless of storage
    order, so the output is invariant to unit permutations bit for bit.
    """
    order = sorted(range(p.n_units), key=lambda i: p.unit_labels[i])
    z = np.concatenate([p.y[:, :, None], p.x], axis=2)  # N x T x (d+1)
    return FactorProxy(values=_kahan_mean(z[order]))
