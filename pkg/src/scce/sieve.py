"""Sieve basis construction from the factor proxy.

Each proxy column is expanded through a univariate basis (truncated-power
cubic splines by default, Hermite and raw power series as alternatives) and
the per-column blocks are concatenated into the T x K design matrix used by
the annihilator. Knots sit at empirical quantiles of the proxy column.

The concatenated layout puts a 1 in every per-column block, so the matrix is
rank-deficient by construction; downstream projections go through the
Moore-Penrose pseudo-inverse and are invariant to the duplicated columns.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ScceError
from .panel import FactorProxy

__all__ = ["BasisKind", "BasisFamily", "KnotRate", "SieveBasis",
           "knot_count", "compute_knots", "spline_basis_vector", "build_sieve_matrix"]

TAG_CONSTANT = "constant"
TAG_LINEAR = "linear"
TAG_NONLINEAR = "nonlinear"


class BasisKind(str, enum.Enum):
    CUBIC_SPLINE = "cubic_spline"
    HERMITE = "hermite"
    POWER_SERIES = "power_series"


class KnotRate(str, enum.Enum):
    """Root of T used by the knot-count rule J = C * floor(T**(1/r))."""

    QUARTER = "quarter"
    THIRD = "third"
    FIFTH = "fifth"
    TENTH = "tenth"

    @property
    def root(self) -> int:
        return {"quarter": 4, "third": 3, "fifth": 5, "tenth": 10}[self.value]


@dataclass(frozen=True)
class BasisFamily:
    """Basis family and polynomial degree (cubic splines are fixed at 3)."""

    kind: BasisKind = BasisKind.CUBIC_SPLINE
    degree: int = 3

    def __post_init__(self):
        if self.degree < 1:
            raise ScceError("basis degree must be positive")
        if self.kind == BasisKind.CUBIC_SPLINE and self.degree != 3:
            raise ScceError("cubic splines require degree 3")


@dataclass(frozen=True)
class SieveBasis:
    """T x K basis matrix with knot metadata and per-column provenance tags."""

    matrix: np.ndarray
    knots: tuple  # per source column, ascending knot values
    family: BasisFamily
    j_requested: int
    column_tags: tuple

    def __post_init__(self):
        matrix = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if len(self.column_tags) != matrix.shape[1]:
            raise ScceError("column tag count must equal basis width")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def n_columns(self) -> int:
        return self.matrix.shape[1]

    def columns_tagged(self, *tags) -> np.ndarray:
        """Return the sub-matrix of columns whose tag is in ``tags``."""
        mask = np.array([t in tags for t in self.column_tags])
        return self.matrix[:, mask]


def knot_count(t_periods: int, c_multiplier: int = 1, rate: KnotRate = KnotRate.QUARTER) -> int:
    """Number of knots J = C * floor(T**(1/r)), never negative.

    A tiny epsilon guards the floor against representation error at exact
    integer roots (e.g. T = 81 at the quarter rate).
    """
    if t_periods < 2:
        raise ScceError(f"knot rule needs T >= 2, got {t_periods}")
    if c_multiplier < 1:
        raise ScceError("knot multiplier must be a positive integer")
    return max(0, c_multiplier * math.floor(t_periods ** (1.0 / rate.root) + 1e-9))


def compute_knots(series: np.ndarray, j: int) -> np.ndarray:
    """Knots at the k/(j+1) empirical quantiles, k = 1..j.

    Quantiles use the linear-interpolation convention h = (T-1)p on the
    sorted values. Tied knots collapse to a single value, so the output is
    strictly increasing and possibly shorter than ``j``.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 1 or series.size < 2:
        raise ScceError("knot placement needs a 1-d series of length >= 2")
    if j <= 0:
        return np.empty(0)
    probs = np.arange(1, j + 1) / (j + 1)
    return np.unique(np.quantile(series, probs, method="linear"))


def spline_basis_vector(value: float, knots: np.ndarray) -> np.ndarray:
    """Truncated-power cubic terms [1, v, v^2, v^3, (v - knot_j)_+^3, ...]."""
    return _spline_block(np.atleast_1d(np.asarray(value, dtype=np.float64)), np.asarray(knots))[0]


def _spline_block(col: np.ndarray, knots: np.ndarray) -> np.ndarray:
    poly = col[:, None] ** np.arange(4)
    if knots.size == 0:
        return poly
    trunc = np.maximum(col[:, None] - knots[None, :], 0.0) ** 3
    return np.hstack([poly, trunc])


def _hermite_block(col: np.ndarray, max_degree: int) -> np.ndarray:
    """Probabilists' Hermite polynomials He_0..He_max evaluated columnwise."""
    out = np.empty((col.size, max_degree + 1))
    out[:, 0] = 1.0
    if max_degree >= 1:
        out[:, 1] = col
    for n in range(1, max_degree):
        out[:, n + 1] = col * out[:, n] - n * out[:, n - 1]
    return out


def _power_block(col: np.ndarray, max_degree: int) -> np.ndarray:
    return col[:, None] ** np.arange(max_degree + 1)


def build_sieve_matrix(proxy: FactorProxy, family: BasisFamily = BasisFamily(),
                       j: int = 0) -> SieveBasis:
    """Expand every proxy column through the family's basis and concatenate.

    For splines each block has 4 + |knots| columns with knots placed per
    column; Hermite and power-series blocks share the spline block width
    (degree + 1 + j columns) with knots unused. In each block the leading 1
    is tagged constant, the degree-1 term linear, and the rest nonlinear.
    """
    if j < 0:
        raise ScceError("knot count must be >= 0")
    blocks, knots_all, tags = [], [], []
    for r in range(proxy.n_columns):
        col = proxy.values[:, r]
        if family.kind == BasisKind.CUBIC_SPLINE:
            knots = compute_knots(col, j)
            block = _spline_block(col, knots)
        else:
            knots = np.empty(0)
            max_degree = family.degree + j
            if family.kind == BasisKind.HERMITE:
                block = _hermite_block(col, max_degree)
            else:
                block = _power_block(col, max_degree)
        blocks.append(block)
        knots_all.append(knots)
        tags.extend([TAG_CONSTANT, TAG_LINEAR] + [TAG_NONLINEAR] * (block.shape[1] - 2))
    return SieveBasis(
        matrix=np.hstack(blocks),
        knots=tuple(knots_all),
        family=family,
        j_requested=j,
        column_tags=tuple(tags),
    )
