"""Annihilator projections and the pooled / mean-group coefficient estimators.

The sieve estimator projects the sieve basis out of each unit's data with a
shared annihilator and solves the pooled normal equations; the CCEP and CCEMG
baselines do the same with the linear proxy [1, F_hat]. The production path
never materialises the T x T projection matrix: residuals are computed as
X - U (U' X) from an orthonormal basis U of the projection columns.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ScceError, SingularDesign, SingularUnit, TooSmall
from .panel import FactorProxy, PanelData, cross_sectional_average
from .sieve import BasisFamily, KnotRate, SieveBasis, build_sieve_matrix, knot_count

__all__ = ["Method", "EstimationResult", "annihilate", "scce_estimate",
           "ccep_estimate", "ccemg_estimate", "estimate_panel"]

# Relative eigenvalue gate for pooled and per-unit Gram matrices.
_EIG_GATE = 1e-10


class Method(str, enum.Enum):
    SCCE = "scce"
    CCEP = "ccep"
    CCEMG = "ccemg"


@dataclass(frozen=True)
class EstimationResult:
    """Coefficients plus the projected residual matrices used for inference.

    ``eps_hat`` (N x T) and ``v_hat`` (N x T x d) lie in the orthogonal
    complement of the projection columns. ``per_unit_betas`` is populated by
    the mean-group estimator only.
    """

    beta: np.ndarray
    method: Method
    eps_hat: np.ndarray
    v_hat: np.ndarray
    projection_rank: int
    per_unit_betas: np.ndarray | None = None

    @property
    def n_units(self) -> int:
        return self.eps_hat.shape[0]

    @property
    def n_periods(self) -> int:
        return self.eps_hat.shape[1]

    @property
    def n_regressors(self) -> int:
        return self.v_hat.shape[2]


def _orthonormal_span(columns: np.ndarray) -> tuple[np.ndarray, int]:
    """Orthonormal basis of the column span, with rank by the SVD cutoff.

    Singular values below max(T, K) * eps * sigma_max are treated as zero,
    which makes the projection invariant to duplicated or collinear columns.
    """
    t, k = columns.shape
    if k == 0 or not columns.any():
        return np.zeros((t, 0)), 0
    u, s, _ = np.linalg.svd(columns, full_matrices=False)
    tol = max(t, k) * np.finfo(np.float64).eps * s[0]
    rank = int(np.count_nonzero(s > tol))
    return u[:, :rank], rank


def annihilate(columns: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, int]:
    """Apply M_A = I - A (A'A)^+ A' to ``target``; also report rank(A).

    Computed through an orthonormal basis of span(A), which equals the
    pseudo-inverse formula exactly on the retained singular directions. A
    zero or empty A returns the target unchanged with rank 0.
    """
    columns = np.asarray(columns, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if columns.shape[0] != target.shape[0]:
        raise ScceError(f"row mismatch: columns has {columns.shape[0]} rows, target {target.shape[0]}")
    u, rank = _orthonormal_span(columns)
    if rank == 0:
        return target.copy(), 0
    return target - u @ (u.T @ target), rank


def _project_panel(p: PanelData, proj_columns: np.ndarray):
    """Annihilate the projection columns from every unit's y and X."""
    u, rank = _orthonormal_span(np.asarray(proj_columns, dtype=np.float64))
    if rank == 0:
        return p.y.copy(), p.x.copy(), 0
    # Apply I - U U' along the time axis; memory stays O(NTd + Tr).
    my = p.y - (p.y @ u) @ u.T
    mx = p.x - np.einsum("tr,irk->itk", u, np.einsum("tr,itk->irk", u, p.x))
    return my, mx, rank


def _pooled_solve(mx: np.ndarray, my: np.ndarray) -> np.ndarray:
    gram = np.einsum("itk,itl->kl", mx, mx)
    rhs = np.einsum("itk,it->k", mx, my)
    _gate(gram)
    return np.linalg.solve(gram, rhs)


def _gate(gram: np.ndarray, exc=SingularDesign):
    eigvals = np.linalg.eigvalsh(gram)
    if eigvals[-1] <= 0 or eigvals[0] <= _EIG_GATE * eigvals[-1]:
        raise exc("Gram matrix fails the relative-eigenvalue gate; "
                  "design is collinear or T is too small relative to the projection rank")


def scce_estimate(p: PanelData, basis: SieveBasis) -> EstimationResult:
    """Pooled estimator with the sieve basis as projection columns."""
    if basis.matrix.shape[0] != p.n_periods:
        raise ScceError("basis row count must equal the panel's T")
    my, mx, rank = _project_panel(p, basis.matrix)
    beta = _pooled_solve(mx, my)
    return EstimationResult(
        beta=beta,
        method=Method.SCCE,
        eps_hat=my - np.einsum("itk,k->it", mx, beta),
        v_hat=mx,
        projection_rank=rank,
    )


def _linear_proxy_columns(p: PanelData) -> np.ndarray:
    proxy = cross_sectional_average(p)
    return np.hstack([np.ones((p.n_periods, 1)), proxy.values])


def ccep_estimate(p: PanelData) -> EstimationResult:
    """Pooled CCE: projection columns are an intercept plus the averages."""
    d = p.n_regressors
    if p.n_periods < 2 * d + 3:
        raise TooSmall(f"CCEP needs T >= {2 * d + 3}, got T={p.n_periods}")
    my, mx, rank = _project_panel(p, _linear_proxy_columns(p))
    beta = _pooled_solve(mx, my)
    return EstimationResult(
        beta=beta,
        method=Method.CCEP,
        eps_hat=my - np.einsum("itk,k->it", mx, beta),
        v_hat=mx,
        projection_rank=rank,
    )


def ccemg_estimate(p: PanelData) -> EstimationResult:
    """Mean-group CCE: average of per-unit estimates after projecting [1, F_hat]."""
    d = p.n_regressors
    my, mx, rank = _project_panel(p, _linear_proxy_columns(p))
    if p.n_periods - rank <= d:
        raise TooSmall(f"CCEMG needs T - rank(proxy) > d; got T={p.n_periods}, "
                       f"rank={rank}, d={d}")
    per_unit = np.empty((p.n_units, d))
    for i in range(p.n_units):
        gram = mx[i].T @ mx[i]
        try:
            _gate(gram)
        except SingularDesign:
            raise SingularUnit(p.unit_labels[i]) from None
        per_unit[i] = np.linalg.solve(gram, mx[i].T @ my[i])
    beta = per_unit.mean(axis=0)
    return EstimationResult(
        beta=beta,
        method=Method.CCEMG,
        eps_hat=my - np.einsum("itk,k->it", mx, beta),
        v_hat=mx,
        projection_rank=rank,
        per_unit_betas=per_unit,
    )


def estimate_panel(p: PanelData, method: Method = Method.SCCE,
                   family: BasisFamily = BasisFamily(), knot_c: int = 1,
                   knot_rate: KnotRate = KnotRate.QUARTER,
                   proxy: FactorProxy | None = None) -> EstimationResult:
    """Run the configured estimator end to end on a panel.

    For the sieve estimator this rebuilds the factor proxy, knots, and basis
    from the panel; CCEP/CCEMG ignore the basis configuration.
    """
    method = Method(method)
    if method == Method.CCEP:
        return ccep_estimate(p)
    if method == Method.CCEMG:
        return ccemg_estimate(p)
    if proxy is None:
        proxy = cross_sectional_average(p)
    j = knot_count(p.n_periods, knot_c, knot_rate)
    basis = build_sieve_matrix(proxy, family, j)
    return scce_estimate(p, basis)
