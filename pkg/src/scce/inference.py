"""Covariance estimation and hypothesis tests.

Covers the residual second-moment matrix, the Bartlett-kernel HAC long-run
covariance, the sandwich covariance and standard errors, pair-bootstrap
percentile confidence intervals, a score-type test of factor linearity, and
an augmented Dickey-Fuller pretest with BIC lag selection.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import (
    DegenerateSeries,
    NoNonlinearColumns,
    ScceError,
    SeriesTooShort,
    SingularSigmaV,
    TooManySkipped,
    WindowTooLarge,
)
from .estimators import EstimationResult, Method, annihilate, estimate_panel
from .panel import PanelData, cross_sectional_average
from .sieve import TAG_NONLINEAR, BasisFamily, KnotRate, SieveBasis

__all__ = ["CovarianceEstimate", "BootstrapResult", "TestResult", "BootstrapConfig",
           "default_hac_window", "sigma_v_hat", "hac_theta", "sandwich_covariance",
           "bootstrap_ci", "linearity_test", "adf_test"]

# Large-T constant-case ADF critical values at the 1%, 5% and 10% levels.
_ADF_CRITICAL = ((-3.43, 0.01), (-2.86, 0.05), (-2.57, 0.10))

_SKIP_TOLERANCE = 0.01


@dataclass(frozen=True)
class CovarianceEstimate:
    """Sandwich covariance pieces and the implied standard errors."""

    sigma_v: np.ndarray
    theta: np.ndarray
    sandwich: np.ndarray
    std_errors: np.ndarray
    hac_window: int


@dataclass(frozen=True)
class BootstrapResult:
    """Pair-bootstrap draws and percentile confidence bounds."""

    draws: np.ndarray  # B x d
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    level: float
    seed: int
    skipped: int = 0


@dataclass(frozen=True)
class TestResult:
    statistic: float
    dof: int
    p_value: float
    decision_at_5pct: bool
    detail: dict = field(default_factory=dict)


def default_hac_window(t_periods: int) -> int:
    """Cube-root window; satisfies L -> inf with L/T -> 0."""
    return int(math.floor(t_periods ** (1.0 / 3.0)))


def sigma_v_hat(result: EstimationResult) -> np.ndarray:
    """(1/NT) sum_i V_hat_i' V_hat_i."""
    n, t = result.n_units, result.n_periods
    gram = np.einsum("itk,itl->kl", result.v_hat, result.v_hat) / (n * t)
    return (gram + gram.T) / 2.0


def hac_theta(result: EstimationResult, window: int | None = None) -> np.ndarray:
    """Bartlett-weighted HAC estimate of the score long-run covariance.

    Theta_l = (1/NT) sum_i sum_{t>l} eps_it eps_{i,t-l} v_it v_{i,t-l}' and
    Theta = Theta_0 + sum_{l=1..L} (1 - l/(L+1)) (Theta_l + Theta_l').
    """
    n, t = result.n_units, result.n_periods
    if window is None:
        window = default_hac_window(t)
    if window < 0 or window >= t:
        raise WindowTooLarge(f"HAC window must satisfy 0 <= L <= T-1; got L={window}, T={t}")
    scores = result.eps_hat[:, :, None] * result.v_hat  # N x T x d
    theta = np.einsum("itk,itl->kl", scores, scores) / (n * t)
    for lag in range(1, window + 1):
        theta_l = np.einsum("itk,itl->kl", scores[:, lag:, :], scores[:, :-lag, :]) / (n * t)
        theta += (1.0 - lag / (window + 1.0)) * (theta_l + theta_l.T)
    return (theta + theta.T) / 2.0


def sandwich_covariance(sigma_v: np.ndarray, theta: np.ndarray,
                        n_units: int, n_periods: int,
                        hac_window: int) -> CovarianceEstimate:
    """Sigma_v^{-1} Theta Sigma_v^{-1} and std errors sqrt(diag / (N T))."""
    eigvals = np.linalg.eigvalsh(sigma_v)
    if eigvals[-1] <= 0 or eigvals[0] <= 1e-10 * eigvals[-1]:
        raise SingularSigmaV("residual second-moment matrix is numerically singular")
    inv = np.linalg.inv(sigma_v)
    sandwich = inv @ theta @ inv
    sandwich = (sandwich + sandwich.T) / 2.0
    return CovarianceEstimate(
        sigma_v=sigma_v,
        theta=theta,
        sandwich=sandwich,
        std_errors=np.sqrt(np.diag(sandwich) / (n_units * n_periods)),
        hac_window=hac_window,
    )


def hac_covariance(result: EstimationResult, window: int | None = None) -> CovarianceEstimate:
    """Convenience wrapper: Sigma_v, HAC Theta, and the sandwich in one call."""
    t = result.n_periods
    if window is None:
        window = default_hac_window(t)
    return sandwich_covariance(sigma_v_hat(result), hac_theta(result, window),
                               result.n_units, t, window)


@dataclass(frozen=True)
class BootstrapConfig:
    method: Method = Method.SCCE
    family: BasisFamily = BasisFamily()
    knot_c: int = 1
    knot_rate: KnotRate = KnotRate.QUARTER
    n_draws: int = 399
    level: float = 0.95
    seed: int = 0
    max_workers: int | None = None

    def __post_init__(self):
        if self.n_draws < 2:
            raise ScceError("bootstrap needs at least 2 draws")
        if not 0.0 < self.level < 1.0:
            raise ScceError("confidence level must lie in (0, 1)")


def _worker_count(requested: int | None) -> int:
    if requested is not None:
        return max(1, requested)
    env = os.environ.get("SCCE_THREADS")
    return max(1, int(env)) if env else 1


def _resample(p: PanelData, idx: np.ndarray) -> PanelData:
    return PanelData(y=p.y[idx], x=p.x[idx],
                     unit_labels=tuple(range(len(idx))),
                     time_labels=p.time_labels)


def bootstrap_ci(p: PanelData, config: BootstrapConfig = BootstrapConfig()) -> BootstrapResult:
    """Pair bootstrap: resample whole units with replacement.

    Replication b draws its indices from a counter-based stream keyed by
    (seed, b), so parallel and serial execution produce identical draws. The
    proxy, knots, and basis are rebuilt from each resampled panel. Singular
    replications are skipped and counted; more than 1% skipped is an error.
    """
    n = p.n_units

    def one_draw(b: int):
        rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(config.seed, spawn_key=(b,))))
        idx = rng.integers(0, n, size=n)
        try:
            return estimate_panel(_resample(p, idx), config.method, config.family,
                                  config.knot_c, config.knot_rate).beta
        except ScceError:
            return None

    workers = _worker_count(config.max_workers)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_draw, range(config.n_draws)))
    else:
        results = [one_draw(b) for b in range(config.n_draws)]

    skipped = sum(r is None for r in results)
    if skipped > _SKIP_TOLERANCE * config.n_draws:
        raise TooManySkipped(skipped, config.n_draws)
    draws = np.array([r for r in results if r is not None])
    alpha = (1.0 - config.level) / 2.0
    return BootstrapResult(
        draws=draws,
        ci_lower=np.quantile(draws, alpha, axis=0, method="linear"),
        ci_upper=np.quantile(draws, 1.0 - alpha, axis=0, method="linear"),
        level=config.level,
        seed=config.seed,
        skipped=skipped,
    )


def linearity_test(p: PanelData, basis: SieveBasis,
                   window: int | None = None) -> TestResult:
    """Score-type test that the nonlinear sieve columns are jointly irrelevant.

    Restricted residuals come from CCEP. The tested directions are the
    nonlinear basis columns annihilated by the linear proxy. Because the
    cross-sectional sum of the restricted residuals lies in the annihilated
    span, the informative signal is in the per-unit scores: the statistic
    sums the unit-level score quadratic forms, each studentised by a
    Bartlett HAC estimate of the score covariance, and is compared against a
    chi-squared with (N - 1) * rank(tested block) degrees of freedom (one
    rank's worth is lost to the adding-up constraint on the unit scores).

    The default window is twice the slope-HAC default: the restricted
    residuals keep a slowly decaying common component (the proxies recover
    the factor space only up to averaging noise), so the score
    autocovariance dies off much more slowly than the slope scores'. The
    covariance also carries a T/(T - rank(A)) scale correction for the
    variance lost to the per-unit projection on the proxy span.
    """
    nonlinear = basis.columns_tagged(TAG_NONLINEAR)
    if nonlinear.shape[1] == 0:
        raise NoNonlinearColumns("basis has no nonlinear columns to test")
    n, t = p.n_units, p.n_periods
    if window is None:
        window = 2 * default_hac_window(t)
    if window < 0 or window >= t:
        raise WindowTooLarge(f"HAC window must satisfy 0 <= L <= T-1; got L={window}, T={t}")

    restricted = estimate_panel(p, Method.CCEP)
    resid = restricted.eps_hat  # N x T, already orthogonal to [1, F_hat]
    if np.linalg.norm(resid) <= 1e-10 * max(1.0, np.linalg.norm(p.y)):
        # Exact fit: the quadratic form below is scale-invariant, so rounding
        # noise would otherwise masquerade as signal.
        q_rank = int(np.linalg.matrix_rank(
            annihilate(np.hstack([np.ones((t, 1)), cross_sectional_average(p).values]),
                       nonlinear)[0]))
        return TestResult(statistic=0.0, dof=(n - 1) * max(q_rank, 1), p_value=1.0,
                          decision_at_5pct=False,
                          detail={"hac_window": window, "degenerate": True})
    proxy_cols = np.hstack([np.ones((t, 1)), cross_sectional_average(p).values])
    q_cols, proxy_rank = annihilate(proxy_cols, nonlinear)
    q_rank = int(np.linalg.matrix_rank(q_cols))
    if q_rank == 0:
        raise NoNonlinearColumns("nonlinear columns lie entirely in the linear proxy span")

    scores = resid @ q_cols  # N x q, unit-level scores Q' u_i
    # HAC covariance of the per-(i, t) score summands q_t * resid_it with
    # Bartlett weights; T * cov approximates the covariance of one unit score.
    w0 = (resid * resid).sum(axis=0)
    cov = (q_cols * w0[:, None]).T @ q_cols / (n * t)
    for lag in range(1, window + 1):
        wl = (resid[:, lag:] * resid[:, :-lag]).sum(axis=0)
        cov_l = (q_cols[lag:] * wl[:, None]).T @ q_cols[:-lag] / (n * t)
        cov += (1.0 - lag / (window + 1.0)) * (cov_l + cov_l.T)
    cov = (cov + cov.T) / 2.0
    cov *= t / (t - proxy_rank)

    cov_pinv = np.linalg.pinv(cov)
    statistic = float(np.einsum("iq,qr,ir->", scores, cov_pinv, scores)) / t
    statistic = max(statistic, 0.0)
    dof = (n - 1) * q_rank
    p_value = float(stats.chi2.sf(statistic, dof))
    return TestResult(
        statistic=statistic,
        dof=dof,
        p_value=p_value,
        decision_at_5pct=p_value < 0.05,
        detail={"hac_window": window, "rank_tested": q_rank,
                "n_nonlinear_columns": int(nonlinear.shape[1])},
    )


def _adf_p_value(statistic: float) -> float:
    """Piecewise-linear interpolation over the fixed critical values.

    A coarse, documented approximation: exact beyond the tabulated points is
    out of scope, so the value is extrapolated linearly and clipped to [0, 1].
    """
    xs = [c for c, _ in _ADF_CRITICAL]
    ps = [p for _, p in _ADF_CRITICAL]
    if statistic <= xs[0]:
        slope = (ps[1] - ps[0]) / (xs[1] - xs[0])
        return max(0.0, ps[0] + slope * (statistic - xs[0]))
    if statistic >= xs[-1]:
        slope = (ps[-1] - ps[-2]) / (xs[-1] - xs[-2])
        return min(1.0, ps[-1] + slope * (statistic - xs[-1]))
    return float(np.interp(statistic, xs, ps))


def adf_test(series: np.ndarray, max_lag: int | None = None) -> TestResult:
    """Augmented Dickey-Fuller regression with constant, lag order by BIC.

    Fits ds_t = a + rho * s_{t-1} + sum phi_l ds_{t-l} + e_t for p = 0..p_max
    on a common sample, picks p by BIC, refits with the chosen p on the full
    available sample, and returns the t-ratio on rho. The 5% decision uses
    the constant-case asymptotic critical value -2.86.
    """
    series = np.asarray(series, dtype=np.float64)
    t = series.size
    if t < 10:
        raise SeriesTooShort(f"ADF needs at least 10 observations, got {t}")
    ds = np.diff(series)
    if np.all(ds == 0.0):
        raise DegenerateSeries("series is constant; ADF regression undefined")
    if max_lag is None:
        max_lag = int(math.floor(12.0 * (t / 100.0) ** 0.25))
    max_lag = max(0, min(max_lag, (t - 1) // 2 - 2))

    def fit(p_lags: int, start: int):
        # Rows are ds[start:], regressors [1, s_{t-1}, ds lags].
        lhs = ds[start:]
        cols = [np.ones(lhs.size), series[start:-1]]
        cols += [ds[start - l:-l] for l in range(1, p_lags + 1)]
        design = np.column_stack(cols)
        coef, _, rank, _ = np.linalg.lstsq(design, lhs, rcond=None)
        resid = lhs - design @ coef
        nobs, k = design.shape
        if rank < k or nobs <= k:
            return None
        ssr = float(resid @ resid)
        if ssr <= 0.0:
            raise DegenerateSeries("ADF regression has a perfect fit; t-ratio undefined")
        sigma2 = ssr / (nobs - k)
        xtx_inv = np.linalg.inv(design.T @ design)
        t_rho = coef[1] / math.sqrt(sigma2 * xtx_inv[1, 1])
        bic = nobs * math.log(ssr / nobs) + k * math.log(nobs)
        return t_rho, bic

    common_start = max_lag
    best_p, best_bic = 0, math.inf
    for p_lags in range(max_lag + 1):
        fitted = fit(p_lags, common_start)
        if fitted is None:
            continue
        _, bic = fitted
        if bic < best_bic:
            best_p, best_bic = p_lags, bic
    final = fit(best_p, best_p)
    if final is None:
        raise DegenerateSeries("ADF regression is rank deficient")
    statistic = float(final[0])
    p_value = _adf_p_value(statistic)
    return TestResult(
        statistic=statistic,
        dof=best_p,
        p_value=p_value,
        decision_at_5pct=statistic < -2.86,
        detail={"selected_lags": best_p, "max_lag": max_lag},
    )
