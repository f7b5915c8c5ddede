"""Maximum likelihood, contour grids, and confidence-region diagnostics.

The optimizer is a multi-start Nelder-Mead over an unconstrained
reparameterization (tau through exp, selection weights through cumulative
negative-softplus increments), because the likelihood ridge defeats
curvature-based methods away from the optimum.  The diameter probe walks the
ray (theta0, tau) = (-n, sqrt(n)) with the witness mixture and compares the
values against the likelihood-ratio threshold, which is how the
infinite-diameter pathology shows up at desk scale.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar
from scipy.special import softmax
from scipy.stats import chi2

from .asymptotics import limit_loglik, witness_loglik
from .exceptions import InvalidInputError, NoRidgeError, NonConvergenceError
from .model import (
    ModelParams,
    SelectionSteps,
    band_index,
    log_likelihood,
    loglik_terms,
    p_value,
)

__all__ = [
    "FitResult",
    "LogLikGrid",
    "GridSpec",
    "ProbePoint",
    "RegionProbeReport",
    "ConfidenceRegion",
    "fit_mle",
    "loglik_grid",
    "ridge_slope",
    "lr_confidence_region",
    "diameter_probe",
    "profile_theta_loglik",
    "profile_theta_interval",
]

DEFAULT_PROBE_NS = (10.0, 100.0, 1000.0, 10000.0)

_TAU_FLOOR = 1e-8


@dataclass(frozen=True)
class FitResult:
    """Outcome of a maximum-likelihood fit."""

    params_hat: ModelParams
    loglik_hat: float
    converged: bool
    n_restarts_used: int
    gradient_norm_at_opt: float


@dataclass(frozen=True)
class LogLikGrid:
    """Dense log-likelihood evaluation over a (theta0, tau) rectangle.

    ``values[i, j]`` is the log-likelihood at (theta_axis[i], tau_axis[j]).
    ``profiled_weights`` records whether selection weights were maximized
    out at each cell (True) or held at ``rho_fixed`` (False).
    """

    theta_axis: np.ndarray
    tau_axis: np.ndarray
    values: np.ndarray
    rho_fixed: SelectionSteps
    profiled_weights: bool = False


@dataclass(frozen=True)
class GridSpec:
    """Rectangle and resolution for grid evaluations."""

    theta_min: float
    theta_max: float
    tau_min: float
    tau_max: float
    n_theta: int = 100
    n_tau: int = 100

    def __post_init__(self):
        if not (self.theta_min < self.theta_max and self.tau_min < self.tau_max):
            raise InvalidInputError("grid ranges must be nonempty")
        if self.n_theta < 2 or self.n_tau < 2:
            raise InvalidInputError("need at least 2 points per axis")
        if self.tau_min < 0:
            raise InvalidInputError("tau range must be nonnegative")

    @property
    def theta_axis(self):
        return np.linspace(self.theta_min, self.theta_max, self.n_theta)

    @property
    def tau_axis(self):
        return np.linspace(self.tau_min, self.tau_max, self.n_tau)


@dataclass(frozen=True)
class ProbePoint:
    """One evaluation on the witness ray."""

    n: float
    theta0: float
    tau: float
    loglik: float
    accepted: bool


@dataclass(frozen=True)
class RegionProbeReport:
    """Witness-ray probe of a likelihood-ratio confidence region.

    ``diameter_lower_bound`` is sqrt(theta0^2 + tau^2) of the largest
    accepted probe (the joint-parameter size function); ``unbounded`` is set
    when the ray's limiting log-likelihood itself clears the threshold, so
    every sufficiently large n would be accepted.
    """

    level: float
    chi2_threshold: float
    probed_ray: tuple
    max_accepted_n: float | None
    unbounded: bool
    diameter_lower_bound: float
    limit_loglik: float


@dataclass(frozen=True)
class ConfidenceRegion:
    """Grid indicator of a joint LR region plus the witness-ray probe."""

    level: float
    chi2_threshold: float
    loglik_hat: float
    grid: LogLikGrid
    accept: np.ndarray = field(repr=False)
    probe: RegionProbeReport


def _data_arrays(data):
    if len(data) == 0:
        raise InvalidInputError("data must contain at least one study")
    x = np.array([s.effect for s in data])
    se = np.array([s.se for s in data])
    return x, se


def _weights_from_increments(d):
    """rho_1..rho_K from K-1 unconstrained increments, via negative softplus."""
    eta = -np.cumsum(np.logaddexp(0.0, np.asarray(d, dtype=float)))
    return np.concatenate([[1.0], np.exp(eta)])


def _increments_from_weights(weights):
    eta = np.log(np.asarray(weights, dtype=float))
    gaps = np.maximum(eta[:-1] - eta[1:], 1e-6)
    # invert softplus: d = log(exp(gap) - 1)
    return np.log(np.expm1(gaps))


def fit_mle(
    data,
    steps,
    free_weights=False,
    n_restarts=8,
    xatol=1e-8,
    fatol=1e-10,
    maxiter=None,
):
    """Maximize the selection-model likelihood over theta0, tau (and weights).

    ``steps`` supplies the cut vector; with ``free_weights`` the weight
    vector is estimated too (non-increasing, in (0, 1], first weight pinned
    at 1), otherwise it is held fixed.  Multi-start Nelder-Mead; the best
    restart wins.  Raises NonConvergenceError (carrying the best point) if
    no restart met the termination criteria.
    """
    x, se = _data_arrays(data)
    if len(data) < 2:
        raise InvalidInputError("need at least two studies to fit")
    if free_weights and steps.n_bands < 2:
        raise InvalidInputError("free-weight fitting needs at least two bands")
    bands = band_index(p_value(x, se), steps)
    cuts = steps.cuts

    def unpack(p):
        tau = math.exp(min(p[1], 50.0))
        if free_weights:
            w = _weights_from_increments(p[2:])
            st = SelectionSteps(cuts=cuts, weights=tuple(w))
        else:
            st = steps
        return p[0], max(tau, _TAU_FLOOR), st

    def objective(p):
        theta0, tau, st = unpack(p)
        return -float(loglik_terms(x, se, bands, theta0, tau, st).sum())

    mean = float(np.mean(x))
    sd = max(float(np.std(x, ddof=1)) if len(x) > 1 else 1.0, 1e-3)
    starts = [
        (mean - 2 * sd, 0.01),
        (mean - 2 * sd, 0.5 * sd),
        (mean - 2 * sd, 2 * sd),
        (mean + 2 * sd, 0.01),
        (mean + 2 * sd, 0.5 * sd),
        (mean + 2 * sd, 2 * sd),
        (mean, 0.01),
        (mean, sd),
    ][:n_restarts]
    if free_weights:
        d0 = _increments_from_weights(steps.weights_array)
        starts = [np.concatenate([[t], [math.log(tau)], d0]) for t, tau in starts]
    else:
        starts = [np.array([t, math.log(tau)]) for t, tau in starts]

    best = None
    any_success = False
    for p0 in starts:
        res = minimize(
            objective,
            p0,
            method="Nelder-Mead",
            options={
                "xatol": xatol,
                "fatol": fatol,
                "maxiter": maxiter or 400 * len(p0),
                "maxfev": maxiter or 400 * len(p0),
            },
        )
        any_success = any_success or bool(res.success)
        if best is None or res.fun < best.fun:
            best = res

    theta0_hat, tau_hat, steps_hat = unpack(best.x)
    grad_norm = _fd_gradient_norm(objective, best.x)
    result = FitResult(
        params_hat=ModelParams(theta0=theta0_hat, tau=tau_hat, steps=steps_hat),
        loglik_hat=-float(best.fun),
        converged=any_success,
        n_restarts_used=len(starts),
        gradient_norm_at_opt=grad_norm,
    )
    if not any_success:
        raise NonConvergenceError("no restart met the termination criteria", result)
    return result


def _fd_gradient_norm(objective, p, h=1e-5):
    g = np.empty(len(p))
    for i in range(len(p)):
        e = np.zeros(len(p))
        e[i] = h
        g[i] = (objective(p + e) - objective(p - e)) / (2 * h)
    return float(np.linalg.norm(g))


def _fixed_grid_values(x, se, bands, theta_axis, tau_axis, steps):
    th = theta_axis[:, None, None]  # (T, 1, 1)
    tu = tau_axis[None, :, None]  # (1, U, 1)
    terms = loglik_terms(x, se, bands, th, tu, steps)  # (T, U, N)
    return terms.sum(axis=-1)


def _profile_cell(lbm, nk, base, d0):
    """Maximize the log-likelihood over weights at one (theta0, tau) cell.

    The objective is concave in eta = log(rho), so a bounded quasi-Newton
    solve on the non-positive increments d (eta_k = sum of d_j) is reliable
    and fast.  Returns (loglik, d_opt).
    """
    K = lbm.shape[1]

    def neg(d):
        eta = np.concatenate([[0.0], np.cumsum(d)])
        v = lbm + eta
        m = v.max(axis=1)
        lse = m + np.log(np.exp(v - m[:, None]).sum(axis=1))
        ll = float(nk @ eta - lse.sum() + base)
        g_eta = nk - softmax(v, axis=1).sum(axis=0)
        # d eta_k / d d_j = 1 for k >= j+1
        g_d = np.cumsum(g_eta[::-1])[::-1][1:]
        return -ll, -g_d

    res = minimize(
        neg,
        d0,
        jac=True,
        method="L-BFGS-B",
        bounds=[(-500.0, 0.0)] * (K - 1),
    )
    return -float(res.fun), res.x


def loglik_grid(
    data,
    theta_range,
    tau_range,
    resolution,
    rho_fixed,
    profile_weights=False,
    n_jobs=1,
):
    """Dense log-likelihood over a (theta0, tau) rectangle.

    With ``profile_weights`` the selection weights are maximized out at each
    cell (cuts stay fixed); this is the grid that exposes the likelihood
    ridge, because the flat direction requires the weight of the last band
    to shrink along the ray.  Otherwise every cell uses ``rho_fixed`` and
    matches pointwise log_likelihood calls exactly.  ``n_jobs`` caps the
    worker threads; rows are assembled in axis order either way.
    """
    x, se = _data_arrays(data)
    res_theta, res_tau = (
        (resolution, resolution) if np.ndim(resolution) == 0 else resolution
    )
    if res_theta < 2 or res_tau < 2:
        raise InvalidInputError("resolution must be >= 2 per axis")
    theta_axis = np.linspace(theta_range[0], theta_range[1], res_theta)
    tau_axis = np.linspace(tau_range[0], tau_range[1], res_tau)
    if tau_axis[0] < 0:
        raise InvalidInputError("tau range must be nonnegative")
    bands = band_index(p_value(x, se), rho_fixed)

    if not profile_weights or rho_fixed.n_bands < 2:
        values = _fixed_grid_values(x, se, bands, theta_axis, tau_axis, rho_fixed)
        return LogLikGrid(theta_axis, tau_axis, values, rho_fixed, bool(profile_weights))

    from .model import log_band_masses  # grid fast path
    from ._normal import norm_logpdf

    nk = np.bincount(bands, minlength=rho_fixed.n_bands).astype(float)
    values = np.empty((len(theta_axis), len(tau_axis)))
    # log-weight increments, clipped into the solver's box
    d_start = np.clip(np.diff(np.log(rho_fixed.weights_array)), -500.0, 0.0)

    def profile_row(i):
        theta0 = theta_axis[i]
        row = np.empty(len(tau_axis))
        d_warm = d_start.copy()
        for j, tau in enumerate(tau_axis):
            lbm = log_band_masses(theta0, tau, se, rho_fixed)
            base = float(norm_logpdf(x, theta0, np.hypot(tau, se)).sum())
            row[j], d_warm = _profile_cell(lbm, nk, base, d_warm)
        return row

    if n_jobs and n_jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            for i, row in enumerate(pool.map(profile_row, range(len(theta_axis)))):
                values[i] = row
    else:
        for i in range(len(theta_axis)):
            values[i] = profile_row(i)
    return LogLikGrid(theta_axis, tau_axis, values, rho_fixed, True)


def ridge_slope(grid, level_offset):
    """Log-log slope of the ridge crest in the far-field superlevel set.

    For every theta column with |theta0| >= 5 whose best cell clears
    max - level_offset, takes the maximizing tau and regresses log(tau) on
    log|theta0|.  A half-power ridge gives a slope near 0.5.  Raises
    NoRidgeError when the superlevel set never reaches |theta0| >= 5.
    """
    lhat = float(np.nanmax(grid.values))
    col_best = np.nanmax(grid.values, axis=1)
    col_tau = grid.tau_axis[np.nanargmax(grid.values, axis=1)]
    sel = (
        (np.abs(grid.theta_axis) >= 5.0)
        & (col_best >= lhat - level_offset)
        & (col_tau > 0)
    )
    if sel.sum() < 2:
        raise NoRidgeError(
            "superlevel set does not reach |theta0| >= 5 in at least two columns"
        )
    slope = np.polyfit(np.log(np.abs(grid.theta_axis[sel])), np.log(col_tau[sel]), 1)[0]
    return float(slope)


def diameter_probe(data, loglik_hat, rho_fixed, level, n_values=DEFAULT_PROBE_NS):
    """Probe the witness ray (theta0, tau) = (-n, sqrt(n)) against the LR cut.

    With two or more bands each probe evaluates the witness mixture (equal
    weights on the surviving bands, vanishing last band) whose limit is the
    truncated-exponential likelihood; with a single band it evaluates the
    plain model, which decays and pins the probe out of the region.  A probe
    is accepted when 2 * (loglik_hat - loglik) <= chi2 quantile (2 df).
    """
    if not 0.0 < level < 1.0:
        raise InvalidInputError("level must lie in (0, 1)")
    n_values = tuple(float(n) for n in n_values)
    if any(b <= a for a, b in zip(n_values, n_values[1:])) or any(
        n <= 0 for n in n_values
    ):
        raise InvalidInputError("n_values must be positive and increasing")
    threshold = float(chi2.ppf(level, df=2))

    if rho_fixed.n_bands >= 2:
        ray_loglik = lambda n: witness_loglik(data, rho_fixed, n)
        limit = limit_loglik(data, rho_fixed)
    else:
        ray_loglik = lambda n: log_likelihood(
            data, ModelParams(theta0=-n, tau=math.sqrt(n), steps=rho_fixed)
        )
        limit = -math.inf

    probes = []
    for n in n_values:
        ll = ray_loglik(n)
        accepted = math.isfinite(ll) and 2.0 * (loglik_hat - ll) <= threshold
        probes.append(
            ProbePoint(n=n, theta0=-n, tau=math.sqrt(n), loglik=ll, accepted=accepted)
        )

    accepted_ns = [p.n for p in probes if p.accepted]
    unbounded = (
        math.isfinite(limit)
        and 2.0 * (loglik_hat - limit) <= threshold
        and bool(probes)
        and probes[-1].accepted
    )
    max_accepted = max(accepted_ns) if accepted_ns else None
    diameter = (
        math.sqrt(max_accepted**2 + max_accepted) if max_accepted is not None else 0.0
    )
    return RegionProbeReport(
        level=level,
        chi2_threshold=threshold,
        probed_ray=tuple(probes),
        max_accepted_n=max_accepted,
        unbounded=unbounded,
        diameter_lower_bound=diameter,
        limit_loglik=limit,
    )


def lr_confidence_region(
    data,
    level,
    rho_fixed,
    grid_spec,
    probe_n_values=DEFAULT_PROBE_NS,
    fit=None,
):
    """Joint LR confidence region for (theta0, tau) on a grid, plus ray probe.

    Grid cells are accepted when 2 * (loglik_hat - loglik) is below the
    chi-square quantile with 2 df.  The chi-square calibration is the
    standard asymptotic choice; no finite-diameter region exists for this
    model, so the region is a demonstrator, not a validity guarantee.
    """
    if not 0.0 < level < 1.0:
        raise InvalidInputError("level must lie in (0, 1)")
    if fit is None:
        fit = fit_mle(data, rho_fixed)
    threshold = float(chi2.ppf(level, df=2))
    grid = loglik_grid(
        data,
        (grid_spec.theta_min, grid_spec.theta_max),
        (grid_spec.tau_min, grid_spec.tau_max),
        (grid_spec.n_theta, grid_spec.n_tau),
        rho_fixed,
    )
    accept = 2.0 * (fit.loglik_hat - grid.values) <= threshold
    probe = diameter_probe(data, fit.loglik_hat, rho_fixed, level, probe_n_values)
    return ConfidenceRegion(
        level=level,
        chi2_threshold=threshold,
        loglik_hat=fit.loglik_hat,
        grid=grid,
        accept=accept,
        probe=probe,
    )


def profile_theta_loglik(data, steps, theta0, tau_hi=None):
    """Log-likelihood at theta0 maximized over tau (weights held fixed)."""
    x, se = _data_arrays(data)
    bands = band_index(p_value(x, se), steps)
    if tau_hi is None:
        tau_hi = 100.0 * max(float(np.std(x)), 1e-3)

    def neg(log_tau):
        return -float(
            loglik_terms(x, se, bands, theta0, math.exp(log_tau), steps).sum()
        )

    res = minimize_scalar(
        neg,
        bounds=(math.log(_TAU_FLOOR), math.log(tau_hi)),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return -float(res.fun)


def profile_theta_interval(data, level, steps, fit=None):
    """Equal-LR profile confidence interval for theta0 (tau profiled out).

    Inverts 2 * (loglik_hat - profile(theta0)) <= chi2 quantile (1 df) by
    bracketing and root-finding on each side of the estimate.
    """
    if not 0.0 < level < 1.0:
        raise InvalidInputError("level must lie in (0, 1)")
    if fit is None:
        fit = fit_mle(data, steps)
    q = float(chi2.ppf(level, df=1))
    lhat = fit.loglik_hat
    theta_hat = fit.params_hat.theta0

    def g(theta0):
        return 2.0 * (lhat - profile_theta_loglik(data, steps, theta0)) - q

    x, _ = _data_arrays(data)
    scale = max(float(np.std(x)), 1e-3)

    def solve(direction):
        step = 0.25 * scale
        lo = theta_hat
        for _ in range(60):
            hi = lo + direction * step
            if g(hi) > 0:
                return brentq(g, min(lo, hi), max(lo, hi), xtol=1e-8)
            lo = hi
            step *= 2.0
        return direction * math.inf

    return solve(-1.0), solve(1.0)
