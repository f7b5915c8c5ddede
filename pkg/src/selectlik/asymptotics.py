"""Witness-sequence diagnostics: truncated normals flattening into exponentials.

A truncated normal on a fixed window [a, b) with mean -n and variance n + c
converges pointwise, as n grows, to the exponential density truncated to the
same window.  That limit is what makes the selection-model likelihood flatten
along the ray (theta0, tau) = (-n, sqrt(n)); these routines evaluate both
sides of the convergence and the limiting log-likelihood used by the
diameter probe.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from ._normal import norm_logpdf
from .exceptions import InvalidInputError
from .model import truncated_normal_logpdf

__all__ = [
    "WitnessSpec",
    "truncated_exponential_logpdf",
    "witness_logpdf",
    "witness_sup_error",
    "mills_ratio_check",
    "limit_loglik",
    "witness_loglik",
]


@dataclass(frozen=True)
class WitnessSpec:
    """One point of the witness sequence: mean -n, variance n + c, window [a, b)."""

    n: float
    c: float = 0.0
    a: float = 1.959963984540054  # Phi^{-1}(0.975)
    b: float = math.inf

    def __post_init__(self):
        if not self.n + self.c > 0:
            raise InvalidInputError("need n + c > 0 for a positive variance")
        if not self.a < self.b:
            raise InvalidInputError(f"empty window [{self.a}, {self.b})")


def truncated_exponential_logpdf(x, a, b):
    """Log density exp(-x) / (exp(-a) - exp(-b)) on [a, b); -inf outside."""
    if not a < b:
        raise InvalidInputError(f"empty interval [{a}, {b})")
    if not math.isfinite(a):
        raise InvalidInputError("lower bound must be finite")
    log_norm = -a if math.isinf(b) else -a + math.log1p(-math.exp(a - b))
    x = np.asarray(x, dtype=float)
    out = np.where((x >= a) & (x < b), -x - log_norm, -np.inf)
    return float(out) if out.ndim == 0 else out


def witness_logpdf(x, spec):
    """Log density of the witness truncated normal at sequence point ``spec``."""
    return truncated_normal_logpdf(
        x, mean=-spec.n, sd=math.sqrt(spec.n + spec.c), a=spec.a, b=spec.b
    )


def witness_sup_error(spec, x_grid):
    """Max absolute density gap between the witness and its exponential limit."""
    x_grid = np.asarray(x_grid, dtype=float)
    f_n = np.exp(witness_logpdf(x_grid, spec))
    f_star = np.exp(truncated_exponential_logpdf(x_grid, spec.a, spec.b))
    return float(np.max(np.abs(f_n - f_star)))


def default_error_grid(a, b, n_points=2001):
    """Evaluation grid on [a, min(b, a + 20)]: the exponential's effective support."""
    return np.linspace(a, min(b, a + 20.0), n_points)


def mills_ratio_check(x):
    """The ratio Phi(-x) * x / phi(x); tends to 1 from below as x grows."""
    if not x > 0:
        raise InvalidInputError("x must be positive")
    return float(np.exp(log_ndtr(-x) + np.log(x) - norm_logpdf(x)))


def _study_band_windows(se, steps):
    """Effect-scale windows [a_k, b_k) of the surviving bands k = 1..K-1."""
    cz = steps.z_cutoffs
    return [(se * cz[k + 1], se * cz[k]) for k in range(steps.n_bands - 1)]


def witness_loglik(data, steps, n):
    """Log-likelihood of the witness mixture at ray point (theta0, tau) = (-n, sqrt(n)).

    Per the infinite-diameter construction, the limiting density loads the
    surviving bands k < K with equal weight 1/(K-1); here each surviving
    component is the exact truncated normal of study i (mean -n, sd
    sqrt(n + se_i^2)) on that band's effect-scale window.  Returns -inf if
    some study lies in the vanishing last band.
    """
    if steps.n_bands < 2:
        raise InvalidInputError("witness mixture needs at least two bands")
    log_w = -math.log(steps.n_bands - 1)
    total = 0.0
    for obs in data:
        comps = [
            log_w
            + truncated_normal_logpdf(
                obs.effect,
                mean=-n,
                sd=math.sqrt(n + obs.se**2),
                a=a,
                b=b,
            )
            for a, b in _study_band_windows(obs.se, steps)
        ]
        total += float(np.logaddexp.reduce(comps))
    return total


def limit_loglik(data, steps):
    """Limiting log-likelihood of the witness ray: truncated-exponential mixture.

    Components k < K are exponentials truncated to each study's effect-scale
    band windows, mixed with equal weights 1/(K-1); the last band's component
    vanishes in the limit.  A study sitting in the last band contributes
    log-zero, which makes the result -inf; a warning is issued because such
    data cannot follow the ray to infinity.
    """
    if len(data) == 0:
        raise InvalidInputError("data must contain at least one study")
    if steps.n_bands < 2:
        raise InvalidInputError("limit mixture needs at least two bands")
    log_w = -math.log(steps.n_bands - 1)
    total = 0.0
    for obs in data:
        comps = [
            log_w + truncated_exponential_logpdf(obs.effect, a, b)
            for a, b in _study_band_windows(obs.se, steps)
        ]
        term = float(np.logaddexp.reduce(comps))
        if term == -np.inf:
            warnings.warn(
                f"study with effect {obs.effect:.4g} lies in the vanishing "
                "last band; limiting log-likelihood is -inf",
                stacklevel=2,
            )
        total += term
    return total
