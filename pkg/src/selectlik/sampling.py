"""Generative samplers for the selection models.

``sample_hedges`` plays out the editor's acceptance mechanism literally:
draw a latent true effect, draw an estimate, accept with the step-function
probability of its p-value.  ``sample_basic`` draws from the
significance-only truncated normal by inverse CDF, which stays exact even
when the acceptance region holds almost no mass.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri, ndtri_exp

from .exceptions import (
    InvalidInputError,
    RejectionBudgetError,
    TruncationUnderflowError,
)
from .model import ModelParams, StudyObservation, band_index, p_value

__all__ = [
    "SimulationConfig",
    "SimulationResult",
    "sample_hedges",
    "simulate_hedges",
    "sample_basic",
]

_LOG_UNDERFLOW_FLOOR = np.log(1e-300)


@dataclass(frozen=True)
class SimulationConfig:
    """Inputs for one simulated meta-analysis.

    One published study is produced per entry of ``sigmas``.  Study i draws
    from an independent RNG substream spawned from ``seed`` (PCG64 via
    ``SeedSequence(seed).spawn``), so output is reproducible and independent
    of evaluation order.
    """

    params: ModelParams
    sigmas: tuple
    seed: int
    max_rejections_per_study: int = 10**6

    def __post_init__(self):
        sigmas = tuple(float(s) for s in self.sigmas)
        object.__setattr__(self, "sigmas", sigmas)
        if len(sigmas) == 0:
            raise InvalidInputError("sigmas must be nonempty")
        if any(s <= 0 for s in sigmas):
            raise InvalidInputError("all sigmas must be positive")
        if self.max_rejections_per_study <= 0:
            raise InvalidInputError("max_rejections_per_study must be positive")


@dataclass(frozen=True)
class SimulationResult:
    """Published studies plus per-study proposal counts.

    ``n_attempts[i]`` counts every proposal drawn for study i, including the
    accepted one; len(studies) / sum(n_attempts) estimates the overall
    acceptance probability c.
    """

    studies: list
    n_attempts: np.ndarray = field(repr=False)

    @property
    def acceptance_rate(self):
        return len(self.studies) / float(self.n_attempts.sum())


def simulate_hedges(config):
    """Run the acceptance mechanism for every study; returns a SimulationResult."""
    params = config.params
    steps = params.steps
    root = np.random.SeedSequence(config.seed)
    children = root.spawn(len(config.sigmas))
    studies = []
    attempts = np.zeros(len(config.sigmas), dtype=np.int64)
    for i, (sigma, child) in enumerate(zip(config.sigmas, children)):
        rng = np.random.Generator(np.random.PCG64(child))
        for trial in range(config.max_rejections_per_study):
            theta_i = rng.normal(params.theta0, params.tau)
            x = rng.normal(theta_i, sigma)
            k = band_index(p_value(x, sigma), steps)
            if rng.uniform() < steps.weights[k]:
                attempts[i] = trial + 1
                studies.append(StudyObservation(effect=x, se=sigma))
                break
        else:
            raise RejectionBudgetError(i, config.max_rejections_per_study)
    return SimulationResult(studies=studies, n_attempts=attempts)


def sample_hedges(config):
    """Published studies only; see simulate_hedges for acceptance stats."""
    return simulate_hedges(config).studies


def sample_basic(theta0, tau, sigma, alpha_cut, n, seed):
    """Draws from the significance-only truncated normal via inverse CDF.

    Each draw satisfies x/sigma > Phi^{-1}(1 - alpha_cut).  When the
    truncation point sits more than 5 sds above the mean the quantile is
    inverted on the complementary tail in log space, so deep censoring
    costs no accuracy and no rejection loop.
    """
    if not (0.0 < alpha_cut < 1.0):
        raise InvalidInputError("alpha_cut must lie in (0, 1)")
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    if sigma <= 0 or tau < 0:
        raise InvalidInputError("sigma must be positive and tau >= 0")
    s = float(np.hypot(tau, sigma))
    cutoff = sigma * ndtri(1.0 - alpha_cut)
    z_a = (cutoff - theta0) / s
    log_mass = float(log_ndtr(-z_a))
    if log_mass < _LOG_UNDERFLOW_FLOOR:
        raise TruncationUnderflowError(
            f"truncation mass exp({log_mass:.1f}) is below 1e-300"
        )
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    u = rng.uniform(size=n)
    if z_a > 5.0:
        # invert on the upper tail: SF(z) = SF(z_a) * (1 - u)
        z = -ndtri_exp(log_mass + np.log1p(-u))
    else:
        p_a = ndtr(z_a)
        z = ndtri(p_a + u * (1.0 - p_a))
    return [StudyObservation(effect=theta0 + s * zi, se=sigma) for zi in z]
