"""Posterior samplers for the functional of interest.

Three engines, all returning :class:`PosteriorDraws`:

* ``run_h_engine``   -- conjugate sampler in the observed-data parametrisation:
  the posterior over the observed-data distribution is a Dirichlet process
  with the prior base plus one unit atom per record, the sensitivity
  parameter keeps its prior, and draws are i.i.d.
* ``run_peta_gibbs`` -- data augmentation in the outcome parametrisation:
  impute missing outcomes, redraw the outcome distribution from its
  conjugate Dirichlet posterior, and update (eta, alpha) by random-walk
  Metropolis-Hastings on the drop-out logistic likelihood.
* ``run_egp_engine`` -- direct sampler for fixed (eta, alpha): the posterior
  of the observed-outcome distribution is the extended-gamma normalised CRM,
  and the observation probability follows an independent Beta cut-posterior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import expit

from .egp import _mixing_for, egp_sample_posterior, selection_model
from .errors import DegenerateMeasureError, MixingFailureError, ParameterError
from .measures import MISSING, BaseMeasure, DiscreteMeasure, GroupedSample, dp_draw, dp_posterior_base
from .model import FunctionalSpec, ObservedDataset, SensitivitySpec, chi_functional, kappa_functional
from .stochastic import QuadratureSpec, RngLike, RngStream, as_generator

__all__ = [
    "NormalPrior",
    "UniformPrior",
    "PriorSpec",
    "EngineConfig",
    "PosteriorDraws",
    "logistic_loglik",
    "mh_adapt_step",
    "run_h_engine",
    "run_peta_gibbs",
    "run_egp_engine",
    "split_rhat",
]


@dataclass(frozen=True)
class NormalPrior:
    mean: float
    sd: float

    def __post_init__(self):
        if not (self.sd > 0):
            raise ParameterError("normal prior needs sd > 0")

    def sample(self, gen: np.random.Generator, size=None):
        return gen.normal(self.mean, self.sd, size=size)

    def logpdf(self, x: float) -> float:
        z = (x - self.mean) / self.sd
        return -0.5 * z * z - np.log(self.sd) - 0.5 * np.log(2 * np.pi)


@dataclass(frozen=True)
class UniformPrior:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise ParameterError("uniform prior needs lo < hi")

    def sample(self, gen: np.random.Generator, size=None):
        return gen.uniform(self.lo, self.hi, size=size)

    def logpdf(self, x: float) -> float:
        if self.lo <= x <= self.hi:
            return -np.log(self.hi - self.lo)
        return -np.inf


Prior = Union[float, NormalPrior, UniformPrior]


@dataclass(frozen=True)
class PriorSpec:
    """Priors (or fixed values) for the sensitivity slope and the intercept."""

    alpha: Prior
    eta: Optional[Prior] = None

    @property
    def alpha_fixed(self) -> bool:
        return isinstance(self.alpha, (int, float))

    @property
    def eta_fixed(self) -> bool:
        return isinstance(self.eta, (int, float))


@dataclass(frozen=True)
class EngineConfig:
    n_draws: int = 10000
    burn_in: int = 2000
    thinning: int = 1
    trunc_eps: float = 1e-10
    mh_target_accept: float = 0.234
    mh_adapt_window: int = 50
    mh_initial_scale: float = 0.5
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if self.n_draws < 1 or self.burn_in < 0 or self.thinning < 1:
            raise ParameterError("n_draws >= 1, burn_in >= 0, thinning >= 1 required")
        if not (0 < self.mh_target_accept < 1):
            raise ParameterError("mh_target_accept must lie in (0, 1)")
        if not (0 < self.trunc_eps < 1):
            raise ParameterError("trunc_eps must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class PosteriorDraws:
    """Kept draws of the functional plus chain metadata."""

    functional: np.ndarray
    alpha: np.ndarray
    eta: np.ndarray
    acceptance_rate: float
    seeds: Optional[RngStream] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.eta.size and self.eta.size != self.functional.size:
            raise ParameterError("eta draws must align with functional draws")
        if self.alpha.size != self.functional.size:
            raise ParameterError("alpha draws must align with functional draws")
        if not (0 <= self.acceptance_rate <= 1):
            raise ParameterError("acceptance rate must lie in [0, 1]")


def split_rhat(x: np.ndarray) -> float:
    """Split-chain scale-reduction statistic of a single chain."""
    x = np.asarray(x, dtype=float)
    m = x.size // 2
    if m < 2:
        return float("nan")
    halves = np.stack([x[:m], x[m:2 * m]])
    within = halves.var(axis=1, ddof=1).mean()
    between = m * halves.mean(axis=1).var(ddof=1)
    if within == 0:
        return 1.0
    return float(np.sqrt((m - 1) / m + between / (m * within)))


def logistic_loglik(eta: float, alpha: float, y, r, c: float) -> float:
    """Log likelihood of the drop-out logistic model on full data.

    Each record contributes r * log(1/(1+e^v)) + (1-r) * log(e^v/(1+e^v))
    with v = eta + alpha * (log y - c), evaluated through logaddexp.
    """
    y = np.asarray(y, dtype=float)
    r = np.asarray(r)
    if np.any(y <= 0):
        raise ParameterError("logistic likelihood requires positive outcomes")
    v = eta + alpha * (np.log(y) - c)
    return float(np.sum((1 - r) * v - np.logaddexp(0.0, v)))


def mh_adapt_step(current_scale: float, recent_accept_rate: float, target: float,
                  gain: float = 1.0) -> float:
    """Scale update scale * exp(gain * (rate - target)); gain decays 1/window."""
    if not (current_scale > 0):
        raise ParameterError("proposal scale must be positive")
    return float(current_scale * np.exp(gain * (recent_accept_rate - target)))


def _progress_tick(progress, i, total):
    if progress is not None and (i % max(1, total // 50) == 0 or i == total - 1):
        progress((i + 1) / total)


# ---------------------------------------------------------------------------
# engine 1: observed-data parametrisation (conjugate, i.i.d. draws)


def run_h_engine(data: ObservedDataset, prior_base: BaseMeasure, priors: PriorSpec,
                 c: float, g: FunctionalSpec, cfg: EngineConfig, rng: RngLike,
                 progress: Optional[Callable[[float], None]] = None) -> PosteriorDraws:
    """Sample the functional under a Dirichlet prior on the observed-data law.

    The sensitivity slope keeps its prior (the data carry no information on
    it); its whole block is drawn before any measure draw so that the alpha
    stream depends only on the seed and the prior.
    """
    if data.n_observed < 1:
        raise DegenerateMeasureError("no observed outcomes in the data")
    at_missing = prior_base.atom_locations == MISSING
    if not np.any(at_missing) or prior_base.atom_masses[at_missing].sum() <= 0:
        raise ParameterError("prior base must place positive mass on the missing symbol")
    gen = as_generator(rng)
    seeds = rng if isinstance(rng, RngStream) else None

    if priors.alpha_fixed:
        alphas = np.full(cfg.n_draws, float(priors.alpha))
    else:
        alphas = priors.alpha.sample(gen, cfg.n_draws)

    post_base = dp_posterior_base(prior_base, data.x)
    out = np.empty(cfg.n_draws)
    for i in range(cfg.n_draws):
        H = dp_draw(post_base, cfg.trunc_eps, gen)
        out[i] = chi_functional(H, g, SensitivitySpec(alphas[i], c))
        _progress_tick(progress, i, cfg.n_draws)
    return PosteriorDraws(out, alphas, np.empty(0), acceptance_rate=1.0, seeds=seeds)


# ---------------------------------------------------------------------------
# engine 2: outcome parametrisation (Gibbs with data augmentation)


def _initial_value(prior: Prior) -> float:
    if isinstance(prior, (int, float)):
        return float(prior)
    if isinstance(prior, NormalPrior):
        return prior.mean
    return 0.5 * (prior.lo + prior.hi)


def _log_prior(priors: PriorSpec, eta: float, alpha: float) -> float:
    total = 0.0
    if not priors.eta_fixed:
        total += priors.eta.logpdf(eta)
    if not priors.alpha_fixed:
        total += priors.alpha.logpdf(alpha)
    return total


def _impute_missing(P: DiscreteMeasure, eta: float, alpha: float, c: float,
                    n_miss: int, gen: np.random.Generator) -> np.ndarray:
    """Draw missing outcomes from the reweighted measure e^q/(1+e^{eta+q}) dP.

    Sampling happens on the atoms of the current measure draw, in log space:
    the tilt alpha*log(y) spans hundreds of nats across the atom range.
    """
    q = alpha * (np.log(P.locations) - c)
    log_w = np.log(P.weights) + q - np.logaddexp(0.0, eta + q)
    w = np.exp(log_w - log_w.max())
    cdf = np.cumsum(w)
    idx = np.searchsorted(cdf, gen.random(n_miss) * cdf[-1], side="right")
    return P.locations[np.minimum(idx, P.locations.size - 1)]


def run_peta_gibbs(data: ObservedDataset, prior_base: BaseMeasure, priors: PriorSpec,
                   c: float, g: FunctionalSpec, cfg: EngineConfig, rng: RngLike,
                   progress: Optional[Callable[[float], None]] = None,
                   record_p1g: bool = False) -> PosteriorDraws:
    """Gibbs chain over (outcome distribution, missing outcomes, eta, alpha).

    Sweep: (1) redraw the outcome distribution from its conjugate Dirichlet
    posterior given the completed data; (2) re-impute the missing outcomes
    from the current draw; (3) joint random-walk Metropolis-Hastings update
    of the free selection parameters, with the step scale adapted towards
    the target acceptance rate during burn-in only.  The functional of each
    kept sweep is the integral of g under the current measure draw.
    """
    if data.n_observed < 1:
        raise DegenerateMeasureError("no observed outcomes in the data")
    if priors.eta is None:
        raise ParameterError("the outcome parametrisation needs an eta prior or value")
    gen = as_generator(rng)
    seeds = rng if isinstance(rng, RngStream) else None

    n, n_obs = data.n, data.n_observed
    n_miss = n - n_obs
    obs = data.observed
    r_full = np.concatenate([np.ones(n_obs, dtype=int), np.zeros(n_miss, dtype=int)])

    eta = _initial_value(priors.eta)
    alpha = _initial_value(priors.alpha)
    y_full = np.concatenate([obs, gen.choice(obs, size=n_miss)]) if n_miss else obs.copy()

    free = (not priors.eta_fixed) or (not priors.alpha_fixed)
    scale = cfg.mh_initial_scale
    window_hits = 0
    window_tries = 0
    window_index = 0
    accepted = 0
    mh_steps = 0
    log_target = (logistic_loglik(eta, alpha, y_full, r_full, c)
                  + _log_prior(priors, eta, alpha)) if free else 0.0

    total_sweeps = cfg.burn_in + cfg.n_draws * cfg.thinning
    functional = np.empty(cfg.n_draws)
    alphas = np.empty(cfg.n_draws)
    etas = np.empty(cfg.n_draws)
    p1g = np.empty(cfg.n_draws) if record_p1g else None
    kept = 0

    for sweep in range(total_sweeps):
        P = dp_draw(dp_posterior_base(prior_base, y_full), cfg.trunc_eps, gen)

        if n_miss:
            y_full = np.concatenate([obs, _impute_missing(P, eta, alpha, c, n_miss, gen)])
            if free:
                log_target = (logistic_loglik(eta, alpha, y_full, r_full, c)
                              + _log_prior(priors, eta, alpha))

        if free:
            step = scale * gen.standard_normal(2)
            eta_p = eta if priors.eta_fixed else eta + step[0]
            alpha_p = alpha if priors.alpha_fixed else alpha + step[1]
            lp = _log_prior(priors, eta_p, alpha_p)
            if np.isfinite(lp):
                cand = logistic_loglik(eta_p, alpha_p, y_full, r_full, c) + lp
                if np.log(gen.random()) < cand - log_target:
                    eta, alpha, log_target = eta_p, alpha_p, cand
                    window_hits += 1
                    if sweep >= cfg.burn_in:
                        accepted += 1
            window_tries += 1
            if sweep >= cfg.burn_in:
                mh_steps += 1
            if sweep < cfg.burn_in and window_tries >= cfg.mh_adapt_window:
                window_index += 1
                rate = window_hits / window_tries
                scale = mh_adapt_step(scale, rate, cfg.mh_target_accept,
                                      gain=1.0 / window_index)
                last_rate = rate
                window_hits = window_tries = 0
            if free and sweep == cfg.burn_in - 1 and window_index > 0:
                if last_rate < 0.01:
                    raise MixingFailureError(
                        "Metropolis-Hastings acceptance below 1% after adaptation")

        if sweep >= cfg.burn_in and (sweep - cfg.burn_in) % cfg.thinning == 0 and kept < cfg.n_draws:
            functional[kept] = P.integrate(g)
            alphas[kept] = alpha
            etas[kept] = eta
            if record_p1g:
                q = alpha * (np.log(P.locations) - c)
                w1 = P.weights * expit(-(eta + q))
                p1g[kept] = float(np.dot(w1, g(P.locations))) / w1.sum()
            kept += 1
        _progress_tick(progress, sweep, total_sweeps)

    rate = accepted / mh_steps if mh_steps else 1.0
    extras = {"split_rhat": split_rhat(functional), "proposal_scale": scale}
    if record_p1g:
        extras["p1g"] = p1g
    return PosteriorDraws(functional, alphas, etas, acceptance_rate=rate,
                          seeds=seeds, extras=extras)


# ---------------------------------------------------------------------------
# engine 3: extended-gamma posterior for fixed (eta, alpha)


def run_egp_engine(data: ObservedDataset, eta: float, spec: SensitivitySpec,
                   prior_base: BaseMeasure, g: FunctionalSpec, cfg: EngineConfig,
                   rng: RngLike,
                   progress: Optional[Callable[[float], None]] = None) -> PosteriorDraws:
    """Direct posterior sampler for fixed selection parameters.

    Per draw: observed-outcome distribution from the extended-gamma CRM
    posterior with jump tilt 1 + e^{eta+q}; observation probability from the
    Beta(N+1, n-N+1) cut-posterior (binomial count only, flat surrogate
    prior); functional assembled through the (p, P1) map.
    """
    if data.n_observed < 1:
        raise DegenerateMeasureError("no observed outcomes in the data")
    gen = as_generator(rng)
    seeds = rng if isinstance(rng, RngStream) else None

    grouped = GroupedSample.from_sample(data.observed)
    model = selection_model(eta, spec, prior_base)
    mixing = _mixing_for(model, grouped, cfg.quad)
    jump_tol = 1e-8 * data.n

    out = np.empty(cfg.n_draws)
    p1g = np.empty(cfg.n_draws)
    for i in range(cfg.n_draws):
        lam = mixing.sample(gen)
        P1 = egp_sample_posterior(model, grouped, jump_tol, gen, quad=cfg.quad, lam=lam)
        p = gen.beta(data.n_observed + 1, data.n - data.n_observed + 1)
        out[i] = kappa_functional(p, P1, g, spec)
        p1g[i] = P1.integrate(g)
        _progress_tick(progress, i, cfg.n_draws)
    alphas = np.full(cfg.n_draws, spec.alpha)
    etas = np.full(cfg.n_draws, eta)
    return PosteriorDraws(out, alphas, etas, acceptance_rate=1.0, seeds=seeds,
                          extras={"p1g": p1g})
