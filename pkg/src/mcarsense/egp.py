"""Posterior of a normalised completely random measure of extended-gamma type.

The prior is the normalisation of a CRM with continuous intensity

    nu(dx, ds) = s^-1 exp(-s * b(x)) ds a(dx),

for a strictly positive function ``b`` bounded below by ``b_floor`` and an
atomless finite base measure ``a``.  In the missing-outcomes application
``b = 1 + exp(eta + q)``, which is how a Dirichlet-process prior on the full
outcome distribution induces a prior on the observed-outcome distribution.

Given an i.i.d. sample, the posterior is a mixture over a scalar latent
``lambda``:

* mixing density proportional to
  ``lambda^{n-1} e^{-psi(lambda)} prod_j (lambda + b(v_j))^{-N_j}``
  over the distinct values v_j with multiplicities N_j, where
  ``psi(lambda) = int log(1 + lambda / b) da``;
* given lambda, each distinct value carries an independent
  Gamma(N_j, lambda + b(v_j)) weight, and the diffuse remainder is a CRM
  with intensity ``s^-1 e^{-s (lambda + b(x))} ds a(dx)``;
* the normalised sum of the two parts is one posterior draw.

The posterior mean has closed-form predictive weights (one lambda integral
per distinct value plus one for the diffuse remainder); those integrals are
evaluated here by adaptive quadrature in log-lambda after subtracting the
maximum of the log integrand.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import AccuracyError, NumericError, ParameterError
from .measures import BaseMeasure, DiscreteMeasure, GroupedSample
from .model import SensitivitySpec
from .stochastic import (
    QuadratureSpec,
    RngLike,
    as_generator,
    exp_integral_e1,
    integrate_semiline_vector,
)

__all__ = [
    "EGPModel",
    "selection_model",
    "egp_psi",
    "egp_mixing_logdensity",
    "LambdaMixing",
    "egp_sample_lambda",
    "egp_sample_posterior",
    "PosteriorMeanMeasure",
    "egp_posterior_mean",
]

_LOG_DENSITY_DROP = np.log(1e12)  # grid extends until the density fell by this


@dataclass(frozen=True, eq=False)
class EGPModel:
    """Intensity data: jump tilt ``b`` (with known positive floor) and base ``a``."""

    b: Callable[[np.ndarray], np.ndarray]
    b_floor: float
    base: BaseMeasure

    def __post_init__(self):
        if not (self.b_floor > 0):
            raise ParameterError("b_floor must be strictly positive")
        if not self.base.is_atomless:
            raise ParameterError("the base measure must be atomless")

    def b_values(self, x) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.asarray(self.b(np.asarray(x, dtype=float)), dtype=float)


def selection_model(eta: float, spec: SensitivitySpec, base: BaseMeasure) -> EGPModel:
    """Model with b(y) = 1 + exp(eta + q(y)), the drop-out odds plus one.

    For a non-constant sensitivity function the infimum of b over the
    half-line is 1; under MCAR b is the constant 1 + e^eta.
    """

    def b(y):
        with np.errstate(over="ignore"):
            return 1.0 + np.exp(eta + spec.q(y))

    floor = 1.0 + np.exp(eta) if spec.alpha == 0 else 1.0
    return EGPModel(b=b, b_floor=float(floor), base=base)


# ---------------------------------------------------------------------------
# psi and the mixing density


def _psi_batch(model: EGPModel, lams: np.ndarray, quad: QuadratureSpec,
               with_derivative: bool = False):
    """psi (and optionally psi') at many lambda values in one adaptive pass."""
    lams = np.asarray(lams, dtype=float)
    m = lams.size

    def integrand(x):
        dens = model.base.continuous_density(x)[:, None]
        bx = model.b_values(x)[:, None]
        vals = np.log1p(lams[None, :] / bx) * dens
        if with_derivative:
            vals = np.concatenate([vals, dens / (lams[None, :] + bx)], axis=1)
        return vals

    out, _ = integrate_semiline_vector(integrand, quad)
    if with_derivative:
        return out[:m], out[m:]
    return out


def egp_psi(model: EGPModel, lam, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """psi(lambda) = int log(1 + lambda / b(x)) da(x), for lambda >= 0."""
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(lam_arr < 0):
        raise ParameterError("lambda must be nonnegative")
    out = np.zeros_like(lam_arr)
    pos = lam_arr > 0
    if pos.any():
        out[pos] = _psi_batch(model, lam_arr[pos], quad)
    return float(out[0]) if np.ndim(lam) == 0 else out


def egp_mixing_logdensity(model: EGPModel, grouped: GroupedSample, lam,
                          quad: QuadratureSpec = QuadratureSpec()):
    """Unnormalised log mixing density of the latent scale.

    (n-1) log(lambda) - psi(lambda) - sum_j N_j log(lambda + b(v_j)).
    """
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(lam_arr <= 0):
        raise ParameterError("lambda must be strictly positive")
    psi = _psi_batch(model, lam_arr, quad)
    b_vals = model.b_values(grouped.values_array())
    counts = grouped.counts_array()
    tail = np.log(lam_arr[:, None] + b_vals[None, :]) @ counts
    out = (grouped.n - 1) * np.log(lam_arr) - psi - tail
    return float(out[0]) if np.ndim(lam) == 0 else out


class LambdaMixing:
    """Tabulated mixing distribution of the latent scale, for one sample.

    Works on t = log(lambda): the density there is
    exp(n*t - psi(e^t) - sum_j N_j log(e^t + b_j)) and is evaluated on a
    uniform t-grid wide enough that the boundary density is below the mode
    density times 1e-12.  Sampling inverts the trapezoid CDF of the grid.
    """

    def __init__(self, model: EGPModel, grouped: GroupedSample,
                 quad: QuadratureSpec = QuadratureSpec()):
        self.model = model
        self.grouped = grouped
        self.quad = quad
        self._b_vals = model.b_values(grouped.values_array())
        self._counts = grouped.counts_array()
        if np.any(~np.isfinite(self._b_vals)):
            raise NumericError("b is infinite at a data value")
        self._build_grid()

    def _log_density_t(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        lam = np.exp(t)
        psi = _psi_batch(self.model, lam, self.quad)
        tail = np.log(lam[:, None] + self._b_vals[None, :]) @ self._counts
        return self.grouped.n * t - psi - tail

    def _build_grid(self):
        n = self.grouped.n
        b_mean = float(np.dot(self._b_vals, self._counts)) / n
        hi = np.log(max(n, 2) * (b_mean + 1.0)) + 6.0
        coarse = np.arange(-8.0, hi, 0.5)
        lc = self._log_density_t(coarse)
        t0 = coarse[int(np.argmax(lc))]

        fine = t0 + np.arange(-0.6, 0.6001, 0.05)
        lf = self._log_density_t(fine)
        i = int(np.argmax(lf))
        t_mode = fine[i]
        # curvature from a central difference; guards for flat patches
        if 0 < i < fine.size - 1:
            d2 = (lf[i - 1] - 2 * lf[i] + lf[i + 1]) / 0.05 ** 2
        else:
            d2 = -1.0
        sigma = 1.0 / np.sqrt(max(-d2, 1e-2))

        step_out = max(sigma, 0.25)
        l_mode = lf[i]

        def march(direction):
            edge = t_mode
            for _ in range(400):
                edge += direction * step_out
                if self._log_density_t(np.array([edge]))[0] < l_mode - _LOG_DENSITY_DROP:
                    return edge
            raise NumericError("mixing density tail does not decay")

        t_lo, t_hi = march(-1.0), march(+1.0)
        dt = float(np.clip(sigma / 8.0, 1e-4, 0.05))
        n_pts = int((t_hi - t_lo) / dt) + 2
        if n_pts > 20000:
            dt = (t_hi - t_lo) / 19999
            n_pts = 20000
        t = t_lo + dt * np.arange(n_pts)
        logf = self._log_density_t(t)
        f = np.exp(logf - logf.max())
        if not np.any(f > 0):
            raise NumericError("mixing density underflowed on the whole grid")
        self.t_grid = t
        self.density = f
        areas = 0.5 * (f[1:] + f[:-1]) * np.diff(t)
        self.cdf = np.concatenate([[0.0], np.cumsum(areas)])
        self.total = self.cdf[-1]

    # -- queries ----------------------------------------------------------

    def mean(self) -> float:
        lam = np.exp(self.t_grid)
        return float(np.trapz(lam * self.density, self.t_grid) /
                     np.trapz(self.density, self.t_grid))

    def prob_below(self, lam0: float) -> float:
        t0 = np.log(lam0)
        if t0 <= self.t_grid[0]:
            return 0.0
        if t0 >= self.t_grid[-1]:
            return 1.0
        c = np.interp(t0, self.t_grid, self.cdf)
        return float(c / self.total)

    def sample(self, rng: RngLike, size: Optional[int] = None):
        gen = as_generator(rng)
        m = 1 if size is None else size
        u = gen.random(m) * self.total
        seg = np.clip(np.searchsorted(self.cdf, u, side="right") - 1, 0,
                      self.t_grid.size - 2)
        t0, t1 = self.t_grid[seg], self.t_grid[seg + 1]
        f0, f1 = self.density[seg], self.density[seg + 1]
        rem = u - self.cdf[seg]
        slope = (f1 - f0) / (t1 - t0)
        # invert the linear-density segment; fall back to the flat case
        with np.errstate(invalid="ignore", divide="ignore"):
            disc = np.sqrt(np.maximum(f0 ** 2 + 2.0 * slope * rem, 0.0))
            s = np.where(np.abs(slope) > 1e-300 * np.maximum(f0, 1.0),
                         (disc - f0) / slope,
                         np.where(f0 > 0, rem / np.where(f0 > 0, f0, 1.0), 0.0))
        s = np.clip(s, 0.0, t1 - t0)
        lam = np.exp(t0 + s)
        return float(lam[0]) if size is None else lam


@functools.lru_cache(maxsize=32)
def _mixing_for(model: EGPModel, grouped: GroupedSample,
                quad: QuadratureSpec) -> LambdaMixing:
    return LambdaMixing(model, grouped, quad)


def egp_sample_lambda(model: EGPModel, grouped: GroupedSample, rng: RngLike,
                      quad: QuadratureSpec = QuadratureSpec()) -> float:
    """One draw of the latent scale from its normalised mixing density."""
    return _mixing_for(model, grouped, quad).sample(rng)


# ---------------------------------------------------------------------------
# posterior draws

# Inverse of E1 tabulated once: monotone interpolation of log(x) against
# log(E1(x)).  Jump sizes only feed a stochastic series, so ~1e-8 relative
# interpolation error is far below Monte Carlo resolution.
_E1INV_TABLE = None


def _e1_inverse_many(u: np.ndarray) -> np.ndarray:
    global _E1INV_TABLE
    if _E1INV_TABLE is None:
        x = np.exp(np.linspace(np.log(1e-280), np.log(700.0), 6000))
        vals = exp_integral_e1(x)
        _E1INV_TABLE = (np.log(vals[::-1]), np.log(x[::-1]))
    log_u = np.log(u)
    lo, hi = _E1INV_TABLE[0][0], _E1INV_TABLE[0][-1]
    out = np.exp(np.interp(np.clip(log_u, lo, hi), *_E1INV_TABLE))
    big = log_u > hi  # E1(x) ~ -gamma - log x as x -> 0
    if np.any(big):
        out[big] = np.exp(-np.euler_gamma - u[big])
    return out


def _sample_jump_series(model: EGPModel, lam: float, jump_tol: float,
                        gen: np.random.Generator):
    """Diffuse-part jumps for intensity s^-1 e^{-s(lam + b(x))} ds a(dx).

    A dominating series with the constant rate lam + b_floor is generated by
    inverting the tail mass a(X)*E1((lam + b_floor) * s) at unit-rate Poisson
    arrival times; each jump is then thinned with probability
    exp(-J * (b(x) - b_floor)), which is exact.  The series stops once the
    expected mass beyond the current jump size, at most a(X) * J, drops
    below ``jump_tol``.
    """
    total_mass = model.base.total_mass
    beta = lam + model.b_floor
    j_min = jump_tol / total_mass
    arrivals = 0.0
    locs, sizes = [], []
    for _ in range(4000):
        e = gen.standard_exponential(32)
        gammas = arrivals + np.cumsum(e)
        arrivals = gammas[-1]
        jumps = _e1_inverse_many(gammas / total_mass) / beta
        cut = int(np.argmax(jumps < j_min)) if np.any(jumps < j_min) else jumps.size
        keep = jumps[:cut]
        x = model.base.sample_normalised(gen, keep.size)
        accept = gen.random(keep.size) < np.exp(-keep * (model.b_values(x) - model.b_floor))
        locs.append(x[accept])
        sizes.append(keep[accept])
        if cut < jumps.size:
            return np.concatenate(locs), np.concatenate(sizes)
    raise AccuracyError("jump series did not reach the truncation tolerance",
                        error_bound=total_mass * float(jumps[-1]))


def egp_sample_posterior(model: EGPModel, grouped: GroupedSample, jump_tol: float,
                         rng: RngLike, quad: QuadratureSpec = QuadratureSpec(),
                         lam: Optional[float] = None) -> DiscreteMeasure:
    """One normalised posterior draw given the grouped sample.

    Steps: draw the latent scale; give every distinct value an independent
    Gamma(count, lambda + b(value)) weight; add the diffuse jump series;
    normalise everything to a probability measure.
    """
    if not (jump_tol > 0):
        raise ParameterError("jump_tol must be positive")
    gen = as_generator(rng)
    if lam is None:
        lam = _mixing_for(model, grouped, quad).sample(gen)
    vals = grouped.values_array()
    b_vals = model.b_values(vals)
    w_atoms = gen.gamma(grouped.counts_array(), 1.0 / (lam + b_vals))
    j_locs, j_sizes = _sample_jump_series(model, lam, jump_tol, gen)
    locations = np.concatenate([vals, j_locs])
    weights = np.concatenate([w_atoms, j_sizes])
    total = weights.sum()
    if not (total > 0):
        raise NumericError("posterior draw carries zero total mass")
    return DiscreteMeasure(locations, weights / total, on_outcomes=True)


# ---------------------------------------------------------------------------
# exact posterior mean via predictive weights


@dataclass(frozen=True, eq=False)
class PosteriorMeanMeasure:
    """Posterior mean: atoms at the distinct data values plus a diffuse part.

    ``diffuse_weight(x)`` is the predictive weight density of a new value at
    x, taken against the normalised base measure; its base integral is
    ``diffuse_mass``.  Atom weights and diffuse mass sum to one.
    """

    atom_locations: np.ndarray
    atom_weights: np.ndarray
    diffuse_mass: float
    diffuse_weight: Callable[[np.ndarray], np.ndarray]

    def atom_measure(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.atom_locations, self.atom_weights,
                               normalized=False, on_outcomes=True)


def _predictive_integrals(model: EGPModel, grouped: GroupedSample,
                          quad: QuadratureSpec):
    """Mode-centred setup shared by all predictive-weight integrals."""
    mixing = _mixing_for(model, grouped, quad)
    t_mode = float(mixing.t_grid[int(np.argmax(mixing.density))])
    # Beyond the tabulated grid the t-density has decayed by more than 1e12
    # relative to the mode; truncating there keeps lambda finite and costs
    # nothing at the quadrature tolerances in use.
    t_lo, t_hi = float(mixing.t_grid[0]), float(mixing.t_grid[-1])
    b_vals = model.b_values(grouped.values_array())
    counts = grouped.counts_array()

    def log_common(lam):
        psi = _psi_batch(model, lam, quad)
        tail = np.log(lam[:, None] + b_vals[None, :]) @ counts
        return grouped.n * np.log(lam) - psi - tail

    shift = log_common(np.array([np.exp(t_mode)]))[0]

    def integrate(extra: Callable[[np.ndarray], np.ndarray]):
        """int_0^infty e^{l(lambda)} extra(lambda) dlambda / e^shift,
        folded around the mode in t = log(lambda)."""
        width = extra(np.array([np.exp(t_mode)])).shape[1]

        def one_side(t, out):
            ok = (t >= t_lo) & (t <= t_hi)
            if np.any(ok):
                lam = np.exp(t[ok])
                out[ok] = np.exp(log_common(lam) - shift)[:, None] * extra(lam)
            return out

        def f(s):
            gp = one_side(t_mode + s, np.zeros((s.size, width)))
            gm = one_side(t_mode - s, np.zeros((s.size, width)))
            return gp + gm

        vals, _ = integrate_semiline_vector(f, quad)
        return vals

    return b_vals, counts, integrate


def egp_posterior_mean(model: EGPModel, grouped: GroupedSample,
                       quad: QuadratureSpec = QuadratureSpec()) -> PosteriorMeanMeasure:
    """Exact posterior mean measure through the predictive weights.

    With L(lambda) = lambda^{n-1} e^{-psi} prod_i lambda/(lambda + b(X_i)):

    * weight of distinct value v_j:  N_j int L * lambda/(lambda+b(v_j)) / D,
    * diffuse weight at x:           int L * lambda/(lambda+b(x)) / D,
    * D = n int L.

    One vector quadrature evaluates the normaliser, all atom integrals and
    the total diffuse mass over a shared panel set; every integrand carries
    the common factor exp(l(lambda) - l(mode)).
    """
    b_vals, counts, integrate = _predictive_integrals(model, grouped, quad)
    k = b_vals.size
    total_mass = model.base.total_mass

    def extra(lam):
        cols = [np.ones_like(lam)[:, None], lam[:, None] / (lam[:, None] + b_vals[None, :])]
        _, dpsi = _psi_batch(model, lam, quad, with_derivative=True)
        cols.append((lam * dpsi)[:, None])  # lambda * psi'(lambda) = int u(x) da(x)
        return np.concatenate(cols, axis=1)

    vals = integrate(extra)
    norm = vals[0] * grouped.n
    if not (norm > 0):
        raise NumericError("predictive normaliser vanished")
    p_atoms = counts * vals[1:k + 1] / norm
    diffuse = float(vals[k + 1] / norm)

    def diffuse_weight(x):
        """Predictive density of a new value against the normalised base;
        carries the total base mass so that its base integral is the diffuse
        mass and all weights sum to one."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        bx = model.b_values(x)

        def extra_probe(lam):
            return lam[:, None] / (lam[:, None] + bx[None, :])

        return total_mass * integrate(extra_probe) / norm

    return PosteriorMeanMeasure(
        atom_locations=grouped.values_array(),
        atom_weights=p_atoms,
        diffuse_mass=diffuse,
        diffuse_weight=diffuse_weight,
    )
