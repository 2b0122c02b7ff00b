"""Parameter maps and functionals of the missing-outcomes sensitivity model.

The model: outcomes Y > 0 with full-population distribution P, missingness
indicator R, observed X = R*Y.  Writing P1, P0 for the outcome distribution
of observed / missing subjects and p = Pr(R = 1),

    P = p*P1 + (1-p)*P0,     dP0 proportional to e^q dP1,

for the tilt q(y) = alpha*(log y - c).  The drop-out log-odds are
eta + q(y), with e^eta = ((1-p)/p) / P1(e^q).  The target is E_P g(Y),
expressible either from the observed-data distribution H (chi) or from
(p, P1) (kappa).

All exponential reweighting is done in log space with max-subtraction:
alpha*log y is unbounded over the half line, so raw exponentials overflow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import (
    BoundaryError,
    DegenerateMeasureError,
    DomainError,
    InconsistentRecordError,
    NumericError,
    ParameterError,
)
from .measures import MISSING, DiscreteMeasure

__all__ = [
    "SensitivitySpec",
    "ObservedDataset",
    "FunctionalSpec",
    "q_eval",
    "chi_functional",
    "kappa_functional",
    "eta_from_p",
    "p_from_eta",
    "p0_reweight",
    "p1_reweight",
    "propensity_curve",
    "efficiency_bound",
    "efficient_influence",
]


@dataclass(frozen=True)
class SensitivitySpec:
    """Sensitivity function q(y) = alpha * (log y - c); alpha = 0 is MCAR."""

    alpha: float
    c: float = 0.0

    def q(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if np.any(y <= 0):
            raise DomainError("q is defined for positive outcomes only")
        return self.alpha * (np.log(y) - self.c)


def q_eval(spec: SensitivitySpec, y):
    """Evaluate the sensitivity function at y > 0."""
    out = spec.q(y)
    return float(out) if np.ndim(y) == 0 else out


@dataclass(frozen=True)
class ObservedDataset:
    """Records (x, r) with x = r*y; x is 0 exactly when the outcome is missing."""

    x: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=float)
        r = np.ascontiguousarray(self.r, dtype=int)
        x.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "r", r)
        if x.shape != r.shape or x.ndim != 1 or x.size == 0:
            raise ParameterError("x and r must be equal-length, nonempty 1-D arrays")
        if not np.isin(r, (0, 1)).all():
            raise InconsistentRecordError("r must be 0/1")
        if np.any(x[r == 0] != MISSING):
            raise InconsistentRecordError("missing records must store x = 0")
        if np.any(x[r == 1] <= 0):
            raise InconsistentRecordError("observed outcomes must be strictly positive")

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def n_observed(self) -> int:
        return int(self.r.sum())

    @property
    def n_missing(self) -> int:
        return self.n - self.n_observed

    @property
    def observed(self) -> np.ndarray:
        return self.x[self.r == 1]


@dataclass(frozen=True)
class FunctionalSpec:
    """Functional of the outcome distribution: E_P g(Y) for a pointwise g."""

    fn: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(y, dtype=float)), dtype=float)

    @staticmethod
    def mean() -> "FunctionalSpec":
        return FunctionalSpec(lambda y: y, "mean")

    @staticmethod
    def cdf_at(t: float) -> "FunctionalSpec":
        return FunctionalSpec(lambda y: (y <= t).astype(float), f"cdf@{t:g}")


def _split_observed(H: DiscreteMeasure):
    miss = H.locations == MISSING
    return miss, H.locations[~miss], H.weights[~miss]


def _tilt_stats(w: np.ndarray, q: np.ndarray, gv: np.ndarray):
    """(sum w g e^q, sum w e^q) evaluated with a common max-q shift.

    Only the ratio of the two is ever used, so the shift cancels and neither
    sum can overflow.
    """
    m = q.max()
    ew = w * np.exp(q - m)
    denom = ew.sum()
    return float(np.dot(gv, ew)), float(denom)


def chi_functional(H: DiscreteMeasure, g: FunctionalSpec, spec: SensitivitySpec) -> float:
    """Target functional expressed in the observed-data distribution H.

    chi(H, q) = H(g e^q) * H{*} / H(e^q) + H g, with the conventions
    g(*) = 0 and e^{q(*)} = 0 (the missingness atom enters only through its
    mass).
    """
    if not H.normalized:
        raise ParameterError("H must be normalized")
    miss, y, w = _split_observed(H)
    h_star = float(H.weights[miss].sum())
    if y.size == 0:
        raise DegenerateMeasureError("H(e^q) = 0: no observed-outcome atoms")
    gv = g(y)
    num, den = _tilt_stats(w, spec.q(y), gv)
    if den == 0.0:
        raise DegenerateMeasureError("H(e^q) underflowed to zero")
    return num / den * h_star + float(np.dot(w, gv))


def kappa_functional(p: float, P1: DiscreteMeasure, g: FunctionalSpec,
                     spec: SensitivitySpec) -> float:
    """Target functional in the (p, P1) parametrisation.

    kappa(p, P1, q) = (1-p) * P1(g e^q)/P1(e^q) + p * P1 g.
    """
    if not (0 <= p <= 1):
        raise ParameterError("p must lie in [0, 1]")
    if not P1.normalized:
        raise ParameterError("P1 must be normalized")
    y, w = P1.locations, P1.weights
    if np.any(y <= 0):
        raise ParameterError("P1 must live on positive outcomes")
    gv = g(y)
    num, den = _tilt_stats(w, spec.q(y), gv)
    if den == 0.0:
        raise DegenerateMeasureError("P1(e^q) underflowed to zero")
    return (1.0 - p) * num / den + p * float(np.dot(w, gv))


def _log_p1_eq(P1: DiscreteMeasure, spec: SensitivitySpec) -> float:
    """log P1(e^q), computed as a shifted log-sum-exp."""
    q = spec.q(P1.locations)
    m = q.max()
    return float(m + np.log(np.dot(P1.weights, np.exp(q - m))))


def eta_from_p(p: float, P1: DiscreteMeasure, spec: SensitivitySpec) -> float:
    """Selection-bias intercept: eta = log((1-p)/p) - log P1(e^q)."""
    if not (0 < p < 1):
        raise BoundaryError("eta is defined for p strictly inside (0, 1)")
    return float(np.log((1.0 - p) / p) - _log_p1_eq(P1, spec))


def p_from_eta(eta: float, P: DiscreteMeasure, spec: SensitivitySpec) -> float:
    """Observation probability p = int 1/(1 + e^{eta+q}) dP."""
    if not P.normalized:
        raise ParameterError("P must be normalized")
    return float(np.dot(P.weights, expit(-(eta + spec.q(P.locations)))))


def _renormalised(P: DiscreteMeasure, log_w: np.ndarray) -> DiscreteMeasure:
    m = log_w.max()
    if not np.isfinite(m):
        raise NumericError("all reweighted atom masses underflowed to zero")
    w = np.exp(log_w - m)
    return DiscreteMeasure(P.locations, w / w.sum(), on_outcomes=True)


def p0_reweight(P: DiscreteMeasure, eta: float, spec: SensitivitySpec) -> DiscreteMeasure:
    """Missing-outcome distribution dP0 proportional to e^q/(1+e^{eta+q}) dP."""
    if not P.normalized:
        raise ParameterError("P must be normalized")
    q = spec.q(P.locations)
    log_w = np.log(P.weights, where=P.weights > 0,
                   out=np.full(P.weights.shape, -np.inf)) + q - np.logaddexp(0.0, eta + q)
    return _renormalised(P, log_w)


def p1_reweight(P: DiscreteMeasure, eta: float, spec: SensitivitySpec):
    """Observed-outcome distribution dP1 = (1/p) 1/(1+e^{eta+q}) dP; returns (p, P1)."""
    if not P.normalized:
        raise ParameterError("P must be normalized")
    q = spec.q(P.locations)
    p = float(np.dot(P.weights, expit(-(eta + q))))
    log_w = np.log(P.weights, where=P.weights > 0,
                   out=np.full(P.weights.shape, -np.inf)) - np.logaddexp(0.0, eta + q)
    return p, _renormalised(P, log_w)


def propensity_curve(eta: float, spec: SensitivitySpec, y_grid) -> np.ndarray:
    """Drop-out probability Pr(R=0 | Y=y) = expit(eta + q(y)) on a grid."""
    y = np.asarray(y_grid, dtype=float)
    if np.any(y <= 0):
        raise DomainError("propensity grid must be strictly positive")
    return expit(eta + spec.q(y))


# ---------------------------------------------------------------------------
# efficiency theory


def _influence_pieces(p: float, P1: DiscreteMeasure, g: FunctionalSpec,
                      spec: SensitivitySpec):
    """Shared building blocks: eta, P0 weights, means, and the observed-part
    direction A(y) = (g - P0 g) e^{eta+q} + (g - P1 g), which is mean-zero
    under P1."""
    if not (0 < p < 1):
        raise BoundaryError("efficiency theory needs p strictly inside (0, 1)")
    eta = eta_from_p(p, P1, spec)
    y, w = P1.locations, P1.weights
    q = spec.q(y)
    m = q.max()
    ew = w * np.exp(q - m)
    w0 = ew / ew.sum()  # P0 weights on the same support
    gv = g(y)
    p1g = float(np.dot(w, gv))
    p0g = float(np.dot(w0, gv))
    return eta, q, gv, p1g, p0g


def efficiency_bound(p: float, P1: DiscreteMeasure, g: FunctionalSpec,
                     spec: SensitivitySpec) -> float:
    """Minimal asymptotic variance for estimating the target functional.

    Computed as the variance of the efficient influence function:

        p(1-p) (P0 g - P1 g)^2 + p * P1[ ((g - P0 g) e^{eta+q} + g - P1 g)^2 ].

    For constant q (MCAR) this reduces to Var_{P1}(g)/p.
    """
    eta, q, gv, p1g, p0g = _influence_pieces(p, P1, g, spec)
    a_dir = (gv - p0g) * np.exp(eta + q) + (gv - p1g)
    second = float(np.dot(P1.weights, a_dir ** 2))
    return p * (1.0 - p) * (p0g - p1g) ** 2 + p * second


def efficient_influence(x, r, p: float, P1: DiscreteMeasure, g: FunctionalSpec,
                        spec: SensitivitySpec):
    """Efficient influence function at a record (x, r); vectorised over records.

    phi(r, x) = (r - p)(P1 g - P0 g) + r * ((g(x) - P0 g) e^{eta+q(x)} + g(x) - P1 g).
    """
    eta, _, _, p1g, p0g = _influence_pieces(p, P1, g, spec)
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    r = np.atleast_1d(np.asarray(r))
    if not np.isin(r, (0, 1)).all():
        raise InconsistentRecordError("r must be 0/1")
    if np.any((r == 1) & (x == MISSING)):
        raise InconsistentRecordError("observed records cannot carry the missing symbol")
    out = (r - p) * (p1g - p0g)
    obs = r == 1
    if np.any(obs):
        y = x[obs]
        gv = g(y)
        out = out.astype(float)
        out[obs] += (gv - p0g) * np.exp(eta + spec.q(y)) + (gv - p1g)
    return float(out[0]) if scalar else out
