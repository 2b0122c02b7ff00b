"""Scenario generation, coverage experiments and asymptotic diagnostics.

The reference scenario draws observed outcomes from Gamma(r, s), missing
outcomes from Gamma(r + alpha0, s) (the exponential tilt by alpha0 * log y
maps one gamma into the other), and an observation probability p0.  All the
population quantities of that construction (centring constant, selection
intercept, target mean) have closed forms used as ground truth in the
coverage runs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.stats as st

from .egp import egp_posterior_mean, selection_model
from .engines import (
    EngineConfig,
    PosteriorDraws,
    PriorSpec,
    run_egp_engine,
    run_h_engine,
    run_peta_gibbs,
)
from .errors import McarsenseError, ParameterError, SampleSizeError
from .measures import MISSING, BaseMeasure, DiscreteMeasure, GroupedSample
from .model import (
    FunctionalSpec,
    ObservedDataset,
    SensitivitySpec,
    efficiency_bound,
)
from .stochastic import QuadratureSpec, RngLike, RngStream, as_generator, digamma, log_gamma

__all__ = [
    "ScenarioSpec",
    "CoverageCell",
    "CoverageReport",
    "BvMReport",
    "compute_c",
    "true_functional",
    "true_eta",
    "generate_dataset",
    "h_prior_base",
    "p_prior_base",
    "credible_interval",
    "run_coverage",
    "bvm_diagnostic",
    "posterior_mean_check",
    "export_report",
    "read_report",
    "REPORT_SCHEMA",
]

_C_MODES = ("zero", "observed_mean_log", "oracle_mean_log", "explicit")


@dataclass(frozen=True)
class ScenarioSpec:
    """Ground-truth generator: Gamma(r, s) observed outcomes, tilt alpha0,
    observation probability p0."""

    r: float = 2.0
    s: float = 1.0
    p0: float = 0.6
    alpha0: float = 2.0
    c_mode: str = "observed_mean_log"
    c_value: Optional[float] = None

    def __post_init__(self):
        if not (self.r > 0 and self.s > 0):
            raise ParameterError("gamma parameters must be positive")
        if not (self.r + self.alpha0 > 0):
            raise ParameterError("missing-outcome gamma shape r + alpha0 must be positive")
        if not (0 < self.p0 < 1):
            raise ParameterError("p0 must lie strictly inside (0, 1)")
        if self.c_mode not in _C_MODES:
            raise ParameterError(f"c_mode must be one of {_C_MODES}")
        if self.c_mode == "explicit" and self.c_value is None:
            raise ParameterError("explicit c_mode needs c_value")


def compute_c(scn: ScenarioSpec) -> float:
    """Centring constant of the sensitivity function.

    ``observed_mean_log`` centres at E[log Y] of the observed population,
    ``oracle_mean_log`` at E[log Y] of the full mixture.
    """
    if scn.c_mode == "zero":
        return 0.0
    if scn.c_mode == "observed_mean_log":
        return digamma(scn.r) - np.log(scn.s)
    if scn.c_mode == "oracle_mean_log":
        return (scn.p0 * (digamma(scn.r) - np.log(scn.s))
                + (1 - scn.p0) * (digamma(scn.r + scn.alpha0) - np.log(scn.s)))
    return float(scn.c_value)


def true_functional(scn: ScenarioSpec, g: FunctionalSpec = None) -> float:
    """Population value of the target: p0*r/s + (1-p0)*(r+alpha0)/s for the mean."""
    if g is not None and g.name != "mean":
        raise ParameterError("closed form available for the mean only; "
                             "evaluate other functionals by Monte Carlo")
    return scn.p0 * scn.r / scn.s + (1 - scn.p0) * (scn.r + scn.alpha0) / scn.s


def true_eta(scn: ScenarioSpec, c: float) -> float:
    """Population selection intercept for the gamma scenario.

    log((1-p0)/p0) + alpha0*(log s + c) - (log Gamma(r+alpha0) - log Gamma(r)).
    """
    return (np.log((1 - scn.p0) / scn.p0) + scn.alpha0 * (np.log(scn.s) + c)
            - (log_gamma(scn.r + scn.alpha0) - log_gamma(scn.r)))


def generate_dataset(scn: ScenarioSpec, n: int, rng: RngLike) -> ObservedDataset:
    """R ~ Bernoulli(p0); Y | R=1 ~ Gamma(r, s); Y | R=0 ~ Gamma(r+alpha0, s)."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    gen = as_generator(rng)
    r = (gen.random(n) < scn.p0).astype(int)
    y = np.where(r == 1,
                 gen.gamma(scn.r, 1.0 / scn.s, n),
                 gen.gamma(scn.r + scn.alpha0, 1.0 / scn.s, n))
    return ObservedDataset(x=np.where(r == 1, y, MISSING), r=r)


def _gamma_density(shape: float, rate: float):
    frozen = st.gamma(a=shape, scale=1.0 / rate)
    return frozen.pdf


def h_prior_base(scn: ScenarioSpec, precision: float = 1.0) -> BaseMeasure:
    """Prior base on the observed-data space: an atom at the missing symbol
    with mass (1-p0)*precision plus a Gamma(r, s)-shaped continuous part
    carrying the rest."""
    shape, rate = scn.r, scn.s
    return BaseMeasure(
        continuous_mass=scn.p0 * precision,
        density=_gamma_density(shape, rate),
        sample_continuous=lambda gen, k: gen.gamma(shape, 1.0 / rate, k),
        atom_locations=np.array([MISSING]),
        atom_masses=np.array([(1 - scn.p0) * precision]),
    )


def p_prior_base(scn: ScenarioSpec, precision: float = 1.0) -> BaseMeasure:
    """Prior base on the outcome space: the scenario mixture of the observed
    and missing outcome gammas, atomless."""
    d1 = _gamma_density(scn.r, scn.s)
    d0 = _gamma_density(scn.r + scn.alpha0, scn.s)
    p0 = scn.p0

    def density(x):
        return p0 * d1(x) + (1 - p0) * d0(x)

    def sampler(gen, k):
        pick = gen.random(k) < p0
        return np.where(pick,
                        gen.gamma(scn.r, 1.0 / scn.s, k),
                        gen.gamma(scn.r + scn.alpha0, 1.0 / scn.s, k))

    return BaseMeasure(continuous_mass=precision, density=density,
                       sample_continuous=sampler)


def credible_interval(draws, level: float = 0.90):
    """Equal-tailed interval from empirical quantiles.

    Quantiles interpolate linearly between adjacent order statistics
    (numpy's default rule), so for draws 1..100 the 90% interval is
    (5.95, 95.05).
    """
    draws = np.asarray(draws, dtype=float)
    if draws.size < 100:
        raise SampleSizeError("need at least 100 draws for a credible interval")
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(draws, [tail, 1.0 - tail])
    return float(lo), float(hi)


# ---------------------------------------------------------------------------
# coverage experiments


@dataclass(frozen=True)
class CoverageCell:
    engine: str
    n: int
    reps: int
    coverage: float
    mean_length: float
    failures: int
    seed: int


@dataclass(frozen=True)
class CoverageReport:
    cells: tuple
    base_seed: int
    level: float = 0.90


_ENGINES = ("h", "peta", "egp")


def _run_one(engine: str, data: ObservedDataset, scn: ScenarioSpec, priors: PriorSpec,
             c: float, g: FunctionalSpec, cfg: EngineConfig, rng: RngLike,
             precision: float = 1.0) -> PosteriorDraws:
    if engine == "h":
        return run_h_engine(data, h_prior_base(scn, precision), priors, c, g, cfg, rng)
    if engine == "peta":
        return run_peta_gibbs(data, p_prior_base(scn, precision), priors, c, g, cfg, rng)
    if engine == "egp":
        if not (priors.alpha_fixed and priors.eta_fixed):
            raise ParameterError("the direct engine needs fixed (eta, alpha)")
        spec = SensitivitySpec(float(priors.alpha), c)
        return run_egp_engine(data, float(priors.eta), spec, p_prior_base(scn, precision),
                              g, cfg, rng)
    raise ParameterError(f"unknown engine {engine!r}; choose from {_ENGINES}")


def run_coverage(scn: ScenarioSpec, engine_selector, priors: PriorSpec,
                 ns: Sequence[int], reps: int, base_seed: int,
                 cfg: EngineConfig = EngineConfig(), level: float = 0.90,
                 g: FunctionalSpec = None,
                 progress: Optional[Callable[[str, int], None]] = None) -> CoverageReport:
    """Frequentist coverage and mean length of credible intervals.

    Every (engine, n, replication) triple draws its dataset and runs its
    chain on dedicated substreams of ``base_seed``, so reports are
    bit-reproducible.  Replications whose engine raises are counted as
    failures and excluded from the coverage denominator.
    """
    if reps < 1:
        raise ParameterError("reps must be >= 1")
    engines = [engine_selector] if isinstance(engine_selector, str) else list(engine_selector)
    g = g or FunctionalSpec.mean()
    c = compute_c(scn)
    truth = true_functional(scn)
    cells = []
    for ci, engine in enumerate(engines):
        for ni, n in enumerate(ns):
            cell_id = ci * len(ns) + ni
            covered = 0
            lengths = []
            failures = 0
            for rep in range(reps):
                tag = (cell_id * reps + rep) * 2
                data = generate_dataset(scn, n, RngStream(base_seed, tag))
                try:
                    draws = _run_one(engine, data, scn, priors, c, g, cfg,
                                     RngStream(base_seed, tag + 1))
                    lo, hi = credible_interval(draws.functional, level)
                except McarsenseError:
                    failures += 1
                    continue
                covered += int(lo <= truth <= hi)
                lengths.append(hi - lo)
                if progress is not None:
                    progress(f"{engine}/n={n}", rep)
            ok = reps - failures
            cells.append(CoverageCell(
                engine=engine, n=int(n), reps=reps,
                coverage=covered / ok if ok else float("nan"),
                mean_length=float(np.mean(lengths)) if lengths else float("nan"),
                failures=failures, seed=base_seed))
    return CoverageReport(cells=tuple(cells), base_seed=base_seed, level=level)


# ---------------------------------------------------------------------------
# asymptotic diagnostics


@dataclass(frozen=True)
class BvMReport:
    n: int
    scaled_variance: float
    bound: float
    ratio: float
    normality_stat: float


def bvm_diagnostic(draws: PosteriorDraws, data: ObservedDataset, scn: ScenarioSpec,
                   g: FunctionalSpec = None, c: Optional[float] = None) -> BvMReport:
    """Compare n * Var(posterior draws) with the efficiency bound.

    The bound is evaluated at the plug-in truth (empirical observation rate
    and empirical observed-outcome distribution) with the run's sensitivity
    parameters.  The normality statistic is Anderson-Darling on the
    standardised draws.
    """
    g = g or FunctionalSpec.mean()
    c = compute_c(scn) if c is None else c
    alpha = float(draws.alpha[0]) if draws.alpha.size else 0.0
    spec = SensitivitySpec(alpha, c)
    p_hat = data.n_observed / data.n
    emp = DiscreteMeasure.empirical(data.observed)
    bound = efficiency_bound(p_hat, emp, g, spec)
    f = np.asarray(draws.functional)
    scaled = data.n * float(f.var(ddof=1))
    z = (f - f.mean()) / f.std(ddof=1)
    stat = float(st.anderson(z, dist="norm").statistic)
    return BvMReport(n=data.n, scaled_variance=scaled, bound=float(bound),
                     ratio=scaled / bound, normality_stat=stat)


def posterior_mean_check(data: ObservedDataset, eta: float, spec: SensitivitySpec,
                         base: BaseMeasure, quad: QuadratureSpec = QuadratureSpec()):
    """Exact predictive-mean bound: sup-distance to the empirical measure.

    The posterior mean acts on the observed outcomes (sample size N), so the
    bound is 2/N.  The sup over all events of |mean - empirical| equals the
    larger of the total diffuse mass and the summed atom deficits.
    Returns (sup_distance, bound, pass_flag).
    """
    if data.n_observed < 1:
        raise ParameterError("need at least one observed outcome")
    grouped = GroupedSample.from_sample(data.observed)
    model = selection_model(eta, spec, base)
    pm = egp_posterior_mean(model, grouped, quad)
    emp = grouped.counts_array() / grouped.n
    deficit = emp - pm.atom_weights
    sup = max(float(np.maximum(deficit, 0.0).sum()),
              float(np.maximum(-deficit, 0.0).sum()) + pm.diffuse_mass)
    bound = 2.0 / grouped.n
    return sup, bound, sup <= bound + 1e-10


# ---------------------------------------------------------------------------
# report files

REPORT_SCHEMA = {
    "type": "object",
    "required": ["base_seed", "level", "cells"],
    "properties": {
        "base_seed": {"type": "integer"},
        "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "cells": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["engine", "n", "reps", "coverage", "mean_length",
                             "failures", "seed"],
                "properties": {
                    "engine": {"type": "string"},
                    "n": {"type": "integer", "minimum": 1},
                    "reps": {"type": "integer", "minimum": 0},
                    "coverage": {"type": ["number", "null"]},
                    "mean_length": {"type": ["number", "null"]},
                    "failures": {"type": "integer", "minimum": 0},
                    "seed": {"type": "integer"},
                },
            },
        },
    },
}

_CSV_COLUMNS = ["engine", "n", "reps", "coverage", "mean_length", "failures", "seed"]


def _cell_dict(cell: CoverageCell) -> dict:
    d = asdict(cell)
    for key in ("coverage", "mean_length"):
        if isinstance(d[key], float) and np.isnan(d[key]):
            d[key] = None
    return d


def export_report(report: CoverageReport, path, fmt: str = "csv") -> None:
    """Write a coverage report with a deterministic column order."""
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=_CSV_COLUMNS)
            writer.writeheader()
            for cell in report.cells:
                writer.writerow({k: _cell_dict(cell)[k] for k in _CSV_COLUMNS})
        return
    if fmt == "json":
        import jsonschema

        doc = {"base_seed": report.base_seed, "level": report.level,
               "cells": [_cell_dict(c) for c in report.cells]}
        jsonschema.validate(doc, REPORT_SCHEMA)
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
        return
    raise ParameterError("format must be 'csv' or 'json'")


def read_report(path, fmt: str = "csv") -> CoverageReport:
    """Read back an exported report (inverse of :func:`export_report`)."""

    def cell_from(row):
        return CoverageCell(
            engine=str(row["engine"]), n=int(row["n"]), reps=int(row["reps"]),
            coverage=float("nan") if row["coverage"] in (None, "") else float(row["coverage"]),
            mean_length=float("nan") if row["mean_length"] in (None, "") else float(row["mean_length"]),
            failures=int(row["failures"]), seed=int(row["seed"]))

    if fmt == "csv":
        with open(path, newline="") as fh:
            cells = tuple(cell_from(row) for row in csv.DictReader(fh))
        seed = cells[0].seed if cells else 0
        return CoverageReport(cells=cells, base_seed=seed)
    if fmt == "json":
        import jsonschema

        with open(path) as fh:
            doc = json.load(fh)
        jsonschema.validate(doc, REPORT_SCHEMA)
        return CoverageReport(cells=tuple(cell_from(r) for r in doc["cells"]),
                              base_seed=doc["base_seed"], level=doc["level"])
    raise ParameterError("format must be 'csv' or 'json'")
