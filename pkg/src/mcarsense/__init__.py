"""Bayesian sensitivity analysis for the missing-outcomes model.

Nonparametric posterior engines for the target functional under a
parametrised deviation from missing-completely-at-random, an exact
extended-gamma posterior for the observed-outcome distribution, efficiency
bounds, and a coverage-experiment harness.
"""

from .engines import (
    EngineConfig,
    NormalPrior,
    PosteriorDraws,
    PriorSpec,
    UniformPrior,
    logistic_loglik,
    mh_adapt_step,
    run_egp_engine,
    run_h_engine,
    run_peta_gibbs,
)
from .egp import (
    EGPModel,
    LambdaMixing,
    PosteriorMeanMeasure,
    egp_mixing_logdensity,
    egp_posterior_mean,
    egp_psi,
    egp_sample_lambda,
    egp_sample_posterior,
    selection_model,
)
from .errors import (
    AccuracyError,
    BoundaryError,
    ConfigError,
    DegenerateMeasureError,
    DomainError,
    InconsistentRecordError,
    McarsenseError,
    MixingFailureError,
    NumericError,
    ParameterError,
    SampleSizeError,
)
from .measures import (
    MISSING,
    BaseMeasure,
    DiscreteMeasure,
    GroupedSample,
    dp_draw,
    dp_posterior_base,
)
from .model import (
    FunctionalSpec,
    ObservedDataset,
    SensitivitySpec,
    chi_functional,
    efficiency_bound,
    efficient_influence,
    eta_from_p,
    kappa_functional,
    p0_reweight,
    p1_reweight,
    p_from_eta,
    propensity_curve,
    q_eval,
)
from .simulation import (
    BvMReport,
    CoverageCell,
    CoverageReport,
    ScenarioSpec,
    bvm_diagnostic,
    compute_c,
    credible_interval,
    export_report,
    generate_dataset,
    h_prior_base,
    p_prior_base,
    posterior_mean_check,
    read_report,
    run_coverage,
    true_eta,
    true_functional,
)
from .stochastic import (
    QuadratureSpec,
    RngStream,
    digamma,
    exp_integral_e1,
    integrate_semiline,
    log_gamma,
    sample_categorical,
    sample_gamma,
)

__version__ = "0.1.0"
