"""Statistical versus interventional forecast risk for VAR models.

Library layout:

* :mod:`varcausal.companion`    - companion matrices, spectra, Schur forms
* :mod:`varcausal.process`      - models, simulation, autocovariance
* :mod:`varcausal.interventions`- the do-operator on lag windows
* :mod:`varcausal.risk`         - analytic and Monte-Carlo risks
* :mod:`varcausal.estimators`   - OLS / ridge / lasso / elastic net fitting
* :mod:`varcausal.bounds`       - every bound, as report objects
* :mod:`varcausal.harness`      - the simulation study end to end
* :mod:`varcausal.cli`          - command-line entry point
"""

from .companion import (
    CompanionMatrix,
    Spectrum,
    build_companion,
    coefficient_bound,
    elementary_symmetric,
    matrix_power,
    power_entry_via_schur,
    schur_polynomial,
    spectrum,
)
from .errors import BadInputError, ConfigError, NumericalError, VarCausalError
from .estimators import FitResult, LaggedDesign, build_design, fit_cv, fit_ols, fit_regularized
from .harness import BucketSummary, ExperimentConfig, ExperimentRecord, bucket_by_kappa, run
from .interventions import InterventionSpec, InterventionalCov, interventional_cov, simulate_intervened
from .process import (
    AutocovMatrix,
    SamplePath,
    VarModel,
    empirical_autocov,
    exact_autocov,
    is_stationary,
    rejection_sample_stable,
    simulate,
)
from .bounds import (
    BlockScheme,
    BoundReport,
    condition_number,
    cor2_bound,
    prop1_bound,
    rademacher_estimate,
    schur_tight_bound,
    thm1_bound,
)
from .risk import (
    ModelPair,
    RiskReport,
    causal_risk,
    empirical_causal_risk,
    empirical_stat_risk,
    noise_floor,
    relative_shift_gap,
    risk_difference,
    risk_quotient,
    risk_report,
    stat_risk,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
