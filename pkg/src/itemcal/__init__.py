"""Sequential two-stage calibration of 3PL test items.

Library layout:

* ``model`` — the 3PL response model, its regression parameterization and
  all likelihood derivatives;
* ``design`` — two-stage, strict D-optimal and random examinee selection;
* ``estimation`` — staged and joint maximum-likelihood estimators;
* ``sequential`` — the eigenvalue stopping rule and coverage checks;
* ``pool`` — the synthetic examinee pool with decaying measurement error;
* ``harness`` — single calibration runs and the Monte Carlo driver;
* ``reporting`` / ``figures`` — CSV tables, curve data and plots;
* ``cli`` — the ``itemcal`` command-line tool.
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    BatchTag,
    Gamma,
    ItemParams,
    ParamBounds,
    ResponseRecord,
    fisher_information_point,
    from_gamma,
    icc,
    log_likelihood,
    observed_information,
    score,
    to_gamma,
)
from .design import (  # noqa: F401
    CalibrationState,
    DesignConfig,
    DesignRequest,
    Target,
    d_optimal_pair,
    random_batch,
    strict_d_optimal_batch,
    theta_lower_bound,
    two_stage_batch,
)
from .estimation import (  # noqa: F401
    FitOptions,
    FitResult,
    fit_ab_given_c,
    fit_mle,
    initial_c_estimate,
)
from .sequential import (  # noqa: F401
    StoppingConfig,
    StoppingDecision,
    chi_square_critical,
    ellipsoid_contains,
    marginal_coverage,
    stopping_check,
)
from .pool import Examinee, PoolConfig, measurement_error_sd, recruit, respond  # noqa: F401
from .harness import (  # noqa: F401
    CalibrationResult,
    McSummary,
    Strategy,
    StudyConfig,
    replication_seed,
    run_calibration,
    run_monte_carlo,
)
from .errors import (  # noqa: F401
    CalibrationError,
    ConfigError,
    DegenerateData,
    NonConvergence,
    SingularInformation,
)
