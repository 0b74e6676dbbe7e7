"""Twin-trajectory variance reduction for nonequilibrium MD, desk scale."""

__version__ = "0.1.0"

from .config import SimConfig, parse_config, dump_config, config_hash  # noqa: F401
from .estimators import (  # noqa: F401
    EstimateReport,
    LambdaSeries,
    ObservableSeries,
    apm_estimate,
    bias_bound,
    build_lambda_series,
    com_velocity_sigma,
    conventional_estimate,
    cpu_time_estimate,
    gamma_ratio,
    lambda_ensemble,
    relative_fluctuation,
    required_samples,
)
from .twin import (  # noqa: F401
    ObservableSpec,
    TwinPath,
    advance_twin,
    delta_h,
    graft_middle,
    init_twin,
    sample_observables,
)
