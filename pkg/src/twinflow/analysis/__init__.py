from .profiles import FlowField, VelocityProfile, bin_velocity_profile, grid_flow_field
from .streamlines import Streamline, trace_streamline, trace_streamlines
from .transport import (
    NonConvergenceError,
    SlipResult,
    UnreliableSlipError,
    ViscosityProfile,
    autocorrelation,
    drainage_friction_from_intercept,
    drainage_shear_velocity,
    fit_drainage_intercept,
    friction_coefficient_gk,
    friction_from_faf,
    green_kubo_viscosity,
    normalize_viscosity,
    relative_viscosity,
    slip_length_emd,
    slip_length_profile,
    viscosity_from_acf,
)
