from .state import (
    FLUID,
    WALL_BOTTOM,
    WALL_TOP,
    Box,
    ConfigurationError,
    ForceField,
    SystemState,
    build_bulk_system,
    build_system,
    fluid_com_velocity,
    kinetic_temperature,
    maxwell_boltzmann_momenta,
)
from .forces import (
    ForceResult,
    NeighborList,
    PropagationError,
    compute_forces,
    lj_pair_force,
    lj_pair_potential,
    pressure_xy,
)
from .integrate import (
    ThermostatState,
    apply_wall_drive,
    chain_energy,
    equilibrate,
    make_thermostat,
    md_step,
    nhc_step,
    rescale_to_temperature,
    total_hamiltonian,
    velocity_verlet_step,
    zero_com_velocity,
)
