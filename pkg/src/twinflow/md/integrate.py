"""Time propagation: velocity Verlet, Nose-Hoover chains, wall drive.

The composite :func:`md_step` is the unit of propagation used everywhere
(plain runs and both twin legs): advance the wall anchors, half-step the
thermostat, velocity Verlet over dt, half-step the thermostat again.
All updates are deterministic; there is no randomness past the initial
state construction.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .forces import NeighborList, PropagationError, compute_forces, lj_terms, tether_terms
from .state import FLUID, WALL_BOTTOM, WALL_TOP, SystemState


@dataclass
class ThermostatState:
    """Nose-Hoover chain acting on the momenta of a species subset."""

    temperature: float
    q: np.ndarray                 # (M,) chain masses
    xi: np.ndarray                # (M,) chain coordinates
    p_xi: np.ndarray              # (M,) chain momenta
    coupling: tuple               # species codes the chain acts on
    n_dof: int

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.float64)
        self.xi = np.asarray(self.xi, dtype=np.float64)
        self.p_xi = np.asarray(self.p_xi, dtype=np.float64)
        if len(self.q) < 2:
            raise ValueError("chain length must be at least 2")
        if np.any(self.q <= 0):
            raise ValueError("chain masses must be positive")
        if not self.coupling:
            raise ValueError("coupling set must be nonempty")

    @property
    def chain_length(self):
        return len(self.q)

    def copy(self):
        return ThermostatState(self.temperature, self.q.copy(), self.xi.copy(),
                               self.p_xi.copy(), self.coupling, self.n_dof)


def make_thermostat(state, temperature, coupling=(WALL_BOTTOM, WALL_TOP),
                    omega=2.0, chain_length=3):
    """Chain masses from the usual frequency heuristic Q1 = N_dof*T/omega^2."""
    mask = np.isin(state.species, np.atleast_1d(list(coupling)))
    n_dof = 3 * int(mask.sum())
    if n_dof == 0:
        raise ValueError("coupling selects no particles")
    q = np.full(chain_length, temperature / omega ** 2)
    q[0] *= n_dof
    zeros = np.zeros(chain_length)
    return ThermostatState(temperature, q, zeros.copy(), zeros.copy(),
                           tuple(coupling), n_dof)


def chain_energy(thermo):
    """Extended-system energy of the chain, logged separately from H."""
    v = thermo.p_xi / thermo.q
    kin = 0.5 * float((thermo.q * v ** 2).sum())
    pot = thermo.n_dof * thermo.temperature * thermo.xi[0] \
        + thermo.temperature * float(thermo.xi[1:].sum())
    return kin + pot


def nhc_step(state, thermo, dt, ff=None):
    """Apply the chain operator for an interval dt to the coupled momenta.

    Momenta of species outside the coupling set are untouched.  Returns
    the updated (state, thermostat); the inputs are not modified.
    """
    masses = np.ones(3) if ff is None else ff.masses
    mask = np.isin(state.species, np.atleast_1d(list(thermo.coupling)))
    p = state.momenta[mask]
    m = masses[state.species[mask]]
    ke2 = float((p ** 2 / m[:, None]).sum())

    M = thermo.chain_length
    T = thermo.temperature
    q = thermo.q
    v = thermo.p_xi / q
    xi = thermo.xi.copy()
    dt2, dt4, dt8 = dt / 2.0, dt / 4.0, dt / 8.0

    g = np.empty(M)
    g[0] = (ke2 - thermo.n_dof * T) / q[0]
    for k in range(1, M):
        g[k] = (q[k - 1] * v[k - 1] ** 2 - T) / q[k]
    v[M - 1] += g[M - 1] * dt4
    for k in range(M - 2, -1, -1):
        e = np.exp(-v[k + 1] * dt8)
        v[k] = (v[k] * e + g[k] * dt4) * e
    scale = np.exp(-v[0] * dt2)
    ke2 *= scale * scale
    xi += v * dt2
    g[0] = (ke2 - thermo.n_dof * T) / q[0]
    for k in range(M - 1):
        e = np.exp(-v[k + 1] * dt8)
        v[k] = (v[k] * e + g[k] * dt4) * e
        g[k + 1] = (q[k] * v[k] ** 2 - T) / q[k + 1]
    v[M - 1] += g[M - 1] * dt4

    new_momenta = state.momenta.copy()
    new_momenta[mask] = p * scale
    new_state = SystemState(positions=state.positions, momenta=new_momenta,
                            species=state.species, anchors=state.anchors,
                            box=state.box, time=state.time,
                            force_cache=state.force_cache)
    new_thermo = ThermostatState(T, q, xi, v * q, thermo.coupling, thermo.n_dof)
    return new_state, new_thermo


def apply_wall_drive(state, v_wall, dt):
    """Advance the wall anchors: top wall +x, bottom wall -x."""
    if v_wall == 0.0:
        return state
    anchors = state.anchors.copy()
    anchors[state.species == WALL_TOP, 0] += v_wall * dt
    anchors[state.species == WALL_BOTTOM, 0] -= v_wall * dt
    for ax in range(3):
        if state.box.periodic[ax]:
            anchors[state.wall_mask, ax] %= state.box.lengths[ax]
    return SystemState(positions=state.positions, momenta=state.momenta,
                       species=state.species, anchors=anchors,
                       box=state.box, time=state.time,
                       force_cache=state.force_cache)


def zero_com_velocity(state, ff):
    """Remove the fluid center-of-mass momentum exactly."""
    mask = state.fluid_mask
    if not mask.any():
        warnings.warn("no fluid particles; center-of-mass removal skipped",
                      RuntimeWarning)
        return state
    m = ff.mass_of(state.species[mask])
    v_com = state.momenta[mask].sum(axis=0) / m.sum()
    momenta = state.momenta.copy()
    momenta[mask] -= m[:, None] * v_com
    return SystemState(positions=state.positions, momenta=momenta,
                       species=state.species, anchors=state.anchors,
                       box=state.box, time=state.time,
                       force_cache=state.force_cache)


def velocity_verlet_step(state, ff, dt, nlist=None):
    """One symplectic step; time-reversible by momentum negation."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if nlist is None:
        nlist = NeighborList(ff)
    res0 = compute_forces(state, ff, nlist)
    m = ff.mass_of(state.species)[:, None]
    p_half = state.momenta + 0.5 * dt * res0.forces
    new_pos = state.box.wrap(state.positions + dt * p_half / m)
    trial = SystemState(positions=new_pos, momenta=p_half, species=state.species,
                        anchors=state.anchors, box=state.box, time=state.time + dt)
    res1 = compute_forces(trial, ff, nlist)
    trial.momenta = p_half + 0.5 * dt * res1.forces
    if not np.all(np.isfinite(trial.momenta)):
        raise PropagationError("non-finite momenta after step")
    return trial


def md_step(state, ff, dt, thermo=None, v_wall=0.0, nlist=None):
    """Drive anchors, thermostat half-step, Verlet step, thermostat half-step."""
    state = apply_wall_drive(state, v_wall, dt)
    if thermo is not None:
        state, thermo = nhc_step(state, thermo, 0.5 * dt, ff)
    state = velocity_verlet_step(state, ff, dt, nlist)
    if thermo is not None:
        state, thermo = nhc_step(state, thermo, 0.5 * dt, ff)
    return state, thermo


def total_hamiltonian(state, ff, nlist=None):
    """Physical Hamiltonian: kinetic + LJ + tether energy.

    The thermostat's extended-system energy is deliberately not included;
    see :func:`chain_energy` for it.
    """
    m = ff.mass_of(state.species)
    kin = 0.5 * float((state.momenta ** 2 / m[:, None]).sum())
    _, lj_pot, _, _ = lj_terms(state, ff, nlist)
    _, teth_pot = tether_terms(state, ff)
    return kin + lj_pot + teth_pot


def rescale_to_temperature(state, ff, temperature, species=FLUID):
    """Uniformly rescale the momenta of one species to a kinetic temperature."""
    mask = np.isin(state.species, np.atleast_1d(species))
    m = ff.mass_of(state.species[mask])
    ke2 = float((state.momenta[mask] ** 2 / m[:, None]).sum())
    if ke2 == 0.0:
        return state
    target = 3.0 * int(mask.sum()) * temperature
    momenta = state.momenta.copy()
    momenta[mask] *= np.sqrt(target / ke2)
    return SystemState(positions=state.positions, momenta=momenta,
                       species=state.species, anchors=state.anchors,
                       box=state.box, time=state.time,
                       force_cache=state.force_cache)


def equilibrate(state, ff, thermo, steps, dt=0.005, v_wall=0.0, nlist=None,
                rescale_species=FLUID, rescale_every=0, rescale_t=None):
    """Propagate `steps` composite steps, optionally with velocity rescales.

    Periodic rescaling of a species subset shortens the settling of the
    fluid temperature when only the walls carry a thermostat; production
    runs should never enable it.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if nlist is None:
        nlist = NeighborList(ff)
    for i in range(steps):
        state, thermo = md_step(state, ff, dt, thermo, v_wall, nlist)
        if rescale_every and (i + 1) % rescale_every == 0:
            t_set = rescale_t if rescale_t is not None else (
                thermo.temperature if thermo is not None else None)
            if t_set is None:
                raise ValueError("rescale target temperature unset")
            state = rescale_to_temperature(state, ff, t_set, rescale_species)
    return state, thermo
