"""Shifted-force LJ pair interactions, harmonic tethers, and neighbor lists.

The pair potential is truncated at r_cut with the force shifted to zero
there and the energy adjusted consistently, so both the force and the
total Hamiltonian are continuous at the cutoff:

    f_sf(r) = f(r) - f(r_cut)
    u_sf(r) = u(r) - u(r_cut) + (r - r_cut) * f(r_cut)

Pair enumeration uses a Verlet list rebuilt from an O(N^2) sweep; wall-wall
pairs are skipped when the force field excludes them.  All kernels are
single-threaded and accumulate in a fixed order, so identical inputs give
bit-identical outputs.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .state import FLUID

OVERLAP_WARN_FACTOR = 0.5


class PropagationError(RuntimeError):
    """Raised when forces or the integrator produce non-finite values."""


@njit(cache=True)
def _count_pairs(pos, box, periodic, cut2, species, skip_wall_wall):
    n = pos.shape[0]
    count = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            if skip_wall_wall and species[i] != FLUID and species[j] != FLUID:
                continue
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            if periodic[0]:
                dx -= box[0] * np.rint(dx / box[0])
            if periodic[1]:
                dy -= box[1] * np.rint(dy / box[1])
            if periodic[2]:
                dz -= box[2] * np.rint(dz / box[2])
            if dx * dx + dy * dy + dz * dz < cut2:
                count += 1
    return count


@njit(cache=True)
def _fill_pairs(pos, box, periodic, cut2, species, skip_wall_wall, pi, pj):
    n = pos.shape[0]
    k = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            if skip_wall_wall and species[i] != FLUID and species[j] != FLUID:
                continue
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            if periodic[0]:
                dx -= box[0] * np.rint(dx / box[0])
            if periodic[1]:
                dy -= box[1] * np.rint(dy / box[1])
            if periodic[2]:
                dz -= box[2] * np.rint(dz / box[2])
            if dx * dx + dy * dy + dz * dz < cut2:
                pi[k] = i
                pj[k] = j
                k += 1
    return k


@njit(cache=True)
def _pair_forces(pos, pi, pj, box, periodic, species, eps, sig, rcut,
                 forces):
    """Accumulate shifted-force LJ on `forces`.

    Returns (potential, fluid-fluid xy virial, minimum pair distance).
    """
    sig2 = sig * sig
    rcut2 = rcut * rcut
    # Plain LJ force magnitude / r and energy at the cutoff.
    sr2c = sig2 / rcut2
    sr6c = sr2c * sr2c * sr2c
    fc_over_r = 24.0 * eps * (2.0 * sr6c * sr6c - sr6c) / rcut2
    fc = fc_over_r * rcut
    uc = 4.0 * eps * (sr6c * sr6c - sr6c)

    pot = 0.0
    vir_xy = 0.0
    dmin2 = 1e300
    for k in range(pi.shape[0]):
        i = pi[k]
        j = pj[k]
        dx = pos[i, 0] - pos[j, 0]
        dy = pos[i, 1] - pos[j, 1]
        dz = pos[i, 2] - pos[j, 2]
        if periodic[0]:
            dx -= box[0] * np.rint(dx / box[0])
        if periodic[1]:
            dy -= box[1] * np.rint(dy / box[1])
        if periodic[2]:
            dz -= box[2] * np.rint(dz / box[2])
        r2 = dx * dx + dy * dy + dz * dz
        if r2 >= rcut2:
            continue
        if r2 < dmin2:
            dmin2 = r2
        r = np.sqrt(r2)
        sr2 = sig2 / r2
        sr6 = sr2 * sr2 * sr2
        f_over_r = 24.0 * eps * (2.0 * sr6 * sr6 - sr6) / r2 - fc_over_r * rcut / r
        fx = f_over_r * dx
        fy = f_over_r * dy
        fz = f_over_r * dz
        forces[i, 0] += fx
        forces[i, 1] += fy
        forces[i, 2] += fz
        forces[j, 0] -= fx
        forces[j, 1] -= fy
        forces[j, 2] -= fz
        pot += 4.0 * eps * (sr6 * sr6 - sr6) - uc + (r - rcut) * fc
        if species[i] == FLUID and species[j] == FLUID:
            vir_xy += dx * fy
    return pot, vir_xy, np.sqrt(dmin2)


def lj_pair_force(r, ff):
    """Scalar shifted-force pair force at separation r (0 beyond cutoff)."""
    if r >= ff.r_cut:
        return 0.0
    def plain(x):
        sr6 = (ff.sigma / x) ** 6
        return 24.0 * ff.epsilon * (2.0 * sr6 * sr6 - sr6) / x
    return plain(r) - plain(ff.r_cut)


def lj_pair_potential(r, ff):
    """Scalar shifted-force pair energy at separation r (0 beyond cutoff)."""
    if r >= ff.r_cut:
        return 0.0
    def plain_u(x):
        sr6 = (ff.sigma / x) ** 6
        return 4.0 * ff.epsilon * (sr6 * sr6 - sr6)
    def plain_f(x):
        sr6 = (ff.sigma / x) ** 6
        return 24.0 * ff.epsilon * (2.0 * sr6 * sr6 - sr6) / x
    return plain_u(r) - plain_u(ff.r_cut) + (r - ff.r_cut) * plain_f(ff.r_cut)


class NeighborList:
    """Verlet list shared by all force evaluations of one trajectory.

    A rebuild is triggered once any particle has moved more than
    0.4 * skin from its position at build time.  The margin below the
    usual skin/2 leaves room for the twin legs, which evaluate forces at
    configurations up to one step apart while sharing this list.
    """

    def __init__(self, ff, skin=0.5):
        self.ff = ff
        self.skin = skin
        self.list_cut = ff.r_cut + skin
        self.pairs_i = None
        self.pairs_j = None
        self.ref_positions = None
        self.n_builds = 0

    def _needs_rebuild(self, state):
        if self.ref_positions is None:
            return True
        if self.ref_positions.shape != state.positions.shape:
            return True
        dr = state.box.min_image(state.positions - self.ref_positions)
        return float((dr ** 2).sum(axis=1).max()) > (0.4 * self.skin) ** 2

    def ensure(self, state):
        if not self._needs_rebuild(state):
            return
        pos = state.positions
        box = state.box.lengths
        periodic = np.array(state.box.periodic, dtype=np.bool_)
        cut2 = self.list_cut ** 2
        skip_ww = not self.ff.wall_wall_lj
        n = _count_pairs(pos, box, periodic, cut2, state.species, skip_ww)
        pi = np.empty(n, dtype=np.int64)
        pj = np.empty(n, dtype=np.int64)
        _fill_pairs(pos, box, periodic, cut2, state.species, skip_ww, pi, pj)
        self.pairs_i = pi
        self.pairs_j = pj
        self.ref_positions = pos.copy()
        self.n_builds += 1


@dataclass
class ForceResult:
    forces: np.ndarray
    potential: float
    lj_potential: float
    tether_potential: float
    virial_xy: float
    min_pair_distance: float
    # Summed LJ force on the wall particles.  With wall-wall LJ excluded
    # this is exactly the fluid -> wall force.
    wall_force: np.ndarray = None


def tether_terms(state, ff):
    """Harmonic tether forces and energy for the wall particles."""
    forces = np.zeros_like(state.positions)
    wall = state.wall_mask
    if not wall.any() or ff.k_spring == 0.0:
        return forces, 0.0
    disp = state.box.min_image(state.positions[wall] - state.anchors[wall])
    forces[wall] = -ff.k_spring * disp
    energy = 0.5 * ff.k_spring * float((disp ** 2).sum())
    return forces, energy


def lj_terms(state, ff, nlist=None):
    """LJ forces/energy/virial, using the state's cache when present."""
    if state.force_cache is not None:
        return state.force_cache
    if nlist is None:
        nlist = NeighborList(ff)
    nlist.ensure(state)
    forces = np.zeros_like(state.positions)
    pot, vir_xy, dmin = _pair_forces(
        state.positions, nlist.pairs_i, nlist.pairs_j,
        state.box.lengths, np.array(state.box.periodic, dtype=np.bool_),
        state.species, ff.epsilon, ff.sigma, ff.r_cut, forces)
    cache = (forces, pot, vir_xy, dmin)
    state.force_cache = cache
    return cache


def compute_forces(state, ff, nlist=None):
    """Total per-particle forces plus the potential energy breakdown."""
    lj_forces, lj_pot, vir_xy, dmin = lj_terms(state, ff, nlist)
    if dmin < OVERLAP_WARN_FACTOR * ff.sigma:
        warnings.warn(
            f"near-singular pair separation {dmin:.3f} "
            f"(< {OVERLAP_WARN_FACTOR} sigma)", RuntimeWarning)
    t_forces, t_pot = tether_terms(state, ff)
    total = lj_forces + t_forces
    if not np.all(np.isfinite(total)):
        raise PropagationError("non-finite force")
    return ForceResult(forces=total, potential=lj_pot + t_pot,
                       lj_potential=lj_pot, tether_potential=t_pot,
                       virial_xy=vir_xy, min_pair_distance=dmin,
                       wall_force=lj_forces[state.wall_mask].sum(axis=0))


def pressure_xy(state, ff, nlist=None):
    """Fluid xy pressure-tensor component times the fluid volume.

    Kinetic part plus the fluid-fluid pair virial.  Divide by the fluid
    volume to get the stress itself; the Green-Kubo integrals only ever
    need the product P_xy * V, so the volume is left to the caller.
    """
    _, _, vir_xy, _ = lj_terms(state, ff, nlist)
    mask = state.fluid_mask
    m = ff.mass_of(state.species[mask])
    kin = float((state.momenta[mask, 0] * state.momenta[mask, 1] / m).sum())
    return kin + vir_xy
