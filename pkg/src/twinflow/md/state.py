"""System state, force-field parameters, and initial-configuration builders.

All quantities are in reduced LJ units (epsilon = sigma = m = k_B = 1
unless overridden in :class:`ForceField`).  The standard geometry is a
slab of fluid confined in z between two tethered particle walls, periodic
in x and y.  A fully periodic wall-free box is supported for bulk
reference runs.
"""

from dataclasses import dataclass, field, replace

import numpy as np

# Species codes.
FLUID = 0
WALL_BOTTOM = 1
WALL_TOP = 2

SPECIES_NAMES = {FLUID: "fluid", WALL_BOTTOM: "wall_bottom", WALL_TOP: "wall_top"}


class ConfigurationError(ValueError):
    """Raised when a requested initial configuration is unbuildable."""


@dataclass
class Box:
    lengths: np.ndarray          # (3,)
    periodic: tuple = (True, True, False)

    def __post_init__(self):
        self.lengths = np.asarray(self.lengths, dtype=np.float64)
        self.periodic = tuple(bool(p) for p in self.periodic)

    def wrap(self, positions):
        """Wrap coordinates into [0, L) along periodic axes."""
        out = positions.copy()
        for ax in range(3):
            if self.periodic[ax]:
                out[:, ax] %= self.lengths[ax]
        return out

    def min_image(self, dr):
        """Minimum-image displacement(s) for periodic axes."""
        out = np.asarray(dr, dtype=np.float64).copy()
        vecs = out.reshape(-1, 3)
        for ax in range(3):
            if self.periodic[ax]:
                L = self.lengths[ax]
                vecs[:, ax] -= L * np.round(vecs[:, ax] / L)
        return out


@dataclass
class ForceField:
    epsilon: float = 1.0
    sigma: float = 1.0
    r_cut: float = 2.5
    k_spring: float = 100.0
    masses: np.ndarray = None    # per species code, shape (3,)
    # Tethered lattice walls are held together by their springs, so the
    # wall-wall LJ interaction is excluded by default.
    wall_wall_lj: bool = False

    def __post_init__(self):
        if self.masses is None:
            self.masses = np.ones(3)
        self.masses = np.asarray(self.masses, dtype=np.float64)
        if self.epsilon <= 0 or self.sigma <= 0:
            raise ValueError("epsilon and sigma must be positive")
        if self.r_cut <= self.sigma:
            raise ValueError("r_cut must exceed sigma")
        if self.k_spring < 0:
            raise ValueError("k_spring must be nonnegative")

    def mass_of(self, species):
        return self.masses[np.asarray(species)]


@dataclass
class SystemState:
    positions: np.ndarray        # (N, 3)
    momenta: np.ndarray          # (N, 3)
    species: np.ndarray          # (N,) int8
    anchors: np.ndarray          # (N, 3); rows for fluid particles are unused
    box: Box
    time: float = 0.0
    # Cache of the last LJ force evaluation for this exact configuration:
    # (forces, lj_potential, virial_xy).  Never part of state identity.
    force_cache: tuple = field(default=None, repr=False, compare=False)

    @property
    def n_particles(self):
        return self.positions.shape[0]

    @property
    def fluid_mask(self):
        return self.species == FLUID

    @property
    def wall_mask(self):
        return self.species != FLUID

    def copy(self):
        return SystemState(
            positions=self.positions.copy(),
            momenta=self.momenta.copy(),
            species=self.species,
            anchors=self.anchors.copy(),
            box=self.box,
            time=self.time,
        )

    def validate(self):
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("non-finite positions")
        if not np.all(np.isfinite(self.momenta)):
            raise ValueError("non-finite momenta")
        wall = self.wall_mask
        if wall.any() and not np.all(np.isfinite(self.anchors[wall])):
            raise ValueError("non-finite wall anchors")
        return self


def fluid_com_velocity(state, ff):
    """Center-of-mass velocity (3-vector) of the fluid particles."""
    mask = state.fluid_mask
    if not mask.any():
        raise ValueError("no fluid particles")
    m = ff.mass_of(state.species[mask])
    return state.momenta[mask].sum(axis=0) / m.sum()


def kinetic_temperature(state, ff, species=None):
    """Instantaneous kinetic temperature of a species subset (all if None)."""
    if species is None:
        mask = np.ones(state.n_particles, dtype=bool)
    else:
        mask = np.isin(state.species, np.atleast_1d(species))
    n = int(mask.sum())
    if n == 0:
        raise ValueError("empty species selection")
    m = ff.mass_of(state.species[mask])
    ke2 = (state.momenta[mask] ** 2 / m[:, None]).sum()
    return ke2 / (3.0 * n)


def _square_lattice_layer(nx, ny, spacing, z):
    xs, ys = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    sites = np.empty((nx * ny, 3))
    sites[:, 0] = (xs.ravel() + 0.5) * spacing
    sites[:, 1] = (ys.ravel() + 0.5) * spacing
    sites[:, 2] = z
    return sites


def _fluid_lattice(n_fluid, lx, ly, z_lo, height, rng, jitter=0.04):
    density = n_fluid / (lx * ly * height)
    a = density ** (-1.0 / 3.0)
    # Pick the grid shape that keeps the tightest axis as loose as possible.
    best = None
    for nx in {max(1, int(np.floor(lx / a))), max(1, int(np.ceil(lx / a)))}:
        for ny in {max(1, int(np.floor(ly / a))), max(1, int(np.ceil(ly / a)))}:
            nz = max(1, int(np.ceil(n_fluid / (nx * ny))))
            gap = min(lx / nx, ly / ny, height / nz)
            if best is None or gap > best[0]:
                best = (gap, nx, ny, nz)
    _, nx, ny, nz = best
    xs = (np.arange(nx) + 0.5) * (lx / nx)
    ys = (np.arange(ny) + 0.5) * (ly / ny)
    zs = z_lo + (np.arange(nz) + 0.5) * (height / nz)
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    sites = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    # Fill z-plane by z-plane so a partial last plane stays contiguous.
    order = np.lexsort((sites[:, 1], sites[:, 0], sites[:, 2]))
    sites = sites[order][:n_fluid]
    sites += rng.uniform(-jitter * a, jitter * a, size=sites.shape)
    return sites


def _check_min_separation(positions, box, threshold):
    n = positions.shape[0]
    if n < 2:
        return
    # Desk-scale systems: the O(N^2) check is fine.
    dr = positions[None, :, :] - positions[:, None, :]
    dr = box.min_image(dr.reshape(-1, 3)).reshape(n, n, 3)
    d2 = (dr ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    dmin = float(np.sqrt(d2.min()))
    if dmin < threshold:
        raise ConfigurationError(
            f"overfull box: minimum fluid separation {dmin:.3f} < {threshold:.3f}"
        )


def maxwell_boltzmann_momenta(n, masses, temperature, rng):
    """Draw momenta from the canonical momentum distribution at T."""
    sigma = np.sqrt(np.asarray(masses, dtype=np.float64) * temperature)
    return rng.normal(size=(n, 3)) * sigma[:, None]


def build_system(n_fluid, density, ff, temperature, seed,
                 wall_nx=8, wall_ny=8, wall_layers=2, wall_spacing=1.0,
                 fluid_wall_gap=1.0):
    """Construct a confined Couette configuration.

    Fluid particles sit on a jittered lattice between two walls of
    ``wall_layers`` square-lattice layers each; every wall particle is
    anchored at its lattice site.  Momenta are Maxwell-Boltzmann at
    ``temperature`` and the fluid center-of-mass momentum is removed.
    The same (arguments, seed) always yields the identical state.
    """
    if n_fluid < 0:
        raise ValueError("n_fluid must be nonnegative")
    if n_fluid > 0 and density <= 0:
        raise ValueError("density must be positive")
    rng = np.random.default_rng(seed)
    lx = wall_nx * wall_spacing
    ly = wall_ny * wall_spacing

    height = n_fluid / (density * lx * ly) if n_fluid else 0.0
    z_fluid_lo = fluid_wall_gap
    z_fluid_hi = z_fluid_lo + height
    z_top_inner = z_fluid_hi + fluid_wall_gap

    layers = []
    species = []
    for k in range(wall_layers):
        layers.append(_square_lattice_layer(wall_nx, wall_ny, wall_spacing,
                                            -k * wall_spacing))
        species.append(np.full(wall_nx * wall_ny, WALL_BOTTOM, dtype=np.int8))
    for k in range(wall_layers):
        layers.append(_square_lattice_layer(wall_nx, wall_ny, wall_spacing,
                                            z_top_inner + k * wall_spacing))
        species.append(np.full(wall_nx * wall_ny, WALL_TOP, dtype=np.int8))
    wall_pos = np.concatenate(layers, axis=0)
    wall_species = np.concatenate(species)

    lz = z_top_inner + wall_layers * wall_spacing + 1.0
    box = Box(np.array([lx, ly, lz]), periodic=(True, True, False))

    if n_fluid:
        fluid_pos = _fluid_lattice(n_fluid, lx, ly, z_fluid_lo, height, rng)
        fluid_pos[:, :2] %= [lx, ly]
        _check_min_separation(fluid_pos, box, 0.8 * ff.sigma)
        positions = np.concatenate([fluid_pos, wall_pos], axis=0)
        spc = np.concatenate([np.full(n_fluid, FLUID, dtype=np.int8), wall_species])
    else:
        positions = wall_pos
        spc = wall_species

    anchors = np.zeros_like(positions)
    anchors[spc != FLUID] = positions[spc != FLUID]

    momenta = maxwell_boltzmann_momenta(len(spc), ff.mass_of(spc), temperature, rng)
    state = SystemState(positions=positions, momenta=momenta, species=spc,
                        anchors=anchors, box=box)
    if n_fluid:
        from .integrate import zero_com_velocity
        state = zero_com_velocity(state, ff)
    return state.validate()


def build_bulk_system(n_fluid, density, ff, temperature, seed, jitter=0.05):
    """Fully periodic wall-free fluid box for bulk reference runs."""
    if n_fluid < 1:
        raise ValueError("bulk system needs at least one particle")
    rng = np.random.default_rng(seed)
    side = (n_fluid / density) ** (1.0 / 3.0)
    box = Box(np.array([side, side, side]), periodic=(True, True, True))
    pos = _fluid_lattice(n_fluid, side, side, 0.0, side, rng, jitter=jitter)
    pos %= side
    _check_min_separation(pos, box, 0.8 * ff.sigma)
    spc = np.full(n_fluid, FLUID, dtype=np.int8)
    momenta = maxwell_boltzmann_momenta(n_fluid, ff.mass_of(spc), temperature, rng)
    state = SystemState(positions=pos, momenta=momenta, species=spc,
                        anchors=np.zeros_like(pos), box=box)
    from .integrate import zero_com_velocity
    return zero_com_velocity(state, ff).validate()
