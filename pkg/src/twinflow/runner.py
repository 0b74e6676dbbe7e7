"""Replica orchestration: deterministic seeding, the staged run protocol,
per-replica data files, and the run manifest.

Every replica is a pure function of (config, replica index): seeds are
derived with a splittable scheme, so adding replicas never changes the
existing ones, and serial and parallel execution write byte-identical
files.  The manifest is written last through a temp-file rename and is the
only shared artifact.
"""

import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .config import config_hash, dump_config
from .estimators import ObservableSeries
from .md import (
    FLUID,
    WALL_BOTTOM,
    WALL_TOP,
    ForceField,
    NeighborList,
    build_bulk_system,
    build_system,
    equilibrate,
    make_thermostat,
    md_step,
    zero_com_velocity,
)
from .md.forces import lj_terms, pressure_xy
from .md.state import fluid_com_velocity
from .tableio import write_dh, write_manifest, write_series, write_table
from .twin import ObservableSpec, advance_twin, init_twin, sample_observables


def replica_seed(base_seed, index):
    """Splittable per-replica seed; a pure function of (base, index)."""
    return np.random.SeedSequence(base_seed, spawn_key=(index,))


def force_field_from(config):
    return ForceField(epsilon=config.epsilon, sigma=config.sigma,
                      r_cut=config.r_cut, k_spring=config.k_spring,
                      masses=np.array([config.mass_fluid, config.mass_wall,
                                       config.mass_wall]))


def prepare_initial_state(config, index):
    """Build, equilibrate, and zero the flow for one replica."""
    ff = force_field_from(config)
    seed = replica_seed(config.seed, index)
    if config.bulk:
        state = build_bulk_system(config.n_fluid, config.density, ff,
                                  config.temperature, seed)
        coupling = (FLUID,)
    else:
        state = build_system(config.n_fluid, config.density, ff,
                             config.temperature, seed,
                             wall_nx=config.wall_nx, wall_ny=config.wall_ny,
                             wall_layers=config.wall_layers,
                             wall_spacing=config.wall_spacing,
                             fluid_wall_gap=config.fluid_wall_gap)
        coupling = (WALL_BOTTOM, WALL_TOP)
    thermo = make_thermostat(state, config.temperature, coupling=coupling,
                             omega=config.omega,
                             chain_length=config.chain_length)
    nlist = NeighborList(ff)
    rescale = min(config.rescale_steps, config.equilibration_steps)
    if config.n_fluid and rescale:
        state, thermo = equilibrate(state, ff, thermo, rescale, dt=config.dt,
                                    nlist=nlist,
                                    rescale_every=config.rescale_every,
                                    rescale_t=config.temperature)
    state, thermo = equilibrate(state, ff, thermo,
                                config.equilibration_steps - rescale,
                                dt=config.dt, nlist=nlist)
    if config.n_fluid:
        state = zero_com_velocity(state, ff)
    return state, thermo, ff, nlist


@dataclass
class ReplicaData:
    index: int
    series: ObservableSeries
    dh: np.ndarray = None
    particles: dict = None
    momenta: dict = None
    pxy: dict = None
    wall_force: dict = None


def simulate_replica(config, index):
    """Run one replica and return its in-memory records."""
    state, thermo, ff, nlist = prepare_initial_state(config, index)
    spec = ObservableSpec("com_velocity_x", kind="velocity_x", a_ec=0.0)
    prod_thermo = thermo if config.production_thermostat else None

    steps_rec, times_rec, a_rec, aux_rec = [], [], [], []
    particles = {k: [] for k in ("step", "x", "z", "vx", "vx_aux", "vz", "vz_aux")} \
        if config.record_particles else None
    momenta = {k: [] for k in ("step", "px", "py", "pz")} \
        if config.record_momenta else None
    pxy = {"step": [], "time": [], "sxy": []} if config.record_pressure else None
    wall_force = {"step": [], "time": [], "fx_bottom": [], "fx_top": []} \
        if config.record_wall_force else None

    tp = init_twin(state, prod_thermo, index, ff) if config.twin else None
    if tp is not None:
        tp.nlist = nlist

    def record_dense(st, step):
        if pxy is not None and step % config.record_interval == 0:
            pxy["step"].append(step)
            pxy["time"].append(step * config.dt)
            pxy["sxy"].append(pressure_xy(st, ff, nlist))
        if wall_force is not None and step % config.record_interval == 0:
            f_lj = lj_terms(st, ff, nlist)[0]
            wall_force["step"].append(step)
            wall_force["time"].append(step * config.dt)
            wall_force["fx_bottom"].append(
                float(f_lj[st.species == WALL_BOTTOM, 0].sum()))
            wall_force["fx_top"].append(
                float(f_lj[st.species == WALL_TOP, 0].sum()))

    def record_sample(step):
        if config.twin:
            smp = sample_observables(tp, spec, ff)
            a_val, aux_val = smp.a_agg, smp.a_aux_agg
            leg = tp.aux
        else:
            a_val, aux_val = float(fluid_com_velocity(state, ff)[0]), None
            leg = state
        steps_rec.append(step)
        times_rec.append(step * config.dt)
        a_rec.append(a_val)
        aux_rec.append(aux_val)
        if particles is not None:
            src = tp.real if config.twin else state
            fm = src.fluid_mask
            mass = ff.mass_of(src.species[fm])
            particles["step"].append(np.full(fm.sum(), step))
            particles["x"].append(src.positions[fm, 0].copy())
            particles["z"].append(src.positions[fm, 2].copy())
            particles["vx"].append(src.momenta[fm, 0] / mass)
            particles["vz"].append(src.momenta[fm, 2] / mass)
            if config.twin:
                aux_m = tp.aux.momenta[fm]
                particles["vx_aux"].append(aux_m[:, 0] / mass)
                particles["vz_aux"].append(aux_m[:, 2] / mass)
            else:
                nanrow = np.full(int(fm.sum()), np.nan)
                particles["vx_aux"].append(nanrow)
                particles["vz_aux"].append(nanrow.copy())
        if momenta is not None:
            fm = leg.fluid_mask
            momenta["step"].append(np.full(int(fm.sum()), step))
            momenta["px"].append(leg.momenta[fm, 0].copy())
            momenta["py"].append(leg.momenta[fm, 1].copy())
            momenta["pz"].append(leg.momenta[fm, 2].copy())

    for step in range(1, config.production_steps + 1):
        if config.twin:
            advance_twin(tp, ff, config.v_wall, config.dt)
            current = tp.real
        else:
            state, prod_thermo = md_step(state, ff, config.dt, prod_thermo,
                                         config.v_wall, nlist)
            current = state
        record_dense(current, step)
        if step % config.sample_interval == 0:
            record_sample(step)

    aux_arr = None if not config.twin else np.array(aux_rec, dtype=np.float64)
    series = ObservableSeries(replica_id=index, name=spec.name,
                              steps=np.array(steps_rec, dtype=np.int64),
                              times=np.array(times_rec), a=np.array(a_rec),
                              a_aux=aux_arr,
                              sample_interval=config.sample_interval)
    data = ReplicaData(index=index, series=series)
    if config.twin:
        data.dh = np.array(tp.dh_log)
    if particles is not None:
        data.particles = {k: np.concatenate(v) if v else np.empty(0)
                          for k, v in particles.items()}
    if momenta is not None:
        data.momenta = {k: np.concatenate(v) if v else np.empty(0)
                        for k, v in momenta.items()}
    if pxy is not None:
        data.pxy = {k: np.array(v) for k, v in pxy.items()}
    if wall_force is not None:
        data.wall_force = {k: np.array(v) for k, v in wall_force.items()}
    return data


def replica_paths(out_dir, index):
    base = os.path.join(out_dir, f"replica_{index:03d}")
    return {
        "series": f"{base}_series.tsv",
        "dh": f"{base}_dh.tsv",
        "particles": f"{base}_particles.tsv",
        "momenta": f"{base}_momenta.tsv",
        "pxy": f"{base}_pxy.tsv",
        "wall_force": f"{base}_wallforce.tsv",
    }


def write_replica(data, config, out_dir):
    paths = replica_paths(out_dir, data.index)
    written = {}
    write_series(paths["series"], data.series)
    written["series"] = os.path.basename(paths["series"])
    if data.dh is not None:
        write_dh(paths["dh"], data.dh, config.dt)
        written["dh"] = os.path.basename(paths["dh"])

    def dump(kind, cols):
        tab = getattr(data, kind)
        if tab is None:
            return
        write_table(paths[kind], cols, zip(*(tab[c] for c in cols)))
        written[kind] = os.path.basename(paths[kind])

    dump("particles", ["step", "x", "z", "vx", "vx_aux", "vz", "vz_aux"])
    dump("momenta", ["step", "px", "py", "pz"])
    dump("pxy", ["step", "time", "sxy"])
    dump("wall_force", ["step", "time", "fx_bottom", "fx_top"])
    return written


def _run_one(config, index, out_dir):
    try:
        data = simulate_replica(config, index)
        files = write_replica(data, config, out_dir)
        return {"index": index, "status": "ok", "files": files,
                "seed_spawn_key": [index], "error": None}
    except Exception as exc:  # recorded in the manifest, run continues
        return {"index": index, "status": "failed", "files": {},
                "seed_spawn_key": [index],
                "error": f"{type(exc).__name__}: {exc}",
                "traceback": traceback.format_exc()}


def load_run(out_dir):
    """Read a finished run directory back: config, manifest, ok replicas."""
    from .config import load_config
    from .tableio import read_dh, read_manifest, read_series, read_table

    manifest = read_manifest(os.path.join(out_dir, "manifest.json"))
    config = load_config(os.path.join(out_dir, manifest["config_file"]))
    replicas = []
    for entry in manifest["replicas"]:
        if entry["status"] != "ok":
            continue
        files = entry["files"]
        rep = ReplicaData(
            index=entry["index"],
            series=read_series(os.path.join(out_dir, files["series"]),
                               replica_id=entry["index"],
                               name="com_velocity_x",
                               sample_interval=config.sample_interval))
        if "dh" in files:
            rep.dh = read_dh(os.path.join(out_dir, files["dh"]))
        for kind in ("particles", "momenta", "pxy", "wall_force"):
            if kind in files:
                _, cols = read_table(os.path.join(out_dir, files[kind]))
                setattr(rep, kind, cols)
        replicas.append(rep)
    if not replicas:
        raise RuntimeError(f"run {out_dir} has no successful replicas")
    return config, manifest, replicas


def run_replicas(config, out_dir=None, workers=1):
    """Execute every replica and write the manifest last.

    Returns the manifest dict.  Failed replicas are recorded, not raised;
    their partial files (if any) stay on disk.
    """
    out_dir = out_dir if out_dir is not None else config.directory
    os.makedirs(out_dir, exist_ok=True)
    cfg_path = os.path.join(out_dir, "config.cfg")
    with open(cfg_path, "w", encoding="utf-8") as fh:
        fh.write(dump_config(config))

    indices = list(range(config.replicas))
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_run_one, [config] * len(indices), indices,
                                    [out_dir] * len(indices)))
    else:
        entries = [_run_one(config, i, out_dir) for i in indices]
    entries.sort(key=lambda e: e["index"])

    manifest = {
        "config_hash": config_hash(config),
        "code_version": __version__,
        "base_seed": config.seed,
        "config_file": os.path.basename(cfg_path),
        "replicas": entries,
    }
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest
