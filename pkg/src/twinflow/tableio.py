"""Headered tab-separated tables for every on-disk dataset.

Columns are written in a fixed order with shortest round-trip float
representations, so re-reading reproduces the values exactly.  Absent
entries (for example unoccupied profile bins) are the literal token NA.
"""

import json
import math
import os

import numpy as np

from .estimators import EstimateReport, ObservableSeries

NA = "NA"


def _fmt(val):
    if val is None:
        return NA
    if isinstance(val, (float, np.floating)):
        if math.isnan(val):
            return NA
        return repr(float(val))
    if isinstance(val, (int, np.integer)):
        return str(int(val))
    return str(val)


def write_table(path, header, rows):
    """Write a delimited table; IO errors carry the target path."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\t".join(header) + "\n")
            for row in rows:
                fh.write("\t".join(_fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write table {path}: {exc}") from exc


def read_table(path):
    """Read a table back as (header, dict of float columns; NA -> NaN)."""
    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").split("\t")
            cols = [[] for _ in header]
            for line in fh:
                parts = line.rstrip("\n").split("\t")
                if len(parts) != len(header):
                    raise ValueError(f"ragged row in {path}")
                for c, val in zip(cols, parts):
                    c.append(math.nan if val == NA else float(val))
    except OSError as exc:
        raise OSError(f"cannot read table {path}: {exc}") from exc
    return header, {h: np.array(c) for h, c in zip(header, cols)}


def write_series(path, series):
    aux = series.a_aux
    rows = zip(series.steps, series.times, series.a,
               aux if aux is not None else [None] * len(series.steps))
    write_table(path, ["step", "time", "a", "a_aux"], rows)


def read_series(path, replica_id=0, name="observable", sample_interval=1):
    _, cols = read_table(path)
    aux = cols["a_aux"]
    if np.all(np.isnan(aux)):
        aux = None
    return ObservableSeries(replica_id=replica_id, name=name,
                            steps=cols["step"].astype(np.int64),
                            times=cols["time"], a=cols["a"], a_aux=aux,
                            sample_interval=sample_interval)


def write_dh(path, dh_values, dt):
    steps = np.arange(1, len(dh_values) + 1)
    rows = zip(steps, steps * dt, dh_values)
    write_table(path, ["step", "time", "dh"], rows)


def read_dh(path):
    _, cols = read_table(path)
    return cols["dh"]


def write_profile(path, profile):
    rows = []
    for i in range(len(profile.centers)):
        if profile.occupied[i]:
            rows.append((profile.centers[i], profile.mean[i], profile.se[i],
                         int(profile.count[i])))
        else:
            rows.append((profile.centers[i], None, None, 0))
    write_table(path, ["z", "mean", "se", "count"], rows)


def write_viscosity_profile(path, vp):
    rows = []
    for i in range(len(vp.centers)):
        eta = vp.eta[i] if vp.included[i] else None
        rows.append((vp.centers[i], eta, int(vp.included[i])))
    write_table(path, ["z", "eta", "included"], rows)


def write_field(path, field):
    xs, zs = field.centers()
    rows = []
    for i, xc in enumerate(xs):
        for k, zc in enumerate(zs):
            n = int(field.count[i, k])
            if n > 0:
                rows.append((i, k, xc, zc, field.vel[i, k, 0],
                             field.vel[i, k, 1], n))
            else:
                rows.append((i, k, xc, zc, None, None, 0))
    write_table(path, ["ix", "iz", "x", "z", "vx", "vz", "count"], rows)


_REPORT_COLUMNS = ["method", "observable", "mean", "se", "se_stat", "se_bias",
                   "m", "c_s", "sigma_a", "sigma_b", "gamma",
                   "gamma_empirical", "bias_bound", "bias_cap", "alpha",
                   "tau_a"]


def write_report(path, reports):
    rows = [tuple(getattr(r, c) for c in _REPORT_COLUMNS) for r in reports]
    write_table(path, _REPORT_COLUMNS, rows)


def write_manifest(path, manifest):
    """Atomic JSON write: temp file in place, then rename."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def read_manifest(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
