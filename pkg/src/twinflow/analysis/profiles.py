"""Spatial binning of per-particle samples into profiles and flow fields."""

from dataclasses import dataclass

import numpy as np


@dataclass
class VelocityProfile:
    """z-binned mean velocity with per-bin occupancy.

    Empty bins stay flagged as unoccupied; their mean/se are NaN and must
    never be read as zeros.
    """

    bin_width: float
    centers: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    count: np.ndarray
    occupied: np.ndarray
    method: str = "apm"


@dataclass
class FlowField:
    """Cell-averaged 2-vector field on an x-z grid."""

    origin: np.ndarray           # (2,) lower corner
    cell: float
    vel: np.ndarray              # (nx, nz, 2) means; NaN where unoccupied
    count: np.ndarray            # (nx, nz)
    window: tuple = None
    method: str = "apm"

    @property
    def shape(self):
        return self.count.shape

    @property
    def occupied(self):
        return self.count > 0

    def centers(self):
        nx, nz = self.shape
        xs = self.origin[0] + (np.arange(nx) + 0.5) * self.cell
        zs = self.origin[1] + (np.arange(nz) + 0.5) * self.cell
        return xs, zs


def bin_velocity_profile(z, values, replica, bin_width, z_range=None,
                         a_ec=0.0, method="apm"):
    """Bin per-particle samples along z.

    The per-bin mean pools every sample and adds ``a_ec``; the per-bin
    standard error comes from the spread of the replica-level means, the
    same replica-resolution recipe the scalar estimators use.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    z = np.asarray(z, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    replica = np.asarray(replica)
    if z_range is None:
        z_range = (z.min(), z.max() + 1e-12)
    lo, hi = z_range
    n_bins = max(1, int(np.ceil((hi - lo) / bin_width)))
    idx = np.floor((z - lo) / bin_width).astype(np.int64)
    keep = (idx >= 0) & (idx < n_bins)
    idx, vals, rep = idx[keep], values[keep], replica[keep]

    count = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=vals, minlength=n_bins)
    occupied = count > 0
    mean = np.full(n_bins, np.nan)
    mean[occupied] = sums[occupied] / count[occupied] + a_ec

    # Replica-level spread.
    rep_ids = np.unique(rep)
    rep_means = np.full((len(rep_ids), n_bins), np.nan)
    for k, r in enumerate(rep_ids):
        sel = rep == r
        c = np.bincount(idx[sel], minlength=n_bins)
        s = np.bincount(idx[sel], weights=vals[sel], minlength=n_bins)
        got = c > 0
        rep_means[k, got] = s[got] / c[got]
    se = np.full(n_bins, np.nan)
    n_rep = np.sum(~np.isnan(rep_means), axis=0)
    with np.errstate(invalid="ignore"):
        spread = np.nanstd(rep_means, axis=0)
    good = occupied & (n_rep > 0)
    se[good] = spread[good] / np.sqrt(n_rep[good])

    centers = lo + (np.arange(n_bins) + 0.5) * bin_width
    return VelocityProfile(bin_width=bin_width, centers=centers, mean=mean,
                           se=se, count=count, occupied=occupied, method=method)


def grid_flow_field(x, z, vx, vz, cell, extent=None, times=None, window=None,
                    method="apm"):
    """Cell means of an (vx, vz) sample cloud on a square x-z grid.

    ``window=(t0, t1)`` restricts to samples with t0 <= t < t1 when sample
    times are given.
    """
    if cell <= 0:
        raise ValueError("cell size must be positive")
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    vx = np.asarray(vx, dtype=np.float64)
    vz = np.asarray(vz, dtype=np.float64)
    if window is not None:
        if times is None:
            raise ValueError("a time window needs sample times")
        t = np.asarray(times, dtype=np.float64)
        keep = (t >= window[0]) & (t < window[1])
        x, z, vx, vz = x[keep], z[keep], vx[keep], vz[keep]
    if extent is None:
        if x.size == 0:
            origin = np.zeros(2)
            nx = nz = 1
        else:
            origin = np.array([x.min(), z.min()])
            nx = max(1, int(np.ceil((x.max() - origin[0]) / cell + 1e-12)))
            nz = max(1, int(np.ceil((z.max() - origin[1]) / cell + 1e-12)))
    else:
        (x0, x1), (z0, z1) = extent
        origin = np.array([x0, z0])
        nx = max(1, int(np.ceil((x1 - x0) / cell - 1e-12)))
        nz = max(1, int(np.ceil((z1 - z0) / cell - 1e-12)))

    ix = np.floor((x - origin[0]) / cell).astype(np.int64)
    iz = np.floor((z - origin[1]) / cell).astype(np.int64)
    keep = (ix >= 0) & (ix < nx) & (iz >= 0) & (iz < nz)
    ix, iz = ix[keep], iz[keep]
    flat = ix * nz + iz
    count = np.bincount(flat, minlength=nx * nz).reshape(nx, nz)
    vel = np.full((nx, nz, 2), np.nan)
    for comp, v in enumerate((vx[keep], vz[keep])):
        s = np.bincount(flat, weights=v, minlength=nx * nz).reshape(nx, nz)
        with np.errstate(invalid="ignore"):
            vel[:, :, comp] = np.where(count > 0, s / np.maximum(count, 1), np.nan)
    return FlowField(origin=origin, cell=cell, vel=vel, count=count,
                     window=window, method=method)
