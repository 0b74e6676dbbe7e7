"""Transport coefficients and slip: Green-Kubo integrals, the local
viscosity profile, slip lengths from profiles and from equilibrium
friction, and the sphere-plane drainage relations."""

import math
from dataclasses import dataclass

import numpy as np

from ..units import KB


class NonConvergenceError(RuntimeError):
    """Running friction integral never plateaus; carries the curve."""

    def __init__(self, message, times=None, curve=None):
        super().__init__(message)
        self.times = times
        self.curve = curve


class UnreliableSlipError(RuntimeError):
    """Bulk shear rate indistinguishable from zero at 2 standard errors."""


@dataclass
class ViscosityProfile:
    centers: np.ndarray
    eta: np.ndarray              # NaN on excluded bins
    included: np.ndarray         # bool per bin
    eta_m: float
    eta_eff: float
    z_m: float


@dataclass
class SlipResult:
    slip_length: float
    se: float
    shear_rate: float
    shear_rate_se: float
    v_hwp: float
    v_slip: float
    channel_height: float


def autocorrelation(x, max_lag):
    """Stationary autocorrelation <x(0) x(k dt)> by direct summation."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if max_lag >= n:
        raise ValueError("max_lag must be below the series length")
    acf = np.empty(max_lag + 1)
    for k in range(max_lag + 1):
        acf[k] = np.dot(x[: n - k], x[k:]) / (n - k)
    return acf


def viscosity_from_acf(times, acf, volume, temperature, t_max=None):
    """eta = V/(kB T) * integral of the stress autocorrelation (kB = 1)."""
    times = np.asarray(times, dtype=np.float64)
    acf = np.asarray(acf, dtype=np.float64)
    if t_max is not None:
        if t_max > times[-1] + 1e-12:
            raise ValueError("t_max exceeds the correlation record")
        keep = times <= t_max
        times, acf = times[keep], acf[keep]
    return volume / temperature * float(np.trapezoid(acf, times))


def green_kubo_viscosity(times, pxy, volume, temperature, t_max):
    """Shear viscosity from a stress time series.

    ``pxy`` is the xy pressure-tensor component of the fluid; the
    autocorrelation is integrated with the trapezoid rule up to t_max.
    """
    times = np.asarray(times, dtype=np.float64)
    pxy = np.asarray(pxy, dtype=np.float64)
    dt = times[1] - times[0]
    span = times[-1] - times[0]
    if t_max > span + 1e-12:
        raise ValueError("t_max exceeds the series length")
    max_lag = int(round(t_max / dt))
    acf = autocorrelation(pxy, max_lag)
    lag_t = np.arange(max_lag + 1) * dt
    return viscosity_from_acf(lag_t, acf, volume, temperature)


def _gradient(centers, values):
    """Centered differences over neighbors; one-sided at the ends."""
    n = len(centers)
    grad = np.full(n, np.nan)
    for i in range(n):
        lo = i - 1 if i > 0 else i
        hi = i + 1 if i < n - 1 else i
        if hi == lo:
            continue
        grad[i] = (values[hi] - values[lo]) / (centers[hi] - centers[lo])
    return grad


def relative_viscosity(profile, z_m, eps_grad_frac=0.05):
    """Per-bin ratio eta(z)/eta_m = v'(z_m) / v'(z) from a velocity profile.

    Bins whose gradient magnitude falls below ``eps_grad_frac`` times the
    reference gradient are excluded (ratio NaN, flag False) instead of
    blowing up.
    """
    occ = profile.occupied
    centers = profile.centers[occ]
    values = profile.mean[occ]
    if len(centers) < 3:
        raise ValueError("profile too sparse for gradients")
    grad = _gradient(centers, values)
    i_ref = int(np.argmin(np.abs(centers - z_m)))
    g_ref = grad[i_ref]
    if not np.isfinite(g_ref) or g_ref == 0.0:
        raise ZeroDivisionError("zero velocity gradient at the reference height")
    eps = abs(g_ref) * eps_grad_frac
    included = np.abs(grad) >= eps
    ratio = np.full(len(centers), np.nan)
    ratio[included] = g_ref / grad[included]
    return centers, ratio, included, centers[i_ref]


def normalize_viscosity(centers, ratio, included, eta_eff, z_m):
    """Anchor the relative profile so the bin mean equals eta_eff.

    eta_m = eta_eff * N_b / sum(ratio); eta(z) = ratio(z) * eta_m.  The
    construction forces mean(eta) == eta_eff over the included bins.
    """
    included = np.asarray(included, dtype=bool)
    if not included.any():
        raise ValueError("no usable bins in the relative profile")
    n_b = int(included.sum())
    denom = float(np.asarray(ratio)[included].sum())
    if denom == 0.0:
        raise ZeroDivisionError("relative-viscosity terms sum to zero")
    eta_m = eta_eff * n_b / denom
    eta = np.where(included, np.asarray(ratio) * eta_m, np.nan)
    return ViscosityProfile(centers=np.asarray(centers), eta=eta,
                            included=included, eta_m=eta_m, eta_eff=eta_eff,
                            z_m=z_m)


def slip_length_profile(profile, v_wall, n_fluid, n_bulk, area,
                        bulk_fraction=0.5):
    """Slip length from the bulk shear rate of a velocity profile.

    gamma = least-squares slope over the central ``bulk_fraction`` of the
    occupied channel; v_slip = V_wall - gamma*h/2 with h = N/(n_bulk*S);
    l_s = v_slip / gamma.  Raises UnreliableSlipError when the slope is
    not distinguishable from zero at two standard errors.
    """
    occ = profile.occupied
    z = profile.centers[occ]
    v = profile.mean[occ]
    z_mid = 0.5 * (z.min() + z.max())
    half = 0.5 * bulk_fraction * (z.max() - z.min())
    sel = np.abs(z - z_mid) <= half
    if sel.sum() < 3:
        raise ValueError("bulk region has fewer than 3 occupied bins")
    zb, vb = z[sel], v[sel]
    n = len(zb)
    zc = zb - zb.mean()
    szz = float((zc ** 2).sum())
    slope = float((zc * vb).sum()) / szz
    resid = vb - vb.mean() - slope * zc
    slope_se = math.sqrt(float((resid ** 2).sum()) / max(n - 2, 1) / szz)
    if abs(slope) <= 2.0 * slope_se:
        raise UnreliableSlipError(
            f"bulk shear rate {slope:.3e} within 2 SE ({slope_se:.3e}) of zero")
    h = n_fluid / (n_bulk * area)
    v_hwp = slope * h / 2.0
    v_slip = v_wall - v_hwp
    l_s = v_slip / slope
    # l_s = V_wall/gamma - h/2, so d l_s/d gamma = -V_wall/gamma^2.
    l_se = abs(v_wall / slope ** 2) * slope_se
    return SlipResult(slip_length=l_s, se=l_se, shear_rate=slope,
                      shear_rate_se=slope_se, v_hwp=v_hwp, v_slip=v_slip,
                      channel_height=h)


def friction_from_faf(times, faf, area, temperature, plateau_tol=0.05,
                      window_frac=0.25):
    """Friction coefficient from a wall-force autocorrelation.

    Returns (k, running-integral curve); the plateau is the first window
    of ``window_frac`` of the record over which the running integral
    varies by less than ``plateau_tol`` relative.
    """
    times = np.asarray(times, dtype=np.float64)
    faf = np.asarray(faf, dtype=np.float64)
    run = np.concatenate([[0.0], np.cumsum(
        0.5 * (faf[1:] + faf[:-1]) * np.diff(times))])
    run /= area * temperature
    w = max(2, int(len(run) * window_frac))
    for i in range(len(run) - w + 1):
        seg = run[i:i + w]
        center = float(np.mean(seg))
        if center == 0.0:
            if np.all(seg == 0.0):
                return 0.0, run
            continue
        if (seg.max() - seg.min()) / abs(center) < plateau_tol:
            return center, run
    raise NonConvergenceError("running friction integral has no plateau",
                              times=times, curve=run)


def friction_coefficient_gk(times, wall_force, area, temperature, t_max=None,
                            plateau_tol=0.05, window_frac=0.25):
    """Friction coefficient from an equilibrium wall-force series.

    The summed tangential fluid-wall force is autocorrelated and its
    running Green-Kubo integral k(t) = 1/(S kB T) int <F(0)F(tau)> dtau is
    scanned for a plateau.
    """
    times = np.asarray(times, dtype=np.float64)
    force = np.asarray(wall_force, dtype=np.float64)
    dt = times[1] - times[0]
    span = times[-1] - times[0]
    if t_max is None:
        t_max = span / 2.0
    if t_max > span + 1e-12:
        raise ValueError("t_max exceeds the series length")
    max_lag = int(round(t_max / dt))
    faf = autocorrelation(force, max_lag)
    lag_t = np.arange(max_lag + 1) * dt
    return friction_from_faf(lag_t, faf, area, temperature,
                             plateau_tol=plateau_tol, window_frac=window_frac)


def slip_length_emd(eta_bulk, k, eta_se=0.0, k_se=0.0):
    """Equilibrium slip length l_s = eta / k with propagated uncertainty."""
    if k <= 0:
        raise ValueError("friction coefficient must be positive")
    l_s = eta_bulk / k
    rel = math.hypot(eta_se / eta_bulk if eta_bulk else 0.0, k_se / k)
    return l_s, abs(l_s) * rel


def drainage_shear_velocity(v_n, radius, gap, slip_length, r_frac=0.45):
    """Shear velocity at the plane of a sphere-plane squeeze-out flow.

    v_r = 3 V_n r l_s / (2 H (H + l_s)) with H = gap + r^2/(2R) evaluated
    at r = r_frac * R (hydrophilic sphere), then scaled to the plane:
    v_s = (l_s + gap)/l_s * v_r.
    """
    if slip_length <= 0:
        raise ValueError("slip length must be positive")
    if radius <= 0:
        raise ValueError("sphere radius must be positive")
    r = r_frac * radius
    big_h = gap + r ** 2 / (2.0 * radius)
    v_r = 3.0 * v_n * r * slip_length / (2.0 * big_h * (big_h + slip_length))
    return (slip_length + gap) / slip_length * v_r


def drainage_friction_from_intercept(intercept, radius, intercept_se=0.0):
    """Interfacial friction lambda = 1/(6 pi R^2 b) from the V_n/F intercept."""
    if intercept <= 0:
        raise ValueError("intercept must be positive")
    lam = 1.0 / (6.0 * math.pi * radius ** 2 * intercept)
    return lam, lam * (intercept_se / intercept)


def fit_drainage_intercept(separation, vn_over_f):
    """Straight-line fit of V_n/F against D; returns (intercept, se)."""
    d = np.asarray(separation, dtype=np.float64)
    y = np.asarray(vn_over_f, dtype=np.float64)
    n = len(d)
    if n < 3:
        raise ValueError("need at least 3 points")
    dc = d - d.mean()
    sdd = float((dc ** 2).sum())
    slope = float((dc * y).sum()) / sdd
    intercept = float(y.mean() - slope * d.mean())
    resid = y - intercept - slope * d
    s2 = float((resid ** 2).sum()) / (n - 2)
    se = math.sqrt(s2 * (1.0 / n + d.mean() ** 2 / sdd))
    return intercept, se


def friction_si(eta_si, slip_length_si):
    """lambda = eta / l_s in SI units (kg m^-2 s^-1)."""
    if slip_length_si <= 0:
        raise ValueError("slip length must be positive")
    return eta_si / slip_length_si


def green_kubo_prefactor_si(volume_m3, temperature_k):
    """V / (kB T) in SI for dimensioned Green-Kubo integrals."""
    return volume_m3 / (KB * temperature_k)
