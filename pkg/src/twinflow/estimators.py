"""Estimator mathematics for the twin-trajectory method.

Two estimators of a driven observable's steady-state mean are provided:

* conventional: grand mean of A over m replicas and C_s window samples,
  with standard error sigma_A / sqrt(m * C_s);
* twin (control variate): mean of B = A - A' plus the known equilibrium
  mean of A.  Its reported standard error has a statistical part
  sigma_B / sqrt(m * C_s) and a systematic part from the per-step energy
  mismatch of the auxiliary construction,

      se_bias = sigma_A * sum_{j=1}^{C-1} alpha^{C-j} lambda_j / sqrt(C_s),

  with alpha = exp(-dt/tau) and lambda_j = beta * (max_i dH_ij - min_i dH_ij)
  across replicas i.  The systematic part is an upper bound, not a random
  error; the efficiency ratio gamma compares standard errors per
  SE_twin = gamma * SE_con.

All standard deviations use the population (divide-by-n) convention.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .units import KB, MASS_KG

HOURS_PER_YEAR = 8760.0


class TwinIncompleteError(ValueError):
    """An observable series is missing its auxiliary column."""


@dataclass
class ObservableSeries:
    """Per-replica time series of an observable on both legs."""

    replica_id: int
    name: str
    steps: np.ndarray          # integration step index per row
    times: np.ndarray
    a: np.ndarray
    a_aux: np.ndarray
    sample_interval: int = 1   # integration steps between rows

    def __post_init__(self):
        self.steps = np.asarray(self.steps, dtype=np.int64)
        self.times = np.asarray(self.times, dtype=np.float64)
        self.a = np.asarray(self.a, dtype=np.float64)
        self.a_aux = None if self.a_aux is None else np.asarray(self.a_aux, dtype=np.float64)
        n = len(self.steps)
        if len(self.a) != n or (self.a_aux is not None and len(self.a_aux) != n):
            raise ValueError("column lengths differ")
        if n > 1 and not np.all(np.diff(self.steps) > 0):
            raise ValueError("step indices must be strictly increasing")

    @property
    def b(self):
        if self.a_aux is None:
            raise TwinIncompleteError(f"series {self.name!r} has no auxiliary column")
        return self.a - self.a_aux


@dataclass
class LambdaSeries:
    """Ensemble energy-mismatch spread, one value per integration step."""

    steps: np.ndarray
    values: np.ndarray
    beta: float
    n_replicas: int

    def __post_init__(self):
        self.steps = np.asarray(self.steps, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if np.any(self.values < 0):
            raise ValueError("lambda values must be nonnegative")


@dataclass
class EstimateReport:
    method: str                # "conventional" | "apm"
    observable: str
    mean: float
    se: float
    m: int
    c_s: int
    sigma_a: float
    sigma_b: float = None
    se_stat: float = None      # sampling part of se
    se_bias: float = None      # systematic part of se (twin only)
    gamma: float = None        # formula-based, twin only
    gamma_empirical: float = None
    bias_bound: float = None
    bias_cap: float = None
    alpha: float = None
    tau_a: float = None


def _pop_std(x):
    x = np.asarray(x, dtype=np.float64)
    return float(np.sqrt(np.mean((x - x.mean()) ** 2)))


def lambda_ensemble(dh_values, beta):
    """Dimensionless spread beta * (max - min) of dH across replicas."""
    dh = np.asarray(dh_values, dtype=np.float64)
    if dh.size == 0:
        raise ValueError("empty dH ensemble")
    if dh.size == 1:
        warnings.warn("single-replica ensemble: lambda is trivially 0",
                      RuntimeWarning)
        return 0.0
    return float(beta * (dh.max() - dh.min()))


def build_lambda_series(dh_logs, beta):
    """Per-step lambda from the replicas' dH logs (step j = row j-1)."""
    arr = np.asarray(dh_logs, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected one dH log per replica, equal lengths")
    if arr.shape[0] == 1:
        warnings.warn("single-replica ensemble: lambda is trivially 0",
                      RuntimeWarning)
        values = np.zeros(arr.shape[1])
    else:
        values = beta * (arr.max(axis=0) - arr.min(axis=0))
    steps = np.arange(1, arr.shape[1] + 1)
    return LambdaSeries(steps=steps, values=values, beta=beta,
                        n_replicas=arr.shape[0])


def _check_window(series_list, window):
    if not series_list:
        raise ValueError("no series given")
    lo, hi = window
    ref = None
    for s in series_list:
        sel = (s.steps >= lo) & (s.steps < hi)
        steps = s.steps[sel]
        if ref is None:
            ref = steps
        elif not np.array_equal(ref, steps):
            raise ValueError("replicas disagree on the steady-state window")
    if ref is None or len(ref) == 0:
        raise ValueError("empty steady-state window")
    return [( (s.steps >= lo) & (s.steps < hi) ) for s in series_list], len(ref)


def conventional_estimate(series_list, window):
    """Grand mean of A with SE = sigma_A / sqrt(m * C_s)."""
    sels, c_s = _check_window(series_list, window)
    pooled = np.concatenate([s.a[sel] for s, sel in zip(series_list, sels)])
    m = len(series_list)
    sigma_a = _pop_std(pooled)
    return EstimateReport(method="conventional", observable=series_list[0].name,
                          mean=float(pooled.mean()),
                          se=sigma_a / math.sqrt(m * c_s),
                          m=m, c_s=c_s, sigma_a=sigma_a)


def bias_sum(lambda_series, alpha, c_steps):
    """sum_{j=1}^{C-1} alpha^{C-j} lambda(j dt), using recorded lambdas."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if c_steps < 2 or lambda_series is None:
        return 0.0
    j = np.arange(1, c_steps)
    lam = np.zeros(c_steps - 1)
    have = lambda_series.steps <= c_steps - 1
    lam_steps = lambda_series.steps[have]
    lam[lam_steps - 1] = lambda_series.values[have]
    # alpha^(C-j) underflows harmlessly for old steps.
    with np.errstate(under="ignore"):
        weights = np.exp((j - c_steps) * (-math.log(alpha)))
    return float((weights * lam).sum())


def bias_bound(lambda_series, alpha, sigma_a, c_steps):
    """Running bias bound and its closed-form geometric cap.

    running = sigma_A * sum alpha^{C-j} lambda_j
    cap     = sigma_A * lambda_max * alpha (1 - alpha^{C-1}) / (1 - alpha)
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    running = sigma_a * bias_sum(lambda_series, alpha, c_steps)
    if lambda_series is None or lambda_series.values.size == 0 or c_steps < 2:
        lam_max = 0.0
    else:
        have = lambda_series.steps <= c_steps - 1
        lam_max = float(lambda_series.values[have].max()) if have.any() else 0.0
    cap = sigma_a * lam_max * alpha * (1.0 - alpha ** (c_steps - 1)) / (1.0 - alpha)
    if running > cap * (1.0 + 1e-12) + 1e-300:
        raise AssertionError("running bias bound exceeds its closed-form cap")
    return running, cap


def apm_estimate(series_list, window, a_ec=0.0, tau_a=1.0, dt=0.005,
                 lambda_series=None):
    """Twin estimate: mean(B) + <A>_EC with the two-part standard error."""
    sels, c_s = _check_window(series_list, window)
    b_pooled = np.concatenate([s.b[sel] for s, sel in zip(series_list, sels)])
    a_pooled = np.concatenate([s.a[sel] for s, sel in zip(series_list, sels)])
    m = len(series_list)
    sigma_b = _pop_std(b_pooled)
    sigma_a = _pop_std(a_pooled)
    alpha = math.exp(-dt / tau_a)
    c_steps = int(max(s.steps[sel].max() for s, sel in zip(series_list, sels)))
    running, cap = bias_bound(lambda_series, alpha, sigma_a, c_steps)
    se_stat = sigma_b / math.sqrt(m) / math.sqrt(c_s)
    se_bias = running / math.sqrt(c_s)
    se_con = sigma_a / math.sqrt(m * c_s)
    report = EstimateReport(method="apm", observable=series_list[0].name,
                            mean=float(b_pooled.mean()) + a_ec,
                            se=se_stat + se_bias,
                            m=m, c_s=c_s, sigma_a=sigma_a, sigma_b=sigma_b,
                            se_stat=se_stat, se_bias=se_bias,
                            bias_bound=running, bias_cap=cap,
                            alpha=alpha, tau_a=tau_a)
    if sigma_a > 0:
        report.gamma = sigma_b / sigma_a + math.sqrt(m) * bias_sum(
            lambda_series, alpha, c_steps)
        report.gamma_empirical = se_stat / se_con if se_con > 0 else None
    return report


@dataclass
class GammaReport:
    gamma: float
    efficiency_gain: float
    sample_reduction: float
    gamma_empirical: float = None


def gamma_ratio(sigma_b, sigma_a, m=1, lambda_series=None, alpha=None,
                c_steps=None, se_apm=None, se_con=None):
    """Efficiency ratio gamma and the derived gains.

    gamma = sigma_B/sigma_A + sqrt(m) * sum alpha^{C-j} lambda_j.  When
    both standard errors are supplied the measured ratio SE_apm/SE_con is
    reported as well.  The statistical efficiency gain is 1/gamma^2 - 1
    and 1/gamma^2 is the sample-count reduction factor.
    """
    if sigma_a <= 0:
        raise ZeroDivisionError("sigma_A must be positive")
    gamma = sigma_b / sigma_a
    if lambda_series is not None and lambda_series.values.any():
        if alpha is None or c_steps is None:
            raise ValueError("alpha and c_steps required with a lambda series")
        gamma += math.sqrt(m) * bias_sum(lambda_series, alpha, c_steps)
    reduction = math.inf if gamma == 0 else 1.0 / gamma ** 2
    empirical = None
    if se_apm is not None and se_con is not None and se_con > 0:
        empirical = se_apm / se_con
    return GammaReport(gamma=gamma,
                       efficiency_gain=reduction - 1.0,
                       sample_reduction=reduction,
                       gamma_empirical=empirical)


def com_velocity_sigma(n_particles, temperature_k, particle_mass_kg):
    """Canonical std of the center-of-mass velocity, sqrt(kB T / (N m)), m/s."""
    if n_particles < 1:
        raise ValueError("need at least one particle")
    if temperature_k <= 0:
        raise ValueError("temperature must be positive")
    return math.sqrt(KB * temperature_k / (n_particles * particle_mass_kg))


def relative_fluctuation(v_com, n_particles, temperature_k, particle_mass_kg):
    """sigma_vcom / |v_com| for a steady flow at v_com."""
    if v_com == 0:
        raise ZeroDivisionError("relative fluctuation undefined at zero mean")
    return com_velocity_sigma(n_particles, temperature_k, particle_mass_kg) / abs(v_com)


def required_samples(v_com, rse_target, n_particles, temperature_k,
                     particle_mass_kg):
    """Independent samples needed for a target relative standard error."""
    if rse_target <= 0:
        raise ValueError("target RSE must be positive")
    rf = relative_fluctuation(v_com, n_particles, temperature_k, particle_mass_kg)
    return int(math.ceil((rf / rse_target) ** 2))


def cpu_time_estimate(gamma, sim_ns_for_apm, wall_hours_per_ns, cores):
    """CPU-years for the conventional method to match the twin-run accuracy."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return (1.0 / gamma ** 2) * sim_ns_for_apm * wall_hours_per_ns * cores \
        / HOURS_PER_YEAR


def relaxation_time_1e(times, acf):
    """First 1/e crossing of a normalized autocorrelation, interpolated."""
    acf = np.asarray(acf, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    c = acf / acf[0]
    target = math.exp(-1.0)
    below = np.nonzero(c < target)[0]
    if below.size == 0:
        raise ValueError("autocorrelation never crosses 1/e")
    i = below[0]
    if i == 0:
        return float(times[0])
    t0, t1 = times[i - 1], times[i]
    c0, c1 = c[i - 1], c[i]
    return float(t0 + (c0 - target) / (c0 - c1) * (t1 - t0))


def water_mass_kg():
    return MASS_KG["water"]
