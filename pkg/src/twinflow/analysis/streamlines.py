"""Streamline tracing on cell-averaged flow fields.

Curves are advanced along the unit tangent of the bilinearly interpolated
field with a trapezoidal predictor-corrector.  The step shrinks by halves
whenever the direction turns more than ``max_turn_deg`` across one step,
and relaxes back toward the base step in calm regions, so every emitted
segment stays within half the turn limit of the local field direction.
"""

from dataclasses import dataclass

import numpy as np

TERMINATED = ("exit", "unoccupied", "stagnation", "max_steps", "seed_unoccupied")


@dataclass
class Streamline:
    points: np.ndarray          # (n, 2)
    reason: str


def _sample(field, p):
    """Bilinear velocity at p, or None outside/over unoccupied cells."""
    x = (p[0] - field.origin[0]) / field.cell - 0.5
    z = (p[1] - field.origin[1]) / field.cell - 0.5
    nx, nz = field.shape
    cx = int(np.floor(x + 0.5))
    cz = int(np.floor(z + 0.5))
    if cx < 0 or cx >= nx or cz < 0 or cz >= nz:
        return None
    if not field.occupied[cx, cz]:
        return None
    i0 = int(np.floor(x))
    k0 = int(np.floor(z))
    i0 = min(max(i0, 0), nx - 2) if nx > 1 else 0
    k0 = min(max(k0, 0), nz - 2) if nz > 1 else 0
    i1 = min(i0 + 1, nx - 1)
    k1 = min(k0 + 1, nz - 1)
    corners = ((i0, k0), (i1, k0), (i0, k1), (i1, k1))
    if all(field.occupied[i, k] for i, k in corners):
        fx = np.clip(x - i0, 0.0, 1.0)
        fz = np.clip(z - k0, 0.0, 1.0)
        v = (field.vel[i0, k0] * (1 - fx) * (1 - fz)
             + field.vel[i1, k0] * fx * (1 - fz)
             + field.vel[i0, k1] * (1 - fx) * fz
             + field.vel[i1, k1] * fx * fz)
        return v
    return field.vel[cx, cz].copy()


def trace_streamline(field, seed, step_frac=0.5, max_steps=4000,
                     eps_stag=1e-12, max_turn_deg=10.0, min_step_frac=1 / 64):
    p = np.asarray(seed, dtype=np.float64)
    v = _sample(field, p)
    if v is None:
        return Streamline(points=p.reshape(1, 2), reason="seed_unoccupied")
    pts = [p.copy()]
    h0 = step_frac * field.cell
    h_min = min_step_frac * field.cell
    h = h0
    cos_limit = np.cos(np.radians(max_turn_deg))
    reason = "max_steps"
    for _ in range(max_steps):
        speed = np.hypot(v[0], v[1])
        if speed < eps_stag:
            reason = "stagnation"
            break
        d0 = v / speed
        while True:
            p_pred = p + h * d0
            v1 = _sample(field, p_pred)
            if v1 is None:
                d1 = None
                break
            s1 = np.hypot(v1[0], v1[1])
            if s1 < eps_stag:
                d1 = None
                break
            d1 = v1 / s1
            if float(d0 @ d1) >= cos_limit or h <= h_min:
                break
            h *= 0.5
        if d1 is None:
            # Probe failed: commit the predictor point if it stays valid,
            # otherwise stop at the boundary.
            v_end = _sample(field, p_pred)
            if v_end is None:
                reason = "exit" if _outside(field, p_pred) else "unoccupied"
                break
            p = p_pred
        else:
            p = p + h * 0.5 * (d0 + d1)
        pts.append(p.copy())
        v = _sample(field, p)
        if v is None:
            reason = "exit" if _outside(field, p) else "unoccupied"
            break
        if h < h0:
            h = min(h * 1.5, h0)
    return Streamline(points=np.array(pts), reason=reason)


def _outside(field, p):
    nx, nz = field.shape
    x0, z0 = field.origin
    return not (x0 <= p[0] < x0 + nx * field.cell
                and z0 <= p[1] < z0 + nz * field.cell)


def trace_streamlines(field, seeds, **kwargs):
    """Trace one polyline per seed; see :func:`trace_streamline`."""
    return [trace_streamline(field, s, **kwargs) for s in np.atleast_2d(seeds)]
