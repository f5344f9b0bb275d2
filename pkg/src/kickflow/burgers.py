"""Backward evolution of potentials and velocities under kick forcing.

Two operators act on a potential profile U given at time n and return the
profile at an earlier time m:

* inviscid_step: min-plus variational evolution, min over grid paths of
  U(gamma_n) + action(gamma).  This reuses the zero-temperature DP with
  terminal data; there is no separate code path.
* viscous_step: exponential-transform evolution -kappa ln T exp(-U/kappa),
  computed wholly in the log domain (U/kappa is never exponentiated in linear
  scale).

Velocities are read off by finite differences and live in the cadlag-monotone
class: x - u(x) nondecreasing.  The convergence metric g_metric is a
weighted-L1 distance that skips jump nodes, a computable proxy for pointwise
convergence at continuity points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import gibbs, zerotemp
from .numerics import Grid, GridFn, gauss_log_kernel, log_matvec, log_kernel_matrix
from .potential import PotentialField

MONOTONE_TOL = 1e-9


@dataclass(eq=False)
class PotentialProfile:
    """A potential slice, optionally with declared asymptotic slopes."""

    values: GridFn
    v_minus: Optional[float] = None
    v_plus: Optional[float] = None

    def __post_init__(self):
        if not np.isfinite(self.values.values).all():
            raise ValueError("potential profile must be finite")

    def secant_slopes(self, edge_fraction: float = 0.1):
        """Boundary secant slopes over the outer edge_fraction of the window."""
        x = self.values.nodes()
        u = self.values.values
        span = max(2, int(edge_fraction * x.size))
        lo = (u[span] - u[0]) / (x[span] - x[0])
        hi = (u[-1] - u[-1 - span]) / (x[-1] - x[-1 - span])
        return float(lo), float(hi)

    def check_slopes(self, tol: float) -> bool:
        if self.v_minus is None and self.v_plus is None:
            return True
        lo, hi = self.secant_slopes()
        ok = True
        if self.v_minus is not None:
            ok = ok and abs(lo - self.v_minus) <= tol
        if self.v_plus is not None:
            ok = ok and abs(hi - self.v_plus) <= tol
        return ok


@dataclass(eq=False)
class VelocityProfile:
    """A velocity slice; x - u(x) should be nondecreasing up to MONOTONE_TOL."""

    values: GridFn

    def monotone_violation(self) -> float:
        return check_monotone(self)


def inviscid_step(field: PotentialField, profile: PotentialProfile, m: int) -> PotentialProfile:
    """Min-plus evolution of a potential profile from its time down to time m."""
    n = profile.values.k
    if n <= m:
        raise ValueError(f"profile at time {n} cannot evolve to m={m}")
    grid = profile.values.grid
    solve = zerotemp.terminal_backward(field, m, n, profile.values.values, grid)
    return PotentialProfile(values=GridFn(grid, m, solve.slices[0], "linear"),
                            v_minus=profile.v_minus, v_plus=profile.v_plus)


def viscous_step(field: PotentialField, profile: PotentialProfile, m: int,
                 kappa: float) -> PotentialProfile:
    """Log-domain evolution of a potential profile from its time down to time m."""
    if not (kappa > 0):
        raise ValueError(f"kappa must be positive, got {kappa}")
    n = profile.values.k
    if n <= m:
        raise ValueError(f"profile at time {n} cannot evolve to m={m}")
    grid = profile.values.grid
    lnk_t = np.ascontiguousarray(log_kernel_matrix(grid, kappa).T)
    logh = math.log(grid.h)
    phi = -profile.values.values / kappa
    for k in range(n - 1, m - 1, -1):
        f_next = field.eval(k + 1, grid.nodes(k + 1)) / kappa
        phi = log_matvec(lnk_t, phi - f_next) + logh
        if np.all(np.isneginf(phi)):
            raise ValueError(
                "viscous step produced a numerically empty slice; the window "
                "leaks all mass (widen the grid or increase kappa)")
    return PotentialProfile(values=GridFn(grid, m, -kappa * phi, "linear"),
                            v_minus=profile.v_minus, v_plus=profile.v_plus)


def velocity_of(profile: PotentialProfile) -> VelocityProfile:
    """Spatial derivative: centered differences interior, one-sided at the edges."""
    u = profile.values.values
    h = profile.values.grid.h
    du = np.empty_like(u)
    du[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
    du[0] = (u[1] - u[0]) / h
    du[-1] = (u[-1] - u[-2]) / h
    return VelocityProfile(values=GridFn(profile.values.grid, profile.values.k, du, "linear"))


def check_monotone(u: VelocityProfile) -> float:
    """Max violation of x - u(x) monotonicity across nodes (0 when monotone)."""
    x = u.values.nodes()
    g = x - u.values.values
    dec = g[:-1] - g[1:]
    return float(max(0.0, dec.max()))


def _jump_mask(u: VelocityProfile, jump_factor: float) -> np.ndarray:
    """Nodes adjacent to an increment of x - u(x) far above the median increment."""
    x = u.values.nodes()
    g = x - u.values.values
    inc = np.abs(np.diff(g))
    med = float(np.median(inc))
    theta = jump_factor * max(med, 1e-300)
    mask = np.zeros(x.size, dtype=bool)
    jumps = inc > theta
    mask[:-1] |= jumps
    mask[1:] |= jumps
    return mask


def g_metric(u1: VelocityProfile, u2: VelocityProfile, weight_halfwidth: float,
             jump_factor: float = 10.0) -> float:
    """Triangular-weighted L1 distance between velocity profiles, skipping jump nodes.

    The weight is centered on the frame position at the slice time, so moving
    frames measure distance around the ray they track.
    """
    if u1.values.grid != u2.values.grid or u1.values.k != u2.values.k:
        raise ValueError("velocity profiles must share a grid and time")
    grid = u1.values.grid
    x = u1.values.nodes() - grid.frame_velocity * u1.values.k
    w = np.maximum(0.0, 1.0 - np.abs(x) / weight_halfwidth)
    keep = ~(_jump_mask(u1, jump_factor) | _jump_mask(u2, jump_factor))
    diff = np.abs(u1.values.values - u2.values.values)
    return float(grid.h * (w[keep] * diff[keep]).sum())


def velocity_profile(field: PotentialField, n: int, v: float, kappa: float, N: int,
                     grid: Grid) -> VelocityProfile:
    """Velocity u(n, x) at every node of slice n, from paths toward (N, vN).

    kappa = 0 takes the minimizer first step (leftmost argmin); kappa > 0 takes
    the polymer mean first step.  One backward solve serves the whole slice.
    """
    if N <= n + 1:
        raise ValueError(f"need N > n + 1, got n={n}, N={N}")
    xs = grid.nodes(n)
    nodes1 = grid.nodes(n + 1)
    if kappa == 0.0:
        solve = zerotemp.terminal_backward(
            field, n + 1, N, zerotemp.point_terminal(grid, N, v * N), grid)
        f1 = field.eval(n + 1, nodes1)
        cost = 0.5 * (nodes1[None, :] - xs[:, None]) ** 2 + (f1 + solve.slices[0])[None, :]
        first = nodes1[cost.argmin(axis=1)]
    else:
        rv, _ = gibbs._backward_log(field, n + 1, N, v * N, kappa, grid)
        f1 = field.eval(n + 1, nodes1) / kappa
        logits = gauss_log_kernel(nodes1[None, :] - xs[:, None], kappa) + (rv - f1)[None, :]
        mx = logits.max(axis=1)
        if not np.isfinite(mx).all():
            raise ValueError("velocity profile hit a numerically empty slice; widen the window")
        p = np.exp(logits - mx[:, None])
        p /= p.sum(axis=1, keepdims=True)
        first = p @ nodes1
    return VelocityProfile(values=GridFn(grid, n, xs - first, "linear"))


def evolve_orbit(field: PotentialField, profile: PotentialProfile, m: int,
                 kappa: float) -> list:
    """One-kick-at-a-time backward orbit from the profile's time down to m.

    Returns the list of profiles at times n, n-1, ..., m (kappa = 0 uses the
    min-plus step).
    """
    out = [profile]
    for k in range(profile.values.k - 1, m - 1, -1):
        if kappa == 0.0:
            out.append(inviscid_step(field, out[-1], k))
        else:
            out.append(viscous_step(field, out[-1], k, kappa))
    return out


def orbit_jsonl(profiles) -> str:
    """JSON-lines log of an orbit: per slice time, range and monotonicity of u."""
    import json
    lines = []
    for prof in profiles:
        u = velocity_of(prof)
        lines.append(json.dumps({
            "k": prof.values.k,
            "u_min": float(u.values.values.min()),
            "u_max": float(u.values.values.max()),
            "monotone_violation": check_monotone(u),
        }))
    return "\n".join(lines) + "\n"


def viscous_inviscid_gap(field: PotentialField, profile: PotentialProfile, m: int,
                         kappa: float) -> np.ndarray:
    """Entropy gap between the operators after stripping kernel and quadrature factors.

    Returns inviscid_step minus the stripped viscous_step, nodewise.  Over the
    G^(n-m) grid paths the log-sum-exp sandwich bounds every entry in
    [0, kappa * (n - m) * ln G], and the gap vanishes as kappa drops.
    """
    n = profile.values.k
    grid = profile.values.grid
    steps = n - m
    offset = kappa * steps * (math.log(grid.h) - 0.5 * math.log(2.0 * math.pi * kappa))
    vis_stripped = viscous_step(field, profile, m, kappa).values.values + offset
    inv = inviscid_step(field, profile, m).values.values
    return inv - vis_stripped
