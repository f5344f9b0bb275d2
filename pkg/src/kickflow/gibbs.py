"""Positive-temperature engine: partition functions, polymer marginals, sampling.

Everything runs in the log domain.  The forward recursion prices the first
kernel step from the real source point exactly, then alternates rectangle-rule
integration with Gaussian log-kernel convolution and potential weighting:

    L_{m+1}(y) = ln g_kappa(y - x) - F_{m+1}(y)/kappa
    L_k(y)     = ln h + logsumexp_w [ L_{k-1}(w) + ln g_kappa(y - w) ] - F_k(y)/kappa

so L_n is the log of the kernel-normalized partition function between the
source and every node of slice n.  The plain partition function strips the
Gaussian normalizations: ln Z = ln Zhat + (n - m)/2 * ln(2 pi kappa), one
factor of (2 pi kappa)^{1/2} per kernel step.

Marginals and sampled paths are categorical on grid nodes, which buys exact
normalization and exact forward-backward consistency.  Guidance for small
temperatures: keep h at or below sqrt(kappa)/5 and widen the window before
shrinking kappa.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .numerics import (Grid, GridFn, gauss_log_kernel, log_kernel_matrix, log_matvec,
                       logsumexp)
from .potential import PotentialField
from .zerotemp import LadderEstimate, LatticePath, _converged, _ladder, min_action


@dataclass(eq=False)
class LogPartitionSlice:
    """Log kernel-normalized partition values from a point source to one slice."""

    source: tuple
    k: int
    grid: Grid
    kappa: float
    log_values: GridFn

    @property
    def empty(self) -> bool:
        return bool(np.all(np.isneginf(self.log_values.values)))


@dataclass(eq=False)
class SliceDistribution:
    """Probability vector over one time slice of the grid."""

    grid: Grid
    k: int
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if (p < 0).any() or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        p.setflags(write=False)
        self.probs = p

    def nodes(self) -> np.ndarray:
        return self.grid.nodes(self.k)

    def mean(self) -> float:
        return float(self.probs @ self.nodes())

    def variance(self) -> float:
        x = self.nodes()
        mu = float(self.probs @ x)
        return float(self.probs @ (x - mu) ** 2)

    def mass_within(self, center: float, halfwidth: float) -> float:
        x = self.nodes()
        return float(self.probs[np.abs(x - center) <= halfwidth].sum())

    def tv_distance(self, other: "SliceDistribution") -> float:
        return 0.5 * float(np.abs(self.probs - other.probs).sum())


def _check_kappa(kappa: float):
    if not (kappa > 0):
        raise ValueError(f"kappa must be positive, got {kappa}")


def _forward_log(field, m, x, n, kappa, grid, keep_slices=False):
    lnk = log_kernel_matrix(grid, kappa)
    logh = math.log(grid.h)
    nodes = grid.nodes(m + 1)
    lv = gauss_log_kernel(nodes - x, kappa) - field.eval(m + 1, nodes) / kappa
    slices = [lv] if keep_slices else None
    for k in range(m + 2, n + 1):
        lv = log_matvec(lnk, lv) + logh - field.eval(k, grid.nodes(k)) / kappa
        if keep_slices:
            slices.append(lv)
    return lv, slices


def _backward_log(field, m, n, y, kappa, grid, keep_slices=False):
    """R_k(w) = ln Zhat^{k,n}(w -> y) for k = n-1 down to m."""
    lnk_t = np.ascontiguousarray(log_kernel_matrix(grid, kappa).T)
    logh = math.log(grid.h)
    nodes_prev = grid.nodes(n - 1)
    rv = gauss_log_kernel(y - nodes_prev, kappa) - field.eval(n, float(y)) / kappa
    slices = [rv] if keep_slices else None
    for k in range(n - 2, m - 1, -1):
        f_next = field.eval(k + 1, grid.nodes(k + 1)) / kappa
        rv = log_matvec(lnk_t, rv - f_next) + logh
        if keep_slices:
            slices.append(rv)
    if keep_slices:
        slices.reverse()
    return rv, slices


def forward_slice(field: PotentialField, m: int, x: float, n: int, kappa: float,
                  grid: Grid) -> LogPartitionSlice:
    """Kernel-normalized log partition values from (m, x) to every node of slice n."""
    _check_kappa(kappa)
    if n <= m:
        raise ValueError(f"need n > m, got m={m}, n={n}")
    lv, _ = _forward_log(field, m, x, n, kappa, grid)
    return LogPartitionSlice(source=(m, x), k=n, grid=grid, kappa=kappa,
                             log_values=GridFn(grid, n, lv, "log"))


def log_partition(field: PotentialField, m: int, n: int, x: float, y: float,
                  kappa: float, grid: Grid) -> float:
    """ln Z between (m, x) and (n, y); y must be an exact node of slice n."""
    sl = forward_slice(field, m, x, n, kappa, grid)
    val = float(sl.log_values.values[grid.node_index(y, n)])
    return val + 0.5 * (n - m) * math.log(2.0 * math.pi * kappa)


def log_path_sum(field: PotentialField, m: int, n: int, x: float, y: float,
                 kappa: float, grid: Grid) -> float:
    """ln of the bare path sum over grid paths: ln sum_paths exp(-A/kappa).

    Equals ln Z stripped of the interior quadrature weights h^(n-m-1); it obeys
    the exact sandwich 0 <= kappa * log_path_sum + min A <= kappa (n-m-1) ln G.
    """
    return log_partition(field, m, n, x, y, kappa, grid) - (n - m - 1) * math.log(grid.h)


def polymer_marginal(field: PotentialField, m: int, n: int, x: float, y: float,
                     kappa: float, grid: Grid, k: int) -> SliceDistribution:
    """Marginal of the point-to-point polymer measure at interior time k."""
    _check_kappa(kappa)
    if not (m < k < n):
        raise ValueError(f"need m < k < n, got m={m}, k={k}, n={n}")
    grid.node_index(y, n)
    lv, _ = _forward_log(field, m, x, k, kappa, grid)
    rv, _ = _backward_log(field, k, n, y, kappa, grid)
    logw = lv + rv
    norm = logsumexp(logw)
    if norm == -np.inf:
        raise ValueError(
            "polymer marginal is numerically empty; the window leaks all mass "
            "(check boundary_leak and widen the grid)")
    p = np.exp(logw - norm)
    p = p / p.sum()
    return SliceDistribution(grid=grid, k=k, probs=p)


def sample_path(field: PotentialField, m: int, n: int, x: float, y: float,
                kappa: float, grid: Grid, rng: np.random.Generator) -> LatticePath:
    """One exact draw from the point-to-point polymer measure (backward sampling)."""
    paths = sample_paths(field, m, n, x, y, kappa, grid, 1, rng)
    return LatticePath(m, paths[0])


def sample_paths(field: PotentialField, m: int, n: int, x: float, y: float,
                 kappa: float, grid: Grid, size: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized backward sampling; returns an array of shape (size, n - m + 1).

    gamma_n = y; then gamma_k is drawn from the one-step conditional, a
    categorical over grid nodes with logits L_k(w) + ln g_kappa(gamma_{k+1} - w);
    endpoints are exact.
    """
    _check_kappa(kappa)
    if n <= m:
        raise ValueError(f"need n > m, got m={m}, n={n}")
    grid.node_index(y, n)
    out = np.empty((size, n - m + 1))
    out[:, 0] = x
    out[:, -1] = y
    if n - m == 1:
        return out
    _, slices = _forward_log(field, m, x, n - 1, kappa, grid, keep_slices=True)
    current = np.full(size, float(y))
    for k in range(n - 1, m, -1):
        lv = slices[k - (m + 1)]
        nodes = grid.nodes(k)
        logits = lv[None, :] + gauss_log_kernel(current[:, None] - nodes[None, :], kappa)
        mx = logits.max(axis=1)
        dead = ~np.isfinite(mx)
        if dead.any():
            raise ValueError("conditional sampling hit a numerically empty slice; widen the window")
        w = np.exp(logits - mx[:, None])
        cdf = np.cumsum(w, axis=1)
        u = rng.random(size) * cdf[:, -1]
        idx = (cdf >= u[:, None]).argmax(axis=1)
        current = nodes[idx]
        out[:, k - m] = current
    return out


def g_ratio(field: PotentialField, point1, point2, v: float, kappa: float, horizons,
            grid: Grid, tol: float = 1e-6) -> LadderEstimate:
    """ln of the partition-function ratio toward a common distant slope-v target.

    Returns ln Z(point1 -> (N, vN)) - ln Z(point2 -> (N, vN)) with its horizon
    ladder trace.  At fixed N the multiplicative three-point identity and the
    inverse-swap identity hold exactly.
    """
    _check_kappa(kappa)
    n1, x1 = point1
    n2, x2 = point2
    trace = []
    for N in _ladder(horizons):
        if N <= max(n1, n2):
            raise ValueError(f"horizon N={N} must exceed both anchor times")
        z1 = log_partition(field, n1, N, x1, v * N, kappa, grid)
        z2 = log_partition(field, n2, N, x2, v * N, kappa, grid)
        trace.append((N, z1 - z2))
    return LadderEstimate(value=trace[-1][1], trace=trace, converged=_converged(trace, tol))


def viscous_velocity(field: PotentialField, n: int, x: float, v: float, kappa: float,
                     N: int, grid: Grid) -> float:
    """Mean one-step displacement under the polymer toward (N, vN): x - E[gamma_{n+1}]."""
    marg = polymer_marginal(field, n, N, x, v * N, kappa, grid, n + 1)
    return x - marg.mean()


def sigma_stat(path: LatticePath) -> float:
    """Root excess kinetic energy of a path over the straight line between its endpoints."""
    if path.positions.size < 2:
        raise ValueError("sigma_stat needs a path of length >= 2")
    incs = np.diff(path.positions)
    span = float(path.positions[-1] - path.positions[0])
    rad = float((incs * incs).sum()) - span * span / (path.n - path.m)
    return math.sqrt(max(rad, 0.0))


def band_index(path: LatticePath) -> int:
    """Integer fluctuation band: floor(sigma / sqrt(n - m))."""
    return int(math.floor(sigma_stat(path) / math.sqrt(path.n - path.m)))


@dataclass(frozen=True)
class FreeEnergyRecord:
    n: int
    kappa: float
    value: float


def free_energy(field: PotentialField, n: int, kappa: float, grid: Grid) -> FreeEnergyRecord:
    """Finite-volume free energy: kappa ln Z(0,0 -> n,0), or minus the minimal action at kappa = 0."""
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    if kappa == 0.0:
        value = -min_action(field, 0, n, 0.0, 0.0, grid)
    else:
        value = kappa * log_partition(field, 0, n, 0.0, 0.0, kappa, grid)
    return FreeEnergyRecord(n=n, kappa=kappa, value=value)


def free_energy_jsonl(records) -> str:
    """JSON-lines dump of (seed, record) pairs: {seed, n, kappa, p}."""
    lines = []
    for seed, rec in records:
        lines.append(json.dumps({"seed": int(seed), "n": rec.n, "kappa": rec.kappa,
                                 "p": rec.value}))
    return "\n".join(lines) + "\n"
