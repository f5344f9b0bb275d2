"""Spatial grids, grid functions, log-domain quadrature, and the Gaussian step kernel.

Quadrature is the rectangle rule with uniform weight h.  That choice makes the
discrete transfer semigroup compose exactly (matrix-product associativity),
which the cross-check suites rely on; the accuracy loss versus the trapezoid
rule is immaterial at desk scale.

Grids may carry a frame velocity: at time k, node i sits at
``x_lo + i*h + frame_velocity*k``.  Moving frames let slope-v targets land on
grid nodes exactly instead of through interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

LOG_TWO_PI = math.log(2.0 * math.pi)


def gauss_log_kernel(dx, kappa: float):
    """Log of the Gaussian step kernel: -dx^2/(2*kappa) - 0.5*ln(2*pi*kappa).

    ``dx`` may be a scalar or an array.
    """
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    dx = np.asarray(dx, dtype=float)
    out = -(dx * dx) / (2.0 * kappa) - 0.5 * math.log(2.0 * math.pi * kappa)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Grid:
    """Uniform spatial lattice, possibly riding a moving frame."""

    x_lo: float
    x_hi: float
    h: float
    frame_velocity: float = 0.0

    def __post_init__(self):
        if not (self.h > 0):
            raise ConfigError(f"grid.h must be positive, got {self.h}")
        if self.n_nodes < 3:
            raise ConfigError(
                f"grid window [{self.x_lo}, {self.x_hi}] with h={self.h} has fewer than 3 nodes"
            )

    @property
    def n_nodes(self) -> int:
        return int(math.floor((self.x_hi - self.x_lo) / self.h + 1e-9)) + 1

    def nodes(self, k: int = 0) -> np.ndarray:
        base = self.x_lo + self.h * np.arange(self.n_nodes)
        if k and self.frame_velocity:
            return base + self.frame_velocity * k
        return base

    def node_index(self, x: float, k: int = 0, atol: float = 1e-9) -> int:
        """Index of the node equal to x at time k; off-node x is a usage error."""
        i = int(round((x - self.frame_velocity * k - self.x_lo) / self.h))
        if i < 0 or i >= self.n_nodes:
            raise ValueError(f"x={x} outside grid window at time {k}")
        node = self.x_lo + i * self.h + self.frame_velocity * k
        if abs(node - x) > atol:
            raise ValueError(f"x={x} is not a grid node at time {k} (nearest {node})")
        return i

    def with_frame(self, v: float) -> "Grid":
        return Grid(self.x_lo, self.x_hi, self.h, v)

    def signature(self) -> str:
        return f"{self.x_lo!r}:{self.x_hi!r}:{self.h!r}:{self.frame_velocity!r}"


def centered_grid(halfwidth: float, h: float, frame_velocity: float = 0.0) -> Grid:
    """Grid symmetric about 0 containing 0 as an exact node."""
    k = int(math.ceil(halfwidth / h - 1e-9))
    return Grid(-k * h, k * h, h, frame_velocity)


@dataclass(eq=False)
class GridFn:
    """Values sampled on one time slice of a grid, in linear or log scale.

    Log-scale entries may be -inf (empty mass); NaN is always rejected.
    """

    grid: Grid
    k: int
    values: np.ndarray
    scale: str = "linear"

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"value array of length {vals.shape} does not match grid with {self.grid.n_nodes} nodes"
            )
        if np.isnan(vals).any():
            raise ValueError("GridFn values contain NaN")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"unknown scale {self.scale!r}")
        vals.setflags(write=False)
        self.values = vals

    def nodes(self) -> np.ndarray:
        return self.grid.nodes(self.k)


def logsumexp(values: np.ndarray) -> float:
    """log(sum(exp(values))) against the running maximum; all -inf gives -inf."""
    values = np.asarray(values, dtype=float)
    m = values.max() if values.size else -np.inf
    if not np.isfinite(m):
        return -np.inf if m < 0 else float(m)
    return float(m + np.log(np.exp(values - m).sum()))


def log_integral(fn: GridFn) -> float:
    """ln of the rectangle-rule integral of exp(values): ln(h) + logsumexp(values)."""
    if fn.scale != "log":
        raise ValueError("log_integral expects a log-scale GridFn")
    s = logsumexp(fn.values)
    if s == -np.inf:
        return -np.inf
    return math.log(fn.grid.h) + s


def log_matvec(log_kernel: np.ndarray, log_v: np.ndarray) -> np.ndarray:
    """Row-wise logsumexp of log_kernel + log_v, tolerating -inf entries."""
    a = log_kernel + log_v[None, :]
    m = a.max(axis=1)
    out = np.full(m.shape, -np.inf)
    ok = np.isfinite(m)
    if ok.any():
        with np.errstate(invalid="ignore"):
            out[ok] = m[ok] + np.log(np.exp(a[ok] - m[ok, None]).sum(axis=1))
    return out


def minplus_matvec(cost: np.ndarray, v: np.ndarray):
    """Row-wise min of cost + v with leftmost argmin; returns (values, argmin)."""
    a = cost + v[None, :]
    arg = a.argmin(axis=1)
    return a[np.arange(a.shape[0]), arg], arg


def log_matmul(a: np.ndarray, b: np.ndarray, block: int = 128) -> np.ndarray:
    """out[i, j] = logsumexp_l(a[i, l] + b[l, j]); quadrature weights are the caller's."""
    n, g = a.shape[0], b.shape[1]
    out = np.empty((n, g))
    for j0 in range(0, g, block):
        j1 = min(j0 + block, g)
        s = a[:, :, None] + b[None, :, j0:j1]
        m = s.max(axis=1)
        with np.errstate(invalid="ignore"):
            chunk = m + np.log(np.exp(s - m[:, None, :]).sum(axis=1))
        chunk[~np.isfinite(m)] = -np.inf
        out[:, j0:j1] = chunk
    return out


def minplus_matmul(a: np.ndarray, b: np.ndarray, block: int = 128) -> np.ndarray:
    """out[i, j] = min_l(a[i, l] + b[l, j])."""
    n, g = a.shape[0], b.shape[1]
    out = np.empty((n, g))
    for j0 in range(0, g, block):
        j1 = min(j0 + block, g)
        out[:, j0:j1] = (a[:, :, None] + b[None, :, j0:j1]).min(axis=1)
    return out


def log_kernel_matrix(grid: Grid, kappa: float) -> np.ndarray:
    """ln g_kappa of the one-step displacement between consecutive slices.

    Entry [i, j] is the log kernel from node j at time k-1 to node i at time k;
    in a moving frame the displacement is (i-j)*h + frame_velocity.
    """
    idx = np.arange(grid.n_nodes)
    d = (idx[:, None] - idx[None, :]) * grid.h + grid.frame_velocity
    return gauss_log_kernel(d, kappa)


def step_cost_matrix(grid: Grid) -> np.ndarray:
    """Kinetic cost 0.5*dx^2 of the one-step displacement, same layout as log_kernel_matrix."""
    idx = np.arange(grid.n_nodes)
    d = (idx[:, None] - idx[None, :]) * grid.h + grid.frame_velocity
    return 0.5 * d * d


def boundary_leak(dist, margin_cells: int) -> float:
    """Total probability mass within margin_cells of either window edge."""
    if margin_cells < 1:
        raise ValueError("margin_cells must be >= 1")
    p = np.asarray(getattr(dist, "probs", dist), dtype=float)
    m = min(margin_cells, p.size)
    return float(p[:m].sum() + p[max(m, p.size - m):].sum())


def gridfn_csv(fn: GridFn) -> str:
    """CSV dump of one slice: node index, position, value."""
    lines = ["node,position,value"]
    for i, (x, v) in enumerate(zip(fn.nodes(), fn.values)):
        lines.append(f"{i},{float(x)!r},{float(v)!r}")
    return "\n".join(lines) + "\n"
