"""Min-plus dynamic programming: minimal actions, minimizers, action differences.

The action of a discrete path gamma over [m, n] is the kinetic part
0.5*sum (gamma_k - gamma_{k-1})^2 plus the potential part sum F_k(gamma_k)
taken over k = m+1 .. n only; the endpoint asymmetry (k = n included, k = m
excluded) is deliberate and every routine here follows it.

Minimizer positions live on grid nodes; the source point x may be off-grid,
with the first step priced exactly.  Ties break toward the leftmost
predecessor so every result is deterministic.

Finite-horizon action differences toward a distant slope-v target play the
role of the infinite-horizon limits.  Convergence over a ladder of horizons
is reported, never forced: a trace of successive differences comes back with
each estimate and the caller decides what to trust.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import Grid, GridFn, minplus_matvec, step_cost_matrix
from .potential import PotentialField


@dataclass(eq=False)
class LatticePath:
    """A path on integer times m..m+len-1 with real positions."""

    m: int
    positions: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 1 or self.positions.size < 1:
            raise ValueError("path needs at least one position")

    @property
    def n(self) -> int:
        return self.m + self.positions.size - 1

    def times(self) -> np.ndarray:
        return np.arange(self.m, self.n + 1)

    def restriction(self, n1: int, n2: int) -> "LatticePath":
        if n1 < self.m or n2 > self.n or n2 < n1:
            raise ValueError(f"restriction [{n1}, {n2}] not inside [{self.m}, {self.n}]")
        return LatticePath(n1, self.positions[n1 - self.m: n2 - self.m + 1])


@dataclass(frozen=True)
class ActionDecomposition:
    kinetic: float
    potential: float
    total: float


def action(field: PotentialField, path: LatticePath) -> ActionDecomposition:
    """Kinetic + potential action of an explicit path (potential from k = m+1 on)."""
    incs = np.diff(path.positions)
    kinetic = 0.5 * float((incs * incs).sum())
    potential = 0.0
    for k in range(path.m + 1, path.n + 1):
        potential += field.eval(k, float(path.positions[k - path.m]))
    return ActionDecomposition(kinetic=kinetic, potential=potential, total=kinetic + potential)


@dataclass(eq=False)
class MinActionSlice:
    """Forward DP result: minimal action from a point source to every node of slice n."""

    source: tuple
    values: GridFn
    backpointers: list
    boundary_hits: list

    @property
    def boundary_warning(self) -> bool:
        return bool(self.boundary_hits)


def _forward_minplus(field, m, n, x, grid, keep_slices=False):
    cost = step_cost_matrix(grid)
    g = grid.n_nodes
    nodes = grid.nodes(m + 1)
    v = 0.5 * (nodes - x) ** 2 + field.eval(m + 1, nodes)
    backpointers = []
    hits = []
    slices = [v] if keep_slices else None
    for k in range(m + 2, n + 1):
        vals, arg = minplus_matvec(cost, v)
        v = vals + field.eval(k, grid.nodes(k))
        backpointers.append(arg)
        if g > 2 and ((arg[1:-1] == 0) | (arg[1:-1] == g - 1)).any():
            hits.append(k)
        if keep_slices:
            slices.append(v)
    return v, backpointers, hits, slices


def min_action_slice(field: PotentialField, m: int, n: int, x: float, grid: Grid) -> MinActionSlice:
    """Minimal action from (m, x) to every node of slice n, with backpointers.

    A boundary warning is attached when some interior target node picks a
    predecessor on the window edge: the window was too narrow to trust.
    """
    if n <= m:
        raise ValueError(f"need n > m, got m={m}, n={n}")
    v, bps, hits, _ = _forward_minplus(field, m, n, x, grid)
    return MinActionSlice(source=(m, x), values=GridFn(grid, n, v, "linear"),
                          backpointers=bps, boundary_hits=hits)


def min_action(field: PotentialField, m: int, n: int, x: float, y: float, grid: Grid) -> float:
    """Minimal action between (m, x) and (n, y); y must be a node of slice n."""
    res = min_action_slice(field, m, n, x, grid)
    return float(res.values.values[grid.node_index(y, n)])


def minimizer(field: PotentialField, m: int, n: int, x: float, y: float, grid: Grid) -> LatticePath:
    """Backtracked optimal path from (m, x) to (n, y); endpoints exact."""
    res = min_action_slice(field, m, n, x, grid)
    j = grid.node_index(y, n)
    idx = [j]
    for arg in reversed(res.backpointers):
        j = int(arg[j])
        idx.append(j)
    idx.reverse()
    positions = np.empty(n - m + 1)
    positions[0] = x
    for step, node_idx in enumerate(idx, start=1):
        positions[step] = grid.nodes(m + step)[node_idx]
    positions[-1] = y
    return LatticePath(m, positions)


@dataclass(eq=False)
class BackwardSolve:
    """Backward DP from terminal data: value slices W_k for k = m .. n."""

    m: int
    n: int
    grid: Grid
    slices: list          # slices[k - m] = W_k values
    backpointers: list    # backpointers[k - m][j] = argmin node index at k + 1
    boundary_hits: list


def terminal_backward(field: PotentialField, m: int, n: int, terminal: np.ndarray,
                      grid: Grid) -> BackwardSolve:
    """Solve W_k(x) = min_y [0.5 (y-x)^2 + F_{k+1}(y) + W_{k+1}(y)] down to k = m.

    terminal holds W_n on the nodes of slice n; +inf entries are allowed and
    mark unreachable targets (point terminal data).
    """
    if n <= m:
        raise ValueError(f"need n > m, got m={m}, n={n}")
    cost = step_cost_matrix(grid)
    cost_t = np.ascontiguousarray(cost.T)
    g = grid.n_nodes
    w = np.asarray(terminal, dtype=float)
    if w.shape != (g,):
        raise ValueError("terminal data length does not match grid")
    slices = [w]
    backpointers = []
    hits = []
    for k in range(n - 1, m - 1, -1):
        f_next = field.eval(k + 1, grid.nodes(k + 1))
        vals, arg = minplus_matvec(cost_t, w + f_next)
        w = vals
        slices.append(w)
        backpointers.append(arg)
        if g > 2 and ((arg[1:-1] == 0) | (arg[1:-1] == g - 1)).any():
            hits.append(k)
    slices.reverse()
    backpointers.reverse()
    return BackwardSolve(m=m, n=n, grid=grid, slices=slices,
                         backpointers=backpointers, boundary_hits=hits)


def backward_value_at(field: PotentialField, solve: BackwardSolve, k: int, x: float) -> float:
    """W_k at an arbitrary real x, priced by one exact step onto the grid."""
    if k == solve.n:
        return float(solve.slices[-1][solve.grid.node_index(x, k)])
    if not (solve.m <= k < solve.n):
        raise ValueError(f"time {k} outside backward solve range [{solve.m}, {solve.n}]")
    nodes = solve.grid.nodes(k + 1)
    f_next = field.eval(k + 1, nodes)
    return float(np.min(0.5 * (nodes - x) ** 2 + f_next + solve.slices[k + 1 - solve.m]))


def point_terminal(grid: Grid, n: int, y: float) -> np.ndarray:
    """Terminal data for a point target: 0 at the node equal to y, +inf elsewhere."""
    w = np.full(grid.n_nodes, np.inf)
    w[grid.node_index(y, n)] = 0.0
    return w


def minplus_matrix(field: PotentialField, m: int, n: int, grid: Grid,
                   block: int = 128) -> np.ndarray:
    """All-pairs minimal action: entry [i, j] = A(m, node_i -> n, node_j).

    Built by min-plus products of one-step cost matrices; O(G^3) per step, so
    meant for modest grids (oracle checks, variational residuals).
    """
    if n <= m:
        raise ValueError(f"need n > m, got m={m}, n={n}")
    idx = np.arange(grid.n_nodes)
    d = (idx[None, :] - idx[:, None]) * grid.h + grid.frame_velocity  # [from i, to j]
    step0 = 0.5 * d * d
    mat = step0 + field.eval(m + 1, grid.nodes(m + 1))[None, :]
    for k in range(m + 2, n + 1):
        step = step0 + field.eval(k, grid.nodes(k))[None, :]
        out = np.empty_like(mat)
        for j0 in range(0, grid.n_nodes, block):
            j1 = min(j0 + block, grid.n_nodes)
            # out[i, j] = min_l mat[i, l] + step[l, j]
            out[:, j0:j1] = (mat[:, :, None] + step[None, :, j0:j1]).min(axis=1)
        mat = out
    return mat


@dataclass(eq=False)
class LadderEstimate:
    """Finite-horizon estimate with its convergence trace over a horizon ladder."""

    value: float
    trace: list                 # [(N, value)] in ladder order
    converged: bool
    boundary_warning: bool = False

    @property
    def deltas(self) -> list:
        return [abs(b[1] - a[1]) for a, b in zip(self.trace, self.trace[1:])]


def _ladder(horizons) -> list:
    if isinstance(horizons, (int, np.integer)):
        return [int(horizons)]
    return [int(N) for N in horizons]


def _converged(trace, tol) -> bool:
    deltas = [abs(b[1] - a[1]) for a, b in zip(trace, trace[1:])]
    return len(deltas) >= 2 and deltas[-1] < tol and deltas[-2] < tol


def busemann_zero(field: PotentialField, point1, point2, v: float, horizons,
                  grid: Grid, tol: float = 1e-6) -> LadderEstimate:
    """Action difference A(point1 -> (N, vN)) - A(point2 -> (N, vN)) over a horizon ladder.

    The grid should ride frame velocity v so the target vN is an exact node.
    Antisymmetry and the additive three-point identity hold exactly at fixed N.
    """
    n1, x1 = point1
    n2, x2 = point2
    trace = []
    warning = False
    for N in _ladder(horizons):
        if N <= max(n1, n2):
            raise ValueError(f"horizon N={N} must exceed both anchor times")
        target = v * N
        r1 = min_action_slice(field, n1, N, x1, grid)
        r2 = min_action_slice(field, n2, N, x2, grid)
        warning = warning or r1.boundary_warning or r2.boundary_warning
        a1 = float(r1.values.values[grid.node_index(target, N)])
        a2 = float(r2.values.values[grid.node_index(target, N)])
        trace.append((N, a1 - a2))
    return LadderEstimate(value=trace[-1][1], trace=trace,
                          converged=_converged(trace, tol), boundary_warning=warning)


def inviscid_velocity(field: PotentialField, n: int, x: float, v: float, horizons,
                      grid: Grid, tol: float = 1e-6) -> LadderEstimate:
    """x minus the first step of the minimizer from (n, x) toward (N, vN)."""
    trace = []
    warning = False
    for N in _ladder(horizons):
        if N <= n:
            raise ValueError(f"horizon N={N} must exceed n={n}")
        res = min_action_slice(field, n, N, x, grid)
        warning = warning or res.boundary_warning
        path = minimizer(field, n, N, x, v * N, grid)
        trace.append((N, x - float(path.positions[1])))
    return LadderEstimate(value=trace[-1][1], trace=trace,
                          converged=_converged(trace, tol), boundary_warning=warning)


def busemann_slice(field: PotentialField, n: int, anchor, v: float, N: int,
                   grid: Grid) -> GridFn:
    """Finite-horizon action-difference profile B((n, .), anchor) over the grid."""
    n0, x0 = anchor
    if N <= max(n, n0):
        raise ValueError(f"horizon N={N} must exceed n={n} and the anchor time {n0}")
    solve = terminal_backward(field, n, N, point_terminal(grid, N, v * N), grid)
    ref = backward_value_at(field, solve, n0, x0)
    return GridFn(grid, n, solve.slices[0] - ref, "linear")


def busemann_variational_residual(field: PotentialField, n: int, mid: int, anchor,
                                  v: float, N: int, grid: Grid) -> float:
    """Max residual of the one-sided variational identity at finite horizon.

    Compares B((n, x), anchor) against min_y [B((mid, y), anchor) + A(n, x -> mid, y)]
    over all grid x, with n < mid < N.  The identity telescopes exactly on the
    grid whenever the inner argmin stays interior.
    """
    if not (n < mid < N):
        raise ValueError(f"need n < mid < N, got {n}, {mid}, {N}")
    n0, x0 = anchor
    if not (n <= n0 < N):
        raise ValueError(f"anchor time {n0} must lie in [{n}, {N})")
    solve = terminal_backward(field, n, N, point_terminal(grid, N, v * N), grid)
    ref = backward_value_at(field, solve, n0, x0)
    lhs = solve.slices[0] - ref
    b_mid = solve.slices[mid - n] - ref
    a_mat = minplus_matrix(field, n, mid, grid)
    rhs = (a_mat + b_mid[None, :]).min(axis=1)
    return float(np.abs(lhs - rhs).max())


def suggested_halfwidth(n_steps: int, r_hat: float = 2.0) -> float:
    """Default window halfwidth for horizon-n queries: (r_hat + 2) * sqrt(n).

    r_hat is a user knob standing in for the (non-constructive) straightness
    radius; pair it with a frame grid so the slope term never enters the
    window budget.  Boundary warnings on results are the ground truth; widen
    when they fire.
    """
    return (r_hat + 2.0) * max(1.0, math.sqrt(n_steps))


def path_csv(path: LatticePath) -> str:
    """CSV dump of a path: time, position."""
    lines = ["time,position"]
    for k, x in zip(path.times(), path.positions):
        lines.append(f"{int(k)},{float(x)!r}")
    return "\n".join(lines) + "\n"
