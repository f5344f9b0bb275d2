import math

import numpy as np
import pytest

from kickflow import Grid, GridFn, boundary_leak, centered_grid, gauss_log_kernel, log_integral
from kickflow.errors import ConfigError
from kickflow.numerics import log_matmul, log_matvec, logsumexp, minplus_matmul, minplus_matvec


def test_gauss_log_kernel_formulas():
    assert abs(gauss_log_kernel(0.0, 1.0) - (-0.5 * math.log(2 * math.pi))) < 1e-15
    assert abs(gauss_log_kernel(1.0, 1.0) - (-0.5 - 0.5 * math.log(2 * math.pi))) < 1e-15
    assert abs(gauss_log_kernel(2.0, 0.5) - (-4.0 - 0.5 * math.log(math.pi))) < 1e-15
    with pytest.raises(ValueError):
        gauss_log_kernel(1.0, 0.0)
    with pytest.raises(ValueError):
        gauss_log_kernel(1.0, -0.3)


def test_grid_construction_and_nodes():
    g = Grid(-1.0, 1.0, 0.5)
    assert g.n_nodes == 5
    assert np.allclose(g.nodes(), [-1, -0.5, 0, 0.5, 1])
    moving = g.with_frame(2.0)
    assert np.allclose(moving.nodes(3), np.array([-1, -0.5, 0, 0.5, 1]) + 6.0)
    with pytest.raises(ConfigError):
        Grid(-1.0, 1.0, -0.1)
    with pytest.raises(ConfigError):
        Grid(0.0, 0.5, 1.0)


def test_node_index_exactness():
    g = centered_grid(2.0, 0.25)
    assert g.node_index(0.0) == g.n_nodes // 2
    assert g.node_index(-0.5) == g.n_nodes // 2 - 2
    with pytest.raises(ValueError):
        g.node_index(0.1)
    moving = g.with_frame(0.5)
    assert moving.node_index(0.5 * 4, k=4) == moving.n_nodes // 2


def test_log_integral_basic():
    g = Grid(0.0, 3.0, 1.0)
    v = np.full(4, -np.inf)
    v[1] = 2.5
    assert log_integral(GridFn(g, 0, v, "log")) == pytest.approx(2.5, abs=1e-15)
    v[2] = 2.5
    assert log_integral(GridFn(g, 0, v, "log")) == pytest.approx(2.5 + math.log(2), abs=1e-14)
    assert log_integral(GridFn(g, 0, np.full(4, -np.inf), "log")) == -np.inf
    with pytest.raises(ValueError):
        log_integral(GridFn(g, 0, np.zeros(4), "linear"))


def test_log_integral_gaussian_normalization():
    g = Grid(-8.0, 8.0, 0.01)
    fn = GridFn(g, 0, gauss_log_kernel(g.nodes(), 1.0), "log")
    assert abs(log_integral(fn)) < 1e-6


def test_log_integral_scale_equivariance_exact():
    g = Grid(-2.0, 2.0, 0.25)
    rng = np.random.default_rng(5)
    vals = rng.normal(size=g.n_nodes)
    base = log_integral(GridFn(g, 0, vals, "log"))
    shifted = log_integral(GridFn(g, 0, vals + 7.25, "log"))
    assert shifted == base + 7.25


def test_gridfn_rejects_nan_and_wrong_length():
    g = Grid(0.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        GridFn(g, 0, np.array([0.0, np.nan, 1.0]), "linear")
    with pytest.raises(ValueError):
        GridFn(g, 0, np.zeros(2), "linear")


def test_matvec_and_matmul_agree_with_direct():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(6, 6))
    b = rng.normal(size=(6, 6))
    v = rng.normal(size=6)
    direct = np.log(np.exp(a) @ np.exp(v))
    assert np.allclose(log_matvec(a, v), direct, atol=1e-12)
    direct2 = np.log(np.exp(a) @ np.exp(b))
    assert np.allclose(log_matmul(a, b), direct2, atol=1e-12)
    vals, arg = minplus_matvec(a, v)
    assert np.array_equal(vals, (a + v[None, :]).min(axis=1))
    assert np.array_equal(arg, (a + v[None, :]).argmin(axis=1))
    assert np.allclose(minplus_matmul(a, b),
                       np.min(a[:, :, None] + b[None, :, :], axis=1), atol=0)


def test_logsumexp_handles_neg_inf():
    assert logsumexp(np.array([-np.inf, -np.inf])) == -np.inf
    assert logsumexp(np.array([-np.inf, 0.0])) == pytest.approx(0.0, abs=1e-15)


def test_boundary_leak_trivials():
    p = np.zeros(21)
    p[10] = 1.0
    assert boundary_leak(p, 3) == 0.0
    uniform = np.full(20, 1 / 20)
    assert boundary_leak(uniform, 3) == pytest.approx(6 / 20, abs=1e-15)
    with pytest.raises(ValueError):
        boundary_leak(uniform, 0)
