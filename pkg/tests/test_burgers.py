import numpy as np
import pytest

from caerom.burgers import (
    BurgersConfig,
    burgers_residual,
    burgers_step,
    initial_condition,
    solve_burgers,
)
from caerom.errors import ConfigurationError, DimensionError, SolverError


def restrict(fine, factor):
    """Sample a refined solution back onto the coarse grid points."""
    return fine[::factor, ::factor]


def rel_fro(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(a)


@pytest.fixture(scope="module")
def nu02_runs():
    base = BurgersConfig(nu=0.2)
    return {f: solve_burgers(base.refined(f)).values for f in (1, 2, 4)}


def test_grid_sizes_are_authoritative():
    cfg = BurgersConfig()
    assert cfg.x.shape == (200,) and cfg.t.shape == (100,)
    assert cfg.x[0] == -1.0 and cfg.x[-1] == 1.0
    assert cfg.t[-1] == pytest.approx(5.0)
    assert cfg.dx == pytest.approx(0.01005, rel=1e-3)
    assert cfg.dt == pytest.approx(0.0505, rel=1e-3)


@pytest.mark.parametrize("nu", [0.001, 0.2, 0.8, 1.0])
def test_initial_and_boundary_conditions_exact(nu):
    cfg = BurgersConfig(nu=nu)
    sol = solve_burgers(cfg)
    U = sol.values
    assert U.shape == (200, 100)
    expected = -np.sin(np.pi * cfg.x)
    expected[[0, -1]] = 0.0
    assert np.array_equal(U[:, 0], expected)
    assert np.all(U[0] == 0.0) and np.all(U[-1] == 0.0)
    assert np.all(np.isfinite(U))


def test_smooth_regime_decays_monotonically():
    U = solve_burgers(BurgersConfig(nu=0.8)).values
    peaks = np.max(np.abs(U), axis=0)
    assert np.all(np.diff(peaks) < 0)


@pytest.mark.parametrize("nu", np.round(np.arange(0.05, 1.0001, 0.05), 2))
def test_discrete_max_principle(nu):
    cfg = BurgersConfig(nu=float(nu))
    U = solve_burgers(cfg).values
    assert np.max(np.abs(U)) <= np.max(np.abs(initial_condition(cfg))) + 1e-8


@pytest.mark.parametrize("nu", [0.05, 0.2, 0.5, 0.8, 1.0])
def test_self_convergence_against_fine_reference(nu):
    base = BurgersConfig(nu=nu)
    ref = restrict(solve_burgers(base.refined(4)).values, 4)
    assert rel_fro(ref, solve_burgers(base).values) <= 0.02


def test_observed_order_at_least_first(nu02_runs):
    ref = nu02_runs[4]
    e1 = rel_fro(restrict(ref, 4), nu02_runs[1])
    e2 = rel_fro(restrict(ref, 2), nu02_runs[2])
    assert np.log2(e1 / e2) >= 0.8


def test_residual_zero_fixed_point():
    cfg = BurgersConfig()
    z = np.zeros(cfg.n_x)
    assert np.array_equal(burgers_residual(z, z, cfg), z)


def test_heat_step_matches_closed_form():
    # with the convection term off, sin(pi x) is a discrete Laplacian eigenvector
    cfg = BurgersConfig(nu=0.3)
    x = cfg.x
    u0 = np.sin(np.pi * x)
    u0[[0, -1]] = 0.0
    lam = 4.0 / cfg.dx**2 * np.sin(np.pi * cfg.dx / 2) ** 2
    expected = u0 / (1.0 + cfg.step_dt * cfg.nu * lam)
    got = burgers_step(u0, cfg, convection=False)
    assert np.max(np.abs(got - expected)) <= 1e-12
    assert np.max(np.abs(burgers_residual(u0, expected, cfg, convection=False))) <= 1e-12


@pytest.mark.parametrize("nu", [0.001, 0.05, 0.5])
def test_step_residual_below_tolerance(nu):
    cfg = BurgersConfig(nu=nu)
    u0 = initial_condition(cfg)
    u1 = burgers_step(u0, cfg)
    assert np.max(np.abs(burgers_residual(u0, u1, cfg))) <= 1e-10


def test_residual_shape_check():
    cfg = BurgersConfig()
    with pytest.raises(DimensionError):
        burgers_residual(np.zeros(3), np.zeros(3), cfg)


def test_deterministic():
    cfg = BurgersConfig(nu=0.37)
    a = solve_burgers(cfg).values
    b = solve_burgers(cfg).values
    assert a.tobytes() == b.tobytes()


def test_nu_clamp_and_range():
    cfg = BurgersConfig().with_nu(0.0)
    assert cfg.nu == cfg.nu_min
    with pytest.raises(ConfigurationError):
        BurgersConfig(nu=1.5)
    with pytest.raises(ConfigurationError):
        BurgersConfig(nu=0.0)


def test_non_convergence_raises_solver_error():
    cfg = BurgersConfig(nu=0.01, max_iter=1, tol=1e-16)
    with pytest.raises(SolverError) as info:
        burgers_step(initial_condition(cfg), cfg, step=7)
    assert info.value.step == 7 and info.value.residual > 0
