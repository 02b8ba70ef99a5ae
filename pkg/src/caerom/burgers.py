"""Implicit finite-difference solver for the viscous 1-D Burgers equation.

    u_t + u u_x = nu u_xx,   x in [-1, 1],  u(x, 0) = -sin(pi x),  u(+-1, t) = 0

Backward Euler in time, central second differences for diffusion and
first-order upwinding (by the sign of the local velocity) for convection.
The output interval is split into ``substeps`` equal implicit steps. Each
step is a nonlinear system solved by Picard iteration: the convecting
velocity is lagged, which leaves an M-matrix tridiagonal system per iteration
and gives the scheme a discrete maximum principle.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from caerom.errors import ConfigurationError, DimensionError, SolverError

log = logging.getLogger(__name__)

NU_MIN = 1e-3


@dataclass(frozen=True)
class BurgersConfig:
    nu: float = 0.5
    x_min: float = -1.0
    x_max: float = 1.0
    t_max: float = 5.0
    n_x: int = 200
    n_t: int = 100
    nu_min: float = NU_MIN
    substeps: int = 8
    tol: float = 1e-10
    max_iter: int = 50

    def __post_init__(self):
        if self.n_x < 3 or self.n_t < 2:
            raise ConfigurationError("need n_x >= 3 and n_t >= 2")
        if self.substeps < 1:
            raise ConfigurationError("substeps must be >= 1")
        if not self.x_max > self.x_min or self.t_max <= 0:
            raise ConfigurationError("empty space or time interval")
        if not (self.nu_min <= self.nu <= 1.0):
            raise ConfigurationError(f"nu={self.nu} outside [{self.nu_min}, 1]")

    @property
    def dx(self):
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def dt(self):
        return self.t_max / (self.n_t - 1)

    @property
    def step_dt(self):
        """Size of one implicit step (output interval divided by ``substeps``)."""
        return self.dt / self.substeps

    @property
    def x(self):
        return np.linspace(self.x_min, self.x_max, self.n_x)

    @property
    def t(self):
        return np.linspace(0.0, self.t_max, self.n_t)

    def refined(self, factor):
        """Same problem on a grid ``factor`` times finer in space and time."""
        return replace(self, n_x=(self.n_x - 1) * factor + 1, n_t=(self.n_t - 1) * factor + 1)

    def with_nu(self, nu):
        """Copy with a new viscosity; values below ``nu_min`` are clamped and logged."""
        nu = float(nu)
        if nu < self.nu_min:
            log.info("clamping nu=%g to nu_min=%g", nu, self.nu_min)
            nu = self.nu_min
        return replace(self, nu=nu)


@dataclass
class SolutionMatrix:
    """One space-time response: ``values[i, n]`` is DOF ``i`` at time ``time_axis[n]``."""

    values: np.ndarray
    time_axis: np.ndarray
    dof_labels: list = field(default_factory=list)

    @property
    def d(self):
        return self.values.shape[0]

    @property
    def n_t(self):
        return self.values.shape[1]


def initial_condition(config):
    u0 = -np.sin(np.pi * config.x)
    u0[0] = 0.0
    u0[-1] = 0.0
    return u0


def _convection(u_adv, u, dx):
    """Upwinded ``u_adv * du/dx`` at interior nodes."""
    a = u_adv[1:-1]
    back = (u[1:-1] - u[:-2]) / dx
    fwd = (u[2:] - u[1:-1]) / dx
    return np.maximum(a, 0.0) * back + np.minimum(a, 0.0) * fwd


def burgers_residual(u_prev, u_next, config, convection=True):
    """Residual of one implicit step; zero iff ``u_next`` solves the step from ``u_prev``.

    Interior rows hold ``u_next - u_prev + h * (u_next * D1(u_next) - nu * D2(u_next))``
    with ``h = config.step_dt`` and the upwind ``D1``, i.e. the step equations
    scaled to the units of ``u``; the two boundary rows hold the Dirichlet values.
    ``convection=False`` drops the nonlinear term (plain backward-Euler heat step).
    """
    u_prev = np.asarray(u_prev, dtype=float)
    u_next = np.asarray(u_next, dtype=float)
    if u_prev.shape != (config.n_x,) or u_next.shape != (config.n_x,):
        raise DimensionError(f"expected vectors of length {config.n_x}")
    dx, h, nu = config.dx, config.step_dt, config.nu
    r = np.empty(config.n_x)
    lap = (u_next[2:] - 2 * u_next[1:-1] + u_next[:-2]) / dx**2
    flux = -nu * lap
    if convection:
        flux += _convection(u_next, u_next, dx)
    r[1:-1] = u_next[1:-1] - u_prev[1:-1] + h * flux
    r[0] = u_next[0]
    r[-1] = u_next[-1]
    return r


def _step_matrix(u_adv, config, convection=True):
    """Banded (3, n_x) matrix of the step system with the convecting velocity frozen at ``u_adv``."""
    n, dx, h, nu = config.n_x, config.dx, config.step_dt, config.nu
    ab = np.zeros((3, n))
    diff = h * nu / dx**2
    lower = np.full(n - 2, -diff)
    diag = np.full(n - 2, 1.0 + 2 * diff)
    upper = np.full(n - 2, -diff)
    if convection:
        a = u_adv[1:-1]
        ap = h * np.maximum(a, 0.0) / dx
        am = h * np.minimum(a, 0.0) / dx
        diag += ap - am
        lower -= ap
        upper += am
    # ab[0, j] = A[j-1, j], ab[1, j] = A[j, j], ab[2, j] = A[j+1, j]
    ab[1, 0] = ab[1, -1] = 1.0
    ab[1, 1:-1] = diag
    ab[0, 2:] = upper
    ab[2, :-2] = lower
    return ab


def burgers_step(u_prev, config, convection=True, step=None):
    """Advance one implicit step of size ``config.step_dt``.

    Returns ``u_next`` whose residual max-norm is at most ``config.tol``;
    raises :class:`SolverError` after ``config.max_iter`` Picard sweeps.
    """
    rhs = np.array(u_prev, dtype=float)
    rhs[0] = rhs[-1] = 0.0
    u = u_prev.copy()
    res = np.inf
    for _ in range(config.max_iter):
        u = solve_banded((1, 1), _step_matrix(u, config, convection), rhs)
        # pivoting in the banded LU can leave round-off in the Dirichlet rows
        u[0] = u[-1] = 0.0
        res = np.max(np.abs(burgers_residual(u_prev, u, config, convection)))
        if res <= config.tol:
            return u
    raise SolverError(
        f"Picard iteration did not converge at step {step} (residual {res:.3e})", step=step, residual=res
    )


def solve_burgers(config):
    """Full time history on the configured grid as a ``(n_x, n_t)`` SolutionMatrix."""
    if not (config.nu_min <= config.nu <= 1.0):
        raise ConfigurationError(f"nu={config.nu} outside [{config.nu_min}, 1]")
    U = np.empty((config.n_x, config.n_t))
    u = initial_condition(config)
    U[:, 0] = u
    for n in range(1, config.n_t):
        for _ in range(config.substeps):
            u = burgers_step(u, config, step=n)
        U[:, n] = u
    labels = [f"x={x:.6g}" for x in config.x]
    return SolutionMatrix(U, config.t, labels)
