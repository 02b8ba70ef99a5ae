"""Newmark time integration and ground-motion input."""

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from caerom.errors import ConfigurationError, DimensionError, FormatError, SolverError
from caerom.sampling import substream


@dataclass(frozen=True)
class NewmarkConfig:
    beta: float = 0.25
    gamma: float = 0.5
    dt: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.beta <= 0.5:
            raise ConfigurationError(f"beta={self.beta} outside (0, 0.5]")
        if not 0.5 <= self.gamma <= 1.0:
            raise ConfigurationError(f"gamma={self.gamma} outside [0.5, 1]")
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")


@dataclass
class GroundMotion:
    accel: np.ndarray  # m/s^2
    dt: float = 0.01

    def __post_init__(self):
        self.accel = np.asarray(self.accel, dtype=float).ravel()
        if self.accel.size < 1 or self.dt <= 0:
            raise ConfigurationError("ground motion needs samples and a positive dt")

    @property
    def n_steps(self):
        return self.accel.size

    @property
    def t(self):
        return self.dt * np.arange(self.n_steps)

    def scaled(self, c):
        return GroundMotion(c * self.accel, self.dt)

    def truncated(self, n_steps):
        return GroundMotion(self.accel[:n_steps], self.dt)


@dataclass
class NewmarkHistory:
    u: np.ndarray  # (d, n_steps)
    v: np.ndarray
    a: np.ndarray


def load_ground_motion_csv(path, rtol=1e-6):
    """Read a ``t,accel`` CSV with a header row; the time column must be uniformly spaced."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if len(rows) < 3:
        raise FormatError(f"{path}: need a header and at least two samples")
    header = [h.strip().lower() for h in rows[0]]
    if header[:2] != ["t", "accel"]:
        raise FormatError(f"{path}: header must be 't,accel', got {rows[0]}")
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in rows[1:] if r])
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed row ({exc})") from exc
    steps = np.diff(data[:, 0])
    dt = float(steps.mean())
    if dt <= 0 or np.max(np.abs(steps - dt)) > rtol * dt + 1e-12:
        raise FormatError(f"{path}: time column is not uniformly spaced")
    return GroundMotion(data[:, 1], dt)


def save_ground_motion_csv(motion, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "accel"])
        for t, a in zip(motion.t, motion.accel):
            w.writerow([repr(float(t)), repr(float(a))])


def synthetic_accelerogram(n_steps=600, dt=0.01, seed=0, pga=3.0, f_ground=2.5, zeta_ground=0.6, n_freq=200,
                           f_max=10.0):
    """Stationary Kanai-Tajimi noise by spectral representation, shaped by a build-up/decay envelope.

    ``pga`` is the peak absolute acceleration in m/s^2 of the returned record.
    Spectral content is cut at ``f_max`` Hz. The default keeps the input
    below the first mode of the wall meshes shipped here (above 18 Hz over
    the sampled moduli), which matters because the structure is undamped:
    input energy at resonance would dominate the response and make it
    oscillate rapidly in the stiffness parameters.
    """
    rng = substream(seed, "accelerogram")
    t = dt * np.arange(n_steps)
    f = np.linspace(0.1, min(f_max, 0.5 / dt), n_freq)
    r = (f / f_ground) ** 2
    psd = (1 + 4 * zeta_ground**2 * r) / ((1 - r) ** 2 + 4 * zeta_ground**2 * r)
    amp = np.sqrt(2 * psd * (f[1] - f[0]))
    phase = rng.uniform(0, 2 * np.pi, n_freq)
    a = (amp[:, None] * np.cos(2 * np.pi * f[:, None] * t[None, :] + phase[:, None])).sum(axis=0)
    duration = t[-1] if n_steps > 1 else dt
    rise, fall = 0.15 * duration, 0.5 * duration
    env = np.where(t < rise, (t / rise) ** 2, np.where(t < fall, 1.0, np.exp(-3.0 * (t - fall) / (duration - fall))))
    a *= env
    peak = np.max(np.abs(a))
    return GroundMotion(a * (pga / peak if peak > 0 else 0.0), dt)


def rayleigh_damping(M, K, alpha, beta):
    """``C = alpha * M + beta * K`` with ``M`` given as a diagonal."""
    return sp.diags(alpha * np.asarray(M)) + beta * sp.csr_matrix(K)


def _as_sparse_mass(M, d):
    M = sp.diags(M) if np.ndim(M) == 1 else sp.csr_matrix(M)
    if M.shape != (d, d):
        raise DimensionError(f"mass has shape {M.shape}, stiffness is {d}x{d}")
    return M


def newmark_history(K, M, load, cfg=None, C=None, u0=None, v0=None):
    """Integrate ``M u'' + C u' + K u = f(t)`` with the Newmark family.

    ``load`` is a ``(d, n_steps)`` array holding ``f`` at ``t_n = n * dt``.
    The effective stiffness is factorized once. Returns displacements,
    velocities and accelerations at every step.
    """
    cfg = cfg or NewmarkConfig()
    K = sp.csr_matrix(K)
    d = K.shape[0]
    Ms = _as_sparse_mass(M, d)
    load = np.asarray(load, dtype=float)
    if load.ndim != 2 or load.shape[0] != d:
        raise DimensionError(f"load must be ({d}, n_steps), got {load.shape}")
    n_steps = load.shape[1]
    Cs = sp.csr_matrix((d, d)) if C is None else sp.csr_matrix(C)
    b, g, h = cfg.beta, cfg.gamma, cfg.dt
    c0, c1 = 1.0 / (b * h * h), g / (b * h)
    c2, c3 = 1.0 / (b * h), 1.0 / (2 * b) - 1.0
    c4, c5 = g / b - 1.0, h * (g / (2 * b) - 1.0)

    u = np.zeros((d, n_steps))
    v = np.zeros((d, n_steps))
    a = np.zeros((d, n_steps))
    u[:, 0] = 0.0 if u0 is None else u0
    v[:, 0] = 0.0 if v0 is None else v0
    try:
        a[:, 0] = splu(sp.csc_matrix(Ms)).solve(load[:, 0] - Cs @ v[:, 0] - K @ u[:, 0])
        lu = splu(sp.csc_matrix(K + c0 * Ms + c1 * Cs))
    except RuntimeError as exc:
        raise SolverError(f"factorization failed: {exc}") from exc
    for n in range(n_steps - 1):
        un, vn, an = u[:, n], v[:, n], a[:, n]
        rhs = load[:, n + 1] + Ms @ (c0 * un + c2 * vn + c3 * an) + Cs @ (c1 * un + c4 * vn + c5 * an)
        u1 = lu.solve(rhs)
        a1 = c0 * (u1 - un) - c2 * vn - c3 * an
        v[:, n + 1] = vn + h * ((1 - g) * an + g * a1)
        u[:, n + 1] = u1
        a[:, n + 1] = a1
    if not np.all(np.isfinite(u)):
        raise SolverError("non-finite displacement in Newmark integration")
    return NewmarkHistory(u, v, a)


def newmark_integrate(K, M, motion, cfg=None, iota=None, C=None):
    """Displacement history ``(d, n_steps)`` under the ground acceleration ``motion``.

    The effective load is ``-M iota a_g(t)``; ``iota`` defaults to ones,
    which for a mesh should be its horizontal influence vector.
    """
    cfg = cfg or NewmarkConfig(dt=motion.dt)
    if abs(cfg.dt - motion.dt) > 1e-12 * motion.dt:
        raise ConfigurationError(f"integrator dt={cfg.dt} differs from ground-motion dt={motion.dt}")
    d = K.shape[0]
    iota = np.ones(d) if iota is None else np.asarray(iota, dtype=float)
    m_iota = _as_sparse_mass(M, d) @ iota
    load = -np.outer(m_iota, motion.accel)
    return newmark_history(K, M, load, cfg, C=C).u
