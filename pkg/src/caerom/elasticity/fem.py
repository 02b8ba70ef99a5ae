"""Plane-stress bilinear quadrilateral elements and global system assembly."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from caerom.errors import AssemblyError, ConfigurationError, DimensionError, GeometryError

_G = 1.0 / np.sqrt(3.0)
GAUSS_2X2 = [(-_G, -_G), (_G, -_G), (_G, _G), (-_G, _G)]  # unit weights


@dataclass(frozen=True)
class ElasticityParams:
    E_per_story: tuple = (30e9, 30e9, 30e9)  # Pa
    poisson: float = 0.2
    density: float = 2500.0  # kg/m^3
    thickness: float = 1.0  # m
    body_force: tuple = (0.0, 0.0)  # N/m^3

    def __post_init__(self):
        if len(self.E_per_story) == 0 or min(self.E_per_story) <= 0:
            raise ConfigurationError("Young's moduli must be positive")
        if not 0.0 <= self.poisson < 0.5:
            raise ConfigurationError(f"Poisson ratio {self.poisson} outside [0, 0.5)")
        if self.density <= 0 or self.thickness <= 0:
            raise ConfigurationError("density and thickness must be positive")

    def with_moduli(self, moduli):
        return ElasticityParams(tuple(float(e) for e in moduli), self.poisson, self.density, self.thickness, self.body_force)


def plane_stress_matrix(E, nu):
    c = E / (1.0 - nu**2)
    return c * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]])


def shape_functions(xi, eta):
    """Bilinear shape functions and their ``(xi, eta)`` derivatives, nodes counterclockwise from (-1, -1)."""
    s = np.array([-1.0, 1.0, 1.0, -1.0])
    t = np.array([-1.0, -1.0, 1.0, 1.0])
    N = 0.25 * (1 + s * xi) * (1 + t * eta)
    dN = 0.25 * np.vstack([s * (1 + t * eta), t * (1 + s * xi)])  # (2, 4)
    return N, dN


def strain_displacement(xy, xi, eta):
    """``(B, detJ, N)`` at a reference point; ``B`` maps the 8 element DOFs to ``(eps_x, eps_y, gamma_xy)``."""
    N, dN = shape_functions(xi, eta)
    J = dN @ xy  # (2, 2)
    detJ = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    if detJ <= 0:
        raise GeometryError(f"non-positive Jacobian {detJ:.3e} in element with nodes {xy.tolist()}")
    dNdx = np.linalg.solve(J, dN)  # (2, 4) rows d/dx, d/dy
    B = np.zeros((3, 8))
    B[0, 0::2] = dNdx[0]
    B[1, 1::2] = dNdx[1]
    B[2, 0::2] = dNdx[1]
    B[2, 1::2] = dNdx[0]
    return B, detJ, N


def element_matrices(xy, D, thickness, density):
    """Element stiffness (8x8) and row-sum lumped mass (8,) by 2x2 Gauss quadrature."""
    ke = np.zeros((8, 8))
    me = np.zeros(4)
    for xi, eta in GAUSS_2X2:
        B, detJ, N = strain_displacement(xy, xi, eta)
        ke += B.T @ D @ B * (thickness * detJ)
        me += N * (density * thickness * detJ)
    return ke, np.repeat(me, 2)


def element_dofs(conn):
    return np.column_stack([2 * conn, 2 * conn + 1]).ravel()


@dataclass
class FemSystem:
    """Free-DOF stiffness and lumped mass of one parameter realization."""

    K: sp.csr_matrix
    M: np.ndarray  # diagonal of the lumped mass matrix
    free_dofs: np.ndarray

    @property
    def d(self):
        return self.K.shape[0]


def _element_moduli(mesh, params):
    moduli = np.asarray(params.E_per_story, dtype=float)
    if mesh.story.max() >= moduli.size:
        raise ConfigurationError(f"mesh has {mesh.story.max() + 1} stories, {moduli.size} moduli given")
    return moduli[mesh.story]


def assemble_full(mesh, params):
    """Unconstrained global stiffness (CSR) and lumped mass diagonal over all ``2 * n_nodes`` DOFs."""
    n = 2 * mesh.n_nodes
    E = _element_moduli(mesh, params)
    D1 = plane_stress_matrix(1.0, params.poisson)
    rows, cols, vals = [], [], []
    mass = np.zeros(n)
    for e, conn in enumerate(mesh.elements):
        ke, me = element_matrices(mesh.nodes[conn], D1, params.thickness, params.density)
        dofs = element_dofs(conn)
        rows.append(np.repeat(dofs, 8))
        cols.append(np.tile(dofs, 8))
        vals.append((E[e] * ke).ravel())
        mass[dofs] += me
    K = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    K = 0.5 * (K + K.T)  # remove round-off asymmetry from the quadrature sums
    return K.tocsr(), mass


def assemble_system(mesh, params, check=True):
    """Stiffness and lumped mass restricted to the free DOFs of ``mesh``.

    With ``check`` the stiffness is factorized once and an
    :class:`AssemblyError` is raised when it is singular, which happens when
    the constraints leave a rigid-body mode.
    """
    K, mass = assemble_full(mesh, params)
    free = mesh.free_dofs
    Kf = K[free][:, free].tocsr()
    system = FemSystem(Kf, mass[free], free)
    if check:
        check_nonsingular(Kf)
    return system


def check_nonsingular(K, rcond=1e-12):
    try:
        lu = splu(sp.csc_matrix(K))
    except RuntimeError as exc:
        raise AssemblyError(f"stiffness matrix is singular: {exc}") from exc
    piv = np.abs(lu.U.diagonal())
    if piv.min() <= rcond * piv.max():
        raise AssemblyError(f"stiffness matrix is singular to working precision (pivot ratio {piv.min() / piv.max():.2e})")
    return lu


def body_force_vector(mesh, params):
    """Consistent nodal loads of the constant body force, on the free DOFs."""
    bx, by = params.body_force
    f = np.zeros(2 * mesh.n_nodes)
    if bx or by:
        for conn in mesh.elements:
            xy = mesh.nodes[conn]
            for xi, eta in GAUSS_2X2:
                _, detJ, N = strain_displacement(xy, xi, eta)
                w = N * params.thickness * detJ
                f[2 * conn] += w * bx
                f[2 * conn + 1] += w * by
    return f[mesh.free_dofs]


def expand(mesh, u_free):
    """Scatter free-DOF values into a full ``2 * n_nodes`` vector with zeros at constraints."""
    u_free = np.asarray(u_free)
    if u_free.shape[0] != mesh.d:
        raise DimensionError(f"expected {mesh.d} free values, got {u_free.shape[0]}")
    full = np.zeros((2 * mesh.n_nodes,) + u_free.shape[1:])
    full[mesh.free_dofs] = u_free
    return full


def element_strains(mesh, u_full, e):
    """Strain ``(eps_x, eps_y, gamma_xy)`` at each of the four Gauss points of element ``e``."""
    conn = mesh.elements[e]
    ue = np.asarray(u_full)[element_dofs(conn)]
    return np.array([strain_displacement(mesh.nodes[conn], xi, eta)[0] @ ue for xi, eta in GAUSS_2X2])
