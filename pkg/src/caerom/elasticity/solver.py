"""One full structural simulation: assemble, integrate, label."""

import numpy as np

from caerom.burgers import SolutionMatrix
from caerom.elasticity.dynamics import NewmarkConfig, newmark_integrate, rayleigh_damping
from caerom.elasticity.fem import assemble_system


def solve_wall(mesh, params, motion, cfg=None, rayleigh=(0.0, 0.0)):
    """Free-DOF displacement history of the wall under ``motion`` as a SolutionMatrix."""
    system = assemble_system(mesh, params, check=False)
    C = None
    if any(rayleigh):
        C = rayleigh_damping(system.M, system.K, *rayleigh)
    cfg = cfg or NewmarkConfig(dt=motion.dt)
    U = newmark_integrate(system.K, system.M, motion, cfg, iota=mesh.horizontal_influence(), C=C)
    return SolutionMatrix(U, motion.t.copy(), mesh.dof_labels())


def monitored_rows(mesh):
    """Rows of the SolutionMatrix holding the horizontal displacement of the monitored nodes."""
    return np.array([mesh.free_index(n, 0) for n in mesh.monitored_nodes])
