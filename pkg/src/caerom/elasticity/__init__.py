"""Plane-stress finite elements and Newmark integration for shear walls under ground motion."""

from caerom.elasticity.dynamics import (
    GroundMotion,
    NewmarkConfig,
    load_ground_motion_csv,
    newmark_history,
    newmark_integrate,
    rayleigh_damping,
    save_ground_motion_csv,
    synthetic_accelerogram,
)
from caerom.elasticity.fem import ElasticityParams, assemble_system, element_strains, expand, plane_stress_matrix
from caerom.elasticity.mesh import Opening, WallGeometry, WallMesh, build_wall_mesh, reduced_wall_geometry
from caerom.elasticity.solver import monitored_rows, solve_wall

__all__ = [
    "ElasticityParams",
    "GroundMotion",
    "NewmarkConfig",
    "Opening",
    "WallGeometry",
    "WallMesh",
    "assemble_system",
    "build_wall_mesh",
    "element_strains",
    "expand",
    "load_ground_motion_csv",
    "monitored_rows",
    "newmark_history",
    "newmark_integrate",
    "plane_stress_matrix",
    "rayleigh_damping",
    "reduced_wall_geometry",
    "save_ground_motion_csv",
    "solve_wall",
    "synthetic_accelerogram",
]
