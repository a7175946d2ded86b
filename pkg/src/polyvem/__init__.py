"""Arbitrary-order virtual element method for diffusion-reaction problems on
polyhedral meshes."""
from .analysis import (ManufacturedProblem, StudyConfig, convergence_rate, diffusion_problem,
                       error_h1, error_l2, error_linf, patch_problem,
                       reaction_diffusion_problem, run_single, run_test_case)
from .assembly import (ConfigError, SolverError, assemble, build_dof_map, discretize,
                       interpolate_dirichlet, solve)
from .element import StabilizationConfig, compute_cell_operators
from .face import compute_face_space, compute_face_spaces
from .mesh import (Mesh, build_structured_cube_mesh, load_mesh, read_mesh, validate_mesh,
                   write_mesh)
from .voronoi import build_prismatic_voronoi_mesh

__version__ = "0.1.0"
