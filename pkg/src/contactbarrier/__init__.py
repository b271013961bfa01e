"""Geometric contact barrier potentials for deformable simulation.

The main entry points are :class:`GeometricContactPotential` (filtered,
adaptively localized barrier), :class:`IPCBarrierPotential` (unfiltered
log-barrier baseline), :class:`Simulator` (implicit Euler / static solves
with CCD-guarded projected Newton) and the scene helpers in
:mod:`contactbarrier.scenes`.
"""

from .dynamics import SimState, Simulator, SolverError, static_solve, step
from .filters import (ContactPair, DirectionalFactor, determine_inside_3d, g_e_edge, g_e_vertex, g_m,
                      gamma_ps, mollifier_M, tangent_frame)
from .kernels import barrier, bspline3, delta, h_eps, heaviside, ipc_log_barrier, mollify_h, mollify_hc
from .mesh import (DirichletBC, Material, MeshError, Scene, SceneFormatError, SurfaceMesh, load_scene,
                   rigid_transform)
from .params import PotentialParams
from .potential import (ContactError, GeometricContactPotential, IPCBarrierPotential, adapt_epsilon,
                        collect_terms, contact_force_magnitudes, energy, evaluate, gradient, hessian)
from .proximity import (broad_phase, ccd_max_step, closest_edge_edge, closest_point_edge,
                        closest_point_point, closest_point_triangle, intersects, min_distance)
from .validation import validate

__version__ = "0.1.0"
