"""Weil-Petersson geodesics between conformal weldings of planar shapes.

The package is organized in layers:

- ``circle``: scalar primitives on S^1 (Green's function, kernel basis).
- ``wp_metric``: discrete WP norms, minimal-norm horizontal lifts, momenta.
- ``temporal``: time quadrature and the symmetric velocity-to-particle map.
- ``geodesic``: path energy, gradients, path metric, projected descent.
- ``welding``: zipper-based conformal welding and shape generators.
- ``cli``: the ``wpg`` command line tool.
"""

from .circle import (
    green_function,
    green_function_derivative,
    kernel_basis,
    kernel_basis_derivative,
    normalize_angles,
)
from .wp_metric import (
    Basis,
    FourierBasis,
    GreensBasis,
    LiftResult,
    build_gram,
    lift_eval,
    lift_eval_derivative,
    minimal_lift,
    norm_particle_gradient,
    wp_inner,
)
from .temporal import QuadratureScheme, build_quadrature, endpoint_residual, particles_from_velocities
from .geodesic import (GeodesicResult, PathState, minimize_path,
                       transfer_velocity, vertex_angle)
from .welding import (
    Shape,
    WeldingMap,
    compute_weld,
    interpolate_weld,
    invert_weld,
    make_shape,
    moebius_boundary,
    particle_labels,
    reparameterize_weld,
    weld_particles,
)

__version__ = "0.1.0"

__all__ = [
    "green_function",
    "green_function_derivative",
    "kernel_basis",
    "kernel_basis_derivative",
    "normalize_angles",
    "Basis",
    "GreensBasis",
    "FourierBasis",
    "LiftResult",
    "build_gram",
    "minimal_lift",
    "lift_eval",
    "lift_eval_derivative",
    "wp_inner",
    "norm_particle_gradient",
    "QuadratureScheme",
    "build_quadrature",
    "particles_from_velocities",
    "endpoint_residual",
    "PathState",
    "GeodesicResult",
    "minimize_path",
    "transfer_velocity",
    "vertex_angle",
    "Shape",
    "WeldingMap",
    "compute_weld",
    "invert_weld",
    "interpolate_weld",
    "make_shape",
    "moebius_boundary",
    "particle_labels",
    "reparameterize_weld",
    "weld_particles",
]
