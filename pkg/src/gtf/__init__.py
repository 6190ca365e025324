"""Generalized tensor fields on a chart: transport operators, smoothing kernels and the embedding of distributions."""

from .errors import *  # noqa: F401,F403
from .geometry import (ChartManifold, DiffeoExpr, FlowMap, VectorFieldExpr, christoffel_from_metric,
                       parse_manifold, random_polynomial_manifold)
from .geodesics import ConvexPatch, exp_map, find_convex_patch, geodesic_solve, jet_check_uv, log_map
from .transport import (TensorValue, TransportOperator, holonomy_angle, jet_check_transport, lie_transport,
                        parallel_transport, transport_matrix)
from .mollifiers import (RadialMollifier, SmoothingKernel, WindowDensity, build_radial_mollifier,
                         kernel_order_test, moment_residuals)
from .distributions import AxisPV, DeltaAt, LieDerivative, PulledBack, Regular, Sum, TestObject, pair, parse_distribution
from .embedding import (GeneralizedField, embed, embedded_field, injectivity_probe, iota_vs_sigma, regularize,
                        sigma_embed, weak_convergence_test)
from .calculus import (commutator_residual, connection_mismatch_residual, homothety_commutation,
                       lie_generalized, pullback_generalized, second_order_formula)

__version__ = "0.1.0"
