"""Blinking spherical tumbler flow as a linked twist map."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (AlphaTooLarge, DefectiveMatrixError, DomainError, EmptyIntersection, NoBulkEntry,
                     NoEllipticPoint, NonSymmetricParams, NotHyperbolic, StencilError, StencilOutsideDomain,
                     StencilStraddlesInterface, TumblerError)
from .geometry import (Axis, Point3, ProtocolParams, RegionTag, classify_region, flowing_layer_depth,
                       streamfunction)
from .manifolds import (BranchSign, ConnectionKind, ConnectionResult, FundamentalDomain, ManifoldKind,
                        ManifoldTrace, connection_sweep, detect_connection, make_fundamental_domain,
                        trace_manifold)
from .period_one import (Branch, BowlCapConstants, PeriodOneSample, ShellFixedPoints, Stability,
                         bowl_constant, bowl_depth_grid, cap_constant, optimal_angles, sample_period_one_curves,
                         shell_existence_window, shell_fixed_points)
from .trajectory import (CrossSectionState, EventKind, TrajectoryEvent, advance_points, advance_single_axis,
                         advance_single_axis_backward, entry_point_from_bulk, entry_point_from_layer,
                         streamline_period, trajectory_events)
from .transport import (KamRing, PoincareRecord, SwitchAnalysis, analyze_switch, kam_island_boundary,
                        kam_tube_cloud, radial_history, run_poincare, seed_transect)
from .twistmap import (EigenDecomposition, Jacobian3, MapOrder, StabilityClass, apply_inverse_map, apply_map,
                       eigen_3x3, iterate, jacobian_fd)
