"""Voltage profiles of radial distribution feeders.

Nonlinear boundary-value solution, regular perturbation series in the
loading magnitude, and the EV-charging impact derived from it.
"""
from .density import (Category, CoarseGrainSpec, DensityProfile, PointInjection, coarse_grain,
                      split, total_mass)
from .errors import (BracketFailure, FeederflowError, GridMismatch, MissingLowerOrder,
                     NonConvergence, VoltageCollapse)
from .metrics import (ProfileDiff, ReportRow, SweepRow, convergence_report, diff, impact_sweep,
                      l2_like, linf_like)
from .network import (FeederNetwork, Grid, InvalidNetwork, Node, NodeKind, Segment, Violation,
                      discretize, validate)
from .nonlinear import SolveOptions, residual, shooting_oracle, solve_tpbv
from .perturbation import (ImpactResult, ImpactSpec, OrderFields, PerturbationSeries,
                           ShareMismatch, assemble, ev_impact, expand, solve_order,
                           solve_vw_order)
from .profile import Profile

__version__ = "0.1.0"
