"""Projection-free online convex optimization with gauge projections and Barrier-ONS."""
from ._accel import backend
from .barrier_ons import (BarrierONS, BarrierOnsParams, FeasibilityFault, bons_init, bons_update,
                          bons_update_reference, ftrl_minimize, predict, reference_init)
from .gauge import GaugeEstimate, gauge_dist, gauge_project
from .geometry import (ApproximateComparatorRequired, ConvexBody, DimensionError, anisotropic_box,
                       ball, box, ellipsoid, exact_gauge, l1ball, polytope, sandwich_radii,
                       separate, support, symmetric_box)
from .harness import ConfigError, emit, regret, run_experiment
from .losses import LossStream, next_subgradient, offline_optimum
from .reduction import (GaugeOCO, OcoParams, RoundRecord, RunTrace, baseline_ogd_ball_step,
                        oco_step, run_oco, surrogate_gradient, tune_oco)
from .stochastic import BudgetExceeded, ScoParams, run_sco, solve_to_eps, tune_sco

__version__ = "0.1.0"
