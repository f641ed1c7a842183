"""Chordal SLE simulation, Green's-function checks and l-adic covering estimates."""

from .errors import (DeadPointError, DomainError, HorizonError, ParamError, ResolutionError, SLEError,
                     StarvedError, SwallowedError, TargetSwallowedEarly, TraceFormatError, WalkerBudgetExceeded)
from .fractal_measure import (BigSquareEstimate, CoverReport, DimensionFit, LadicSquare, MeasureField,
                              big_square_prob_mc, box_dimension, build_cover, cover_trace, hausdorff_upper,
                              minkowski_mass, mu_field, occupancy)
from .loewner_core import (DrivingPath, PointTrajectory, Trace, Zipper, capacity_from_maps, evolve_point, hull_distance,
                           hcap_mc, hull_points, slit_step, trace)
from .observables import (GreenEstimate, GreenParams, c_star, green_h, green_hit_prob_mc, harmonic_measure_mc,
                          integrate_green, local_mart, stopped_martingale_mc)
from .report import emit_report
from .sle_sampler import (RadialTarget, SamplerConfig, chordal_driving, refine_near, rescale, sample_chordal,
                          sample_two_sided)
from .traceio import read_trace, write_trace

__version__ = "0.1.0"
