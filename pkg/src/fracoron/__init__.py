"""Fractional Sobolev energies of bubbles and a min-max solver for the
critical fractional problem on annuli."""
from .core import (AnnulusDomain, CapabilityError, DegenerateDomainError, FitDomainError,
                   FracoronError, FracParams, GridFunction, QuadratureConfig, QuadratureError,
                   ZeroFunctionError, c_ns, c_ns_closed_form, make_grid)
from .quadrature import (FieldFn, critical_norm, gagliardo_sq, inner, lp_integral, rayleigh,
                         sobolev_constant)
from .bubbles import (Bubble, Cutoff, TruncatedBubble, bubble_field, eval_bubble, eval_cutoff,
                      eval_truncated, h_interp, normalize, truncated_field)
from .estimates import (GapResult, ScalingReport, energy_excess, excess_plateau, fit_scaling,
                        norm_deficit, rayleigh_gap)
from .discrete import (MinMaxConfig, MinMaxReport, NonlocalForm, assemble_form, barycenter,
                       flow_step, functional_I, functional_N, functional_R, grad_N, grad_R,
                       minmax_solve, read_field, weak_residual, winding_degree, write_field)

__version__ = "0.1.0"
