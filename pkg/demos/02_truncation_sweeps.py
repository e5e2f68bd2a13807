"""What truncation costs.

A bubble U_{eps,0} is cut off by a radial phi that vanishes on B_{2 delta}
and outside B_4. As delta shrinks the energy excess settles on the plateau
left by the outer cutoff, and the L^p deficit goes to zero. The fitted
log-log slopes are printed next to the values the asymptotic regime predicts
(N - 2s for the excess above its plateau, N for the deficit).

On the standard sweep delta = eps/16 .. eps/2 the inner hole is not yet small
compared with eps, so the slopes fall short of the asymptotic values. The
deeper sweep at the end shows the slopes approaching them.
"""
import numpy as np
from scipy import integrate

from fracoron import Bubble, Cutoff, FitDomainError, FracParams, QuadratureConfig, eval_bubble, fit_scaling
from fracoron import estimates as est

p = FracParams(2, 0.5)
q = QuadratureConfig(rel_tol=1e-4)
eps = 0.05

def show(title, sweep, **kw):
    print(title)
    for d, v in sweep:
        print(f"  delta={d:.6f}  {v: .6e}")
    try:
        r = fit_scaling(sweep, **kw)
        print(f"  slope {r.fitted_slope:.3f}  r^2 {r.r_squared:.4f}")
    except FitDomainError as err:
        print(f"  no fit: {err}")

plateau = est.excess_plateau(Bubble(eps, (0.0, 0.0)), p, q)
print(f"excess plateau (outer cutoff only): {plateau:.6e}\n")
show("energy excess, delta = eps/2^k", est.excess_sweep(eps, (0.0, 0.0), p, 4, q), subtract_baseline=True)
show("\nnorm deficit, delta = eps/2^k", est.deficit_sweep(eps, (0.0, 0.0), p, 4, q))

# deep regime: delta << eps
deep = [(d, v - plateau) for d, v in est.excess_sweep(eps, (0.0, 0.0), p, 9, q)[:4]]
show("\nexcess above plateau, delta = eps/2^9 .. eps/2^6", deep)

# the outer ramp on [3, 4] leaves a delta-independent deficit; take it out radially
ramp = Cutoff(0.05)
def outer(r):
    U = eval_bubble(Bubble(eps, (0.0, 0.0)), np.array([[r, 0.0]]), p)[0]
    return 2 * np.pi * r * U ** p.p_crit * (1 - ramp.radial_value(np.array(r)) ** p.p_crit)
floor = integrate.quad(outer, 3.0, 4.0)[0] + integrate.quad(outer, 4.0, np.inf)[0]
print(f"\ndeficit floor from the outer ramp: {floor:.6e}")
deep = [(d, v - floor) for d, v in est.deficit_sweep(eps, (0.0, 0.0), p, 9, q)[:4]]
show("norm deficit above floor, delta = eps/2^9 .. eps/2^6", deep)
