"""Normalizing constant and the bubble quotient.

The constant C(N, s) is computed by quadrature and compared with its Gamma
closed form. Then the Rayleigh quotient of a few bubbles is compared with the
best Sobolev constant S: the quotient does not depend on the concentration
eps or the center z, and it equals S.
"""
from fracoron import (Bubble, FracParams, QuadratureConfig, bubble_field, c_ns, c_ns_closed_form,
                      rayleigh, sobolev_constant)

q = QuadratureConfig(rel_tol=1e-6)

print("C(N, s): quadrature vs closed form")
for n, s in ((1, 0.25), (2, 0.5), (3, 0.75)):
    p = FracParams(n, s)
    c, ref = c_ns(p), c_ns_closed_form(p)
    print(f"  N={n} s={s:<5} C={c:.15g}  rel err {abs(c - ref) / ref:.1e}")

p = FracParams(2, 0.5)
S = sobolev_constant(p)
print(f"\nbubble quotients for N=2, s=1/2 (S = {S:.10f})")
for eps, z in ((1.0, (0.0, 0.0)), (0.3, (0.5, -0.2)), (2.0, (1.0, 1.0))):
    R = rayleigh(bubble_field(Bubble(eps, z), p), p, q)
    print(f"  eps={eps:<4} z={z}  R={R:.10f}  rel err {abs(R - S) / S:.1e}")
