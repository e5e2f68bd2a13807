"""The test family stays below the mountain.

Truncated bubbles are placed at points z of the unit ball, with the
concentration interpolating between eps_bar at the center and the sphere.
Every quotient has to stay under 2^{2s/N} S, the level at which
compactness can fail. Expect a few minutes on one core.
"""
import numpy as np

from fracoron import FracParams, QuadratureConfig
from fracoron import estimates as est

p = FracParams(2, 0.5)
q = QuadratureConfig(rel_tol=1e-4)
zs = est.ball_samples(16, p.dim, seed=0)
res = est.rayleigh_gap(0.05, zs, p, q)

print(f"S = {res.reference_s:.6f}   threshold 2^(2s/N) S = {res.threshold:.6f}")
for z, v in zip(zs, res.quotients):
    print(f"  |z|={np.linalg.norm(z):.3f}  quotient {v:.6f}")
print(f"max {res.max_quotient:.6f}  below threshold: {res.passes}")
