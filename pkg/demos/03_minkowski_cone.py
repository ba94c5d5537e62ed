"""The backward light cone of flat spacetime, traced numerically.

Every optical scalar has a closed form here: a = 1, tr chi = 2/s,
chihat = zeta = 0, v_t = s^2, and the Kirchhoff transport tensor is
A = J/s so r A = J.  Because the engine integrates the regularized
variables (tr chi - 2/s, v_t/s^2, s A), all of these hold to machine
precision, not just to integrator order.
"""

import numpy as np

from cmcnull import cone
from cmcnull.angular import DirectionGrid
from cmcnull.exact import MinkowskiSampler
from cmcnull.kirchhoff import kirchhoff_residual

grid = DirectionGrid(16, 32)
J = np.diag([1.0, 0.0, 0.0])
bundle = cone.trace_bundle(MinkowskiSampler(), -1.0, np.zeros(3), 0.4, 40,
                           grid, J=J)

print(f"{'t':>8} {'s':>8} {'r':>10} {'max|a-1|':>10} "
      f"{'max|s trchi/2 - 1|':>20} {'max|rA - J|':>12}")
for idx in (0, 9, 19, 29, 39):
    rec = bundle.records[idx]
    quad = cone.surface_quadrature(bundle, idx)
    ra = np.abs(rec["A"] * rec["s"][:, None, None] - J).max()
    print(f"{rec['t']:8.3f} {rec['s'][0]:8.4f} {quad['r']:10.6f} "
          f"{np.abs(rec['a'] - 1).max():10.2e} "
          f"{np.abs(rec['s'] * rec['trchi'] / 2 - 1).max():20.2e} "
          f"{ra:12.2e}")

rep = cone.cone_fluxes(bundle)
print(f"\ncurvature flux {rep.curvature_flux:.2e}, k-flux {rep.k_flux:.2e}")
print("comparability ratios (min, max):")
for name, (lo, hi) in rep.comparability.items():
    print(f"  {name:14s} ({lo:.12f}, {hi:.12f})")

kr = kirchhoff_residual(MinkowskiSampler(), -1.0, np.zeros(3), 0.3, 20,
                        DirectionGrid(8, 16), J)
print(f"\nKirchhoff budget with k = 0: lhs = {kr.lhs}, "
      f"all terms {max(abs(v) for v in kr.terms.values()):.1e}")
