"""The tensorial wave equation for k, verified term by term.

Box k (the 4D covariant wave operator on the zero-extended second
fundamental form, built from five-slice stacks) must equal the 14-term
slice formula on any solution.  On Kasner at tau = 1 both sides reduce
to diag(2/27, 2/27, -7/27); halving the stack spacing shrinks the
mismatch at 4th order, and flipping any single term destroys that.
"""

import numpy as np

from cmcnull import wavek
from cmcnull.exact import DEFAULT_KASNER, kasner_stack
from cmcnull.grid import Lattice

lat = Lattice(8)

print("closed form at tau = 1: Box k = diag(2/27, 2/27, -7/27)")
stack = kasner_stack(DEFAULT_KASNER, -1.0, 0.002, lat)
lhs = wavek.box_k_lhs(stack).mat()[0, 0, 0]
rhs = wavek.box_k_rhs(stack.center).mat()[0, 0, 0]
print("lhs diag:", np.diag(lhs))
print("rhs diag:", np.diag(rhs))

print("\nconvergence under stack-spacing halving:")
prev = None
for delta in (0.04, 0.02, 0.01):
    rep = wavek.box_k_residual(kasner_stack(DEFAULT_KASNER, -1.0, delta, lat))
    order = "" if prev is None else f"  order {np.log2(prev / rep.residual_linf):.2f}"
    print(f"  delta = {delta:5.3f}: residual {rep.residual_linf:.3e}{order}")
    prev = rep.residual_linf

print("\nper-term L2 sizes (the exported budget):")
rep = wavek.box_k_residual(kasner_stack(DEFAULT_KASNER, -1.0, 0.01, lat))
for name, val in sorted(rep.term_l2.items(), key=lambda kv: -kv[1]):
    print(f"  {name:14s} {val:.3e}")

print("\nregression tripwire: corrupt one cubic term and re-measure:")
for delta in (0.02, 0.01):
    bad = wavek.box_k_residual(kasner_stack(DEFAULT_KASNER, -1.0, delta, lat),
                               corrupt_term="kkk")
    print(f"  delta = {delta:5.3f}: residual {bad.residual_linf:.3e} (plateau)")
