"""CMC-sliced vacuum spacetimes on a periodic box.

Library layout:

- grid, geometry: lattice fields, finite differences, slice geometry
- exact: Kasner / Minkowski closed forms and pointwise jet samplers
- elliptic, evolution: CMC lapse solves and the (g, k) time stepper
- curvature: E/H decomposition, Bel-Robinson energy, breakdown monitors,
  five-slice 4D curvature operators
- wavek: the tensorial wave equation residual for k
- angular, cone, kirchhoff: backward null-cone engine, transport of
  optical scalars, cone fluxes, and the representation-formula residual
- scenarios, cli: reproducible experiment runner
"""

__version__ = "0.1.0"
