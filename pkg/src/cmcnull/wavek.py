"""The tensorial wave equation for the second fundamental form.

Both sides are computed independently: the left side applies the 4D
covariant wave operator to the zero-extended k over a five-slice stack,
the right side evaluates the 14-term slice formula

  Box k_ij = -n^-3 ndot nab_i nab_j n + n^-2 nab_i nab_j ndot
             + 2 pi_{0a} (nab^a k_ij - nab_i k_j^a - nab_j k_i^a)
             - 2 Tr k R_ij - R k_ij + R Tr k g_ij
             + 2 (k_i^a R_aj + k_j^a R_ai) - 2 R_ab k^{ab} g_ij
             + n^-1 (2 k_i^a nab_a nab_j n + 2 k_j^a nab_a nab_i n
                     - Lap n k_ij - Tr k nab_i nab_j n)
             + 2 k_ia k^{ab} k_bj - pi_{0a} pi_0^a k_ij - n^-1 k_ij

term by term, each individually exportable (a 14-term identity is
undebuggable otherwise).  On solution data the two sides agree to the
discretization order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import geometry, jets
from .grid import ScalarField, SymTensor2Field, mat_to_sym6, metric_pointwise
from .state import AdmState, SpacetimeStack

TERM_NAMES = (
    "ndot_hess_n",      # -n^-3 ndot nab^2 n
    "hess_ndot",        # +n^-2 nab^2 ndot
    "pi0_gradk",        # +2 pi_0a (nab^a k - nab k - nab k)
    "trk_ric",          # -2 Tr k Ric
    "scalar_k",         # -R k
    "scalar_trk_g",     # +R Tr k g
    "k_ric",            # +2 (k Ric + Ric k)
    "ric_k_trace_g",    # -2 R_ab k^ab g
    "k_hess_n",         # +2 n^-1 (k nab^2 n + nab^2 n k)
    "lap_n_k",          # -n^-1 Lap n k
    "trk_hess_n",       # -n^-1 Tr k nab^2 n
    "kkk",              # +2 k k k
    "pi0sq_k",          # -pi_0a pi_0^a k
    "k_over_n",         # -n^-1 k
)


def boxk_rhs_terms(n, ndot, g, ginv, k, hess_n, hess_ndot, covdk, ric, dlogn):
    """All 14 right-side terms as a dict of (..., 3, 3) arrays.

    dlogn has the derivative slot last; covdk has it first; pi_0a is
    -nab_a log n.
    """
    trk = np.einsum("...ij,...ij->...", ginv, k)
    scalar = np.einsum("...ij,...ij->...", ginv, ric)
    kmix = np.einsum("...ia,...aj->...ij", ginv, k)  # k^i_j
    pi0 = -dlogn
    pi0_up = np.einsum("...ab,...b->...a", ginv, pi0)
    lap_n = np.einsum("...ij,...ij->...", ginv, hess_n)

    sl = (..., None, None)
    terms = {}
    terms["ndot_hess_n"] = -(ndot / n**3)[sl] * hess_n
    terms["hess_ndot"] = hess_ndot / (n**2)[sl]
    grad_up = np.einsum("...a,...aij->...ij", pi0_up, covdk)
    # nab_i k_j^a pi_0a = covdk[i, j, b] g^{ba} pi_0a
    mixed = np.einsum("...ijb,...ba,...a->...ij", covdk, ginv, pi0)
    terms["pi0_gradk"] = 2.0 * (grad_up - mixed - np.swapaxes(mixed, -1, -2))
    terms["trk_ric"] = -2.0 * trk[sl] * ric
    terms["scalar_k"] = -scalar[sl] * k
    terms["scalar_trk_g"] = (scalar * trk)[sl] * g
    kric = np.einsum("...ai,...aj->...ij", kmix, ric)
    terms["k_ric"] = 2.0 * (kric + np.swapaxes(kric, -1, -2))
    ric_k = np.einsum("...ab,...ab->...", ric, np.einsum("...ia,...jb,...ij->...ab", ginv, ginv, k))
    terms["ric_k_trace_g"] = -2.0 * ric_k[sl] * g
    khess = np.einsum("...ai,...aj->...ij", kmix, hess_n)
    terms["k_hess_n"] = (2.0 / n)[sl] * (khess + np.swapaxes(khess, -1, -2))
    terms["lap_n_k"] = -(lap_n / n)[sl] * k
    terms["trk_hess_n"] = -(trk / n)[sl] * hess_n
    terms["kkk"] = 2.0 * np.einsum("...ia,...ab,...bj->...ij", k, np.einsum("...ac,...cd,...db->...ab", ginv, k, ginv), k)
    pi0sq = np.einsum("...a,...a->...", pi0_up, pi0)
    terms["pi0sq_k"] = -pi0sq[sl] * k
    terms["k_over_n"] = -(1.0 / n)[sl] * k
    return terms


def box_k_rhs(state: AdmState, per_term: bool = False):
    """Right side of the wave equation on one slice; needs n_dot."""
    if state.n_dot is None:
        raise ValueError("box_k_rhs requires a state with n_dot")
    g, k, n = state.g, state.k, state.n
    gm, ginv, _ = metric_pointwise(g)
    gam = geometry.christoffel(g)
    hess_n = geometry.hessian(n, g, gam).mat()
    hess_ndot = geometry.hessian(state.n_dot, g, gam).mat()
    covdk = geometry.cov_deriv(k, g, gam)  # (m, grid, i, j)
    covdk = np.moveaxis(covdk, 0, -3)
    ric = geometry.ricci(g, gam).mat()
    dlogn = np.moveaxis(geometry.cov_deriv(n, g), 0, -1) / n.data[..., None]

    terms = boxk_rhs_terms(n.data, state.n_dot.data, gm, ginv, k.mat(),
                           hess_n, hess_ndot, covdk, ric, dlogn)
    total = sum(terms.values())
    rhs = SymTensor2Field(g.lattice, mat_to_sym6(total))
    if per_term:
        return rhs, {name: SymTensor2Field(g.lattice, mat_to_sym6(t))
                     for name, t in terms.items()}
    return rhs


def box_k_rhs_from_jet(jet: jets.Jet2) -> np.ndarray:
    """Pointwise right side from a sampler jet (cone integrands)."""
    if jet.ndot is None:
        raise ValueError("jet lacks lapse-rate data")
    gam3 = jets.christoffel3_from_jet(jet)
    hess_n = jets.hessian_n_from_jet(jet, gam3)
    hess_ndot = jets.hessian_ndot_from_jet(jet, gam3)
    covdk = jets.covdk_from_jet(jet, gam3)  # (..., m, i, j)
    ric = jets.ricci3_from_jet(jet)
    dlogn = jet.dn[..., 1:] / jet.n[..., None]
    terms = boxk_rhs_terms(jet.n, jet.ndot, jet.g, jet.ginv(), jet.k,
                           hess_n, hess_ndot, covdk, ric, dlogn)
    return sum(terms.values())


def box_k_lhs(stack: SpacetimeStack) -> SymTensor2Field:
    """Left side: 4D covariant wave operator via stack time differencing."""
    jet = curvature_jet(stack)
    box = jets.boxk_from_jet(jet)
    return SymTensor2Field(stack.lattice, mat_to_sym6(box))


def curvature_jet(stack: SpacetimeStack):
    from .curvature import stack_center_jet

    return stack_center_jet(stack, need_ddk=True)


def d0k_identity_residual(stack: SpacetimeStack, return_sides: bool = False):
    """Residual of D_0 k_ij = -n^-1 nab_i nab_j n + R_ij + Tr k k_ij."""
    from .curvature import stack_center_jet

    jet = stack_center_jet(stack, need_ddk=False)
    direct = jets.d0k_direct_from_jet(jet)
    formula = jets.d0k_formula_from_jet(jet)
    res = SymTensor2Field(stack.lattice, mat_to_sym6(direct - formula))
    if return_sides:
        return res, direct, formula
    return res


@dataclass
class BoxKReport:
    residual_l2: float
    residual_linf: float
    lhs_l2: float
    rhs_l2: float
    term_l2: dict
    n_pts: int
    delta: float
    t_center: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


def box_k_residual(stack: SpacetimeStack, corrupt_term: str | None = None) -> BoxKReport:
    """Full report: |lhs - rhs| norms plus per-term breakdown.

    corrupt_term flips the sign of one named right-side term; it exists
    so regression tests can confirm the residual stops converging when
    any single term is wrong.
    """
    center = stack.center
    if center.n_dot is None:
        raise ValueError("center slice needs n_dot for the right side")
    lhs = box_k_lhs(stack)
    rhs, terms = box_k_rhs(center, per_term=True)
    if corrupt_term is not None:
        if corrupt_term not in terms:
            raise KeyError(f"unknown term {corrupt_term!r}; know {list(terms)}")
        rhs = SymTensor2Field(
            center.lattice, rhs.data - 2.0 * terms[corrupt_term].data
        )
    res = SymTensor2Field(center.lattice, lhs.data - rhs.data)
    from .grid import field_norm

    g = center.g
    return BoxKReport(
        residual_l2=field_norm(res, g, "L2"),
        residual_linf=field_norm(res, g, "Linf"),
        lhs_l2=field_norm(lhs, g, "L2"),
        rhs_l2=field_norm(rhs, g, "L2"),
        term_l2={name: field_norm(t, g, "L2") for name, t in terms.items()},
        n_pts=center.lattice.n_pts,
        delta=stack.delta,
        t_center=center.t,
    )
