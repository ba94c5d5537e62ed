"""Intrinsic Riemannian geometry of a slice.

Christoffel symbols, Ricci and scalar curvature, covariant derivatives,
Hessians, Laplace-Beltrami, the 3D curvature-decomposition identity and
div/curl of the second fundamental form.  Ricci is assembled directly
from Christoffel derivatives (the rank-4 tensor exists only through the
decomposition identity).  The volume form carries sqrt(det g); curl is
right-handed in coordinate order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    GridError,
    Lattice,
    ScalarField,
    SymTensor2Field,
    VectorField,
    fd_axis,
    mat_to_sym6,
    metric_pointwise,
    sym6_to_mat,
)

# packed storage for the 18 independent Christoffel components:
# leading index a, trailing packed symmetric pair (ij)
LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k, _s in ((0, 1, 2, 1), (1, 2, 0, 1), (2, 0, 1, 1),
                       (0, 2, 1, -1), (2, 1, 0, -1), (1, 0, 2, -1)):
    LEVI_CIVITA[_i, _j, _k] = _s


@dataclass(frozen=True)
class ChristoffelField:
    """Gamma^a_{ij}, packed (n,n,n,3,6); symmetric lower pair by storage."""

    lattice: Lattice
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != self.lattice.shape + (3, 6):
            raise GridError(f"christoffel data shape {self.data.shape} invalid")

    def mat(self) -> np.ndarray:
        """Full Gamma^a_{ij} as (n,n,n,3,3,3)."""
        return sym6_to_mat(self.data)


def metric_jet(g: SymTensor2Field):
    """(g_mat, g_inv, sqrt_det_g, dg) with dg[m] = partial_m g_ij."""
    gm, ginv, sg = metric_pointwise(g)
    h = g.lattice.spacing
    dg = np.stack([fd_axis(gm, ax, h, 1) for ax in range(3)])
    return gm, ginv, sg, dg


def christoffel(g: SymTensor2Field) -> ChristoffelField:
    """Levi-Civita connection of g via 4th-order finite differences."""
    _, ginv, _, dg = metric_jet(g)
    # Gamma^a_{ij} = 1/2 g^{ab} (d_i g_jb + d_j g_ib - d_b g_ij)
    gam = 0.5 * (
        np.einsum("...ab,i...jb->...aij", ginv, dg)
        + np.einsum("...ab,j...ib->...aij", ginv, dg)
        - np.einsum("...ab,b...ij->...aij", ginv, dg)
    )
    return ChristoffelField(g.lattice, mat_to_sym6(gam))


def _christoffel_mat(g: SymTensor2Field, gam: ChristoffelField | None) -> np.ndarray:
    if gam is None:
        gam = christoffel(g)
    return gam.mat()


def ricci(g: SymTensor2Field, gam: ChristoffelField | None = None) -> SymTensor2Field:
    """Ricci tensor R_ij of the slice metric."""
    gm = _christoffel_mat(g, gam)
    h = g.lattice.spacing
    dgam = np.stack([fd_axis(gm, ax, h, 1) for ax in range(3)])  # (m,...,a,i,j)
    # R_ij = d_a Gamma^a_{ij} - d_i Gamma^a_{aj} + Gamma^a_{ab} Gamma^b_{ij}
    #        - Gamma^a_{ib} Gamma^b_{aj}
    term1 = np.einsum("a...aij->...ij", dgam)
    term2 = np.einsum("i...aaj->...ij", dgam)
    trgam = np.einsum("...aab->...b", gm)
    term3 = np.einsum("...b,...bij->...ij", trgam, gm)
    term4 = np.einsum("...aib,...baj->...ij", gm, gm)
    ric = term1 - term2 + term3 - term4
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))  # symmetric up to FD noise
    return SymTensor2Field(g.lattice, mat_to_sym6(ric))


def scalar_curvature(g: SymTensor2Field, ric: SymTensor2Field | None = None) -> ScalarField:
    if ric is None:
        ric = ricci(g)
    _, ginv, _ = metric_pointwise(g)
    return ScalarField(g.lattice, np.einsum("...ij,...ij->...", ginv, ric.mat()))


def cov_deriv(T, g: SymTensor2Field, gam: ChristoffelField | None = None) -> np.ndarray:
    """Covariant derivative; returns raw array with the new index first.

    Scalar -> (3, grid); vector -> (3, grid, 3) as nabla_m V_i (index
    lowered position kept as stored); symmetric 2-tensor ->
    (3, grid, 3, 3) as nabla_m T_ij.
    """
    h = g.lattice.spacing
    if isinstance(T, ScalarField):
        return np.stack([fd_axis(T.data, ax, h, 1) for ax in range(3)])
    gm = _christoffel_mat(g, gam)
    if isinstance(T, VectorField):
        dV = np.stack([fd_axis(T.data, ax, h, 1) for ax in range(3)])
        corr = np.einsum("...ami,...a->m...i", gm, T.data)
        return dV - corr
    if isinstance(T, SymTensor2Field):
        tm = T.mat()
        dT = np.stack([fd_axis(tm, ax, h, 1) for ax in range(3)])
        corr1 = np.einsum("...ami,...aj->m...ij", gm, tm)
        corr2 = np.einsum("...amj,...ia->m...ij", gm, tm)
        return dT - corr1 - corr2
    raise GridError(f"unsupported field type {type(T)}")


def hessian(f: ScalarField, g: SymTensor2Field, gam: ChristoffelField | None = None) -> SymTensor2Field:
    """nabla_i nabla_j f, symmetric by construction."""
    from .grid import second_derivs

    h = g.lattice.spacing
    gm = _christoffel_mat(g, gam)
    dd = second_derivs(f.data, h)  # (i,j,grid)
    df = np.stack([fd_axis(f.data, ax, h, 1) for ax in range(3)])
    hess = np.moveaxis(dd, (0, 1), (-2, -1)) - np.einsum("...aij,a...->...ij", gm, df)
    return SymTensor2Field(g.lattice, mat_to_sym6(hess))


def laplace_beltrami(f: ScalarField, g: SymTensor2Field, gam: ChristoffelField | None = None) -> ScalarField:
    _, ginv, _ = metric_pointwise(g)
    hess = hessian(f, g, gam)
    return ScalarField(g.lattice, np.einsum("...ij,...ij->...", ginv, hess.mat()))


def riemann3_from_ricci(ric: SymTensor2Field, rs: ScalarField, g: SymTensor2Field) -> np.ndarray:
    """3D Riemann tensor R_{idac} rebuilt from Ricci (grid, 3,3,3,3).

    R_idac = g_ia R_dc + g_dc R_ia - R_ic g_da - R_da g_ic
             - 1/2 (g_ia g_dc - g_ic g_da) R
    """
    gm = g.mat()
    rm = ric.mat()
    R = rs.data
    out = (
        np.einsum("...ia,...dc->...idac", gm, rm)
        + np.einsum("...dc,...ia->...idac", gm, rm)
        - np.einsum("...ic,...da->...idac", rm, gm)
        - np.einsum("...da,...ic->...idac", rm, gm)
        - 0.5 * np.einsum("...,...ia,...dc->...idac", R, gm, gm)
        + 0.5 * np.einsum("...,...ic,...da->...idac", R, gm, gm)
    )
    return out


def div_curl_k(k: SymTensor2Field, g: SymTensor2Field,
               gam: ChristoffelField | None = None):
    """(div k)_i = g^{ab} nabla_a k_bi and the symmetrized covariant curl.

    curl k_lm = 1/2 (eps_l^{ij} nabla_i k_jm + eps_m^{ij} nabla_i k_jl)
    with eps the sqrt(det g)-weighted volume form, right-handed.
    """
    _, ginv, sg = metric_pointwise(g)
    nk = cov_deriv(k, g, gam)  # (m, grid, i, j)
    div = np.einsum("...ab,a...bi->...i", ginv, nk)
    # eps_l^{ij} = sqrt(g) [lij] g^{ii'} g^{jj'} with [.] the permutation symbol
    eps_up2 = np.einsum("lab,...ai,...bj->...lij", LEVI_CIVITA, ginv, ginv)
    curl = np.einsum("...,...lij,i...jm->...lm", sg, eps_up2, nk)
    curl = 0.5 * (curl + np.swapaxes(curl, -1, -2))
    return VectorField(g.lattice, div), SymTensor2Field(g.lattice, mat_to_sym6(curl))
