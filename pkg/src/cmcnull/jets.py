"""Second-order spacetime jets and the 4D tensor algebra built on them.

A `Jet2` carries values and first/second coordinate derivatives of the
slice data (lapse n, metric g_ij, second fundamental form k_ij, and
optionally the lapse rate) at a batch of events sharing one time
coordinate.  The batch shape is arbitrary: a full grid for stack-based
operators, or a list of scattered points for cone work.

Coordinate convention: index 0 is t, 1..3 are the transported spatial
coordinates, and the line element is -n^2 dt^2 + g_ij dx^i dx^j.  All
functions are pure numpy einsum algebra over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Jet2:
    """Values plus first/second derivatives at a batch of events.

    Shapes (B = batch shape):
      n: B            dn: B+(4,)        ddn: B+(4,4)
      g: B+(3,3)      dg: B+(4,3,3)     ddg: B+(4,4,3,3)
      k: B+(3,3)      dk: B+(4,3,3)     ddk: B+(4,4,3,3) or None
      ndot: B or None    dndot: B+(3,) or None    ddndot: B+(3,3) or None
    ddk is only needed by the wave-operator path; ndot jets only by the
    wave-equation right side.
    """

    n: np.ndarray
    dn: np.ndarray
    ddn: np.ndarray
    g: np.ndarray
    dg: np.ndarray
    ddg: np.ndarray
    k: np.ndarray
    dk: np.ndarray
    ddk: np.ndarray | None = None
    ndot: np.ndarray | None = None
    dndot: np.ndarray | None = None
    ddndot: np.ndarray | None = None

    @property
    def batch(self) -> tuple:
        return self.n.shape

    def ginv(self) -> np.ndarray:
        return np.linalg.inv(self.g)


# ---------------------------------------------------------------------------
# 4D metric assembly
# ---------------------------------------------------------------------------

def g4_from_jet(jet: Jet2):
    """(g4, dg4, ddg4) of -n^2 dt^2 + g_ij dx^i dx^j."""
    B = jet.batch
    g4 = np.zeros(B + (4, 4))
    g4[..., 0, 0] = -jet.n**2
    g4[..., 1:, 1:] = jet.g

    dg4 = np.zeros(B + (4, 4, 4))
    dg4[..., :, 0, 0] = -2.0 * jet.n[..., None] * jet.dn
    dg4[..., :, 1:, 1:] = jet.dg

    ddg4 = np.zeros(B + (4, 4, 4, 4))
    ddg4[..., :, :, 0, 0] = -2.0 * (
        np.einsum("...a,...b->...ab", jet.dn, jet.dn) + jet.n[..., None, None] * jet.ddn
    )
    ddg4[..., :, :, 1:, 1:] = jet.ddg
    return g4, dg4, ddg4


def k4_from_jet(jet: Jet2, need_second: bool = False):
    """Extension of k by zero time components, with its coordinate jets."""
    B = jet.batch
    k4 = np.zeros(B + (4, 4))
    k4[..., 1:, 1:] = jet.k
    dk4 = np.zeros(B + (4, 4, 4))
    dk4[..., :, 1:, 1:] = jet.dk
    if not need_second:
        return k4, dk4, None
    if jet.ddk is None:
        raise ValueError("jet lacks second derivatives of k")
    ddk4 = np.zeros(B + (4, 4, 4, 4))
    ddk4[..., :, :, 1:, 1:] = jet.ddk
    return k4, dk4, ddk4


def inv4(g4: np.ndarray) -> np.ndarray:
    return np.linalg.inv(g4)


def christoffel4(g4inv: np.ndarray, dg4: np.ndarray) -> np.ndarray:
    """Gamma^lam_{mu nu}, shape B+(4,4,4)."""
    return 0.5 * (
        np.einsum("...ls,...msn->...lmn", g4inv, dg4)
        + np.einsum("...ls,...nsm->...lmn", g4inv, dg4)
        - np.einsum("...ls,...smn->...lmn", g4inv, dg4)
    )


def dchristoffel4(g4inv: np.ndarray, dg4: np.ndarray, ddg4: np.ndarray) -> np.ndarray:
    """partial_rho Gamma^lam_{mu nu}, shape B+(4,4,4,4) (rho first)."""
    dginv = -np.einsum("...la,...rab,...bs->...rls", g4inv, dg4, g4inv)
    sym = (
        np.einsum("...rmsn->...rsmn", ddg4)
        + np.einsum("...rnsm->...rsmn", ddg4)
        - np.einsum("...rsmn->...rsmn", ddg4)
    )
    first = (
        np.einsum("...rls,...msn->...rlmn", dginv, dg4)
        + np.einsum("...rls,...nsm->...rlmn", dginv, dg4)
        - np.einsum("...rls,...smn->...rlmn", dginv, dg4)
    )
    return 0.5 * (first + np.einsum("...ls,...rsmn->...rlmn", g4inv, sym))


def riemann4(gam4: np.ndarray, dgam4: np.ndarray, g4: np.ndarray) -> np.ndarray:
    """Fully lowered R_{lam sig mu nu}, shape B+(4,4,4,4).

    R^lam_{sig mu nu} = d_mu Gam^lam_{nu sig} - d_nu Gam^lam_{mu sig}
                        + Gam^lam_{mu rho} Gam^rho_{nu sig}
                        - Gam^lam_{nu rho} Gam^rho_{mu sig}
    """
    rup = (
        np.einsum("...mlns->...lsmn", dgam4)
        - np.einsum("...nlms->...lsmn", dgam4)
        + np.einsum("...lmr,...rns->...lsmn", gam4, gam4)
        - np.einsum("...lnr,...rms->...lsmn", gam4, gam4)
    )
    return np.einsum("...la,...asmn->...lsmn", g4, rup)


def ricci4(gam4: np.ndarray, dgam4: np.ndarray) -> np.ndarray:
    """Ric_{sig nu} = R^mu_{sig mu nu} without forming the rank-4 tensor."""
    return (
        np.einsum("...mmns->...sn", dgam4)
        - np.einsum("...nmms->...sn", dgam4)
        + np.einsum("...mmr,...rns->...sn", gam4, gam4)
        - np.einsum("...mnr,...rms->...sn", gam4, gam4)
    )


def riemann4_from_jet(jet: Jet2) -> np.ndarray:
    g4, dg4, ddg4 = g4_from_jet(jet)
    g4i = inv4(g4)
    gam = christoffel4(g4i, dg4)
    dgam = dchristoffel4(g4i, dg4, ddg4)
    return riemann4(gam, dgam, g4)


def hodge_dual_first(r4: np.ndarray, g4: np.ndarray) -> np.ndarray:
    """Left Hodge dual on the first index pair, right-handed (t,x,y,z).

    *R_{ab cd} = 1/2 eps_{ab}^{mn} R_{mn cd}, eps_{txyz} = sqrt(-det g4).
    """
    perm = np.zeros((4, 4, 4, 4))
    from itertools import permutations

    base = (0, 1, 2, 3)
    for p in permutations(base):
        sign = _perm_sign(p)
        perm[p] = sign
    sdet = np.sqrt(-np.linalg.det(g4))
    g4i = inv4(g4)
    eps_up2 = np.einsum("...,abmn,...mc,...nd->...abcd", sdet, perm, g4i, g4i)
    return 0.5 * np.einsum("...abmn,...mncd->...abcd", eps_up2, r4)


def _perm_sign(p) -> int:
    p = list(p)
    sign = 1
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


# ---------------------------------------------------------------------------
# the covariant wave operator on the zero-extended second fundamental form
# ---------------------------------------------------------------------------

def boxk_from_jet(jet: Jet2) -> np.ndarray:
    """Box k_ij = g^{mu nu} D_mu D_nu k_ij (spatial block), B+(3,3).

    k is extended by k_{0 alpha} = 0; both covariant derivatives act in
    4D with the full Christoffels of the sliced metric.
    """
    g4, dg4, ddg4 = g4_from_jet(jet)
    g4i = inv4(g4)
    gam = christoffel4(g4i, dg4)
    dgam = dchristoffel4(g4i, dg4, ddg4)
    k4, dk4, ddk4 = k4_from_jet(jet, need_second=True)

    # W_{nu alpha beta} = D_nu k_{alpha beta}
    w = (
        dk4
        - np.einsum("...lna,...lb->...nab", gam, k4)
        - np.einsum("...lnb,...al->...nab", gam, k4)
    )
    # partial_mu W
    dw = (
        ddk4
        - np.einsum("...mlna,...lb->...mnab", dgam, k4)
        - np.einsum("...lna,...mlb->...mnab", gam, dk4)
        - np.einsum("...mlnb,...al->...mnab", dgam, k4)
        - np.einsum("...lnb,...mal->...mnab", gam, dk4)
    )
    ddk_cov = (
        dw
        - np.einsum("...lmn,...lab->...mnab", gam, w)
        - np.einsum("...lma,...nlb->...mnab", gam, w)
        - np.einsum("...lmb,...nal->...mnab", gam, w)
    )
    box = np.einsum("...mn,...mnab->...ab", g4i, ddk_cov)
    return box[..., 1:, 1:]


# ---------------------------------------------------------------------------
# slice (3D) geometry evaluated pointwise from the jet
# ---------------------------------------------------------------------------

def christoffel3_from_jet(jet: Jet2) -> np.ndarray:
    gi = jet.ginv()
    dgs = jet.dg[..., 1:, :, :]  # spatial derivative slots
    return 0.5 * (
        np.einsum("...ab,...ijb->...aij", gi, dgs)
        + np.einsum("...ab,...jib->...aij", gi, dgs)
        - np.einsum("...ab,...bij->...aij", gi, dgs)
    )


def dchristoffel3_from_jet(jet: Jet2) -> np.ndarray:
    """partial_m Gamma^a_{ij} (spatial), B+(3,3,3,3), m first."""
    gi = jet.ginv()
    dgs = jet.dg[..., 1:, :, :]
    ddgs = jet.ddg[..., 1:, 1:, :, :]
    dginv = -np.einsum("...ab,...mbc,...cd->...mad", gi, dgs, gi)
    sym = (
        np.einsum("...mibj->...mbij", ddgs)
        + np.einsum("...mjbi->...mbij", ddgs)
        - np.einsum("...mbij->...mbij", ddgs)
    )
    return 0.5 * (
        np.einsum("...mab,...ibj->...maij", dginv, dgs)
        + np.einsum("...mab,...jbi->...maij", dginv, dgs)
        - np.einsum("...mab,...bij->...maij", dginv, dgs)
        + np.einsum("...ab,...mbij->...maij", gi, sym)
    )


def ricci3_from_jet(jet: Jet2) -> np.ndarray:
    gam = christoffel3_from_jet(jet)
    dgam = dchristoffel3_from_jet(jet)
    ric = (
        np.einsum("...aaij->...ij", dgam)
        - np.einsum("...iaaj->...ij", dgam)
        + np.einsum("...aab,...bij->...ij", gam, gam)
        - np.einsum("...aib,...baj->...ij", gam, gam)
    )
    return 0.5 * (ric + np.swapaxes(ric, -1, -2))


def hessian_n_from_jet(jet: Jet2, gam3: np.ndarray | None = None) -> np.ndarray:
    """Spatial covariant Hessian nabla_i nabla_j n."""
    if gam3 is None:
        gam3 = christoffel3_from_jet(jet)
    return jet.ddn[..., 1:, 1:] - np.einsum("...aij,...a->...ij", gam3, jet.dn[..., 1:])


def hessian_ndot_from_jet(jet: Jet2, gam3: np.ndarray | None = None) -> np.ndarray:
    if jet.ddndot is None:
        raise ValueError("jet lacks lapse-rate second derivatives")
    if gam3 is None:
        gam3 = christoffel3_from_jet(jet)
    return jet.ddndot - np.einsum("...aij,...a->...ij", gam3, jet.dndot)


def covdk_from_jet(jet: Jet2, gam3: np.ndarray | None = None) -> np.ndarray:
    """Slice-covariant nabla_m k_ij, B+(3,3,3), m first."""
    if gam3 is None:
        gam3 = christoffel3_from_jet(jet)
    dks = jet.dk[..., 1:, :, :]
    return (
        dks
        - np.einsum("...ami,...aj->...mij", gam3, jet.k)
        - np.einsum("...amj,...ia->...mij", gam3, jet.k)
    )


def d0k_direct_from_jet(jet: Jet2) -> np.ndarray:
    """Projected D_0 k_ij = n^{-1} dt(k_ij) + 2 k_ia k^a_j."""
    gi = jet.ginv()
    kmix = np.einsum("...ab,...bj->...aj", gi, jet.k)
    return jet.dk[..., 0, :, :] / jet.n[..., None, None] + 2.0 * np.einsum(
        "...ia,...aj->...ij", jet.k, kmix
    )


def d0k_formula_from_jet(jet: Jet2) -> np.ndarray:
    """-n^{-1} nabla_i nabla_j n + R_ij + Tr k k_ij."""
    gam3 = christoffel3_from_jet(jet)
    hess = hessian_n_from_jet(jet, gam3)
    ric = ricci3_from_jet(jet)
    trk = np.einsum("...ij,...ij->...", jet.ginv(), jet.k)
    return -hess / jet.n[..., None, None] + ric + trk[..., None, None] * jet.k
