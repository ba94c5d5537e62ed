"""Spacetime curvature diagnostics on CMC slices.

Electric/magnetic Weyl parts come from slice data (E = Ric - k k +
Tr k k, H = curl k); the 4D Riemann route exists independently through
five-slice stacks and the two are cross-checked in tests.  The Hodge
dual is taken on the first index pair with right-handed (t, x, y, z)
orientation; sigma and H flip sign under the opposite choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .grid import (
    ScalarField,
    SymTensor2Field,
    fd_axis,
    mat_to_sym6,
    metric_pointwise,
    volume_integral,
)
from .jets import (
    Jet2,
    christoffel4,
    dchristoffel4,
    g4_from_jet,
    hodge_dual_first,
    inv4,
    ricci4,
    riemann4,
)
from .state import AdmState, SpacetimeStack

# 5-point centered stencil weights at uniform spacing (order 4)
_D1_W = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2_W = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


@dataclass(frozen=True)
class WeylEH:
    E: SymTensor2Field
    H: SymTensor2Field
    belrobinson_density: ScalarField


@dataclass
class BreakdownMonitor:
    """Running L^1_t L^inf_x accumulator of the deformation tensor."""

    k0_accum: float = 0.0
    times: list = field(default_factory=list)
    k_inf: list = field(default_factory=list)
    dlogn_inf: list = field(default_factory=list)
    q_history: list = field(default_factory=list)


def deformation_sup(state: AdmState):
    """(sup |k|_g, sup |grad log n|_g, sup n|pi|) on the slice.

    pi has components (0, -grad log n, k); its pointwise norm in the
    T-Riemannian metric is sqrt(|k|^2 + |grad log n|^2).
    """
    _, ginv, _ = metric_pointwise(state.g)
    km = state.k.mat()
    kmix = np.einsum("...ia,...aj->...ij", ginv, km)
    k2 = np.einsum("...ij,...ji->...", kmix, kmix)
    h = state.lattice.spacing
    logn = np.log(state.n.data)
    dl = np.stack([fd_axis(logn, ax, h, 1) for ax in range(3)])
    dl2 = np.einsum("...ab,a...,b...->...", ginv, dl, dl)
    pi_inf = float(np.sqrt((k2 + dl2).max()))
    npi_inf = float(np.sqrt(((k2 + dl2) * state.n.data**2).max()))
    return float(np.sqrt(k2.max())), float(np.sqrt(dl2.max())), pi_inf, npi_inf


def electric_magnetic(state: AdmState) -> WeylEH:
    """E from the Gauss-equation identity, H = curl k."""
    g, k = state.g, state.k
    gm, ginv, _ = metric_pointwise(g)
    km = k.mat()
    gam = geometry.christoffel(g)
    ric = geometry.ricci(g, gam).mat()
    kk = np.einsum("...ia,...ab,...bj->...ij", km, ginv, km)
    trk = np.einsum("...ij,...ij->...", ginv, km)
    e_mat = ric - kk + trk[..., None, None] * km
    E = SymTensor2Field(g.lattice, mat_to_sym6(e_mat))
    _, H = geometry.div_curl_k(k, g, gam)

    e2 = np.einsum("...ia,...jb,...ij,...ab->...", ginv, ginv, e_mat, e_mat)
    hm = H.mat()
    h2 = np.einsum("...ia,...jb,...ij,...ab->...", ginv, ginv, hm, hm)
    return WeylEH(E, H, ScalarField(g.lattice, e2 + h2))


def belrobinson_energy(state: AdmState, eh: WeylEH | None = None) -> float:
    """Q(t) = integral of |E|^2 + |H|^2 over the slice."""
    if eh is None:
        eh = electric_magnetic(state)
    _, _, sg = metric_pointwise(state.g)
    return volume_integral(eh.belrobinson_density, ScalarField(state.lattice, sg))


def gronwall_check(times, q_history, npi_inf_history) -> dict:
    """Q(t) <= Q(t0) exp(12 int |n pi|_inf dt'), checked at every time."""
    times = np.asarray(times, dtype=float)
    q = np.asarray(q_history, dtype=float)
    npi = np.asarray(npi_inf_history, dtype=float)
    if not (times.shape == q.shape == npi.shape):
        raise ValueError("histories not aligned")
    accum = np.concatenate([[0.0], np.cumsum(0.5 * (npi[1:] + npi[:-1]) * np.diff(times))])
    bound = q[0] * np.exp(12.0 * accum)
    ok = q <= bound
    first_bad = None if np.all(ok) else float(times[np.argmin(ok)])
    return {"bound": bound, "satisfied": bool(np.all(ok)), "first_violation": first_bad}


def breakdown_monitor_update(mon: BreakdownMonitor, state: AdmState,
                             q_value: float | None = None) -> BreakdownMonitor:
    """Accumulate int (|k|_inf + |grad log n|_inf) dt by trapezoid."""
    k_inf, dlogn_inf, _, _ = deformation_sup(state)
    if mon.times:
        dt = state.t - mon.times[-1]
        if dt <= 0:
            raise ValueError("monitor updates must move forward in time")
        prev = mon.k_inf[-1] + mon.dlogn_inf[-1]
        cur = k_inf + dlogn_inf
        mon.k0_accum += 0.5 * (prev + cur) * dt
    mon.times.append(state.t)
    mon.k_inf.append(k_inf)
    mon.dlogn_inf.append(dlogn_inf)
    if q_value is not None:
        mon.q_history.append(q_value)
    return mon


# ---------------------------------------------------------------------------
# five-slice stacks: centered time differencing for 4D operators
# ---------------------------------------------------------------------------

def _time_derivs(stack: SpacetimeStack, extract):
    """(d/dt F, d^2/dt^2 F) at the center slice by 5-point stencils."""
    vals = [extract(s) for s in stack.slices]
    d = stack.delta
    d1 = sum(w * v for w, v in zip(_D1_W, vals)) / d
    d2 = sum(w * v for w, v in zip(_D2_W, vals)) / d**2
    return d1, d2


def stack_center_jet(stack: SpacetimeStack, need_ddk: bool = True,
                     need_ndot: bool = False) -> Jet2:
    """Grid-shaped second-order jet at the center slice.

    Time derivatives come from the stack stencils, spatial ones from the
    4th-order grid stencils, mixed ones from spatial derivatives of the
    time-stencil fields.
    """
    c = stack.center
    lat = stack.lattice
    h = lat.spacing
    B = lat.shape

    def full_jet(value, dt_value, dtt_value):
        comp = value.shape[len(B):]
        dv = np.zeros(B + (4,) + comp)
        ddv = np.zeros(B + (4, 4) + comp)
        dv[(..., 0) + (slice(None),) * len(comp)] = dt_value
        sp1 = np.stack([fd_axis(value, ax, h, 1) for ax in range(3)])
        for i in range(3):
            dv[(..., 1 + i) + (slice(None),) * len(comp)] = sp1[i]
        ddv[(..., 0, 0) + (slice(None),) * len(comp)] = dtt_value
        for i in range(3):
            mixed = fd_axis(dt_value, i, h, 1)
            ddv[(..., 0, 1 + i) + (slice(None),) * len(comp)] = mixed
            ddv[(..., 1 + i, 0) + (slice(None),) * len(comp)] = mixed
            ddv[(..., 1 + i, 1 + i) + (slice(None),) * len(comp)] = fd_axis(value, i, h, 2)
            for j in range(i + 1, 3):
                m2 = fd_axis(sp1[i], j, h, 1)
                ddv[(..., 1 + i, 1 + j) + (slice(None),) * len(comp)] = m2
                ddv[(..., 1 + j, 1 + i) + (slice(None),) * len(comp)] = m2
        return dv, ddv

    n_t, n_tt = _time_derivs(stack, lambda s: s.n.data)
    dn, ddn = full_jet(c.n.data, n_t, n_tt)
    g_t, g_tt = _time_derivs(stack, lambda s: s.g.mat())
    dg, ddg = full_jet(c.g.mat(), g_t, g_tt)
    k_t, k_tt = _time_derivs(stack, lambda s: s.k.mat())
    dk, ddk = full_jet(c.k.mat(), k_t, k_tt)

    jet = Jet2(n=c.n.data, dn=dn, ddn=ddn, g=c.g.mat(), dg=dg, ddg=ddg,
               k=c.k.mat(), dk=dk, ddk=ddk if need_ddk else None)
    if need_ndot:
        if c.n_dot is None:
            raise ValueError("center slice lacks n_dot")
        jet.ndot = c.n_dot.data
        sp1 = np.stack([fd_axis(c.n_dot.data, ax, h, 1) for ax in range(3)])
        jet.dndot = np.moveaxis(sp1, 0, -1)
        from .grid import second_derivs

        jet.ddndot = np.moveaxis(second_derivs(c.n_dot.data, h), (0, 1), (-2, -1))
    return jet


def spacetime_christoffel(stack: SpacetimeStack) -> np.ndarray:
    """4D Christoffels Gamma^lam_{mu nu} at the center slice."""
    jet = stack_center_jet(stack, need_ddk=False)
    g4, dg4, _ = g4_from_jet(jet)
    return christoffel4(inv4(g4), dg4)


def spacetime_riemann(stack: SpacetimeStack, return_jet: bool = False):
    """Fully lowered 4D Riemann tensor at the center slice."""
    jet = stack_center_jet(stack, need_ddk=False)
    g4, dg4, ddg4 = g4_from_jet(jet)
    g4i = inv4(g4)
    gam = christoffel4(g4i, dg4)
    dgam = dchristoffel4(g4i, dg4, ddg4)
    r4 = riemann4(gam, dgam, g4)
    if return_jet:
        return r4, jet
    return r4


def vacuum_residual(stack: SpacetimeStack) -> float:
    """sup norm of the 4D Ricci tensor computed from the stack."""
    jet = stack_center_jet(stack, need_ddk=False)
    g4, dg4, ddg4 = g4_from_jet(jet)
    g4i = inv4(g4)
    gam = christoffel4(g4i, dg4)
    dgam = dchristoffel4(g4i, dg4, ddg4)
    ric = ricci4(gam, dgam)
    return float(np.abs(ric).max())


def eh_from_riemann4(r4: np.ndarray, g4: np.ndarray):
    """(E_ij, H_ij) as slice tensors from the 4D Riemann tensor.

    E_ij = R_{mu i nu j} T^mu T^nu and H_ij the same contraction of the
    left dual, with T = n^{-1} dt the unit normal.
    """
    n = np.sqrt(-g4[..., 0, 0])
    T = np.zeros(g4.shape[:-1])
    T[..., 0] = 1.0 / n
    E = np.einsum("...manb,...m,...n->...ab", r4, T, T)[..., 1:, 1:]
    rdual = hodge_dual_first(r4, g4)
    H = np.einsum("...manb,...m,...n->...ab", rdual, T, T)[..., 1:, 1:]
    return E, H


def riemann_norm2_gt(r4: np.ndarray, g4: np.ndarray) -> np.ndarray:
    """R_{abcd} R_{a'b'c'd'} contracted with the Riemannian metric g_T.

    g_T^{mu nu} = g^{mu nu} + 2 T^mu T^nu.  In vacuum this equals
    8 (|E|^2 + |H|^2).
    """
    n = np.sqrt(-g4[..., 0, 0])
    T = np.zeros(g4.shape[:-1])
    T[..., 0] = 1.0 / n
    gt = inv4(g4) + 2.0 * np.einsum("...m,...n->...mn", T, T)
    return np.einsum(
        "...abcd,...efgh,...ae,...bf,...cg,...dh->...", r4, r4, gt, gt, gt, gt
    )


def bel_robinson_tttt(r4: np.ndarray, g4: np.ndarray) -> np.ndarray:
    """Q[R](T,T,T,T) from the definition of the Bel-Robinson tensor."""
    n = np.sqrt(-g4[..., 0, 0])
    T = np.zeros(g4.shape[:-1])
    T[..., 0] = 1.0 / n
    g4i = inv4(g4)
    rd = hodge_dual_first(r4, g4)

    def q_part(R):
        # R_{a l g m} T^a T^g with free (l, m), then contract the pair
        rtt = np.einsum("...algm,...a,...g->...lm", R, T, T)
        return np.einsum("...lm,...pq,...lp,...mq->...", rtt, rtt, g4i, g4i)

    return q_part(r4) + q_part(rd)


def bel_robinson_from_null(comp: dict, a: np.ndarray) -> np.ndarray:
    """Q(T,T,T,T) rebuilt from null curvature components.

    With T = -(a L + a^{-1} Lb)/2 and the component values of
    null_decompose,
      Q(T,T,T,T) = a^4 |alpha|^2 / 8 + a^2 |beta|^2
                   + 3 (rho^2 + sigma^2) / 2
                   + |betab|^2 / a^2 + |alphab|^2 / (8 a^4),
    which equals |E|^2 + |H|^2; the equality is the frame-independence
    cross-check of the curvature pipeline.
    """
    al2 = np.einsum("...AB,...AB->...", comp["alpha"], comp["alpha"])
    alb2 = np.einsum("...AB,...AB->...", comp["alphab"], comp["alphab"])
    be2 = np.einsum("...A,...A->...", comp["beta"], comp["beta"])
    beb2 = np.einsum("...A,...A->...", comp["betab"], comp["betab"])
    return (0.125 * a**4 * al2 + a**2 * be2
            + 1.5 * (comp["rho"] ** 2 + comp["sigma"] ** 2)
            + beb2 / a**2 + 0.125 * alb2 / a**4)


def null_decompose(r4: np.ndarray, g4: np.ndarray, L: np.ndarray,
                   Lb: np.ndarray, e1: np.ndarray, e2: np.ndarray,
                   frame_tol: float = 1e-10) -> dict:
    """Null curvature components for the frame (e_A, e_3 = Lb, e_4 = L).

    alpha_AB = R(L, e_A, L, e_B)            beta_A = 1/2 R(e_A, L, Lb, L)
    rho = 1/4 R(Lb, L, Lb, L)               sigma = 1/4 *R(Lb, L, Lb, L)
    betab_A = 1/2 R(e_A, Lb, Lb, L)         alphab_AB = R(Lb, e_A, Lb, e_B)
    """
    def ip(u, v):
        return np.einsum("...mn,...m,...n->...", g4, u, v)

    checks = np.stack([
        np.abs(ip(L, Lb) + 2.0), np.abs(ip(L, L)), np.abs(ip(Lb, Lb)),
        np.abs(ip(e1, e1) - 1.0), np.abs(ip(e2, e2) - 1.0), np.abs(ip(e1, e2)),
        np.abs(ip(L, e1)), np.abs(ip(L, e2)), np.abs(ip(Lb, e1)), np.abs(ip(Lb, e2)),
    ])
    worst = float(checks.max())
    if worst > frame_tol:
        raise ValueError(f"null frame normalization violated by {worst:.3e}")

    rd = hodge_dual_first(r4, g4)
    eA = [e1, e2]

    def c4(R, u, v, w, z):
        return np.einsum("...abcd,...a,...b,...c,...d->...", R, u, v, w, z)

    alpha = np.stack([
        np.stack([c4(r4, L, eA[a], L, eA[b]) for b in range(2)], axis=-1)
        for a in range(2)
    ], axis=-2)
    alphab = np.stack([
        np.stack([c4(r4, Lb, eA[a], Lb, eA[b]) for b in range(2)], axis=-1)
        for a in range(2)
    ], axis=-2)
    beta = np.stack([0.5 * c4(r4, eA[a], L, Lb, L) for a in range(2)], axis=-1)
    betab = np.stack([0.5 * c4(r4, eA[a], Lb, Lb, L) for a in range(2)], axis=-1)
    rho = 0.25 * c4(r4, Lb, L, Lb, L)
    sigma = 0.25 * c4(rd, Lb, L, Lb, L)
    return {"alpha": alpha, "beta": beta, "rho": rho, "sigma": sigma,
            "betab": betab, "alphab": alphab}
