"""Representation-formula residual for the second fundamental form.

The transported tensor A solves (D_L A)_ij + (tr chi / 2) A_ij = 0 with
(t_p - t) A -> J at the vertex; contracting the wave operator on k with
A over the cone and integrating by parts yields

  4 pi n(p) <k(p), J> = I + J + K + L + E + int Omega_1(k)

with
  I = - int A . Box k                     (Box k from the slice formula)
  J = - int g^{ii'} g^{jj'} R(e_i,.,Lb,L) k A   (curvature commutator)
  K = int ( - slash-nabla A . slash-nabla k + 2 zbar . slash-nabla k . A )
  L = 1/2 int mu-bar A . k,   mu-bar = 2 div zbar - chihat . chibar-hat
                                        + 2 |zbar|^2 + 2 rho
  E = - int_{bottom sphere} ( D_3 k . A + 1/2 tr chibar k . A )
  Omega_1 = all the quartic deformation couplings A . pi . pi . pi:
            the generator piece -2 g^{ij} (V.A)_i (W.k)_j with
            V = pi_0 + k(N,.), W = pi_0 - k(N,.), coming from the
            normal components of D_4 A against D_3 k, plus the surface
            piece +2 Pi^{bm} g^{jj'} (k.k)_{bj} (k.A)_{mj'} coming from
            the normal components of D_B k against D_B A in the
            tangential integration by parts (Pi is the S_t projector).

All cone integrals carry the measure n a dmu_gamma dt; the bottom term
is a plain surface integral.  Every term is exported individually: a
six-term identity is undebuggable otherwise.

The trapezoid in t includes an analytic vertex row: most integrands
vanish at the vertex, but the mass-aspect term tends to the finite
limit (k-slash - 2 nu) n(p)^2 <k(p), J> per direction, because
mu-bar ~ (2 k-slash - 4 nu)/s while A ~ n(p) J / s and v_t ~ s^2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .angular import DirectionGrid, SurfacePatch
from .cone import ConeBundle, chihat_full, trace_bundle
from .jets import christoffel3_from_jet, covdk_from_jet
from .wavek import box_k_rhs_from_jet


@dataclass
class KirchhoffReport:
    lhs: float
    terms: dict
    total: float
    residual: float
    vertex_t: float
    tau: float
    n_steps: int
    n_theta: int
    n_phi: int

    def to_json(self) -> str:
        out = dict(self.__dict__)
        out["terms"] = {k: float(v) for k, v in self.terms.items()}
        return json.dumps(out, indent=2, sort_keys=True)


def _slice_integrands(sampler, bundle: ConeBundle, rec: dict, state_L: np.ndarray):
    """All per-direction Kirchhoff integrands at one slice."""
    grid = bundle.grid
    x = rec["x"]
    jet = sampler.jet2(rec["t"], x, need_ddk=False, need_ndot=True)
    from .jets import (
        christoffel4,
        dchristoffel4,
        g4_from_jet,
        inv4,
        riemann4,
    )

    g4, dg4, ddg4 = g4_from_jet(jet)
    g4i = inv4(g4)
    gam4 = christoffel4(g4i, dg4)
    r4 = riemann4(gam4, dchristoffel4(g4i, dg4, ddg4), g4)

    n = jet.n
    a = rec["a"]
    ginv = jet.ginv()
    A = rec["A"]
    k3 = jet.k
    kA = np.einsum("...ij,...kl,...ik,...jl->...", k3, A, ginv, ginv)

    # I: -<A, Box k>
    boxk = box_k_rhs_from_jet(jet)
    integ_I = -np.einsum("...ij,...kl,...ik,...jl->...", A, boxk, ginv, ginv)

    # J: -g^{ii'} g^{jj'} F_i^m k_mj A_{i'j'}, F_im = R(e_i, e_m, Lb, L)
    T4 = np.zeros_like(state_L)
    T4[:, 0] = 1.0 / n
    N4 = np.zeros_like(state_L)
    N4[:, 1:] = rec["N"]
    Lb = -a[:, None] * (T4 - N4)
    F = np.einsum("...imcd,...c,...d->...im", r4[..., 1:, 1:, :, :], Lb, state_L)
    integ_J = -np.einsum("...im,...mq,...qj,...ik,...jl,...kl->...",
                         F, ginv, k3, ginv, ginv, A)

    # surface geometry for the angular-derivative terms
    patch = SurfacePatch(grid, grid.unflat(x), grid.unflat(jet.g))
    gam3 = christoffel3_from_jet(jet)
    covdk = covdk_from_jet(jet, gam3)                      # (nd, m, i, j)
    slk = np.einsum("...ai,...ikl->...akl",
                    patch.basis, grid.unflat(covdk))       # (nt,np,a,k,l)
    slA = patch.covariant_surface_deriv(grid.unflat(A), grid.unflat(gam3))

    ginv_u = grid.unflat(ginv)
    gi2 = lambda P, Q: np.einsum("...aij,...bkl,...ik,...jl->...ab",
                                 P, Q, ginv_u, ginv_u)
    KdAdk = np.einsum("...ab,...ab->...", patch.gamma_inv, gi2(slA, slk))

    # zbar ambient (tangent projection of grad log n - khat(., N))
    dlogn = jet.dn[:, 1:] / n[:, None]
    trk = np.einsum("...ij,...ij->...", ginv, k3)
    khat = k3 - (trk / 3.0)[:, None, None] * jet.g
    Nsp = rec["N"]
    khatN = np.einsum("...ij,...j->...i", khat, Nsp)
    zbar_full = dlogn - khatN
    Nlow = np.einsum("...ij,...j->...i", jet.g, Nsp)
    zbar_amb = zbar_full - Nlow * np.einsum(
        "...j,...j->...", Nsp, zbar_full)[:, None]
    zb_coord = np.einsum("...ai,...i->...a", patch.basis, grid.unflat(zbar_amb))
    zb_up = np.einsum("...ab,...b->...a", patch.gamma_inv, zb_coord)
    Adk = np.einsum("...akl,...ik,...jl,...ij->...a",
                    slk, ginv_u, ginv_u, grid.unflat(A))
    integ_K = grid.flat(-KdAdk + 2.0 * np.einsum("...a,...a->...", zb_up, Adk))

    # L: 1/2 mu-bar <A, k> with mu-bar = D_4 tr chibar + 1/2 tr chi tr chibar
    # evaluated in closed form along the generator: tr chibar =
    # -a^2 tr chi + 2 a k-slash, a' = nu, tr chi' from the Riccati
    # equation, and k-slash' from pointwise derivatives of Tr k and k_NN
    mubar = _mubar_exact(jet, rec, state_L)
    integ_L = 0.5 * mubar * kA

    # Omega_1, generator piece: -2 g^{ij} (V.A)_i (W.k)_j
    kN = np.einsum("...ij,...j->...i", k3, Nsp)
    V = -dlogn + kN
    W = -dlogn - kN
    VA = np.einsum("...m,...mq,...qi->...i", V, ginv, A)
    Wk = np.einsum("...m,...mq,...qj->...j", W, ginv, k3)
    integ_O = -2.0 * np.einsum("...ij,...i,...j->...", ginv, VA, Wk)

    # Omega_1, surface piece: +2 Pi^{bm} g^{jj'} (k.k)_{bj} (k.A)_{mj'}
    Nup = Nsp  # N stored with upper index
    proj_up = ginv - np.einsum("...i,...j->...ij", Nup, Nup)
    kk = np.einsum("...bq,...qr,...rj->...bj", k3, ginv, k3)
    kA_mix = np.einsum("...ml,...lr,...rj->...mj", k3, ginv, A)
    integ_O = integ_O + 2.0 * np.einsum(
        "...bm,...jl,...bj,...ml->...", proj_up, ginv, kk, kA_mix)

    return {"I": integ_I, "J": integ_J, "K": integ_K, "L": integ_L,
            "Omega1": integ_O, "na": n * a, "vt": rec["vt"],
            "kA": kA, "jet": jet, "trk": trk}


def _mubar_exact(jet, rec: dict, L: np.ndarray) -> np.ndarray:
    """mu-bar = d/ds tr chibar + 1/2 tr chi tr chibar, pointwise.

    tr chibar = -a^2 tr chi + 2 a k-slash with k-slash = Tr k - k_NN, so
      d/ds tr chibar = -2 a nu tr chi + a^2 (tr chi^2 / 2 + |chihat|^2)
                       + 2 nu k-slash + 2 a d/ds(k-slash),
    and d/ds k_NN carries D_L N = -nu L - a^{-1}(pi_0 + k(N,.))^m e_m.
    """
    ginv = jet.ginv()
    a = rec["a"]
    nu = rec["nu"]
    trchi = rec["trchi"]
    ch = chihat_full(rec["chihat"])
    ch2 = np.einsum("...AB,...AB->...", ch, ch)
    Nsp = rec["N"]
    k3 = jet.k
    trk = np.einsum("...ij,...ij->...", ginv, k3)
    kNN = np.einsum("...i,...j,...ij->...", Nsp, Nsp, k3)
    kslash = trk - kNN

    # d/ds Tr k = L^mu d_mu (g^{ij} k_ij)
    dtrk_mu = (np.einsum("...ij,...mij->...m", ginv, jet.dk)
               - np.einsum("...ia,...mab,...bj,...ij->...m", ginv, jet.dg,
                           ginv, k3))
    dtrk_ds = np.einsum("...m,...m->...", L, dtrk_mu)

    # d/ds k_NN = (nabla_L k)(N, N) + 2 k(D_L N, N)
    from .jets import christoffel4, g4_from_jet, inv4

    g4, dg4, _ = g4_from_jet(jet)
    gam4 = christoffel4(inv4(g4), dg4)
    dLk = (np.einsum("...m,...mij->...ij", L, jet.dk)
           - np.einsum("...m,...lmi,...lj->...ij", L, gam4[..., 1:, :, 1:], k3)
           - np.einsum("...m,...lmj,...il->...ij", L, gam4[..., 1:, :, 1:], k3))
    dLk_NN = np.einsum("...i,...j,...ij->...", Nsp, Nsp, dLk)
    dlogn = jet.dn[:, 1:] / jet.n[:, None]
    pi0_up = -np.einsum("...mq,...q->...m", ginv, dlogn)
    kN_up = np.einsum("...mq,...qj,...j->...m", ginv, k3, Nsp)
    kv = pi0_up + kN_up
    k_kv_N = np.einsum("...m,...mj,...j->...", kv, k3, Nsp)
    dkNN_ds = dLk_NN + 2.0 * (nu * kNN / a - k_kv_N / a)
    dkslash_ds = dtrk_ds - dkNN_ds

    d4_trchb = (-2.0 * a * nu * trchi
                + a**2 * (0.5 * trchi**2 + ch2)
                + 2.0 * nu * kslash + 2.0 * a * dkslash_ds)
    trchb = -a**2 * trchi + 2.0 * a * kslash
    return d4_trchb + 0.5 * trchi * trchb


def _bottom_term(sampler, bundle: ConeBundle, rec: dict) -> float:
    """E = -int_{S_bottom} (D_3 k . A + 1/2 tr chibar k . A) dmu."""
    grid = bundle.grid
    jet = sampler.jet2(rec["t"], rec["x"], need_ddk=False, need_ndot=False)
    from .jets import d0k_formula_from_jet

    ginv = jet.ginv()
    a = rec["a"]
    d0k = d0k_formula_from_jet(jet)
    gam3 = christoffel3_from_jet(jet)
    covdk = covdk_from_jet(jet, gam3)
    dNk = np.einsum("...m,...mij->...ij", rec["N"], covdk)
    d3k = -a[:, None, None] * (d0k - dNk)

    kfr = np.einsum("...Ai,...Bj,...ij->...AB", rec["eA"], rec["eA"], jet.k)
    ksl = kfr[..., 0, 0] + kfr[..., 1, 1]
    trchb = -a * (a * rec["trchi"] - 2.0 * ksl)

    A = rec["A"]
    d3kA = np.einsum("...ij,...kl,...ik,...jl->...", d3k, A, ginv, ginv)
    kA = np.einsum("...ij,...kl,...ik,...jl->...", jet.k, A, ginv, ginv)
    dens = -(d3kA + 0.5 * trchb * kA)
    return grid.integrate(grid.unflat(dens * rec["vt"]))


def kirchhoff_residual(sampler, vertex_t: float, vertex_x, tau: float,
                       n_steps: int, grid: DirectionGrid,
                       J: np.ndarray) -> KirchhoffReport:
    """Trace the cone and assemble the representation-formula budget."""
    J = np.asarray(J, dtype=float)
    bundle = trace_bundle(sampler, vertex_t, vertex_x, tau, n_steps, grid,
                          J=J, with_pislash=False)

    # left side at the vertex
    x0 = np.asarray(vertex_x, dtype=float)[None, :]
    jet_p = sampler.jet2(vertex_t, x0, need_ddk=False, need_ndot=False)
    gi = jet_p.ginv()
    lhs = 4.0 * np.pi * jet_p.n[0] * float(
        np.einsum("...ij,...kl,...ik,...jl->...", jet_p.k, J[None], gi, gi)[0])

    # cone terms: per-slice surface integrals, trapezoid in t; the row at
    # the vertex itself is analytic (zero except for the mass-aspect term)
    ts = np.concatenate([[vertex_t], bundle.times])
    Ls = _reconstruct_L(sampler, bundle)
    per_slice = {name: [_vertex_row(sampler, vertex_t, vertex_x, grid, J, name)]
                 for name in ("I", "J", "K", "L", "Omega1")}
    for idx, rec in enumerate(bundle.records):
        parts = _slice_integrands(sampler, bundle, rec, Ls[idx])
        wvtna = rec["vt"] * parts["na"]
        for name in per_slice:
            per_slice[name].append(grid.integrate(
                grid.unflat(parts[name] * wvtna)))
    terms = {name: float(np.trapezoid(vals[::-1], ts[::-1]))
             for name, vals in per_slice.items()}
    terms["E"] = _bottom_term(sampler, bundle, bundle.records[-1])

    total = sum(terms.values())
    scale = max(abs(lhs), sum(abs(v) for v in terms.values()))
    # degenerate case (k = 0): report the absolute mismatch
    residual = abs(lhs - total) / scale if scale > 1e-10 else abs(lhs - total)
    return KirchhoffReport(lhs=lhs, terms=terms, total=total, residual=residual,
                           vertex_t=vertex_t, tau=tau, n_steps=n_steps,
                           n_theta=grid.n_theta, n_phi=grid.n_phi)


def _vertex_row(sampler, vertex_t, vertex_x, grid: DirectionGrid,
                J: np.ndarray, name: str) -> float:
    """Analytic t -> t_p limit of the per-slice surface integrals.

    All integrands scale like s v_t / s^2 -> 0 except the mass-aspect
    term, whose limit is (k-slash - 2 nu) n(p)^2 <k(p), J> per direction.
    """
    if name != "L":
        return 0.0
    nd = grid.n_dirs
    x0 = np.broadcast_to(np.asarray(vertex_x, dtype=float), (nd, 3)).copy()
    jet = sampler.jet2(vertex_t, x0, need_ddk=False, need_ndot=False)
    gi = jet.ginv()
    gp = jet.g[0]
    chol = np.linalg.cholesky(gp)
    triad = np.linalg.inv(chol).T
    N = grid.flat(grid.omega) @ triad.T
    trk = np.einsum("...ij,...ij->...", gi, jet.k)
    kNN = np.einsum("...i,...j,...ij->...", N, N, jet.k)
    kslash = trk - kNN
    dlogn = jet.dn[:, 1:] / jet.n[:, None]
    nu = kNN - np.einsum("...i,...i->...", N, dlogn)
    kJ = np.einsum("...ij,...kl,...ik,...jl->...", jet.k,
                   np.broadcast_to(J, (nd, 3, 3)), gi, gi)
    dens = (kslash - 2.0 * nu) * jet.n**2 * kJ
    return grid.integrate(grid.unflat(dens))


def _reconstruct_L(sampler, bundle: ConeBundle):
    """Null tangents at each record from a, n and the position history.

    L^t = -1/(a n); the spatial direction is recovered from the stored
    inward normal via L^i = -N^i / a (:= the re-projection identity).
    """
    out = []
    for rec in bundle.records:
        jet = sampler.jet2(rec["t"], rec["x"], need_ddk=False, need_ndot=False)
        L = np.zeros((len(rec["a"]), 4))
        L[:, 0] = -1.0 / (rec["a"] * jet.n)
        L[:, 1:] = -rec["N"] / rec["a"][:, None]
        out.append(L)
    return out


# ---------------------------------------------------------------------------
# nested cone families along the observer curve
# ---------------------------------------------------------------------------

@dataclass
class ConeFamily:
    """Cones from vertices Phi(t_i) sharing the bottom slice t_m."""

    vertex_times: np.ndarray
    u_values: np.ndarray
    reports: list
    bundles: list


def optical_function_values(sampler, vertex_x, times, t0=None):
    """u(t) = int_{t0}^t n(Phi) dt' along the integral curve of T."""
    times = np.asarray(times, dtype=float)
    t0 = times.min() if t0 is None else t0
    ts = np.linspace(t0, times.max(), 257)
    x = np.asarray(vertex_x, dtype=float)[None, :]
    nvals = np.array([sampler.jet2(float(t), x, need_ddk=False,
                                   need_ndot=False).n[0] for t in ts])
    cumulative = np.concatenate(
        [[0.0], np.cumsum(0.5 * (nvals[1:] + nvals[:-1]) * np.diff(ts))])
    return np.interp(times, ts, cumulative)


def kirchhoff_family(sampler, vertex_t: float, vertex_x, tau: float,
                     n_vertices: int, steps_per_unit: int,
                     grid: DirectionGrid, J: np.ndarray) -> ConeFamily:
    """Run the representation residual from several vertices on Phi.

    Vertex times t_i span (t_p - tau, t_p]; each cone extends down to the
    common bottom slice t_p - tau, mirroring the disjoint nested family
    labeled by the optical function.
    """
    t_m = vertex_t - tau
    fracs = np.linspace(0.35, 1.0, n_vertices)
    vts = t_m + fracs * tau
    reports, bundles = [], []
    for tv in vts:
        tau_i = tv - t_m
        n_steps = max(8, int(round(steps_per_unit * tau_i)))
        rep = kirchhoff_residual(sampler, float(tv), vertex_x, float(tau_i),
                                 n_steps, grid, J)
        reports.append(rep)
        bundles.append(trace_bundle(sampler, float(tv), vertex_x, float(tau_i),
                                    n_steps, grid, J=J, with_pislash=False))
    u = optical_function_values(sampler, vertex_x, vts, t0=t_m)
    return ConeFamily(vertex_times=vts, u_values=u, reports=reports,
                      bundles=bundles)


def interior_pi_norm(sampler, family: ConeFamily, t_slice: float) -> float:
    """|pibar|_{L^2_u L^2_omega} over Int(S_{t,u}) via nested surfaces.

    pibar = (n^-1 dt log n, k, -grad log n); the u-integral runs over the
    family cones' cross sections at t_slice with du = n(Phi) dt_vertex.
    """
    vals = []
    for tv, bundle in zip(family.vertex_times, family.bundles):
        if tv <= t_slice:
            continue
        ts = bundle.times
        idx = int(np.argmin(np.abs(ts - t_slice)))
        rec = bundle.records[idx]
        jet = sampler.jet2(rec["t"], rec["x"], need_ddk=False, need_ndot=True)
        gi = jet.ginv()
        k2 = np.einsum("...ia,...jb,...ij,...ab->...", gi, gi, jet.k, jet.k)
        dlogn = jet.dn[:, 1:] / jet.n[:, None]
        dl2 = np.einsum("...ij,...i,...j->...", gi, dlogn, dlogn)
        ndot_term = (jet.ndot / jet.n**2) ** 2
        pib2 = k2 + dl2 + ndot_term
        grid = bundle.grid
        area = grid.integrate(grid.unflat(rec["vt"]))
        r2 = area / (4 * np.pi)
        surf = grid.integrate(grid.unflat(pib2 * rec["a"] * rec["vt"])) / r2
        vals.append((tv, surf))
    if len(vals) < 2:
        raise ValueError("need at least two nested cones crossing the slice")
    vals = np.array(vals)
    nv = np.array([sampler.jet2(float(t), np.zeros((1, 3)), need_ddk=False,
                                need_ndot=False).n[0] for t in vals[:, 0]])
    du = nv  # du/dt_vertex = n(Phi)
    integral = float(np.trapezoid(vals[:, 1] * du, vals[:, 0]))
    return np.sqrt(abs(integral))
