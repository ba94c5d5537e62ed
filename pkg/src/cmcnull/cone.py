"""Backward null-cone engine: geodesic bundles and optical transport.

A bundle of past null geodesics is launched from a vertex with the
normalization g(l_omega, T_p) = 1 and integrated in slice time t (the
affine parameter satisfies dt/ds = -1/(a n)).  Along each generator the
engine transports the null lapse a, the expansion tr chi, the shear
chi-hat, the torsion zeta, the area-element ratio v_t, an orthonormal
S_t frame, and optionally the Kirchhoff transport tensor A.

Vertex regularization: tr chi, v_t and A are singular at the vertex, so
the integrated variables are w = tr chi - 2/s, q = v_t / s^2 and
At = s A, all of which stay smooth (and are exactly constant on the
flat cone).  The first step off the vertex integrates only the regular
subsystem (x, L, a, s, frame) and then seeds the optical scalars from
their vertex asymptotics: w = 0, q = 1, chi-hat = (s/3) alpha,
zeta = zeta-bar, At = s J / (t_p - t).

Per step the tangent is re-projected onto the null cone (restoring
g(L, L) = 0 and L^t = -1/(a n)) and the frame is re-orthonormalized
against (T, N); the residual frame rotation cancels in every
frame-invariant reported quantity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .angular import DirectionGrid, SurfacePatch
from .jets import (
    christoffel3_from_jet,
    christoffel4,
    covdk_from_jet,
    dchristoffel4,
    g4_from_jet,
    hessian_n_from_jet,
    hodge_dual_first,
    inv4,
    riemann4,
)

TRCHI_COLLAPSE = -1.0e6


class ConeError(RuntimeError):
    pass


@dataclass
class BundleState:
    """Struct-of-arrays state of all generators at one slice time."""

    t: float
    x: np.ndarray          # (nd, 3)
    L: np.ndarray          # (nd, 4)
    s: np.ndarray          # (nd,)
    a: np.ndarray          # (nd,)
    w: np.ndarray          # tr chi - 2/s
    q: np.ndarray          # v_t / s^2
    chihat: np.ndarray     # (nd, 2): components (11, 12) in the frame
    zeta: np.ndarray       # (nd, 2)
    eA: np.ndarray         # (nd, 2, 4) frame vectors (t-component ~ 0)
    At: np.ndarray | None  # (nd, 3, 3): s * A
    alive: np.ndarray      # (nd,) bool

    def copy(self):
        return BundleState(self.t, self.x.copy(), self.L.copy(), self.s.copy(),
                           self.a.copy(), self.w.copy(), self.q.copy(),
                           self.chihat.copy(), self.zeta.copy(), self.eA.copy(),
                           None if self.At is None else self.At.copy(),
                           self.alive.copy())

    @property
    def trchi(self):
        return self.w + 2.0 / self.s

    @property
    def vt(self):
        return self.q * self.s**2


def chihat_full(ch: np.ndarray) -> np.ndarray:
    """(.., 2) components -> symmetric traceless (.., 2, 2)."""
    out = np.empty(ch.shape[:-1] + (2, 2))
    out[..., 0, 0] = ch[..., 0]
    out[..., 1, 1] = -ch[..., 0]
    out[..., 0, 1] = out[..., 1, 0] = ch[..., 1]
    return out


def _geom_at(sampler, t, state, need_ndot=False):
    """Jet plus the derived pointwise geometry shared by RHS and records."""
    jet = sampler.jet2(t, state.x, need_ddk=False, need_ndot=need_ndot)
    g4, dg4, ddg4 = g4_from_jet(jet)
    g4i = inv4(g4)
    gam4 = christoffel4(g4i, dg4)
    dgam4 = dchristoffel4(g4i, dg4, ddg4)
    r4 = riemann4(gam4, dgam4, g4)

    n = jet.n
    ginv = jet.ginv()
    a = state.a
    Lsp = state.L[:, 1:]
    Nsp = -a[:, None] * Lsp
    norm = np.sqrt(np.einsum("...ij,...i,...j->...", jet.g, Nsp, Nsp))
    Nsp = Nsp / norm[:, None]

    dlogn = jet.dn[:, 1:] / n[:, None]
    kNN = np.einsum("...i,...j,...ij->...", Nsp, Nsp, jet.k)
    nu = kNN - np.einsum("...i,...i->...", Nsp, dlogn)

    T4 = np.zeros_like(state.L)
    T4[:, 0] = 1.0 / n
    N4 = np.zeros_like(state.L)
    N4[:, 1:] = Nsp
    Lb = -a[:, None] * (T4 - N4)

    eAs = state.eA[:, :, 1:]
    # null curvature components in the transported frame
    def c4(u, v, wv, z):
        return np.einsum("...abcd,...a,...b,...c,...d->...", r4, u, v, wv, z)

    e1, e2 = state.eA[:, 0], state.eA[:, 1]
    alpha = np.empty((len(n), 2, 2))
    alpha[:, 0, 0] = c4(state.L, e1, state.L, e1)
    alpha[:, 0, 1] = alpha[:, 1, 0] = c4(state.L, e1, state.L, e2)
    alpha[:, 1, 1] = c4(state.L, e2, state.L, e2)
    beta = np.stack([0.5 * c4(e1, state.L, Lb, state.L),
                     0.5 * c4(e2, state.L, Lb, state.L)], axis=-1)
    return {
        "jet": jet, "g4": g4, "g4i": g4i, "gam4": gam4, "r4": r4,
        "n": n, "ginv": ginv, "Nsp": Nsp, "T4": T4, "N4": N4, "Lb": Lb,
        "dlogn": dlogn, "kNN": kNN, "nu": nu, "eAs": eAs,
        "alpha": alpha, "beta": beta,
    }


def _zeta_bar(geo, state):
    """zbar_A = slash-nabla_A log n - eps_A, with eps_A = khat(e_A, N)."""
    jet = geo["jet"]
    trk = np.einsum("...ij,...ij->...", geo["ginv"], jet.k)
    khat = jet.k - (trk / 3.0)[:, None, None] * jet.g
    eps = np.einsum("...Ai,...j,...ij->...A", geo["eAs"], geo["Nsp"], khat)
    slogn = np.einsum("...Ai,...i->...A", geo["eAs"], geo["dlogn"])
    return slogn - eps, eps, slogn, khat, trk


def _rhs(sampler, t, state, seed_phase=False):
    """Time derivative of the bundle state (all generators at once)."""
    geo = _geom_at(sampler, t, state)
    n, a = geo["n"], state.a
    L = state.L
    Lt = L[:, 0]
    an = a * n

    dx = L[:, 1:] / Lt[:, None]
    dL = -np.einsum("...lmn,...m,...n->...l", geo["gam4"], L, L) / Lt[:, None]
    ds = -an
    da = -an * geo["nu"]
    deA = -np.einsum("...lmn,...m,...An->...Al", geo["gam4"], L,
                     state.eA) / Lt[:, None, None]

    out = {"x": dx, "L": dL, "s": ds, "a": da, "eA": deA}
    if seed_phase:
        for name in ("w", "q", "chihat", "zeta"):
            out[name] = np.zeros_like(getattr(state, name))
        if state.At is not None:
            out["At"] = np.zeros_like(state.At)
        return out

    trchi = state.trchi
    ch = chihat_full(state.chihat)
    ch2 = np.einsum("...AB,...AB->...", ch, ch)
    # w' = a n (trchi^2/2 + |chihat|^2 - 2/s^2); exactly zero on flat cones
    dw = an * (0.5 * trchi**2 + ch2 - 2.0 / state.s**2)
    dq = -an * state.q * state.w

    # shear transport d chihat/ds + trchi chihat = -alpha in this
    # package's curvature sign convention (the one that makes the slice
    # electric part equal Ric - k k + Tr k k); the sign is pinned by the
    # embedded cross-check chi_AB = g(D_A L, e_B) in the tests
    alpha = geo["alpha"]
    tra = alpha[:, 0, 0] + alpha[:, 1, 1]
    ahat = alpha.copy()
    ahat[:, 0, 0] -= 0.5 * tra
    ahat[:, 1, 1] -= 0.5 * tra
    dchfull = -an[:, None, None] * (-ahat - trchi[:, None, None] * ch)
    dch = np.stack([dchfull[:, 0, 0], dchfull[:, 0, 1]], axis=-1)

    zbar, _, _, _, _ = _zeta_bar(geo, state)
    chi = ch + 0.5 * trchi[:, None, None] * np.eye(2)
    dzeta = -an[:, None] * (
        -np.einsum("...AB,...B->...A", chi, state.zeta)
        + np.einsum("...AB,...B->...A", chi, zbar)
        - geo["beta"]
    )

    out.update({"w": dw, "q": dq, "chihat": dch, "zeta": dzeta})
    if state.At is not None:
        # (s A)' along t: d(At)/dt = -a n [ G + G^T + (1/s - trchi/2) At ]
        # from dA/ds = Gamma-terms - trchi A / 2 and ds/dt = -a n
        gam = geo["gam4"]
        G = np.einsum("...m,...lmi,...lj->...ij", L, gam[..., 1:, :, 1:], state.At)
        sym = G + np.swapaxes(G, -1, -2)
        dAt = -an[:, None, None] * (
            sym + (1.0 / state.s - 0.5 * trchi)[:, None, None] * state.At
        )
        out["At"] = dAt
    return out


_ODE_FIELDS = ("x", "L", "s", "a", "w", "q", "chihat", "zeta", "eA", "At")


def _axpy(state: BundleState, coef: float, deriv: dict, t_new: float) -> BundleState:
    new = state.copy()
    new.t = t_new
    for name in _ODE_FIELDS:
        cur = getattr(new, name)
        if cur is None:
            continue
        setattr(new, name, cur + coef * deriv[name])
    return new


def _rk4_step(sampler, state: BundleState, dt: float, seed_phase=False) -> BundleState:
    t = state.t
    k1 = _rhs(sampler, t, state, seed_phase)
    k2 = _rhs(sampler, t + dt / 2, _axpy(state, dt / 2, k1, t + dt / 2), seed_phase)
    k3 = _rhs(sampler, t + dt / 2, _axpy(state, dt / 2, k2, t + dt / 2), seed_phase)
    k4 = _rhs(sampler, t + dt, _axpy(state, dt, k3, t + dt), seed_phase)
    new = state.copy()
    new.t = t + dt
    for name in _ODE_FIELDS:
        cur = getattr(new, name)
        if cur is None:
            continue
        setattr(new, name, cur + dt / 6.0 * (k1[name] + 2 * k2[name]
                                             + 2 * k3[name] + k4[name]))
    return new


def _renormalize(sampler, state: BundleState) -> BundleState:
    """Restore the null/frame constraints after a step; flag degeneracies."""
    jet = sampler.jet2(state.t, state.x, need_ddk=False, need_ndot=False)
    n = jet.n
    g = jet.g

    # L^t from the transported null lapse; rescale the spatial part so
    # g(L, L) = 0, i.e. |L_spatial|_g = n |L^t| = 1/a
    state.L[:, 0] = -1.0 / (state.a * n)
    spat = np.sqrt(np.einsum("...ij,...i,...j->...", g, state.L[:, 1:], state.L[:, 1:]))
    target = n * np.abs(state.L[:, 0])
    state.L[:, 1:] *= (target / spat)[:, None]

    # frame: remove T and N components, then Gram-Schmidt
    g4, _, _ = g4_from_jet(jet)
    T4 = np.zeros_like(state.L)
    T4[:, 0] = 1.0 / n
    N4 = np.zeros_like(state.L)
    N4[:, 1:] = -state.a[:, None] * state.L[:, 1:]
    nn = np.sqrt(np.einsum("...mn,...m,...n->...", g4, N4, N4))
    N4 /= nn[:, None]

    def ip(u, v):
        return np.einsum("...mn,...m,...n->...", g4, u, v)

    for A in range(2):
        e = state.eA[:, A]
        e = e + ip(e, T4)[:, None] * T4 - ip(e, N4)[:, None] * N4
        if A == 1:
            e0 = state.eA[:, 0]
            e = e - ip(e, e0)[:, None] * e0
        e /= np.sqrt(ip(e, e))[:, None]
        state.eA[:, A] = e

    bad = (~np.isfinite(state.s)) | (state.a <= 0) | (state.q <= 0) \
        | (state.trchi < TRCHI_COLLAPSE)
    for name in ("x", "L", "chihat", "zeta", "eA"):
        arr = getattr(state, name)
        bad |= ~np.isfinite(arr).all(axis=tuple(range(1, arr.ndim)))
    if np.any(bad):
        state.alive &= ~bad
    return state


# ---------------------------------------------------------------------------
# launching and tracing
# ---------------------------------------------------------------------------

def launch_bundle(sampler, vertex_t: float, vertex_x, grid: DirectionGrid,
                  J: np.ndarray | None = None,
                  frame_rotation: float = 0.0) -> BundleState:
    """Vertex state: L = -(T + omega^a E_a), a = 1, s = 0.

    E_a is the g-orthonormalized coordinate triad at the vertex, so the
    direction sphere is parametrized isotropically in proper distances.
    frame_rotation rigidly rotates the initial (e_1, e_2) seed about each
    direction; reported frame-invariant quantities must not react.
    """
    nd = grid.n_dirs
    x0 = np.broadcast_to(np.asarray(vertex_x, dtype=float), (nd, 3)).copy()
    jet = sampler.jet2(vertex_t, x0[:1], need_ddk=False, need_ndot=False)
    if not np.all(np.isfinite(jet.g)):
        raise ConeError("non-finite metric data at the vertex")
    gp = jet.g[0]
    n_p = jet.n[0]
    chol = np.linalg.cholesky(gp)
    triad = np.linalg.inv(chol).T  # columns: orthonormal spatial vectors

    om = grid.flat(grid.omega)          # (nd, 3)
    eth = grid.flat(grid.e_theta)
    eph = grid.flat(grid.e_phi)
    if frame_rotation != 0.0:
        c, sn = np.cos(frame_rotation), np.sin(frame_rotation)
        eth, eph = c * eth + sn * eph, -sn * eth + c * eph

    L = np.zeros((nd, 4))
    L[:, 0] = -1.0 / n_p
    L[:, 1:] = -om @ triad.T
    eA = np.zeros((nd, 2, 4))
    eA[:, 0, 1:] = eth @ triad.T
    eA[:, 1, 1:] = eph @ triad.T

    At = None
    if J is not None:
        At = np.zeros((nd, 3, 3))  # seeded after the first step
    return BundleState(
        t=vertex_t, x=x0, L=L, s=np.zeros(nd), a=np.ones(nd),
        w=np.full(nd, np.nan), q=np.full(nd, np.nan),
        chihat=np.full((nd, 2), np.nan), zeta=np.full((nd, 2), np.nan),
        eA=eA, At=At, alive=np.ones(nd, dtype=bool),
    )


def _seed_optical(sampler, state: BundleState, vertex_t: float,
                  vertex_x, J: np.ndarray | None):
    """Fill the singular variables at the first post-vertex slice."""
    geo = _geom_at(sampler, state.t, state)
    state.w = np.zeros_like(state.s)
    state.q = np.ones_like(state.s)
    alpha = geo["alpha"]
    tra = alpha[:, 0, 0] + alpha[:, 1, 1]
    state.chihat = np.stack([
        -(state.s / 3.0) * (alpha[:, 0, 0] - 0.5 * tra),
        -(state.s / 3.0) * alpha[:, 0, 1],
    ], axis=-1)
    zbar, _, _, _, _ = _zeta_bar(geo, state)
    state.zeta = zbar.copy()
    if J is not None:
        # second-order seed: At(s) = n(p) [J + s G_sym(J)] + O(s^2),
        # G_ij = L^mu Gamma^l_{mu i} J_lj (the transport's Gamma terms)
        nd = len(state.s)
        jet_p = sampler.jet2(vertex_t,
                             np.asarray(vertex_x, dtype=float)[None, :],
                             need_ddk=False, need_ndot=False)
        n_p = jet_p.n[0]
        Jb = np.broadcast_to(J, (nd, 3, 3))
        G = np.einsum("...m,...lmi,...lj->...ij", state.L,
                      geo["gam4"][..., 1:, :, 1:], Jb)
        state.At = n_p * (Jb + state.s[:, None, None]
                          * (G + np.swapaxes(G, -1, -2)))
    return state


@dataclass
class ConeBundle:
    """Traced bundle: direction grid, vertex, and per-slice history."""

    grid: DirectionGrid
    vertex_t: float
    vertex_x: np.ndarray
    tau: float
    dt: float
    J: np.ndarray | None
    records: list = field(default_factory=list)
    final_state: BundleState | None = None

    @property
    def times(self):
        return np.array([r["t"] for r in self.records])

    def record_arrays(self, key):
        return np.stack([r[key] for r in self.records])

    def alive_fraction(self) -> float:
        return float(self.final_state.alive.mean())


def _record(sampler, state: BundleState, with_pislash: bool = True) -> dict:
    """Per-slice snapshot of transported and pointwise quantities."""
    geo = _geom_at(sampler, state.t, state)
    jet = geo["jet"]
    rec = {
        "t": state.t, "x": state.x.copy(), "s": state.s.copy(),
        "a": state.a.copy(), "vt": state.vt.copy(), "trchi": state.trchi.copy(),
        "w": state.w.copy(), "q": state.q.copy(),
        "chihat": state.chihat.copy(), "zeta": state.zeta.copy(),
        "eA": geo["eAs"].copy(), "N": geo["Nsp"].copy(), "nu": geo["nu"].copy(),
        "alive": state.alive.copy(), "n": geo["n"].copy(),
    }
    if state.At is not None:
        rec["A"] = state.At / state.s[:, None, None]

    # null curvature components and the curvature-flux density
    L, Lb = state.L, geo["Lb"]
    e1, e2 = state.eA[:, 0], state.eA[:, 1]
    r4, g4 = geo["r4"], geo["g4"]

    def c4(R, u, v, wv, z):
        return np.einsum("...abcd,...a,...b,...c,...d->...", R, u, v, wv, z)

    rd = hodge_dual_first(r4, g4)
    alpha = geo["alpha"]
    beta = geo["beta"]
    rho = 0.25 * c4(r4, Lb, L, Lb, L)
    sigma = 0.25 * c4(rd, Lb, L, Lb, L)
    betab = np.stack([0.5 * c4(r4, e1, Lb, Lb, L),
                      0.5 * c4(r4, e2, Lb, Lb, L)], axis=-1)
    rec["rho"], rec["sigma"] = rho, sigma
    rec["cf_density"] = (np.einsum("...AB,...AB->...", alpha, alpha)
                         + np.einsum("...A,...A->...", beta, beta)
                         + rho**2 + sigma**2
                         + np.einsum("...A,...A->...", betab, betab))

    # k-flux density |slash-nabla k|^2 + |nabla_L k|^2
    ginv = geo["ginv"]
    gam4 = geo["gam4"]
    dLk = (np.einsum("...m,...mij->...ij", L, jet.dk)
           - np.einsum("...m,...lmi,...lj->...ij", L, gam4[..., 1:, :, 1:], jet.k)
           - np.einsum("...m,...lmj,...il->...ij", L, gam4[..., 1:, :, 1:], jet.k))
    nLk2 = np.einsum("...ij,...kl,...ik,...jl->...", dLk, dLk, ginv, ginv)
    covdk = covdk_from_jet(jet)
    Nup = np.einsum("...ij,...j->...i", ginv, np.einsum("...ij,...j->...i", jet.g, geo["Nsp"]))
    proj = ginv - np.einsum("...i,...j->...ij", geo["Nsp"], geo["Nsp"])
    slk2 = np.einsum("...mij,...nkl,...mn,...ik,...jl->...",
                     covdk, covdk, proj, ginv, ginv)
    rec["kflux_density"] = slk2 + nLk2

    if with_pislash:
        zbar, eps, slogn, khat, trk = _zeta_bar(geo, state)
        rec["zbar"] = zbar
        rec["eps"] = eps
        rec["slogn"] = slogn
        kframe = np.einsum("...Ai,...Bj,...ij->...AB", geo["eAs"], geo["eAs"], jet.k)
        khat_fr = np.einsum("...Ai,...Bj,...ij->...AB", geo["eAs"], geo["eAs"], khat)
        delta = np.einsum("...i,...j,...ij->...", geo["Nsp"], geo["Nsp"], khat)
        etahat = khat_fr.copy()
        treta = khat_fr[:, 0, 0] + khat_fr[:, 1, 1]
        etahat[:, 0, 0] -= 0.5 * treta
        etahat[:, 1, 1] -= 0.5 * treta
        dNlogn = np.einsum("...i,...i->...", geo["Nsp"], geo["dlogn"])
        lam = -trk / 3.0
        rec["delta"] = delta
        rec["etahat"] = np.stack([etahat[:, 0, 0], etahat[:, 0, 1]], axis=-1)
        rec["dNlogn"] = dNlogn
        rec["kframe"] = kframe
        rec["pislash2"] = (delta**2
                           + np.einsum("...A,...A->...", eps, eps)
                           + np.einsum("...AB,...AB->...", etahat, etahat)
                           + np.einsum("...A,...A->...", slogn, slogn)
                           + dNlogn**2 + lam**2)
        rec["grad_pislash2"] = _grad_pislash2(geo, state, jet, khat, trk,
                                              eps, etahat, delta, slogn, dNlogn)
    return rec


def _grad_pislash2(geo, state, jet, khat, trk, eps, etahat, delta, slogn, dNlogn):
    """|slash-nabla pi-slash|^2 from ambient derivatives + theta corrections.

    theta_AB = -a chi_AB + k_AB relates the S_t second fundamental form
    to the transported chi; all pieces then reduce to sampled slice
    derivatives contracted with the frame.
    """
    gam3 = christoffel3_from_jet(jet)
    covdk = covdk_from_jet(jet, gam3)  # nabla_m k_ij
    ginv = geo["ginv"]
    dtrk = np.einsum("...ij,...mij->...m", ginv, covdk)
    # nabla_m khat_ij  (broadcast the metric over the derivative slot)
    covdkhat = covdk - np.einsum("...m,...ij->...mij", dtrk / 3.0, jet.g)

    eAs, Nsp = geo["eAs"], geo["Nsp"]
    ch = chihat_full(state.chihat)
    chi = ch + 0.5 * state.trchi[:, None, None] * np.eye(2)
    kframe = np.einsum("...Ai,...Bj,...ij->...AB", eAs, eAs, jet.k)
    theta = -state.a[:, None, None] * chi + kframe

    # hessian of log n
    hess_n = hessian_n_from_jet(jet, gam3)
    dlogn = geo["dlogn"]
    hess_logn = hess_n / jet.n[:, None, None] - np.einsum("...i,...j->...ij", dlogn, dlogn)

    eta = np.einsum("...Ai,...Bj,...ij->...AB", eAs, eAs, khat)

    dk_NN = np.einsum("...Am,...p,...q,...mpq->...A", eAs, Nsp, Nsp, covdkhat)
    g_delta = dk_NN + 2.0 * np.einsum("...AB,...B->...A", theta, eps)

    dk_BN = np.einsum("...Am,...Bl,...q,...mlq->...AB", eAs, eAs, Nsp, covdkhat)
    g_eps = (dk_BN - theta * delta[:, None, None]
             + np.einsum("...AC,...BC->...AB", theta, eta))

    dk_BC = np.einsum("...Am,...Bl,...Cq,...mlq->...ABC", eAs, eAs, eAs, covdkhat)
    g_eta = (dk_BC
             - np.einsum("...AB,...C->...ABC", theta, eps)
             - np.einsum("...AC,...B->...ABC", theta, eps))
    g_etahat = g_eta + 0.5 * np.einsum("BC,...A->...ABC", np.eye(2), g_delta)

    hess_fr = np.einsum("...Am,...Bl,...ml->...AB", eAs, eAs, hess_logn)
    g_slogn = hess_fr - theta * dNlogn[:, None, None]

    hess_N = np.einsum("...Am,...l,...ml->...A", eAs, Nsp, hess_logn)
    g_dNlogn = hess_N + np.einsum("...AB,...B->...A", theta, slogn)

    total = (np.einsum("...A,...A->...", g_delta, g_delta)
             + np.einsum("...AB,...AB->...", g_eps, g_eps)
             + np.einsum("...ABC,...ABC->...", g_etahat, g_etahat)
             + np.einsum("...AB,...AB->...", g_slogn, g_slogn)
             + np.einsum("...A,...A->...", g_dNlogn, g_dNlogn))
    return total


def trace_bundle(sampler, vertex_t: float, vertex_x, tau: float, n_steps: int,
                 grid: DirectionGrid, J: np.ndarray | None = None,
                 with_pislash: bool = True,
                 frame_rotation: float = 0.0) -> ConeBundle:
    """Integrate the bundle from the vertex down to t = vertex_t - tau."""
    if tau <= 0 or n_steps < 4:
        raise ConeError("need tau > 0 and at least 4 steps")
    dt = -tau / n_steps
    state = launch_bundle(sampler, vertex_t, vertex_x, grid, J,
                          frame_rotation=frame_rotation)
    bundle = ConeBundle(grid, vertex_t, np.asarray(vertex_x, dtype=float),
                        tau, -dt, J)

    # first step: regular subsystem only, then seed the optical scalars
    state = _rk4_step(sampler, state, dt, seed_phase=True)
    state = _seed_optical(sampler, state, vertex_t, vertex_x, J)
    state = _renormalize(sampler, state)
    bundle.records.append(_record(sampler, state, with_pislash))

    for _ in range(n_steps - 1):
        state = _rk4_step(sampler, state, dt)
        state = _renormalize(sampler, state)
        bundle.records.append(_record(sampler, state, with_pislash))
    bundle.final_state = state
    return bundle


# ---------------------------------------------------------------------------
# per-slice and per-cone reductions
# ---------------------------------------------------------------------------

def surface_quadrature(bundle: ConeBundle, index: int, densities=()) -> dict:
    """Area, radius, and integrals of named record densities at one slice."""
    rec = bundle.records[index]
    grid = bundle.grid
    alive = rec["alive"]
    if alive.mean() < 0.95:
        raise ConeError(f"{100 * (1 - alive.mean()):.1f}% of generators "
                        "degenerate: quadrature refused")
    vt = grid.unflat(rec["vt"])
    area = grid.integrate(vt)
    out = {"t": rec["t"], "area": area, "r": np.sqrt(area / (4.0 * np.pi))}
    for name in densities:
        out[name] = grid.integrate(vt * grid.unflat(rec[name]))
    return out


def cone_integral(bundle: ConeBundle, density_key: str) -> float:
    """int over the cone: sum_slices trapz of (surface integral * n a)."""
    grid = bundle.grid
    vals, ts = [], []
    for rec in bundle.records:
        vt = grid.unflat(rec["vt"])
        na = grid.unflat(rec["n"] * rec["a"])
        f = grid.unflat(rec[density_key])
        vals.append(grid.integrate(vt * na * f))
        ts.append(rec["t"])
    # records run from just below the vertex downward; the sliver between
    # the vertex and the first record carries O(dt^2) and is dropped
    return float(np.trapezoid(vals[::-1], ts[::-1]))


def comparability_report(bundle: ConeBundle) -> dict:
    """Extremes of pairwise ratios among s, r, sqrt(v_t), t_p - t."""
    rows = {"s_over_dt": [], "r_over_dt": [], "sqvt_over_dt": [],
            "s_over_r": [], "sqvt_over_s": [], "sqvt_over_r": []}
    for idx, rec in enumerate(bundle.records):
        dtp = bundle.vertex_t - rec["t"]
        r = surface_quadrature(bundle, idx)["r"]
        s = rec["s"]
        sq = np.sqrt(rec["vt"])
        rows["s_over_dt"].append(s / dtp)
        rows["r_over_dt"].append(r / dtp)
        rows["sqvt_over_dt"].append(sq / dtp)
        rows["s_over_r"].append(s / r)
        rows["sqvt_over_s"].append(sq / s)
        rows["sqvt_over_r"].append(sq / r)
    out = {}
    for name, vals in rows.items():
        arr = np.concatenate([np.atleast_1d(v) for v in vals])
        out[name] = (float(arr.min()), float(arr.max()))
    return out


@dataclass
class FluxReport:
    curvature_flux: float
    k_flux: float
    n1_pislash: dict
    ba_max_a_dev: float
    ba_max_trchi_dev: float
    ba_chihat_sq: float
    ba_nu_sq: float
    comparability: dict


def cone_fluxes(bundle: ConeBundle) -> FluxReport:
    """Curvature flux, k-flux, N1[pi-slash], and bootstrap monitors."""
    grid = bundle.grid
    ts = bundle.times

    cf = cone_integral(bundle, "cf_density")
    kf = cone_integral(bundle, "kflux_density")

    # per-generator L_omega^inf L_t^2 accumulators (BA3, BA4)
    na = bundle.record_arrays("n") * bundle.record_arrays("a")
    ch = bundle.record_arrays("chihat")
    ch2 = 2.0 * np.einsum("...c,...c->...", ch, ch)
    nu2 = bundle.record_arrays("nu") ** 2
    # integrate along each generator (time axis first)
    chi_acc = -np.trapezoid((na * ch2), ts, axis=0)
    nu_acc = -np.trapezoid((na * nu2), ts, axis=0)

    a_dev = np.abs(bundle.record_arrays("a") - 1.0).max()
    trchi_dev = np.abs(bundle.record_arrays("w")).max()

    # N1[pi-slash]: |r^-1 pi|, |slash-nabla pi| by cone integrals; the
    # nabla_L piece differentiates the stored components along generators
    r_of_t = np.array([surface_quadrature(bundle, i)["r"]
                       for i in range(len(bundle.records))])
    p2 = bundle.record_arrays("pislash2")
    gp2 = bundle.record_arrays("grad_pislash2")
    vt = bundle.record_arrays("vt")

    def cone_int(dens):
        per_slice = np.sum(dens * vt * na * grid.flat(grid.weights)[None, :], axis=1)
        return float(np.trapezoid(per_slice[::-1], ts[::-1]))

    n1_r = np.sqrt(cone_int(p2 / r_of_t[:, None] ** 2))
    n1_grad = np.sqrt(cone_int(gp2))

    dl2 = _nabla_L_pislash2(bundle)
    n1_l = np.sqrt(cone_int(dl2))

    return FluxReport(
        curvature_flux=cf, k_flux=kf,
        n1_pislash={"r_inv": n1_r, "slash_nabla": n1_grad, "nabla_L": n1_l,
                    "total": n1_r + n1_grad + n1_l},
        ba_max_a_dev=float(a_dev), ba_max_trchi_dev=float(trchi_dev),
        ba_chihat_sq=float(chi_acc.max()), ba_nu_sq=float(nu_acc.max()),
        comparability=comparability_report(bundle),
    )


def _nabla_L_pislash2(bundle: ConeBundle) -> np.ndarray:
    """|nabla_L pi-slash|^2 via d/ds of stored components along generators.

    The transported frame is parallel up to the per-step re-projection,
    so component time series differentiate into nabla-slash_L up to the
    (frame-invariant-canceling) rotation residue; this feeds a logged
    monitor, not an asserted identity.
    """
    ts = bundle.times
    na = bundle.record_arrays("n") * bundle.record_arrays("a")
    pieces = []
    for key, comps in (("delta", 1), ("eps", 2), ("etahat", 2),
                       ("slogn", 2), ("dNlogn", 1)):
        arr = bundle.record_arrays(key)
        if comps == 1:
            arr = arr[..., None]
        ddt = np.gradient(arr, ts, axis=0)
        dds = -ddt / na[..., None]
        pieces.append(np.einsum("...c,...c->...", dds, dds))
    lam_term = (1.0 / (3.0 * na)) ** 2
    return sum(pieces) + lam_term


def vertex_k_trace(sampler, vertex_t: float, vertex_x, tau: float,
                   n_samples: int = 201):
    """int |k(Phi(t))|^2 n dt along the integral curve of T through p.

    In transported coordinates Phi is the constant-x curve, so the
    integrand samples the timeline of slice data at the vertex position.
    """
    ts = np.linspace(vertex_t - tau, vertex_t, n_samples)
    x = np.asarray(vertex_x, dtype=float)[None, :]
    vals, ks = [], []
    for t in ts:
        jet = sampler.jet2(t, x, need_ddk=False, need_ndot=False)
        gi = jet.ginv()
        k2 = np.einsum("...ia,...jb,...ij,...ab->...", gi, gi, jet.k, jet.k)[0]
        vals.append(k2 * jet.n[0])
        ks.append(np.sqrt(k2))
    return float(np.trapezoid(vals, ts)), ts, np.array(ks)
