"""Closed-form vacuum backgrounds in CMC conventions.

The Kasner family in proper time tau reads -dtau^2 + sum_i tau^{2 p_i}
dx_i^2 with sum p_i = sum p_i^2 = 1.  Its slices have mean curvature
Tr k = -1/tau, so the mean-curvature time is t = -1/tau (t < 0) and the
lapse relating the two time labels is n = dtau/dt = 1/t^2, which
solves -Lap n + |k|^2 n = 1 identically.  These slices are the oracle
for every identity and convergence test in the package; Minkowski in
maximal slicing (n = 1, k = 0) covers the trivial null-cone cases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Lattice, ScalarField, SymTensor2Field, constant_scalar, constant_sym6
from .jets import Jet2
from .state import AdmState

VACUUM_TOL = 1e-12


@dataclass(frozen=True)
class KasnerParams:
    p1: float
    p2: float
    p3: float

    def __post_init__(self):
        s1 = self.p1 + self.p2 + self.p3
        s2 = self.p1**2 + self.p2**2 + self.p3**2
        if abs(s1 - 1.0) > VACUUM_TOL or abs(s2 - 1.0) > VACUUM_TOL:
            raise ValueError(
                f"not a vacuum Kasner triple: sum p = {s1!r}, sum p^2 = {s2!r}"
            )

    @property
    def p(self) -> np.ndarray:
        return np.array([self.p1, self.p2, self.p3])


DEFAULT_KASNER = KasnerParams(2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0)


def axisymmetric_kasner(p1: float) -> KasnerParams:
    """The Kasner circle point with p2 = p3, given p1."""
    p23 = (1.0 - p1) / 2.0
    return KasnerParams(p1, p23, p23)


def _tau(t: float) -> float:
    if not t < 0:
        raise ValueError(f"mean-curvature time must be negative, got {t}")
    return -1.0 / t


def kasner_fields(params: KasnerParams, t: float):
    """Closed-form (g_diag, k_diag, n, n_dot) at mean-curvature time t."""
    tau = _tau(t)
    p = params.p
    g_diag = tau ** (2 * p)
    k_diag = -p * tau ** (2 * p - 1)
    n = tau**2
    n_dot = 2.0 * tau**3
    return g_diag, k_diag, n, n_dot


def kasner_slice(params: KasnerParams, t: float, lat: Lattice) -> AdmState:
    """Exact Kasner CMC slice on the torus (spatially constant fields)."""
    g_diag, k_diag, n, n_dot = kasner_fields(params, t)
    return AdmState(
        t=t,
        g=constant_sym6(lat, g_diag),
        k=constant_sym6(lat, k_diag),
        n=constant_scalar(lat, n),
        n_dot=constant_scalar(lat, n_dot),
    )


def _dtau_pow(m: float, tau: float, order: int) -> float:
    """d^order/dt^order of tau^m, using d tau/dt = tau^2."""
    if order == 0:
        return tau**m
    if order == 1:
        return m * tau ** (m + 1)
    if order == 2:
        return m * (m + 1) * tau ** (m + 2)
    raise ValueError(order)


class KasnerSampler:
    """Pointwise exact second-order jets of the Kasner background.

    Spatial derivatives vanish identically; time derivatives are closed
    form.  Positions are accepted (and ignored) so the sampler is a
    drop-in spacetime provider for the cone engine.
    """

    def __init__(self, params: KasnerParams = DEFAULT_KASNER):
        self.params = params

    def jet2(self, t: float, points: np.ndarray, need_ddk: bool = False,
             need_ndot: bool = True) -> Jet2:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        m = pts.shape[0]
        tau = _tau(t)
        p = self.params.p

        n = np.full(m, tau**2)
        dn = np.zeros((m, 4))
        dn[:, 0] = 2.0 * tau**3
        ddn = np.zeros((m, 4, 4))
        ddn[:, 0, 0] = 6.0 * tau**4

        g = np.zeros((m, 3, 3))
        dg = np.zeros((m, 4, 3, 3))
        ddg = np.zeros((m, 4, 4, 3, 3))
        k = np.zeros((m, 3, 3))
        dk = np.zeros((m, 4, 3, 3))
        ddk = np.zeros((m, 4, 4, 3, 3)) if need_ddk else None
        for i in range(3):
            g[:, i, i] = _dtau_pow(2 * p[i], tau, 0)
            dg[:, 0, i, i] = _dtau_pow(2 * p[i], tau, 1)
            ddg[:, 0, 0, i, i] = _dtau_pow(2 * p[i], tau, 2)
            k[:, i, i] = -p[i] * _dtau_pow(2 * p[i] - 1, tau, 0)
            dk[:, 0, i, i] = -p[i] * _dtau_pow(2 * p[i] - 1, tau, 1)
            if need_ddk:
                ddk[:, 0, 0, i, i] = -p[i] * _dtau_pow(2 * p[i] - 1, tau, 2)

        jet = Jet2(n=n, dn=dn, ddn=ddn, g=g, dg=dg, ddg=ddg, k=k, dk=dk, ddk=ddk)
        if need_ndot:
            jet.ndot = np.full(m, 2.0 * tau**3)
            jet.dndot = np.zeros((m, 3))
            jet.ddndot = np.zeros((m, 3, 3))
        return jet


class MinkowskiSampler:
    """Flat spacetime in maximal slicing: n = 1, g = delta, k = 0."""

    def jet2(self, t: float, points: np.ndarray, need_ddk: bool = False,
             need_ndot: bool = True) -> Jet2:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        m = pts.shape[0]
        g = np.zeros((m, 3, 3))
        g[:, (0, 1, 2), (0, 1, 2)] = 1.0
        jet = Jet2(
            n=np.ones(m),
            dn=np.zeros((m, 4)),
            ddn=np.zeros((m, 4, 4)),
            g=g,
            dg=np.zeros((m, 4, 3, 3)),
            ddg=np.zeros((m, 4, 4, 3, 3)),
            k=np.zeros((m, 3, 3)),
            dk=np.zeros((m, 4, 3, 3)),
            ddk=np.zeros((m, 4, 4, 3, 3)) if need_ddk else None,
        )
        if need_ndot:
            jet.ndot = np.zeros(m)
            jet.dndot = np.zeros((m, 3))
            jet.ddndot = np.zeros((m, 3, 3))
        return jet


def kasner_spacetime_sample(params: KasnerParams, t: float, points=((0.0, 0.0, 0.0),)) -> Jet2:
    """Closed-form jet of (n, g, k) and all first/second derivatives."""
    return KasnerSampler(params).jet2(t, points, need_ddk=True)


def kasner_stack(params: KasnerParams, t: float, delta: float, lat: Lattice):
    """Five analytically-sampled slices centered at t, spacing delta."""
    from .state import SpacetimeStack

    ts = t + delta * np.arange(-2, 3)
    if ts[-1] >= 0:
        raise ValueError("stack reaches non-negative mean-curvature time")
    return SpacetimeStack(tuple(kasner_slice(params, float(tj), lat) for tj in ts))


def minkowski_cone_reference(s) -> dict:
    """Exact Minkowski backward-cone data at affine parameter s > 0."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("affine parameter must be positive")
    return {
        "a": np.ones_like(s),
        "trchi": 2.0 / s,
        "chihat": np.zeros(s.shape + (2,)),
        "zeta": np.zeros(s.shape + (2,)),
        "v_t": s**2,
    }
