"""Grid-backed spacetime sampling for the cone engine.

A StackTimeline wraps a sequence of uniformly spaced AdmStates and
serves second-order jets at arbitrary events: cubic interpolation in
space of precomputed grid-derivative fields, 5-point Lagrange in time.
It satisfies the same provider contract as the exact samplers, so the
null-cone engine runs unchanged on evolved or sampled slice data.
"""

from __future__ import annotations

import numpy as np

from .grid import fd_axis, interpolate_data, second_derivs, sym6_to_mat
from .jets import Jet2


def _lagrange_coeffs(nodes: np.ndarray, t: float):
    """(values, d/dt, d2/dt2) of the Lagrange basis at t."""
    m = len(nodes)
    c0 = np.ones(m)
    c1 = np.zeros(m)
    c2 = np.zeros(m)
    for i in range(m):
        v, d1, d2 = 1.0, 0.0, 0.0
        for j in range(m):
            if j == i:
                continue
            w = (t - nodes[j]) / (nodes[i] - nodes[j])
            dw = 1.0 / (nodes[i] - nodes[j])
            d2 = d2 * w + 2.0 * d1 * dw
            d1 = d1 * w + v * dw
            v = v * w
        c0[i], c1[i], c2[i] = v, d1, d2
    return c0, c1, c2


class _SliceDerivs:
    """Cached spatial-derivative grids of one slice's fields."""

    def __init__(self, state):
        lat = state.lattice
        h = lat.spacing
        self.lat = lat

        def jets_of(data):
            d1 = np.stack([fd_axis(data, ax, h, 1) for ax in range(3)], axis=-1)
            d2 = np.moveaxis(second_derivs(data, h), (0, 1), (-2, -1))
            return data, d1, d2

        self.n = jets_of(state.n.data)
        self.g = jets_of(state.g.mat())
        self.k = jets_of(state.k.mat())
        self.ndot = None if state.n_dot is None else jets_of(state.n_dot.data)


class StackTimeline:
    """Timeline of slices with jet sampling at arbitrary (t, x)."""

    def __init__(self, states, window: int = 5):
        times = np.array([s.t for s in states])
        if len(states) < window:
            raise ValueError(f"need at least {window} slices")
        deltas = np.diff(times)
        if np.any(deltas <= 0) or np.max(np.abs(deltas - deltas[0])) > 1e-10:
            raise ValueError("timeline must be uniform and increasing")
        self.states = list(states)
        self.times = times
        self.window = window
        self._cache: dict[int, _SliceDerivs] = {}

    def _derivs(self, idx: int) -> _SliceDerivs:
        if idx not in self._cache:
            self._cache[idx] = _SliceDerivs(self.states[idx])
        return self._cache[idx]

    def _window_indices(self, t: float):
        half = self.window // 2
        center = int(np.clip(np.searchsorted(self.times, t) - 1,
                             half, len(self.times) - half - 1))
        return range(center - half, center + half + 1)

    def jet2(self, t: float, points: np.ndarray, need_ddk: bool = False,
             need_ndot: bool = True) -> Jet2:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        m = pts.shape[0]
        idxs = list(self._window_indices(t))
        nodes = self.times[idxs]
        c0, c1, c2 = _lagrange_coeffs(nodes, t)
        lat = self.states[idxs[0]].lattice

        def sample(pick, comp_shape):
            """Time-combined (value, dt, dtt, spatial d1, d2, dt-spatial)."""
            val = np.zeros((m,) + comp_shape)
            dt_v = np.zeros((m,) + comp_shape)
            dtt = np.zeros((m,) + comp_shape)
            d1 = np.zeros((m,) + comp_shape + (3,))
            dt_d1 = np.zeros((m,) + comp_shape + (3,))
            d2 = np.zeros((m,) + comp_shape + (3, 3))
            for w0, w1, w2, idx in zip(c0, c1, c2, idxs):
                f, fd1, fd2 = pick(self._derivs(idx))
                fv = interpolate_data(f, lat, pts)
                f1 = interpolate_data(fd1, lat, pts)
                f2 = interpolate_data(fd2, lat, pts)
                val += w0 * fv
                dt_v += w1 * fv
                dtt += w2 * fv
                d1 += w0 * f1
                dt_d1 += w1 * f1
                d2 += w0 * f2
            return val, dt_v, dtt, d1, dt_d1, d2

    # assemble the 4-slot derivative layout used by Jet2
        def pack(val, dt_v, dtt, d1, dt_d1, d2, comp_shape):
            nc = len(comp_shape)
            dv = np.zeros((m, 4) + comp_shape)
            ddv = np.zeros((m, 4, 4) + comp_shape)
            dv[:, 0] = dt_v
            dv[:, 1:] = np.moveaxis(d1, -1, 1)
            ddv[:, 0, 0] = dtt
            mixed = np.moveaxis(dt_d1, -1, 1)
            ddv[:, 0, 1:] = mixed
            ddv[:, 1:, 0] = mixed
            ddv[:, 1:, 1:] = np.moveaxis(d2, (-2, -1), (1, 2))
            return dv, ddv

        nv = sample(lambda d: d.n, ())
        dn, ddn = pack(*nv, ())
        gv = sample(lambda d: d.g, (3, 3))
        dg, ddg = pack(*gv, (3, 3))
        kv = sample(lambda d: d.k, (3, 3))
        dk, ddk = pack(*kv, (3, 3))

        jet = Jet2(n=nv[0], dn=dn, ddn=ddn, g=gv[0], dg=dg, ddg=ddg,
                   k=kv[0], dk=dk, ddk=ddk if need_ddk else None)
        if need_ndot:
            if self._derivs(idxs[0]).ndot is None:
                raise ValueError("timeline slices lack n_dot fields")
            ndv = sample(lambda d: d.ndot, ())
            jet.ndot = ndv[0]
            jet.dndot = ndv[3]
            jet.ddndot = ndv[5]
        return jet
