"""Weyl E/H, Bel-Robinson energy, Gronwall bound, 4D stack operators."""

import numpy as np
import pytest

from cmcnull import curvature, evolution
from cmcnull.exact import DEFAULT_KASNER, KasnerParams, kasner_slice, kasner_stack
from cmcnull.grid import Lattice, constant_scalar, constant_sym6
from cmcnull.jets import g4_from_jet
from cmcnull.state import AdmState, SpacetimeStack


def minkowski_stack(lat, t=-1.0, delta=0.01):
    slices = []
    for m in range(-2, 3):
        slices.append(AdmState(
            t + m * delta,
            constant_sym6(lat, [1.0, 1.0, 1.0]),
            constant_sym6(lat, [0.0, 0.0, 0.0]),
            constant_scalar(lat, 1.0),
        ))
    return SpacetimeStack(tuple(slices))


class TestElectricMagnetic:
    def test_kasner_electric_closed_form(self):
        lat = Lattice(8)
        st = kasner_slice(DEFAULT_KASNER, -1.0, lat)
        eh = curvature.electric_magnetic(st)
        em = eh.E.mat()[0, 0, 0]
        assert np.allclose(np.diag(em), [2 / 9, 2 / 9, -4 / 9], atol=1e-12)
        assert np.abs(eh.H.data).max() < 1e-12

    def test_tracelessness_equals_hamiltonian(self):
        lat = Lattice(8)
        st = kasner_slice(DEFAULT_KASNER, -0.75, lat)
        eh = curvature.electric_magnetic(st)
        from cmcnull.grid import metric_pointwise

        _, ginv, _ = metric_pointwise(st.g)
        tre = np.einsum("...ij,...ij->...", ginv, eh.E.mat())
        ham = evolution.constraint_residuals(st)["hamiltonian"]["Linf"]
        assert np.abs(tre).max() <= ham + 1e-12

    def test_flat_zero(self):
        lat = Lattice(8)
        st = AdmState(-1.0, constant_sym6(lat, [1.0, 1.0, 1.0]),
                      constant_sym6(lat, [0.0, 0.0, 0.0]),
                      constant_scalar(lat, 1.0))
        eh = curvature.electric_magnetic(st)
        assert np.abs(eh.belrobinson_density.data).max() == 0.0


class TestBelRobinson:
    def test_kasner_unit_box(self):
        lat = Lattice(8)
        st = kasner_slice(DEFAULT_KASNER, -1.0, lat)
        q = curvature.belrobinson_energy(st)
        assert q == pytest.approx(8.0 / 27.0, abs=1e-10)

    def test_kasner_scaling(self):
        lat = Lattice(8, box_len=2.0)
        p = DEFAULT_KASNER.p
        coeff = float(np.sum(p**2 * (1 - p) ** 2))
        for t in (-1.0, -0.5):
            st = kasner_slice(DEFAULT_KASNER, t, lat)
            tau = -1.0 / t
            q = curvature.belrobinson_energy(st)
            assert q == pytest.approx(coeff * tau**-3 * 8.0, rel=1e-12)

    def test_density_nonnegative(self):
        lat = Lattice(8)
        st = kasner_slice(DEFAULT_KASNER, -0.9, lat)
        eh = curvature.electric_magnetic(st)
        assert eh.belrobinson_density.data.min() >= 0.0


class TestGronwall:
    def test_kasner_run_satisfied(self):
        lat = Lattice(8)
        times = np.linspace(-1.0, -0.5, 11)
        qs, npis = [], []
        for t in times:
            st = kasner_slice(DEFAULT_KASNER, t, lat)
            qs.append(curvature.belrobinson_energy(st))
            _, _, _, npi = curvature.deformation_sup(st)
            npis.append(npi)
        out = curvature.gronwall_check(times, qs, npis)
        assert out["satisfied"]
        assert np.all(out["bound"] >= qs)

    def test_single_point_trivial(self):
        out = curvature.gronwall_check([-1.0], [0.3], [1.0])
        assert out["satisfied"]

    def test_synthetic_violation_flagged(self):
        times = [-1.0, -0.9, -0.8]
        qs = [1.0, 2.5, 1.0]
        pis = [0.0, 0.0, 0.0]
        out = curvature.gronwall_check(times, qs, pis)
        assert not out["satisfied"]
        assert out["first_violation"] == pytest.approx(-0.9)


class TestBreakdownMonitor:
    def test_kasner_k0_closed_form(self):
        # |pi|_inf = |t| on Kasner slices, so K0 = int_{-1}^{-1/2}|t| = 3/8
        lat = Lattice(8)
        mon = curvature.BreakdownMonitor()
        for t in np.linspace(-1.0, -0.5, 201):
            curvature.breakdown_monitor_update(mon, kasner_slice(DEFAULT_KASNER, t, lat))
        assert mon.k0_accum == pytest.approx(3.0 / 8.0, abs=1e-5)

    def test_monotone(self):
        lat = Lattice(8)
        mon = curvature.BreakdownMonitor()
        prev = 0.0
        for t in (-1.0, -0.9, -0.8):
            curvature.breakdown_monitor_update(mon, kasner_slice(DEFAULT_KASNER, t, lat))
            assert mon.k0_accum >= prev
            prev = mon.k0_accum


class TestStackOperators:
    def test_minkowski_christoffels_vanish(self):
        lat = Lattice(8)
        gam = curvature.spacetime_christoffel(minkowski_stack(lat))
        assert np.abs(gam).max() < 1e-13

    def test_minkowski_riemann_vanishes(self):
        lat = Lattice(8)
        r4 = curvature.spacetime_riemann(minkowski_stack(lat))
        assert np.abs(r4).max() < 1e-12

    def test_kasner_electric_from_riemann(self):
        lat = Lattice(8)
        stack = kasner_stack(DEFAULT_KASNER, -1.0, 0.005, lat)
        r4, jet = curvature.spacetime_riemann(stack, return_jet=True)
        g4, _, _ = g4_from_jet(jet)
        E4, H4 = curvature.eh_from_riemann4(r4, g4)
        eh = curvature.electric_magnetic(stack.center)
        assert np.abs(E4 - eh.E.mat()).max() < 1e-6
        assert np.abs(H4 - eh.H.mat()).max() < 1e-6

    def test_vacuum_residual_converges(self):
        lat = Lattice(8)
        errs = []
        for delta in (0.02, 0.01, 0.005):
            stack = kasner_stack(DEFAULT_KASNER, -1.0, delta, lat)
            errs.append(curvature.vacuum_residual(stack))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders > 3.0)

    def test_riemann_norm_matches_eh(self):
        lat = Lattice(8)
        stack = kasner_stack(DEFAULT_KASNER, -1.0, 0.002, lat)
        r4, jet = curvature.spacetime_riemann(stack, return_jet=True)
        g4, _, _ = g4_from_jet(jet)
        raw = curvature.riemann_norm2_gt(r4, g4)
        eh = curvature.electric_magnetic(stack.center)
        assert np.allclose(raw, 8.0 * eh.belrobinson_density.data, rtol=1e-5)

    def test_bel_robinson_tttt_matches_eh(self):
        lat = Lattice(8)
        stack = kasner_stack(DEFAULT_KASNER, -1.0, 0.002, lat)
        r4, jet = curvature.spacetime_riemann(stack, return_jet=True)
        g4, _, _ = g4_from_jet(jet)
        q = curvature.bel_robinson_tttt(r4, g4)
        eh = curvature.electric_magnetic(stack.center)
        assert np.allclose(q, eh.belrobinson_density.data, rtol=1e-5)


class TestNullDecompose:
    def frame_at_kasner_tau1(self):
        # at tau = 1 the metric is euclidean: build the frame by hand
        T = np.array([1.0, 0, 0, 0])
        N = np.array([0.0, 1, 0, 0])
        L = -(T + N)
        Lb = -(T - N)
        e1 = np.array([0.0, 0, 1, 0])
        e2 = np.array([0.0, 0, 0, 1])
        return L, Lb, e1, e2

    def test_minkowski_all_zero(self):
        lat = Lattice(8)
        r4 = curvature.spacetime_riemann(minkowski_stack(lat))
        g4 = np.diag([-1.0, 1, 1, 1]) * np.ones(lat.shape + (4, 4))
        L, Lb, e1, e2 = self.frame_at_kasner_tau1()
        b = lat.shape
        out = curvature.null_decompose(
            r4, g4,
            np.broadcast_to(L, b + (4,)), np.broadcast_to(Lb, b + (4,)),
            np.broadcast_to(e1, b + (4,)), np.broadcast_to(e2, b + (4,)))
        for v in out.values():
            assert np.abs(v).max() < 1e-12

    def test_kasner_alpha_symmetric_traceless(self):
        lat = Lattice(8)
        stack = kasner_stack(DEFAULT_KASNER, -1.0, 0.002, lat)
        r4, jet = curvature.spacetime_riemann(stack, return_jet=True)
        g4, _, _ = g4_from_jet(jet)
        L, Lb, e1, e2 = self.frame_at_kasner_tau1()
        b = lat.shape
        out = curvature.null_decompose(
            r4, g4,
            np.broadcast_to(L, b + (4,)).copy(), np.broadcast_to(Lb, b + (4,)).copy(),
            np.broadcast_to(e1, b + (4,)).copy(), np.broadcast_to(e2, b + (4,)).copy(),
            frame_tol=1e-8)
        al = out["alpha"]
        assert np.abs(al - np.swapaxes(al, -1, -2)).max() < 1e-10
        assert np.abs(al[..., 0, 0] + al[..., 1, 1]).max() < 1e-5

    def test_bad_frame_rejected(self):
        lat = Lattice(8)
        r4 = curvature.spacetime_riemann(minkowski_stack(lat))
        g4 = np.diag([-1.0, 1, 1, 1]) * np.ones(lat.shape + (4, 4))
        L, Lb, e1, e2 = self.frame_at_kasner_tau1()
        b = lat.shape
        with pytest.raises(ValueError, match="normalization"):
            curvature.null_decompose(
                r4, g4,
                np.broadcast_to(2 * L, b + (4,)), np.broadcast_to(Lb, b + (4,)),
                np.broadcast_to(e1, b + (4,)), np.broadcast_to(e2, b + (4,)))
