"""The wave-equation identity for k and its D_0 k precursor.

Closed-form oracle used below (hand derivation, homogeneous slices):
on Kasner every gradient term vanishes, so
  Box k_ii = 2 (k^3)_ii - n^-1 k_ii = p_i (1 - 2 p_i^2) tau^{2 p_i - 3},
which at tau = 1 and p = (2/3, 2/3, -1/3) is diag(2/27, 2/27, -7/27).
"""

import numpy as np
import pytest

from cmcnull import wavek
from cmcnull.exact import DEFAULT_KASNER, KasnerParams, kasner_slice, kasner_stack
from cmcnull.grid import Lattice, constant_scalar, constant_sym6
from cmcnull.state import AdmState, SpacetimeStack

P = np.array([2 / 3, 2 / 3, -1 / 3])
BOXK_TAU1 = P * (1 - 2 * P**2)  # (2/27, 2/27, -7/27)


def minkowski_stack(lat, delta=0.01):
    def mk(t):
        return AdmState(t, constant_sym6(lat, [1.0, 1.0, 1.0]),
                        constant_sym6(lat, [0.0, 0.0, 0.0]),
                        constant_scalar(lat, 1.0))
    return SpacetimeStack(tuple(mk(-1.0 + m * delta) for m in range(-2, 3)))


class TestD0kIdentity:
    def test_kasner_sides_closed_form(self):
        lat = Lattice(8)
        stack = kasner_stack(DEFAULT_KASNER, -1.0, 1e-3, lat)
        res, direct, formula = wavek.d0k_identity_residual(stack, return_sides=True)
        expect = np.diag([2 / 3, 2 / 3, -1 / 3])
        assert np.abs(direct[0, 0, 0] - expect).max() < 1e-6
        assert np.abs(formula[0, 0, 0] - expect).max() < 1e-10
        assert np.abs(res.data).max() < 1e-6

    def test_minkowski_zero(self):
        lat = Lattice(8)
        res = wavek.d0k_identity_residual(minkowski_stack(lat))
        assert np.abs(res.data).max() < 1e-13

    def test_residual_convergence(self):
        lat = Lattice(8)
        errs = []
        for delta in (0.02, 0.01, 0.005):
            stack = kasner_stack(DEFAULT_KASNER, -1.0, delta, lat)
            errs.append(np.abs(wavek.d0k_identity_residual(stack).data).max())
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders > 3.5)


class TestBoxK:
    def test_rhs_kasner_closed_form(self):
        lat = Lattice(8)
        st = kasner_slice(DEFAULT_KASNER, -1.0, lat)
        rhs = wavek.box_k_rhs(st)
        assert np.allclose(np.diag(rhs.mat()[0, 0, 0]), BOXK_TAU1, atol=1e-13)

    def test_rhs_kasner_time_scaling(self):
        lat = Lattice(8)
        for t in (-1.0, -0.5, -1.7):
            tau = -1.0 / t
            st = kasner_slice(DEFAULT_KASNER, t, lat)
            rhs = wavek.box_k_rhs(st)
            expect = P * (1 - 2 * P**2) * tau ** (2 * P - 3)
            assert np.allclose(np.diag(rhs.mat()[0, 0, 0]), expect, rtol=1e-12)

    def test_lhs_matches_rhs_kasner(self):
        lat = Lattice(8)
        stack = kasner_stack(DEFAULT_KASNER, -1.0, 0.002, lat)
        lhs = wavek.box_k_lhs(stack)
        assert np.allclose(np.diag(lhs.mat()[0, 0, 0]), BOXK_TAU1, atol=1e-7)

    def test_flat_k_zero_rhs(self):
        lat = Lattice(8)
        st = AdmState(-1.0, constant_sym6(lat, [1.0, 1.0, 1.0]),
                      constant_sym6(lat, [0.0, 0.0, 0.0]),
                      constant_scalar(lat, 1.0),
                      n_dot=constant_scalar(lat, 2.0))
        rhs = wavek.box_k_rhs(st)
        assert np.abs(rhs.data).max() == 0.0

    def test_ndot_linearity(self):
        lat = Lattice(8)
        st = kasner_slice(DEFAULT_KASNER, -0.8, lat)
        _, terms1 = wavek.box_k_rhs(st, per_term=True)
        st2 = AdmState(st.t, st.g, st.k, st.n,
                       n_dot=constant_scalar(lat, 2.0 * st.n_dot.data[0, 0, 0]))
        _, terms2 = wavek.box_k_rhs(st2, per_term=True)
        for name in wavek.TERM_NAMES:
            a, b = terms1[name].data, terms2[name].data
            if name in ("ndot_hess_n", "hess_ndot"):
                assert np.allclose(b, 2.0 * a)
            else:
                assert np.array_equal(a, b)


class TestBoxKResidual:
    def test_minkowski_noise_floor(self):
        lat = Lattice(8)
        slices = tuple(
            AdmState(-1.0 + m * 0.01, constant_sym6(lat, [1.0, 1.0, 1.0]),
                     constant_sym6(lat, [0.0, 0.0, 0.0]),
                     constant_scalar(lat, 1.0),
                     n_dot=constant_scalar(lat, 0.0))
            for m in range(-2, 3))
        rep = wavek.box_k_residual(SpacetimeStack(slices))
        assert rep.residual_linf < 1e-12

    def test_convergence_order(self):
        lat = Lattice(8)
        errs = []
        for delta in (0.04, 0.02, 0.01):
            stack = kasner_stack(DEFAULT_KASNER, -1.0, delta, lat)
            errs.append(wavek.box_k_residual(stack).residual_linf)
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders > 3.5)

    def test_corruption_tripwire(self):
        lat = Lattice(8)
        plateaus = []
        for delta in (0.02, 0.01):
            stack = kasner_stack(DEFAULT_KASNER, -1.0, delta, lat)
            plateaus.append(
                wavek.box_k_residual(stack, corrupt_term="kkk").residual_linf)
        # corrupted residual does not converge: stays at the term scale
        assert plateaus[1] > 0.5 * plateaus[0]
        assert plateaus[1] > 0.05

    def test_axis_permutation_symmetry(self):
        lat = Lattice(8)
        stack_a = kasner_stack(DEFAULT_KASNER, -1.0, 0.01, lat)
        stack_b = kasner_stack(KasnerParams(-1 / 3, 2 / 3, 2 / 3), -1.0, 0.01, lat)
        ra = wavek.box_k_residual(stack_a)
        rb = wavek.box_k_residual(stack_b)
        assert ra.residual_linf == pytest.approx(rb.residual_linf, rel=1e-8)

    def test_report_serializes(self):
        lat = Lattice(8)
        stack = kasner_stack(DEFAULT_KASNER, -1.0, 0.01, lat)
        rep = wavek.box_k_residual(stack)
        import json

        parsed = json.loads(rep.to_json())
        assert set(parsed["term_l2"]) == set(wavek.TERM_NAMES)
        assert parsed["n_pts"] == 8
