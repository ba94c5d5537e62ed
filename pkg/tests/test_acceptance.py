"""Acceptance suite: every exit criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -s` to see one pass/fail line
per criterion; a summary is also written to acceptance_report.txt in the
repository root.
"""

import time

import numpy as np
import pytest

from cmcnull import cone, curvature, evolution, wavek
from cmcnull.angular import DirectionGrid, SurfacePatch
from cmcnull.curvature import bel_robinson_from_null, null_decompose
from cmcnull.exact import (
    DEFAULT_KASNER,
    KasnerParams,
    KasnerSampler,
    MinkowskiSampler,
    kasner_fields,
    kasner_slice,
    kasner_stack,
)
from cmcnull.grid import Lattice
from cmcnull.jets import g4_from_jet, riemann4_from_jet
from cmcnull.kirchhoff import kirchhoff_residual

_D = np.sqrt(0.68)
GENERIC_KASNER = KasnerParams(0.8, (0.2 + _D) / 2, (0.2 - _D) / 2)
J_XX = np.diag([1.0, 0.0, 0.0])

RESULTS = []


def report(num, name, passed, detail):
    line = f"ACCEPTANCE {num:2d} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    RESULTS.append(line)
    print(line)
    assert passed, line


@pytest.fixture(scope="module", autouse=True)
def summary():
    yield
    text = "\n".join(RESULTS) + "\n"
    print("\n" + text)
    with open("acceptance_report.txt", "w") as fh:
        fh.write(text)


@pytest.fixture(scope="module")
def kasner_run():
    """Shared evolution over [-1, -1/2] with per-step monitors."""
    lat = Lattice(8)
    state = kasner_slice(DEFAULT_KASNER, -1.0, lat)
    n_steps = 170
    dt = 0.5 / n_steps
    rows = []
    times, qs, npis = [], [], []
    mon = curvature.BreakdownMonitor()

    def record(st):
        eh = curvature.electric_magnetic(st)
        q = curvature.belrobinson_energy(st, eh)
        k_inf, _, _, npi = curvature.deformation_sup(st)
        curvature.breakdown_monitor_update(mon, st, q)
        vol = evolution.volume_monitor(st)
        rows.append({"t": st.t, "n_min": st.n.data.min(),
                     "n_max": st.n.data.max(), "k_inf": k_inf,
                     "weighted": vol["weighted"]})
        times.append(st.t)
        qs.append(q)
        npis.append(npi)

    record(state)
    for _ in range(n_steps):
        state = evolution.step_rk4(state, dt)
        record(state)
    return {"rows": rows, "mon": mon, "times": times, "qs": qs,
            "npis": npis, "final": state}


def test_criterion_1_lapse_oracle():
    lat = Lattice(32)
    st = kasner_slice(DEFAULT_KASNER, -1.0, lat)
    start = time.perf_counter()
    n = evolution.solve_lapse(st.g, st.k)
    elapsed = time.perf_counter() - start
    dev = float(np.abs(n.data - 1.0).max())
    report(1, "Kasner lapse oracle (32^3)",
           dev <= 1e-8 and elapsed < 10.0,
           f"max|n-1| = {dev:.2e} (tol 1e-8), runtime {elapsed:.2f}s (< 10s)")


def test_criterion_2_sandwich_and_volume(kasner_run):
    rows = kasner_run["rows"]
    slack = 1e-8
    sandwich = all(1.0 / r["k_inf"] - slack <= r["n_min"]
                   and r["n_max"] <= 3.0 / r["t"] ** 2 + slack for r in rows)
    weighted = np.array([r["weighted"] for r in rows])
    monotone = bool(np.all(np.diff(weighted) <= 1e-10))
    taus = -1.0 / np.array([r["t"] for r in rows])
    vol_err = float(np.abs(weighted - 1.0 / taus**2).max())
    report(2, "max principle sandwich + volume monotonicity",
           sandwich and monotone and vol_err <= 1e-6,
           f"sandwich {sandwich}, monotone {monotone}, "
           f"max||t|^3 vol - L^3/tau^2| = {vol_err:.2e} (tol 1e-6)")


def test_criterion_3_evolution_convergence():
    lat = Lattice(8)
    errs = []
    for n_steps in (160, 320, 640):
        st = kasner_slice(DEFAULT_KASNER, -1.0, lat)
        dt = 0.5 / n_steps
        for _ in range(n_steps):
            st = evolution.step_rk4(st, dt)
        g_exact, _, _, _ = kasner_fields(DEFAULT_KASNER, st.t)
        errs.append(float(np.abs(np.diagonal(
            st.g.mat(), axis1=-2, axis2=-1)[0, 0, 0] - g_exact).max()))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    ok = bool(np.all(np.abs(orders - 4.0) <= 0.5))
    report(3, "RK4 evolution order 4.0 +- 0.5",
           ok, f"errors {['%.3e' % e for e in errs]}, orders "
           f"{['%.2f' % o for o in orders]}")


def test_criterion_4_d0k_identity():
    lat = Lattice(8)
    stack = kasner_stack(DEFAULT_KASNER, -1.0, 1e-3, lat)
    res, direct, formula = wavek.d0k_identity_residual(stack, return_sides=True)
    expect = np.diag([2 / 3, 2 / 3, -1 / 3])
    err_d = float(np.abs(direct[0, 0, 0] - expect).max())
    err_f = float(np.abs(formula[0, 0, 0] - expect).max())
    resid = float(np.abs(res.data).max())
    report(4, "D0k identity at tau = 1 (delta = 1e-3)",
           err_d <= 1e-6 and err_f <= 1e-6,
           f"direct err {err_d:.2e}, formula err {err_f:.2e} (tol 1e-6), "
           f"residual {resid:.2e}")


def test_criterion_5_boxk_identity():
    residuals = []
    for n_pts, delta in ((8, 0.04), (16, 0.02), (32, 0.01)):
        stack = kasner_stack(DEFAULT_KASNER, -1.0, delta, Lattice(n_pts))
        residuals.append(wavek.box_k_residual(stack).residual_linf)
    orders = np.log2(np.array(residuals[:-1]) / np.array(residuals[1:]))
    order_ok = bool(np.all(orders >= 3.5))
    # tripwire: every single corrupted right-side term must break it
    stack = kasner_stack(DEFAULT_KASNER, -1.0, 0.02, Lattice(8))
    stack_f = kasner_stack(DEFAULT_KASNER, -1.0, 0.01, Lattice(8))
    clean = wavek.box_k_residual(stack_f).residual_linf
    broken = []
    for term in wavek.TERM_NAMES:
        bad = wavek.box_k_residual(stack, corrupt_term=term).residual_linf
        bad_f = wavek.box_k_residual(stack_f, corrupt_term=term).residual_linf
        nonzero = bad_f > 1e-13  # terms that vanish on Kasner cannot trip
        converged = bad_f < 0.5 * bad
        broken.append((not nonzero) or (not converged))
    tripwire = all(broken[i] for i, t in enumerate(wavek.TERM_NAMES)
                   if wavek.box_k_residual(stack, corrupt_term=t).residual_linf > 1e-12)
    report(5, "Box-k identity order >= 3.5 + corruption tripwire",
           order_ok and tripwire,
           f"residuals {['%.3e' % r for r in residuals]}, orders "
           f"{['%.2f' % o for o in orders]}, tripwire {tripwire}")


def test_criterion_6_bel_robinson(kasner_run):
    lat = Lattice(16)
    st = kasner_slice(DEFAULT_KASNER, -1.0, lat)
    q = curvature.belrobinson_energy(st)
    q_err = abs(q - 8.0 / 27.0)
    gron = curvature.gronwall_check(kasner_run["times"], kasner_run["qs"],
                                    kasner_run["npis"])
    # |R|^2 from null components vs |E|^2 + |H|^2 at 10 random cone points
    sampler = KasnerSampler(DEFAULT_KASNER)
    grid = DirectionGrid(8, 16)
    b = cone.trace_bundle(sampler, -1.0, np.zeros(3), 0.15, 40, grid,
                          with_pislash=False)
    rng = np.random.default_rng(42)
    rec = b.records[-1]
    stf = b.final_state
    pick = rng.choice(grid.n_dirs, size=10, replace=False)
    jet = sampler.jet2(rec["t"], rec["x"][pick], need_ddk=False,
                       need_ndot=False)
    r4 = riemann4_from_jet(jet)
    g4, _, _ = g4_from_jet(jet)
    T4 = np.zeros((10, 4))
    T4[:, 0] = 1.0 / jet.n
    N4 = np.zeros((10, 4))
    N4[:, 1:] = rec["N"][pick]
    Lb = -rec["a"][pick, None] * (T4 - N4)
    comp = null_decompose(r4, g4, stf.L[pick], Lb, stf.eA[pick, 0],
                          stf.eA[pick, 1], frame_tol=1e-6)
    q_null = bel_robinson_from_null(comp, rec["a"][pick])
    eh = curvature.electric_magnetic(kasner_slice(DEFAULT_KASNER, rec["t"], Lattice(8)))
    q_slice = eh.belrobinson_density.data[0, 0, 0]
    null_err = float(np.abs(q_null - q_slice).max() / q_slice)
    report(6, "Bel-Robinson energy + Gronwall + null-frame recomposition",
           q_err <= 1e-10 and gron["satisfied"] and null_err <= 1e-6,
           f"|Q(-1) - 8/27| = {q_err:.2e} (tol 1e-10), gronwall "
           f"{gron['satisfied']}, null-vs-slice rel err {null_err:.2e}")


def test_criterion_7_breakdown_and_vertex_trace():
    lat = Lattice(8)
    mon = curvature.BreakdownMonitor()
    for t in np.linspace(-1.0, -0.5, 401):
        curvature.breakdown_monitor_update(
            mon, kasner_slice(DEFAULT_KASNER, float(t), lat))
    k0_err = abs(mon.k0_accum - 3.0 / 8.0)
    val, _, _ = cone.vertex_k_trace(KasnerSampler(DEFAULT_KASNER), -0.5,
                                    np.zeros(3), 0.5, n_samples=257)
    vt_err = abs(val - 0.5)
    report(7, "breakdown K0 = 3/8 and vertex k-trace = 1/2",
           k0_err <= 1e-6 and vt_err <= 1e-6,
           f"K0 err {k0_err:.2e}, trace err {vt_err:.2e} (tol 1e-6)")


def test_criterion_8_minkowski_cone():
    grid = DirectionGrid(16, 32)
    b = cone.trace_bundle(MinkowskiSampler(), -1.0, np.zeros(3), 0.4, 40,
                          grid, J=J_XX)
    rep = cone.cone_fluxes(b)
    trchi_dev = max(float(np.abs(r["s"] * r["trchi"] / 2 - 1).max())
                    for r in b.records)
    shear = max(float(np.abs(r["chihat"]).max()) for r in b.records)
    torsion = max(float(np.abs(r["zeta"]).max()) for r in b.records)
    comp_dev = max(max(abs(v[0] - 1), abs(v[1] - 1))
                   for v in rep.comparability.values())
    rec = b.records[-1]
    ra_dev = float(np.abs(rec["A"] * rec["s"][:, None, None] - J_XX).max())
    ok = (rep.ba_max_a_dev <= 1e-8 and trchi_dev <= 1e-8
          and max(shear, torsion) <= 1e-12
          and max(rep.curvature_flux, rep.k_flux) <= 1e-12
          and comp_dev <= 1e-8 and ra_dev <= 1e-8)
    report(8, "Minkowski cone trivial suite", ok,
           f"|a-1| {rep.ba_max_a_dev:.1e}, |s trchi/2 - 1| {trchi_dev:.1e}, "
           f"shear/torsion {max(shear, torsion):.1e}, fluxes "
           f"{max(rep.curvature_flux, rep.k_flux):.1e}, comparability dev "
           f"{comp_dev:.1e}, |rA - J| {ra_dev:.1e}")


def test_criterion_9_kasner_cone_consistency():
    sampler = KasnerSampler(GENERIC_KASNER)
    c7_errs, hodge_errs, reps = [], [], []
    for (nt, nph, ns) in ((16, 32, 60), (32, 64, 120)):
        grid = DirectionGrid(nt, nph)
        b = cone.trace_bundle(sampler, -1.0, np.zeros(3), 0.12, ns, grid)
        rec = b.records[-1]
        jet = sampler.jet2(rec["t"], rec["x"])
        patch = SurfacePatch(grid, grid.unflat(rec["x"]), grid.unflat(jet.g))
        eA = grid.unflat(rec["eA"])
        mA = patch.frame_coefficients(eA)
        sla = patch.grad_scalar_frame(grid.unflat(np.log(rec["a"])), mA)
        c7_errs.append(float(np.abs(
            grid.unflat(rec["zeta"] - rec["eps"]) - sla).max()))

        g3 = grid.unflat(jet.g)
        zeta_amb = np.einsum("...ij,...Ai,...A->...j", g3, eA,
                             grid.unflat(rec["zeta"]))
        curl = patch.curl_tangent_form(zeta_amb)
        ch = cone.chihat_full(grid.unflat(rec["chihat"]))
        kfr = grid.unflat(rec["kframe"])
        khat_fr = kfr - 0.5 * np.trace(kfr, axis1=-2, axis2=-1)[..., None, None] * np.eye(2)
        a = grid.unflat(rec["a"])[..., None, None]
        chb = -a * (a * ch - 2 * khat_fr)
        wedge = 2.0 * (ch[..., 0, 0] * chb[..., 0, 1]
                       - ch[..., 0, 1] * chb[..., 0, 0])
        orient = patch.frame_orientation(eA, grid.unflat(rec["N"]))
        rhs = grid.unflat(rec["sigma"]) - 0.5 * orient * wedge
        hodge_errs.append(float(np.abs(curl - rhs).max()))
        reps.append(cone.cone_fluxes(b))

    c7_order = float(np.log2(c7_errs[0] / c7_errs[1]))
    hodge_order = float(np.log2(hodge_errs[0] / hodge_errs[1]))
    ba_pairs = [(r.ba_max_a_dev, r.ba_max_trchi_dev, r.ba_chihat_sq,
                 r.ba_nu_sq) for r in reps]
    ba_stable = all(
        abs(a - b) <= 0.05 * max(abs(a), abs(b), 1e-12)
        for a, b in zip(*ba_pairs))
    finite = all(np.isfinite(v) for r in reps
                 for v in (r.curvature_flux, r.k_flux,
                           r.n1_pislash["total"]))
    ok = c7_order >= 2.0 and hodge_order >= 2.0 and ba_stable and finite
    report(9, "Kasner cone consistency: (c7), (hdg2), BA stability", ok,
           f"c7 order {c7_order:.2f}, hodge order {hodge_order:.2f}, "
           f"BA stable(5%) {ba_stable}, monitors finite {finite}")


def test_criterion_10_kirchhoff_residual():
    sampler = KasnerSampler(DEFAULT_KASNER)
    residuals = []
    for (nt, nph, ns) in ((8, 16, 25), (16, 32, 50)):
        rep = kirchhoff_residual(sampler, -1.0, np.zeros(3), 0.2, ns,
                                 DirectionGrid(nt, nph), J_XX)
        residuals.append(rep.residual)
    order = float(np.log2(residuals[0] / residuals[1]))
    ok = order >= 1.0 and residuals[-1] <= 0.05
    report(10, "Kirchhoff representation residual", ok,
           f"residuals {['%.2e' % r for r in residuals]}, order {order:.2f} "
           f"(>= 1), finest {residuals[-1]:.2e} (<= 5e-2)")
