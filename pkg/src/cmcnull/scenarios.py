"""Reproducible experiment scenarios with manifests and CSV artifacts.

Every run writes a manifest JSON (config echo, code version, wall time,
per-assertion pass/fail) even when assertions fail.  Exit-code contract:
0 pass, 1 assertion failure, 2 config error, 3 artifact error.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, cone, curvature, evolution, wavek
from .angular import DirectionGrid
from .exact import (
    DEFAULT_KASNER,
    KasnerParams,
    KasnerSampler,
    MinkowskiSampler,
    kasner_slice,
    kasner_stack,
)
from .grid import Lattice
from .kirchhoff import kirchhoff_residual

SCENARIOS = ("kasner-evolve", "identity-boxk", "identity-d0k",
             "nullcone-trace", "kirchhoff-check", "minkowski-cone")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str
    n_pts: int = 8
    box_len: float = 1.0
    kasner_p: tuple = (2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0)
    t0: float = -1.0
    t1: float = -0.5
    n_steps: int = 160
    cfl: float = 0.25
    dt_max: float = 1.0
    solver_tol: float = 1e-10
    vertex_t: float = -1.0
    vertex_x: tuple = (0.0, 0.0, 0.0)
    tau: float = 0.2
    n_theta: int = 16
    n_phi: int = 32
    cone_steps: int = 50
    stack_delta: float = 0.01
    levels: int = 3
    out_dir: str = "runs/out"

    @classmethod
    def from_dict(cls, raw: dict, scenario: str | None = None) -> "RunConfig":
        flat = {}
        nested = {
            "lattice": {"n_pts": "n_pts", "box_len": "box_len"},
            "kasner": {"p": "kasner_p"},
            "time": {"t0": "t0", "t1": "t1", "n_steps": "n_steps"},
            "integrator": {"cfl": "cfl", "dt_max": "dt_max"},
            "solver": {"tol": "solver_tol"},
            "cone": {"vertex_t": "vertex_t", "vertex_x": "vertex_x",
                     "tau": "tau", "n_theta": "n_theta", "n_phi": "n_phi",
                     "n_steps": "cone_steps"},
            "stack": {"delta": "stack_delta"},
        }
        for key, val in raw.items():
            if key in nested:
                if not isinstance(val, dict):
                    raise ConfigError(f"section {key!r} must be an object")
                for sub, tgt in nested[key].items():
                    if sub in val:
                        flat[tgt] = val[sub]
            elif key in ("scenario", "out_dir", "levels"):
                flat[key] = val
            else:
                raise ConfigError(f"unknown config key {key!r}")
        if scenario is not None:
            flat["scenario"] = scenario
        if "scenario" not in flat:
            raise ConfigError("no scenario given")
        cfg = cls(**{k: tuple(v) if isinstance(v, list) else v
                     for k, v in flat.items()})
        cfg.validate()
        return cfg

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; "
                              f"know {', '.join(SCENARIOS)}")
        if self.scenario in ("kasner-evolve",) and not (self.t0 < self.t1 < 0):
            raise ConfigError(f"need t0 < t1 < 0, got {self.t0}, {self.t1}")
        if self.solver_tol <= 0:
            raise ConfigError("solver tolerance must be positive")
        if self.tau <= 0:
            raise ConfigError("cone extent tau must be positive")
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")

    def params(self) -> KasnerParams:
        return KasnerParams(*self.kasner_p)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.17g}" if isinstance(v, float) else v
                             for v in row])


@dataclass
class Assertions:
    checks: dict = field(default_factory=dict)

    def record(self, name, passed, value, tolerance=None):
        self.checks[name] = {"passed": bool(passed), "value": value,
                             "tolerance": tolerance}

    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

def scenario_kasner_evolve(cfg: RunConfig, out: str, checks: Assertions):
    lat = Lattice(cfg.n_pts, cfg.box_len)
    params = cfg.params()
    state = kasner_slice(params, cfg.t0, lat)
    dt = (cfg.t1 - cfg.t0) / cfg.n_steps
    if dt > cfg.dt_max:
        raise ConfigError(f"dt={dt} exceeds dt_max={cfg.dt_max}")

    mon = curvature.BreakdownMonitor()
    rows = []
    sandwich_ok = True
    weighted_prev = None
    monotone_ok = True
    times, qs, npis = [], [], []

    def record(st):
        nonlocal sandwich_ok, weighted_prev, monotone_ok
        eh = curvature.electric_magnetic(st)
        q = curvature.belrobinson_energy(st, eh)
        k_inf, dlogn_inf, _, npi = curvature.deformation_sup(st)
        curvature.breakdown_monitor_update(mon, st, q)
        vol = evolution.volume_monitor(st)
        res = evolution.constraint_residuals(st)
        lower = 1.0 / k_inf - 1e-8 <= st.n.data.min()
        upper = st.n.data.max() <= 3.0 / st.t**2 + 1e-8
        sandwich_ok = sandwich_ok and lower and upper
        if weighted_prev is not None:
            monotone_ok = monotone_ok and vol["weighted"] <= weighted_prev + 1e-10
        weighted_prev = vol["weighted"]
        times.append(st.t)
        qs.append(q)
        npis.append(npi)
        rows.append([st.t, q, k_inf, dlogn_inf, mon.k0_accum, vol["vol"],
                     vol["weighted"], vol["derivative_integrand"],
                     res["hamiltonian"]["L2"], res["hamiltonian"]["Linf"],
                     res["momentum"]["L2"], res["momentum"]["Linf"],
                     res["divk"]["L2"], res["divk"]["Linf"],
                     res["trk_gauge"]])

    record(state)
    for _ in range(cfg.n_steps):
        state = evolution.step_rk4(state, dt, tol=cfg.solver_tol)
        record(state)

    _write_csv(os.path.join(out, "monitors.csv"),
               ["t", "Q", "k_inf", "dlogn_inf", "K0_accum", "vol",
                "weighted_vol", "vol_integrand", "ham_l2", "ham_linf",
                "mom_l2", "mom_linf", "divk_l2", "divk_linf", "trk_gauge"],
               rows)

    k0_exact = 0.5 * (cfg.t0**2 - cfg.t1**2)
    checks.record("breakdown_k0", abs(mon.k0_accum - k0_exact) <= 1e-6,
                  mon.k0_accum, k0_exact)
    checks.record("lapse_sandwich", sandwich_ok, sandwich_ok, "1e-8 slack")
    tau1 = -1.0 / state.t
    weighted_exact = cfg.box_len**3 / tau1**2
    checks.record("weighted_volume_closed_form",
                  abs(weighted_prev - weighted_exact) <= 1e-6,
                  weighted_prev, weighted_exact)
    checks.record("weighted_volume_monotone", monotone_ok, monotone_ok)
    gron = curvature.gronwall_check(times, qs, npis)
    checks.record("gronwall", gron["satisfied"], gron["first_violation"])
    exact = kasner_slice(params, state.t, lat)
    g_err = float(np.abs(state.g.data - exact.g.data).max())
    checks.record("evolved_vs_exact_g", g_err < 1e-6, g_err, 1e-6)


def scenario_identity_boxk(cfg: RunConfig, out: str, checks: Assertions):
    lat = Lattice(cfg.n_pts, cfg.box_len)
    rows, residuals = [], []
    for lvl in range(cfg.levels):
        delta = cfg.stack_delta / 2**lvl
        stack = kasner_stack(cfg.params(), cfg.vertex_t, delta, lat)
        rep = wavek.box_k_residual(stack)
        with open(os.path.join(out, f"boxk_level{lvl}.json"), "w") as fh:
            fh.write(rep.to_json())
        residuals.append(rep.residual_linf)
        rows.append([lvl, delta, rep.residual_l2, rep.residual_linf])
    orders = _orders(residuals)
    _write_csv(os.path.join(out, "boxk_convergence.csv"),
               ["level", "delta", "residual_l2", "residual_linf"], rows)
    _write_csv(os.path.join(out, "boxk_orders.csv"), ["pair", "order"],
               [[i, o] for i, o in enumerate(orders)])
    ok = len(orders) == 0 or all(np.isnan(o) or o >= 3.5 for o in orders)
    finite_orders = [o for o in orders if not np.isnan(o)]
    checks.record("boxk_order", bool(finite_orders) and
                  all(o >= 3.5 for o in finite_orders),
                  finite_orders, ">= 3.5")
    # regression tripwire: a corrupted term must break convergence
    stack = kasner_stack(cfg.params(), cfg.vertex_t, cfg.stack_delta / 2, lat)
    bad = wavek.box_k_residual(stack, corrupt_term="kkk")
    checks.record("corruption_tripwire", bad.residual_linf > 10 * residuals[-1],
                  bad.residual_linf, residuals[-1])


def scenario_identity_d0k(cfg: RunConfig, out: str, checks: Assertions):
    lat = Lattice(cfg.n_pts, cfg.box_len)
    rows, residuals = [], []
    for lvl in range(cfg.levels):
        delta = cfg.stack_delta / 2**lvl
        stack = kasner_stack(cfg.params(), cfg.vertex_t, delta, lat)
        res = wavek.d0k_identity_residual(stack)
        residuals.append(float(np.abs(res.data).max()))
        rows.append([lvl, delta, residuals[-1]])
    orders = _orders(residuals)
    _write_csv(os.path.join(out, "d0k_convergence.csv"),
               ["level", "delta", "residual_linf"], rows)
    finite_orders = [o for o in orders if not np.isnan(o)]
    checks.record("d0k_order", bool(finite_orders) and
                  all(o >= 3.5 for o in finite_orders),
                  finite_orders, ">= 3.5")
    # closed-form check at tau = 1 with a tight stack
    stack = kasner_stack(DEFAULT_KASNER, -1.0, 1e-3, lat)
    _, direct, formula = wavek.d0k_identity_residual(stack, return_sides=True)
    expect = np.diag([2 / 3, 2 / 3, -1 / 3])
    err = max(float(np.abs(direct[0, 0, 0] - expect).max()),
              float(np.abs(formula[0, 0, 0] - expect).max()))
    checks.record("d0k_closed_form", err <= 1e-6, err, 1e-6)


def _cone_csv(bundle, out, name):
    grid = bundle.grid
    rows = []
    for idx, rec in enumerate(bundle.records):
        quad = cone.surface_quadrature(bundle, idx)
        rows.append([rec["t"], float(rec["s"].mean()), quad["r"],
                     quad["area"], float(np.abs(rec["a"] - 1).max()),
                     float(np.abs(rec["w"]).max()),
                     float(grid.integrate(grid.unflat(
                         rec["cf_density"] * rec["vt"] * rec["n"] * rec["a"]))),
                     float(grid.integrate(grid.unflat(
                         rec["kflux_density"] * rec["vt"] * rec["n"] * rec["a"])))])
    _write_csv(os.path.join(out, name),
               ["t", "s_mean", "r", "area", "max_a_dev", "max_trchi_dev",
                "cf_integrand", "kflux_integrand"], rows)


def scenario_nullcone_trace(cfg: RunConfig, out: str, checks: Assertions):
    sampler = KasnerSampler(cfg.params())
    grid = DirectionGrid(cfg.n_theta, cfg.n_phi)
    bundle = cone.trace_bundle(sampler, cfg.vertex_t, cfg.vertex_x, cfg.tau,
                               cfg.cone_steps, grid)
    _cone_csv(bundle, out, "cone.csv")
    rep = cone.cone_fluxes(bundle)
    with open(os.path.join(out, "flux_report.json"), "w") as fh:
        json.dump({
            "curvature_flux": rep.curvature_flux, "k_flux": rep.k_flux,
            "n1_pislash": rep.n1_pislash,
            "ba_max_a_dev": rep.ba_max_a_dev,
            "ba_max_trchi_dev": rep.ba_max_trchi_dev,
            "ba_chihat_sq": rep.ba_chihat_sq, "ba_nu_sq": rep.ba_nu_sq,
            "comparability": rep.comparability,
        }, fh, indent=2, sort_keys=True)
    checks.record("all_generators_alive", bundle.alive_fraction() == 1.0,
                  bundle.alive_fraction())
    finite = all(np.isfinite(v) for v in
                 (rep.curvature_flux, rep.k_flux, rep.ba_chihat_sq,
                  rep.ba_nu_sq, rep.n1_pislash["total"]))
    checks.record("monitors_finite", finite, finite)
    lo = min(v[0] for v in rep.comparability.values())
    hi = max(v[1] for v in rep.comparability.values())
    checks.record("comparability_window", 0.25 < lo <= hi < 4.0, (lo, hi))


def scenario_minkowski_cone(cfg: RunConfig, out: str, checks: Assertions):
    grid = DirectionGrid(cfg.n_theta, cfg.n_phi)
    J = np.diag([1.0, 0.0, 0.0])
    bundle = cone.trace_bundle(MinkowskiSampler(), cfg.vertex_t, cfg.vertex_x,
                               cfg.tau, cfg.cone_steps, grid, J=J)
    _cone_csv(bundle, out, "cone.csv")
    rep = cone.cone_fluxes(bundle)
    a_dev = rep.ba_max_a_dev
    checks.record("null_lapse_unity", a_dev <= 1e-8, a_dev, 1e-8)
    w_dev = max(float(np.abs(rec["s"] * rec["trchi"] / 2 - 1).max())
                for rec in bundle.records)
    checks.record("trchi_flat", w_dev <= 1e-8, w_dev, 1e-8)
    sh = max(float(np.abs(rec["chihat"]).max()) for rec in bundle.records)
    tz = max(float(np.abs(rec["zeta"]).max()) for rec in bundle.records)
    checks.record("shear_torsion_zero", max(sh, tz) <= 1e-12, max(sh, tz), 1e-12)
    checks.record("fluxes_zero",
                  max(rep.curvature_flux, rep.k_flux) <= 1e-12,
                  max(rep.curvature_flux, rep.k_flux), 1e-12)
    lo = min(v[0] for v in rep.comparability.values())
    hi = max(v[1] for v in rep.comparability.values())
    checks.record("comparability_unity",
                  max(abs(lo - 1), abs(hi - 1)) <= 1e-8, (lo, hi), 1e-8)
    rec = bundle.records[-1]
    ra = float(np.abs(np.einsum("...ij->...", np.abs(
        rec["A"] * rec["s"][:, None, None] - J)).max()))
    checks.record("transport_A_unit", ra <= 1e-8, ra, 1e-8)


def scenario_kirchhoff_check(cfg: RunConfig, out: str, checks: Assertions):
    sampler = KasnerSampler(cfg.params())
    J = np.diag([1.0, 0.0, 0.0])
    rows, residuals = [], []
    for lvl in range(cfg.levels):
        fac = 2**lvl
        grid = DirectionGrid(cfg.n_theta * fac, cfg.n_phi * fac)
        rep = kirchhoff_residual(sampler, cfg.vertex_t, cfg.vertex_x, cfg.tau,
                                 cfg.cone_steps * fac, grid, J)
        with open(os.path.join(out, f"kirchhoff_level{lvl}.json"), "w") as fh:
            fh.write(rep.to_json())
        residuals.append(rep.residual)
        rows.append([lvl, rep.n_theta, rep.n_phi, rep.n_steps, rep.lhs,
                     rep.total, rep.residual])
    _write_csv(os.path.join(out, "kirchhoff_convergence.csv"),
               ["level", "n_theta", "n_phi", "n_steps", "lhs", "total",
                "residual"], rows)
    orders = _orders(residuals)
    finite_orders = [o for o in orders if not np.isnan(o)]
    checks.record("kirchhoff_order", bool(finite_orders) and
                  all(o >= 1.0 for o in finite_orders), finite_orders, ">= 1")
    checks.record("kirchhoff_final_residual", residuals[-1] <= 0.05,
                  residuals[-1], 0.05)


def _orders(errors):
    errors = np.asarray(errors, dtype=float)
    out = []
    for a, b in zip(errors[:-1], errors[1:]):
        floor = 1e-13 * max(1.0, abs(errors[0]))
        if a <= floor or b <= floor or b >= a:
            out.append(float("nan"))
        else:
            out.append(float(np.log2(a / b)))
    return out


_RUNNERS = {
    "kasner-evolve": scenario_kasner_evolve,
    "identity-boxk": scenario_identity_boxk,
    "identity-d0k": scenario_identity_d0k,
    "nullcone-trace": scenario_nullcone_trace,
    "kirchhoff-check": scenario_kirchhoff_check,
    "minkowski-cone": scenario_minkowski_cone,
}


def run_scenario(cfg: RunConfig) -> int:
    """Execute one scenario; manifest always written.  Returns exit code."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    checks = Assertions()
    start = time.perf_counter()
    error = None
    try:
        _RUNNERS[cfg.scenario](cfg, cfg.out_dir, checks)
    except ConfigError:
        raise
    except Exception as exc:  # artifact-level failure: manifest still written
        error = f"{type(exc).__name__}: {exc}"
    wall = time.perf_counter() - start
    code = 0 if checks.all_passed() and error is None else (3 if error else 1)
    manifest = {
        "scenario": cfg.scenario,
        "config": cfg.__dict__,
        "code_version": __version__,
        "wall_time_s": wall,
        "assertions": checks.checks,
        "error": error,
        "exit_code": code,
    }
    with open(os.path.join(cfg.out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
    return code


def refinement_sweep(cfg: RunConfig, levels: int) -> int:
    """Run a sweepable scenario at the given number of halving levels."""
    if levels < 3:
        raise ConfigError("refinement sweep needs levels >= 3")
    cfg.levels = levels
    return run_scenario(cfg)


def emit_plots_data(run_dir: str) -> int:
    """Merge monitor CSVs in run_dir into one long-format table."""
    sources = [p for p in ("monitors.csv", "cone.csv",
                           "boxk_convergence.csv", "d0k_convergence.csv",
                           "kirchhoff_convergence.csv")
               if os.path.exists(os.path.join(run_dir, p))]
    if not sources:
        return 3
    rows = []
    for src in sources:
        with open(os.path.join(run_dir, src), newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            for line in reader:
                t = line[0]
                for name, val in zip(header[1:], line[1:]):
                    rows.append([t, f"{src[:-4]}.{name}", val])
    with open(os.path.join(run_dir, "plots.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "quantity", "value"])
        writer.writerows(rows)
    return 0
