"""Registry of verification checks run by ``qprob verify``.

Each check id maps to exactly one relation tag. Per-fixture checks run once
for every declared fixture; global checks build their own small fixtures.
A check returns a record dict with the computed values, the bound it is
compared with, the margin (positive means passing) and a pass flag.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import classical, dynamics, fixtures, gauge, manybody, prob
from .grid import Boundary, Grid1D, UnitSystem, derivative, integrate


@dataclass(frozen=True)
class CheckDef:
    check_id: str
    tag: str
    per_fixture: bool
    tolerance: float
    run: Callable
    doc: str = ""


@dataclass
class Context:
    grid: Grid1D
    units: UnitSystem
    seed: int
    decay_cases: list
    tolerances: dict


def _identity(values, error, tol, bound=0.0):
    error = float(error)
    return {"values": values, "bound": bound, "margin": tol - error, "passed": bool(error <= tol)}


def _inequality(values, product, bound, tol):
    margin = float(product) - bound
    return {"values": values, "bound": bound, "margin": margin, "passed": bool(margin >= -tol)}


# per-fixture checks

def _position_gradient(ctx, psi, tol):
    prob._check_boundary(psi.grid, psi.values)
    value = prob.position_gradient_identity(prob.born_density(psi))
    return _identity({"integral": value}, abs(value + 1.0), tol, bound=-1.0)


def _cramer_rao(ctx, psi, tol):
    r = prob.cramer_rao(prob.born_density(psi))
    return _inequality({"variance": r.spread, "fisher": r.gradient_term, "product": r.product},
                       r.product, r.bound, tol)


def _probability_current(ctx, psi, tol):
    dec = prob.decompose(psi)
    j = prob.current_x(psi).values
    rho = dec.rho.values
    flow = rho * derivative(dec.s.values, psi.grid)
    bulk = rho > 1e-6 * rho.max()
    err = float(np.max(np.abs(j - flow)[bulk]) / rho.max())
    return _identity({"max_relative_deviation": err}, err, tol)


def _commutator(ctx, psi, tol):
    z = prob.commutator_expectation(psi)
    return _identity({"re": z.real, "im": z.imag}, abs(z - 1j), tol)


def _heisenberg(ctx, psi, tol):
    r = prob.heisenberg(psi)
    return _inequality({"spread": r.spread, "dispersion": r.gradient_term, "product": r.product,
                        "a": r.extras["a"], "b": r.extras["b"]}, r.product, r.bound, tol)


def _kinetic_fisher(ctx, psi, tol):
    kf = prob.kinetic_fisher_check(psi, ctx.units)
    err = abs(kf.kinetic - kf.fisher_scaled - kf.phase_term) / kf.kinetic
    return _identity(kf._asdict(), err, tol)


def _charge_conjugation(ctx, psi, tol):
    j = prob.current_x(psi).values
    jc = prob.current_x(gauge.charge_conjugate(psi)).values
    flip_exact = bool(np.array_equal(jc, -j))
    f0 = 0.7
    ds = prob.DecayingState(2.0, 1.0, psi)
    z = prob.time_commutator(gauge.charge_conjugate(ds), shift=-f0)
    err = abs(z - 1j)
    out = _identity({"current_flip_exact": flip_exact, "shifted_commutator_re": z.real,
                     "shifted_commutator_im": z.imag}, err, tol)
    out["passed"] = out["passed"] and flip_exact
    return out


# global checks

def _time_energy(ctx, psi, tol):
    spatial = fixtures.gaussian(ctx.grid, 0.5 * (ctx.grid.x_min + ctx.grid.x_max), 1.0)
    values, worst, worst_product = {}, 0.0, np.inf
    for n, case in enumerate(ctx.decay_cases):
        ds = prob.DecayingState(case.omega, case.tau, spatial)
        exact = prob.time_energy(ds)
        num = prob.time_energy_numeric(ds)
        err = max(abs(num.spread - exact.spread) / exact.spread,
                  abs(num.gradient_term - exact.gradient_term) / exact.gradient_term,
                  abs(num.extras["d"] - exact.extras["d"]) / max(abs(exact.extras["d"]), 1.0))
        values[f"case{n}_t2"] = exact.spread
        values[f"case{n}_dispersion"] = exact.gradient_term
        values[f"case{n}_product"] = exact.product
        values[f"case{n}_numeric_rel_error"] = err
        worst = max(worst, err)
        worst_product = min(worst_product, exact.product)
    out = _identity(values, worst, tol, bound=0.25)
    out["passed"] = out["passed"] and worst_product >= 0.25 - 1e-12
    return out


def _periodic_grid(n=1024):
    return Grid1D(0.0, 2.0 * np.pi, n, Boundary.PERIODIC)


def _relativistic_invariant(ctx, psi, tol):
    g = _periodic_grid()
    u = ctx.units
    values, worst = {}, 0.0
    for k in (0.0, 1.0, 3.0):
        st = dynamics.kg_plane_wave(g, k, u)
        inv = dynamics.relativistic_invariant_density(st, u)
        target = u.compton_wavenumber ** 2
        values[f"k{int(k)}"] = inv
        worst = max(worst, abs(inv - target) / max(target, 1.0))
    return _identity(values, worst, tol, bound=u.compton_wavenumber ** 2)


def _klein_gordon(ctx, psi, tol):
    g = _periodic_grid(512)
    u = ctx.units
    k = 3.0
    omega = dynamics.theory_frequency("klein_gordon", k, u)
    dt = min(0.5 * g.dx / u.c, 0.05 / omega)
    cfg = dynamics.SolverConfig(dt, 400, u, None, 4)
    row = dynamics.dispersion_scan("klein_gordon", [k], g, cfg)[0]
    return _identity({"omega_measured": row.omega_measured, "omega_theory": row.omega_theory},
                     row.rel_error, tol)


def _nonrelativistic_reduction(ctx, psi, tol):
    u = UnitSystem(ctx.units.hbar, 20.0, ctx.units.m0, ctx.units.e_charge)
    g = Grid1D(-7.0, 7.0, 701, Boundary.VANISHING)
    phi = fixtures.gaussian(g, 0.0, 1.0, 3.0 / u.hbar)
    t_end = 0.05
    kg_cfg = dynamics.SolverConfig(1e-5, 5000, u)
    st = dynamics.klein_gordon_evolve(dynamics.kg_state_from_nonrelativistic(phi, u), kg_cfg)
    reduced = dynamics.nonrelativistic_reduction(st, u)
    sch_cfg = dynamics.SolverConfig(t_end / 50, 50, u)
    ref = dynamics.schrodinger_evolve(phi, sch_cfg)
    err = float(np.sqrt(integrate(np.abs(reduced.values - ref.values) ** 2, g)))
    return _identity({"c": u.c, "t": t_end, "l2_error": err}, err, tol)


def _dirac_factorization(ctx, psi, tol):
    g = _periodic_grid(256)
    u = ctx.units
    rng = np.random.default_rng(ctx.seed)
    comps = np.stack([fixtures.smooth_random_function(g, rng)
                      + 1j * fixtures.smooth_random_function(g, rng) for _ in range(2)])
    omega = 1.3
    plus = dynamics.dirac_operator(comps, omega, g, u, mass_sign=1)
    product = dynamics.dirac_operator(plus, omega, g, u, mass_sign=-1)
    kg = dynamics.klein_gordon_operator(comps, omega, g, u)
    err = float(np.max(np.abs(product + kg)) / np.max(np.abs(kg)))
    return _identity({"max_relative_deviation": err}, err, tol)


def _dirac_branches(ctx, psi, tol):
    g = _periodic_grid(256)
    u = ctx.units
    cfg = dynamics.SolverConfig(1e-3, 1, u)
    wrong = 0
    values = {}
    for k in (0.0, 1.0, 2.0, -3.0):
        for branch in (1, -1):
            sp_ = dynamics.dirac_plane_wave(g, k, u, branch)
            dt = dynamics.dirac_time_derivative(sp_, cfg)
            total = prob.time_current_total(sp_, dt)
            values[f"k{k:+g}_branch{branch:+d}"] = total
            wrong += int(np.sign(total) != branch)
    values["misclassified"] = wrong
    return _identity(values, wrong, 0.5)


def _hamilton_jacobi(ctx, psi, tol):
    g = ctx.grid
    u = ctx.units
    worst = 0.0
    for p in (0.0, 0.5, 2.0):
        S, dS = classical.free_nonrelativistic_action(g, p, 0.3, u.m0, u)
        worst = max(worst, float(np.max(np.abs(classical.hj_residual(S, dS).values))))
    return _identity({"max_residual": worst}, worst, tol)


def _relativistic_hj(ctx, psi, tol):
    g = ctx.grid
    u = ctx.units
    worst = 0.0
    for p in (0.0, 0.5, 2.0):
        S, dS = classical.free_relativistic_action(g, p, 0.3, u.m0, u)
        res = classical.relativistic_hj_residual(S, dS).values
        worst = max(worst, float(np.max(np.abs(res))) / (u.m0 * u.c) ** 2)
    rows = classical.nonrelativistic_order_probe(g, 0.1 * u.m0 * u.c, u.m0, u)
    ratios = [r.ratio for r in rows[1:]]
    order_ok = all(abs(r - 16.0) < 0.5 for r in ratios)
    out = _identity({"max_relative_residual": worst, "order_ratios": ratios}, worst, tol)
    out["passed"] = out["passed"] and order_ok
    return out


def _delta_localization(ctx, psi, tol):
    g = Grid1D(-12.0, 12.0, 1201, Boundary.PERIODIC)
    cfg = dynamics.SolverConfig(1e-3, 100, ctx.units, None, 10)
    rows = classical.localization_study([1.4, 1.0, 0.7], 1.0, cfg, g)
    res = [r.hj_residual for r in rows]
    err = max(r.max_mean_error for r in rows)
    out = _identity({"residuals": res, "max_mean_error": err}, err, tol)
    # residual falls as the packet widens (list is in decreasing sigma)
    out["passed"] = out["passed"] and all(a < b for a, b in zip(res, res[1:]))
    return out


def _manybody_grid():
    return Grid1D(-10.0, 10.0, 161, Boundary.VANISHING)


def _manybody_schrodinger(ctx, psi, tol):
    g = _manybody_grid()
    a = fixtures.gaussian(g, -2.0, 1.0, 1.0)
    b = fixtures.gaussian(g, 2.0, 1.0, -0.5)
    pair = manybody.symmetrize(manybody.Amplitude2.product(a, b), -1)
    cfg = dynamics.SolverConfig(0.005, 1, ctx.units)
    swapped_first = manybody.schrodinger2_step(pair.exchanged(), cfg).values
    stepped = pair
    for _ in range(50):
        stepped = manybody.schrodinger2_step(stepped, cfg)
    comm = float(np.max(np.abs(swapped_first
                               - manybody.schrodinger2_step(pair, cfg).exchanged().values)))
    diag = manybody.diagonal_max(stepped)
    drift = abs(stepped.norm() - pair.norm())
    return _identity({"diagonal_max": diag, "exchange_commutator": comm, "norm_drift": drift},
                     max(diag, comm, drift), tol)


def _manybody_hj(ctx, psi, tol):
    g = _manybody_grid()
    masses = (1.0, 2.5)
    p1, p2, t = 0.7, -1.1, 0.4
    x1, x2 = np.meshgrid(g.x, g.x, indexing="ij")
    S = p1 * x1 + p2 * x2 - (p1 ** 2 / (2 * masses[0]) + p2 ** 2 / (2 * masses[1])) * t
    dS = np.full(S.shape, -(p1 ** 2 / (2 * masses[0]) + p2 ** 2 / (2 * masses[1])))
    err = float(np.max(np.abs(manybody.hj_residual_n(S, dS, masses, g, g))))
    return _identity({"max_residual": err}, err, tol)


def _manybody_invariant(ctx, psi, tol):
    g = _periodic_grid(128)
    u = ctx.units
    values, worst = {}, 0.0
    for k1, k2, masses in ((0.0, 0.0, (1.0, 2.0)), (0.0, 3.0, (1.0, 2.0)), (2.0, 3.0, (0.0, 0.0))):
        pair, parts = manybody.plane_wave_pair(g, g, k1, k2, u, masses)
        inv = manybody.relativistic_invariant2(pair, parts, u)
        target = (masses[0] ** 2 + masses[1] ** 2) * u.c ** 2 / u.hbar ** 2 * pair.norm()
        values[f"k{k1:g}_{k2:g}_m{masses[0]:g}_{masses[1]:g}"] = inv
        worst = max(worst, abs(inv - target) / max(target, 1.0))
    return _identity(values, worst, tol)


_DEFS = [
    CheckDef("position_gradient", "position_gradient_identity", True, 1e-6, _position_gradient),
    CheckDef("cramer_rao", "cramer_rao_inequality", True, 1e-6, _cramer_rao),
    CheckDef("probability_current", "probability_current", True, 1e-5, _probability_current),
    CheckDef("commutator", "position_momentum_commutator", True, 1e-6, _commutator),
    CheckDef("heisenberg", "heisenberg_inequality", True, 1e-6, _heisenberg),
    CheckDef("kinetic_fisher", "kinetic_fisher_relation", True, 1e-6, _kinetic_fisher),
    CheckDef("charge_conjugation", "charge_conjugation", True, 1e-8, _charge_conjugation),
    CheckDef("time_energy", "time_energy_uncertainty", False, 1e-10, _time_energy),
    CheckDef("relativistic_invariant", "relativistic_invariant", False, 1e-6,
             _relativistic_invariant),
    CheckDef("klein_gordon_dispersion", "klein_gordon_equation", False, 1e-3, _klein_gordon),
    CheckDef("nonrelativistic_reduction", "nonrelativistic_reduction", False, 1e-2,
             _nonrelativistic_reduction),
    CheckDef("dirac_factorization", "dirac_factorization", False, 1e-10, _dirac_factorization),
    CheckDef("dirac_branches", "charge_conjugation", False, 0.5, _dirac_branches),
    CheckDef("delta_localization", "delta_localization", False, 1e-6, _delta_localization),
    CheckDef("hamilton_jacobi", "hamilton_jacobi_equation", False, 1e-10, _hamilton_jacobi),
    CheckDef("relativistic_hamilton_jacobi", "relativistic_hamilton_jacobi", False, 1e-10,
             _relativistic_hj),
    CheckDef("many_body_schrodinger", "many_body_schrodinger_equation", False, 1e-10,
             _manybody_schrodinger),
    CheckDef("many_body_hamilton_jacobi", "many_body_hamilton_jacobi", False, 1e-10,
             _manybody_hj),
    CheckDef("many_body_invariant", "many_body_relativistic_invariant", False, 1e-6,
             _manybody_invariant),
]

REGISTRY: dict[str, CheckDef] = {d.check_id: d for d in _DEFS}
DEFAULT_CHECKS = [d.check_id for d in _DEFS]


def thread_cap(default: int | None = None) -> int:
    """Worker count from QPROB_THREADS (falls back to the CPU count)."""
    raw = os.environ.get("QPROB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return default or max(1, min(8, os.cpu_count() or 1))


def _run_one(defn: CheckDef, ctx: Context, fixture_name, psi):
    tol = float(ctx.tolerances.get(defn.check_id, defn.tolerance))
    record = {"check": defn.check_id, "tag": defn.tag, "fixture": fixture_name,
              "tolerance": tol, "error": None}
    try:
        if isinstance(psi, Exception):
            raise psi
        out = defn.run(ctx, psi, tol)
    except Exception as exc:  # a failing check must not take the suite down
        record.update(values={}, bound=None, margin=None, passed=False,
                      error=f"{type(exc).__name__}: {exc}")
        leak = getattr(exc, "leak", None)
        if leak is not None:
            record["values"] = {"boundary_leak": leak}
        return record
    record.update(out)
    return record


def run_checks(check_ids, ctx: Context, fixture_amps: dict, threads: int | None = None):
    """Run checks over fixtures and return records ordered by (check id, fixture).

    ``fixture_amps`` maps fixture names to amplitudes, or to the exception
    raised while building them.
    """
    tasks = []
    for cid in check_ids:
        defn = REGISTRY[cid]
        if defn.per_fixture:
            tasks.extend((defn, name, amp) for name, amp in fixture_amps.items())
        else:
            tasks.append((defn, None, None))
    workers = threads or thread_cap()
    if workers == 1:
        records = [_run_one(d, ctx, n, a) for d, n, a in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda t: _run_one(t[0], ctx, t[1], t[2]), tasks))
    return sorted(records, key=lambda r: (r["check"], r["fixture"] or ""))


def build_fixtures(specs, grid: Grid1D, seed: int) -> dict:
    out = {}
    for idx, spec in enumerate(specs):
        params = dict(spec.params)
        if spec.kind == "random_phase_gaussian":
            params["rng"] = np.random.default_rng([seed, idx])
        try:
            out[spec.name] = fixtures.build(spec.kind, grid, **params)
        except Exception as exc:
            out[spec.name] = exc
    return out

