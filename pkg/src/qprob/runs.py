"""Drivers behind the CLI subcommands.

Each ``run_*`` function takes a validated ``ExperimentConfig``, writes its
artifacts and returns a plain-data summary. Solver failures during an
evolution are caught, recorded in the summary and re-raised as RunFailed
after the partial snapshots have been flushed.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from . import checks, classical, dynamics, manybody
from .config import ExperimentConfig, Kind
from .errors import ConfigError, QprobError
from .grid import Amplitude, integrate
from .prob import current_x, momentum_mean
from .report import CsvSink, write_json, write_table

SNAPSHOT_COLUMNS = ("step", "time", "x", "re_psi", "im_psi", "rho", "j")
SPINOR_COLUMNS = ("step", "time", "x", "re_psi1", "im_psi1", "re_psi2", "im_psi2", "rho", "j")
PAIR_COLUMNS = ("step", "time", "x1", "x2", "re_psi", "im_psi", "rho")


class RunFailed(QprobError):
    def __init__(self, message, summary):
        super().__init__(message)
        self.summary = summary


def _require(cfg: ExperimentConfig, *kinds):
    if cfg.kind not in kinds:
        wanted = ", ".join(k.value for k in kinds)
        raise ConfigError(f"config kind is {cfg.kind.value}; this command needs {wanted}")


def run_verify(cfg: ExperimentConfig, seed: int | None = None, threads: int | None = None):
    """Run the registered checks and return the report dict."""
    _require(cfg, Kind.VERIFY)
    seed = cfg.seed if seed is None else seed
    grid = cfg.grid.build()
    amps = checks.build_fixtures(cfg.fixtures, grid, seed)
    ctx = checks.Context(grid, cfg.units.build(), seed, cfg.decay_cases, dict(cfg.tolerances))
    ids = cfg.checks if cfg.checks is not None else checks.DEFAULT_CHECKS
    records = checks.run_checks(ids, ctx, amps, threads)
    failed = sorted({r["check"] for r in records if not r["passed"]})
    summary = {"passed": not failed, "n_records": len(records),
               "n_failed": sum(not r["passed"] for r in records), "failed_checks": failed}
    return {"schema_version": 1, "kind": cfg.kind.value, "seed": seed,
            "config": cfg.model_dump(mode="json"), "records": records, "summary": summary}


# evolution

def _initial_amplitude(cfg, grid, seed):
    spec = cfg.fixtures[0]
    amp = checks.build_fixtures([spec], grid, seed)[spec.name]
    if isinstance(amp, Exception):
        raise ConfigError(f"fixture {spec.name!r} could not be built: {amp}")
    return amp


def _expectation(H, v, grid):
    return float(np.real(integrate(np.conj(v) * (H @ v), grid)))


def _evolve_single(cfg, out_dir, seed):
    grid = cfg.grid.build()
    units = cfg.units.build()
    s = cfg.solver
    scfg = dynamics.SolverConfig(s.dt, s.n_steps, units, None, s.snapshot_every)
    psi0 = _initial_amplitude(cfg, grid, seed)
    spinor = s.solver == "dirac"
    snaps = CsvSink(out_dir / "snapshots.csv", SPINOR_COLUMNS if spinor else SNAPSHOT_COLUMNS)
    metrics = CsvSink(out_dir / "metrics.csv", ("step", "time", "norm", "energy", "mean_x"))
    H = None
    if s.solver == "schrodinger":
        H = dynamics.schrodinger_hamiltonian(grid, scfg)
    elif spinor:
        H = dynamics.dirac_hamiltonian(grid, scfg)
    ehrenfest = []
    summary = {"solver": s.solver, "n_steps": s.n_steps, "dt": s.dt,
               "snapshot_every": s.snapshot_every, "error": None}

    def sink(snap):
        v = snap.values
        if spinor:
            rho = np.abs(v[0]) ** 2 + np.abs(v[1]) ** 2
            j = dynamics.dirac_current(dynamics.Spinor2(grid, v[0], v[1]), units)
            for i, x in enumerate(grid.x):
                snaps.write((snap.step, snap.time, x, v[0, i].real, v[0, i].imag,
                             v[1, i].real, v[1, i].imag, rho[i], j[i]))
            hv = (H @ np.concatenate(v)).reshape(2, -1)
            energy = float(np.real(integrate(np.sum(np.conj(v) * hv, axis=0), grid)))
        else:
            rho = np.abs(v) ** 2
            j = current_x(Amplitude(grid, v), units, physical=True).values
            for i, x in enumerate(grid.x):
                snaps.write((snap.step, snap.time, x, v[i].real, v[i].imag, rho[i], j[i]))
            energy = _expectation(H, v, grid) if H is not None else float("nan")
        norm = float(integrate(rho, grid))
        mean_x = float(integrate(grid.x * rho, grid) / norm)
        metrics.write((snap.step, snap.time, norm, energy, mean_x))
        if s.solver == "schrodinger":
            p = units.hbar * momentum_mean(Amplitude(grid, v)) / units.m0
            ehrenfest.append((snap.time, mean_x, p))
        summary.setdefault("_norms", []).append(norm)
        summary.setdefault("_energies", []).append(energy)

    try:
        if s.solver == "schrodinger":
            dynamics.schrodinger_evolve(psi0, scfg, sink)
        elif s.solver == "klein_gordon":
            state = dynamics.kg_state_from_nonrelativistic(psi0, units)
            e0 = dynamics.kg_energy(state, scfg)
            final = dynamics.klein_gordon_evolve(state, scfg, sink)
            summary["kg_energy_initial"] = e0
            summary["kg_energy_final"] = dynamics.kg_energy(final, scfg)
        else:
            sp0 = dynamics.Spinor2(grid, psi0.values, np.zeros(grid.n_points))
            dynamics.dirac_evolve(sp0, scfg, sink)
    except Exception as exc:
        summary["error"] = {"type": type(exc).__name__, "message": str(exc)}
    finally:
        snaps.close()
        metrics.close()

    norms = summary.pop("_norms", [])
    energies = summary.pop("_energies", [])
    summary["snapshot_count"] = len(norms)
    summary["snapshot_rows"] = snaps.rows
    summary["norm_drift"] = float(max(abs(n - norms[0]) for n in norms)) if norms else None
    if s.solver == "klein_gordon" and "kg_energy_final" in summary:
        summary["energy_drift"] = abs(summary["kg_energy_final"] - summary["kg_energy_initial"])
    elif energies:
        summary["energy_drift"] = float(max(abs(e - energies[0]) for e in energies))
    if ehrenfest:
        t, xs, ps = (np.array(c) for c in zip(*ehrenfest))
        vel = np.gradient(xs, t) if len(t) > 1 else np.zeros_like(xs)
        summary["ehrenfest"] = {"columns": ["time", "mean_x", "mean_p_over_m", "dmean_x_dt"],
                                "rows": [list(map(float, r)) for r in zip(t, xs, ps, vel)]}
    return summary


def _probe_indices(n, count):
    return np.unique(np.round(np.linspace(0, n - 1, min(count, n))).astype(int))


def _evolve_pair(cfg, out_dir, seed):
    grid = cfg.grid.build()
    units = cfg.units.build()
    s, mb = cfg.solver, cfg.manybody
    scfg = dynamics.SolverConfig(s.dt, s.n_steps, units, None, s.snapshot_every)
    amps = checks.build_fixtures([cfg.fixture(n) for n in mb.orbitals], grid, seed)
    for name, a in amps.items():
        if isinstance(a, Exception):
            raise ConfigError(f"fixture {name!r} could not be built: {a}")
    pair = manybody.Amplitude2.product(amps[mb.orbitals[0]], amps[mb.orbitals[1]], mb.masses)
    if mb.sign:
        pair = manybody.symmetrize(pair, mb.sign)
    pair = pair.normalized()
    idx = _probe_indices(grid.n_points, mb.probe_points)
    snaps = CsvSink(out_dir / "snapshots.csv", PAIR_COLUMNS)
    metrics = CsvSink(out_dir / "metrics.csv",
                      ("step", "time", "norm", "diagonal_max", "exchange_asymmetry",
                       "mean_x1", "mean_x2"))
    summary = {"solver": "schrodinger2", "sign": mb.sign, "masses": list(mb.masses),
               "n_steps": s.n_steps, "dt": s.dt, "probe_lattice": [len(idx), len(idx)],
               "error": None}
    norms, diags = [], []

    def sink(step, time, p):
        v = p.values
        sub = v[np.ix_(idx, idx)]
        for a, i in enumerate(idx):
            for b, k in enumerate(idx):
                z = sub[a, b]
                snaps.write((step, time, grid.x[i], grid.x[k], z.real, z.imag, abs(z) ** 2))
        rho = p.density()
        norm = p.norm()
        diag = manybody.diagonal_max(p)
        asym = float(np.max(np.abs(rho - rho.T))) if p.grid1 == p.grid2 else float("nan")
        metrics.write((step, time, norm, diag, asym,
                       manybody.mean_xj(p, 1), manybody.mean_xj(p, 2)))
        norms.append(norm)
        diags.append(diag)

    try:
        manybody.schrodinger2_evolve(pair, scfg, sink)
    except Exception as exc:
        summary["error"] = {"type": type(exc).__name__, "message": str(exc)}
    finally:
        snaps.close()
        metrics.close()
    summary["snapshot_count"] = len(norms)
    summary["norm_drift"] = float(max(abs(n - norms[0]) for n in norms)) if norms else None
    summary["diagonal_max"] = float(max(diags)) if diags else None
    return summary


def run_evolve(cfg: ExperimentConfig, out_dir, seed: int | None = None):
    """Evolve the configured initial state; writes snapshots, metrics and summary.json."""
    _require(cfg, Kind.EVOLVE, Kind.MANY_BODY)
    seed = cfg.seed if seed is None else seed
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.kind is Kind.MANY_BODY:
        summary = _evolve_pair(cfg, out_dir, seed)
    else:
        summary = _evolve_single(cfg, out_dir, seed)
    summary = {"schema_version": 1, "kind": cfg.kind.value, "seed": seed,
               "config": cfg.model_dump(mode="json"), **summary}
    write_json(out_dir / "summary.json", summary)
    if summary["error"] is not None:
        raise RunFailed(f"{summary['error']['type']}: {summary['error']['message']}", summary)
    return summary


def run_dispersion(cfg: ExperimentConfig, out_dir):
    _require(cfg, Kind.DISPERSION)
    grid = cfg.grid.build()
    s = cfg.solver
    scfg = dynamics.SolverConfig(s.dt, s.n_steps, cfg.units.build(), None, s.snapshot_every)
    ks = [grid.mode(n) for n in cfg.dispersion.modes]
    rows = dynamics.dispersion_scan(s.solver, ks, grid, scfg, cfg.dispersion.probe)
    out_dir = Path(out_dir)
    write_table(out_dir / "dispersion.csv", dynamics.DispersionRow._fields, rows)
    tol = 1e-5 if s.solver == "schrodinger" else 1e-3
    worst = max(r.rel_error for r in rows)
    summary = {"schema_version": 1, "kind": cfg.kind.value, "solver": s.solver,
               "rows": [r._asdict() for r in rows], "max_rel_error": worst,
               "tolerance": tol, "passed": bool(worst < tol)}
    write_json(out_dir / "dispersion.json", summary)
    return summary


def run_classical_scan(cfg: ExperimentConfig, out_dir):
    _require(cfg, Kind.CLASSICAL_SCAN)
    grid = cfg.grid.build()
    s, c = cfg.solver, cfg.classical
    scfg = dynamics.SolverConfig(s.dt, s.n_steps, cfg.units.build(), None, s.snapshot_every)
    rows = classical.localization_study(c.sigma_list, c.p0, scfg, grid, c.hbar_list, c.x0)
    out_dir = Path(out_dir)
    write_table(out_dir / "classical.csv", classical.LocalizationRow._fields, rows)
    tol = cfg.tolerances.get("delta_localization", 1e-8)
    by_hbar: dict = {}
    for r in rows:
        by_hbar.setdefault(r.hbar, []).append(r.hj_residual)
    # sigma decreases down each block, so the residual must increase
    monotone = {str(h): all(a < b for a, b in zip(v, v[1:])) for h, v in by_hbar.items()}
    hbars = sorted(by_hbar, reverse=True)
    ratios = [float(np.min(np.array(by_hbar[h0]) / np.array(by_hbar[h1])))
              for h0, h1 in zip(hbars, hbars[1:])]
    worst = max(r.max_mean_error for r in rows)
    passed = worst <= tol and all(monotone.values()) and all(q >= 2.0 for q in ratios)
    summary = {"schema_version": 1, "kind": cfg.kind.value, "rows": [r._asdict() for r in rows],
               "max_mean_error": worst, "tolerance": tol, "monotone_in_sigma": monotone,
               "min_hbar_halving_ratio": ratios, "passed": bool(passed)}
    write_json(out_dir / "classical.json", summary)
    return summary
