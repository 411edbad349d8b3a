"""Diffusive-rescaling sweep: kinetic runs at shrinking epsilon vs heat flow.

Under the rescaling (drift b/eps, collision L/eps^2) the position marginal
rho_eps of the kinetic solution approaches the heat flow with the matrix
D = pi(b (x) (-L)^{-1} b).  The sweep runs the kinetic solver for a list
of epsilon values, compares rho_eps(T) with the exact spectral heat
solution in L1/L2, and compares the time-integrated currents weakly
against a fixed bank of smooth test fields.
"""

import hashlib
import json
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .heat import HeatFlow
from .kinetic import marginals, simulate
from .velocity import diffusion_matrix, poisson_solve


def default_test_bank(n_cells):
    """Fixed smooth test fields w(x) with |w|_inf = 1 on the cell centers."""
    x = (np.arange(n_cells) + 0.5) / n_cells
    return {
        "one": np.ones(n_cells),
        "cos1": np.cos(2.0 * np.pi * x),
        "sin1": np.sin(2.0 * np.pi * x),
        "cos2": np.cos(4.0 * np.pi * x),
    }


def auto_dt(model, epsilon, T, n_cells, cfl=0.5, drift_axis=0,
            splitting_quality=0.03):
    """Largest dt of the form T/n below both stability and accuracy caps.

    The CFL cap dt <= cfl * eps * dx / max|b| keeps upwind transport
    stable; the cap dt <= splitting_quality * eps^2 keeps the Strang
    splitting error (which grows like dt^2/eps^4) subdominant to the
    physical O(eps) corrections in sweep comparisons.
    """
    bmax = float(np.max(np.abs(model.drift[:, drift_axis])))
    if bmax == 0:
        raise ConfigError("drift vanishes along the chosen axis")
    dx = 1.0 / n_cells
    target = min(cfl * epsilon * dx / bmax, splitting_quality * epsilon**2)
    n_steps = max(1, int(np.ceil(T / target)))
    return T / n_steps


def rescaled_run(model, rho0, epsilon, T, n_cells=64, dt=None,
                 transport="spectral", drift_axis=0):
    """Run the rescaled kinetic equation from local equilibrium rho0 (x) 1."""
    if epsilon <= 0:
        raise ConfigError("epsilon must be positive")
    rho0 = np.asarray(rho0, dtype=float)
    if rho0.ndim != 1 or rho0.size != n_cells:
        raise ConfigError("rho0 must be a 1d profile on the n_cells grid")
    if dt is None:
        dt = auto_dt(model, epsilon, T, n_cells, drift_axis=drift_axis)
    return simulate(
        model, rho0, T, dt, epsilon=epsilon, transport=transport,
        drift_axis=drift_axis,
    )


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    l1: float
    l2: float
    weak_j_err: float
    bonj_constant: float
    runtime_s: float


@dataclass(frozen=True)
class DiffusiveSweepReport:
    rows: tuple
    d_axis: float
    d_matrix: np.ndarray
    n_cells: int
    T: float
    transport: str

    def errors_decreasing(self):
        l1 = [r.l1 for r in self.rows]
        return all(a > b for a, b in zip(l1, l1[1:]))


def _weak_time_pairings(traj, model, bank):
    """J(w) = int_0^T dt int j(t,x) w(x) dx per test field (trapezoid in t)."""
    n_t = traj.f.shape[0]
    j_path = np.empty((n_t, traj.f.shape[1]))
    for n in range(n_t):
        _, j_path[n] = marginals(traj, model, n)
    tw = np.full(n_t, traj.dt)
    tw[0] = tw[-1] = 0.5 * traj.dt
    out = {}
    for name, w in bank.items():
        out[name] = float(traj.dx * tw @ (j_path @ w))
    return out, j_path


def _bonj_probe(j_path, dx, dt, bank):
    """max over dyadic (s,t) windows of |J_{s,t}(w)| / sqrt(t-s)."""
    n_t = j_path.shape[0]
    best = 0.0
    span = n_t - 1
    while span >= 1:
        for start in range(0, n_t - span, max(span, 1)):
            seg = j_path[start : start + span + 1]
            tw = np.full(seg.shape[0], dt)
            tw[0] = tw[-1] = 0.5 * dt
            for w in bank.values():
                val = abs(dx * tw @ (seg @ w)) / np.sqrt(span * dt)
                best = max(best, val)
        span //= 2
    return best


def sweep(model, rho0, eps_list, T, n_cells=64, transport="spectral",
          drift_axis=0, dt_scale=1.0, poisson_tol=1e-12):
    """Compare the rescaled kinetic flow against the heat reference.

    ``dt_scale`` < 1 refines every auto-selected time step by that factor
    (used by the discretization-convergence check).
    """
    eps_list = sorted((float(e) for e in eps_list), reverse=True)
    rho0 = np.asarray(rho0, dtype=float)

    sol = poisson_solve(model, tol=poisson_tol)
    D, _ = diffusion_matrix(model, sol)
    d_axis = float(D[drift_axis, drift_axis])

    flow = HeatFlow(rho0, np.array([[d_axis]]))
    rho_heat_T = flow.rho_at(T)
    bank = default_test_bank(n_cells)
    dx = 1.0 / n_cells

    # heat-side weak pairings on the same time quadrature density
    rows = []
    for eps in eps_list:
        t0 = time.perf_counter()
        dt = auto_dt(model, eps, T, n_cells, drift_axis=drift_axis) * dt_scale
        n_steps = max(1, int(round(T / dt)))
        dt = T / n_steps
        traj = rescaled_run(
            model, rho0, eps, T, n_cells=n_cells, dt=dt,
            transport=transport, drift_axis=drift_axis,
        )
        rho_T, _ = marginals(traj, model, traj.f.shape[0] - 1)
        l1 = float(dx * np.sum(np.abs(rho_T - rho_heat_T)))
        l2 = float(np.sqrt(dx * np.sum((rho_T - rho_heat_T) ** 2)))

        pair_kin, j_path = _weak_time_pairings(traj, model, bank)
        weak_err = 0.0
        for name, w in bank.items():
            times = traj.times
            vals = np.empty(times.size)
            for n, t in enumerate(times):
                vals[n] = dx * float(flow.current_at(t)[:, 0] @ w)
            tw = np.full(times.size, traj.dt)
            tw[0] = tw[-1] = 0.5 * traj.dt
            weak_err = max(weak_err, abs(pair_kin[name] - float(tw @ vals)))
        bonj = _bonj_probe(j_path, dx, traj.dt, bank)
        rows.append(
            SweepRow(eps, l1, l2, weak_err, bonj, time.perf_counter() - t0)
        )
    return DiffusiveSweepReport(
        rows=tuple(rows),
        d_axis=d_axis,
        d_matrix=D,
        n_cells=n_cells,
        T=T,
        transport=transport,
    )


def write_sweep_csv(report, path):
    """Deterministic CSV: timing lives in the manifest, not here."""
    lines = ["# schema=diffusive-sweep-v1", "epsilon,l1,l2,weak_j_err"]
    for r in report.rows:
        lines.append(
            f"{r.epsilon:.12g},{r.l1:.12g},{r.l2:.12g},{r.weak_j_err:.12g}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def write_manifest(report, config, path):
    payload = {
        "config_hash": config_hash(config),
        "config": config,
        "d_axis": report.d_axis,
        "d_matrix": report.d_matrix.tolist(),
        "n_cells": report.n_cells,
        "T": report.T,
        "transport": report.transport,
        "rows": [
            {
                "epsilon": r.epsilon,
                "l1": r.l1,
                "l2": r.l2,
                "weak_j_err": r.weak_j_err,
                "bonj_constant": r.bonj_constant,
            }
            for r in report.rows
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
