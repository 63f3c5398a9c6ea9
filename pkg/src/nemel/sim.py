"""Time stepping of the coupled system: Poisson -> director -> ions -> flow."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .director import director_rhs, director_step, max_len_dev
from .energy import EnergyReport, dissipation, energy
from .equilibrium import equilibrium_residual, perturbed_equilibrium, solve_equilibrium
from .errors import NumericalError
from .flow import (
    STRESS,
    VARIATIONAL,
    FlowState,
    body_force,
    ns_step,
    variational_force,
)
from .grid import NOSLIP, Grid, velocity_divergence
from .io import (
    EnergyLog,
    latest_snapshot,
    read_log,
    read_state_fields,
    require_valid,
    truncate_log,
    write_field,
    write_state,
)
from .material import MaterialParams, epsilon_tensor
from .nernst_planck import SG, IonState, np_step
from .poisson import EllipticProblem, efield, solve_aniso_dirichlet
from .presets import initial_director, initial_fields


@dataclass
class Model:
    grid: Grid
    material: MaterialParams
    renormalize: bool = False
    poisson_tol: float = 1e-10
    pressure_tol: float = 1e-10
    bc: str = NOSLIP
    force_form: str = VARIATIONAL
    flux_scheme: str = SG
    safety: float = 0.4
    # hook used to inject failures into the pressure stage in tests
    pressure_solver: object = None


@dataclass
class State:
    t: float
    ion: IonState
    flow: FlowState
    d: np.ndarray
    phi: np.ndarray
    step: int = 0

    @property
    def pi(self):
        return self.flow.pi

    @property
    def c(self):
        return self.ion.c

    def copy(self):
        return State(self.t, self.ion.copy(), self.flow.copy(), self.d.copy(), self.phi.copy(), self.step)


@dataclass
class StepInfo:
    dt: float
    d_ring: np.ndarray
    report: EnergyReport  # energy and dissipation of the input state
    max_len_dev: float = 0.0
    div_inf: float = 0.0


def charge_density(material: MaterialParams, c):
    rho = np.zeros(c.shape[1:])
    for k, s in enumerate(material.species):
        rho += s.z * c[k]
    return rho


def solve_potential(model: Model, c, d):
    g = model.grid
    p = EllipticProblem(g, epsilon_tensor(d, model.material.permittivity), charge_density(model.material, c),
                        tol=model.poisson_tol, eps_perp=model.material.permittivity.eps_perp)
    return solve_aniso_dirichlet(p)


def make_state(model: Model, c, d, u=None, v=None, t=0.0, step=0, pi=None, masses=None) -> State:
    g = model.grid
    c = np.asarray(c, dtype=float).reshape((len(model.material.species),) + g.shape)
    ion = IonState.from_fields(g, c)
    if masses is not None:
        ion.masses = np.asarray(masses, dtype=float)
    flow = FlowState.zero(g)
    if u is not None:
        flow.u = np.array(u, dtype=float)
        flow.v = np.array(v, dtype=float)
        flow.div_inf = float(np.max(np.abs(velocity_divergence(g, flow.u, flow.v))))
    if pi is not None:
        flow.pi = np.array(pi, dtype=float)
    d = np.array(d, dtype=float)
    return State(t, ion, flow, d, solve_potential(model, c, d), step)


def stable_dt(model: Model, state: State) -> float:
    """safety·min(advective, diffusive, drift) limits."""
    g = model.grid
    m = model.material
    h = min(g.hx, g.hy)
    vmax = max(float(np.max(np.abs(state.flow.u))), float(np.max(np.abs(state.flow.v))))
    limits = [np.inf if vmax == 0 else h / vmax]
    kappa = max([m.leslie.alpha4, 1.0 / m.leslie.gamma1] + [s.alpha_max for s in m.species])
    limits.append(h * h / (4.0 * kappa))
    if m.species:
        E = efield(g, state.phi)
        emax = float(np.max(np.sqrt(np.sum(E * E, axis=-1))))
        zd = max(abs(s.z) * s.alpha_max for s in m.species)
        if emax > 0 and zd > 0:
            limits.append(h / (zd * emax))
    return model.safety * min(limits)


def momentum_force(model: Model, state: State, rates):
    g, m = model.grid, model.material
    if model.force_form == VARIATIONAL:
        return variational_force(g, state.d, state.phi, state.ion.c, rates.h, rates.Dv, rates.d_ring, m, model.bc)
    if model.force_form == STRESS:
        return body_force(g, state.d, state.phi, rates.Dv, rates.d_ring, m)
    raise ValueError(f"unknown force form {model.force_form!r}")


def step(model: Model, state: State, dt: float, *, with_report=True):
    """Advance one step; the input state is never modified. Returns (new_state, StepInfo)."""
    g, m = model.grid, model.material
    if not (dt > 0 and np.isfinite(dt)):
        raise NumericalError(f"invalid time step {dt!r}")
    u, v, d, phi = state.flow.u, state.flow.v, state.d, state.phi
    rates = director_rhs(g, d, phi, u, v, m, model.bc)
    report = None
    if with_report:
        report = energy(g, state, m)
        dissipation(g, state, m, rates.d_ring, bc=model.bc, report=report)
    d_new, mld = director_step(d, rates.dt_d, dt, model.renormalize)
    if m.species:
        ion_new = np_step(g, state.ion, phi, u, v, m.species, dt, model.flux_scheme)
    else:
        ion_new = state.ion.copy()
    force = momentum_force(model, state, rates)
    flow_new = ns_step(g, state.flow, dt, force, m.leslie.alpha4, bc=model.bc, tol=model.pressure_tol,
                       pressure_solver=model.pressure_solver)
    phi_new = solve_potential(model, ion_new.c, d_new)
    new = State(state.t + dt, ion_new, flow_new, d_new, phi_new, state.step + 1)
    return new, StepInfo(dt, rates.d_ring, report, mld, flow_new.div_inf)


def state_report(model: Model, state: State) -> EnergyReport:
    rep = energy(model.grid, state, model.material)
    return dissipation(model.grid, state, model.material, bc=model.bc, report=rep)


@dataclass
class Trajectory:
    states: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    dts: list = field(default_factory=list)


def integrate(model: Model, state: State, dt: float, n_steps: int, *, keep_states=False, callback=None):
    """Fixed-step integration returning the final state and per-step reports (n_steps + 1 entries)."""
    traj = Trajectory()
    if keep_states:
        traj.states.append(state)
    for _ in range(n_steps):
        state, info = step(model, state, dt)
        traj.reports.append(info.report)
        traj.dts.append(dt)
        if keep_states:
            traj.states.append(state)
        if callback is not None:
            callback(state, info)
    traj.reports.append(state_report(model, state))
    return state, traj


def with_model(model: Model, **kw) -> Model:
    return replace(model, **kw)


# ---------------------------------------------------------------- runs

CONVERGED = "converged-to-equilibrium"
COMPLETED = "completed"
MAX_STEPS = "max-steps"


@dataclass
class RunSummary:
    verdict: str
    steps: int
    t: float
    out_dir: str
    final_state: str
    energy_log: str
    max_len_dev: float
    min_c: float
    mass_drift: float
    energy_decreased: bool
    residuals: dict

    def as_dict(self):
        return dict(self.__dict__)


def model_from_config(cfg) -> Model:
    return Model(cfg.grid, cfg.material, renormalize=cfg.renormalize, poisson_tol=cfg.poisson_tol,
                 pressure_tol=cfg.pressure_tol, bc=cfg.bc, safety=cfg.safety)


def initial_state(model: Model, cfg) -> State:
    g = model.grid
    if cfg.preset == "perturbed-equilibrium":
        d0 = initial_director(g, cfg.initial)
        amp = cfg.initial.get("amp", 1e-3)
        c, d, _ = perturbed_equilibrium(g, model.material, d0, amp, tol=cfg.equilibrium_tol)
        return make_state(model, c, d)
    c, d, u, v = initial_fields(g, model.material.species, cfg.preset, cfg.initial)
    return make_state(model, c, d, u, v)


def log_values(model: Model, state: State, dt: float, report: EnergyReport, audit: float) -> dict:
    g = model.grid
    vals = {
        "t": state.t, "dt": dt,
        "E_kin": report.e_kinetic, "E_elastic": report.e_elastic, "E_entropy": report.e_entropy,
        "E_elec": report.e_electric, "E_total": report.e_total,
        "D_ionic": report.d_ionic, "D_visc": report.d_viscous, "D_rot": report.d_rotational,
        "audit_r": audit,
        "min_c": float(np.min(state.ion.c)) if state.ion.c.size else float("nan"),
        "max_len_dev": max_len_dev(state.d),
        "div_inf": state.flow.div_inf,
    }
    for k, ck in enumerate(state.ion.c):
        vals[f"mass_{k + 1}"] = g.integrate(ck)
    return vals


def _check_ceiling(state: State, ceiling: float, n: int):
    for name, a in (("c", state.ion.c), ("u", state.flow.u), ("v", state.flow.v), ("phi", state.phi)):
        if a.size and not np.all(np.isfinite(a)):
            raise NumericalError(f"step {n}: non-finite values in {name}")
        if a.size and float(np.max(np.abs(a))) > ceiling:
            raise NumericalError(f"step {n}: |{name}| exceeds the field ceiling {ceiling:g} (possible blow-up)")


def _restore(model: Model, path) -> State:
    g = model.grid
    f, meta = read_state_fields(path, g, len(model.material.species))
    c = np.stack([f[f"c{k + 1}"].values for k in range(len(model.material.species))]) \
        if model.material.species else np.zeros((0,) + g.shape)
    d = np.stack([f["d1"].values, f["d2"].values], axis=-1)
    st = make_state(model, c, d, f["u"].values, f["v"].values, t=float(meta["t"]), step=int(meta["step"]),
                    pi=f["pi"].values, masses=meta["masses"])
    return st


def run(cfg, *, out_dir=None, max_steps=None, override_validity=False, resume=False, progress=None) -> RunSummary:
    """Integrate a configured run, writing snapshots, an energy log and ``summary.json``."""
    require_valid(cfg, override_validity)
    model = model_from_config(cfg)
    g = model.grid
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "energy.csv"
    n_species = len(model.material.species)
    if max_steps is None:
        max_steps = cfg.max_steps

    snap = latest_snapshot(out) if resume else None
    if snap is not None:
        state = _restore(model, snap)
        truncate_log(log_path, state.step)
        log = EnergyLog(log_path, n_species, append=True)
    else:
        state = initial_state(model, cfg)
        write_state(out, state, g)
        log = EnergyLog(log_path, n_species)
    report = state_report(model, state)
    if snap is None:
        log.write(0, log_values(model, state, 0.0, report, float("nan")))

    verdict = COMPLETED
    last_snap = state.step
    t_end = cfg.t_final
    with log:
        while True:
            remaining = t_end - state.t
            if remaining <= 1e-12 * max(1.0, t_end):
                break
            if max_steps is not None and state.step >= max_steps:
                verdict = MAX_STEPS
                break
            dt = cfg.dt if cfg.dt is not None else stable_dt(model, state)
            if not (dt > 0 and np.isfinite(dt)):
                raise NumericalError(f"step {state.step + 1}: time step collapsed (dt = {dt!r})")
            dt = min(dt, remaining)
            try:
                new, _ = step(model, state, dt, with_report=False)
                _check_ceiling(new, cfg.field_ceiling, new.step)
                new_report = state_report(model, new)
            except NumericalError as exc:
                if str(exc).startswith("step "):
                    raise
                raise NumericalError(f"step {state.step + 1}: {exc}") from exc
            audit = (new_report.e_total - report.e_total) / dt + 0.5 * (report.d_total + new_report.d_total)
            log.write(new.step, log_values(model, new, dt, new_report, audit))
            state, report = new, new_report
            if cfg.snapshot_every and state.step % cfg.snapshot_every == 0:
                write_state(out, state, g)
                last_snap = state.step
            res = equilibrium_residual(g, state, model.material, model.bc)
            if all(v < cfg.steady_tol for v in res.values()):
                verdict = CONVERGED
                break
            if progress is not None:
                progress(state, report)
    if last_snap != state.step or snap is None and state.step == 0:
        write_state(out, state, g)
    final_dir = out / f"snap_{state.step:08d}"

    header, rows = read_log(log_path)
    col = {name: i for i, name in enumerate(header)}
    masses0 = rows[0, [col[f"mass_{k + 1}"] for k in range(n_species)]] if n_species else np.zeros(0)
    massesN = rows[-1, [col[f"mass_{k + 1}"] for k in range(n_species)]] if n_species else np.zeros(0)
    drift = float(np.max(np.abs(massesN - masses0) / np.abs(masses0))) if n_species else 0.0
    summary = RunSummary(
        verdict=verdict,
        steps=state.step,
        t=state.t,
        out_dir=str(out),
        final_state=str(final_dir),
        energy_log=str(log_path),
        max_len_dev=float(np.max(rows[:, col["max_len_dev"]])),
        min_c=float(np.nanmin(rows[:, col["min_c"]])) if n_species else float("nan"),
        mass_drift=drift,
        energy_decreased=bool(rows[-1, col["E_total"]] < rows[0, col["E_total"]]) if len(rows) > 1 else True,
        residuals=equilibrium_residual(g, state, model.material, model.bc),
    )
    (out / "summary.json").write_text(json.dumps(summary.as_dict(), indent=2) + "\n", encoding="ascii")
    return summary


def run_equilibrium(cfg, *, out_dir=None):
    """Solve the static equilibrium for a configuration and write its fields."""
    g = cfg.grid
    d0 = initial_director(g, cfg.initial)
    sol = solve_equilibrium(g, cfg.material, d0, tol=cfg.equilibrium_tol)
    out = Path(out_dir if out_dir is not None else cfg.out_dir) / "equilibrium"
    out.mkdir(parents=True, exist_ok=True)
    fields_ = {"phi": sol.phi, "d1": sol.d[..., 0], "d2": sol.d[..., 1], "pi": sol.pi}
    fields_.update({f"c{k + 1}": ck for k, ck in enumerate(sol.c)})
    for name, arr in fields_.items():
        write_field(out / f"{name}.txt", name, arr, g, 0.0)
    info = {"Z": [float(x) for x in sol.Z], "residuals": {k: float(v) for k, v in sol.residuals.items()},
            "iterations": sol.iterations}
    (out / "equilibrium.json").write_text(json.dumps(info, indent=2) + "\n", encoding="ascii")
    return sol, out


__all__ = [
    "CONVERGED",
    "Model",
    "RunSummary",
    "State",
    "StepInfo",
    "charge_density",
    "integrate",
    "make_state",
    "max_len_dev",
    "run",
    "run_equilibrium",
    "solve_potential",
    "stable_dt",
    "state_report",
    "step",
]
