"""Self-contained invariant suites behind ``nemel verify``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import energy_audit
from .equilibrium import equilibrium_residual, fit_prefactors, perturbed_equilibrium
from .grid import (
    Grid,
    cell_gradient,
    velocity_at_cells,
    velocity_gradient,
)
from .material import IonSpecies, LeslieCoefficients, MaterialParams, Permittivity
from .poisson import EllipticProblem, solve_aniso_dirichlet, solve_pressure_neumann
from .presets import director_from_angle, initial_fields, shear_cell_velocity
from .sim import Model, integrate, make_state, stable_dt, step

SUITES = ("conservation", "dissipation", "unitlength", "boltzmann", "convergence", "appendixB")
DEFAULT_SIZE = {"conservation": 32, "dissipation": 32, "unitlength": 32, "boltzmann": 16,
                "convergence": 32, "appendixB": 128}

SMOKE_LESLIE = LeslieCoefficients(0.2, -0.6, 0.1, 1.0, 0.5, 0.3)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def smoke_material(masses=(1.0, 1.0), eps_a=0.5) -> MaterialParams:
    return MaterialParams(SMOKE_LESLIE, Permittivity(1.0, eps_a),
                          (IonSpecies(1.0, 1.0, masses[0]), IonSpecies(-1.0, 1.0, masses[1])))


def smoke_state(n: int, material=None, *, renormalize=False):
    """Binary ions, mild twist and a weak shear cell on the unit square."""
    material = material or smoke_material()
    model = Model(Grid(n, n), material, renormalize=renormalize)
    c, d, u, v = initial_fields(model.grid, material.species, "twist", {"flow_amp": 0.05})
    return model, make_state(model, c, d, u, v)


def order(errors) -> list[float]:
    e = np.asarray(errors, dtype=float)
    return list(np.log2(e[:-1] / e[1:]))


# ---------------------------------------------------------------- suites

def conservation(size: int) -> list[Check]:
    model, s = smoke_state(size)
    dt = stable_dt(model, s)
    m0 = s.ion.masses.copy()
    g = model.grid
    min_c = np.inf
    drift = 0.0
    for _ in range(200):
        s, _ = step(model, s, dt, with_report=False)
        min_c = min(min_c, float(s.ion.c.min()))
        m = np.array([g.integrate(ck) for ck in s.ion.c])
        drift = max(drift, float(np.max(np.abs(m - m0) / m0)))
    return [Check("mass drift", drift <= 1e-12, f"max relative drift {drift:.3e} (limit 1e-12)"),
            Check("positivity", min_c > 0, f"min c over 200 steps {min_c:.6g}")]


def dissipation(size: int) -> list[Check]:
    model, s0 = smoke_state(size)
    dt = stable_dt(model, s0)
    peaks = []
    for k in (1, 2):
        _, tr = integrate(model, s0, dt / k, 50 * k)
        E = [r.e_total for r in tr.reports]
        D = [r.d_total for r in tr.reports]
        peaks.append(energy_audit(E, D, dt / k)[1])
        decreased = E[-1] < E[0]
    ratio = peaks[0] / peaks[1]
    return [Check("audit ratio", 1.6 <= ratio <= 2.6,
                  f"max|r| {peaks[0]:.3e} -> {peaks[1]:.3e}, ratio {ratio:.3f} (window [1.6, 2.6])"),
            Check("energy decrease", decreased, f"E_final < E_0 is {decreased}")]


def unitlength(size: int, t_final: float = 0.005) -> list[Check]:
    devs = []
    for n in (size, round(size * np.sqrt(2.0))):
        model, s = smoke_state(n, renormalize=False)
        h = min(model.grid.hx, model.grid.hy)
        steps = int(np.ceil(t_final / (h * h / 8.0)))
        dt = t_final / steps
        dev = 0.0
        for _ in range(steps):
            s, info = step(model, s, dt, with_report=False)
            dev = max(dev, info.max_len_dev)
        devs.append(dev)
    ratio = devs[0] / devs[1]
    return [Check("unit length", devs[0] <= 1e-3, f"max||d|-1| {devs[0]:.3e} at {size}^2"),
            Check("unit length ratio", 1.7 <= ratio <= 2.4, f"ratio {ratio:.3f} (window [1.7, 2.4])")]


def boltzmann(size: int, steady_tol: float = 1e-6, max_steps: int = 20000) -> list[Check]:
    g = Grid(2 * size, size, 1.0, 0.5)
    material = smoke_material(masses=(3.0, 1.0))
    model = Model(g, material)
    X, Y = g.cell_coords()
    d0 = director_from_angle(0.3 + 0.5 * np.cos(np.pi * X) * np.cos(2 * np.pi * Y))
    c, d, _ = perturbed_equilibrium(g, material, d0, 1e-3)
    s = make_state(model, c, d)
    converged = False
    for _ in range(max_steps):
        s, _ = step(model, s, stable_dt(model, s), with_report=False)
        res = equilibrium_residual(g, s, material, model.bc)
        if all(v < steady_tol for v in res.values()):
            converged = True
            break
    Z = fit_prefactors(g, s.ion.c, material.valences, s.phi)
    err = max(float(np.max(np.abs(ck - Z[k] * np.exp(-material.valences[k] * s.phi))) / np.max(np.abs(ck)))
              for k, ck in enumerate(s.ion.c))
    return [Check("converged", converged, f"steps {s.step}, residuals " +
                  ", ".join(f"{k}={v:.2e}" for k, v in res.items())),
            Check("Boltzmann profile", err <= 1e-4, f"max relative deviation {err:.3e} (limit 1e-4)")]


def poisson_errors(sizes):
    iso, aniso, neu = [], [], []
    for n in sizes:
        g = Grid(n, n)
        X, Y = g.cell_coords()
        ex = np.sin(np.pi * X) * np.sin(np.pi * Y)
        for eps, fac, acc in ((np.eye(2), 2.0, iso), (np.diag([3.0, 1.0]), 4.0, aniso)):
            phi = solve_aniso_dirichlet(EllipticProblem(g, eps, fac * np.pi**2 * ex))
            acc.append(np.sqrt(g.integrate((phi - ex) ** 2)))
        pn = np.cos(np.pi * X) * np.cos(np.pi * Y)
        p = solve_pressure_neumann(g, -2.0 * np.pi**2 * pn)
        neu.append(np.sqrt(g.integrate((p - (pn - pn.mean())) ** 2)))
    return iso, aniso, neu


def convergence(size: int) -> list[Check]:
    out = []
    for name, errs in zip(("isotropic", "anisotropic", "neumann"), poisson_errors((size, 2 * size, 4 * size))):
        ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
        ok = all(3.5 <= r <= 4.5 for r in ratios)
        out.append(Check(f"{name} ratios", ok, ", ".join(f"{r:.3f}" for r in ratios) + " (window [3.5, 4.5])"))
    return out


def identity_terms(g: Grid, phi, d, u, v):
    """Discrete (I1, I2, I3) of ∫(∇Φ⊗∇Φ)(d⊗d):∇v = ∫((∇Φ⊗∇Φ)d)·(v·∇d) + ∫(d⊗d)∇Φ·∇(v·∇Φ)."""
    E = np.stack(cell_gradient(g, phi), axis=-1)
    dx, dy = cell_gradient(g, d)
    uc, vc = velocity_at_cells(u, v)
    G = velocity_gradient(g, u, v)  # [k, i] = ∂_i v_k
    Ed = np.sum(E * d, axis=-1)
    i1 = np.sum(Ed[..., None, None] * E[..., :, None] * d[..., None, :] * G)
    vgd = uc[..., None] * dx + vc[..., None] * dy
    i2 = np.sum(Ed * np.sum(E * vgd, axis=-1))
    wx, wy = cell_gradient(g, uc * E[..., 0] + vc * E[..., 1])
    i3 = np.sum(Ed * (d[..., 0] * wx + d[..., 1] * wy))
    return i1 * g.cell_area, i2 * g.cell_area, i3 * g.cell_area


def identity_residual(n: int) -> float:
    g = Grid(n, n)
    X, Y = g.cell_coords()
    phi = np.sin(np.pi * X) * np.cos(np.pi * Y) + 0.5 * X * Y
    d = director_from_angle(0.4 + 0.6 * np.sin(np.pi * X) * np.cos(2 * np.pi * Y))
    u, v = shear_cell_velocity(g, 1.0)
    i1, i2, i3 = identity_terms(g, phi, d, u, v)
    return i1 - i2 - i3


def appendixB(size: int) -> list[Check]:
    res = [abs(identity_residual(n)) for n in (size, 2 * size, 4 * size)]
    orders = order(res)
    return [Check("identity order", min(orders) >= 1.7,
                  "residuals " + ", ".join(f"{r:.3e}" for r in res) +
                  "; orders " + ", ".join(f"{p:.3f}" for p in orders) + " (>= 1.7)")]


def run_suite(name: str, size: int | None = None) -> list[Check]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return globals()[name](size or DEFAULT_SIZE[name])
