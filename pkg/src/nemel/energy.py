"""Energy functional, dissipation terms and the discrete energy-law audit."""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .director import director_rhs, elastic_energy
from .errors import NumericalError
from .flow import kinetic_energy
from .grid import NOSLIP, Grid, strain_norm_sq
from .material import MaterialParams, dissipation_quadratic_form, epsilon_tensor, matvec
from .nernst_planck import ionic_dissipation_cellwise, np_rates
from .poisson import aniso_form


@dataclass
class EnergyReport:
    e_kinetic: float = 0.0
    e_elastic: float = 0.0
    e_entropy: float = 0.0
    e_electric: float = 0.0
    e_total: float = 0.0
    d_ionic: float = float("nan")
    d_viscous: float = float("nan")
    d_rotational: float = float("nan")
    # companions kept for comparison in logs and tests
    d_ionic_cell: float = float("nan")
    d_ionic_alpha_bound: float = float("nan")
    d_viscous_dd: float = float("nan")
    extras: dict = field(default_factory=dict)

    @property
    def d_total(self) -> float:
        return self.d_ionic + self.d_viscous + self.d_rotational

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "extras"}


def entropy(g: Grid, c) -> float:
    c = np.asarray(c, dtype=float)
    if np.any(~(c > 0)):
        raise NumericalError("entropy requires positive concentrations")
    return float(np.sum(c * np.log(c))) * g.cell_area


def energy(g: Grid, state, material: MaterialParams) -> EnergyReport:
    """E = ½∫|v|² + ½∫|∇d|² + Σ_k∫c_k ln c_k + ½∫ε(d)∇Φ·∇Φ."""
    ek = kinetic_energy(g, state.flow.u, state.flow.v)
    el = elastic_energy(g, state.d)
    es = entropy(g, state.ion.c) if len(material.species) else 0.0
    ee = 0.5 * aniso_form(g, epsilon_tensor(state.d, material.permittivity), state.phi)
    return EnergyReport(ek, el, es, ee, ek + el + es + ee)


def dissipation(g: Grid, state, material: MaterialParams, director_rate=None, *, bc=NOSLIP,
                report: EnergyReport | None = None) -> EnergyReport:
    """Fill the dissipation fields of ``report`` (or a fresh report) for ``state``.

    ``director_rate`` is d̊; when omitted it is computed from the state.
    """
    rep = report if report is not None else EnergyReport()
    u, v, d, phi = state.flow.u, state.flow.v, state.d, state.phi
    lc = material.leslie
    rates = director_rhs(g, d, phi, u, v, material, bc)
    a = rates.d_ring if director_rate is None else director_rate
    if len(material.species):
        _, rep.d_ionic = np_rates(g, state.ion.c, phi, None, None, material.species)
        rep.d_ionic_cell, rep.d_ionic_alpha_bound = ionic_dissipation_cellwise(
            g, state.ion.c, phi, material.species)
    else:
        rep.d_ionic = rep.d_ionic_cell = rep.d_ionic_alpha_bound = 0.0
    rep.d_viscous = lc.alpha4 * strain_norm_sq(g, u, v, bc)
    Dd = matvec(rates.Dv, d)
    rep.d_viscous_dd = lc.alpha4 * g.integrate(np.sum(Dd * Dd, axis=-1))
    rep.d_rotational = g.integrate(dissipation_quadratic_form(lc, d, rates.Dv, a, check=False))
    return rep


def energy_audit(E, D, dt):
    """r_n = (E^{n+1} − E^n)/dt_n + ½(D^n + D^{n+1}); returns (r, max|r|)."""
    E = np.asarray(E, dtype=float)
    D = np.asarray(D, dtype=float)
    dt = np.broadcast_to(np.asarray(dt, dtype=float), (len(E) - 1,))
    r = (E[1:] - E[:-1]) / dt + 0.5 * (D[:-1] + D[1:])
    return r, float(np.max(np.abs(r))) if r.size else 0.0
