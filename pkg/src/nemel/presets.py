"""Named initial conditions."""
from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .grid import Grid

PRESETS = ("uniform", "twist", "shear-cell", "perturbed-equilibrium")

DEFAULTS = {
    "angle": 0.0,
    "twist": 0.5,
    "ion_amp": 0.2,
    "amp": 1e-3,
    "flow_amp": 0.0,
}


def director_from_angle(theta):
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def twist_angle(g: Grid, angle, twist):
    X, Y = g.cell_coords()
    return angle + twist * np.cos(np.pi * X / g.Lx) * np.cos(np.pi * Y / g.Ly)


def _ions(g: Grid, species, ion_amp):
    X, _ = g.cell_coords()
    c = np.empty((len(species), g.nx, g.ny))
    for k, s in enumerate(species):
        mean = s.mass / g.area
        c[k] = mean * (1.0 + ion_amp * np.cos(np.pi * X / g.Lx) * (-1.0) ** k)
    return c


def initial_director(g: Grid, params: dict | None = None):
    """Twisted director used by the analytic presets and as the equilibrium initial guess."""
    p = dict(DEFAULTS)
    p.update(params or {})
    return director_from_angle(twist_angle(g, p["angle"], p["twist"]))


def shear_cell_velocity(g: Grid, amp):
    """Discrete curl of the nodal stream function amp·sin²(πx)sin²(πy); exactly solenoidal."""
    Xn, Yn = g.node_coords()
    psi = amp * np.sin(np.pi * Xn / g.Lx) ** 2 * np.sin(np.pi * Yn / g.Ly) ** 2
    psi[[0, -1], :] = 0.0
    psi[:, [0, -1]] = 0.0
    u = (psi[:, 1:] - psi[:, :-1]) / g.hy
    v = -(psi[1:, :] - psi[:-1, :]) / g.hx
    return u, v


def initial_fields(g: Grid, species, preset: str, params: dict | None = None):
    """Return (c, d, u, v) for the analytic presets; perturbed-equilibrium is built in equilibrium."""
    p = dict(DEFAULTS)
    p.update(params or {})
    if preset == "uniform":
        d = director_from_angle(np.full(g.shape, p["angle"]))
        c = _ions(g, species, 0.0)
        u, v = shear_cell_velocity(g, 0.0)
    elif preset == "twist":
        d = director_from_angle(twist_angle(g, p["angle"], p["twist"]))
        c = _ions(g, species, p["ion_amp"])
        u, v = shear_cell_velocity(g, p["flow_amp"])
    elif preset == "shear-cell":
        d = director_from_angle(twist_angle(g, p["angle"], p["twist"]))
        c = _ions(g, species, p["ion_amp"])
        u, v = shear_cell_velocity(g, p["amp"])
    else:
        raise ConfigError(f"unknown or non-analytic preset {preset!r}; choose from {', '.join(PRESETS)}")
    return c, d, u, v
