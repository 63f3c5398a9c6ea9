"""Conservative drift-diffusion-advection update for the ion concentrations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .grid import Grid, cell_gradient, cell_to_xface, cell_to_yface

SG = "sg"
CENTRAL = "central"


def bernoulli(x):
    """B(x) = x / (e^x − 1), B(0) = 1."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nz = x != 0.0
    out[nz] = x[nz] / np.expm1(x[nz])
    return out


def log_mean(a, b):
    """(a − b)/(ln a − ln b), continuous at a = b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.log(a) - np.log(b)
    small = np.abs(x) < 1e-3
    xs = np.where(small, 1.0, x)
    exact = b * np.expm1(xs) / xs
    series = b * (1.0 + x * (0.5 + x * (1.0 / 6.0 + x / 24.0)))
    return np.where(small, series, exact)


def chemical_potential(c, phi, z):
    c = np.asarray(c, dtype=float)
    if np.any(~(c > 0)):
        i = np.unravel_index(np.argmin(np.where(np.isnan(c), -np.inf, c)), c.shape)
        raise NumericalError(f"non-positive concentration {c[i]:.3e} at cell {tuple(int(k) for k in i)}")
    return np.log(c) + z * np.asarray(phi, dtype=float)


def _sg_face(cL, cR, dphi, z, D, h):
    delta = z * dphi
    return (D / h) * (bernoulli(-delta) * cR - bernoulli(delta) * cL)


def np_face_flux(g: Grid, c, phi, D, z, scheme=SG):
    """Face fluxes J = D∇c + z c D∇Φ (so that ∂t c = div J); boundary-normal faces are zero."""
    c = np.asarray(c, dtype=float)
    phi = np.asarray(phi, dtype=float)
    D = np.asarray(D, dtype=float)
    if D.ndim == 0:
        D = float(D) * np.eye(2)
    Jx = np.zeros((g.nx + 1, g.ny))
    Jy = np.zeros((g.nx, g.ny + 1))
    if scheme == SG:
        Jx[1:-1] = _sg_face(c[:-1], c[1:], phi[1:] - phi[:-1], z, D[0, 0], g.hx)
        Jy[:, 1:-1] = _sg_face(c[:, :-1], c[:, 1:], phi[:, 1:] - phi[:, :-1], z, D[1, 1], g.hy)
    elif scheme == CENTRAL:
        cx = 0.5 * (c[1:] + c[:-1])
        cy = 0.5 * (c[:, 1:] + c[:, :-1])
        Jx[1:-1] = D[0, 0] * ((c[1:] - c[:-1]) + z * cx * (phi[1:] - phi[:-1])) / g.hx
        Jy[:, 1:-1] = D[1, 1] * ((c[:, 1:] - c[:, :-1]) + z * cy * (phi[:, 1:] - phi[:, :-1])) / g.hy
    else:
        raise ValueError(f"unknown flux scheme {scheme!r}")
    if D[0, 1] != 0.0:
        # cross-diffusion from centred cell gradients averaged onto the faces
        cgx, cgy = cell_gradient(g, c)
        pgx, pgy = cell_gradient(g, phi)
        tx = cell_to_xface(cgy + z * c * pgy)
        ty = cell_to_yface(cgx + z * c * pgx)
        Jx[1:-1] += D[0, 1] * tx[1:-1]
        Jy[:, 1:-1] += D[0, 1] * ty[:, 1:-1]
    return Jx, Jy


def advective_flux(u, v, c):
    """Face fluxes u·c_f with log-mean face values; zero on walls when u, v vanish there."""
    Fx = np.zeros_like(u)
    Fy = np.zeros_like(v)
    Fx[1:-1] = u[1:-1] * log_mean(c[1:], c[:-1])
    Fy[:, 1:-1] = v[:, 1:-1] * log_mean(c[:, 1:], c[:, :-1])
    return Fx, Fy


@dataclass
class IonState:
    c: np.ndarray  # (N, nx, ny)
    masses: np.ndarray

    @classmethod
    def from_fields(cls, g: Grid, c):
        c = np.asarray(c, dtype=float)
        return cls(c, np.array([g.integrate(ck) for ck in c]))

    def copy(self):
        return IonState(self.c.copy(), self.masses.copy())


def np_rates(g: Grid, c, phi, u, v, species, scheme=SG):
    """Return (∂t c, ionic dissipation Σ_faces J·∇μ hx·hy).

    With ``u``/``v`` None the advective part is skipped.
    """
    rates = np.empty_like(c)
    diss = 0.0
    for k, sp_ in enumerate(species):
        Jx, Jy = np_face_flux(g, c[k], phi, sp_.D, sp_.z, scheme)
        r = (Jx[1:] - Jx[:-1]) / g.hx + (Jy[:, 1:] - Jy[:, :-1]) / g.hy
        if u is not None:
            Fx, Fy = advective_flux(u, v, c[k])
            r -= (Fx[1:] - Fx[:-1]) / g.hx + (Fy[:, 1:] - Fy[:, :-1]) / g.hy
        rates[k] = r
        if scheme == SG:
            mu = chemical_potential(c[k], phi, sp_.z)
            diss += float(np.sum(Jx[1:-1] * (mu[1:] - mu[:-1]) / g.hx)
                          + np.sum(Jy[:, 1:-1] * (mu[:, 1:] - mu[:, :-1]) / g.hy))
    return rates, diss * g.cell_area


def np_step(g: Grid, ion: IonState, phi, u, v, species, dt, scheme=SG) -> IonState:
    """Explicit Euler step c ← c + dt·[div J − div(v c)]."""
    rates, _ = np_rates(g, ion.c, phi, u, v, species, scheme)
    c_new = ion.c + dt * rates
    bad = ~(c_new > 0)
    if np.any(bad):
        k, i, j = (int(x) for x in np.argwhere(bad)[0])
        raise NumericalError(
            f"negative concentration {c_new[k, i, j]:.3e} for species {k + 1} at cell ({i}, {j}) with dt={dt:.6g}"
        )
    return IonState(c_new, ion.masses.copy())


def ionic_dissipation_cellwise(g: Grid, c, phi, species):
    """Σ_k ∫ c_k ∇μ_k·D_k∇μ_k and the lower-bound form α Σ_k ∫ c_k|∇μ_k|² from centred gradients."""
    weighted = 0.0
    plain = 0.0
    for k, sp_ in enumerate(species):
        mu = chemical_potential(c[k], phi, sp_.z)
        gx, gy = cell_gradient(g, mu)
        gm = np.stack([gx, gy], axis=-1)
        Dg = gm @ sp_.D
        weighted += g.integrate(c[k] * np.sum(gm * Dg, axis=-1))
        plain += g.integrate(c[k] * (gx**2 + gy**2))
    alpha = min(s.alpha_min for s in species) if species else 0.0
    return weighted, alpha * plain
