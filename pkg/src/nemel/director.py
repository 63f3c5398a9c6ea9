"""Director dynamics with elastic, electric and viscous torques."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .grid import NEUMANN0, NOSLIP, Grid, laplacian_cc, mirror_gradient, strain_and_vorticity, velocity_at_cells
from .material import MaterialParams, matvec, project
from .poisson import torque_tensor


def vector_laplacian(g: Grid, d):
    out = np.empty_like(d)
    out[..., 0] = laplacian_cc(g, d[..., 0], NEUMANN0)
    out[..., 1] = laplacian_cc(g, d[..., 1], NEUMANN0)
    return out


def grad_sq(g: Grid, d):
    """|∇_h d|²: cell average of the squared face differences (wall faces contribute 0).

    Paired with :func:`vector_laplacian` so that d·Δ_h d = −|∇_h d|² for unit d.
    """
    ex = np.sum((d[1:] - d[:-1]) ** 2, axis=-1) / g.hx**2
    ey = np.sum((d[:, 1:] - d[:, :-1]) ** 2, axis=-1) / g.hy**2
    out = np.zeros(g.shape)
    out[1:] += 0.5 * ex
    out[:-1] += 0.5 * ex
    out[:, 1:] += 0.5 * ey
    out[:, :-1] += 0.5 * ey
    return out


def elastic_energy(g: Grid, d) -> float:
    """½ Σ_faces |∇_f d|² hx·hy."""
    ex = np.sum((d[1:] - d[:-1]) ** 2) / g.hx**2
    ey = np.sum((d[:, 1:] - d[:, :-1]) ** 2) / g.hy**2
    return 0.5 * float(ex + ey) * g.cell_area


def director_gradient(g: Grid, d):
    """Centred ∇d with mirrored ghosts, [..., m, j] = ∂_j d_m."""
    out = np.empty(d.shape + (2,))
    for m in range(2):
        gx, gy = mirror_gradient(g, d[..., m])
        out[..., m, 0] = gx
        out[..., m, 1] = gy
    return out


def transport(g: Grid, d, u, v):
    """(v·∇)d with cell-averaged velocity and centred gradients."""
    uc, vc = velocity_at_cells(u, v)
    gd = director_gradient(g, d)
    return gd[..., 0] * uc[..., None] + gd[..., 1] * vc[..., None]


def rotate(W, d):
    """Ω(v)d = W (−d2, d1)."""
    return np.stack([-W * d[..., 1], W * d[..., 0]], axis=-1)


def molecular_field(g: Grid, d, phi, eps_a):
    """h = Δ_h d + ε_a M d with the discrete torque tensor M of the electrostatic form."""
    h = vector_laplacian(g, d)
    if eps_a != 0.0 and phi is not None:
        h = h + eps_a * matvec(torque_tensor(g, phi), d)
    return h


@dataclass
class DirectorRates:
    dt_d: np.ndarray  # ∂t d
    d_ring: np.ndarray  # co-rotational rate, tangent to d
    h: np.ndarray  # molecular field
    Dv: np.ndarray
    W: np.ndarray


def director_rhs(g: Grid, d, phi, u, v, material: MaterialParams, bc=NOSLIP) -> DirectorRates:
    """∂t d = Ω(v)d − P(d)(v·∇d) + (1/γ1)[Δd + |∇d|²d + ε_a P(d)Md − γ2 P(d)D(v)d]."""
    c = material.leslie
    if not c.gamma1 > 0:
        raise ConfigError(f"gamma1 must be positive, got {c.gamma1}")
    eps_a = material.permittivity.eps_a
    lap = vector_laplacian(g, d)
    h = lap
    bracket = lap + grad_sq(g, d)[..., None] * d
    if eps_a != 0.0 and phi is not None:
        Md = matvec(torque_tensor(g, phi), d)
        h = h + eps_a * Md
        bracket = bracket + eps_a * project(d, Md)
    if u is None:
        Dv = np.zeros(g.shape + (2, 2))
        W = np.zeros(g.shape)
        d_ring = bracket / c.gamma1
        return DirectorRates(d_ring.copy(), d_ring, h, Dv, W)
    Dv, W = strain_and_vorticity(g, u, v, bc)
    d_ring = (bracket - c.gamma2 * project(d, matvec(Dv, d))) / c.gamma1
    dt_d = d_ring + rotate(W, d) - project(d, transport(g, d, u, v))
    return DirectorRates(dt_d, d_ring, h, Dv, W)


def corotational_rate(g: Grid, d, u, v, dt_d, bc=NOSLIP):
    """d̊ = ∂t d + P(d)(v·∇d) − Ω(v)d."""
    if u is None:
        return np.asarray(dt_d, dtype=float).copy()
    _, W = strain_and_vorticity(g, u, v, bc)
    return dt_d + project(d, transport(g, d, u, v)) - rotate(W, d)


def max_len_dev(d) -> float:
    return float(np.max(np.abs(np.linalg.norm(d, axis=-1) - 1.0)))


def renormalize(d):
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def director_step(d, dt_d, dt, renormalize_flag=False):
    """Explicit Euler update; returns (d_new, max_len_dev)."""
    d_new = d + dt * dt_d
    n = np.linalg.norm(d_new, axis=-1)
    if np.any(~(n >= 0.5)):
        i, j = (int(x) for x in np.argwhere(~(n >= 0.5))[0])
        raise NumericalError(f"director length {n[i, j]:.3e} < 0.5 at cell ({i}, {j}) with dt={dt:.6g}")
    if renormalize_flag:
        d_new = d_new / n[..., None]
    return d_new, max_len_dev(d_new)
