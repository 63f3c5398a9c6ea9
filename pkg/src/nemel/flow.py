"""Momentum update on the MAC grid: stresses, body force, advection, viscous solve and projection."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .director import director_gradient
from .grid import (
    NEUMANN0,
    NOSLIP,
    Grid,
    cell_gradient,
    grad_cc,
    interior_face_mask,
    pack_velocity,
    unpack_velocity,
    velocity_divergence,
    velocity_gradient_adjoint,
    viscous_operator,
)
from .material import LeslieCoefficients, Permittivity, epsilon_tensor, leslie_stress, outer
from .nernst_planck import chemical_potential, log_mean
from .poisson import efield, solve_pressure_neumann, torque_tensor

VARIATIONAL = "variational"
STRESS = "stress"


@dataclass
class FlowState:
    u: np.ndarray
    v: np.ndarray
    pi: np.ndarray
    div_inf: float = 0.0

    @classmethod
    def zero(cls, g: Grid):
        return cls(np.zeros((g.nx + 1, g.ny)), np.zeros((g.nx, g.ny + 1)), np.zeros(g.shape), 0.0)

    def copy(self):
        return FlowState(self.u.copy(), self.v.copy(), self.pi.copy(), self.div_inf)


def ericksen_stress(g: Grid, d):
    """[∇d⊙∇d]_{ij} = ∂_i d·∂_j d from second-order cell gradients."""
    dx, dy = cell_gradient(g, d)
    grads = np.stack([dx, dy], axis=-2)  # [..., i, m] = ∂_i d_m
    return np.einsum("...im,...jm->...ij", grads, grads)


QUADRANT = "quadrant"
CELL = "cell"


def field_tensor(g: Grid, phi, form=QUADRANT):
    """Cellwise ∇Φ⊗∇Φ.

    ``quadrant`` averages the four face-gradient products of the discrete electric
    energy (Φ = 0 on the wall); ``cell`` uses the outer product of the cell gradient.
    """
    if form == QUADRANT:
        return torque_tensor(g, phi)
    if form == CELL:
        E = efield(g, phi)
        return outer(E, E)
    raise ValueError(f"unknown field tensor form {form!r}")


def electric_stress(g: Grid, phi, d, p: Permittivity, form=QUADRANT):
    """(∇Φ⊗∇Φ)ε(d), not symmetric in general."""
    return field_tensor(g, phi, form) @ epsilon_tensor(d, p)


def tensor_divergence_faces(g: Grid, T):
    """Row-wise divergence of a cell tensor field sampled on interior faces; wall faces are 0."""
    fx = np.zeros((g.nx + 1, g.ny))
    fy = np.zeros((g.nx, g.ny + 1))
    _, dTxy_dy = cell_gradient(g, T[..., 0, 1])
    dTyx_dx, _ = cell_gradient(g, T[..., 1, 0])
    fx[1:-1] = (T[1:, :, 0, 0] - T[:-1, :, 0, 0]) / g.hx + 0.5 * (dTxy_dy[1:] + dTxy_dy[:-1])
    fy[:, 1:-1] = (T[:, 1:, 1, 1] - T[:, :-1, 1, 1]) / g.hy + 0.5 * (dTyx_dx[:, 1:] + dTyx_dx[:, :-1])
    return fx, fy


def leslie_explicit_stress(c: LeslieCoefficients, Dv, d, d_ring):
    """Leslie stress without the alpha4 D(v) part."""
    return leslie_stress(c, Dv, d, d_ring, check=False, include_newtonian=False)


def body_force(g: Grid, d, phi, Dv, d_ring, material) -> tuple[np.ndarray, np.ndarray]:
    """f = −div(∇d⊙∇d) + div σ' + div((∇Φ⊗∇Φ)ε(d)) on faces, σ' the explicit Leslie part."""
    T = -ericksen_stress(g, d) + electric_stress(g, phi, d, material.permittivity)
    T = T + leslie_explicit_stress(material.leslie, Dv, d, d_ring)
    return tensor_divergence_faces(g, T)


def cells_to_faces_adjoint(g: Grid, ax, ay):
    """Transpose of face-to-cell averaging: cell vector components -> face values."""
    fx = np.zeros((g.nx + 1, g.ny))
    fy = np.zeros((g.nx, g.ny + 1))
    fx[1:] += 0.5 * ax
    fx[:-1] += 0.5 * ax
    fy[:, 1:] += 0.5 * ay
    fy[:, :-1] += 0.5 * ay
    return fx, fy


def variational_force(g: Grid, d, phi, c, h, Dv, d_ring, material, bc=NOSLIP):
    """Force paired with the discrete energy: −avgᵀ[(∇d)ᵀP(d)h] − Σ c_f ∇_f μ − G_cᵀσ'.

    Differs from :func:`body_force` by a discrete gradient plus O(h²).
    """
    gd = director_gradient(g, d)  # [..., m, j]
    Ph = h - d * np.sum(d * h, axis=-1, keepdims=True)
    a = np.einsum("...mj,...m->...j", gd, Ph)
    fx, fy = cells_to_faces_adjoint(g, a[..., 0], a[..., 1])
    fx, fy = -fx, -fy
    for k, s in enumerate(material.species):
        mu = chemical_potential(c[k], phi, s.z)
        gx, gy = grad_cc(g, mu, NEUMANN0)
        fx[1:-1] -= log_mean(c[k][1:], c[k][:-1]) * gx[1:-1]
        fy[:, 1:-1] -= log_mean(c[k][:, 1:], c[k][:, :-1]) * gy[:, 1:-1]
    sig = leslie_explicit_stress(material.leslie, Dv, d, d_ring)
    lx, ly = velocity_gradient_adjoint(g, sig, bc)
    fx -= lx
    fy -= ly
    fx[[0, -1]] = 0.0
    fy[:, [0, -1]] = 0.0
    return fx, fy


def advection(g: Grid, u, v):
    """Divergence-form MAC advection (v·∇)v; energy neutral for discretely solenoidal v."""
    au = np.zeros_like(u)
    av = np.zeros_like(v)
    # x-momentum: cell-centred flux uu, node flux vu
    uc = 0.5 * (u[1:] + u[:-1])  # (nx, ny)
    fuu = uc * uc
    vn = np.zeros((g.nx + 1, g.ny + 1))
    vn[1:-1] = 0.5 * (v[1:] + v[:-1])  # v averaged in x to nodes (wall nodes: v=0 in x-ghost sense)
    un = np.zeros((g.nx + 1, g.ny + 1))
    un[:, 1:-1] = 0.5 * (u[:, 1:] + u[:, :-1])
    fvu = vn * un
    au[1:-1] = (fuu[1:] - fuu[:-1]) / g.hx + (fvu[1:-1, 1:] - fvu[1:-1, :-1]) / g.hy
    # y-momentum
    vc = 0.5 * (v[:, 1:] + v[:, :-1])
    fvv = vc * vc
    av[:, 1:-1] = (fvv[:, 1:] - fvv[:, :-1]) / g.hy + (fvu[1:, 1:-1] - fvu[:-1, 1:-1]) / g.hx
    return au, av


@lru_cache(maxsize=16)
def _viscous_lu(g: Grid, coeff: float, bc: str):
    mask = interior_face_mask(g)
    K = viscous_operator(g, bc)[mask][:, mask]
    A = sp.identity(K.shape[0], format="csc") + coeff * K.tocsc()
    return spla.splu(A.tocsc())


def viscous_solve(g: Grid, u, v, dt, alpha4, bc=NOSLIP):
    """Backward Euler (I + dt·α4·K) w = v on interior faces."""
    mask = interior_face_mask(g)
    x = pack_velocity(u, v)
    out = np.zeros_like(x)
    out[mask] = _viscous_lu(g, float(dt * alpha4), bc).solve(x[mask])
    return unpack_velocity(g, out)


def project_velocity(g: Grid, u, v, dt, tol=1e-10):
    """Helmholtz projection: v ← v − dt∇π with Δπ = div v / dt."""
    rhs = velocity_divergence(g, u, v) / dt
    pi = solve_pressure_neumann(g, rhs, tol=tol)
    gx, gy = grad_cc(g, pi, NEUMANN0)
    u = u - dt * gx
    v = v - dt * gy
    return u, v, pi


def ns_step(g: Grid, state: FlowState, dt, force, alpha4, *, bc=NOSLIP, tol=1e-10,
            advect=True, pressure_solver=None) -> FlowState:
    """Predictor with explicit advection and force, implicit viscosity, then projection."""
    fx, fy = force
    u, v = state.u, state.v
    if advect:
        au, av = advection(g, u, v)
    else:
        au, av = 0.0, 0.0
    us = u + dt * (fx - au)
    vs = v + dt * (fy - av)
    us[[0, -1]] = 0.0
    vs[:, [0, -1]] = 0.0
    us, vs = viscous_solve(g, us, vs, dt, alpha4, bc)
    if pressure_solver is None:
        un, vn, pi = project_velocity(g, us, vs, dt, tol)
    else:
        un, vn, pi = pressure_solver(g, us, vs, dt, tol)
    div_inf = float(np.max(np.abs(velocity_divergence(g, un, vn))))
    return FlowState(un, vn, pi, div_inf)


def kinetic_energy(g: Grid, u, v) -> float:
    """½ Σ_faces |v|² hx·hy."""
    return 0.5 * float(np.sum(u * u) + np.sum(v * v)) * g.cell_area
