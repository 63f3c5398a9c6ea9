"""Elliptic solves: anisotropic electrostatics (Dirichlet) and the pressure projection (Neumann).

The anisotropic operator is the gradient of the discrete quadratic form

    a(Φ, Ψ) = hx·hy Σ_cells ¼ Σ_q g_q(Φ)·ε_cell g_q(Ψ),

where q runs over the four cell quadrants and g_q pairs one x-face gradient
with one y-face gradient of that cell. It is symmetric, reduces to the
standard 5-point scheme when ε is isotropic and uses four-point tangential
averages for the cross terms.
"""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse.linalg as spla

from .errors import SolverError
from .grid import DIRICHLET0, NEUMANN0, Grid, cell_gradient, grad_cc, laplacian_matrix


def dot(a, b) -> float:
    # numpy pairwise summation: fixed order independent of BLAS threading
    return float(np.sum(a * b))


@dataclass
class PCGInfo:
    iterations: int
    residual: float
    history: list = field(default_factory=list)


def pcg(apply: Callable, b, precond: Callable, *, tol=1e-10, max_iter=500, x0=None,
        bnorm=None, project: Callable | None = None, what="PCG"):
    """Preconditioned conjugate gradients on a symmetric positive (semi)definite operator.

    Stops when ‖b − Ax‖₂ ≤ tol·bnorm. ``project`` removes a null-space component
    from residuals and search directions (used for the Neumann gauge).
    """
    b = np.asarray(b, dtype=float)
    bnorm = np.sqrt(dot(b, b)) if bnorm is None else bnorm
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - apply(x) if x0 is not None else b.copy()
    if project is not None:
        r = project(r)
    rnorm = np.sqrt(dot(r, r))
    info = PCGInfo(0, rnorm, [rnorm])
    if bnorm == 0.0 or rnorm <= tol * bnorm:
        return x, info
    z = precond(r)
    if project is not None:
        z = project(z)
    p = z.copy()
    rz = dot(r, z)
    for k in range(1, max_iter + 1):
        Ap = apply(p)
        pAp = dot(p, Ap)
        if not pAp > 0:
            raise SolverError(f"{what}: operator not positive definite", rnorm, k)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if project is not None:
            r = project(r)
        rnorm = np.sqrt(dot(r, r))
        info.history.append(rnorm)
        info.iterations = k
        info.residual = rnorm
        if rnorm <= tol * bnorm:
            return x, info
        z = precond(r)
        if project is not None:
            z = project(z)
        rz_new = dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"{what} did not converge", rnorm / bnorm, max_iter)


# ---------------------------------------------------------------------------
# anisotropic quadratic form
# ---------------------------------------------------------------------------

def quadrant_gradients(g: Grid, phi):
    """Face gradients of Φ (Dirichlet ghosts) seen from each cell: left/right x, bottom/top y."""
    Gx, Gy = grad_cc(g, phi, DIRICHLET0)
    return Gx[:-1], Gx[1:], Gy[:, :-1], Gy[:, 1:]


def grad_dirichlet_adjoint(g: Grid, Fx, Fy):
    """Transpose of grad_cc(·, dirichlet0)."""
    out = (Fx[:-1] - Fx[1:]) / g.hx + (Fy[:, :-1] - Fy[:, 1:]) / g.hy
    out[0] += Fx[0] / g.hx
    out[-1] -= Fx[-1] / g.hx
    out[:, 0] += Fy[:, 0] / g.hy
    out[:, -1] -= Fy[:, -1] / g.hy
    return out


def aniso_fluxes(g: Grid, eps, phi):
    """Face fluxes (ε∇Φ accumulated from quadrants), the adjoint-side input of the operator."""
    exx, exy, eyy = eps[..., 0, 0], eps[..., 0, 1], eps[..., 1, 1]
    gl, gr, gb, gt = quadrant_gradients(g, phi)
    Fx = np.zeros((g.nx + 1, g.ny))
    Fy = np.zeros((g.nx, g.ny + 1))
    sy = gb + gt
    sx = gl + gr
    Fx[:-1] += 0.25 * (2.0 * exx * gl + exy * sy)
    Fx[1:] += 0.25 * (2.0 * exx * gr + exy * sy)
    Fy[:, :-1] += 0.25 * (exy * sx + 2.0 * eyy * gb)
    Fy[:, 1:] += 0.25 * (exy * sx + 2.0 * eyy * gt)
    return Fx, Fy


def aniso_apply(g: Grid, eps, phi):
    """Discrete −div(ε∇Φ) with Φ = 0 on the boundary (symmetric positive definite)."""
    return grad_dirichlet_adjoint(g, *aniso_fluxes(g, eps, phi))


def aniso_form(g: Grid, eps, phi, psi=None) -> float:
    """a(Φ, Ψ); with Ψ omitted returns a(Φ, Φ)."""
    qa = quadrant_gradients(g, phi)
    qb = qa if psi is None else quadrant_gradients(g, psi)
    exx, exy, eyy = eps[..., 0, 0], eps[..., 0, 1], eps[..., 1, 1]
    tot = np.zeros(g.shape)
    for ax, bx in ((0, 0), (1, 1)):
        for ay, by in ((2, 2), (3, 3)):
            gx, gy = qa[ax], qa[ay]
            hx_, hy_ = qb[bx], qb[by]
            tot += exx * gx * hx_ + exy * (gx * hy_ + gy * hx_) + eyy * gy * hy_
    return float(np.sum(0.25 * tot) * g.cell_area)


def torque_tensor(g: Grid, phi):
    """M = ¼ Σ_q g_q⊗g_q per cell, the discrete ∇Φ⊗∇Φ consistent with :func:`aniso_form`.

    For fixed Φ, ∂a/∂d_cell = 2 ε_a hx·hy M d.
    """
    gl, gr, gb, gt = quadrant_gradients(g, phi)
    M = np.empty(g.shape + (2, 2))
    M[..., 0, 0] = 0.5 * (gl**2 + gr**2)
    M[..., 1, 1] = 0.5 * (gb**2 + gt**2)
    M[..., 0, 1] = M[..., 1, 0] = 0.25 * (gl + gr) * (gb + gt)
    return M


@lru_cache(maxsize=16)
def _dirichlet_lu(g: Grid):
    return spla.splu(-laplacian_matrix(g, DIRICHLET0))


@lru_cache(maxsize=16)
def _neumann_lu(g: Grid):
    A = (-laplacian_matrix(g, NEUMANN0)).tolil()
    A[0, :] = 0.0
    A[:, 0] = 0.0
    A[0, 0] = 1.0
    return spla.splu(A.tocsc())


@dataclass
class EllipticProblem:
    grid: Grid
    eps: np.ndarray
    rho: np.ndarray
    bc: str = DIRICHLET0
    tol: float = 1e-10
    max_iter: int = 500
    eps_perp: float | None = None

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        if self.eps.shape == (2, 2):
            self.eps = np.broadcast_to(self.eps, self.grid.shape + (2, 2))
        if self.eps.shape != self.grid.shape + (2, 2):
            raise ValueError(f"coefficient field has shape {self.eps.shape}")
        if self.rho.shape != self.grid.shape:
            raise ValueError(f"rhs has shape {self.rho.shape}, grid is {self.grid.shape}")
        if self.bc != DIRICHLET0:
            raise ValueError("the anisotropic solve supports dirichlet0 only")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.eps_perp is None:
            self.eps_perp = float(np.linalg.eigvalsh(self.eps)[..., 0].min())
        if not self.eps_perp > 0:
            raise ValueError("coefficient field is not positive definite")


def solve_aniso_dirichlet(p: EllipticProblem, *, return_info=False, x0=None):
    """Solve −div(ε∇Φ) = ρ, Φ = 0 on the boundary, by PCG with an isotropic direct preconditioner."""
    g = p.grid
    lu = _dirichlet_lu(g)
    shape = g.shape
    inv_eps = 1.0 / p.eps_perp

    def apply(x):
        return aniso_apply(g, p.eps, x.reshape(shape)).ravel()

    def precond(r):
        return inv_eps * lu.solve(r)

    phi, info = pcg(apply, p.rho.ravel(), precond, tol=p.tol, max_iter=p.max_iter,
                    x0=None if x0 is None else np.asarray(x0).ravel(), what="anisotropic Poisson")
    phi = phi.reshape(shape)
    return (phi, info) if return_info else phi


def _zero_mean(x):
    return x - np.mean(x)


def solve_pressure_neumann(g: Grid, rhs, tol=1e-10, max_iter=100, *, return_info=False):
    """Solve Δπ = rhs with homogeneous Neumann data; the result has zero mean."""
    rhs = _zero_mean(np.asarray(rhs, dtype=float).ravel())
    A = -laplacian_matrix(g, NEUMANN0)
    lu = _neumann_lu(g)

    def precond(r):
        return lu.solve(r)

    pi, info = pcg(lambda x: A @ x, -rhs, precond, tol=tol, max_iter=max_iter,
                   project=_zero_mean, what="pressure Poisson")
    pi = _zero_mean(pi).reshape(g.shape)
    return (pi, info) if return_info else pi


def efield(g: Grid, phi):
    """Cell-centred ∇Φ, shape (nx, ny, 2)."""
    gx, gy = cell_gradient(g, phi)
    return np.stack([gx, gy], axis=-1)
