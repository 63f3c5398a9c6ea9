"""Equilibria: Boltzmann ions, Poisson-Boltzmann potential, relaxed director, reconstructed pressure."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .director import director_gradient, director_rhs, grad_sq, renormalize, vector_laplacian
from .errors import SolverError
from .grid import NEUMANN0, Grid, cell_gradient, grad_cc
from .material import MaterialParams, Permittivity, epsilon_tensor, matvec, project
from .nernst_planck import chemical_potential
from .poisson import _dirichlet_lu, aniso_apply, dot, pcg, torque_tensor
from .presets import director_from_angle


@dataclass
class EquilibriumSolution:
    phi: np.ndarray
    d: np.ndarray
    Z: np.ndarray
    z: np.ndarray
    pi: np.ndarray = None
    residuals: dict = field(default_factory=dict)
    iterations: int = 0

    @property
    def c(self):
        return boltzmann(self.Z, self.z, self.phi)


def boltzmann(Z, z, phi):
    """c_k = Z_k exp(−z_k Φ), shape (N, nx, ny)."""
    Z = np.asarray(Z, dtype=float)
    z = np.asarray(z, dtype=float)
    return Z[:, None, None] * np.exp(-z[:, None, None] * phi[None])


def fit_prefactors(g: Grid, c, z, phi):
    """Z_k = ∫c_k / ∫exp(−z_k Φ) (mass normalisation)."""
    return np.array([g.integrate(c[k]) / g.integrate(np.exp(-z[k] * phi)) for k in range(len(z))])


@dataclass
class NewtonInfo:
    iterations: int
    residual: float
    history: list


def solve_poisson_boltzmann(g: Grid, z, d, perm: Permittivity, *, Z=None, masses=None, tol=1e-10,
                            max_iter=60, background=None, phi0=None, return_info=False):
    """Damped Newton for −div(ε(d)∇Φ) = Σ z_k c_k(Φ) + ρ₀, Φ = 0 on the boundary.

    With ``Z`` the prefactors are fixed; otherwise c_k = m_k e^{−z_kΦ}/∫e^{−z_kΦ}
    keeps the species masses ``masses`` (canonical form, exact Jacobian).
    Returns (Φ, Z) or (Φ, Z, info).
    """
    z = np.asarray(z, dtype=float)
    canonical = Z is None
    if canonical:
        if masses is None:
            raise ValueError("either Z or masses is required")
        masses = np.asarray(masses, dtype=float)
    else:
        Z = np.asarray(Z, dtype=float)
        if np.any(~(Z > 0)):
            raise ValueError("Boltzmann prefactors must be positive")
    eps = epsilon_tensor(d, perm)
    rho0 = np.zeros(g.shape) if background is None else np.asarray(background, dtype=float)
    phi = np.zeros(g.shape) if phi0 is None else np.array(phi0, dtype=float)
    lu = _dirichlet_lu(g)
    area = g.cell_area

    def conc(ph):
        if canonical:
            e = np.exp(-z[:, None, None] * ph[None])
            Zk = masses / (np.sum(e, axis=(1, 2)) * area)
            return Zk[:, None, None] * e, Zk
        return boltzmann(Z, z, ph), Z

    def residual(ph):
        c, _ = conc(ph)
        return aniso_apply(g, eps, ph) - np.tensordot(z, c, axes=1) - rho0

    c_init, _ = conc(np.zeros(g.shape))
    scale = np.sqrt(dot(np.tensordot(np.abs(z), c_init, axes=1), np.tensordot(np.abs(z), c_init, axes=1)))
    scale += np.sqrt(dot(rho0, rho0))
    scale = max(scale, 1e-300)

    inv = 1.0 / perm.eps_perp
    F = residual(phi)
    fn = np.sqrt(dot(F, F))
    hist = [fn]
    it = 0
    while fn > tol * scale:
        if it >= max_iter:
            raise SolverError("Poisson-Boltzmann Newton did not converge", fn / scale, it)
        it += 1
        c, _ = conc(phi)
        diag = np.tensordot(z**2, c, axes=1).ravel()
        cols = [c[k].ravel() for k in range(len(z))]

        def jac(x, diag=diag, cols=cols):
            y = aniso_apply(g, eps, x.reshape(g.shape)).ravel() + diag * x
            if canonical:
                for k in range(len(z)):
                    y -= (z[k] ** 2 / masses[k]) * area * dot(cols[k], x) * cols[k]
            return y

        def precond(r):
            return inv * lu.solve(r)

        delta, _ = pcg(jac, -F.ravel(), precond, tol=1e-12, max_iter=1000, what="Newton inner solve")
        delta = delta.reshape(g.shape)
        lam = 1.0
        while True:
            trial = phi + lam * delta
            Ft = residual(trial)
            ft = np.sqrt(dot(Ft, Ft))
            if ft <= (1.0 - 1e-4 * lam) * fn or lam < 1e-8:
                break
            lam *= 0.5
        if not ft < fn:
            if fn <= 10 * tol * scale:
                break
            raise SolverError("Poisson-Boltzmann line search stalled", fn / scale, it)
        phi, F, fn = trial, Ft, ft
        hist.append(fn)
    _, Zk = conc(phi)
    info = NewtonInfo(it, fn / scale, hist)
    return (phi, Zk, info) if return_info else (phi, Zk)


def director_bracket(g: Grid, d, phi, eps_a):
    """Δd + |∇d|²d + ε_a P(d)Md: zero exactly at a discrete director equilibrium."""
    out = vector_laplacian(g, d) + grad_sq(g, d)[..., None] * d
    if eps_a != 0.0 and phi is not None:
        out = out + eps_a * project(d, matvec(torque_tensor(g, phi), d))
    return out


def _angle_energy(g: Grid, th, M, eps_a):
    ex = np.sum(1.0 - np.cos(th[1:] - th[:-1])) / g.hx**2
    ey = np.sum(1.0 - np.cos(th[:, 1:] - th[:, :-1])) / g.hy**2
    el = 0.0
    if M is not None:
        c, s = np.cos(th), np.sin(th)
        el = 0.5 * eps_a * np.sum(M[..., 0, 0] * c * c + 2 * M[..., 0, 1] * c * s + M[..., 1, 1] * s * s)
    return float(ex + ey - el)


def _angle_residual(g: Grid, th, M, eps_a):
    """R = −∂G/∂θ: Σ sin(θ_j − θ_i)/h² + ε_a[½(M22 − M11) sin 2θ + M12 cos 2θ]."""
    R = np.zeros(g.shape)
    sx = np.sin(th[1:] - th[:-1]) / g.hx**2
    sy = np.sin(th[:, 1:] - th[:, :-1]) / g.hy**2
    R[:-1] += sx
    R[1:] -= sx
    R[:, :-1] += sy
    R[:, 1:] -= sy
    if M is not None:
        R += eps_a * (0.5 * (M[..., 1, 1] - M[..., 0, 0]) * np.sin(2 * th) + M[..., 0, 1] * np.cos(2 * th))
    return R


def _angle_hessian(g: Grid, th, M, eps_a):
    """Hessian of G (sparse, symmetric)."""
    n = g.nx * g.ny
    idx = np.arange(n).reshape(g.shape)
    rows, cols, vals = [], [], []
    diag = np.zeros(g.shape)
    for a, b, w in (
        (idx[:-1], idx[1:], np.cos(th[1:] - th[:-1]) / g.hx**2),
        (idx[:, :-1], idx[:, 1:], np.cos(th[:, 1:] - th[:, :-1]) / g.hy**2),
    ):
        rows += [a.ravel(), b.ravel()]
        cols += [b.ravel(), a.ravel()]
        vals += [-w.ravel(), -w.ravel()]
        np.add.at(diag, np.unravel_index(a.ravel(), g.shape), w.ravel())
        np.add.at(diag, np.unravel_index(b.ravel(), g.shape), w.ravel())
    if M is not None:
        diag -= eps_a * ((M[..., 1, 1] - M[..., 0, 0]) * np.cos(2 * th) - 2 * M[..., 0, 1] * np.sin(2 * th))
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    H = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return H, float(np.max(np.abs(diag)))


def equilibrium_director(g: Grid, phi, d0, eps_a, *, tol=1e-10, method="newton", max_iter=200,
                         return_info=False):
    """Relax d at fixed Φ until ‖Δd + |∇d|²d + ε_a P(d)Md‖∞ ≤ tol; the result is unit length."""
    d = renormalize(np.asarray(d0, dtype=float))
    M = torque_tensor(g, phi) if (eps_a != 0.0 and phi is not None) else None
    hist = []
    if method == "flow":
        tau = 0.2 * min(g.hx, g.hy) ** 2
        for it in range(max_iter + 1):
            b = director_bracket(g, d, phi, eps_a)
            r = float(np.max(np.abs(b)))
            hist.append(r)
            if r <= tol:
                info = NewtonInfo(it, r, hist)
                return (d, info) if return_info else d
            d = renormalize(d + tau * b)
        raise SolverError("director relaxation stagnated", hist[-1], max_iter)
    if method != "newton":
        raise ValueError(f"unknown method {method!r}")
    th, info = relax_angles(g, np.arctan2(d[..., 1], d[..., 0]), M, eps_a, tol=tol, max_iter=max_iter)
    d = director_from_angle(th)
    return (d, info) if return_info else d


def roundoff_floor(g: Grid) -> float:
    return 256.0 * np.finfo(float).eps * (2.0 / g.hx**2 + 2.0 / g.hy**2)


def relax_angles(g: Grid, th, M, eps_a, *, tol=1e-10, max_iter=200):
    """Newton iteration on the director angle field; returns (θ, info) with θ kept continuous."""
    th = np.array(th, dtype=float)
    hist = []
    lam = None
    # roundoff floor of the residual: the stencil weights are O(1/h²)
    tol = max(tol, roundoff_floor(g))
    for it in range(max_iter + 1):
        R = _angle_residual(g, th, M, eps_a)
        r = float(np.max(np.abs(R)))
        hist.append(r)
        if r <= tol:
            return th, NewtonInfo(it, r, hist)
        H, dmax = _angle_hessian(g, th, M, eps_a)
        floor = 1e-12 * dmax
        lam = floor if lam is None else max(lam, floor)
        G0 = _angle_energy(g, th, M, eps_a)
        rn = np.sqrt(dot(R, R))
        accepted = False
        # Levenberg-Marquardt shift: kept between iterations, shrunk on success
        for _ in range(40):
            delta = spla.spsolve(H + lam * sp.identity(H.shape[0], format="csc"), R.ravel()).reshape(g.shape)
            slope = dot(R, delta)
            if np.all(np.isfinite(delta)) and slope > 0:
                trial = th + delta
                Rt = _angle_residual(g, trial, M, eps_a)
                if (_angle_energy(g, trial, M, eps_a) <= G0 - 1e-4 * slope
                        or np.sqrt(dot(Rt, Rt)) < 0.5 * rn):
                    accepted = True
                    th = trial
                    break
            lam = max(10.0 * lam, 1e-6 * dmax)
        if not accepted:
            raise SolverError("director Newton could not find a descent step", r, it)
        lam = 0.1 * lam
    raise SolverError("director Newton did not converge", hist[-1], max_iter)


def solve_equilibrium(g: Grid, material: MaterialParams, d0, *, masses=None, Z=None, tol=1e-10, relax=0.5,
                      max_outer=300, director_method="newton", background=None,
                      min_relax=1.0 / 64) -> EquilibriumSolution:
    """Alternate Poisson-Boltzmann and director solves (under-relaxed) until both residuals ≤ tol."""
    z = material.valences
    perm = material.permittivity
    eps_a = perm.eps_a
    if masses is None and Z is None:
        masses = np.array([s.mass for s in material.species])
    d = renormalize(np.asarray(d0, dtype=float))
    th = np.arctan2(d[..., 1], d[..., 0])
    phi = None
    prev = np.inf
    for it in range(1, max_outer + 1):
        if len(z):
            phi, Zk = solve_poisson_boltzmann(g, z, d, perm, Z=Z, masses=masses, tol=tol, phi0=phi,
                                              background=background)
        else:
            phi, Zk = np.zeros(g.shape), np.zeros(0)
        rd = float(np.max(np.abs(director_bracket(g, d, phi, eps_a))))
        if rd <= max(tol, roundoff_floor(g)):
            break
        if rd > prev:
            relax = max(0.5 * relax, min_relax)
        prev = rd

        if director_method == "newton":
            M = torque_tensor(g, phi) if eps_a != 0.0 else None
            th_star, _ = relax_angles(g, th, M, eps_a, tol=tol)
        else:
            d_star = equilibrium_director(g, phi, d, eps_a, tol=tol, method=director_method)
            th_star = th + 0.5 * np.angle(np.exp(2j * (np.arctan2(d_star[..., 1], d_star[..., 0]) - th)))
        th = th + relax * (th_star - th)
        d = director_from_angle(th)
    else:
        raise SolverError("coupled equilibrium iteration did not converge", rd, max_outer)
    sol = EquilibriumSolution(phi, d, np.asarray(Zk), z, iterations=it)
    sol.pi = reconstruct_pressure(g, sol, perm)
    sol.residuals = {
        "poisson_boltzmann": pb_residual(g, sol, perm, background),
        "director": rd,
    }
    return sol


def pb_residual(g: Grid, sol: EquilibriumSolution, perm: Permittivity, background=None) -> float:
    r = aniso_apply(g, epsilon_tensor(sol.d, perm), sol.phi) - np.tensordot(sol.z, sol.c, axes=1)
    if background is not None:
        r = r - background
    return float(np.max(np.abs(r)))


def reconstruct_pressure(g: Grid, sol: EquilibriumSolution, perm: Permittivity):
    """π = Σc_k + ½(ε⊥|∇Φ|² + ε_a(∇Φ⊗∇Φ)d·d − |∇d|²), shifted to zero mean.

    Uses the same cellwise ∇Φ⊗∇Φ as the electric stress in the body force.
    """
    M = torque_tensor(g, sol.phi)
    dx, dy = cell_gradient(g, sol.d)
    gd2 = np.sum(dx * dx + dy * dy, axis=-1)
    Mdd = np.einsum("...i,...ij,...j->...", sol.d, M, sol.d)
    c = sol.c
    pi = (np.sum(c, axis=0) if len(c) else 0.0) + 0.5 * (perm.eps_perp * (M[..., 0, 0] + M[..., 1, 1])
                                                        + perm.eps_a * Mdd - gd2)
    return pi - np.mean(pi)


def equilibrium_residual(g: Grid, state, material: MaterialParams, bc="noslip") -> dict:
    """Max-norm residuals of v = 0, ∇μ_k = 0, d̊ = 0 and the director equation."""
    u, v = state.flow.u, state.flow.v
    vres = max(float(np.max(np.abs(u))), float(np.max(np.abs(v))))
    gm = 0.0
    for k, s in enumerate(material.species):
        mu = chemical_potential(state.ion.c[k], state.phi, s.z)
        gx, gy = grad_cc(g, mu, NEUMANN0)
        gm = max(gm, float(np.max(np.abs(gx))), float(np.max(np.abs(gy))))
    rates = director_rhs(g, state.d, state.phi, u, v, material, bc)
    dr = float(np.max(np.sqrt(np.sum(rates.d_ring**2, axis=-1))))
    br = director_bracket(g, state.d, state.phi, material.permittivity.eps_a)
    return {"velocity": vres, "grad_mu": gm, "d_ring": dr, "director": float(np.max(np.abs(br)))}


def momentum_residual(g: Grid, sol: EquilibriumSolution, material: MaterialParams):
    """L² norm over interior faces of ∇_h π_rec − body_force at an equilibrium (v = 0, d̊ = 0)."""
    from .flow import body_force

    Dv = np.zeros(g.shape + (2, 2))
    f_x, f_y = body_force(g, sol.d, sol.phi, Dv, np.zeros_like(sol.d), material)
    px, py = grad_cc(g, sol.pi, NEUMANN0)
    ex = (px - f_x)[1:-1]
    ey = (py - f_y)[:, 1:-1]
    return float(np.sqrt((np.sum(ex * ex) + np.sum(ey * ey)) * g.cell_area))


def perturbed_equilibrium(g: Grid, material: MaterialParams, d0, amp, *, tol=1e-10):
    """Equilibrium from ``d0`` with concentrations multiplied by 1 + amp·sin(πx/Lx)."""
    sol = solve_equilibrium(g, material, d0, tol=tol)
    X, _ = g.cell_coords()
    c = sol.c * (1.0 + amp * np.sin(np.pi * X / g.Lx))[None]
    return c, sol.d, sol


__all__ = [
    "EquilibriumSolution",
    "boltzmann",
    "director_bracket",
    "director_gradient",
    "equilibrium_director",
    "equilibrium_residual",
    "fit_prefactors",
    "momentum_residual",
    "perturbed_equilibrium",
    "reconstruct_pressure",
    "solve_equilibrium",
    "solve_poisson_boltzmann",
]
