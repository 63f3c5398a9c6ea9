"""Uniform MAC grid on the rectangle (0, Lx) x (0, Ly) and its stencil operators.

Layout: cell fields have shape ``(nx, ny)`` and are indexed ``[i, j]`` with i
along x. x-face fields have shape ``(nx + 1, ny)``, y-face fields
``(nx, ny + 1)``, node fields ``(nx + 1, ny + 1)``. Velocity components live on
their normal faces.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

DIRICHLET0 = "dirichlet0"
NEUMANN0 = "neumann0"
NOFLUX = "noflux"

# tangential-velocity wall treatments; "open" extrapolates linearly and is
# only used to sample analytic fields that do not vanish at the walls
NOSLIP = "noslip"
FREESLIP = "freeslip"
OPEN = "open"

_GHOST = {
    DIRICHLET0: (-1.0, 0.0),
    NOSLIP: (-1.0, 0.0),
    NEUMANN0: (1.0, 0.0),
    NOFLUX: (1.0, 0.0),
    FREESLIP: (1.0, 0.0),
    OPEN: (2.0, -1.0),
}


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float = 1.0

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs at least 4x4 cells, got {self.nx}x{self.ny}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError("domain lengths must be positive")

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def xc(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    @property
    def yc(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    @property
    def xf(self) -> np.ndarray:
        return np.arange(self.nx + 1) * self.hx

    @property
    def yf(self) -> np.ndarray:
        return np.arange(self.ny + 1) * self.hy

    def cell_coords(self):
        return np.meshgrid(self.xc, self.yc, indexing="ij")

    def xface_coords(self):
        return np.meshgrid(self.xf, self.yc, indexing="ij")

    def yface_coords(self):
        return np.meshgrid(self.xc, self.yf, indexing="ij")

    def node_coords(self):
        return np.meshgrid(self.xf, self.yf, indexing="ij")

    def integrate(self, f) -> float:
        """Midpoint rule over cells."""
        return float(np.sum(f) * self.cell_area)

    def zeros(self):
        return np.zeros(self.shape)


def _ghost(bc):
    try:
        return _GHOST[bc]
    except KeyError:
        raise ValueError(f"unknown boundary kind {bc!r}") from None


# ---------------------------------------------------------------------------
# cell <-> face stencils
# ---------------------------------------------------------------------------

def grad_cc(g: Grid, f, bc=NEUMANN0):
    """Face-normal gradients of a cell field.

    Boundary faces: zero for neumann0/noflux, ghost reflection for dirichlet0.
    """
    f = np.asarray(f, dtype=float)
    Fx = np.zeros((g.nx + 1, g.ny))
    Fy = np.zeros((g.nx, g.ny + 1))
    Fx[1:-1] = (f[1:] - f[:-1]) / g.hx
    Fy[:, 1:-1] = (f[:, 1:] - f[:, :-1]) / g.hy
    if bc == DIRICHLET0:
        Fx[0] = 2.0 * f[0] / g.hx
        Fx[-1] = -2.0 * f[-1] / g.hx
        Fy[:, 0] = 2.0 * f[:, 0] / g.hy
        Fy[:, -1] = -2.0 * f[:, -1] / g.hy
    elif bc not in (NEUMANN0, NOFLUX):
        raise ValueError(f"unknown boundary kind {bc!r}")
    return Fx, Fy


def div_fc(g: Grid, Fx, Fy):
    return (Fx[1:] - Fx[:-1]) / g.hx + (Fy[:, 1:] - Fy[:, :-1]) / g.hy


def laplacian_cc(g: Grid, f, bc=NEUMANN0):
    return div_fc(g, *grad_cc(g, f, bc))


def _lap1d(n, h, bc):
    a, _ = _ghost(bc)
    main = -2.0 * np.ones(n)
    main[0] += a
    main[-1] += a
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / h**2


@lru_cache(maxsize=32)
def laplacian_matrix(g: Grid, bc=NEUMANN0):
    """Sparse 5-point Laplacian on flattened (C-order) cell fields."""
    Lx = _lap1d(g.nx, g.hx, bc)
    Ly = _lap1d(g.ny, g.hy, bc)
    return (sp.kron(Lx, sp.identity(g.ny)) + sp.kron(sp.identity(g.nx), Ly)).tocsc()


def cell_to_xface(f):
    """Average a cell field to interior x-faces; boundary faces get the adjacent cell value."""
    out = np.empty((f.shape[0] + 1,) + f.shape[1:])
    out[1:-1] = 0.5 * (f[1:] + f[:-1])
    out[0] = f[0]
    out[-1] = f[-1]
    return out


def cell_to_yface(f):
    out = np.empty((f.shape[0], f.shape[1] + 1) + f.shape[2:])
    out[:, 1:-1] = 0.5 * (f[:, 1:] + f[:, :-1])
    out[:, 0] = f[:, 0]
    out[:, -1] = f[:, -1]
    return out


def xface_to_cell(Fx):
    return 0.5 * (Fx[1:] + Fx[:-1])


def yface_to_cell(Fy):
    return 0.5 * (Fy[:, 1:] + Fy[:, :-1])


def _deriv_axis(f, h, axis):
    """Centered difference along an axis; one-sided four-point formula at the ends.

    The end formula is the centred difference with a cubically extrapolated
    ghost, so its leading error term h²f'''/6 continues the interior one
    smoothly and difference quotients of the result stay second order.
    """
    f = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    out[0] = (-4.0 * f[0] + 7.0 * f[1] - 4.0 * f[2] + f[3]) / (2.0 * h)
    out[-1] = (4.0 * f[-1] - 7.0 * f[-2] + 4.0 * f[-3] - f[-4]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def cell_gradient(g: Grid, f):
    """Cell-centred gradient, second order everywhere (one-sided in boundary cells).

    Works for trailing component axes: a field of shape (nx, ny, ...) returns
    a pair of arrays of the same shape.
    """
    return _deriv_axis(f, g.hx, 0), _deriv_axis(f, g.hy, 1)


def vector_gradient(g: Grid, d):
    """[∇d]_{mj} = ∂_j d_m at cell centres for d of shape (nx, ny, 2)."""
    dx, dy = cell_gradient(g, d)
    return np.stack([dx, dy], axis=-1)


def mirror_gradient(g: Grid, f):
    """Centred cell gradient with mirrored (zero-normal-derivative) ghosts."""
    f = np.asarray(f, dtype=float)
    gx = np.empty_like(f)
    gy = np.empty_like(f)
    gx[1:-1] = (f[2:] - f[:-2]) / (2 * g.hx)
    gx[0] = (f[1] - f[0]) / (2 * g.hx)
    gx[-1] = (f[-1] - f[-2]) / (2 * g.hx)
    gy[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2 * g.hy)
    gy[:, 0] = (f[:, 1] - f[:, 0]) / (2 * g.hy)
    gy[:, -1] = (f[:, -1] - f[:, -2]) / (2 * g.hy)
    return gx, gy


def mirror_gradient_adjoint(g: Grid, ax, ay):
    """Transpose of :func:`mirror_gradient` (sum of the two component maps)."""
    out = np.zeros_like(ax, dtype=float)
    cx = 1.0 / (2 * g.hx)
    cy = 1.0 / (2 * g.hy)
    # x part
    out[2:] += cx * ax[1:-1]
    out[:-2] -= cx * ax[1:-1]
    out[1] += cx * ax[0]
    out[0] -= cx * ax[0]
    out[-1] += cx * ax[-1]
    out[-2] -= cx * ax[-1]
    # y part
    out[:, 2:] += cy * ay[:, 1:-1]
    out[:, :-2] -= cy * ay[:, 1:-1]
    out[:, 1] += cy * ay[:, 0]
    out[:, 0] -= cy * ay[:, 0]
    out[:, -1] += cy * ay[:, -1]
    out[:, -2] -= cy * ay[:, -1]
    return out


# ---------------------------------------------------------------------------
# velocity operators (sparse, cached per grid and wall treatment)
# ---------------------------------------------------------------------------

def _diff_c(n, h):
    """(n, n+1): face values -> cell differences."""
    return sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1), format="csr") / h


def _avg_c(n):
    return sp.diags([0.5 * np.ones(n), 0.5 * np.ones(n)], [0, 1], shape=(n, n + 1), format="csr")


def _centered_ghost(n, h, bc):
    a, b = _ghost(bc)
    M = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1], format="lil")
    # row 0: x1 - ghost(x0, x1); row n-1: ghost(x_{n-1}, x_{n-2}) - x_{n-2}
    M[0, 0] -= a
    M[0, 1] -= b
    M[n - 1, n - 1] += a
    M[n - 1, n - 2] += b
    return M.tocsr() / (2.0 * h)


def _node_diff(n, h, bc):
    """(n+1, n): cell values -> node differences with a ghost beyond each end."""
    a, b = _ghost(bc)
    M = sp.lil_matrix((n + 1, n))
    for k in range(1, n):
        M[k, k] = 1.0
        M[k, k - 1] = -1.0
    M[0, 0] = 1.0 - a
    M[0, 1] = -b
    M[n, n - 1] = a - 1.0
    M[n, n - 2] = b
    return M.tocsr() / h


def velocity_sizes(g: Grid):
    return (g.nx + 1) * g.ny, g.nx * (g.ny + 1)


def pack_velocity(u, v):
    return np.concatenate([u.ravel(), v.ravel()])


def unpack_velocity(g: Grid, x):
    nu, _ = velocity_sizes(g)
    return x[:nu].reshape(g.nx + 1, g.ny), x[nu:].reshape(g.nx, g.ny + 1)


@lru_cache(maxsize=32)
def interior_face_mask(g: Grid):
    u = np.ones((g.nx + 1, g.ny), dtype=bool)
    v = np.ones((g.nx, g.ny + 1), dtype=bool)
    u[0] = u[-1] = False
    v[:, 0] = v[:, -1] = False
    return pack_velocity(u, v)


@lru_cache(maxsize=32)
def velocity_gradient_operator(g: Grid, bc=NOSLIP):
    """Sparse map (u, v) -> cell values of (∂x u, ∂y u, ∂x v, ∂y v), stacked."""
    nx, ny = g.nx, g.ny
    Ix, Iy = sp.identity(nx), sp.identity(ny)
    dudx = sp.kron(_diff_c(nx, g.hx), Iy)
    dudy = sp.kron(_avg_c(nx), _centered_ghost(ny, g.hy, bc))
    dvdx = sp.kron(_centered_ghost(nx, g.hx, bc), _avg_c(ny))
    dvdy = sp.kron(Ix, _diff_c(ny, g.hy))
    Zu = sp.csr_matrix((nx * ny, (nx + 1) * ny))
    Zv = sp.csr_matrix((nx * ny, nx * (ny + 1)))
    return sp.bmat([[dudx, Zv], [dudy, Zv], [Zu, dvdx], [Zu, dvdy]], format="csr")


def velocity_gradient(g: Grid, u, v, bc=NOSLIP):
    """Cell-centred velocity gradient tensor, [∇v]_{ij} = ∂_j v_i, shape (nx, ny, 2, 2)."""
    G = velocity_gradient_operator(g, bc)
    comps = (G @ pack_velocity(u, v)).reshape(4, g.nx, g.ny)
    out = np.empty((g.nx, g.ny, 2, 2))
    out[..., 0, 0] = comps[0]
    out[..., 0, 1] = comps[1]
    out[..., 1, 0] = comps[2]
    out[..., 1, 1] = comps[3]
    return out


def velocity_gradient_adjoint(g: Grid, tau, bc=NOSLIP):
    """Transpose of :func:`velocity_gradient` applied to a cell tensor field."""
    G = velocity_gradient_operator(g, bc)
    comps = np.concatenate(
        [tau[..., 0, 0].ravel(), tau[..., 0, 1].ravel(), tau[..., 1, 0].ravel(), tau[..., 1, 1].ravel()]
    )
    return unpack_velocity(g, G.T @ comps)


def strain_and_vorticity(g: Grid, u, v, bc=NOSLIP):
    """Cell-centred D(v) and scalar vorticity W with Ω(v)d = W (−d2, d1)."""
    Gv = velocity_gradient(g, u, v, bc)
    Dv = 0.5 * (Gv + np.swapaxes(Gv, -1, -2))
    W = 0.5 * (Gv[..., 1, 0] - Gv[..., 0, 1])
    return Dv, W


@lru_cache(maxsize=32)
def compact_strain_operators(g: Grid, bc=NOSLIP):
    """Compact MAC strain: D_xx, D_yy at cells and D_xy at nodes, plus node weights."""
    nx, ny = g.nx, g.ny
    Zu = sp.csr_matrix((nx * ny, (nx + 1) * ny))
    Zv = sp.csr_matrix((nx * ny, nx * (ny + 1)))
    Sxx = sp.hstack([sp.kron(_diff_c(nx, g.hx), sp.identity(ny)), Zv], format="csr")
    Syy = sp.hstack([Zu, sp.kron(sp.identity(nx), _diff_c(ny, g.hy))], format="csr")
    dudy = sp.kron(sp.identity(nx + 1), _node_diff(ny, g.hy, bc))
    dvdx = sp.kron(_node_diff(nx, g.hx, bc), sp.identity(ny + 1))
    Sxy = 0.5 * sp.hstack([dudy, dvdx], format="csr")
    wx = np.ones(nx + 1)
    wx[[0, -1]] = 0.5
    wy = np.ones(ny + 1)
    wy[[0, -1]] = 0.5
    wn = np.outer(wx, wy).ravel()
    return Sxx, Syy, Sxy, wn


@lru_cache(maxsize=32)
def viscous_operator(g: Grid, bc=NOSLIP):
    """K with hx·hy·vᵀKv = ∫|D(v)|²; the viscous force on faces is −alpha4 K v."""
    Sxx, Syy, Sxy, wn = compact_strain_operators(g, bc)
    K = Sxx.T @ Sxx + Syy.T @ Syy + 2.0 * (Sxy.T @ sp.diags(wn) @ Sxy)
    return K.tocsr()


def strain_norm_sq(g: Grid, u, v, bc=NOSLIP) -> float:
    """∫|D(v)|² with the compact MAC strain."""
    Sxx, Syy, Sxy, wn = compact_strain_operators(g, bc)
    x = pack_velocity(u, v)
    a, b, c = Sxx @ x, Syy @ x, Sxy @ x
    return float((np.sum(a * a) + np.sum(b * b) + 2.0 * np.sum(wn * c * c)) * g.cell_area)


def velocity_divergence(g: Grid, u, v):
    return (u[1:] - u[:-1]) / g.hx + (v[:, 1:] - v[:, :-1]) / g.hy


def velocity_at_cells(u, v):
    return xface_to_cell(u), yface_to_cell(v)
