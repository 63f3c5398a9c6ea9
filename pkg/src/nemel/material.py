"""Constitutive constants and pointwise constitutive tensors.

All tensor helpers broadcast over leading axes, so a director field of shape
``(nx, ny, 2)`` yields matrices of shape ``(nx, ny, 2, 2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LeslieCoefficients:
    """Leslie viscosities alpha1..alpha6; gamma1, gamma2, beta, mu0 are derived."""

    alpha1: float
    alpha2: float
    alpha3: float
    alpha4: float
    alpha5: float
    alpha6: float

    @property
    def gamma1(self) -> float:
        return self.alpha3 - self.alpha2

    @property
    def gamma2(self) -> float:
        return self.alpha6 - self.alpha5

    @property
    def beta(self) -> float:
        return self.alpha5 + self.alpha6

    @property
    def mu0(self) -> float:
        return self.alpha1 + self.alpha5 + self.alpha6

    @property
    def coupling(self) -> float:
        """gamma2 + alpha2 + alpha3, the cross coefficient of the rotational dissipation."""
        return self.gamma2 + self.alpha2 + self.alpha3

    @classmethod
    def from_sequence(cls, alphas) -> LeslieCoefficients:
        a = [float(x) for x in alphas]
        if len(a) != 6:
            raise ValueError(f"expected 6 Leslie coefficients, got {len(a)}")
        return cls(*a)

    def as_tuple(self) -> tuple[float, ...]:
        return (self.alpha1, self.alpha2, self.alpha3, self.alpha4, self.alpha5, self.alpha6)


@dataclass(frozen=True)
class Permittivity:
    eps_perp: float
    eps_a: float = 0.0

    def __post_init__(self):
        if not self.eps_perp > 0:
            raise ValueError(f"eps_perp must be > 0, got {self.eps_perp}")
        if not self.eps_a >= 0:
            raise ValueError(f"eps_a must be >= 0, got {self.eps_a}")

    @property
    def eps_parallel(self) -> float:
        return self.eps_perp + self.eps_a


@dataclass(frozen=True)
class IonSpecies:
    """One ion species: valence, 2x2 SPD diffusion matrix and total mass."""

    z: float
    D: np.ndarray
    mass: float = 1.0

    def __post_init__(self):
        D = np.asarray(self.D, dtype=float)
        if D.ndim == 0:
            D = float(D) * np.eye(2)
        if D.shape != (2, 2):
            raise ValueError(f"diffusion matrix must be 2x2, got shape {D.shape}")
        if not np.allclose(D, D.T, rtol=0, atol=1e-14 * max(1.0, np.abs(D).max())):
            raise ValueError("diffusion matrix must be symmetric")
        if np.linalg.eigvalsh(D)[0] <= 0:
            raise ValueError("diffusion matrix must be positive definite")
        D.setflags(write=False)
        object.__setattr__(self, "D", D)

    @property
    def alpha_min(self) -> float:
        return float(np.linalg.eigvalsh(self.D)[0])

    @property
    def alpha_max(self) -> float:
        return float(np.linalg.eigvalsh(self.D)[-1])

    @property
    def is_diagonal(self) -> bool:
        return self.D[0, 1] == 0.0


@dataclass(frozen=True)
class MaterialParams:
    leslie: LeslieCoefficients
    permittivity: Permittivity
    species: tuple[IonSpecies, ...] = field(default_factory=tuple)

    @property
    def valences(self) -> np.ndarray:
        return np.array([s.z for s in self.species], dtype=float)

    @property
    def alpha(self) -> float:
        """Uniform lower bound of all diffusion matrices."""
        if not self.species:
            return float("nan")
        return min(s.alpha_min for s in self.species)


@dataclass(frozen=True)
class ValidityReport:
    satisfies_positivity: bool
    parodi_holds: bool
    delta: float
    hp_params: dict
    violations: tuple[str, ...]
    discriminant: float
    parodi_discriminant: float
    weak_conditions: bool

    def summary_lines(self) -> list[str]:
        lines = [
            f"positivity conditions: {'satisfied' if self.satisfies_positivity else 'VIOLATED'}",
            f"4*beta*gamma1 - (gamma2+alpha2+alpha3)^2 = {self.discriminant:.17g}",
            f"Parodi relation gamma2 = alpha2+alpha3: {'holds' if self.parodi_holds else 'does not hold'}",
        ]
        if self.parodi_holds:
            lines.append(f"beta*gamma1 - gamma2^2 = {self.parodi_discriminant:.17g}")
        lines.append(f"coercivity constant delta = {self.delta:.17g}")
        lines.append(
            "weak conditions (alpha1+beta >= 0, discriminant >= 0): "
            + ("hold" if self.weak_conditions else "do not hold")
        )
        for k, v in self.hp_params.items():
            lines.append(f"{k} = {v:.17g}")
        for v in self.violations:
            lines.append(f"violated: {v}")
        return lines


def validate_leslie(c: LeslieCoefficients, tol: float = 1e-12) -> ValidityReport:
    """Check the strict positivity conditions and translate to (mu_s, ..., mu_P)."""
    vals = c.as_tuple()
    if not all(np.isfinite(vals)):
        raise ValueError("Leslie coefficients must be finite")
    g1, g2, beta = c.gamma1, c.gamma2, c.beta
    s = c.alpha2 + c.alpha3
    disc = 4.0 * beta * g1 - (g2 + s) ** 2

    violations = []
    if not g1 > 0:
        violations.append("γ1 > 0")
    if not c.alpha4 > 0:
        violations.append("α4 > 0")
    if not c.alpha1 >= 0:
        violations.append("α1 ≥ 0")
    if not disc > 0:
        violations.append("4βγ1 − (γ2+α2+α3)² > 0")

    delta = g1 - (g2 + s) ** 2 / (4.0 * beta) if beta > 0 else float("nan")
    mu_p = 0.5 * (g2 - s)
    hp = {
        "mu_s": c.alpha4,
        "mu_0": c.mu0,
        "mu_V": g1,
        "mu_D": -g2,
        "mu_L": (beta * g1 - 0.25 * (g2 + s) ** 2) / g1 if g1 != 0 else float("nan"),
        "mu_P": mu_p,
    }
    return ValidityReport(
        satisfies_positivity=not violations,
        parodi_holds=abs(g2 - s) <= tol,
        delta=delta,
        hp_params=hp,
        violations=tuple(violations),
        discriminant=disc,
        parodi_discriminant=beta * g1 - g2**2,
        weak_conditions=(c.alpha1 + beta >= 0) and disc >= 0,
    )


def outer(a, b):
    return a[..., :, None] * b[..., None, :]


def matvec(A, x):
    return np.einsum("...ij,...j->...i", A, x)


def epsilon_tensor(d, p: Permittivity):
    """eps_perp I + eps_a d⊗d."""
    d = np.asarray(d, dtype=float)
    return p.eps_perp * np.eye(2) + p.eps_a * outer(d, d)


def projector(d):
    """I − d⊗d (an orthogonal projector only when |d| = 1)."""
    d = np.asarray(d, dtype=float)
    return np.eye(2) - outer(d, d)


def project(d, x):
    """P(d)x without forming the matrix."""
    return x - d * np.sum(d * x, axis=-1, keepdims=True)


def _check_unit(d, tol=1e-8):
    dev = np.abs(np.linalg.norm(d, axis=-1) - 1.0)
    if dev.size and dev.max() > tol:
        raise ValueError(f"director must be unit length within {tol}, max deviation {dev.max():.3e}")


def _check_symmetric(Dv):
    asym = np.abs(Dv - np.swapaxes(Dv, -1, -2))
    scale = max(1.0, float(np.abs(Dv).max()) if Dv.size else 1.0)
    if asym.size and asym.max() > 1e-12 * scale:
        raise ValueError("strain-rate tensor must be symmetric")


def leslie_stress(c: LeslieCoefficients, Dv, d, d_ring, *, check=True, include_newtonian=True):
    """Leslie stress in the projected form with mu0 = alpha1 + alpha5 + alpha6.

    With ``include_newtonian=False`` the alpha4 D(v) part is left out; the flow
    solver advances that part implicitly.
    """
    Dv = np.asarray(Dv, dtype=float)
    d = np.asarray(d, dtype=float)
    d_ring = np.asarray(d_ring, dtype=float)
    if check:
        _check_unit(d)
        _check_symmetric(Dv)
    Dd = matvec(Dv, d)
    dDd = np.sum(d * Dd, axis=-1)[..., None, None]
    Pr = project(d, d_ring)
    PDd = project(d, Dd)
    sigma = (
        c.mu0 * dDd * outer(d, d)
        + c.alpha2 * outer(Pr, d)
        + c.alpha3 * outer(d, Pr)
        + c.alpha5 * outer(PDd, d)
        + c.alpha6 * outer(d, PDd)
    )
    if include_newtonian:
        sigma = sigma + c.alpha4 * Dv
    return sigma


def leslie_stress_classical(c: LeslieCoefficients, Dv, d, d_ring):
    """Leslie stress in its original (unprojected) form."""
    Dd = matvec(Dv, d)
    dDd = np.sum(d * Dd, axis=-1)[..., None, None]
    return (
        c.alpha1 * dDd * outer(d, d)
        + c.alpha2 * outer(d_ring, d)
        + c.alpha3 * outer(d, d_ring)
        + c.alpha4 * Dv
        + c.alpha5 * outer(Dd, d)
        + c.alpha6 * outer(d, Dd)
    )


def dissipation_quadratic_form(c: LeslieCoefficients, d, Dv, a, *, check=True):
    """alpha1 (d·Dd)² + (gamma2+alpha2+alpha3)(a·Dd) + beta |Dd|² + gamma1 |a|²."""
    d = np.asarray(d, dtype=float)
    if check:
        _check_unit(d)
    Dd = matvec(np.asarray(Dv, dtype=float), d)
    a = np.asarray(a, dtype=float)
    return (
        c.alpha1 * np.sum(d * Dd, axis=-1) ** 2
        + c.coupling * np.sum(a * Dd, axis=-1)
        + c.beta * np.sum(Dd * Dd, axis=-1)
        + c.gamma1 * np.sum(a * a, axis=-1)
    )
