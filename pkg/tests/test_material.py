import numpy as np
import pytest
from conftest import SMOKE, random_symmetric, unit_vectors
from hypothesis import given, settings
from hypothesis import strategies as st

from nemel.material import (
    IonSpecies,
    LeslieCoefficients,
    Permittivity,
    dissipation_quadratic_form,
    epsilon_tensor,
    leslie_stress,
    leslie_stress_classical,
    projector,
    validate_leslie,
)

angles = st.floats(0.0, 2.0 * np.pi, allow_nan=False)
coef = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)


def test_parodi_example_by_hand():
    c = LeslieCoefficients(0.0, -0.5, 0.5, 1.0, 0.5, 0.5)
    assert (c.gamma1, c.gamma2, c.beta) == (1.0, 0.0, 1.0)
    rep = validate_leslie(c)
    assert rep.satisfies_positivity
    assert rep.parodi_holds
    assert rep.discriminant == 4.0
    assert rep.parodi_discriminant == 1.0
    assert any("beta*gamma1 - gamma2^2 = 1" in line for line in rep.summary_lines())


def test_all_zero_is_invalid():
    rep = validate_leslie(LeslieCoefficients(0, 0, 0, 0, 0, 0))
    assert not rep.satisfies_positivity
    assert "γ1 > 0" in rep.violations
    assert "α4 > 0" in rep.violations


def test_alpha4_zero_cites_condition():
    rep = validate_leslie(LeslieCoefficients(0.2, -0.6, 0.1, 0.0, 0.5, 0.3))
    assert rep.violations == ("α4 > 0",)


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        validate_leslie(LeslieCoefficients(np.nan, -0.6, 0.1, 1.0, 0.5, 0.3))


@settings(max_examples=300, deadline=None)
@given(a1=st.floats(-0.5, 2.0), a2=coef, a3=coef, a4=st.floats(-0.5, 2.0), a5=coef)
def test_parodi_reduction(a1, a2, a3, a4, a5):
    # choose alpha6 so that gamma2 = alpha2 + alpha3
    c = LeslieCoefficients(a1, a2, a3, a4, a5, a5 + a2 + a3)
    rep = validate_leslie(c)
    assert rep.parodi_holds
    g1, g2, beta = c.gamma1, c.gamma2, c.beta
    simplified = g1 > 0 and a4 > 0 and a1 >= 0 and beta * g1 - g2**2 > 0
    # the two discriminants differ by a factor 4 exactly when Parodi holds
    if abs(beta * g1 - g2**2) > 1e-12:
        assert rep.satisfies_positivity == simplified


def test_delta_closed_form():
    rep = validate_leslie(SMOKE)
    g1, beta, s = SMOKE.gamma1, SMOKE.beta, SMOKE.gamma2 + SMOKE.alpha2 + SMOKE.alpha3
    assert rep.delta == pytest.approx(g1 - s**2 / (4 * beta), rel=1e-15)
    assert rep.delta > 0


def test_epsilon_examples(rng):
    d = unit_vectors(rng, (10,))
    np.testing.assert_array_equal(epsilon_tensor(d, Permittivity(2.5, 0.0)), np.broadcast_to(2.5 * np.eye(2), (10, 2, 2)))
    np.testing.assert_array_equal(epsilon_tensor(np.array([1.0, 0.0]), Permittivity(1.0, 2.0)), [[3.0, 0.0], [0.0, 1.0]])


def test_epsilon_ellipticity(rng):
    p = Permittivity(0.7, 1.3)
    d = unit_vectors(rng, (10_000,))
    xi = unit_vectors(rng, (10_000,))
    q = np.einsum("ni,nij,nj->n", xi, epsilon_tensor(d, p), xi)
    assert q.min() >= p.eps_perp - 1e-14


def test_permittivity_validation():
    with pytest.raises(ValueError):
        Permittivity(0.0)
    with pytest.raises(ValueError):
        Permittivity(1.0, -0.1)
    assert Permittivity(1.0, 0.5).eps_parallel == 1.5


def test_projector_examples(rng):
    np.testing.assert_array_equal(projector(np.array([0.0, 1.0])), [[1.0, 0.0], [0.0, 0.0]])
    d = unit_vectors(rng, (1000,))
    P = projector(d)
    assert np.abs(np.einsum("nij,nj->ni", P, d)).max() <= 1e-15
    assert np.abs(P @ P - P).max() <= 1e-14


def test_ion_species_validation():
    assert np.array_equal(IonSpecies(1, 2.0).D, 2.0 * np.eye(2))
    with pytest.raises(ValueError):
        IonSpecies(1, [[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ValueError):
        IonSpecies(1, [[1.0, 2.0], [2.0, 1.0]])
    s = IonSpecies(-1, [[2.0, 0.5], [0.5, 1.0]])
    assert s.alpha_min < s.alpha_max and not s.is_diagonal


def test_newtonian_reduction(rng):
    c = LeslieCoefficients(0, 0, 0, 1.7, 0, 0)
    Dv = random_symmetric(rng, (20,))
    d = unit_vectors(rng, (20,))
    np.testing.assert_allclose(leslie_stress(c, Dv, d, rng.normal(size=(20, 2))), 1.7 * Dv, rtol=0, atol=1e-15)


def test_alpha2_hand_example():
    c = LeslieCoefficients(0, 1, 0, 0, 0, 0)
    out = leslie_stress(c, np.zeros((2, 2)), np.array([1.0, 0.0]), np.array([0.0, 1.0]), check=False)
    np.testing.assert_array_equal(out, [[0.0, 0.0], [1.0, 0.0]])


def test_projected_form_matches_classical(rng):
    c = LeslieCoefficients(*rng.normal(size=6))
    d = unit_vectors(rng, (1000,))
    Dv = random_symmetric(rng, (1000,))
    r = rng.normal(size=(1000, 2))
    r -= np.sum(r * d, axis=-1, keepdims=True) * d  # tangent rate
    a = leslie_stress(c, Dv, d, r)
    b = leslie_stress_classical(c, Dv, d, r)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_unit_and_symmetry_checks():
    with pytest.raises(ValueError):
        leslie_stress(SMOKE, np.zeros((2, 2)), np.array([2.0, 0.0]), np.zeros(2))
    with pytest.raises(ValueError):
        leslie_stress(SMOKE, np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([1.0, 0.0]), np.zeros(2))


def test_quadratic_form_examples():
    assert dissipation_quadratic_form(SMOKE, np.array([1.0, 0.0]), np.zeros((2, 2)), np.zeros(2)) == 0.0
    # gamma1 = 1, beta = 1, coupling 0, alpha1 = 0
    c = LeslieCoefficients(0.0, -0.5, 0.5, 1.0, 0.5, 0.5)
    d = np.array([1.0, 0.0])
    Dv = np.array([[0.0, 1.0], [1.0, 0.0]])  # Dv d = (0, 1)
    assert dissipation_quadratic_form(c, d, Dv, np.array([1.0, 0.0])) == 2.0


@pytest.mark.parametrize("alphas", [(0.2, -0.6, 0.1, 1.0, 0.8, 0.3), (0.2, -0.6, 0.1, 1.0, 0.5, 0.3),
                                    (0.0, -1.0, 0.2, 0.5, 1.2, 0.1)])
def test_coercivity_bound(rng, alphas):
    c = LeslieCoefficients(*alphas)
    rep = validate_leslie(c)
    assert rep.satisfies_positivity
    n = 10_000
    d = unit_vectors(rng, (n,))
    Dv = random_symmetric(rng, (n,))
    a = rng.normal(size=(n, 2))
    q = dissipation_quadratic_form(c, d, Dv, a)
    a2 = np.sum(a * a, axis=-1)
    assert np.all(q - rep.delta * a2 >= -1e-12 * (np.abs(q) + rep.delta * a2))
