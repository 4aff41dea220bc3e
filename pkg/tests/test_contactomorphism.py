import numpy as np
import pytest

from bishop_fill.contactomorphism import (REFERENCE_BUMP, Bump, ContactHamiltonian, ContactMap,
                                          contact_residual, contact_vector_field, energy_constant,
                                          hopf_grid, max_conformal_factor)
from bishop_fill.errors import PreconditionError, ValidationError
from bishop_fill.s3geometry import lam, level, reeb_field, xi_frame
from bishop_fill.standard_filling import leaf_chart, standard_disc_eval
from conftest import sphere_samples

# frozen from the golden run; oracle below (finer grid) agrees to 1e-11
GOLDEN_C = 1.6052056410780007


def support_points(n, seed=0):
    """Points inside the reference bump support."""
    rng = np.random.default_rng(seed)
    c = np.asarray(REFERENCE_BUMP.center)
    p = c + 0.25 * rng.normal(size=(n, 4))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    return p[REFERENCE_BUMP.radius ** 2 > np.sum((p - c) ** 2, axis=1)]


def fixed_region_points(delta, n=2000, seed=0):
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.uniform(1 - delta, 1.0 - 1e-9, n))
    a = rng.uniform(0, 2 * np.pi, n)
    z = np.exp(2j * np.pi * rng.uniform(size=n))
    return standard_disc_eval(r * np.cos(a), r * np.sin(a), z)


def test_bump_validation():
    with pytest.raises(ValidationError):
        Bump((1.0, 1.0, 0, 0), 0.5, 0.1)
    with pytest.raises(ValidationError):
        Bump((1.0, 0, 0, 0), 0.0, 0.1)
    ContactHamiltonian((REFERENCE_BUMP,)).validate(0.2)
    # a bump reaching towards K overlaps U^delta
    with pytest.raises(ValidationError):
        ContactHamiltonian((Bump((0.0, 0.0, 1.0, 0.0), 0.5, 0.05),)).validate(0.2)
    with pytest.raises(ValidationError):
        ContactHamiltonian((REFERENCE_BUMP,)).validate(0.8)


def test_vector_field_zero_off_support(ref_map):
    p = fixed_region_points(0.2)
    assert np.all(contact_vector_field(ref_map.hamiltonian, p) == 0.0)


def test_vector_field_defining_identities(ref_map):
    h = ref_map.hamiltonian
    p = support_points(400)
    X = contact_vector_field(h, p)
    hv = h.value(p)
    assert np.max(np.abs(np.sum(X * p, axis=1))) < 1e-14
    assert np.max(np.abs(lam(p, X) - hv)) < 1e-14
    # d alpha(Y, w) = -dh(w) on xi, dh by central differences along great circles
    Y = X - hv[:, None] * reeb_field(p)
    eps = 1e-6
    for w in xi_frame(p):
        dh = (h.value(np.cos(eps) * p + np.sin(eps) * w)
              - h.value(np.cos(eps) * p - np.sin(eps) * w)) / (2 * eps)
        dalpha = Y[:, 0] * w[:, 1] - Y[:, 1] * w[:, 0] + Y[:, 2] * w[:, 3] - Y[:, 3] * w[:, 2]
        assert np.max(np.abs(dalpha + dh)) < 1e-7


def test_vector_field_near_constant_h():
    # a very wide bump is nearly constant on S^3, so X_h is nearly h R
    h = ContactHamiltonian((Bump((1.0, 0, 0, 0), 1e3, 0.3),))
    p = sphere_samples(100, 2)
    X = contact_vector_field(h, p)
    assert np.max(np.abs(X - h.value(p)[:, None] * reeb_field(p))) < 1e-5


def test_identity_and_zero_amplitude():
    p = sphere_samples(50)
    assert np.array_equal(ContactMap.identity().flow(p), p)
    zero = ContactMap(ContactHamiltonian((Bump(REFERENCE_BUMP.center, 0.5, 0.0),)))
    assert np.array_equal(zero.flow(p), p)
    assert np.all(ContactMap.identity().conformal_factor(p) == 1.0)
    with pytest.raises(PreconditionError):
        ContactMap.identity().flow([[2.0, 0, 0, 0]])


def test_fixed_region(ref_map):
    p = fixed_region_points(0.2)
    assert np.max(np.abs(ref_map.flow(p) - p)) <= 1e-9
    assert np.max(np.abs(ref_map.conformal_factor(p) - 1.0)) <= 1e-8


def test_flow_inverse_and_step_oracle(ref_map):
    p = sphere_samples(1000, 3)
    q = ref_map.flow(p)
    assert np.max(np.linalg.norm(ref_map.inverse(q) - p, axis=1)) <= 1e-9
    assert np.max(np.abs(np.linalg.norm(q, axis=1) - 1)) < 1e-14
    half = ContactMap(ref_map.hamiltonian, steps=2 * ref_map.steps)
    assert np.max(np.abs(half.flow(p) - q)) <= 1e-9
    # the map actually moves points
    assert np.max(np.abs(q - p)) > 1e-2


def test_contactomorphism_property(ref_map):
    p = support_points(1000, 4)
    e1, e2 = xi_frame(p)
    for e in (e1, e2):
        assert np.max(np.abs(lam(ref_map.flow(p), ref_map.pushforward(p, e)))) <= 1e-6
        assert np.max(contact_residual(ref_map, p, e)) <= 1e-6
    f = ref_map.conformal_factor(p)
    assert np.all(f > 0) and f.max() > 1.0 and f.min() < 1.0


def test_level_coherence(ref_map):
    p = sphere_samples(500, 5)
    q = ref_map.flow(p)
    # H~ = H o phi^-1
    assert np.max(np.abs(level(ref_map.inverse(q)) - level(p))) <= 1e-8


def test_energy_constant(identity_map, ref_map):
    assert energy_constant(identity_map) == 1.05
    assert ref_map.energy_constant == pytest.approx(GOLDEN_C, rel=1e-9)
    assert ref_map.energy_constant >= 1.05 * ref_map.conformal_factor(hopf_grid(20)).max()


@pytest.mark.slow
def test_energy_constant_finer_grid_oracle(ref_map):
    fine = 1.05 * max_conformal_factor(ref_map, n=100)
    assert fine == pytest.approx(ref_map.energy_constant, rel=1e-2)


def test_image_sphere_chart(identity_map, ref_map):
    phi = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    s = np.full(64, 0.3)
    t = 0.2
    assert np.array_equal(identity_map.image_sphere_chart(t, phi, s), leaf_chart(t, phi, s))
    img = ref_map.image_sphere_chart(t, phi, s)
    assert np.max(np.abs(level(ref_map.inverse(img)) - t)) <= 1e-8
    pts, d_phi, d_s = ref_map.image_sphere_chart_partials(t, phi, s)
    assert np.max(np.abs(lam(pts, d_s))) <= 1e-6
    assert np.all(lam(pts, d_phi) > 0)
