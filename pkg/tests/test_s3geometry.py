import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bishop_fill.errors import PreconditionError, SingularPointError
from bishop_fill.s3geometry import (PointC2, SphereFeatures, TangentR4, alpha_wedge_dalpha,
                                    char_foliation_dir, contact_form_eval, lam, level, omega,
                                    on_sphere, pole, positive_frame, reeb_field, to_complex,
                                    xi_frame)
from bishop_fill.standard_filling import leaf_chart, standard_disc_eval
from conftest import sphere_samples

unit4 = st.lists(st.floats(-1, 1, allow_nan=False), min_size=4, max_size=4).filter(
    lambda v: np.linalg.norm(v) > 0.1).map(lambda v: np.asarray(v) / np.linalg.norm(v))


def tangent_at(p, w):
    return w - np.sum(p * w, axis=-1, keepdims=True) * p


def alpha_complex(p, v):
    # (1/2) Im(conj(z) dz), summed over both coordinates
    return 0.5 * np.sum((np.conj(to_complex(p)) * to_complex(v)).imag, axis=-1)


def test_point_views_and_predicates():
    p = PointC2.from_complex(0.6, 0.8j)
    assert p.z1 == 0.6 and p.z2 == 0.8j
    assert p.on_sphere()
    assert p.level() == pytest.approx(0.8)
    assert not PointC2(1.0, 0.0, 1e-4, 0.0).on_sphere()
    assert TangentR4(np.array([0.0, 1.0, 0.0, 0.0]), PointC2(1, 0, 0, 0)).is_tangent()


def test_contact_form_examples():
    assert contact_form_eval(PointC2(1, 0, 0, 0), [0, 1, 0, 0]) == 0.5
    assert contact_form_eval(PointC2(0, 0, 1, 0), [0, 0, 0, 1]) == 0.5
    with pytest.raises(PreconditionError):
        contact_form_eval(PointC2(1, 0, 0, 0), [1, 0, 0, 0])
    with pytest.raises(PreconditionError):
        contact_form_eval([2.0, 0, 0, 0], [0, 1, 0, 0])


def test_reeb_examples():
    assert np.array_equal(reeb_field([1.0, 0, 0, 0]), [0, 2, 0, 0])
    assert np.array_equal(reeb_field([0, 0, 0, 1.0]), [0, 0, -2, 0])


def test_reeb_defining_identities():
    p = sphere_samples(1000, 1)
    R = reeb_field(p)
    assert np.max(np.abs(np.sum(p * R, axis=1))) < 1e-15
    assert np.max(np.abs(contact_form_eval(p, R) - 1.0)) < 1e-14
    # d alpha (R, w) = omega(R, w) vanishes on T S^3
    w = tangent_at(p, np.random.default_rng(2).normal(size=p.shape))
    assert np.max(np.abs(omega(R, w))) < 1e-14


def test_alpha_two_routes():
    rng = np.random.default_rng(3)
    p = sphere_samples(10_000, 4)
    v = tangent_at(p, rng.normal(size=p.shape))
    assert np.max(np.abs(contact_form_eval(p, v) - alpha_complex(p, v))) < 1e-12


def test_contact_condition_positive():
    p = sphere_samples(2000, 5)
    R, e1, e2 = positive_frame(p)
    assert np.all(alpha_wedge_dalpha(p, R, e1, e2) > 0)
    # the frame is positive as the boundary of D^4: det[p, R, e1, e2] > 0
    det = np.linalg.det(np.stack([p, R, e1, e2], axis=-1))
    assert np.all(det > 0)


def test_xi_frame_orthonormal_and_in_kernel():
    p = sphere_samples(500, 6)
    e1, e2 = xi_frame(p)
    for e in (e1, e2):
        assert np.max(np.abs(np.sum(e * p, axis=1))) < 1e-15
        assert np.max(np.abs(lam(p, e))) < 1e-15
        assert np.allclose(np.linalg.norm(e, axis=1), 1.0)
    assert np.max(np.abs(np.sum(e1 * e2, axis=1))) < 1e-15
    assert np.allclose(omega(e1, e2), 1.0)


@given(unit4)
@settings(max_examples=200, deadline=None)
def test_char_foliation_dir_properties(p):
    if np.hypot(p[0], p[1]) < 1e-3:
        return
    t = p[3]
    v = char_foliation_dir(p, t)
    assert abs(np.linalg.norm(v) - 1) < 1e-12
    assert abs(contact_form_eval(p, v)) < 1e-12
    assert abs(v[3]) < 1e-12
    # annihilated by x1 dy1 - y1 dx1 - t dx2
    assert abs(p[0] * v[1] - p[1] * v[0] - t * v[2]) < 1e-12


def test_char_foliation_matches_standard_disc_derivative():
    h = 1e-6
    for th in np.linspace(0, 2 * np.pi, 9):
        for t in (0.0, 0.4, -0.6):
            s = 0.1
            p = leaf_chart(t, th, s)
            ds = (leaf_chart(t, th, s + h) - leaf_chart(t, th, s - h)) / (2 * h)
            ds /= np.linalg.norm(ds)
            assert np.allclose(char_foliation_dir(p, t), ds, atol=1e-8)


def test_char_foliation_singular_at_poles():
    with pytest.raises(SingularPointError):
        char_foliation_dir(pole(0.0, +1), 0.0)
    with pytest.raises(SingularPointError):
        char_foliation_dir(pole(0.5, -1), 0.5)
    with pytest.raises(PreconditionError):
        char_foliation_dir(standard_disc_eval(0.0, 0.0, 1.0), 0.3)


def test_sphere_features():
    f = SphereFeatures(0.2)
    for t in np.linspace(-0.99, 0.99, 11):
        for sg in (1, -1):
            q = pole(t, sg)
            assert on_sphere(q) and level(q) == pytest.approx(t)
            assert f.on_k(q)
    # U^delta membership of F_st(z, s, t) iff 1 - delta < s^2 + t^2 <= 1
    assert f.in_u_delta(standard_disc_eval(0.0, 0.9, 1.0))
    assert not f.in_u_delta(standard_disc_eval(0.5, 0.5, 1.0))
    with pytest.raises(ValueError):
        SphereFeatures(1.5)
