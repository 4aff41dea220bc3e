import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bishop_fill.errors import DomainError, OutOfChartError
from bishop_fill.s3geometry import lam, pole
from bishop_fill.standard_filling import (StandardDiscParams, boundary_energy, boundary_pairing,
                                          boundary_pairing_samples, f_st_inverse, leaf_chart,
                                          leaf_chart_partials, marked_leaf, q_delta_point,
                                          standard_disc_eval, standard_energy, theta, theta_ds)

# (s, t) strictly inside the unit disc
params = st.tuples(st.floats(-0.95, 0.95), st.floats(-0.95, 0.95)).filter(
    lambda p: p[0] ** 2 + p[1] ** 2 < 0.95)


def theta_oracle(s, t):
    mp.mp.dps = 40
    s, t = mp.mpf(s), mp.mpf(t)
    w = mp.sqrt(1 - t * t)
    return float(t / (2 * w) * mp.log((w + s) / (w - s)))


def test_theta_examples():
    assert theta(0.0, 0.7) == 0.0
    assert theta(0.4, 0.0) == 0.0
    assert theta(0.5, 0.5) == pytest.approx(theta_oracle(0.5, 0.5), abs=1e-15)
    assert theta(0.5, 0.5) == pytest.approx(0.380173, abs=1e-6)
    with pytest.raises(DomainError):
        theta(0.9, 0.5)


@given(params)
@settings(max_examples=200, deadline=None)
def test_theta_against_oracle_and_odd(p):
    s, t = p
    assert theta(s, t) == pytest.approx(theta_oracle(s, t), rel=1e-12, abs=1e-15)
    assert theta(-s, t) == pytest.approx(-theta(s, t), abs=1e-15)


def test_theta_monotone_and_derivative():
    for t in np.linspace(-0.9, 0.9, 13):
        if t == 0:
            continue
        w = np.sqrt(1 - t * t)
        s = np.linspace(-0.99 * w, 0.99 * w, 401)
        d = np.diff(theta(s, t))
        assert np.all(np.sign(d) == np.sign(t))
        h = 1e-6
        sm = s[1:-1]
        fd = (theta(sm + h, t) - theta(sm - h, t)) / (2 * h)
        assert np.allclose(fd, theta_ds(sm, t), rtol=1e-5)


def test_standard_disc_examples():
    z = np.array([0.3 + 0.1j, -0.5j, 1.0])
    assert np.allclose(standard_disc_eval(0.0, 0.0, z)[:, :2], np.c_[z.real, z.imag])
    assert np.allclose(standard_disc_eval(0.0, 0.0, z)[:, 2:], 0.0)
    assert np.array_equal(standard_disc_eval(0.0, 0.0, 1.0), [1.0, 0.0, 0.0, 0.0])
    assert np.allclose(standard_disc_eval(StandardDiscParams(0.0, 0.0), 1.0), [1, 0, 0, 0])
    with pytest.raises(DomainError):
        standard_disc_eval(0.0, 0.0, 1.5)
    with pytest.raises(DomainError):
        StandardDiscParams(0.8, 0.6)


@given(params, st.floats(0, 2 * np.pi))
@settings(max_examples=200, deadline=None)
def test_boundary_on_sphere(p, a):
    s, t = p
    u = standard_disc_eval(s, t, np.exp(1j * a))
    assert abs(np.linalg.norm(u) - 1.0) < 1e-14
    assert abs(u[3] - t) < 1e-15


def test_holomorphic_fd():
    rng = np.random.default_rng(0)
    h = 1e-5
    for _ in range(1000):
        s, t = rng.uniform(-0.6, 0.6, 2)
        z = 0.9 * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
        f = lambda w: (standard_disc_eval(s, t, w)[0::2] + 1j * standard_disc_eval(s, t, w)[1::2])  # noqa: E731
        dx = (f(z + h) - f(z - h)) / (2 * h)
        dy = (f(z + 1j * h) - f(z - 1j * h)) / (2 * h)
        assert np.max(np.abs(dx + 1j * dy)) < 1e-8


def test_leaf_chart_partials_fd():
    h = 1e-6
    for t, s, phi in [(0.3, 0.2, 1.0), (-0.5, -0.4, 4.0), (0.0, 0.7, 2.5)]:
        dp, ds = leaf_chart_partials(t, phi, s)
        assert np.allclose(dp, (leaf_chart(t, phi + h, s) - leaf_chart(t, phi - h, s)) / (2 * h),
                           atol=1e-8)
        assert np.allclose(ds, (leaf_chart(t, phi, s + h) - leaf_chart(t, phi, s - h)) / (2 * h),
                           atol=1e-8)
        # the s-direction lies in xi: lam vanishes on it
        assert abs(lam(leaf_chart(t, phi, s), ds)) < 1e-14


def test_f_st_inverse():
    z, s, t = f_st_inverse([1.0, 0.0, 0.0, 0.0])
    assert (z, s, t) == (1.0, 0.0, 0.0)
    rng = np.random.default_rng(1)
    n = 1000
    r = np.sqrt(rng.uniform(0, 0.99, n))
    a = rng.uniform(0, 2 * np.pi, n)
    s, t = r * np.cos(a), r * np.sin(a)
    zz = np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * np.pi * rng.uniform(size=n))
    p = standard_disc_eval(s, t, zz)
    z2, s2, t2 = f_st_inverse(p)
    assert np.max(np.abs(z2 - zz)) < 1e-12
    assert np.max(np.abs(standard_disc_eval(s2, t2, z2) - p)) < 1e-12
    with pytest.raises(OutOfChartError):
        f_st_inverse(pole(0.0))
    with pytest.raises(OutOfChartError):
        f_st_inverse(standard_disc_eval(0.0, 0.95, 0.1), delta=0.2)


def test_energy_examples():
    assert standard_energy(0.0, 0.0) == np.pi
    assert standard_energy(0.6, 0.0) == pytest.approx(0.64 * np.pi, rel=1e-15)
    assert standard_energy(0.6, 0.0) == pytest.approx(2.0106193, abs=1e-7)
    assert standard_energy(0.0, 1 - 1e-12) == pytest.approx(0.0, abs=1e-11)
    with pytest.raises(DomainError):
        standard_energy(1.0, 0.0)


def test_pairing_examples():
    assert boundary_pairing(0.0, 0.0) == pytest.approx(0.5, abs=1e-15)
    assert boundary_pairing(0.6, 0.0) == pytest.approx(0.32, abs=1e-15)


@given(params)
@settings(max_examples=100, deadline=None)
def test_pairing_constant_and_stokes(p):
    s, t = p
    a = boundary_pairing_samples(s, t)
    assert np.ptp(a) < 1e-12
    assert np.allclose(a, (1 - s * s - t * t) / 2, atol=1e-12)
    assert boundary_energy(s, t) == pytest.approx(standard_energy(s, t), abs=1e-12)
    assert 2 * np.pi * boundary_pairing(s, t) == pytest.approx(standard_energy(s, t), abs=1e-12)


def test_marked_leaves_and_q_delta():
    for k in range(3):
        for s in np.linspace(-0.5, 0.5, 5):
            p = marked_leaf(0.3, k, s)
            z, s2, t2 = f_st_inverse(p)
            assert np.angle(z) == pytest.approx(k * np.pi / 2, abs=1e-12) or k == 2 and \
                abs(abs(np.angle(z)) - np.pi) < 1e-12
    # (s, t) -> u^t_s(1) is injective on Q^delta samples
    R = np.sqrt(0.8)
    S, T = np.meshgrid(np.linspace(-R, R, 25), np.linspace(-R, R, 25))
    keep = S ** 2 + T ** 2 <= R * R
    pts = q_delta_point(S[keep], T[keep])
    d = np.linalg.norm(pts[:, None] - pts[None], axis=-1) + np.eye(len(pts))
    assert d.min() > 1e-3
