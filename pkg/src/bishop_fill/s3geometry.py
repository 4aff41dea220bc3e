"""Contact geometry of the unit sphere S^3 in C^2.

Points are stored as real 4-vectors (x1, y1, x2, y2). Most functions accept
either a single point or an ``(n, 4)`` array.
"""
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, SingularPointError

TOL_GEO = 1e-9
POLE_CUTOFF = 1e-6


@dataclass(frozen=True)
class PointC2:
    x1: float
    y1: float
    x2: float
    y2: float

    @classmethod
    def from_complex(cls, z1, z2):
        return cls(float(np.real(z1)), float(np.imag(z1)), float(np.real(z2)), float(np.imag(z2)))

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float).ravel()
        return cls(*map(float, a[:4]))

    @property
    def z1(self):
        return complex(self.x1, self.y1)

    @property
    def z2(self):
        return complex(self.x2, self.y2)

    def as_array(self):
        return np.array([self.x1, self.y1, self.x2, self.y2])

    def on_sphere(self, tol=TOL_GEO):
        return bool(on_sphere(self.as_array(), tol))

    def level(self):
        return self.y2

    def __array__(self, dtype=None, copy=None):
        return self.as_array() if dtype is None else self.as_array().astype(dtype)


@dataclass(frozen=True)
class TangentR4:
    v: np.ndarray
    base: PointC2

    def is_tangent(self, tol=TOL_GEO):
        return abs(float(np.dot(self.base.as_array(), self.v))) <= tol


@dataclass(frozen=True)
class SphereFeatures:
    """Poles, the unknot K and the neighbourhood U^delta."""

    delta: float

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise PreconditionError(f"delta must lie in (0, 1), got {self.delta}")

    def in_u_delta(self, p):
        """Membership in U^delta = F_st(S^1 x {1 - delta < s^2 + t^2 <= 1})."""
        p = as_points(p)
        return p[..., 2] ** 2 + p[..., 3] ** 2 > 1.0 - self.delta

    def on_k(self, p, tol=TOL_GEO):
        p = as_points(p)
        return np.hypot(p[..., 0], p[..., 1]) <= tol


def as_points(p):
    if isinstance(p, PointC2):
        return p.as_array()
    return np.asarray(p, dtype=float)


def to_complex(p):
    """(..., 4) real -> (..., 2) complex."""
    p = as_points(p)
    return p[..., 0::2] + 1j * p[..., 1::2]


def from_complex(z):
    """(..., 2) complex -> (..., 4) real."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (4,))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def on_sphere(p, tol=TOL_GEO):
    p = as_points(p)
    return np.abs(np.sum(p * p, axis=-1) - 1.0) <= tol


def level(p):
    return as_points(p)[..., 3]


def pole(t, sign=+1):
    """q^t_+ or q^t_-."""
    return np.array([0.0, 0.0, sign * np.sqrt(1.0 - t * t), t])


def lam(p, v):
    """The Liouville form (1/2)(x1 dy1 - y1 dx1 + x2 dy2 - y2 dx2) on R^4."""
    p = as_points(p)
    v = np.asarray(v, dtype=float)
    return 0.5 * (p[..., 0] * v[..., 1] - p[..., 1] * v[..., 0]
                  + p[..., 2] * v[..., 3] - p[..., 3] * v[..., 2])


def omega(v, w):
    """dx1^dy1 + dx2^dy2."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    return (v[..., 0] * w[..., 1] - v[..., 1] * w[..., 0]
            + v[..., 2] * w[..., 3] - v[..., 3] * w[..., 2])


def contact_form_eval(p, v, tol=TOL_GEO):
    """alpha_p(v) for p on S^3 and v tangent to S^3 at p."""
    pa = as_points(p)
    va = v.v if isinstance(v, TangentR4) else np.asarray(v, dtype=float)
    if not np.all(on_sphere(pa, tol)):
        raise PreconditionError("base point is not on S^3")
    if np.any(np.abs(np.sum(pa * va, axis=-1)) > tol * np.maximum(1.0, np.linalg.norm(va, axis=-1))):
        raise PreconditionError("vector is not tangent to S^3")
    return lam(pa, va)


def reeb_field(p):
    """R_p = 2(-y1, x1, -y2, x2), i.e. 2 i p."""
    p = as_points(p)
    return 2.0 * np.stack([-p[..., 1], p[..., 0], -p[..., 3], p[..., 2]], axis=-1)


def xi_frame(p):
    """Orthonormal frame (e1, i e1) of the contact plane xi_p, with omega(e1, e2) = 1."""
    p = as_points(p)
    x1, y1, x2, y2 = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    e1 = np.stack([-x2, y2, x1, -y1], axis=-1)
    e2 = np.stack([-y2, -x2, y1, x1], axis=-1)
    return e1, e2


def char_foliation_dir(p, t=None, tol=TOL_GEO):
    """Unit vector spanning T_pS^t cap xi_p, oriented along increasing s."""
    pa = as_points(p)
    if not np.all(on_sphere(pa, tol)):
        raise PreconditionError("point is not on S^3")
    if t is not None and np.any(np.abs(pa[..., 3] - t) > tol):
        raise PreconditionError("point is not on the level sphere S^t")
    if np.any(np.hypot(pa[..., 0], pa[..., 1]) <= POLE_CUTOFF):
        raise SingularPointError("characteristic foliation is singular at the poles q^t_+-")
    e1, e2 = xi_frame(pa)
    a = e2[..., 3:4]
    b = -e1[..., 3:4]
    v = a * e1 + b * e2
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    # partial_s u^t_s has x2-component 1
    sign = np.where(v[..., 2:3] < 0.0, -1.0, 1.0)
    return v * sign


def positive_frame(p):
    """A frame (R, e1, e2) of T_pS^3; positively oriented as the boundary of D^4."""
    e1, e2 = xi_frame(p)
    return reeb_field(p), e1, e2


def alpha_wedge_dalpha(p, u, v, w):
    """(alpha ^ d alpha)(u, v, w) at p."""
    a = lambda x: lam(p, x)  # noqa: E731
    return a(u) * omega(v, w) - a(v) * omega(u, w) + a(w) * omega(u, v)
