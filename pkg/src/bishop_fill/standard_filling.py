"""The standard filling F_st of D^4 by the round discs u^t_s.

u^t_s(z) = (sqrt(1 - s^2 - t^2) e^{i theta(s, t)} z, s + i t)

with the twist theta(s, t) chosen so that s -> u^t_s(e^{i phi}) runs along a
leaf of the characteristic foliation of S^t.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, OutOfChartError
from .s3geometry import TOL_GEO, as_points, from_complex, lam, to_complex

N_QUAD = 256


@dataclass(frozen=True)
class StandardDiscParams:
    s: float
    t: float

    def __post_init__(self):
        if not self.s * self.s + self.t * self.t < 1.0:
            raise DomainError(f"(s, t) = ({self.s}, {self.t}) is not in the open unit disc")

    @property
    def radius(self):
        return np.sqrt(1.0 - self.s ** 2 - self.t ** 2)


def _check_domain(s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) >= 1.0) or np.any(s * s + t * t >= 1.0):
        raise DomainError("(s, t) must satisfy s^2 + t^2 < 1")
    return s, t


def theta(s, t):
    """Twist angle t / (2 sqrt(1-t^2)) * ln((sqrt(1-t^2) + s) / (sqrt(1-t^2) - s))."""
    s, t = _check_domain(s, t)
    w = np.sqrt(1.0 - t * t)
    # log1p form keeps precision for small s/w
    x = s / w
    return t / (2.0 * w) * (np.log1p(x) - np.log1p(-x))


def theta_ds(s, t):
    """d theta / ds = t / (1 - t^2 - s^2)."""
    s, t = _check_domain(s, t)
    return t / (1.0 - t * t - s * s)


def disc_factor(s, t):
    """Complex factor sqrt(1 - s^2 - t^2) e^{i theta(s, t)} of the first coordinate."""
    s, t = _check_domain(s, t)
    return np.sqrt(1.0 - s * s - t * t) * np.exp(1j * theta(s, t))


def standard_disc_eval(s, t, z=None):
    """u^t_s(z) as a real (..., 4) array. Broadcasts over s, t and z.

    Also accepts ``standard_disc_eval(params, z)`` with StandardDiscParams.
    """
    if isinstance(s, StandardDiscParams):
        s, t, z = s.s, s.t, t
    s, t = _check_domain(s, t)
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) > 1.0 + TOL_GEO):
        raise DomainError("|z| must be at most 1")
    z1 = disc_factor(s, t) * z
    z2 = np.broadcast_to(s + 1j * t, np.shape(z1))
    return from_complex(np.stack([z1, z2], axis=-1))


def leaf_chart(t, phi, s):
    """Leaf-space chart of S^t: (phi, s) -> u^t_s(e^{i phi}). Array-valued."""
    return standard_disc_eval(s, t, np.exp(1j * np.asarray(phi, dtype=float)))


def leaf_chart_partials(t, phi, s):
    """Exact partial derivatives (d/dphi, d/ds) of ``leaf_chart``."""
    s = np.asarray(s, dtype=float)
    phi = np.asarray(phi, dtype=float)
    rho2 = 1.0 - s * s - t * t
    rho = np.sqrt(rho2)
    e = np.exp(1j * (theta(s, t) + phi))
    d_phi = np.stack([1j * rho * e, np.zeros_like(e)], axis=-1)
    d_s1 = (-s / rho + 1j * rho * theta_ds(s, t)) * e
    d_s = np.stack([d_s1, np.ones_like(d_s1)], axis=-1)
    return from_complex(d_phi), from_complex(d_s)


def f_st_inverse(p, delta=None):
    """(z, s, t) with u^t_s(z) = p.

    Raises OutOfChartError on K, and, when ``delta`` is given, for points with
    s^2 + t^2 > 1 - delta (inside V^delta).
    """
    pa = as_points(p)
    s = pa[..., 2]
    t = pa[..., 3]
    r2 = s * s + t * t
    if np.any(r2 >= 1.0):
        raise OutOfChartError("point lies on the unknot K")
    if delta is not None and np.any(r2 > 1.0 - delta + TOL_GEO):
        raise OutOfChartError("point lies in V^delta (s^2 + t^2 > 1 - delta)")
    z1 = to_complex(pa)[..., 0]
    z = z1 / disc_factor(s, t)
    return z, s, t


def standard_energy(s, t):
    """E(u^t_s) = pi (1 - s^2 - t^2)."""
    s, t = _check_domain(s, t)
    return np.pi * (1.0 - s * s - t * t)


def boundary_pairing_samples(s, t, n=N_QUAD):
    """alpha(d/dphi u^t_s(e^{i phi})) at n uniform boundary samples."""
    phi = 2.0 * np.pi * np.arange(n) / n
    p = leaf_chart(t, phi, np.full(n, float(s)))
    d_phi, _ = leaf_chart_partials(t, phi, np.full(n, float(s)))
    return lam(p, d_phi)


def boundary_pairing(s, t):
    """alpha(d/dphi u^t_s) on the boundary; constant, equal to (1 - s^2 - t^2)/2."""
    return float(np.mean(boundary_pairing_samples(s, t)))


def boundary_energy(s, t, n=N_QUAD):
    """Trapezoid quadrature of the boundary integral of (u^t_s)^* alpha."""
    return 2.0 * np.pi * float(np.mean(boundary_pairing_samples(s, t, n)))


def marked_leaf(t, k, s):
    """Point F_st(i^k, s, t) on the leaf l^t_k."""
    return standard_disc_eval(s, t, 1j ** k)


def q_delta_point(s, t):
    """The point u^t_s(1) of the closed disc Q^delta."""
    return standard_disc_eval(s, t, 1.0)
