"""Extension of phi over D^4.

chi = f_st^{-1} o phi^{-1} o f on the chart (theta, s, t) of S^3 minus U^delta,
where f(theta, s, t) = F(e^{i theta}, s, t) is the boundary of the filling.
The isotopy chi_lambda from chi to the identity, conjugated back by phi o f_st,
is swept over a collar of width epsilon; the inside is a rescaled copy of
G = F o F_st^{-1} (identity on V^delta).
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import IsotopyFailure
from .moduli import boundary_eval, filling_eval, smoothstep
from .s3geometry import to_complex
from .standard_filling import disc_factor, leaf_chart

FD_THETA = 1e-4


def _wrap(a):
    return np.pi - np.mod(np.pi - a, 2.0 * np.pi)


def sphere_chart(y):
    """f_st^{-1} on S^3 minus K: (theta, s, t) with y = u^t_s(e^{i theta})."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    s, t = y[:, 2], y[:, 3]
    z = to_complex(y)[:, 0] / disc_factor(s, t)
    return np.angle(z), s.copy(), t.copy()


@dataclass
class ChiMap:
    grid: object
    exact: bool = False
    _min_slope: float = field(default=None, repr=False)

    @property
    def cmap(self):
        return self.grid.cmap

    @property
    def delta(self):
        return self.grid.delta

    def f(self, theta, s, t):
        return boundary_eval(self.grid, theta, s, t, exact=self.exact)

    def f_st(self, theta, s, t):
        return leaf_chart(t, theta, s)

    def min_slope(self):
        if self._min_slope is None:
            self._min_slope = chi_monotonicity(self)
        return self._min_slope


def _params(theta, s, t):
    theta, s, t = np.broadcast_arrays(np.asarray(theta, dtype=float),
                                      np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    return theta.ravel(), s.ravel(), t.ravel()


def chi(cm, theta, s, t):
    """(chi1, chi2, chi3); chi1 is lifted to lie within pi of theta."""
    theta, s, t = _params(theta, s, t)
    if np.any(s * s + t * t > 1.0 - cm.delta + 1e-12):
        from .errors import DomainError
        raise DomainError("chi is defined on s^2 + t^2 <= 1 - delta")
    q = cm.cmap.inverse(cm.f(theta, s, t))
    th, s2, t2 = sphere_chart(q)
    return theta + _wrap(th - theta), s2, t2


def chi_monotonicity(cm, n_theta=64, n_s=21, n_t=21, h=FD_THETA):
    """min over a theta x s x t lattice of the central difference d chi1 / d theta.

    ``cm`` is a ChiMap or any callable (theta, s, t) -> (chi1, chi2, chi3).
    """
    fn = cm if callable(cm) and not isinstance(cm, ChiMap) else (lambda *a: chi(cm, *a))
    delta = cm.delta if isinstance(cm, ChiMap) else 0.0
    R = np.sqrt(1.0 - delta)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    S, T = np.meshgrid(np.linspace(-R, R, n_s), np.linspace(-R, R, n_t), indexing="ij")
    keep = S * S + T * T <= R * R
    S, T = S[keep], T[keep]
    TH = np.repeat(th, S.size)
    S = np.tile(S, n_theta)
    T = np.tile(T, n_theta)
    up = np.asarray(fn(TH + h, S, T)[0])
    dn = np.asarray(fn(TH - h, S, T)[0])
    slope = _wrap(up - dn) / (2 * h)
    return float(np.min(slope))


def isotopy_psi(cm, lam, theta, s, t):
    """chi_lambda: stage 1 (lambda <= 1/2) straightens chi2, stage 2 straightens chi1.

    ``lam`` is a scalar or an array broadcasting against the points.
    """
    theta, s, t = _params(theta, s, t)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), theta.shape)
    if np.any((lam < 0.0) | (lam > 1.0)):
        raise ValueError("lambda must lie in [0, 1]")
    a, b = theta.copy(), s.copy()
    live = lam < 1.0
    if not np.any(live):
        return a, b, t.copy()
    c1, c2, _ = chi(cm, theta[live], s[live], t[live])
    lv = lam[live]
    one = lv <= 0.5
    sig = 2.0 * lv
    a_l = np.where(one, c1, 0.0)
    b_l = np.where(one, (1.0 - sig) * c2 + sig * s[live], s[live])
    two = ~one
    if np.any(two):
        if cm.min_slope() <= 0.0:
            raise IsotopyFailure("chi1 is not increasing in theta; stage 2 is not an isotopy")
        th = theta[live]
        tau = 2.0 * lv - 1.0
        # lift to [0, 2 pi] with both ends pinned
        base = np.mod(th, 2 * np.pi)
        lift = base + _wrap(c1 - base)
        a_l = np.where(two, th + (1.0 - tau) * (lift - base), a_l)
    a[live] = a_l
    b[live] = b_l
    return a, b, t.copy()


def psi_sphere(cm, lam, y):
    """Psi_lambda = phi o f_st o chi_lambda o f_st^{-1} on S^3 minus U^delta, phi on U^delta."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (len(y),))
    out = np.empty_like(y)
    th, s, t = sphere_chart_safe(y)
    inner = s * s + t * t <= 1.0 - cm.delta
    if np.any(~inner):
        out[~inner] = cm.cmap.flow(y[~inner])
    if np.any(inner):
        a, b, c = isotopy_psi(cm, lam[inner], th[inner], s[inner], t[inner])
        out[inner] = cm.cmap.flow(leaf_chart(c, a, b))
    return out


def sphere_chart_safe(y):
    """sphere_chart, with points on K mapped to (0, s, t) (they lie in U^delta)."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    s, t = y[:, 2], y[:, 3]
    on_k = s * s + t * t >= 1.0 - 1e-15
    th = np.zeros(len(y))
    if np.any(~on_k):
        th[~on_k] = sphere_chart(y[~on_k])[0]
    return th, s.copy(), t.copy()


def G(grid, x, exact=False):
    """F o F_st^{-1} off V^delta, identity on V^delta. Real (P, 4) in and out."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = x.copy()
    s, t = x[:, 2], x[:, 3]
    inner = s * s + t * t <= 1.0 - grid.delta
    if np.any(inner):
        xi = x[inner]
        z = to_complex(xi)[:, 0] / disc_factor(s[inner], t[inner])
        # |z| <= 1 on D^4; clip rounding overshoot
        z = np.where(np.abs(z) > 1.0, z / np.abs(z), z)
        out[inner] = filling_eval(grid, z, s[inner], t[inner], exact=exact)
    return out


@dataclass
class ExtensionMap:
    grid: object
    epsilon: float = 0.1
    exact: bool = False
    chimap: ChiMap = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("collar width must lie in (0, 1)")
        if self.chimap is None:
            self.chimap = ChiMap(self.grid, self.exact)

    def profile(self, r):
        """lambda(r): 0 at r = 1 - epsilon, 1 at r = 1, flat at both ends."""
        return smoothstep((np.asarray(r) - (1.0 - self.epsilon)) / self.epsilon)

    def __call__(self, x):
        return extension_phi(self, x)


def extension_phi(ext, x):
    """Phi(x): (1 - eps) G(x / (1 - eps)) inside, r Psi_{lambda(r)}(x / r) on the collar."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r = np.linalg.norm(x, axis=1)
    out = np.empty_like(x)
    k = 1.0 - ext.epsilon
    inner = r <= k
    if np.any(inner):
        y = x[inner] / k
        nrm = np.linalg.norm(y, axis=1)
        y = np.where(nrm[:, None] > 1.0, y / nrm[:, None], y)
        out[inner] = k * G(ext.grid, y, ext.exact)
    collar = np.flatnonzero(~inner)
    if collar.size:
        rc = r[collar]
        y = x[collar] / rc[:, None]
        out[collar] = rc[:, None] * psi_sphere(ext.chimap, ext.profile(rc), y)
    return out


def jacobian_check(fn, samples=10_000, seed=0, h=1e-5, radius=1.0 - 1e-3):
    """Central-difference 4x4 Jacobians of fn at random interior points of D^4."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(samples, 4))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    x = d * (radius * rng.uniform(0.0, 1.0, samples) ** 0.25)[:, None]
    cols = []
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        cols.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * h))
    J = np.stack(cols, axis=-1)
    det = np.linalg.det(J)
    sv = np.linalg.svd(J, compute_uv=False)
    return {"min_det": float(np.min(det)), "n_negative": int(np.sum(det <= 0)),
            "min_singular_value": float(np.min(sv[:, -1])), "samples": int(samples),
            "points": x, "det": det}
