"""Contactomorphisms of (S^3, xi) generated as time-1 flows of contact Hamiltonians.

The Hamiltonian is a sum of smooth bumps h = sum_b A_b beta(|p - c_b|^2 / r_b^2)
with beta(u) = exp(1 - 1/(1 - u)) on u < 1. Each bump support must stay clear of
the closure of U^delta, so the flow is the identity near the unknot K.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .errors import InvalidContactomorphismError, PreconditionError, ValidationError
from .s3geometry import TOL_GEO, as_points, lam, on_sphere, reeb_field
from .standard_filling import leaf_chart, leaf_chart_partials, _check_domain

DEFAULT_STEPS = 200
FD_STEP = 1e-5
TOL_CONTACT = 1e-6


@dataclass(frozen=True)
class Bump:
    center: tuple
    radius: float
    amplitude: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.shape != (4,):
            raise ValidationError("bump centre must have four real coordinates")
        if abs(float(c @ c) - 1.0) > 1e-9:
            raise ValidationError(f"bump centre {tuple(c)} is not on S^3")
        if not self.radius > 0.0:
            raise ValidationError("bump radius must be positive")
        object.__setattr__(self, "center", tuple(float(x) for x in c))

    def min_abs_z1(self):
        """Minimum of |z1| over the closed support cap on S^3."""
        c = np.asarray(self.center)
        cap = np.arccos(np.clip(1.0 - 0.5 * self.radius ** 2, -1.0, 1.0))
        dist = np.arccos(np.clip(np.hypot(c[0], c[1]), -1.0, 1.0))
        ang = dist + cap
        return 0.0 if ang >= np.pi / 2 else float(np.cos(ang))


@dataclass(frozen=True)
class ContactHamiltonian:
    bumps: tuple = ()
    flow_time: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "bumps", tuple(self.bumps))

    @classmethod
    def from_dict(cls, d):
        bumps = [Bump(tuple(b["center"]), float(b["radius"]), float(b["amplitude"]))
                 for b in d.get("bumps", [])]
        return cls(tuple(bumps), float(d.get("flow_time", 1.0)))

    def to_dict(self):
        return {"bumps": [{"center": list(b.center), "radius": b.radius,
                           "amplitude": b.amplitude} for b in self.bumps],
                "flow_time": self.flow_time}

    @property
    def arrays(self):
        live = [b for b in self.bumps if b.amplitude != 0.0]
        c = np.array([b.center for b in live], dtype=float).reshape(-1, 4)
        r = np.array([b.radius for b in live], dtype=float)
        a = np.array([b.amplitude for b in live], dtype=float)
        return c, r, a

    @property
    def is_trivial(self):
        return all(b.amplitude == 0.0 for b in self.bumps) or self.flow_time == 0.0

    def validate(self, delta):
        """Every bump support must be disjoint from the closure of U^delta."""
        for k, b in enumerate(self.bumps):
            if b.min_abs_z1() ** 2 <= delta:
                raise ValidationError(
                    f"bump {k} (centre {b.center}, radius {b.radius}) meets the closure of "
                    f"U^delta for delta={delta}")

    def value(self, p):
        p = as_points(p)
        c, r, a = self.arrays
        h = np.zeros(p.shape[:-1])
        for cc, rr, aa in zip(c, r, a):
            u = np.sum((p - cc) ** 2, axis=-1) / rr ** 2
            inside = u < 1.0
            h = h + np.where(inside, aa * np.exp(1.0 - 1.0 / np.where(inside, 1.0 - u, 1.0)), 0.0)
        return h

    def support_mask(self, p, pad=0.0):
        p = np.atleast_2d(as_points(p))
        c, r, _ = self.arrays
        mask = np.zeros(p.shape[0], dtype=bool)
        for cc, rr in zip(c, r):
            mask |= np.sum((p - cc) ** 2, axis=-1) < (rr + pad) ** 2
        return mask


def contact_vector_field(h, p):
    """X_h = h R + Y, with Y in xi solving d alpha(Y, .) = -dh on xi."""
    pa = as_points(p)
    if not np.all(on_sphere(pa)):
        raise PreconditionError("point is not on S^3")
    c, r, a = h.arrays
    out = kernels.contact_field(np.atleast_2d(pa), c, r, a)
    return out.reshape(pa.shape)


@dataclass
class ContactMap:
    hamiltonian: ContactHamiltonian = field(default_factory=ContactHamiltonian)
    steps: int = DEFAULT_STEPS
    fd_step: float = FD_STEP

    @classmethod
    def identity(cls):
        return cls(ContactHamiltonian())

    @property
    def is_identity(self):
        return self.hamiltonian.is_trivial

    # -- evaluation -------------------------------------------------------
    def flow(self, p, direction="forward"):
        pa = as_points(p)
        if not np.all(on_sphere(pa, 1e-7)):
            raise PreconditionError("point is not on S^3")
        if self.is_identity:
            return np.array(pa, dtype=float)
        sign = {"forward": 1.0, "inverse": -1.0}[direction]
        c, r, a = self.hamiltonian.arrays
        flat = np.ascontiguousarray(pa.reshape(-1, 4))
        out = kernels.flow_points(flat, c, r, a, sign * self.hamiltonian.flow_time, self.steps)
        return out.reshape(pa.shape)

    def __call__(self, p):
        return self.flow(p, "forward")

    def inverse(self, p):
        return self.flow(p, "inverse")

    def h_tilde(self, q):
        """H o phi^{-1}: level of the moved sphere through q."""
        return self.inverse(q)[..., 3]

    def pushforward(self, p, v, direction="forward"):
        """T phi . v by central differences along the great circle through p in direction v."""
        pa = np.atleast_2d(as_points(p))
        va = np.atleast_2d(np.asarray(v, dtype=float))
        nv = np.linalg.norm(va, axis=-1, keepdims=True)
        safe = np.where(nv > 0, nv, 1.0)
        u = va / safe
        h = self.fd_step
        plus = np.cos(h * nv) * pa + np.sin(h * nv) * u
        minus = np.cos(h * nv) * pa - np.sin(h * nv) * u
        both = self.flow(np.concatenate([plus, minus]), direction)
        n = pa.shape[0]
        d = (both[:n] - both[n:]) / (2.0 * h)
        return d.reshape(np.shape(v))

    def conformal_factor(self, p):
        """f with phi^* alpha = f alpha, as f(p) = alpha_{phi(p)}(T phi R_p)."""
        pa = np.atleast_2d(as_points(p))
        f = np.ones(pa.shape[0])
        if not self.is_identity:
            live = self.hamiltonian.support_mask(pa, pad=2 * self.fd_step)
            if live.any():
                q = pa[live]
                img = self.flow(q)
                f[live] = lam(img, self.pushforward(q, reeb_field(q)))
        if np.any(f <= 0.0):
            raise InvalidContactomorphismError("conformal factor is not positive")
        return f.reshape(np.shape(as_points(p))[:-1])

    @cached_property
    def energy_constant(self):
        return energy_constant(self)

    # -- charts of the moved level spheres --------------------------------
    def image_sphere_chart(self, t, phi, s):
        """phi(u^t_s(e^{i phi})) on the moved sphere phi(S^t)."""
        return self.flow(leaf_chart(t, phi, s))

    def image_sphere_chart_partials(self, t, phi, s):
        """Chart values and (d/dphi, d/ds) partials at arrays phi, s.

        Exact where the stencil avoids every bump support, central differences
        of the flow otherwise.
        """
        phi = np.asarray(phi, dtype=float).ravel()
        s = np.asarray(s, dtype=float).ravel()
        base = leaf_chart(t, phi, s)
        d_phi, d_s = leaf_chart_partials(t, phi, s)
        if self.is_identity:
            return base, d_phi, d_s
        h = self.fd_step
        n = phi.size
        # stencil points lie within ~2h|d| of base
        live = self.hamiltonian.support_mask(base, pad=4 * h * (1.0 + np.max(np.abs(d_s))))
        out = base.copy()
        if live.any():
            m = int(live.sum())
            pl, sl = phi[live], s[live]
            _check_domain(sl + h, t)
            _check_domain(sl - h, t)
            stencil = np.concatenate([
                base[live],
                leaf_chart(t, pl + h, sl), leaf_chart(t, pl - h, sl),
                leaf_chart(t, pl, sl + h), leaf_chart(t, pl, sl - h)])
            img = self.flow(stencil)
            out[live] = img[:m]
            d_phi = d_phi.copy()
            d_s = d_s.copy()
            d_phi[live] = (img[m:2 * m] - img[2 * m:3 * m]) / (2 * h)
            d_s[live] = (img[3 * m:4 * m] - img[4 * m:]) / (2 * h)
        assert out.shape == (n, 4)
        return out, d_phi, d_s


def hopf_point(eta, a, b):
    return np.array([np.cos(eta) * np.cos(a), np.cos(eta) * np.sin(a),
                     np.sin(eta) * np.cos(b), np.sin(eta) * np.sin(b)])


def hopf_grid(n, with_coords=False):
    """n x n x n sample grid of S^3 in Hopf coordinates."""
    eta = np.linspace(0.0, np.pi / 2, n)
    xi = 2.0 * np.pi * np.arange(n) / n
    E, A, B = np.meshgrid(eta, xi, xi, indexing="ij")
    pts = hopf_point(E, A, B)
    pts = np.moveaxis(pts, 0, -1).reshape(-1, 4)
    if with_coords:
        return pts, np.stack([E, A, B], axis=-1).reshape(-1, 3)
    return pts


def max_conformal_factor(cmap, n=50, polish=5):
    """Max of f over an n^3 Hopf grid, refined by Nelder-Mead from the best samples."""
    from scipy.optimize import minimize

    pts, coords = hopf_grid(n, with_coords=True)
    live = cmap.hamiltonian.support_mask(pts)
    if not live.any():
        return 1.0
    f = cmap.conformal_factor(pts[live])
    best = max(1.0, float(f.max()))
    order = np.argsort(f)[::-1][:polish]
    for x0 in coords[live][order]:
        res = minimize(lambda x: -float(cmap.conformal_factor(hopf_point(*x)[None])[0]), x0,
                       method="Nelder-Mead", options={"xatol": 1e-7, "fatol": 1e-12})
        best = max(best, -float(res.fun))
    return best


def energy_constant(cmap, n=50, pad=1.05):
    """C(phi) = pad * max of the conformal factor (n^3 Hopf grid plus local polish)."""
    if cmap.is_identity:
        return pad
    return pad * max_conformal_factor(cmap, n)


def contact_residual(cmap, p, v):
    """|alpha_{phi(p)}(T phi v) - f(p) alpha_p(v)| for tangent vectors v."""
    img = cmap.flow(p)
    tv = cmap.pushforward(p, v)
    return np.abs(lam(img, tv) - cmap.conformal_factor(p) * lam(p, v))


REFERENCE_BUMP = Bump((0.0, 1.0, 0.0, 0.0), 0.5, 0.05)


def reference_map(steps=DEFAULT_STEPS):
    return ContactMap(ContactHamiltonian((REFERENCE_BUMP,), 1.0), steps=steps)


__all__ = ["Bump", "ContactHamiltonian", "ContactMap", "contact_vector_field",
           "energy_constant", "contact_residual", "reference_map", "hopf_grid",
           "TOL_CONTACT", "TOL_GEO"]
