"""Intersections of discs, multiplicities by local degree, Maslov indices, embedding defect.

Discs are anything with ``eval_complex(z) -> (..., 2)`` complex values. Two
domain models are supported: the closed unit disc ("disc") and the truncated
closed upper half-plane ("halfplane", |z| <= radius, Im z >= 0) used for local
models near a boundary point.
"""
import itertools
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.spatial import cKDTree

from .errors import (InsufficientDataError, NotNicelyIntersectingError, PreconditionError,
                     TotallyRealViolation)

BOUNDARY_TOL = 1e-7
MERGE_RADIUS = 1e-7
SCAN_RES = 128
MAX_POINTS = 64


# ---------------------------------------------------------------- disc models
@dataclass
class LocalDisc:
    """(z) -> (a(z), b(z) + p(z)) on the truncated upper half-plane.

    a, b are real-coefficient polynomials (lowest degree first), so the map
    sends the real axis into R x R. ``perturbation`` is an optional smooth,
    not necessarily holomorphic, complex function of z that is real on the
    real axis. ``self_intersection`` and ``maslov`` are optional class data.
    """

    a: tuple = (0.0, 1.0)
    b: tuple = (0.0,)
    radius: float = 1.0
    perturbation: object = field(default=None, repr=False)
    domain: str = "halfplane"
    self_intersection: int = None
    maslov: int = None
    first_perturbation: object = field(default=None, repr=False)

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=complex)
        self.b = np.asarray(self.b, dtype=complex)
        if self.domain == "halfplane" and (np.any(np.abs(self.a.imag) > 0)
                                          or np.any(np.abs(self.b.imag) > 0)):
            raise PreconditionError("local model polynomials must have real coefficients")

    @property
    def holomorphic(self):
        return self.perturbation is None and self.first_perturbation is None

    def eval_complex(self, z):
        z = np.asarray(z, dtype=complex)
        w1 = P.polyval(z, self.a)
        w2 = P.polyval(z, self.b)
        if self.first_perturbation is not None:
            w1 = w1 + self.first_perturbation(z)
        if self.perturbation is not None:
            w2 = w2 + self.perturbation(z)
        return np.stack([np.broadcast_to(w1, z.shape), np.broadcast_to(w2, z.shape)], axis=-1)

    def deriv(self, z):
        if not self.holomorphic:
            return None
        z = np.asarray(z, dtype=complex)
        d1 = P.polyval(z, P.polyder(self.a)) if self.a.size > 1 else np.zeros_like(z)
        d2 = P.polyval(z, P.polyder(self.b)) if self.b.size > 1 else np.zeros_like(z)
        return np.stack([np.broadcast_to(d1, z.shape), np.broadcast_to(d2, z.shape)], axis=-1)

    def doubled(self, z):
        """Schwarz doubling across the real axis: conj(u(conj z)) on the lower half-plane."""
        z = np.asarray(z, dtype=complex)
        lower = z.imag < 0
        w = self.eval_complex(np.where(lower, np.conj(z), z))
        return np.where(lower[..., None], np.conj(w), w)


@dataclass
class DiscMap:
    """Adapter for a callable z -> (..., 2) complex on the closed unit disc."""

    fn: object
    holomorphic: bool = True
    derivative: object = None
    domain: str = "disc"
    radius: float = 1.0

    def eval_complex(self, z):
        return self.fn(np.asarray(z, dtype=complex))

    def deriv(self, z):
        return None if self.derivative is None else self.derivative(np.asarray(z, dtype=complex))


def as_disc(u):
    if isinstance(u, (LocalDisc, DiscMap)):
        return u
    if hasattr(u, "eval_complex"):
        return DiscMap(u.eval_complex, True, getattr(u, "deriv", None), "disc", 1.0)
    if callable(u):
        return DiscMap(u, False)
    raise PreconditionError("not a disc-evaluable map (continuous-only inputs are not supported)")


def _domain(u):
    return getattr(u, "domain", "disc"), float(getattr(u, "radius", 1.0))


def _on_boundary(z, domain, radius, tol=BOUNDARY_TOL):
    if domain == "halfplane":
        return np.abs(z.imag) <= tol
    return np.abs(np.abs(z) - radius) <= tol


def _in_domain(z, domain, radius, tol=BOUNDARY_TOL):
    if domain == "halfplane":
        return (z.imag >= -tol) & (np.abs(z) <= radius + tol)
    return np.abs(z) <= radius + tol


def _scan_points(domain, radius, n):
    x = np.linspace(-radius, radius, n)
    if domain == "halfplane":
        y = np.linspace(0.0, radius, n // 2 + 1)
        Z = (x[:, None] + 1j * y[None, :]).ravel()
    else:
        Z = (x[:, None] + 1j * x[None, :]).ravel()
        ang = 2 * np.pi * np.arange(4 * n) / (4 * n)
        Z = np.concatenate([Z, radius * np.exp(1j * ang)])
    return Z[np.abs(Z) <= radius * (1 + 1e-12)]


def _derivs(u, z, h=1e-7):
    """(d/dx, d/dy) of u at z as complex (..., 2) arrays."""
    d = u.deriv(z) if getattr(u, "holomorphic", False) else None
    if d is not None:
        return d, 1j * d
    dx = (u.eval_complex(z + h) - u.eval_complex(z - h)) / (2 * h)
    dy = (u.eval_complex(z + 1j * h) - u.eval_complex(z - 1j * h)) / (2 * h)
    return dx, dy


def _real(w):
    return np.concatenate([w.real, w.imag], axis=-1)[..., [0, 2, 1, 3]]


def _newton(u1, u2, z1, z2, iters=200):
    """Vectorised Newton on u1(z1) - u2(z2) = 0.

    Holomorphic pairs use the complex 2x2 system (Cramer's rule keeps converging
    linearly at degenerate roots); otherwise pseudo-inverse steps on the real 4x4 form.
    """
    holo = getattr(u1, "holomorphic", False) and getattr(u2, "holomorphic", False)
    z1 = np.array(z1, dtype=complex)
    z2 = np.array(z2, dtype=complex)
    active = np.ones(z1.shape, dtype=bool)
    for _ in range(iters):
        ia = np.flatnonzero(active)
        if ia.size == 0:
            break
        w1, w2 = z1[ia], z2[ia]
        F = u1.eval_complex(w1) - u2.eval_complex(w2)
        a1x, a1y = _derivs(u1, w1)
        a2x, a2y = _derivs(u2, w2)
        if holo:
            det = -a1x[:, 0] * a2x[:, 1] + a2x[:, 0] * a1x[:, 1]
            safe = np.where(det == 0, 1.0, det)
            d1 = (-F[:, 0] * -a2x[:, 1] + a2x[:, 0] * -F[:, 1]) / safe
            d2 = (a1x[:, 0] * -F[:, 1] - a1x[:, 1] * -F[:, 0]) / safe
            d1 = np.where(det == 0, 0.0, d1)
            d2 = np.where(det == 0, 0.0, d2)
            step = np.stack([d1.real, d1.imag, d2.real, d2.imag], axis=1)
        else:
            J = np.stack([_real(a1x), _real(a1y), -_real(a2x), -_real(a2y)], axis=-1)
            rhs = _real(F)
            step = np.empty_like(rhs)
            # direct solve where well conditioned, pseudo-inverse near degenerate roots
            sc = np.max(np.abs(J), axis=(1, 2)) ** 4
            det = np.linalg.det(J)
            well = np.abs(det) > 1e-8 * np.maximum(sc, 1e-300)
            if well.any():
                step[well] = -np.linalg.solve(J[well], rhs[well][..., None])[..., 0]
            if (~well).any():
                step[~well] = -np.einsum("nij,nj->ni", np.linalg.pinv(J[~well], rcond=1e-13),
                                         rhs[~well])
        step = np.where(np.isfinite(step), step, 0.0)
        nrm = np.linalg.norm(step, axis=1)
        step *= np.minimum(1.0, 0.25 / np.maximum(nrm, 1e-300))[:, None]
        w1 = w1 + step[:, 0] + 1j * step[:, 1]
        w2 = w2 + step[:, 2] + 1j * step[:, 3]
        z1[ia], z2[ia] = w1, w2
        # stop on a vanishing step, or once the residual is at rounding level
        small = np.max(np.abs(F), axis=-1) <= 1e-15 * (1.0 + np.max(np.abs(u1.eval_complex(w1)),
                                                                     axis=-1))
        active[ia] = (nrm > 1e-17 * (1.0 + np.abs(w1) + np.abs(w2))) & ~(small & (nrm < 1e-12))
    F = u1.eval_complex(z1) - u2.eval_complex(z2)
    return z1, z2, np.max(np.abs(F), axis=-1)


def _cluster(pts, radius):
    """Greedy single-linkage clustering of rows of pts; returns representative indices."""
    if len(pts) == 0:
        return []
    # collapse exact duplicates first: Newton sends many seeds to the same root
    _, first, back = np.unique(np.round(pts, 12), axis=0, return_index=True, return_inverse=True)
    back = back.ravel()
    if len(first) < len(pts):
        reps = _cluster(pts[first], radius)
        members = {}
        for i, b in enumerate(back):
            members.setdefault(b, []).append(i)
        return [sorted(i for r in g for i in members[r]) for g in reps]
    tree = cKDTree(pts)
    parent = list(range(len(pts)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i
    for i, j in tree.query_pairs(radius):
        parent[find(i)] = find(j)
    groups = {}
    for i in range(len(pts)):
        groups.setdefault(find(i), []).append(i)
    return [g for _, g in sorted(groups.items())]


# ------------------------------------------------------------------ records
@dataclass(frozen=True)
class IntersectionRecord:
    z1: complex
    z2: complex
    kind: str  # "interior" | "boundary"
    tangential: bool
    multiplicity: int = None

    @property
    def location(self):
        return (self.z1, self.z2)


def _tangential(u1, u2, z1, z2):
    a1x, a1y = _derivs(u1, np.array([z1]))
    a2x, a2y = _derivs(u2, np.array([z2]))
    M = np.stack([_real(a1x[0]), _real(a1y[0]), _real(a2x[0]), _real(a2y[0])], axis=1)
    sv = np.linalg.svd(M, compute_uv=False)
    return bool(sv[-1] < 1e-6 * max(sv[0], 1e-300))


def _roots(u1, u2, n_scan, exclude_diagonal):
    d1, r1 = _domain(u1)
    d2, r2 = _domain(u2)
    Z1 = _scan_points(d1, r1, n_scan)
    Z2 = _scan_points(d2, r2, n_scan)
    P1 = _real(u1.eval_complex(Z1))
    P2 = _real(u2.eval_complex(Z2))
    t1, t2 = cKDTree(P1), cKDTree(P2)
    sp = max(float(np.max(t1.query(P1, k=2)[0][:, 1])), float(np.max(t2.query(P2, k=2)[0][:, 1])))
    if exclude_diagonal:
        # nearest image neighbour among domain points away from z itself
        dist, idx = t2.query(P1, k=32, distance_upper_bound=2.0 * sp)
        far = np.abs(Z1[:, None] - Z2[np.minimum(idx, len(Z2) - 1)]) > 4.0 * (2 * r1 / n_scan)
        ok = np.isfinite(dist) & far
        first = np.argmax(ok, axis=1)
        cand = ok[np.arange(len(Z1)), first]
        idx = idx[np.arange(len(Z1)), first]
    else:
        dist, idx = t2.query(P1, distance_upper_bound=2.0 * sp)
        cand = np.isfinite(dist)
    if not cand.any():
        return np.zeros(0, complex), np.zeros(0, complex)
    z1, z2, res = _newton(u1, u2, Z1[cand], Z2[idx[cand]])
    scale = 1.0 + np.max(np.abs(P1))
    ok = (res < 1e-13 * scale) & _in_domain(z1, d1, r1) & _in_domain(z2, d2, r2)
    if exclude_diagonal:
        ok &= np.abs(z1 - z2) > 1e-6
    return z1[ok], z2[ok]


def find_intersections(u1, u2, n_scan=SCAN_RES, merge_radius=MERGE_RADIUS, _self=False):
    """Intersection points (z1, z2) with u1(z1) = u2(z2), grid scan plus Newton polish."""
    u1, u2 = as_disc(u1), as_disc(u2)
    z1, z2 = _roots(u1, u2, n_scan, _self)
    if z1.size == 0:
        return []
    pts = np.stack([z1.real, z1.imag, z2.real, z2.imag], axis=1)
    groups = _cluster(pts, max(merge_radius, 1e-9))
    # Newton stalls near a root of multiplicity m at ~eps^(1/m); merge that spread too
    groups = _merge_groups(groups, pts, 1e-5)
    if len(groups) > MAX_POINTS:
        raise NotNicelyIntersectingError(
            f"{len(groups)} distinct intersection points: images likely overlap on an open set")
    d1, r1 = _domain(u1)
    d2, r2 = _domain(u2)
    out = []
    for g in groups:
        k = g[int(np.argmin(np.abs(z1[g] - z1[g].mean()) + np.abs(z2[g] - z2[g].mean())))]
        a, b = complex(z1[k]), complex(z2[k])
        on1 = bool(_on_boundary(np.array([a]), d1, r1)[0])
        on2 = bool(_on_boundary(np.array([b]), d2, r2)[0])
        if on1 and d1 == "halfplane":
            a = complex(a.real, 0.0)
        if on2 and d2 == "halfplane":
            b = complex(b.real, 0.0)
        kind = "boundary" if (on1 or on2) else "interior"
        out.append(IntersectionRecord(a, b, kind, _tangential(u1, u2, a, b)))
    out.sort(key=lambda r: (r.z1.real, r.z1.imag, r.z2.real, r.z2.imag))
    return out


def _merge_groups(groups, pts, radius):
    centers = np.array([pts[g].mean(axis=0) for g in groups])
    merged = []
    for cg in _cluster(centers, radius):
        merged.append([i for c in cg for i in groups[c]])
    return merged


def find_self_intersections(u, n_scan=SCAN_RES):
    """Ordered pairs z1 != z2 with u(z1) = u(z2)."""
    return find_intersections(u, u, n_scan, _self=True)


# ------------------------------------------------------------------ degree
def _facet_tets(k):
    """Tetrahedra (vertex coordinates in [-1,1]^4) triangulating the boundary of the 4-cube,
    each ordered to be positively oriented as part of the boundary (outward normal first)."""
    g = np.linspace(-1.0, 1.0, k + 1)
    corners = np.array(list(itertools.product(range(k), repeat=3)))
    paths = []
    for perm in itertools.permutations(range(3)):
        off = np.zeros((4, 3), dtype=int)
        for j, ax in enumerate(perm):
            off[j + 1:, ax] += 1
        paths.append(off)
    paths = np.array(paths)  # (6, 4, 3) Freudenthal simplices of the unit cube
    idx = corners[:, None, None, :] + paths[None]  # (k^3, 6, 4, 3)
    out = []
    for axis, sign in itertools.product(range(4), (-1.0, 1.0)):
        others = [a for a in range(4) if a != axis]
        v = np.empty(idx.shape[:-1] + (4,))
        v[..., axis] = sign
        v[..., others] = g[idx]
        v = v.reshape(-1, 4, 4)
        n = np.zeros(4)
        n[axis] = sign
        M = np.concatenate([np.broadcast_to(n, (len(v), 1, 4)), v[:, 1:] - v[:, :1]], axis=1)
        neg = np.linalg.det(M) < 0
        v[neg] = v[neg][:, [0, 1, 3, 2]]
        out.append(v)
    return np.concatenate(out)


_TET_CACHE = {}


def _tets(k):
    """Tetrahedra plus (unique vertices, inverse index) for evaluating F once per vertex."""
    if k not in _TET_CACHE:
        tets = _facet_tets(k)
        uniq, inv = np.unique(np.round(tets.reshape(-1, 4), 12), axis=0, return_inverse=True)
        _TET_CACHE[k] = (tets, uniq, inv.ravel())
    return _TET_CACHE[k]


def degree_on_cube(F, center, r, k=6, seed=0):
    """Brouwer degree of F/|F| on the boundary of the cube center + [-r, r]^4.

    Simplicial approximation: each boundary tetrahedron is mapped linearly by
    its vertex values; the degree is the signed count of image simplices hit by
    a fixed generic ray from the origin.
    """
    tets, uniq, inv = _tets(k)
    vals = F(center + r * uniq)
    if np.min(np.linalg.norm(vals, axis=1)) <= 1e-14:
        raise PreconditionError("F vanishes on the cube boundary")
    W = vals[inv].reshape(tets.shape)
    rng = np.random.default_rng(seed)
    for _ in range(8):
        d = rng.normal(size=4)
        d /= np.linalg.norm(d)
        A = np.transpose(W, (0, 2, 1))
        det = np.linalg.det(A)
        good = np.abs(det) > 1e-300
        c = np.full((len(W), 4), -1.0)
        c[good] = np.linalg.solve(A[good], np.broadcast_to(d, (int(good.sum()), 4))[..., None])[..., 0]
        if np.any(np.abs(c[good]) < 1e-12):
            continue  # ray grazes a face; pick another direction
        hit = good & np.all(c >= 0.0, axis=1)
        return int(np.sum(np.sign(det[hit])))
    raise PreconditionError("could not find a generic ray direction")


def _pair_map(f1, f2):
    def F(x):
        z1 = x[:, 0] + 1j * x[:, 1]
        z2 = x[:, 2] + 1j * x[:, 3]
        return _real(f1(z1) - f2(z2))
    return F


def _auto_radius(z1, z2, others, r_max=0.05):
    c = np.array([z1.real, z1.imag, z2.real, z2.imag])
    r = r_max
    for o in others:
        dist = np.linalg.norm(c - np.array([o[0].real, o[0].imag, o[1].real, o[1].imag]))
        if dist > 1e-12:
            r = min(r, 0.3 * dist)
    return c, r


def _degree(F, c, r, k=6):
    while True:
        if r < 1e-9:
            raise PreconditionError("no isolating cube radius above 1e-9")
        try:
            d1 = degree_on_cube(F, c, r, k)
            d2 = degree_on_cube(F, c, r, 2 * k)
        except PreconditionError:
            r *= 0.5
            continue
        if d1 == d2:
            return d1
        r *= 0.5


def interior_multiplicity(u1, u2, record, others=(), radius=None):
    """Local degree of (z1, z2) -> u1(z1) - u2(z2) around an interior record."""
    if record.kind != "interior":
        raise PreconditionError("interior_multiplicity needs an interior record")
    u1, u2 = as_disc(u1), as_disc(u2)
    c, r = _auto_radius(record.z1, record.z2, others)
    d1, r1 = _domain(u1)
    d2, r2 = _domain(u2)
    # keep the cube inside both domains
    for z, dom, rad in ((record.z1, d1, r1), (record.z2, d2, r2)):
        margin = abs(z.imag) if dom == "halfplane" else rad - abs(z)
        r = min(r, 0.45 * margin)
    if radius is not None:
        r = radius
    return _degree(_pair_map(u1.eval_complex, u2.eval_complex), c, r)


def _doubler(u):
    if hasattr(u, "doubled"):
        return u.doubled
    raise PreconditionError("boundary multiplicity needs a local half-plane model")


def boundary_multiplicity(u1, u2, record, others=(), radius=None):
    """Degree of the Schwarz-doubled pair around a boundary record (half-plane model).

    For the disc model only transverse records are supported, by the sign of
    the real frame determinant of (du1, du2).
    """
    if record.kind != "boundary":
        raise PreconditionError("boundary_multiplicity needs a boundary record")
    u1, u2 = as_disc(u1), as_disc(u2)
    if _domain(u1)[0] == "halfplane" and _domain(u2)[0] == "halfplane":
        c, r = _auto_radius(record.z1, record.z2, others)
        if radius is not None:
            r = radius
        return _degree(_pair_map(_doubler(u1), _doubler(u2)), c, r)
    if record.tangential:
        raise PreconditionError("tangential boundary records need a local half-plane model")
    a1x, a1y = _derivs(u1, np.array([record.z1]))
    a2x, a2y = _derivs(u2, np.array([record.z2]))
    M = np.stack([_real(a1x[0]), _real(a1y[0]), _real(a2x[0]), _real(a2y[0])], axis=1)
    return int(np.sign(np.linalg.det(M)))


def with_multiplicities(u1, u2, records):
    locs = [r.location for r in records]
    out = []
    for rec in records:
        others = [l for l in locs if l != rec.location]
        if rec.kind == "interior":
            m = interior_multiplicity(u1, u2, rec, others)
        else:
            m = boundary_multiplicity(u1, u2, rec, others)
        out.append(IntersectionRecord(rec.z1, rec.z2, rec.kind, rec.tangential, m))
    return out


def intersection_number(u1, u2, records=None, n_scan=SCAN_RES):
    """u1 . u2 = 2 * (interior multiplicities) + (boundary multiplicities)."""
    if records is None:
        records = find_intersections(u1, u2, n_scan)
    if records and records[0].multiplicity is None:
        records = with_multiplicities(u1, u2, records)
    return sum((2 if r.kind == "interior" else 1) * r.multiplicity for r in records)


def self_intersection_contribution(u, n_scan=SCAN_RES):
    """2 * sum over interior self-intersection pairs + sum over boundary ones (ordered pairs)."""
    recs = find_self_intersections(u, n_scan)
    return intersection_number(u, u, with_multiplicities(u, u, recs)), recs


# ------------------------------------------------------------------ Maslov
def maslov_index_frame(e1, e2=None, min_samples=512):
    """Winding of det_C[e1 e2]^2 / |det|^2 along a sampled loop of totally real frames.

    ``e1``, ``e2``: (n, 2) complex arrays, or a callable phi -> (e1, e2).
    """
    if callable(e1):
        phi = 2 * np.pi * np.arange(min_samples) / min_samples
        e1, e2 = e1(phi)
    e1 = np.asarray(e1, dtype=complex)
    e2 = np.asarray(e2, dtype=complex)
    if e1.shape[0] < min_samples:
        raise PreconditionError(f"need at least {min_samples} frame samples")
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.min(np.abs(det)) <= 1e-8:
        raise TotallyRealViolation("frame is not totally real at some sample")
    return _winding(det ** 2)


def _winding(w):
    ph = np.angle(w)
    d = np.diff(np.concatenate([ph, ph[:1]]))
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return int(round(d.sum() / (2 * np.pi)))


def standard_frame(s, t):
    """Boundary frame (d/dtheta, d/ds) of the round disc u^t_s."""
    from .standard_filling import leaf_chart_partials
    from .s3geometry import to_complex

    def frame(phi):
        a, b = leaf_chart_partials(t, phi, np.full_like(phi, s))
        return to_complex(a), to_complex(b)
    return frame


def disc_maslov_index(disc, n=512, max_n=1 << 16, max_step=np.pi / 4):
    """Maslov index of a solved disc from its boundary frame of the moved sphere.

    The frame can turn quickly where the boundary crosses the edge of a bump
    support, so the sampling doubles until no step of det^2 turns by more than
    ``max_step`` (a step near pi would be unwrapped the wrong way).
    """
    while True:
        phi = 2 * np.pi * np.arange(n) / n
        if disc.cmap is None:
            from .standard_filling import leaf_chart_partials
            from .s3geometry import to_complex
            a, b = leaf_chart_partials(disc.t, disc.ansatz.thetafun(phi), disc.ansatz.sfun(phi))
            e1, e2 = to_complex(a), to_complex(b)
        else:
            e1, e2 = disc.boundary_frame(phi)
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.min(np.abs(det)) <= 1e-8:
            return maslov_index_frame(e1, e2, min(n, 512))
        w = det ** 2
        step = np.angle(np.roll(w, -1) / w)
        if np.max(np.abs(step)) < max_step or n >= max_n:
            return maslov_index_frame(e1, e2, min(n, 512))
        n *= 2


def _zeros(fn, radius, n=200):
    """Isolated zeros of a complex function on |z| <= radius (scan + Newton)."""
    x = np.linspace(-radius, radius, n)
    Z = (x[:, None] + 1j * x[None, :])
    V = np.abs(fn(Z))
    if np.mean(V < 1e-12) > 0.01:
        raise PreconditionError("section vanishes on an open set: zeros are not isolated")
    # local minima of |fn| on the grid
    pad = np.pad(V, 1, constant_values=np.inf)
    core = pad[1:-1, 1:-1]
    mins = np.ones_like(core, dtype=bool)
    for di, dj in itertools.product((-1, 0, 1), repeat=2):
        if di or dj:
            mins &= core <= pad[1 + di:pad.shape[0] - 1 + di, 1 + dj:pad.shape[1] - 1 + dj]
    z = Z[mins & (np.abs(Z) <= radius)]
    h = 1e-7
    for _ in range(100):
        f = fn(z)
        fx = (fn(z + h) - fn(z - h)) / (2 * h)
        fy = (fn(z + 1j * h) - fn(z - 1j * h)) / (2 * h)
        det = fx.real * fy.imag - fy.real * fx.imag
        det = np.where(np.abs(det) < 1e-300, 1e-300, det)
        st = -np.stack([(fy.imag * f.real - fy.real * f.imag) / det,
                        (-fx.imag * f.real + fx.real * f.imag) / det], -1)
        st = np.where(np.isfinite(st), st, 0.0)
        st *= np.minimum(1.0, 0.1 / np.maximum(np.linalg.norm(st, axis=1), 1e-300))[:, None]
        z = z + st[:, 0] + 1j * st[:, 1]
    z = z[np.abs(fn(z)) < 1e-9]
    if z.size == 0:
        return z
    groups = _cluster(np.stack([z.real, z.imag], 1), 1e-5)
    return np.array([z[g].mean() for g in groups])


def _local_winding(fn, z0, r, n=1024):
    w = fn(z0 + r * np.exp(2j * np.pi * np.arange(n) / n))
    if np.min(np.abs(w)) < 1e-14:
        raise PreconditionError("section vanishes on the winding circle")
    return _winding(w)


def maslov_rank1(section, line=None):
    """mu(E, F) = 2 * (interior zero orders) + (boundary zero orders) for a section
    of the trivial line bundle over the disc that is real along the totally real
    line field F = line(phi) R on the boundary.

    Boundary orders come from the doubled section D(z) = s(z)/f(arg z) inside and
    conj(s(1/conj z)/f(arg z)) outside the unit circle. Without ``line``, F is the
    line spanned by the section's own boundary values, which must then be nonzero.
    """
    phi = 2 * np.pi * np.arange(512) / 512
    bvals = section(np.exp(1j * phi))
    if line is None:
        if np.min(np.abs(bvals)) < 1e-9 * max(1.0, np.max(np.abs(bvals))):
            raise PreconditionError("boundary zeros need an explicit line field")
    else:
        rv = bvals / line(phi)
        if np.max(np.abs(rv.imag)) > 1e-8 * max(1.0, np.max(np.abs(rv))):
            raise PreconditionError("section is not real along the boundary line field")

    def doubled(z):
        z = np.asarray(z, dtype=complex)
        f = line(np.angle(z))
        inside = np.abs(z) <= 1.0
        zz = np.where(inside, z, 1.0 / np.conj(np.where(z == 0, 1.0, z)))
        val = section(zz) / f
        return np.where(inside, val, np.conj(val))

    search = section if line is None else (
        lambda z: np.where(np.abs(z) <= 1.0, section(z), doubled(z)))
    zeros = _zeros(search, 1.2 if line is not None else 1.0)
    zeros = zeros[np.abs(zeros) <= 1.0 + 1e-6]
    total = 0
    for i, z0 in enumerate(zeros):
        dist = [abs(z0 - w) for j, w in enumerate(zeros) if j != i]
        r = min([0.25] + [0.3 * d for d in dist])
        if abs(abs(z0) - 1.0) < 1e-6:
            total += _local_winding(doubled, z0, r)
        else:
            r = min(r, 0.45 * (1.0 - abs(z0)))
            total += 2 * _local_winding(section, z0, r)
    return total


# ------------------------------------------------------------------ adjunction
@dataclass
class AdjunctionReport:
    self_intersection: int
    maslov: int
    defect: int
    embedded: bool
    self_intersections: list = field(default_factory=list)
    min_derivative: float = float("nan")


def min_derivative(u, n_r=32, n_phi=128, r_max=0.999):
    u = as_disc(u)
    r = np.linspace(0.0, r_max, n_r)
    ph = 2 * np.pi * np.arange(n_phi) / n_phi
    z = (r[:, None] * np.exp(1j * ph[None, :])).ravel()
    if _domain(u)[0] == "halfplane":
        z = z[z.imag >= 0] * _domain(u)[1]
    dx, _ = _derivs(u, z)
    return float(np.min(np.linalg.norm(dx, axis=-1)))


def adjunction_defect(u, partner=None, n_scan=SCAN_RES):
    """D(A) = A.A - mu(A) + 2.

    Bishop discs: A.A is the intersection number with a same-class partner disc
    and mu the boundary-frame Maslov index. Local models: explicit class data.
    """
    if isinstance(u, LocalDisc):
        if u.self_intersection is None or u.maslov is None:
            raise InsufficientDataError("local model without class data")
        aa, mu = int(u.self_intersection), int(u.maslov)
        embedded_scan = not find_self_intersections(u, n_scan)
    else:
        if partner is None:
            raise InsufficientDataError("no same-class partner disc available")
        if abs(partner.t - u.t) > 1e-12 or partner is u:
            raise InsufficientDataError("partner must be a distinct disc at the same level")
        aa = intersection_number(u, partner, n_scan=n_scan)
        mu = int(u.maslov) if getattr(u, "maslov", 0) else disc_maslov_index(u)
        embedded_scan = not find_self_intersections(u, n_scan)
    D = aa - mu + 2
    md = min_derivative(u)
    return AdjunctionReport(aa, mu, D, bool(D == 0 and embedded_scan and md > 1e-6), [], md)


def cusp_model(eps=0.0, center=0.5j, radius=1.0):
    """Order-1 critical point at ``center``: (w^2, w^3 + eps w) with w = z - center."""
    c = complex(center)
    w_a = P.polyfromroots([c, c])
    w_b = P.polyadd(P.polyfromroots([c, c, c]), eps * P.polyfromroots([c]))
    return DiscMap(lambda z: np.stack([P.polyval(z, w_a), P.polyval(z, w_b)], axis=-1),
                   True, lambda z: np.stack([P.polyval(z, P.polyder(w_a)),
                                             P.polyval(z, P.polyder(w_b))], axis=-1),
                   "halfplane", radius)


def critical_point_contribution(eps=1e-2, center=0.5j, n_scan=SCAN_RES):
    """Contribution of an order-1 critical point to the defect, via its perturbation."""
    u = cusp_model(eps, center)
    val, recs = self_intersection_contribution(u, n_scan)
    return val, recs
