"""Checks over solved discs and grids: maximum principle, transversality,
energy and its bound, marked points, embeddedness and mutual disjointness."""
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .s3geometry import from_complex, lam, omega

N_BOUNDARY = 256
TOL_MARKED = 1e-9
DISJOINT_FACTOR = 1e-4


def _circle(n=N_BOUNDARY):
    return np.exp(2j * np.pi * np.arange(n) / n)


def boundary_pairing_samples(disc, n=N_BOUNDARY):
    """alpha(d/dphi u) at n boundary samples, from the Taylor series."""
    z = _circle(n)
    u = disc.eval_complex(z)
    du = 1j * z[:, None] * disc.deriv(z)
    return lam(from_complex(u), from_complex(du))


def boundary_transversality(disc, n=N_BOUNDARY):
    """Minimum over the boundary of alpha(d/dphi u); positive for Bishop discs."""
    return float(np.min(boundary_pairing_samples(disc, n)))


def energy(disc, n=N_BOUNDARY):
    """Boundary quadrature of u^* alpha (trapezoid rule)."""
    return float(2.0 * np.pi * np.mean(boundary_pairing_samples(disc, n)))


def interior_energy(disc, n_r=64, n_phi=256):
    """Polar quadrature of u^* omega: Gauss-Legendre in r, trapezoid in phi."""
    x, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * (x + 1.0)
    w = 0.5 * w
    ph = 2 * np.pi * np.arange(n_phi) / n_phi
    R, PH = np.meshgrid(r, ph, indexing="ij")
    z = R * np.exp(1j * PH)
    d = disc.deriv(z)
    e = np.exp(1j * PH)[..., None]
    ur = from_complex(e * d)
    uphi = from_complex(1j * R[..., None] * e * d)
    dens = omega(ur, uphi)
    return float(np.sum(w[:, None] * dens) * 2 * np.pi / n_phi)


def energy_bound(C):
    return 4.0 * np.pi * C


def max_principle_check(disc, radii=np.linspace(0.1, 0.9, 9), n_phi=128, h=1e-3):
    """(a) |u| < 1 on interior circles, (b) FD Laplacian of |u|^2 >= -1e-6,
    (c) radial derivative of |u|^2 on the boundary > 0."""
    ph = 2 * np.pi * np.arange(n_phi) / n_phi
    z = (radii[:, None] * np.exp(1j * ph[None, :])).ravel()
    rho2 = lambda w: np.sum(np.abs(disc.eval_complex(w)) ** 2, axis=-1)  # noqa: E731
    max_abs = float(np.sqrt(np.max(rho2(z))))
    lap = (rho2(z + h) + rho2(z - h) + rho2(z + 1j * h) + rho2(z - 1j * h) - 4 * rho2(z)) / h ** 2
    zb = _circle()
    radial = 2.0 * np.real(np.sum(np.conj(disc.eval_complex(zb)) * zb[:, None] * disc.deriv(zb),
                                  axis=-1))
    out = {"max_interior_abs": max_abs, "min_laplacian": float(np.min(lap)),
           "min_radial": float(np.min(radial))}
    out["passed"] = bool(max_abs < 1.0 and out["min_laplacian"] >= -1e-6 and out["min_radial"] > 0)
    return out


def marked_residuals(disc):
    a = disc.ansatz
    th = a.thetafun(np.array([0.0, np.pi / 2, np.pi]))
    r = [th[0], a.sfun(np.array([0.0]))[0] - disc.s0, th[1] - np.pi / 2, th[2] - np.pi]
    return np.abs((np.asarray(r) + np.pi) % (2 * np.pi) - np.pi)


@dataclass
class VerificationRecord:
    disc_id: str
    s: float
    t: float
    residual: float
    max_interior_abs: float
    min_laplacian: float
    min_radial: float
    min_pairing: float
    energy: float
    energy_bound: float
    marked_residual: float
    maslov: int
    embedded: bool = None
    disjoint: bool = None
    notes: list = field(default_factory=list)

    def verdicts(self, tol_res=1e-9):
        v = {
            "residual": self.residual <= tol_res,
            "max_principle": (self.max_interior_abs < 1.0 and self.min_laplacian >= -1e-6
                              and self.min_radial > 0),
            "transversality": self.min_pairing > 0,
            "energy": self.energy <= self.energy_bound,
            "marked": self.marked_residual <= TOL_MARKED,
            "maslov": self.maslov == 2,
        }
        if self.embedded is not None:
            v["embedded"] = bool(self.embedded)
        if self.disjoint is not None:
            v["disjoint"] = bool(self.disjoint)
        return v

    def passed(self, tol_res=1e-9):
        return all(self.verdicts(tol_res).values())

    def to_dict(self):
        return asdict(self)


def verify_disc(disc, C, disc_id="", embedding_scan=False, n_scan=64):
    mp = max_principle_check(disc)
    rec = VerificationRecord(
        disc_id=disc_id, s=disc.s0, t=disc.t, residual=float(disc.residual),
        max_interior_abs=mp["max_interior_abs"], min_laplacian=mp["min_laplacian"],
        min_radial=mp["min_radial"], min_pairing=boundary_transversality(disc),
        energy=energy(disc), energy_bound=energy_bound(C),
        marked_residual=float(np.max(marked_residuals(disc))), maslov=int(disc.maslov))
    if embedding_scan:
        rec.embedded = embedding_check(disc, n_scan)
    return rec


def embedding_check(disc, n_scan=64, min_deriv=1e-6):
    """Empty self-intersection scan and no critical points."""
    from .intersection import find_self_intersections, min_derivative
    return bool(not find_self_intersections(disc, n_scan) and min_derivative(disc) > min_deriv)


def disc_samples(disc, n_r=8, n_phi=32):
    r = np.linspace(0.0, 1.0, n_r + 1)
    ph = 2 * np.pi * np.arange(n_phi) / n_phi
    z = np.concatenate([[0.0], (r[1:, None] * np.exp(1j * ph[None, :])).ravel()])
    return from_complex(disc.eval_complex(z))


def pairwise_disjointness(nodes, factor=DISJOINT_FACTOR, n_r=8, n_phi=32):
    """Distinct nodes must have sampled image distance >= factor * |(s,t) - (s',t')|.

    ``nodes``: iterable of (s, t, disc). Only sample pairs closer than
    factor * (largest separation) can violate, so a kd-tree range query finds
    them all. Returns (passed, violations).
    """
    nodes = list(nodes)
    if len(nodes) < 2:
        return True, []
    pts, owner = [], []
    for k, (_, _, d) in enumerate(nodes):
        p = disc_samples(d, n_r, n_phi)
        pts.append(p)
        owner.append(np.full(len(p), k))
    pts = np.concatenate(pts)
    owner = np.concatenate(owner)
    params = np.array([[s, t] for s, t, _ in nodes])
    max_sep = float(np.max(np.linalg.norm(params[:, None] - params[None], axis=-1)))
    tree = cKDTree(pts)
    pairs = tree.query_pairs(factor * max_sep + 1e-12, output_type="ndarray")
    violations = {}
    for i, j in pairs:
        a, b = owner[i], owner[j]
        if a == b:
            continue
        sep = float(np.linalg.norm(params[a] - params[b]))
        dist = float(np.linalg.norm(pts[i] - pts[j]))
        if dist < factor * sep:
            key = (int(min(a, b)), int(max(a, b)))
            violations[key] = min(violations.get(key, np.inf), dist)
    out = [{"nodes": list(k), "distance": v} for k, v in sorted(violations.items())]
    return (not out), out
