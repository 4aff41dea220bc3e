"""Pure numpy flow of a sum-of-bumps contact Hamiltonian on S^3.

Reference implementation of the hot loop; ``_flowkernel.pyx`` computes the
same thing point by point in C. Both must agree to rounding.
"""
import numpy as np


def _bump_value_grad(q, centers, radii, amps):
    # q: (n, 4) unit vectors
    h = np.zeros(q.shape[0])
    grad = np.zeros_like(q)
    for c, r, a in zip(centers, radii, amps):
        d = q - c
        u = np.einsum("ij,ij->i", d, d) / (r * r)
        inside = u < 1.0
        if not inside.any():
            continue
        ui = u[inside]
        beta = np.exp(1.0 - 1.0 / (1.0 - ui))
        dbeta = -beta / ((1.0 - ui) ** 2)
        h[inside] += a * beta
        grad[inside] += (a * dbeta * 2.0 / (r * r))[:, None] * d[inside]
    return h, grad


def contact_field(p, centers, radii, amps):
    """Contact vector field X_h = h R + Y at the radial projections of ``p``."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    norm = np.sqrt(np.einsum("ij,ij->i", p, p))
    q = p / norm[:, None]
    x1, y1, x2, y2 = q.T
    h, g = _bump_value_grad(q, np.asarray(centers, float), np.asarray(radii, float),
                            np.asarray(amps, float))
    # e1 = (-conj z2, conj z1), e2 = i e1
    e1 = np.stack([-x2, y2, x1, -y1], axis=1)
    e2 = np.stack([-y2, -x2, y1, x1], axis=1)
    dh1 = np.einsum("ij,ij->i", g, e1)
    dh2 = np.einsum("ij,ij->i", g, e2)
    reeb = 2.0 * np.stack([-y1, x1, -y2, x2], axis=1)
    return h[:, None] * reeb - dh2[:, None] * e1 + dh1[:, None] * e2


def flow_points(points, centers, radii, amps, time, steps):
    """RK4 flow of every point for ``time`` (negative for the inverse).

    Points whose chordal distance to every bump centre is at least the bump
    radius are returned unchanged: the field vanishes there and the flow
    preserves the complement of the support.
    """
    pts = np.array(points, dtype=float, copy=True)
    if pts.ndim == 1:
        pts = pts[None, :]
    centers = np.asarray(centers, dtype=float).reshape(-1, 4)
    radii = np.asarray(radii, dtype=float).ravel()
    amps = np.asarray(amps, dtype=float).ravel()
    if centers.shape[0] == 0 or steps == 0 or time == 0.0:
        return pts
    active = np.zeros(pts.shape[0], dtype=bool)
    for c, r in zip(centers, radii):
        d = pts - c
        active |= np.einsum("ij,ij->i", d, d) < r * r
    if not active.any():
        return pts
    y = pts[active]
    dt = time / steps
    for _ in range(steps):
        k1 = contact_field(y, centers, radii, amps)
        k2 = contact_field(y + 0.5 * dt * k1, centers, radii, amps)
        k3 = contact_field(y + 0.5 * dt * k2, centers, radii, amps)
        k4 = contact_field(y + dt * k3, centers, radii, amps)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        y /= np.sqrt(np.einsum("ij,ij->i", y, y))[:, None]
    pts[active] = y
    return pts
