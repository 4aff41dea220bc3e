# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 flow of a sum-of-bumps contact Hamiltonian on S^3."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()


cdef void _field(const double* p, const double[:, ::1] centers,
                 const double[::1] radii, const double[::1] amps,
                 double* out) noexcept nogil:
    cdef double nrm = sqrt(p[0]*p[0] + p[1]*p[1] + p[2]*p[2] + p[3]*p[3])
    cdef double x1 = p[0] / nrm, y1 = p[1] / nrm, x2 = p[2] / nrm, y2 = p[3] / nrm
    cdef double h = 0.0, g0 = 0.0, g1 = 0.0, g2 = 0.0, g3 = 0.0
    cdef double d0, d1, d2, d3, u, beta, dbeta, r2, coef
    cdef Py_ssize_t b
    for b in range(centers.shape[0]):
        d0 = x1 - centers[b, 0]
        d1 = y1 - centers[b, 1]
        d2 = x2 - centers[b, 2]
        d3 = y2 - centers[b, 3]
        r2 = radii[b] * radii[b]
        u = (d0*d0 + d1*d1 + d2*d2 + d3*d3) / r2
        if u < 1.0:
            beta = exp(1.0 - 1.0 / (1.0 - u))
            dbeta = -beta / ((1.0 - u) * (1.0 - u))
            h += amps[b] * beta
            coef = amps[b] * dbeta * 2.0 / r2
            g0 += coef * d0
            g1 += coef * d1
            g2 += coef * d2
            g3 += coef * d3
    # e1 = (-x2, y2, x1, -y1), e2 = (-y2, -x2, y1, x1)
    cdef double dh1 = -g0*x2 + g1*y2 + g2*x1 - g3*y1
    cdef double dh2 = -g0*y2 - g1*x2 + g2*y1 + g3*x1
    out[0] = 2.0*h*(-y1) - dh2*(-x2) + dh1*(-y2)
    out[1] = 2.0*h*x1 - dh2*y2 + dh1*(-x2)
    out[2] = 2.0*h*(-y2) - dh2*x1 + dh1*y1
    out[3] = 2.0*h*x2 - dh2*(-y1) + dh1*x1


def flow_points(points, centers, radii, amps, double time, int steps):
    """RK4 flow of each row of ``points`` for ``time``; see ``_flow_py``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pts = np.array(points, dtype=np.float64, copy=True, ndmin=2, order="C")
    cdef double[:, ::1] c = np.ascontiguousarray(np.asarray(centers, dtype=np.float64).reshape(-1, 4))
    cdef double[::1] r = np.ascontiguousarray(np.asarray(radii, dtype=np.float64).ravel())
    cdef double[::1] a = np.ascontiguousarray(np.asarray(amps, dtype=np.float64).ravel())
    cdef double[:, ::1] P = pts
    cdef Py_ssize_t n = P.shape[0], i, j, b, s
    cdef double dt, dd, nrm, d
    cdef double y[4]
    cdef double tmp[4]
    cdef double k1[4]
    cdef double k2[4]
    cdef double k3[4]
    cdef double k4[4]
    cdef bint active
    if c.shape[0] == 0 or steps == 0 or time == 0.0:
        return pts
    dt = time / steps
    with nogil:
        for i in range(n):
            active = False
            for b in range(c.shape[0]):
                dd = 0.0
                for j in range(4):
                    d = P[i, j] - c[b, j]
                    dd = dd + d * d
                if dd < r[b] * r[b]:
                    active = True
            if not active:
                continue
            for j in range(4):
                y[j] = P[i, j]
            for s in range(steps):
                _field(y, c, r, a, k1)
                for j in range(4):
                    tmp[j] = y[j] + 0.5 * dt * k1[j]
                _field(tmp, c, r, a, k2)
                for j in range(4):
                    tmp[j] = y[j] + 0.5 * dt * k2[j]
                _field(tmp, c, r, a, k3)
                for j in range(4):
                    tmp[j] = y[j] + dt * k3[j]
                _field(tmp, c, r, a, k4)
                for j in range(4):
                    y[j] = y[j] + (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
                nrm = sqrt(y[0]*y[0] + y[1]*y[1] + y[2]*y[2] + y[3]*y[3])
                for j in range(4):
                    y[j] = y[j] / nrm
            for j in range(4):
                P[i, j] = y[j]
    return pts
