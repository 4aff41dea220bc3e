"""Bishop discs by Fourier collocation and Gauss-Newton.

The unknowns are two real periodic functions on the boundary circle:

    thetafun(phi) = phi + sum_{|n|<=N} c_n e^{in phi}   (leaf angle)
    sfun(phi)     =       sum_{|n|<=N} d_n e^{in phi}   (position along the leaf)

and the boundary trace gamma(phi) = phi(u^t_{sfun}(e^{i thetafun})) lies on the
moved sphere by construction. The loop gamma bounds a holomorphic disc iff
its negative Fourier modes vanish, so holomorphy becomes a spectral
constraint; the Taylor coefficients of the disc are the non-negative modes.

Coefficients are stored in the real basis [1, cos(k phi), sin(k phi)].
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ChartExcursionError, PreconditionError, SolverFailure
from .s3geometry import from_complex, to_complex
from .standard_filling import leaf_chart

MARKED_ANGLES = (0.0, np.pi / 2, np.pi)


@dataclass(frozen=True)
class SolverSettings:
    n_modes: int = 32
    n_samples: int = 256
    n_taylor: int = 64
    tol_res: float = 1e-9
    max_iter: int = 50
    min_damping: float = 2.0 ** -8

    def __post_init__(self):
        if self.n_samples < 8 * self.n_modes or self.n_samples & (self.n_samples - 1):
            raise PreconditionError("sample count must be a power of two, at least 8 per mode")
        if self.n_taylor > self.n_samples // 2:
            raise PreconditionError("too many Taylor terms for the sample count")

    def doubled(self):
        return replace(self, n_modes=2 * self.n_modes, n_samples=2 * self.n_samples,
                       n_taylor=2 * self.n_taylor)


def basis(phi, n):
    """Real Fourier basis [1, cos(k phi), sin(k phi)], k = 1..n, as columns."""
    phi = np.asarray(phi, dtype=float)
    k = np.arange(1, n + 1)
    kp = np.multiply.outer(phi, k)
    return np.concatenate([np.ones(phi.shape + (1,)), np.cos(kp), np.sin(kp)], axis=-1)


def basis_deriv(phi, n):
    phi = np.asarray(phi, dtype=float)
    k = np.arange(1, n + 1)
    kp = np.multiply.outer(phi, k)
    return np.concatenate([np.zeros(phi.shape + (1,)), -k * np.sin(kp), k * np.cos(kp)], axis=-1)


def samples(m):
    return 2.0 * np.pi * np.arange(m) / m


def wrap(a):
    """Wrap an angle difference to (-pi, pi]."""
    return np.pi - np.mod(np.pi - a, 2.0 * np.pi)


@dataclass
class BoundaryAnsatz:
    t: float
    theta_coef: np.ndarray
    s_coef: np.ndarray

    def __post_init__(self):
        self.theta_coef = np.asarray(self.theta_coef, dtype=float).copy()
        self.s_coef = np.asarray(self.s_coef, dtype=float).copy()
        if self.theta_coef.shape != self.s_coef.shape or self.theta_coef.size % 2 != 1:
            raise PreconditionError("coefficient vectors must both have length 2N + 1")

    @property
    def n_modes(self):
        return (self.theta_coef.size - 1) // 2

    @classmethod
    def standard(cls, t, s0, n_modes=32):
        """Chart functions of the round disc u^t_{s0}: thetafun = phi, sfun = s0."""
        c = np.zeros(2 * n_modes + 1)
        d = np.zeros(2 * n_modes + 1)
        d[0] = s0
        return cls(t, c, d)

    @property
    def x(self):
        return np.concatenate([self.theta_coef, self.s_coef])

    def with_x(self, x, t=None):
        n = self.theta_coef.size
        return BoundaryAnsatz(self.t if t is None else t, x[:n], x[n:])

    def thetafun(self, phi):
        phi = np.asarray(phi, dtype=float)
        return phi + basis(phi, self.n_modes) @ self.theta_coef

    def sfun(self, phi):
        return basis(np.asarray(phi, dtype=float), self.n_modes) @ self.s_coef

    def thetafun_deriv(self, phi):
        return 1.0 + basis_deriv(np.asarray(phi, dtype=float), self.n_modes) @ self.theta_coef

    def sfun_deriv(self, phi):
        return basis_deriv(np.asarray(phi, dtype=float), self.n_modes) @ self.s_coef

    def winding(self, m=512):
        """Degree of phi -> thetafun(phi) mod 2 pi."""
        phi = samples(m)
        th = np.unwrap(np.mod(self.thetafun(phi), 2 * np.pi))
        total = th[-1] - th[0] + wrap(th[0] + 2 * np.pi - th[-1])
        return int(round(total / (2 * np.pi)))

    def resized(self, n_modes):
        """Truncate or zero-pad to ``n_modes`` modes."""
        def fit(c):
            n = self.n_modes
            out = np.zeros(2 * n_modes + 1)
            k = min(n, n_modes)
            out[0] = c[0]
            out[1:1 + k] = c[1:1 + k]
            out[1 + n_modes:1 + n_modes + k] = c[1 + n:1 + n + k]
            return out
        return BoundaryAnsatz(self.t, fit(self.theta_coef), fit(self.s_coef))

    def shifted(self, ds=0.0, t=None):
        """Same shape moved by ds along the leaves and/or to another level."""
        d = self.s_coef.copy()
        d[0] += ds
        return BoundaryAnsatz(self.t if t is None else t, self.theta_coef, d)

    def to_dict(self):
        return {"t": self.t, "theta_coef": self.theta_coef.tolist(), "s_coef": self.s_coef.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["t"]), d["theta_coef"], d["s_coef"])


class _Collocation:
    """Fixed discretisation data for one (t, s0) problem."""

    def __init__(self, cmap, t, s0, settings, frame=None, truncation="index"):
        self.cmap = cmap
        self.t = float(t)
        self.s0 = float(s0)
        self.settings = settings
        n, m = settings.n_modes, settings.n_samples
        self.n, self.m = n, m
        self.phi = samples(m)
        self.B = basis(self.phi, n)
        self.frame = np.eye(2, dtype=complex) if frame is None else frame
        # "index": tangential component keeps N-1 modes (square, index-consistent);
        # "full": both components keep N modes
        self.n_neg = (n - 1, n) if truncation == "index" else (n, n)
        self.Bm = basis(np.array(MARKED_ANGLES), n)
        self.smax = np.sqrt(1.0 - self.t ** 2)

    def chart(self, ans, t=None, partials=True):
        t = self.t if t is None else t
        th = self.phi + self.B @ ans.theta_coef
        s = self.B @ ans.s_coef
        if np.any(np.abs(s) >= np.sqrt(1.0 - t * t)):
            raise ChartExcursionError("sfun left the leaf-space chart")
        if partials:
            return self.cmap.image_sphere_chart_partials(t, th, s)
        return self.cmap.image_sphere_chart(t, th, s)

    def holo_rows(self, g):
        """Negative modes of the (M, 2) complex trace g, in the solver frame."""
        gh = np.fft.fft(g @ self.frame.conj(), axis=0) / self.m
        out = []
        for c in range(2):
            modes = gh[-np.arange(1, self.n_neg[c] + 1) % self.m, c]
            out.append(modes.real)
            out.append(modes.imag)
        return np.concatenate(out)

    def _shift_block(self, ahat, n_rows):
        # modes -n of a(phi) * basis_k(phi) are shifted copies of the modes of a
        m = self.m
        n = np.arange(1, n_rows + 1)[:, None]
        k = np.arange(1, self.n + 1)[None, :]
        lo = ahat[(-n - k) % m]
        hi = ahat[(-n + k) % m]
        return np.hstack([ahat[(-n) % m], 0.5 * (lo + hi), (lo - hi) / 2j])

    def holo_jac(self, dphi, ds):
        """Rows of the holomorphy block for column functions dphi * basis, ds * basis."""
        fp = np.fft.fft(dphi @ self.frame.conj(), axis=0) / self.m
        fs = np.fft.fft(ds @ self.frame.conj(), axis=0) / self.m
        out = []
        for c in range(2):
            blk = np.hstack([self._shift_block(fp[:, c], self.n_neg[c]),
                             self._shift_block(fs[:, c], self.n_neg[c])])
            out.append(blk.real)
            out.append(blk.imag)
        return np.concatenate(out, axis=0)

    def marked_rows(self, ans):
        th = np.array(MARKED_ANGLES) + self.Bm @ ans.theta_coef
        return np.array([wrap(th[0]), self.Bm[0] @ ans.s_coef - self.s0,
                         wrap(th[1] - np.pi / 2), wrap(th[2] - np.pi)])

    def marked_jac(self):
        n = self.Bm.shape[1]
        J = np.zeros((4, 2 * n))
        J[0, :n] = self.Bm[0]
        J[1, n:] = self.Bm[0]
        J[2, :n] = self.Bm[1]
        J[3, :n] = self.Bm[2]
        return J

    def evaluate(self, ans, jac=True):
        P, dphi, ds = self.chart(ans)
        g = to_complex(P)
        r = np.concatenate([self.holo_rows(g), self.marked_rows(ans)])
        if not jac:
            return r, g
        J = np.vstack([self.holo_jac(to_complex(dphi), to_complex(ds)), self.marked_jac()])
        return r, g, J


def tangent_frame(cmap, ans, settings):
    """Unitary frame whose first column follows the boundary tangent e^{-i phi} d gamma."""
    col = _Collocation(cmap, ans.t, 0.0, settings)
    _, dphi, _ = col.chart(ans)
    v = np.mean(to_complex(dphi) * np.exp(-1j * col.phi)[:, None], axis=0)
    nv = np.linalg.norm(v)
    if nv < 1e-12:
        return np.eye(2, dtype=complex)
    e1 = v / nv
    e2 = np.array([-np.conj(e1[1]), np.conj(e1[0])])
    return np.stack([e1, e2], axis=1)


def residual(ansatz, cmap, s0, settings=SolverSettings(), truncation="full", frame=None):
    """Holomorphy (negative modes -1..-N of both components) and marked residuals.

    Layout: [Re, Im] of modes -1..-N of gamma_1, then of gamma_2, then the four
    marked residuals thetafun(0), sfun(0) - s0, thetafun(pi/2) - pi/2, thetafun(pi) - pi.
    """
    col = _Collocation(cmap, ansatz.t, s0, settings, frame=frame, truncation=truncation)
    r, _ = col.evaluate(ansatz, jac=False)
    return r


@dataclass
class BishopDisc:
    t: float
    s0: float
    taylor: np.ndarray
    ansatz: BoundaryAnsatz
    residual: float
    iterations: int
    cmap: object = field(repr=False, default=None)
    energy: float = float("nan")
    maslov: int = 0
    settings: SolverSettings = field(default_factory=SolverSettings, repr=False)

    def eval_complex(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape + (2,), dtype=complex)
        for a in self.taylor[::-1]:
            out = out * z[..., None] + a
        return out

    def __call__(self, z):
        return from_complex(self.eval_complex(z))

    def deriv(self, z):
        z = np.asarray(z, dtype=complex)
        n = np.arange(1, self.taylor.shape[0])[:, None]
        coef = self.taylor[1:] * n
        out = np.zeros(z.shape + (2,), dtype=complex)
        for a in coef[::-1]:
            out = out * z[..., None] + a
        return out

    def deriv2(self, z):
        z = np.asarray(z, dtype=complex)
        n = np.arange(2, self.taylor.shape[0])[:, None]
        coef = self.taylor[2:] * n * (n - 1)
        out = np.zeros(z.shape + (2,), dtype=complex)
        for a in coef[::-1]:
            out = out * z[..., None] + a
        return out

    def partials(self, z):
        d = self.deriv(z)
        return d, 1j * d

    def boundary_trace(self, phi):
        """Chart evaluation phi(u^t_{sfun}(e^{i thetafun})) on the boundary circle."""
        phi = np.asarray(phi, dtype=float)
        th = self.ansatz.thetafun(phi.ravel())
        s = self.ansatz.sfun(phi.ravel())
        if self.cmap is None:
            P = leaf_chart(self.t, th, s)
        else:
            P = self.cmap.image_sphere_chart(self.t, th, s)
        return P.reshape(phi.shape + (4,))

    def boundary_frame(self, phi):
        """Totally real frame (d/dtheta, d/ds) of the moved sphere along the boundary."""
        th = self.ansatz.thetafun(phi)
        s = self.ansatz.sfun(phi)
        _, dphi, ds = self.cmap.image_sphere_chart_partials(self.t, th, s)
        return to_complex(dphi), to_complex(ds)

    @property
    def hol_defect(self):
        return self.residual

    def to_dict(self):
        return {"t": self.t, "s0": self.s0,
                "taylor": [[[float(c.real), float(c.imag)] for c in row] for row in self.taylor],
                "ansatz": self.ansatz.to_dict(), "residual": self.residual,
                "iterations": self.iterations, "energy": self.energy, "maslov": self.maslov}

    @classmethod
    def from_dict(cls, d, cmap=None, settings=None):
        tay = np.array(d["taylor"], dtype=float)
        taylor = tay[..., 0] + 1j * tay[..., 1]
        return cls(float(d["t"]), float(d["s0"]), taylor, BoundaryAnsatz.from_dict(d["ansatz"]),
                   float(d["residual"]), int(d["iterations"]), cmap=cmap,
                   energy=float(d.get("energy", float("nan"))), maslov=int(d.get("maslov", 0)),
                   settings=settings or SolverSettings())


def disc_eval(disc, z):
    """u(z) by Horner evaluation of the Taylor series."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) > 1.0 + 1e-12):
        raise PreconditionError("|z| must be at most 1")
    return disc(z)


def _finish(cmap, t, s0, ans, res, iters, settings, with_invariants=True):
    col = _Collocation(cmap, t, s0, settings, truncation="full")
    r, g = col.evaluate(ans, jac=False)
    coeffs = np.fft.fft(g, axis=0) / settings.n_samples
    taylor = coeffs[:settings.n_taylor + 1]
    disc = BishopDisc(t, s0, taylor, ans, float(np.max(np.abs(r))), iters, cmap=cmap,
                      settings=settings)
    if with_invariants:
        from .intersection import disc_maslov_index
        from .verify import energy
        disc.energy = energy(disc)
        disc.maslov = disc_maslov_index(disc)
    return disc


def _gn_step(J, r):
    if J.shape[0] == J.shape[1]:
        try:
            return np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            pass
    return np.linalg.lstsq(J, -r, rcond=None)[0]


def solve_disc(cmap, t, s0, seed=None, settings=SolverSettings(), with_invariants=True):
    """Holomorphic disc through phi(u^t_{s0}(1)) with boundary on phi(S^t).

    Damped Gauss-Newton on the square collocation system (tangential component
    truncated one mode early, so the discrete index matches the continuous one).
    Converged when the full residual (both components, modes -1..-N, marked
    rows) is below ``settings.tol_res`` in the max norm.
    """
    t = float(t)
    s0 = float(s0)
    if not s0 * s0 + t * t < 1.0:
        raise PreconditionError("(s0, t) must lie in the open unit disc")
    if seed is None:
        seed = BoundaryAnsatz.standard(t, s0, settings.n_modes)
    ans = seed.resized(settings.n_modes)
    if ans.t != t:
        ans = BoundaryAnsatz(t, ans.theta_coef, ans.s_coef)
    full = _Collocation(cmap, t, s0, settings, frame=np.eye(2), truncation="full")

    def full_norm(a):
        return float(np.max(np.abs(full.evaluate(a, jac=False)[0])))

    best = full_norm(ans)
    if best < settings.tol_res:
        return _finish(cmap, t, s0, ans, best, 0, settings, with_invariants)
    frame = tangent_frame(cmap, ans, settings)
    col = _Collocation(cmap, t, s0, settings, frame=frame, truncation="index")
    r, _, J = col.evaluate(ans)
    best_ans = ans
    for it in range(1, settings.max_iter + 1):
        step = _gn_step(J, r)
        f0 = float(r @ r)
        alpha = 1.0
        while True:
            trial = ans.with_x(ans.x + alpha * step)
            try:
                r_new, _, J_new = col.evaluate(trial)
                f1 = float(r_new @ r_new)
            except ChartExcursionError:
                f1 = np.inf
            if f1 <= (1.0 - 1e-4 * alpha) * f0:
                break
            alpha *= 0.5
            if alpha < settings.min_damping:
                break
        if alpha < settings.min_damping:
            if f0 ** 0.5 < 1e-12:
                break  # discrete system solved; only rounding left
            raise SolverFailure(f"line search failed at iteration {it} (t={t}, s0={s0})",
                                best_residual=best, iterations=it)
        ans, r, J = trial, r_new, J_new
        cur = full_norm(ans)
        if cur < best:
            best, best_ans = cur, ans
        if cur < settings.tol_res:
            return _finish(cmap, t, s0, ans, cur, it, settings, with_invariants)
        if np.max(np.abs(r)) < 1e-13:
            break
    if np.max(np.abs(r)) < 1e-10:
        disc = _finish(cmap, t, s0, best_ans, best, it, settings, with_invariants)
        raise SolverFailure(f"collocation system solved but residual {best:.3e} exceeds "
                            f"{settings.tol_res:g} at N={settings.n_modes} (t={t}, s0={s0})",
                            best_residual=best, iterations=it, kind="resolution", disc=disc)
    raise SolverFailure(f"no convergence after {it} iterations (t={t}, s0={s0}, "
                        f"best residual {best:.3e})", best_residual=best, iterations=it)


def solve_disc_best(cmap, t, s0, seed=None, settings=SolverSettings(), with_invariants=True):
    """Like solve_disc, but returns resolution-limited discs instead of raising."""
    try:
        return solve_disc(cmap, t, s0, seed, settings, with_invariants)
    except SolverFailure as exc:
        if exc.kind == "resolution":
            return exc.disc
        raise


@dataclass
class RankReport:
    singular_values: np.ndarray
    kernel_dim: int
    threshold: float
    kernel: np.ndarray = field(repr=False, default=None)


def jacobian(disc, include_level_variation=False, include_marked=False, truncation="index",
             settings=None, level_step=1e-6):
    """Collocation Jacobian at a solved disc (chain rule through the chart partials)."""
    settings = settings or disc.settings
    ans = disc.ansatz.resized(settings.n_modes)
    frame = tangent_frame(disc.cmap, ans, settings)
    col = _Collocation(disc.cmap, disc.t, disc.s0, settings, frame=frame, truncation=truncation)
    _, _, J = col.evaluate(ans)
    nh = sum(2 * k for k in col.n_neg)
    J = J if include_marked else J[:nh]
    if include_level_variation:
        h = level_step
        gp = to_complex(col.chart(ans, t=disc.t + h, partials=False))
        gm = to_complex(col.chart(ans, t=disc.t - h, partials=False))
        colt = (col.holo_rows(gp) - col.holo_rows(gm)) / (2 * h)
        if include_marked:
            colt = np.concatenate([colt, np.zeros(4)])
        J = np.hstack([J, colt[:, None]])
        if include_marked:
            lock = np.zeros((1, J.shape[1]))
            lock[0, -1] = 1.0
            J = np.vstack([J, lock])
    return J


def linearization_rank(disc, include_level_variation=False, include_marked=False,
                       settings=None, rel_threshold=1e-6, truncation="index"):
    """Singular values and numerical kernel dimension of the linearised problem."""
    if disc is None or not np.isfinite(disc.residual):
        raise PreconditionError("linearization_rank needs a solved disc")
    J = jacobian(disc, include_level_variation, include_marked, truncation, settings)
    u, sv, vt = np.linalg.svd(J)
    ncol = J.shape[1]
    full_sv = np.zeros(ncol)
    full_sv[:sv.size] = sv
    thr = rel_threshold * sv[0]
    kdim = int(np.sum(full_sv < thr))
    kernel = vt[ncol - kdim:].T if kdim else np.zeros((ncol, 0))
    return RankReport(full_sv, kdim, thr, kernel)


def reparametrisation_fields(disc, settings=None):
    """Discretised directions (delta thetafun, delta sfun) generated by Moebius fields.

    a + ibz - conj(a) z^2 restricted to the circle is i e^{i phi} v(phi) with
    v in span{1, cos, sin}; the induced variation is (thetafun' v, sfun' v).
    """
    settings = settings or disc.settings
    n, m = settings.n_modes, settings.n_samples
    phi = samples(m)
    ans = disc.ansatz.resized(n)
    B = basis(phi, n)
    dth = ans.thetafun_deriv(phi)
    dsf = ans.sfun_deriv(phi)
    out = []
    for v in (np.ones_like(phi), np.cos(phi), np.sin(phi)):
        a, *_ = np.linalg.lstsq(B, dth * v, rcond=None)
        b, *_ = np.linalg.lstsq(B, dsf * v, rcond=None)
        out.append(np.concatenate([a, b]))
    return np.stack(out, axis=1)
