"""The truncated moduli space: Bishop discs over a polar grid of the (s, t)-disc
of radius sqrt(1 - delta), built by continuation inward from the rim, and the
glued filling F evaluated from it.

Nodes: ring 0 is the centre (a single node); ring j = 1..n_rings has radius
j * R / n_rings on n_rays equally spaced rays, so ring n_rings is the rim.
"""
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .disc_solver import (BishopDisc, BoundaryAnsatz, SolverSettings, basis, residual,
                          solve_disc)
from .errors import (ChartExcursionError, ContinuationFailure, DomainError, PreconditionError,
                     SolverFailure)
from .s3geometry import from_complex, to_complex
from .standard_filling import disc_factor, f_st_inverse, leaf_chart, standard_disc_eval

MAX_HALVINGS = 8
INTERP_TOL = 1e-5


def smoothstep(x):
    """Quintic 0 -> 1 profile on [0, 1], flat (C^2) at both ends."""
    x = np.clip(x, 0.0, 1.0)
    return np.clip(x ** 3 * (10.0 - 15.0 * x + 6.0 * x * x), 0.0, 1.0)


def standard_taylor(s, t, n_taylor):
    """Taylor coefficients of u^t_s: (0, s + it) + (rho e^{i theta}, 0) z."""
    out = np.zeros((n_taylor + 1, 2), dtype=complex)
    out[0, 1] = s + 1j * t
    out[1, 0] = disc_factor(s, t)
    return out


def standard_disc(cmap, s, t, settings=SolverSettings()):
    """The round disc u^t_s as an exact BishopDisc (valid where phi = id along its boundary)."""
    ans = BoundaryAnsatz.standard(t, s, settings.n_modes)
    return BishopDisc(t, s, standard_taylor(s, t, settings.n_taylor), ans, 0.0, 0, cmap=cmap,
                      energy=np.pi * (1.0 - s * s - t * t), maslov=2, settings=settings)


@dataclass
class GridNode:
    ray: int
    ring: int
    s: float
    t: float
    disc: BishopDisc = field(default=None, repr=False)
    # "rim", "standard", "converged", "resolution" or "failed"
    status: str = "failed"
    note: str = ""

    @property
    def key(self):
        return (self.ray, self.ring)

    def summary(self):
        from .verify import boundary_transversality
        d = self.disc
        if d is None:
            return {"ray": self.ray, "ring": self.ring, "s": self.s, "t": self.t,
                    "residual": float("nan"), "energy": float("nan"), "maslov": 0,
                    "min_pairing": float("nan")}
        return {"ray": self.ray, "ring": self.ring, "s": self.s, "t": self.t,
                "residual": d.residual, "energy": d.energy, "maslov": d.maslov,
                "min_pairing": boundary_transversality(d)}


@dataclass
class ModuliGrid:
    cmap: object
    delta: float
    n_rays: int
    n_rings: int
    settings: SolverSettings
    nodes: dict = field(default_factory=dict)
    _interp: object = field(default=None, repr=False)
    _lock: object = field(default_factory=threading.Lock, repr=False)
    _exact_cache: dict = field(default_factory=dict, repr=False)

    @property
    def radius(self):
        return np.sqrt(1.0 - self.delta)

    @property
    def ring_step(self):
        return self.radius / self.n_rings

    def param(self, ray, ring):
        if ring == 0:
            return 0.0, 0.0
        a = 2.0 * np.pi * ray / self.n_rays
        r = ring * self.ring_step
        return float(r * np.cos(a)), float(r * np.sin(a))

    def keys(self):
        yield (0, 0)
        for i in range(self.n_rays):
            for j in range(1, self.n_rings + 1):
                yield (i, j)

    def ordered_nodes(self):
        return [self.nodes[k] for k in self.keys() if k in self.nodes]

    @property
    def complete(self):
        return all(k in self.nodes and self.nodes[k].disc is not None for k in self.keys())

    def failures(self):
        return [n for n in self.ordered_nodes() if n.disc is None]

    def node_list(self):
        """(s, t, disc) triples of all solved nodes."""
        return [(n.s, n.t, n.disc) for n in self.ordered_nodes() if n.disc is not None]

    # -- interpolation ------------------------------------------------------
    def interpolator(self):
        with self._lock:
            if self._interp is None:
                self._interp = _NodeInterpolator(self)
            return self._interp

    def disc_exact(self, s, t):
        """On-demand solve at (s, t), warm-started from the nearest node."""
        key = (float(s), float(t))
        with self._lock:
            if key in self._exact_cache:
                return self._exact_cache[key]
        disc, _ = _solve_at(self.cmap, s, t, self._nearest(s, t), self.settings)
        with self._lock:
            self._exact_cache[key] = disc
        return disc

    def _nearest(self, s, t):
        best, dist = None, np.inf
        for n in self.ordered_nodes():
            if n.disc is None:
                continue
            d = (n.s - s) ** 2 + (n.t - t) ** 2
            if d < dist:
                best, dist = n.disc, d
        return best

    # -- persistence --------------------------------------------------------
    def to_dict(self):
        return {"delta": self.delta, "n_rays": self.n_rays, "n_rings": self.n_rings,
                "settings": {"n_modes": self.settings.n_modes,
                             "n_samples": self.settings.n_samples,
                             "n_taylor": self.settings.n_taylor,
                             "tol_res": self.settings.tol_res,
                             "max_iter": self.settings.max_iter},
                "nodes": [{"ray": n.ray, "ring": n.ring, "s": n.s, "t": n.t,
                           "status": n.status, "note": n.note,
                           "disc": None if n.disc is None else n.disc.to_dict()}
                          for n in self.ordered_nodes()]}

    @classmethod
    def from_dict(cls, d, cmap):
        settings = SolverSettings(**d["settings"])
        g = cls(cmap, float(d["delta"]), int(d["n_rays"]), int(d["n_rings"]), settings)
        for nd in d["nodes"]:
            disc = None
            if nd["disc"] is not None:
                disc = BishopDisc.from_dict(nd["disc"], cmap=cmap, settings=settings)
            g.nodes[(nd["ray"], nd["ring"])] = GridNode(nd["ray"], nd["ring"], nd["s"], nd["t"],
                                                        disc, nd["status"], nd.get("note", ""))
        return g


def _standard_ok(cmap, s, t, settings):
    try:
        r = residual(BoundaryAnsatz.standard(t, s, settings.n_modes), cmap, s, settings)
    except ChartExcursionError:
        return False
    return float(np.max(np.abs(r))) < settings.tol_res


def _solve_at(cmap, s, t, prev, settings, depth=0, max_halvings=MAX_HALVINGS):
    """Solve at (s, t) from the solved disc ``prev``, halving the step on failure.

    Returns (disc, status); raises SolverFailure when the halvings run out.
    """
    if _standard_ok(cmap, s, t, settings):
        return standard_disc(cmap, s, t, settings), "standard"
    seed = prev.ansatz.resized(settings.n_modes).shifted(s - prev.s0, t)
    try:
        return solve_disc(cmap, t, s, seed, settings), "converged"
    except SolverFailure as exc:
        if exc.kind == "resolution":
            return exc.disc, "resolution"
        err = exc
    except ChartExcursionError as exc:
        err = SolverFailure(str(exc))
    if depth >= max_halvings:
        raise err
    sm, tm = 0.5 * (s + prev.s0), 0.5 * (t + prev.t)
    mid, _ = _solve_at(cmap, sm, tm, prev, settings, depth + 1, max_halvings)
    return _solve_at(cmap, s, t, mid, settings, depth + 1, max_halvings)


def _continue_ray(grid, ray, max_halvings):
    out = []
    s, t = grid.param(ray, grid.n_rings)
    prev = standard_disc(grid.cmap, s, t, grid.settings)
    out.append(GridNode(ray, grid.n_rings, s, t, prev, "rim"))
    for ring in range(grid.n_rings - 1, 0, -1):
        s, t = grid.param(ray, ring)
        try:
            disc, status = _solve_at(grid.cmap, s, t, prev, grid.settings,
                                     max_halvings=max_halvings)
        except SolverFailure as exc:
            out.append(GridNode(ray, ring, s, t, None, "failed", str(exc)))
            # the rest of the ray is unreachable from this frontier
            for r2 in range(ring - 1, 0, -1):
                s2, t2 = grid.param(ray, r2)
                out.append(GridNode(ray, r2, s2, t2, None, "failed", "behind frontier"))
            break
        note = f"residual {disc.residual:.2e} above tolerance" if status == "resolution" else ""
        out.append(GridNode(ray, ring, s, t, disc, status, note))
        prev = disc
    return out


def build_moduli_grid(cmap, delta, n_rays=21, n_rings=21, settings=SolverSettings(),
                      threads=1, strict=True, max_halvings=MAX_HALVINGS):
    """Continuation from the rim (exact standard discs) inward along each ray.

    Resolution-limited nodes (collocation system solved, full residual above
    tolerance) are kept and annotated. When a node cannot be reached after
    ``max_halvings`` step halvings the ray stops there; with ``strict`` a
    ContinuationFailure carrying the frontier and the partial grid is raised.
    """
    if not 0.0 < delta < 1.0:
        raise PreconditionError("delta must lie in (0, 1)")
    if n_rays < 3 or n_rings < 1:
        raise PreconditionError("grid needs at least 3 rays and 1 ring")
    cmap.hamiltonian.validate(delta)
    grid = ModuliGrid(cmap, float(delta), int(n_rays), int(n_rings), settings)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rays = list(ex.map(lambda i: _continue_ray(grid, i, max_halvings), range(n_rays)))
    else:
        rays = [_continue_ray(grid, i, max_halvings) for i in range(n_rays)]
    for ray_nodes in rays:
        for n in ray_nodes:
            grid.nodes[n.key] = n
    first = [grid.nodes.get((i, 1)) for i in range(n_rays)]
    first = [n for n in first if n is not None and n.disc is not None]
    if first:
        try:
            disc, status = _solve_at(cmap, 0.0, 0.0, first[0].disc, settings,
                                     max_halvings=max_halvings)
            note = (f"residual {disc.residual:.2e} above tolerance"
                    if status == "resolution" else "")
            grid.nodes[(0, 0)] = GridNode(0, 0, 0.0, 0.0, disc, status, note)
        except SolverFailure as exc:
            grid.nodes[(0, 0)] = GridNode(0, 0, 0.0, 0.0, None, "failed", str(exc))
    else:
        grid.nodes[(0, 0)] = GridNode(0, 0, 0.0, 0.0, None, "failed", "no ring-1 node")
    failed = grid.failures()
    if failed and strict:
        frontier = [(n.ray, n.ring, n.s, n.t) for n in failed if n.note != "behind frontier"]
        exc = ContinuationFailure(f"{len(failed)} grid nodes unreachable", frontier)
        exc.grid = grid
        raise exc
    return grid


# -- interpolation of node data ---------------------------------------------------------

def _hat_weights(f):
    """Linear weights for the stencil (0, 1) at fraction f."""
    return np.stack([1.0 - f, f], axis=-1)


class _NodeInterpolator:
    """Tensor linear interpolation in polar (angle, radius) of the node
    deviations from the standard discs. Deviations vanish wherever the nodes
    are standard, so the interpolant is exactly standard there too. Linear
    weights never overshoot, which keeps the foliation monotone across the
    sharp transitions some families have between rings. The innermost cell
    is a fan from the centre node."""

    def __init__(self, grid):
        if not grid.complete:
            raise PreconditionError("interpolation needs a fully populated grid")
        self.grid = grid
        st = grid.settings
        self.n_taylor = st.n_taylor
        self.n_modes = st.n_modes
        idx = {}
        rows = []
        for k, key in enumerate(grid.keys()):
            n = grid.nodes[key]
            d = n.disc
            tay = d.taylor[:st.n_taylor + 1] - standard_taylor(n.s, n.t, st.n_taylor)
            ans = d.ansatz.resized(st.n_modes)
            sc = ans.s_coef.copy()
            sc[0] -= n.s
            rows.append(np.concatenate([tay.real.ravel(), tay.imag.ravel(), ans.theta_coef, sc]))
            idx[key] = k
        self.values = np.array(rows)
        self.index = idx
        self.trivial = not np.any(self.values)

    def weights(self, s, t):
        g = self.grid
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        p = s.size
        r = np.hypot(s, t)
        a = np.mod(np.arctan2(t, s), 2 * np.pi)
        rr = r / g.ring_step
        j0 = np.clip(np.floor(rr).astype(int), 0, g.n_rings - 1)
        wr = _hat_weights(np.clip(rr - j0, 0.0, 1.0))
        cols, vals, rws = [], [], []
        ang = a / (2 * np.pi / g.n_rays)
        i0 = np.floor(ang).astype(int)
        wa = _hat_weights(ang - i0)
        for m in range(2):
            ring = j0 + m
            for q in range(2):
                ray = np.mod(i0 + q, g.n_rays)
                key_col = np.where(ring == 0, 0, 1 + ray * g.n_rings + (ring - 1))
                cols.append(key_col)
                vals.append(wr[:, m] * wa[:, q])
                rws.append(np.arange(p))
        return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rws),
                                                          np.concatenate(cols))),
                                 shape=(p, len(self.values)))

    def __call__(self, s, t):
        """(taylor (P, n_taylor+1, 2), theta_coef (P, 2N+1), s_coef (P, 2N+1))."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        p = s.size
        nt, nb = self.n_taylor + 1, 2 * self.n_modes + 1
        if self.trivial:
            dev = np.zeros((p, self.values.shape[1]))
        else:
            dev = self.weights(s, t) @ self.values
        tay = (dev[:, :2 * nt] + 1j * dev[:, 2 * nt:4 * nt]).reshape(p, nt, 2)
        tay[:, 0, 1] += s + 1j * t
        tay[:, 1, 0] += disc_factor(s, t)
        th = dev[:, 4 * nt:4 * nt + nb]
        sc = dev[:, 4 * nt + nb:].copy()
        sc[:, 0] += s
        return tay, th, sc


# -- evaluation of the glued filling ---------------------------------------------------

BLEND_INNER = 0.5


def _horner(taylor, z):
    """Per-point Taylor evaluation: taylor (P, K, 2), z (P,) -> (P, 2)."""
    out = np.zeros((z.size, 2), dtype=complex)
    for k in range(taylor.shape[1] - 1, -1, -1):
        out = out * z[:, None] + taylor[:, k]
    return out


def boundary_chart(cmap, t, theta_coef, s_coef, phi):
    """phi(u^t_{sfun}(e^{i thetafun})) at per-point chart coefficients, real (P, 4)."""
    n = (theta_coef.shape[1] - 1) // 2
    B = basis(phi, n)
    th = phi + np.sum(B * theta_coef, axis=1)
    sv = np.sum(B * s_coef, axis=1)
    return cmap.flow(leaf_chart(t, th, sv))


def blended_eval(cmap, taylor, theta_coef, s_coef, t, z):
    """Disc map: Taylor series plus a boundary-layer correction that makes the
    boundary values equal the exact chart trace on the moved sphere:

        u(z) = T(z) + b(|z|) (Gamma(arg z) - T(e^{i arg z})),

    b = 0 for |z| <= 1/2, rising smoothly to 1 at |z| = 1. The correction is the
    holomorphy residual of the discretised disc (zero for standard discs).
    Real (P, 4) output.
    """
    z = np.asarray(z, dtype=complex)
    out = _horner(taylor, z)
    rz = np.abs(z)
    b = smoothstep((rz - BLEND_INNER) / (1.0 - BLEND_INNER))
    live = b > 0
    if np.any(live):
        ph = np.angle(z[live])
        gam = to_complex(boundary_chart(cmap, t[live], theta_coef[live], s_coef[live], ph))
        tb = _horner(taylor[live], np.exp(1j * ph))
        out[live] += b[live, None] * (gam - tb)
    return from_complex(out)


def _check_inputs(z, s, t):
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    z, s, t = np.broadcast_arrays(z, s, t)
    if np.any(np.abs(z) > 1.0 + 1e-12):
        raise DomainError("|z| must be at most 1")
    if np.any(s * s + t * t > 1.0 + 1e-12):
        raise DomainError("(s, t) outside the parameter disc")
    return z.ravel(), s.ravel().copy(), t.ravel().copy()


def filling_eval(grid, z, s, t, exact=False, chunk=4096):
    """Glued filling F(z, s, t) as real (..., 4) points.

    Standard discs for s^2 + t^2 > 1 - delta; otherwise the disc for (s, t),
    from interpolated node data (fast path) or an on-demand warm-started
    solve (``exact=True``).
    """
    shape = np.broadcast_shapes(np.shape(z), np.shape(s), np.shape(t))
    z, s, t = _check_inputs(z, s, t)
    out = np.empty((z.size, 4))
    outer = s * s + t * t > 1.0 - grid.delta
    if np.any(outer):
        out[outer] = standard_disc_eval(s[outer], t[outer], z[outer])
    inner = np.flatnonzero(~outer)
    if exact:
        for k in inner:
            d = grid.disc_exact(s[k], t[k])
            ans = d.ansatz
            out[k] = blended_eval(grid.cmap, d.taylor[None], ans.theta_coef[None],
                                  ans.s_coef[None], np.array([d.t]), z[k:k + 1])[0]
    else:
        interp = grid.interpolator()
        for c in range(0, inner.size, chunk):
            sel = inner[c:c + chunk]
            tay, th, sc = interp(s[sel], t[sel])
            out[sel] = blended_eval(grid.cmap, tay, th, sc, t[sel], z[sel])
    return out.reshape(shape + (4,))


def boundary_eval(grid, theta, s, t, exact=False):
    """f(theta, s, t) = F(e^{i theta}, s, t) on S^3, straight from the chart."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    theta, s, t = [np.ravel(a).astype(float) for a in np.broadcast_arrays(theta, s, t)]
    out = np.empty((theta.size, 4))
    outer = s * s + t * t > 1.0 - grid.delta
    if np.any(outer):
        out[outer] = leaf_chart(t[outer], theta[outer], s[outer])
    inner = np.flatnonzero(~outer)
    if inner.size:
        if exact:
            for k in inner:
                a = grid.disc_exact(s[k], t[k]).ansatz
                out[k] = boundary_chart(grid.cmap, t[k:k + 1], a.theta_coef[None],
                                        a.s_coef[None], theta[k:k + 1])[0]
        else:
            _, th, sc = grid.interpolator()(s[inner], t[inner])
            out[inner] = boundary_chart(grid.cmap, t[inner], th, sc, theta[inner])
    return out


def grid_disc_eval(grid, key, z):
    """Blended evaluation of one node disc at points z."""
    d = grid.nodes[key].disc
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    p = z.size
    a = d.ansatz
    return blended_eval(grid.cmap, np.broadcast_to(d.taylor, (p,) + d.taylor.shape),
                        np.broadcast_to(a.theta_coef, (p, a.theta_coef.size)),
                        np.broadcast_to(a.s_coef, (p, a.s_coef.size)), np.full(p, d.t), z)


# -- structural checks -------------------------------------------------------------------

def rim_agreement(grid, n=64):
    """Sup distance between rim node discs and u^t_s on the closed disc."""
    z = np.concatenate([[0.0], (np.linspace(0.25, 1.0, 4)[:, None]
                                * np.exp(2j * np.pi * np.arange(n) / n)).ravel()])
    worst = 0.0
    for i in range(grid.n_rays):
        node = grid.nodes[(i, grid.n_rings)]
        diff = node.disc(z) - standard_disc_eval(node.s, node.t, z)
        worst = max(worst, float(np.max(np.abs(diff))))
    return worst


def adjacent_jumps(grid, n=64):
    """Max sup-norm difference between neighbouring node discs (ray and ring neighbours)."""
    z = np.exp(2j * np.pi * np.arange(n) / n) * np.linspace(0.2, 1.0, 5)[:, None]
    z = z.ravel()
    vals = {k: grid.nodes[k].disc(z) for k in grid.keys()}
    worst = 0.0
    for i in range(grid.n_rays):
        for j in range(1, grid.n_rings + 1):
            nb = [(i, j - 1) if j > 1 else (0, 0), ((i + 1) % grid.n_rays, j)]
            for k in nb:
                worst = max(worst, float(np.max(np.abs(vals[(i, j)] - vals[k]))))
    return worst


def level_coherence(grid, n=128):
    """max |H~(boundary of u) - t| over node boundaries, via the inverse flow."""
    phi = 2 * np.pi * np.arange(n) / n
    worst = 0.0
    for node in grid.ordered_nodes():
        if node.disc is None:
            continue
        b = node.disc.boundary_trace(phi)
        worst = max(worst, float(np.max(np.abs(grid.cmap.h_tilde(b) - node.t))))
    return worst


def boundary_clearance(grid, n=128):
    """min over node boundaries of s^2 + t^2 distance to U^delta: |z1|^2 - delta > 0."""
    phi = 2 * np.pi * np.arange(n) / n
    worst = np.inf
    for node in grid.ordered_nodes():
        if node.disc is None:
            continue
        b = node.disc.boundary_trace(phi)
        worst = min(worst, float(np.min(b[:, 0] ** 2 + b[:, 1] ** 2)) - grid.delta)
    return worst


def evaluation_map_check(grid, tol_chart=1e-6, fd_step=None):
    """ev_1(u) = u(1) over all nodes.

    (a) injectivity: the Q^delta chart of ev_1(u) returns the node's own (s, t)
        (so ev_1 has the labelling as inverse), and distinct nodes have images
        at distance >= 1e-3 * parameter distance;
    (b) containment in phi(Q^delta): the chart z-coordinate of phi^{-1}(u(1)) is 1;
    (c) non-degeneracy: finite-difference Jacobian of (s, t) -> chart(ev_1) over
        each grid cell has determinant bounded away from 0.
    """
    nodes = [n for n in grid.ordered_nodes() if n.disc is not None]
    params = np.array([[n.s, n.t] for n in nodes])
    ev = np.array([n.disc.boundary_trace(np.array([0.0]))[0] for n in nodes])
    z, s, t = f_st_inverse(grid.cmap.inverse(ev))
    chart = np.stack([s, t], axis=1)
    violations = []
    bad_z = np.flatnonzero(np.abs(z - 1.0) > tol_chart)
    for k in bad_z:
        violations.append({"check": "containment", "node": [nodes[k].ray, nodes[k].ring],
                           "z": [float(z[k].real), float(z[k].imag)]})
    bad_p = np.flatnonzero(np.linalg.norm(chart - params, axis=1) > tol_chart)
    for k in bad_p:
        violations.append({"check": "injectivity", "node": [nodes[k].ray, nodes[k].ring],
                           "chart": chart[k].tolist(), "param": params[k].tolist()})
    dp = np.linalg.norm(params[:, None] - params[None], axis=-1)
    de = np.linalg.norm(ev[:, None] - ev[None], axis=-1)
    off = ~np.eye(len(nodes), dtype=bool)
    ratio = float(np.min(de[off] / dp[off])) if len(nodes) > 1 else np.inf
    if ratio < 1e-3:
        violations.append({"check": "injectivity", "min_ratio": ratio})
    # Jacobian over grid cells: triangles (i, j), (i+1, j), (i, j+1)
    index = {(n.ray, n.ring): k for k, n in enumerate(nodes)}
    dets = []
    for i in range(grid.n_rays):
        for j in range(1, grid.n_rings):
            ks = [index.get((i, j)), index.get(((i + 1) % grid.n_rays, j)), index.get((i, j + 1))]
            if None in ks:
                continue
            P = params[ks[1:]] - params[ks[0]]
            Q = chart[ks[1:]] - chart[ks[0]]
            dets.append(np.linalg.det(np.linalg.solve(P, Q)))
    min_det = float(np.min(dets)) if dets else float("nan")
    if dets and min_det < 0.5:
        violations.append({"check": "nondegeneracy", "min_det": min_det})
    return {"violations": violations, "min_distance_ratio": ratio, "min_jacobian_det": min_det,
            "max_chart_error": float(np.max(np.linalg.norm(chart - params, axis=1))),
            "max_z_error": float(np.max(np.abs(z - 1.0)))}
