"""Command-line driver: bishop-fill {gen-phi,solve,verify,extend,intersect-demo,plot}.

Exit codes: 0 no violations, 1 violations or solver failures, 2 usage or
configuration errors.
"""
import argparse
import csv
import json
import os
import re
import sys

import numpy as np

from .errors import BishopFillError, ContinuationFailure, ValidationError

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2

CSV_COLUMNS = ("ray", "ring", "s", "t", "residual", "energy", "maslov", "min_pairing")

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["delta"],
    "additionalProperties": False,
    "properties": {
        "delta": {"type": "number", "exclusiveMinimum": 0.05, "exclusiveMaximum": 0.9},
        "hamiltonian": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "flow_time": {"type": "number"},
                "steps": {"type": "integer", "minimum": 1},
                "bumps": {"type": "array", "items": {
                    "type": "object",
                    "required": ["center", "radius", "amplitude"],
                    "additionalProperties": False,
                    "properties": {
                        "center": {"type": "array", "items": {"type": "number"},
                                   "minItems": 4, "maxItems": 4},
                        "radius": {"type": "number", "exclusiveMinimum": 0},
                        "amplitude": {"type": "number"}}}}}},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_modes": {"type": "integer", "minimum": 2},
                "n_samples": {"type": "integer", "minimum": 16},
                "n_taylor": {"type": "integer", "minimum": 1},
                "tol_res": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1}}},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n_rays": {"type": "integer", "minimum": 3},
                           "n_rings": {"type": "integer", "minimum": 1}}},
        "collar": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"epsilon": {"type": "number", "exclusiveMinimum": 0,
                                       "exclusiveMaximum": 1}}},
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n_scan": {"type": "integer", "minimum": 8}}},
        "extension": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"samples": {"type": "integer", "minimum": 1},
                           "export": {"type": "integer", "minimum": 0}}},
        "output": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
    },
}

DEFAULTS = {
    "hamiltonian": {"bumps": [], "flow_time": 1.0, "steps": 200},
    "solver": {"n_modes": 32, "n_samples": 256, "n_taylor": 64, "tol_res": 1e-9, "max_iter": 50},
    "grid": {"n_rays": 21, "n_rings": 21},
    "collar": {"epsilon": 0.1},
    "verify": {"n_scan": 64},
    "extension": {"samples": 10000, "export": 1000},
    "output": "out",
    "seed": 0,
}


class UsageError(BishopFillError):
    pass


class GridFileError(BishopFillError):
    """A grid file that exists but cannot be read back (exit 1)."""


# -- configuration --------------------------------------------------------------------

def _line_of(text, path):
    """Best-effort line number of the JSON element at ``path`` (keys and indices)."""
    pos = 0
    for part in path:
        if isinstance(part, str):
            m = re.compile(r'"%s"\s*:' % re.escape(part)).search(text, pos)
            if m is None:
                break
            pos = m.end()
        else:
            # skip to the part-th element of the array starting after pos
            depth, count, i = 0, 0, text.find("[", pos)
            if i < 0:
                break
            i += 1
            while i < len(text) and count < part:
                c = text[i]
                if c in "[{":
                    depth += 1
                elif c in "]}":
                    depth -= 1
                elif c == "," and depth == 0:
                    count += 1
                i += 1
            while i < len(text) and text[i].isspace():
                i += 1
            pos = i
    return text.count("\n", 0, pos) + 1


def load_config(path):
    """Parse, schema-check and complete a run configuration."""
    import jsonschema

    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    errors = sorted(jsonschema.Draft7Validator(CONFIG_SCHEMA).iter_errors(raw),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        msgs = [f"{path}:{_line_of(text, list(e.absolute_path))}: "
                f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ValidationError("\n".join(msgs))
    cfg = json.loads(json.dumps(DEFAULTS))
    for k, v in raw.items():
        if isinstance(v, dict):
            cfg[k].update(v)
        else:
            cfg[k] = v
    cmap = contact_map(cfg)
    try:
        cmap.hamiltonian.validate(cfg["delta"])
    except ValidationError as exc:
        m = re.search(r"bump (\d+)", str(exc))
        line = _line_of(text, ["hamiltonian", "bumps", int(m.group(1))]) if m else 1
        raise ValidationError(f"{path}:{line}: {exc}") from exc
    from .disc_solver import SolverSettings
    try:
        SolverSettings(**cfg["solver"])
    except BishopFillError as exc:
        raise ValidationError(f"{path}:{_line_of(text, ['solver'])}: solver: {exc}") from exc
    cfg["_text"] = text
    return cfg


def contact_map(cfg):
    from .contactomorphism import ContactHamiltonian, ContactMap
    h = cfg["hamiltonian"]
    return ContactMap(ContactHamiltonian.from_dict(h), steps=int(h.get("steps", 200)))


def settings_of(cfg):
    from .disc_solver import SolverSettings
    return SolverSettings(**cfg["solver"])


# -- output helpers -----------------------------------------------------------------

def _dump_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_summary_csv(path, grid):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for node in grid.ordered_nodes():
            row = node.summary()
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])


def _threads(args):
    if args.threads:
        return args.threads
    env = os.environ.get("BISHOP_FILL_THREADS", "")
    return int(env) if env.isdigit() and int(env) > 0 else 1


def _outdir(args, cfg):
    out = args.out or cfg["output"]
    os.makedirs(out, exist_ok=True)
    return out


def load_grid(out, cfg):
    from .moduli import ModuliGrid
    path = os.path.join(out, "grid.json")
    if not os.path.exists(path):
        raise UsageError(f"no grid at {path}; run 'solve' first")
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GridFileError(f"{path}: unreadable grid file: {exc}") from exc
    try:
        grid = ModuliGrid.from_dict(data, contact_map(cfg))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise GridFileError(f"{path}: malformed grid file: {exc!r}") from exc
    if not grid.nodes:
        raise UsageError(f"{path}: grid has no nodes")
    return grid


# -- commands ---------------------------------------------------------------------------

def cmd_gen_phi(cfg, args):
    from .contactomorphism import contact_residual, hopf_grid, max_conformal_factor
    from .s3geometry import xi_frame
    from .standard_filling import standard_disc_eval

    cmap = contact_map(cfg)
    out = _outdir(args, cfg)
    pts = hopf_grid(24)
    f = cmap.conformal_factor(pts)
    fmax = max_conformal_factor(cmap)
    C = 1.05 * fmax
    # fixed region: a sample of the closed neighbourhood of K (s^2 + t^2 >= 1 - delta)
    rng = np.random.default_rng(args.seed if args.seed is not None else cfg["seed"])
    ang = rng.uniform(0, 2 * np.pi, (2000, 2))
    rr = np.sqrt(rng.uniform(1.0 - cfg["delta"], 1.0, 2000))
    zz = np.sqrt(rng.uniform(0, 1, 2000)) * np.exp(1j * ang[:, 0])
    s, t = rr * np.cos(ang[:, 1]), rr * np.sin(ang[:, 1])
    near_k = standard_disc_eval(s * 0.999999, t * 0.999999, zz / np.maximum(1, np.abs(zz)))
    near_k /= np.linalg.norm(near_k, axis=1, keepdims=True)
    keep = near_k[:, 0] ** 2 + near_k[:, 1] ** 2 <= cfg["delta"]
    fixed_res = float(np.max(np.abs(cmap.flow(near_k[keep]) - near_k[keep]))) if keep.any() else 0.0
    e1, _ = xi_frame(pts)
    cres = float(np.max(contact_residual(cmap, pts, e1)))
    summary = {"C": C, "max_conformal_factor": fmax,
               "conformal_factor": {"min": float(f.min()), "max": float(f.max()),
                                    "mean": float(f.mean())},
               "fixed_region_residual": fixed_res, "contact_residual": cres,
               "identity": bool(cmap.is_identity), "hamiltonian": cmap.hamiltonian.to_dict()}
    _dump_json(os.path.join(out, "phi.json"), summary)
    print(f"C = {C:.10g}  (max f = {fmax:.10g})")
    return EXIT_OK if fixed_res <= 1e-12 else EXIT_VIOLATION


def cmd_solve(cfg, args):
    from .moduli import build_moduli_grid

    cmap = contact_map(cfg)
    out = _outdir(args, cfg)
    g = cfg["grid"]
    settings = settings_of(cfg)
    frontier = []
    try:
        grid = build_moduli_grid(cmap, cfg["delta"], g["n_rays"], g["n_rings"], settings,
                                 threads=_threads(args))
    except ContinuationFailure as exc:
        grid, frontier = exc.grid, exc.frontier
    data = grid.to_dict()
    data["frontier"] = [list(f) for f in frontier]
    _dump_json(os.path.join(out, "grid.json"), data)
    write_summary_csv(os.path.join(out, "grid_summary.csv"), grid)
    failed = [n for n in grid.ordered_nodes() if n.disc is None]
    over = [n for n in grid.ordered_nodes()
            if n.disc is not None and not n.disc.residual <= settings.tol_res]
    print(f"{len(grid.nodes)} nodes: {len(failed)} failed, {len(over)} above tolerance "
          f"{settings.tol_res:g}")
    for n in failed[:20]:
        print(f"  failed node ray={n.ray} ring={n.ring}: {n.note}")
    return EXIT_OK if not failed and not over else EXIT_VIOLATION


def verify_grid(grid, cfg, n_scan=None):
    """Per-node records plus grid-wide checks; returns (report dict, violation list)."""
    from .disc_solver import residual as holo_residual
    from .intersection import adjunction_defect, disc_maslov_index
    from .moduli import evaluation_map_check, rim_agreement, standard_disc
    from .verify import pairwise_disjointness, verify_disc

    n_scan = n_scan or cfg["verify"]["n_scan"]
    settings = grid.settings
    C = grid.cmap.energy_constant
    records, violations = [], []
    R2 = 1.0 - grid.delta
    phi = 2 * np.pi * np.arange(settings.n_samples) / settings.n_samples
    for node in grid.ordered_nodes():
        tag = f"{node.ray}:{node.ring}"
        if node.disc is None:
            violations.append({"node": tag, "check": "solved", "detail": node.note})
            continue
        d = node.disc
        # recompute everything from the stored coefficients
        d.residual = float(np.max(np.abs(holo_residual(d.ansatz, grid.cmap, d.s0, settings))))
        d.maslov = disc_maslov_index(d)
        rec = verify_disc(d, C, tag)
        trace = d.boundary_trace(phi)
        rec.notes.append(f"trace_mismatch={float(np.max(np.abs(d(np.exp(1j * phi)) - trace))):.3e}")
        # partner: the standard disc of the glued filling at the same level, inside V^delta
        sp = -np.copysign(np.sqrt(R2 + 0.5 * grid.delta - d.t ** 2), d.s0 if d.s0 else 1.0)
        adj = adjunction_defect(d, standard_disc(grid.cmap, sp, d.t, settings), n_scan=n_scan)
        rec.embedded = bool(adj.embedded)
        rec.notes.append(f"AA={adj.self_intersection} mu={adj.maslov} D={adj.defect}")
        if (adj.self_intersection, adj.defect) != (0, 0):
            violations.append({"node": tag, "check": "adjunction",
                               "detail": rec.notes[-1]})
        records.append(rec)
        for k, ok in rec.verdicts(settings.tol_res).items():
            if not ok:
                violations.append({"node": tag, "check": k})
    ok, bad = pairwise_disjointness(grid.node_list())
    for b in bad:
        violations.append({"check": "disjoint", "nodes": b["nodes"], "distance": b["distance"]})
    ev = evaluation_map_check(grid) if grid.complete else {"violations": []}
    violations.extend({**v, "check": "evaluation_map", "kind": v["check"]}
                      for v in ev["violations"])
    report = {"C": C, "energy_bound": 4 * np.pi * C, "records": [r.to_dict() for r in records],
              "disjoint": ok, "evaluation_map": {k: v for k, v in ev.items() if k != "violations"},
              "rim_agreement": rim_agreement(grid) if grid.complete else None,
              "violations": violations}
    return report, violations


def cmd_verify(cfg, args):
    out = _outdir(args, cfg)
    grid = load_grid(out, cfg)
    report, violations = verify_grid(grid, cfg)
    _dump_json(os.path.join(out, "verify.json"), report)
    counts = {}
    for v in violations:
        counts[v["check"]] = counts.get(v["check"], 0) + 1
    print(f"{len(report['records'])} discs checked, {len(violations)} violations "
          + (str(dict(sorted(counts.items()))) if counts else ""))
    return EXIT_OK if not violations else EXIT_VIOLATION


def cmd_extend(cfg, args):
    from .extension import ExtensionMap, jacobian_check

    out = _outdir(args, cfg)
    grid = load_grid(out, cfg)
    if not grid.complete:
        raise UsageError("extension needs a fully populated grid")
    seed = args.seed if args.seed is not None else cfg["seed"]
    ext = ExtensionMap(grid, cfg["collar"]["epsilon"])
    rng = np.random.default_rng(seed)
    y = rng.normal(size=(4096, 4))
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    bdry = float(np.max(np.abs(ext(y) - grid.cmap.flow(y))))
    jc = jacobian_check(ext, cfg["extension"]["samples"], seed=seed)
    n_exp = cfg["extension"]["export"]
    x = jc["points"][:n_exp]
    fx = ext(x)
    with open(os.path.join(out, "extension_samples.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "y1", "x2", "y2", "X1", "Y1", "X2", "Y2"])
        for a, b in zip(x, fx):
            w.writerow([_fmt(v) for v in (*a, *b)])
    report = {"boundary_error": bdry, "min_chi_slope": ext.chimap.min_slope(),
              **{k: v for k, v in jc.items() if k not in ("points", "det")}}
    _dump_json(os.path.join(out, "extension.json"), report)
    print(f"|Phi - phi| on S^3: {bdry:.3e}; min det: {jc['min_det']:.6g} "
          f"({jc['n_negative']} non-positive)")
    ok = bdry <= 1e-7 and jc["n_negative"] == 0 and report["min_chi_slope"] > 0
    return EXIT_OK if ok else EXIT_VIOLATION


def intersection_zoo():
    from .intersection import (LocalDisc, find_intersections, intersection_number,
                               with_multiplicities)

    u1 = LocalDisc([0, 1], [0])
    eps = 0.1
    cases = {
        "(z,0) vs (z,z^3)": (u1, LocalDisc([0, 1], [0, 0, 0, 1])),
        "(z,0) vs (z,z^3-eps^3)": (u1, LocalDisc([0, 1], [-eps ** 3, 0, 0, 1])),
        "(z,0) vs (z,z)": (u1, LocalDisc([0, 1], [0, 1])),
        "(z,0) vs (z,-z)": (u1, LocalDisc([0, 1], [0, -1])),
    }
    out = {}
    for name, (u1, u2) in cases.items():
        recs = with_multiplicities(u1, u2, find_intersections(u1, u2))
        out[name] = {
            "number": intersection_number(u1, u2, recs),
            "points": [{"z1": [r.z1.real, r.z1.imag], "kind": r.kind,
                        "tangential": bool(r.tangential), "multiplicity": int(r.multiplicity)}
                       for r in recs]}
    return out


def cmd_intersect_demo(cfg, args):
    report = intersection_zoo()
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _dump_json(os.path.join(args.out, "intersect_demo.json"), report)
    for name, r in report.items():
        parts = " + ".join(f"{'2*' if p['kind'] == 'interior' else ''}{p['multiplicity']}"
                           for p in r["points"])
        print(f"{name}: {r['number']}  ({parts or 'empty'})")
    expected = {"(z,0) vs (z,z^3)": 3, "(z,0) vs (z,z^3-eps^3)": 3, "(z,0) vs (z,z)": 1,
                "(z,0) vs (z,-z)": 1}
    return EXIT_OK if all(report[k]["number"] == v for k, v in expected.items()) else \
        EXIT_VIOLATION


def cmd_plot(cfg, args):
    out = _outdir(args, cfg)
    grid = load_grid(out, cfg)
    if not any(n.disc is not None for n in grid.ordered_nodes()):
        raise UsageError("grid has no solved nodes to plot")
    from .plots import plot_all
    for path in plot_all(grid, out):
        print(path)
    return EXIT_OK


COMMANDS = {"gen-phi": cmd_gen_phi, "solve": cmd_solve, "verify": cmd_verify,
            "extend": cmd_extend, "intersect-demo": cmd_intersect_demo, "plot": cmd_plot}


def build_parser():
    p = argparse.ArgumentParser(prog="bishop-fill", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $BISHOP_FILL_THREADS or 1)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the config)")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "intersect-demo" and not args.config:
            cfg = json.loads(json.dumps(DEFAULTS))
            cfg["delta"] = 0.2
        else:
            if not args.config:
                raise UsageError(f"{args.command} needs --config")
            cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (UsageError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BishopFillError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
