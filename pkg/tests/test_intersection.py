import numpy as np
import pytest

from bishop_fill.disc_solver import solve_disc
from bishop_fill.errors import (InsufficientDataError, NotNicelyIntersectingError,
                                PreconditionError, TotallyRealViolation)
from bishop_fill.intersection import (DiscMap, IntersectionRecord, LocalDisc, adjunction_defect,
                                      boundary_multiplicity, critical_point_contribution,
                                      disc_maslov_index, find_intersections,
                                      find_self_intersections, interior_multiplicity,
                                      intersection_number, maslov_index_frame, maslov_rank1,
                                      min_derivative, standard_frame, with_multiplicities)
from bishop_fill.moduli import standard_disc
from bishop_fill.standard_filling import standard_disc_eval

U1 = LocalDisc([0, 1], [0])
EPS = 0.1


def records(u1, u2):
    return with_multiplicities(u1, u2, find_intersections(u1, u2))


def standard_as_disc(s, t):
    return DiscMap(lambda z: standard_disc_eval(s, t, z)[..., 0::2]
                   + 1j * standard_disc_eval(s, t, z)[..., 1::2])


def cutoff_perturbation(coef, eps=0.05, support=0.8):
    """Smooth, non-holomorphic, real on the real axis, vanishing for |z| >= support."""
    a, b, c, d = coef

    def p(z):
        z = np.asarray(z, dtype=complex)
        r = np.abs(z) / support
        chi = np.where(r < 1.0, np.exp(1.0 - 1.0 / np.maximum(1.0 - r * r, 1e-300)), 0.0)
        return eps * chi * (a + b * z + c * np.conj(z) + d * np.abs(z) ** 2)
    return p


def test_local_model_requires_real_coefficients():
    with pytest.raises(PreconditionError):
        LocalDisc([0, 1j], [0])
    with pytest.raises(PreconditionError):
        find_intersections(U1, "not a disc")


def test_transverse_boundary_record():
    recs = records(U1, LocalDisc([0, 1], [0, 1]))
    assert len(recs) == 1
    r = recs[0]
    assert r.kind == "boundary" and not r.tangential and r.multiplicity == 1
    assert abs(r.z1) < 1e-7 and abs(r.z2) < 1e-7


def test_tangential_boundary_record_z3():
    recs = records(U1, LocalDisc([0, 1], [0, 0, 0, 1]))
    assert len(recs) == 1
    assert recs[0].kind == "boundary" and recs[0].tangential
    assert recs[0].multiplicity == 3
    assert intersection_number(U1, LocalDisc([0, 1], [0, 0, 0, 1])) == 3


def test_perturbed_z3():
    u2 = LocalDisc([0, 1], [-EPS ** 3, 0, 0, 1])
    recs = records(U1, u2)
    kinds = sorted((r.kind, r.multiplicity, r.tangential) for r in recs)
    assert kinds == [("boundary", 1, False), ("interior", 1, False)]
    b = next(r for r in recs if r.kind == "boundary")
    i = next(r for r in recs if r.kind == "interior")
    assert abs(b.z1 - EPS) < 1e-9
    assert abs(i.z1 - EPS * np.exp(2j * np.pi / 3)) < 1e-9
    assert intersection_number(U1, u2, recs) == 3


def test_boundary_multiplicity_examples():
    for b, m in (([0, 1], 1), ([0, 0, 0, 1], 3), ([0, 0, 1], 2)):
        u2 = LocalDisc([0, 1], b)
        rec = IntersectionRecord(0j, 0j, "boundary", len(b) > 2)
        assert boundary_multiplicity(U1, u2, rec) == m
    with pytest.raises(PreconditionError):
        boundary_multiplicity(U1, U1, IntersectionRecord(0.5j, 0.5j, "interior", False))


def test_interior_multiplicity_examples():
    c = 0.5j
    # (z, z - c) on the disc model: one transverse interior point
    lin = DiscMap(lambda z: np.stack([z, z - c], -1), True,
                  lambda z: np.stack([np.ones_like(z), np.ones_like(z)], -1))
    flat = DiscMap(lambda z: np.stack([z, 0 * z], -1), True,
                   lambda z: np.stack([np.ones_like(z), 0 * z], -1))
    assert interior_multiplicity(flat, lin, IntersectionRecord(c, c, "interior", False)) == 1
    # (z, (z - c)^2): degree 2 (two simple zeros after perturbation)
    sq = DiscMap(lambda z: np.stack([z, (z - c) ** 2], -1), True,
                 lambda z: np.stack([np.ones_like(z), 2 * (z - c)], -1))
    assert interior_multiplicity(flat, sq, IntersectionRecord(c, c, "interior", False)) == 2
    recs = records(flat, sq)
    assert len(recs) == 1 and recs[0].multiplicity == 2
    assert intersection_number(flat, sq) == 4
    # orientation reversal (conjugated second coordinate) gives -1
    rev = DiscMap(lambda z: np.stack([z, np.conj(z - c)], -1), False)
    assert interior_multiplicity(flat, rev, IntersectionRecord(c, c, "interior", False)) == -1


def test_perturbation_oracle_for_double_zero():
    # perturb (z - c)^2 by a small constant: two simple interior zeros
    c = 0.5j
    flat = DiscMap(lambda z: np.stack([z, 0 * z], -1), True,
                   lambda z: np.stack([np.ones_like(z), 0 * z], -1))
    pert = DiscMap(lambda z: np.stack([z, (z - c) ** 2 - 1e-3], -1), True,
                   lambda z: np.stack([np.ones_like(z), 2 * (z - c)], -1))
    recs = records(flat, pert)
    assert len(recs) == 2 and all(r.multiplicity == 1 for r in recs)


def test_disjoint_standard_discs():
    u, v = standard_as_disc(0.3, 0.0), standard_as_disc(0.6, 0.0)
    assert find_intersections(u, v) == []
    assert intersection_number(u, v) == 0


def test_identical_discs_not_nicely_intersecting():
    u = LocalDisc([0, 1], [0, 1])
    with pytest.raises(NotNicelyIntersectingError):
        find_intersections(u, LocalDisc([0, 1], [0, 1]))


def test_homotopy_invariance():
    rng = np.random.default_rng(7)
    u2 = LocalDisc([0, 1], [0, 0, 0, 1])
    base = intersection_number(U1, u2)
    for _ in range(100):
        p = cutoff_perturbation(rng.normal(size=4))
        assert intersection_number(U1, LocalDisc([0, 1], [0, 0, 0, 1], perturbation=p)) == base


def test_positivity():
    cases = [LocalDisc([0, 1], b) for b in ([0, 1], [0, 0, 1], [0, 0, 0, 1], [-EPS ** 3, 0, 0, 1],
                                            [-0.01, 0, 1], [0.0, -1])]
    for u2 in cases:
        recs = records(U1, u2)
        assert all(r.multiplicity >= 1 for r in recs)
        lower = 2 * sum(r.kind == "interior" for r in recs) + sum(r.kind == "boundary" for r in recs)
        n = intersection_number(U1, u2, recs)
        assert n >= lower
        assert (n == lower) == (not any(r.tangential for r in recs))


def test_maslov_frame_examples():
    phi = 2 * np.pi * np.arange(512) / 512
    e1 = np.stack([1j * np.exp(1j * phi), 0 * phi], -1)
    e2 = np.stack([0 * phi, np.ones_like(phi)], -1).astype(complex)
    assert maslov_index_frame(e1, e2) == 2
    assert maslov_index_frame(np.tile([1, 0], (512, 1)), np.tile([0, 1], (512, 1))) == 0
    for s, t in ((0.0, 0.0), (0.5, -0.3), (-0.2, 0.7)):
        assert maslov_index_frame(standard_frame(s, t)) == 2
    with pytest.raises(TotallyRealViolation):
        maslov_index_frame(e1, e1)
    with pytest.raises(PreconditionError):
        maslov_index_frame(e1[:100], e2[:100])


def test_maslov_of_solved_discs(identity_map, ref_map):
    assert disc_maslov_index(solve_disc(identity_map, 0.2, 0.1)) == 2
    from bishop_fill.disc_solver import solve_disc_best
    assert disc_maslov_index(solve_disc_best(ref_map, 0.1, -0.2)) == 2


def test_maslov_rank1_examples():
    assert maslov_rank1(lambda z: z - 0.3 + 0.2j) == 2
    assert maslov_rank1(lambda z: np.ones_like(z)) == 0
    # z^2 - 1 is real along the line field spanned by i e^{i phi}, zeros at +-1
    line = lambda phi: 1j * np.exp(1j * phi)  # noqa: E731
    assert maslov_rank1(lambda z: z * z - 1, line=line) == 2


def test_adjunction_standard_discs(identity_map):
    d = standard_disc(identity_map, 0.3, 0.1)
    partner = standard_disc(identity_map, -0.5, 0.1)
    rep = adjunction_defect(d, partner, n_scan=64)
    assert (rep.self_intersection, rep.maslov, rep.defect) == (0, 2, 0)
    assert rep.embedded and rep.min_derivative > 1e-6
    with pytest.raises(InsufficientDataError):
        adjunction_defect(d)
    with pytest.raises(InsufficientDataError):
        adjunction_defect(d, standard_disc(identity_map, -0.5, 0.2))


def test_adjunction_local_model_arithmetic():
    u = LocalDisc([0, 1], [0], self_intersection=1 * 2, maslov=2)
    assert adjunction_defect(u).defect == 2
    with pytest.raises(InsufficientDataError):
        adjunction_defect(LocalDisc([0, 1], [0]))


def test_linking_number_zero_distinct_levels(identity_map, ref_map):
    from bishop_fill.disc_solver import solve_disc_best
    a = solve_disc_best(ref_map, 0.1, 0.0)
    b = solve_disc_best(ref_map, -0.2, 0.1)
    assert intersection_number(a, b, n_scan=64) == 0


def test_critical_point_sanity():
    val, recs = critical_point_contribution()
    assert val >= 4
    assert find_self_intersections(LocalDisc([0, 1], [0, 0, 1]), 64) == []


def test_solved_discs_have_no_critical_points(ref_map):
    from bishop_fill.disc_solver import solve_disc_best
    assert min_derivative(solve_disc_best(ref_map, 0.0, 0.3)) > 1e-6
