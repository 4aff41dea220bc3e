import numpy as np
import pytest

from bishop_fill.intersection import DiscMap
from bishop_fill.moduli import standard_disc
from bishop_fill.verify import (boundary_transversality, disc_samples, energy, energy_bound,
                                interior_energy, marked_residuals, max_principle_check,
                                pairwise_disjointness, verify_disc)


def test_max_principle_standard_closed_form(identity_map):
    d = standard_disc(identity_map, 0.5, 0.0)
    mp = max_principle_check(d, radii=np.array([0.9]))
    assert mp["max_interior_abs"] == pytest.approx(np.sqrt(0.75 * 0.81 + 0.25), abs=1e-14)
    assert mp["passed"]
    # |u|^2 = (1 - s^2 - t^2) r^2 + s^2 + t^2 has Laplacian 4 (1 - s^2 - t^2)
    assert mp["min_laplacian"] == pytest.approx(4 * 0.75, rel=1e-5)
    assert mp["min_radial"] == pytest.approx(2 * 0.75, abs=1e-12)


def test_transversality_standard_formula(identity_map):
    for s, t in ((0.0, 0.0), (0.5, -0.3), (-0.2, 0.7)):
        d = standard_disc(identity_map, s, t)
        assert boundary_transversality(d) == pytest.approx((1 - s * s - t * t) / 2, abs=1e-12)


def test_reversed_loop_pairing_negative(identity_map):
    d = standard_disc(identity_map, 0.2, 0.1)
    # v(z) = u(conj z): i z D(z) must equal d/dphi v = -i conj(z) u'(conj z) on the circle
    rev = DiscMap(lambda z: d.eval_complex(np.conj(z)), False,
                  lambda z: -(np.conj(z) / z)[..., None] * d.deriv(np.conj(z)))
    assert boundary_transversality(rev) < 0


def test_constant_map_fails_transversality():
    const = DiscMap(lambda z: np.stack([0 * z + 0.5, 0 * z], -1), True,
                    lambda z: np.zeros(np.shape(z) + (2,), complex))
    assert not boundary_transversality(const) > 0


def test_energy_examples(identity_map):
    assert energy(standard_disc(identity_map, 0.6, 0.0)) == pytest.approx(0.64 * np.pi, abs=1e-10)
    delta = 0.2
    for a in np.linspace(0, 2 * np.pi, 5)[:-1]:
        r = np.sqrt(1 - delta)
        d = standard_disc(identity_map, r * np.cos(a), r * np.sin(a))
        assert energy(d) == pytest.approx(np.pi * delta, abs=1e-10)
    assert energy_bound(1.05) == pytest.approx(4.2 * np.pi)


def test_energy_stokes_consistency(identity_map, ref_grid):
    discs = [standard_disc(identity_map, 0.3, -0.4)]
    discs += [ref_grid.nodes[k].disc for k in ((0, 0), (3, 5), (10, 12), (17, 20))]
    for d in discs:
        assert interior_energy(d) == pytest.approx(energy(d), abs=1e-6)


def test_reference_grid_node_checks(ref_map, ref_grid):
    C = ref_map.energy_constant
    energies = []
    for n in ref_grid.ordered_nodes():
        rec = verify_disc(n.disc, C, f"{n.ray},{n.ring}")
        v = rec.verdicts()
        assert v["max_principle"] and v["transversality"] and v["energy"]
        assert v["marked"] and v["maslov"]
        assert np.all(marked_residuals(n.disc) <= 1e-9)
        energies.append(rec.energy)
    assert max(energies) < energy_bound(C)


def test_verdicts_reproducible_from_scalars(ref_map, ref_grid):
    rec = verify_disc(ref_grid.nodes[(4, 7)].disc, ref_map.energy_constant, "4,7")
    d = rec.to_dict()
    from bishop_fill.verify import VerificationRecord
    assert VerificationRecord(**d).verdicts() == rec.verdicts()
    # the residual verdict follows the stored residual
    assert rec.verdicts(tol_res=10 * rec.residual + 1e-300)["residual"]


def test_identity_disjointness_constant(identity_map):
    # second coordinate of u^t_s is constant s + it, so C1 >= 1
    rng = np.random.default_rng(0)
    st = rng.uniform(-0.6, 0.6, size=(12, 2))
    discs = [standard_disc(identity_map, s, t) for s, t in st]
    samples = [disc_samples(d) for d in discs]
    ratios = []
    for i in range(len(discs)):
        for j in range(i + 1, len(discs)):
            dist = np.min(np.linalg.norm(samples[i][:, None] - samples[j][None], axis=-1))
            ratios.append(dist / np.linalg.norm(st[i] - st[j]))
    assert min(ratios) >= 1.0 - 1e-12
    ok, viol = pairwise_disjointness([(s, t, d) for (s, t), d in zip(st, discs)])
    assert ok and viol == []


def test_identity_grid_disjoint(identity_grid):
    ok, viol = pairwise_disjointness(identity_grid.node_list())
    assert ok


def test_duplicated_disc_flagged(identity_map):
    d = standard_disc(identity_map, 0.1, 0.2)
    other = standard_disc(identity_map, -0.3, 0.2)
    ok, viol = pairwise_disjointness([(0.1, 0.2, d), (-0.3, 0.2, other), (0.4, 0.2, d)])
    assert not ok
    assert viol[0]["nodes"] == [0, 2] and viol[0]["distance"] == 0.0
