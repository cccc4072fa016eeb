import numpy as np
import pytest

from softrigid.objective import (al_term, augmented_lagrangian, binarization_constraints, center_of_mass,
                                 deviation_penalties, locomotion_distance)

BOUNDS = dict(soft=0.0125, act=0.0025, bone_total=0.0125)
ZERO = dict(soft=0.0, bone=0.0, act=0.0, Nbone=0.0)
ONE = dict(soft=1.0, bone=1.0, act=1.0, Nbone=1.0)
OFF = dict(soft=False, bone=False, act=False, Nbone=False)


def test_translation_and_lateral_motion():
    assert locomotion_distance([0.1, 0.2, 0.3], [0.15, 0.2, 0.3]) == pytest.approx(0.05)
    assert locomotion_distance([0.1, 0.2, 0.3], [0.1, 0.5, 0.1]) == 0.0


def test_center_of_mass_includes_nodes():
    cg = center_of_mass([[0, 0, 0]], [1.0], [[1.0, 0, 0]], [3.0])
    np.testing.assert_allclose(cg, [0.75, 0, 0])


def test_rigid_x_translation_has_no_deviation(rng):
    xp, xn = rng.random((20, 3)), rng.random((5, 3))
    mp, mn = rng.random(20), rng.random(5)
    sh = np.array([0.03, 0.0, 0.0])
    np.testing.assert_allclose(deviation_penalties(xp, xp + sh, mp, xn, xn + sh, mn), 0.0, atol=1e-14)


def test_lateral_translation_deviation(rng):
    xp, xn = rng.random((20, 3)), rng.random((5, 3))
    sh = np.array([0.0, 0.01, 0.0])
    Ds, Db = deviation_penalties(xp, xp + sh, rng.random(20), xn, xn + sh, rng.random(5))
    assert Ds == pytest.approx(0.01, rel=1e-12) and Db == pytest.approx(0.01, rel=1e-12)


def test_single_displaced_particle_brute_force():
    n, delta = 10, 0.004
    xp = np.arange(n * 3, dtype=float).reshape(n, 3) * 0.01
    xe = xp.copy()
    xe[3, 0] += delta
    mp = np.ones(n)
    Ds, _ = deviation_penalties(xp, xe, mp, np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0))
    # direct evaluation of the definition
    dcg = delta / n
    res = [abs((xe[i, 0] - xp[i, 0]) - dcg) for i in range(n)]
    assert Ds == pytest.approx(sum(res) / n, rel=1e-12)


def test_binary_designs_satisfy_constraints():
    phi_hat = np.array([0.0, 1.0, 1.0, 0.0])
    gamma = np.r_[np.ones(40), np.zeros(140)]
    w = np.array([[0, 1, 1, 0]], dtype=float)
    Cs, Cb, Ca, Cn = binarization_constraints(phi_hat, gamma, w, BOUNDS, 180, 40)
    assert Cs == -0.0125 and Ca == -0.0025
    assert Cb == pytest.approx(-0.0125 / 180, rel=1e-12)
    assert Cn == pytest.approx(0.0, abs=1e-15)


def test_half_density_soft_constraint():
    Cs, *_ = binarization_constraints(np.full(10, 0.5), np.zeros(2), np.zeros((1, 2)), BOUNDS)
    assert Cs == pytest.approx(0.2375, abs=1e-15)


def test_one_half_dense_bar_violates_bone_bound():
    gamma = np.r_[0.5, np.zeros(179)]
    _, Cb, _, _ = binarization_constraints(np.zeros(1), gamma, np.zeros((1, 1)), BOUNDS, 180)
    assert Cb > 0


def test_plain_locomotion_term():
    total, loco, _, _ = augmented_lagrangian(0.02, 0.0, 0.0, ZERO, ZERO, ONE, OFF)
    assert total == -0.02 and loco == -0.02


def test_soft_deviation_halves_locomotion():
    _, loco, _, _ = augmented_lagrangian(0.02, 0.005, 0.0, ZERO, ZERO, ONE, OFF)
    assert loco == -0.01


def test_penalty_value():
    v, g = al_term(0.1, 0.0, 10.0)
    assert v == pytest.approx(0.05, rel=1e-14) and g == pytest.approx(1.0)


def test_gated_constraint_excluded():
    C = dict(soft=0.2, bone=0.0, act=0.0, Nbone=0.0)
    act = dict(soft=False, bone=True, act=True, Nbone=True)
    total, _, terms, d = augmented_lagrangian(0.0, 0.0, 0.0, C, ZERO, ONE, act)
    assert terms["soft"] == 0.0 and d["C"]["soft"] == 0.0 and total == 0.0


def test_partials_match_finite_differences():
    C = dict(soft=0.05, bone=-0.01, act=0.002, Nbone=0.1)
    lam = dict(soft=-0.3, bone=-0.2, act=0.0, Nbone=-1.0)
    sig = dict(soft=2.0, bone=4.0, act=1.0, Nbone=8.0)
    on = dict(soft=True, bone=True, act=True, Nbone=True)
    args = [0.012, 0.003, 0.007]
    _, _, _, d = augmented_lagrangian(*args, C, lam, sig, on)
    h = 1e-7
    for i, name in enumerate(("L_x", "D_soft", "D_bone")):
        p, m = list(args), list(args)
        p[i] += h
        m[i] -= h
        num = (augmented_lagrangian(*p, C, lam, sig, on)[0] - augmented_lagrangian(*m, C, lam, sig, on)[0]) / (2 * h)
        assert d[name] == pytest.approx(num, rel=1e-6)
