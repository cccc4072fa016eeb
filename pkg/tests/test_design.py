import numpy as np
import pytest
from mpmath import mp, mpf

from softrigid.design import (DesignVariables, bone_interpolation, bone_interpolation_grad, enforce_symmetry,
                              filter_density, filter_matrix, project_density, simp_soft, simp_value, symmetrize)
from softrigid.mpm import SoftMaterial


def test_filter_uniform_field_unchanged(rng):
    pts = rng.random((200, 3)) * 0.05
    H = filter_matrix(pts, 0.02, 3.0)
    out = filter_density(np.full(200, 0.37), H)
    np.testing.assert_allclose(out, 0.37, rtol=1e-14)


def test_filter_two_particles_half_radius():
    H = filter_matrix([[0, 0, 0], [0.01, 0, 0]], 0.02, 3.0)
    out = filter_density([1.0, 0.0], H)
    assert out[0] == pytest.approx(1.0 / 1.125, rel=1e-14)
    assert out[1] == pytest.approx(0.125 / 1.125, rel=1e-14)


def test_filter_single_particle_footprint():
    x = np.linspace(0, 0.05, 51)
    pts = np.stack([x, np.zeros_like(x), np.zeros_like(x)], 1)
    phi = np.zeros(51)
    phi[25] = 1.0
    out = filter_density(phi, filter_matrix(pts, 0.02, 3.0))
    r = np.abs(x - x[25])
    assert np.all(out[r > 0.02 + 1e-12] == 0.0)
    assert np.all(out[r >= 0.02 - 1e-12] < 1e-40)     # kernel edge, up to rounding of r
    inside = (r < 0.02 - 1e-12) & (r > 0)
    assert np.all(out[inside] > 0)
    assert np.argmax(out) == 25


@pytest.mark.parametrize("pb, ph", [(0.0, 0.5), (1.0, 1.0), (-1.0, 0.0)])
def test_projection_fixed_points(pb, ph):
    assert project_density(pb, 8.0) == pytest.approx(ph, abs=1e-15)


def test_projection_scalar_oracle():
    mp.dps = 30
    expect = float(mpf("0.5") * (1 + mp.tanh(8 * mpf("0.25")) / mp.tanh(8)))
    assert project_density(0.25, 8.0) == pytest.approx(expect, rel=1e-14)


def test_simp_examples():
    mat = SoftMaterial(E=0.144e6, nu=0.4, rho=1070.0)
    rho, mu, lam, eta = simp_soft(np.array([1.0, 0.0, 0.5]), mat)
    assert rho[0] == 1070.0 and mu[0] == pytest.approx(mat.mu) and lam[0] == pytest.approx(mat.lam)
    assert rho[1] == pytest.approx(1070e-6) and mu[1] == pytest.approx(1e-6 * mat.mu)
    floor = 1e-6 * 1070
    assert rho[2] == pytest.approx(floor + 0.125 * (1070 - floor), rel=1e-14)


def test_bone_interpolation_values():
    assert bone_interpolation(0.0) == 0.0
    assert bone_interpolation(1.0) == pytest.approx(1.0, abs=1e-15)
    mp.dps = 40
    oracle = (mpf("0.6") ** 6 - mpf("0.1") ** 6) / (mpf("1.1") ** 6 - mpf("0.1") ** 6)
    assert bone_interpolation(0.5) == pytest.approx(float(oracle), abs=1e-15)
    assert abs(bone_interpolation(0.5) - 0.026336) < 1e-6


def test_bone_interpolation_slope_at_zero():
    h = 1e-7
    assert (bone_interpolation(h) - bone_interpolation(0.0)) / h > 1e-6
    assert bone_interpolation_grad(0.0) == pytest.approx(6 * 0.1 ** 5 / (1.1 ** 6 - 0.1 ** 6), rel=1e-12)


def test_simp_value_monotone():
    ph = np.linspace(0, 1, 101)
    assert np.all(np.diff(simp_value(ph, 5.0)) > 0)


def test_symmetry_helpers():
    mirror = np.array([1, 0, 2, 4, 3])
    v = np.array([0.1, 0.3, 0.5, 0.9, 0.7])
    s = symmetrize(v, mirror)
    np.testing.assert_allclose(s, [0.2, 0.2, 0.5, 0.8, 0.8])
    e = enforce_symmetry(v, mirror)
    np.testing.assert_array_equal(e, e[mirror])


def test_design_vector_roundtrip(rng):
    d = DesignVariables(rng.random(7), rng.random(3), rng.random((2, 4)))
    again = d.with_flat(d.flat())
    for k in ("phi", "gamma", "w"):
        np.testing.assert_array_equal(getattr(again, k), getattr(d, k))


def test_clamp_boxes():
    d = DesignVariables(np.array([-3.0, 2.0]), np.array([-1.0, 0.5, 4.0]), np.array([[1.5, -0.5]])).clamp()
    assert d.phi.tolist() == [-1.0, 1.0]
    assert d.gamma.tolist() == [0.0, 0.5, 1.0]
    assert d.w.tolist() == [[1.0, 0.0]]
