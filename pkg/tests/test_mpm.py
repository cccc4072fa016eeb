import numpy as np
import pytest
from mpmath import mp, mpf, log as mlog

from softrigid.errors import InversionError
from softrigid.mpm import (GridField, ParticleState, SoftMaterial, bspline_weights, compute_stress, g2p,
                           grid_update, p2g)

MU, LAM = 0.051e6, 0.206e6


def particles(x, v=None, mass=None, mu=0.0, lam=0.0, eta=0.0, vol0=1e-6):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = len(x)
    v = np.zeros((n, 3)) if v is None else np.atleast_2d(np.asarray(v, dtype=float)).copy()
    mass = np.full(n, 1e-3) if mass is None else np.asarray(mass, dtype=float)
    return ParticleState(x, v, np.zeros((n, 3, 3)), np.tile(np.eye(3), (n, 1, 1)), vol0, np.zeros(n),
                         np.ones(n), mass, np.full(n, mu), np.full(n, lam), np.full(n, eta))


def oracle_stress(F, mu, lam):
    """Direct high-precision evaluation of (1/J)[mu F F^T + (lam ln J - mu) I] for diagonal F."""
    mp.dps = 40
    d = [mpf(str(v)) for v in np.diag(F)]
    J = d[0] * d[1] * d[2]
    return [float((mpf(mu) * di * di + mpf(lam) * mlog(J) - mpf(mu)) / J) for di in d]


def test_lame_parameters_from_young_and_poisson():
    m = SoftMaterial(E=0.144e6, nu=0.4)
    assert m.mu == pytest.approx(0.051e6, rel=0.01)
    assert m.lam == pytest.approx(0.206e6, rel=0.01)


def test_rest_state_is_stress_free():
    s = compute_stress(np.eye(3), np.zeros((3, 3)), MU, LAM, 5.0)
    assert np.all(s == 0.0)


def test_isotropic_expansion_rate_has_no_viscous_stress():
    s = compute_stress(np.eye(3), 0.7 * np.eye(3), MU, LAM, 5.0)
    np.testing.assert_allclose(s, 0.0, atol=1e-12)


def test_uniaxial_stretch_matches_oracle():
    F = np.diag([1.1, 1.0, 1.0])
    s = compute_stress(F, np.zeros((3, 3)), MU, LAM, 0.0)
    np.testing.assert_allclose(np.diag(s), oracle_stress(F, MU, LAM), rtol=1e-12)
    assert np.all(s[~np.eye(3, dtype=bool)] == 0.0)


def test_viscous_shear_term():
    C = np.zeros((3, 3))
    C[0, 1] = 2.0
    s = compute_stress(np.eye(3), C, 0.0, 0.0, 5.0)
    # eta (C + C^T - 2/3 tr C I)
    expect = 5.0 * (C + C.T)
    np.testing.assert_allclose(s, expect, atol=1e-12)


def test_inverted_deformation_raises():
    with pytest.raises(InversionError):
        compute_stress(np.diag([-1.0, 1.0, 1.0]), np.zeros((3, 3)), MU, LAM)


def test_node_centered_weight():
    dx = 0.01
    base, W = bspline_weights([[0.05, 0.05, 0.05]], dx)
    assert W[0, 1, 1, 1] == pytest.approx(0.75 ** 3, abs=1e-15)
    assert W.sum() == pytest.approx(1.0, abs=1e-14)


def test_single_particle_p2g_conserves_mass_and_momentum():
    p = particles([[0.0731, 0.0802, 0.0777]], v=[[0.3, -0.2, 0.1]], mass=[2e-3])
    g = p2g(p, GridField((16, 16, 16), 0.01), 1e-4)
    assert g.mass.sum() == pytest.approx(2e-3, rel=1e-13)
    np.testing.assert_allclose(g.momentum.reshape(-1, 3).sum(0), 2e-3 * np.array([0.3, -0.2, 0.1]), rtol=1e-12)


def test_mirrored_particles_give_mirrored_grid():
    dx, n = 0.01, 16
    plane = 0.5 * (n - 1) * dx   # mirror maps node j to n-1-j
    x = np.array([[0.0712, 0.0633, 0.0801], [0.0712, 2 * plane - 0.0633, 0.0801]])
    p = particles(x, v=[[0.1, 0.2, 0.0], [0.1, -0.2, 0.0]], mu=MU, lam=LAM)
    p.F[0] = np.array([[1.01, 0.02, 0.0], [0.0, 0.99, 0.0], [0.0, 0.0, 1.0]])
    R = np.diag([1.0, -1.0, 1.0])
    p.F[1] = R @ p.F[0] @ R
    g = p2g(p, GridField((n, n, n), dx), 1e-4)
    np.testing.assert_allclose(g.mass, g.mass[:, ::-1, :], atol=1e-18)
    mom = g.momentum[:, ::-1, :] * np.array([1.0, -1.0, 1.0])
    np.testing.assert_allclose(g.momentum, mom, atol=1e-15)


def _grid_with(node, m, v, shape=(8, 8, 8), dx=0.01):
    g = GridField(shape, dx)
    g.mass[node] = m
    g.momentum[node] = m * np.asarray(v, dtype=float)
    return g


def test_zero_mass_node_stays_at_rest():
    g = GridField((8, 8, 8), 0.01)
    grid_update(g, 1e-4, [0, 0, -9.81], floor_height=None, bound=1)
    assert np.all(g.velocity == 0.0)


def test_floor_contact_sticks_with_high_friction():
    g = _grid_with((4, 4, 2), 1.0, [1.0, 0.0, -2.0])
    grid_update(g, 1e-4, [0, 0, 0], floor_height=0.03, friction_mu=1e3, bound=1)
    np.testing.assert_array_equal(g.velocity[4, 4, 2], [0.0, 0.0, 0.0])


def test_floor_contact_slides_with_coulomb_loss():
    g = _grid_with((4, 4, 2), 1.0, [1.0, 0.0, -2.0])
    grid_update(g, 1e-4, [0, 0, 0], floor_height=0.03, friction_mu=0.25, bound=1)
    np.testing.assert_allclose(g.velocity[4, 4, 2], [0.5, 0.0, 0.0], atol=1e-15)


def test_gravity_is_added_once():
    g = _grid_with((4, 4, 4), 1.0, [0.0, 0.0, 0.0])
    grid_update(g, 1e-3, [0, 0.5, -9.81], floor_height=None, bound=1)
    np.testing.assert_allclose(g.velocity[4, 4, 4], [0.0, 0.5e-3, -9.81e-3], rtol=1e-14)


def test_boundary_nodes_zeroed():
    g = _grid_with((0, 4, 4), 1.0, [1.0, 1.0, 1.0])
    grid_update(g, 1e-4, [0, 0, 0], floor_height=None, bound=1)
    assert np.all(g.velocity[0, 4, 4] == 0.0)


def _uniform_grid(vel, shape=(12, 12, 12), dx=0.01):
    g = GridField(shape, dx)
    g.velocity[...] = vel
    return g


def test_uniform_field_transfers_exactly():
    p = particles([[0.0512, 0.0633, 0.0471], [0.061, 0.07, 0.05]])
    out = g2p(_uniform_grid([0.2, -0.1, 0.05]), p, 1e-4)
    np.testing.assert_allclose(out.v, [[0.2, -0.1, 0.05]] * 2, rtol=1e-13)
    np.testing.assert_allclose(out.C, 0.0, atol=1e-10)


def test_zero_field_freezes_particles():
    p = particles([[0.0512, 0.0633, 0.0471]])
    p.F[0] = np.diag([1.1, 0.95, 1.0])
    out = g2p(_uniform_grid([0.0, 0.0, 0.0]), p, 1e-4)
    np.testing.assert_array_equal(out.x, p.x)
    np.testing.assert_array_equal(out.F, p.F)


def test_rigid_rotation_gives_skew_affine_matrix():
    dx, shape = 0.01, (12, 12, 12)
    g = GridField(shape, dx)
    omega = np.array([0.3, -1.2, 0.7])
    c = np.array([0.06, 0.06, 0.06])
    idx = np.stack(np.meshgrid(*[np.arange(s) for s in shape], indexing="ij"), -1) * dx
    g.velocity[...] = np.cross(omega, idx - c)
    p = particles([[0.0543, 0.0617, 0.0588]])
    out = g2p(g, p, 1e-4)
    C = out.C[0]
    np.testing.assert_allclose(C + C.T, 0.0, atol=1e-10)
    W = np.array([[0, -omega[2], omega[1]], [omega[2], 0, -omega[0]], [-omega[1], omega[0], 0]])
    np.testing.assert_allclose(C, W, atol=1e-10)


def test_stress_free_momentum_conservation():
    rng = np.random.default_rng(3)
    dx, shape, dt = 0.01, (16, 16, 16), 1e-4
    x = 0.07 + 0.02 * rng.random((64, 3))
    v = 0.05 * rng.standard_normal((64, 3))
    m = 1e-4 * (1 + rng.random(64))
    p = particles(x, v=v, mass=m)
    P0 = m @ v
    g = GridField(shape, dx)
    for _ in range(1000):
        p2g(p, g, dt)
        grid_update(g, dt, [0, 0, 0], floor_height=None, bound=2)
        p = g2p(g, p, dt)
    drift = np.linalg.norm(p.mass @ p.v - P0) / np.linalg.norm(P0)
    assert drift < 1e-6
