import math

import numpy as np
import pytest
import yaml

from softrigid.errors import ConfigError, GroundStructureError, SymmetryError
from softrigid.scene import (ROLE_CODES, build_ground_structure, build_symmetry_map, load_scene,
                             scene_from_dict)
from softrigid.stepper import seed_particles

from conftest import BASE, SCENES, _merge, make_scene


def test_full_scene_spacing_and_schedule():
    cfg = load_scene(SCENES / "full.yaml")
    assert cfg.dx == pytest.approx(0.01, abs=1e-15)
    assert cfg.n_end == 60000
    assert cfg.n_start == 10000


def test_full_scene_has_180_bones():
    gs = build_ground_structure(load_scene(SCENES / "full.yaml"))
    assert gs.n_designable == 180


def test_tilt_defaults_to_zero():
    data = _merge(BASE, {})
    data["environment"].pop("gravity_tilt_deg", None)
    assert scene_from_dict(data).environment.gravity_tilt_deg == 0.0


def test_phase_schedule_accepted():
    cfg = make_scene(phases=dict(t_start_s=0.2, t_end_s=1.2, cycle_duration_s=0.5, cycle_repeats=2),
                     simulation=dict(dt_s=2e-5))
    assert cfg.n_start == 10000 and cfg.n_end == 60000 and cfg.cycle_steps == 25000


@pytest.mark.parametrize("section, key, value", [
    ("phases", "cycle_repeats", 3),
    ("phases", "t_end_s", 0.001),
    ("simulation", "dt_s", 0.0),
    ("domain", "cells", [16, 16, 8]),
])
def test_invalid_configs_report_key_path(section, key, value):
    with pytest.raises(ConfigError) as exc:
        make_scene(**{section: {key: value}})
    assert exc.value.key.startswith(section)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as exc:
        make_scene(soft_body=dict(colour="red"))
    assert exc.value.key == "soft_body.colour"


def test_box_needs_boundary_margin():
    with pytest.raises(ConfigError):
        make_scene(soft_body=dict(box_min_m=[0.01, 0.06, 0.06]))


def test_load_scene_roundtrip(tmp_path):
    cfg = load_scene(SCENES / "desk.yaml")
    p = tmp_path / "again.yaml"
    cfg.dump(p)
    again = load_scene(p)
    assert again.to_dict() == cfg.to_dict()


def test_load_scene_parse_error(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("domain: [unclosed\n")
    with pytest.raises(ConfigError):
        load_scene(p)


def test_seed_particle_count_full_box():
    cfg = make_scene(domain=dict(size_m=[0.8, 0.8, 0.8], cells=[80, 80, 80]),
                     soft_body=dict(box_min_m=[0.3, 0.3, 0.1], box_max_m=[0.45, 0.45, 0.16]))
    X, vol0 = seed_particles(cfg)
    assert len(X) == 30 * 30 * 12
    assert vol0 == pytest.approx(0.005 ** 3)


def test_seed_box_smaller_than_spacing():
    cfg = make_scene(soft_body=dict(box_min_m=[0.05, 0.06, 0.06], box_max_m=[0.052, 0.10, 0.10]))
    with pytest.raises(Exception):
        seed_particles(cfg)


def _lattice_cfg(**lat):
    return make_scene(skeleton=dict(enabled=True, lattice=dict(rows=3, columns=4, **lat)))


def test_ground_structure_rest_lengths_and_uniqueness():
    gs = build_ground_structure(load_scene(SCENES / "desk.yaml"))
    L = np.linalg.norm(gs.node_x[gs.bar_a] - gs.node_x[gs.bar_b], axis=1)
    np.testing.assert_array_equal(L, gs.L_ref)
    pairs = {tuple(sorted(p)) for p in zip(gs.bar_a, gs.bar_b)}
    assert len(pairs) == gs.n_bars


def test_one_actuator_unit_has_four_bars():
    cfg = make_scene(skeleton=dict(enabled=True, lattice=dict(rows=3, columns=3)),
                     actuators=dict(units=[dict(name="u", core_xz_m=[0.06, 0.105], coil_xz_m=[0.099, 0.053])]))
    gs = build_ground_structure(cfg)
    assert np.sum(gs.role == ROLE_CODES["actuator_axial"]) == 2
    assert np.sum(gs.role == ROLE_CODES["actuator_lateral"]) == 2
    u = gs.units[0]
    assert len(u.axial_bars) == 2 and len(u.lateral_bars) == 2


def test_only_bones_are_designable():
    gs = build_ground_structure(load_scene(SCENES / "desk.yaml"))
    assert np.all(gs.role[gs.designable_index] == ROLE_CODES["bone"])
    assert gs.n_designable == 56


def test_zero_bar_radius_is_error():
    cfg = make_scene(skeleton=dict(enabled=True, lattice=dict(rows=1, columns=2, connection_radius_m=0.001)))
    with pytest.raises(GroundStructureError, match="no bars"):
        build_ground_structure(cfg)


def test_actuator_outside_domain():
    cfg = make_scene(skeleton=dict(enabled=True, lattice=dict(rows=3, columns=3)),
                     actuators=dict(units=[dict(name="u", core_xz_m=[0.2, 0.105], coil_xz_m=[0.239, 0.053])]))
    with pytest.raises(GroundStructureError):
        build_ground_structure(cfg)


def test_ground_structure_deterministic():
    cfg = load_scene(SCENES / "desk.yaml")
    a, b = build_ground_structure(cfg), build_ground_structure(cfg)
    for f in ("node_x", "bar_a", "bar_b", "role", "L_ref"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))


def test_symmetry_map_involution_and_plane_pairs():
    from softrigid.stepper import Simulator
    sim = Simulator(load_scene(SCENES / "desk.yaml"))
    sm = sim.symmetry
    assert sm is not None
    idx = np.arange(len(sm.particle_mirror))
    np.testing.assert_array_equal(sm.particle_mirror[sm.particle_mirror], idx)
    np.testing.assert_array_equal(sm.bar_mirror[sm.bar_mirror], np.arange(len(sm.bar_mirror)))
    x = sim.x0
    mx = x[sm.particle_mirror]
    np.testing.assert_allclose(mx[:, [0, 2]], x[:, [0, 2]], atol=1e-12)
    np.testing.assert_allclose(mx[:, 1], 2 * sm.plane_y - x[:, 1], atol=1e-9)


def test_self_mirrored_bar_on_plane():
    class P:
        x = np.zeros((0, 3))
    cfg = make_scene(skeleton=dict(enabled=True, nodes=[dict(position_m=[0.06, 0.08, 0.08]),
                                                        dict(position_m=[0.09, 0.08, 0.08])],
                                   bars=[dict(a=0, b=1)]))
    gs = build_ground_structure(cfg)
    sm = build_symmetry_map(gs, P, 0.08)
    assert list(sm.self_mirrored_bars) == [0]


def test_asymmetric_structure_rejected():
    class P:
        x = np.zeros((0, 3))
    cfg = make_scene(skeleton=dict(enabled=True, nodes=[dict(position_m=[0.06, 0.07, 0.08]),
                                                        dict(position_m=[0.09, 0.07, 0.08])],
                                   bars=[dict(a=0, b=1)]))
    gs = build_ground_structure(cfg)
    with pytest.raises(SymmetryError):
        build_symmetry_map(gs, P, 0.08)


def test_gravity_tilt_lateral_component():
    cfg = make_scene(environment=dict(gravity_m_s2=9.81, gravity_tilt_deg=1.0))
    g = cfg.gravity
    assert g[1] == pytest.approx(9.81 * math.sin(math.radians(1.0)), rel=1e-12)
    assert g[1] == pytest.approx(0.171, abs=5e-4)
    assert g[0] == 0.0 and np.linalg.norm(g) == pytest.approx(9.81)


def test_yaml_files_are_plain_yaml():
    for p in SCENES.rglob("*.yaml"):
        assert isinstance(yaml.safe_load(p.read_text()), dict), p
