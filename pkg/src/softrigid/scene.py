"""Scene configuration, skeletal ground structure and sagittal symmetry pairing.

Configuration files are YAML trees whose keys carry their units
(``size_m``, ``E_Pa``, ...). See ``docs/scene_schema.md`` for the schema.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from scipy.spatial import cKDTree

from .errors import ConfigError, GroundStructureError, SymmetryError

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# configuration tree


@dataclass
class DomainConfig:
    size_m: tuple = (0.8, 0.8, 0.8)
    cells: tuple = (80, 80, 80)
    boundary_cells: int = 3


@dataclass
class PhaseConfig:
    t_start_s: float = 0.2
    t_end_s: float = 1.2
    cycle_duration_s: float = 0.5
    cycle_repeats: int = 2


@dataclass
class SoftMaterialConfig:
    E_Pa: float = 0.144e6
    nu: float = 0.4
    rho_kg_m3: float = 1070.0
    eta_visc_Pa_s: float = 5.0
    floor_ratio: float = 1e-6


@dataclass
class SoftBodyConfig:
    enabled: bool = True
    box_min_m: tuple = (0.3, 0.37, 0.03)
    box_max_m: tuple = (0.45, 0.43, 0.18)
    material: SoftMaterialConfig = field(default_factory=SoftMaterialConfig)
    initial_velocity_m_s: tuple = (0.0, 0.0, 0.0)
    initial_angular_velocity_rad_s: tuple = (0.0, 0.0, 0.0)


@dataclass
class EnvironmentConfig:
    gravity_m_s2: float = 9.81
    gravity_tilt_deg: float = 0.0
    floor: bool = True
    floor_height_m: float | None = None   # default: boundary_cells * dx
    friction_mu: float = 0.4


@dataclass
class BoneMaterialConfig:
    E_Pa: float = 3.0e9
    section_m: tuple = (0.0052, 0.0010)
    rho_kg_m3: float = 1250.0
    K_b: float = 1.0


@dataclass
class LatticeConfig:
    rows: int = 5
    columns: int = 8
    inset_m: float = 0.0025
    margin_x_m: float = 0.0
    margin_z_m: float = 0.0
    connection_radius_m: float | None = None   # default: 1.5 * horizontal pitch


@dataclass
class NodeSpec:
    position_m: tuple = (0.0, 0.0, 0.0)
    mass_kg: float = 0.0
    pinned: bool = False
    side: str = "none"


@dataclass
class BarSpec:
    a: int = 0
    b: int = 1
    role: str = "bone"
    absolute: bool = False    # a, b are global node ids instead of explicit-node ids


@dataclass
class SkeletonConfig:
    enabled: bool = True
    bone: BoneMaterialConfig = field(default_factory=BoneMaterialConfig)
    bridge_section_m: tuple = (0.008, 0.008)
    lattice: LatticeConfig | None = field(default_factory=LatticeConfig)
    bridges_per_node: int = 2
    nodes: list = field(default_factory=list)          # NodeSpec
    bars: list = field(default_factory=list)           # BarSpec
    node_velocity_m_s: tuple = (0.0, 0.0, 0.0)


@dataclass
class ActuatorParams:
    L0_m: float = 0.065
    dL_m: float = 0.015
    L_core_m: float = 0.030
    F_max_N: float = 10.0
    kappa_free_N: float = 0.3
    kappa_act_N: float = 3.0e8
    core_mass_kg: float = 0.016
    coil_mass_kg: float = 0.075


@dataclass
class ActuatorUnitSpec:
    name: str = "unit"
    core_xz_m: tuple = (0.0, 0.0)
    coil_xz_m: tuple = (0.0, 0.065)


@dataclass
class SignalConfig:
    pulse_dt_s: float = 0.002
    pulse_sigma_s: float = 0.01
    pulse_amp: float = 0.2
    ceiling: float | None = 1.0
    sharpness: float = 16.0


@dataclass
class ActuatorConfig:
    params: ActuatorParams = field(default_factory=ActuatorParams)
    units: list = field(default_factory=list)          # ActuatorUnitSpec
    signal: SignalConfig = field(default_factory=SignalConfig)


@dataclass
class DesignConfig:
    filter_radius_m: float = 0.02
    filter_exponent: float = 3.0
    beta: float = 8.0
    bone_eps: float = 0.1
    bone_p: float = 6.0
    bar_mass_floor: float = 1e-9
    bar_kappa_floor: float = 1e-9


@dataclass
class OptimizerConfig:
    lr_soft: float = 0.02
    lr_bone: float = 0.01
    lr_act: float = 0.02
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    init_phi: float = 0.0
    init_gamma: float = 0.5
    init_w: float = 0.01
    sigma_init: float = 1.0
    lambda_init: float = 0.0
    sigma_growth: float = 2.0
    sigma_max: float = 1.0e4
    D_bar_soft_m: float = 0.005
    D_bar_bone_m: float = 0.005
    C_soft_bound: float = 0.0125
    C_act_bound: float = 0.0025
    C_bone_bound_total: float = 0.0125   # divided by the designable bar count
    max_bones: int = 40
    stationarity_window: int = 5
    stationarity_tol: float = 1e-3
    max_failures: int = 5


@dataclass
class SimulationConfig:
    dt_s: float = 2e-5
    checkpoint_interval: int = 250
    blowup_speed_m_s: float = 100.0
    coupling_threshold: float = 1e-3
    deterministic: bool = True
    probes: list | None = None      # None: lowest front and rear skeletal nodes
    decimate: int = 1


@dataclass
class SceneConfig:
    name: str = "scene"
    seed: int = 0
    domain: DomainConfig = field(default_factory=DomainConfig)
    phases: PhaseConfig = field(default_factory=PhaseConfig)
    soft_body: SoftBodyConfig = field(default_factory=SoftBodyConfig)
    environment: EnvironmentConfig = field(default_factory=EnvironmentConfig)
    skeleton: SkeletonConfig = field(default_factory=SkeletonConfig)
    actuators: ActuatorConfig = field(default_factory=ActuatorConfig)
    design: DesignConfig = field(default_factory=DesignConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)

    # derived quantities --------------------------------------------------
    @property
    def dx(self) -> float:
        return float(self.domain.size_m[0]) / int(self.domain.cells[0])

    @property
    def dt(self) -> float:
        return float(self.simulation.dt_s)

    @property
    def grid_shape(self) -> tuple:
        return tuple(int(c) + 1 for c in self.domain.cells)

    @property
    def gravity(self) -> np.ndarray:
        th = math.radians(self.environment.gravity_tilt_deg)
        g = self.environment.gravity_m_s2
        return np.array([0.0, g * math.sin(th), -g * math.cos(th)])

    @property
    def floor_height(self):
        if not self.environment.floor:
            return None
        h = self.environment.floor_height_m
        return self.domain.boundary_cells * self.dx if h is None else float(h)

    @property
    def sagittal_y(self) -> float:
        sb = self.soft_body
        return 0.5 * (sb.box_min_m[1] + sb.box_max_m[1])

    def steps(self, t: float) -> int:
        """Integer step index for time ``t`` (rounded to the nearest step)."""
        return int(round(t / self.dt))

    @property
    def n_start(self) -> int:
        return self.steps(self.phases.t_start_s)

    @property
    def n_end(self) -> int:
        return self.steps(self.phases.t_end_s)

    @property
    def cycle_steps(self) -> int:
        return self.steps(self.phases.cycle_duration_s)

    @property
    def n_pulses(self) -> int:
        return int(round(self.phases.cycle_duration_s / self.actuators.signal.pulse_dt_s))

    def to_dict(self) -> dict:
        return _to_plain(self)

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


_LIST_ITEMS = {("skeleton", "nodes"): NodeSpec, ("skeleton", "bars"): BarSpec, ("actuators", "units"): ActuatorUnitSpec}


def _build(cls, data, path: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(path or "<root>", f"expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        key = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(key, "unknown key")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        key = f"{path}.{f.name}" if path else f.name
        val = data[f.name]
        hint = hints[f.name]
        sub = _dataclass_in(hint)
        tail = tuple(key.split(".")[-2:])
        if sub is not None:
            kwargs[f.name] = None if val is None and _optional(hint) else _build(sub, val, key)
        elif tail in _LIST_ITEMS:
            if not isinstance(val, list):
                raise ConfigError(key, "expected a list")
            kwargs[f.name] = [_build(_LIST_ITEMS[tail], v, f"{key}[{i}]") for i, v in enumerate(val)]
        else:
            kwargs[f.name] = _coerce(val, f.default, hint, key)
    return cls(**kwargs)


def _dataclass_in(hint):
    if dataclasses.is_dataclass(hint):
        return hint
    for a in typing.get_args(hint):
        if dataclasses.is_dataclass(a):
            return a
    return None


def _optional(hint) -> bool:
    return type(None) in typing.get_args(hint)


def _coerce(val, default, hint, key):
    if val is None:
        if _optional(hint):
            return None
        raise ConfigError(key, "value may not be null")
    if hint is tuple or isinstance(default, tuple):
        if not isinstance(val, (list, tuple)):
            raise ConfigError(key, "expected a list")
        try:
            return tuple(float(v) for v in val)
        except (TypeError, ValueError):
            raise ConfigError(key, "expected numbers") from None
    if hint is bool:
        if not isinstance(val, bool):
            raise ConfigError(key, "expected true/false")
        return val
    if hint is int:
        if isinstance(val, bool) or not isinstance(val, (int, float)) or int(val) != val:
            raise ConfigError(key, "expected an integer")
        return int(val)
    if hint is float or float in typing.get_args(hint):
        if isinstance(val, bool):
            raise ConfigError(key, "expected a number")
        try:
            return float(val)
        except (TypeError, ValueError):
            raise ConfigError(key, "expected a number") from None
    if hint is str:
        return str(val)
    if hint is list or list in typing.get_args(hint):
        if not isinstance(val, list):
            raise ConfigError(key, "expected a list")
        return list(val)
    return val


def scene_from_dict(data: dict) -> SceneConfig:
    cfg = _build(SceneConfig, data, "")
    validate_scene(cfg)
    return cfg


def load_scene(path) -> SceneConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("<file>", f"no such file: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"parse error: {exc}") from None
    return scene_from_dict(data or {})


def validate_scene(cfg: SceneConfig) -> None:
    d = cfg.domain
    if len(d.size_m) != 3 or len(d.cells) != 3:
        raise ConfigError("domain", "size_m and cells need three entries")
    if any(int(c) != c or c < 2 * d.boundary_cells + 2 for c in d.cells):
        raise ConfigError("domain.cells", "cell counts must be integers larger than the boundary band")
    d.cells = tuple(int(c) for c in d.cells)
    spacing = [s / c for s, c in zip(d.size_m, d.cells)]
    if not np.allclose(spacing, spacing[0], rtol=1e-9, atol=0):
        raise ConfigError("domain", f"cells must be cubic (size/cells per axis = {spacing})")
    if cfg.simulation.dt_s <= 0:
        raise ConfigError("simulation.dt_s", "must be positive")
    p = cfg.phases
    if not (0.0 <= p.t_start_s < p.t_end_s):
        raise ConfigError("phases", "need 0 <= t_start_s < t_end_s")
    if p.cycle_repeats < 1 or p.cycle_duration_s <= 0:
        raise ConfigError("phases", "cycle_duration_s and cycle_repeats must be positive")
    if not math.isclose(p.cycle_duration_s * p.cycle_repeats, p.t_end_s - p.t_start_s, rel_tol=1e-9, abs_tol=1e-12):
        raise ConfigError("phases", "cycle_duration_s * cycle_repeats must equal t_end_s - t_start_s")
    for name, t in (("t_start_s", p.t_start_s), ("t_end_s", p.t_end_s), ("cycle_duration_s", p.cycle_duration_s)):
        if abs(t / cfg.dt - round(t / cfg.dt)) > 1e-6:
            raise ConfigError(f"phases.{name}", "must be a whole number of time steps")
    sig = cfg.actuators.signal
    if abs(p.cycle_duration_s / sig.pulse_dt_s - round(p.cycle_duration_s / sig.pulse_dt_s)) > 1e-6:
        raise ConfigError("actuators.signal.pulse_dt_s", "cycle must hold a whole number of pulses")
    sb = cfg.soft_body
    if sb.enabled:
        lo, hi = np.asarray(sb.box_min_m), np.asarray(sb.box_max_m)
        if np.any(hi <= lo):
            raise ConfigError("soft_body", "box_max_m must exceed box_min_m on every axis")
        margin = d.boundary_cells * cfg.dx
        if np.any(lo < margin - 1e-12) or np.any(hi > np.asarray(d.size_m) - margin + 1e-12):
            raise ConfigError("soft_body", f"box must keep a {d.boundary_cells}-cell margin inside the domain")
        fh = cfg.floor_height
        if fh is not None and lo[2] < fh - 1e-12:
            raise ConfigError("soft_body.box_min_m", "box starts below the floor")
    m = sb.material
    if not (m.E_Pa > 0 and -1.0 < m.nu < 0.5 and m.rho_kg_m3 > 0 and m.eta_visc_Pa_s >= 0):
        raise ConfigError("soft_body.material", "invalid material constants")
    ap = cfg.actuators.params
    if not (0 < ap.dL_m < ap.L0_m) or ap.L_core_m <= 0:
        raise ConfigError("actuators.params", "need 0 < dL_m < L0_m and L_core_m > 0")
    if cfg.environment.friction_mu < 0:
        raise ConfigError("environment.friction_mu", "must be non-negative")
    if cfg.simulation.checkpoint_interval < 1:
        raise ConfigError("simulation.checkpoint_interval", "must be at least 1")
    if cfg.simulation.decimate < 1:
        raise ConfigError("simulation.decimate", "must be at least 1")
    for i, b in enumerate(cfg.skeleton.bars):
        if b.role not in ROLE_CODES:
            raise ConfigError(f"skeleton.bars[{i}].role", f"unknown role {b.role!r}")
    for i, n in enumerate(cfg.skeleton.nodes):
        if n.side not in SIDE_CODES:
            raise ConfigError(f"skeleton.nodes[{i}].side", f"unknown side {n.side!r}")


# ---------------------------------------------------------------------------
# ground structure

ROLE_CODES = {"bone": 0, "actuator_axial": 1, "actuator_lateral": 2, "bridge": 3}
SIDE_CODES = {"left": -1, "none": 0, "right": 1}


@dataclass
class GroundStructure:
    node_x: np.ndarray
    side: np.ndarray
    fixed_mass: np.ndarray
    pinned: np.ndarray
    bar_a: np.ndarray
    bar_b: np.ndarray
    role: np.ndarray
    L_ref: np.ndarray
    section: np.ndarray     # (n_bars, 2) cross-section sides, m
    units: list             # ActuatorUnit
    lattice_nodes: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.node_x)

    @property
    def n_bars(self) -> int:
        return len(self.bar_a)

    @property
    def designable(self) -> np.ndarray:
        return self.role == ROLE_CODES["bone"]

    @property
    def n_designable(self) -> int:
        return int(self.designable.sum())

    @property
    def designable_index(self) -> np.ndarray:
        return np.flatnonzero(self.designable)


def _lattice_side(cfg: SceneConfig, y: float):
    sb, lat = cfg.soft_body, cfg.skeleton.lattice
    x0 = sb.box_min_m[0] + lat.inset_m + lat.margin_x_m
    x1 = sb.box_max_m[0] - lat.inset_m - lat.margin_x_m
    z0 = sb.box_min_m[2] + lat.inset_m + lat.margin_z_m
    z1 = sb.box_max_m[2] - lat.inset_m - lat.margin_z_m
    px = (x1 - x0) / max(lat.columns - 1, 1)
    pz = (z1 - z0) / max(lat.rows - 1, 1)
    pts = []
    for r in range(lat.rows):
        odd = r % 2 == 1
        n = lat.columns - 1 if odd else lat.columns
        for c in range(n):
            pts.append((x0 + (c + (0.5 if odd else 0.0)) * px, y, z0 + r * pz))
    return np.array(pts).reshape(-1, 3), px


def build_ground_structure(cfg: SceneConfig):
    """Construct nodes and bars (lattice bones, actuator units, bridges, explicit extras).

    Returns a :class:`GroundStructure`. Node order: left lattice, right lattice,
    actuator nodes (core L, core R, coil L, coil R per unit), explicit nodes.
    """
    from .actuation import ActuatorUnit

    sk = cfg.skeleton
    ap = cfg.actuators.params
    bone_sec = tuple(sk.bone.section_m)
    bridge_sec = tuple(sk.bridge_section_m)
    xs, sides, masses, pins = [], [], [], []
    bars: list[tuple] = []   # (a, b, role, section)

    n_lat = 0
    if sk.enabled and sk.lattice is not None:
        if not cfg.soft_body.enabled:
            raise GroundStructureError("a node lattice needs a soft body to attach to")
        lat = sk.lattice
        if lat.rows < 1 or lat.columns < 2:
            raise GroundStructureError("lattice needs at least one row and two columns")
        yl = cfg.soft_body.box_min_m[1] + lat.inset_m
        yr = cfg.soft_body.box_max_m[1] - lat.inset_m
        left, pitch = _lattice_side(cfg, yl)
        right, _ = _lattice_side(cfg, yr)
        radius = lat.connection_radius_m if lat.connection_radius_m is not None else 1.5 * pitch
        for pts, s in ((left, -1), (right, 1)):
            base = len(xs)
            xs.extend(pts)
            sides.extend([s] * len(pts))
            masses.extend([0.0] * len(pts))
            pins.extend([False] * len(pts))
            pairs = sorted(cKDTree(pts).query_pairs(radius * (1 + 1e-12)))
            bars.extend((base + i, base + j, "bone", bone_sec) for i, j in pairs)
        n_lat = len(xs)
        if not bars:
            raise GroundStructureError(f"connection radius {radius:.4g} m produces no bars")

    lattice_pts = np.array(xs).reshape(-1, 3)
    units = []
    if sk.enabled:
        lo = np.zeros(3)
        hi = np.asarray(cfg.domain.size_m, dtype=float)
        y_faces = _unit_faces(cfg)
        for ui, u in enumerate(cfg.actuators.units):
            core = np.array(u.core_xz_m, dtype=float)
            coil = np.array(u.coil_xz_m, dtype=float)
            if core.shape != (2,) or coil.shape != (2,):
                raise ConfigError(f"actuators.units[{ui}]", "core_xz_m and coil_xz_m need two entries")
            length = float(np.linalg.norm(core - coil))
            if abs(length - ap.L0_m) > 1e-6:
                raise ConfigError(f"actuators.units[{ui}]",
                                  f"core-coil distance {length:.6g} m differs from L0_m {ap.L0_m}")
            ids = {}
            for tag, xz, mass in (("core", core, ap.core_mass_kg), ("coil", coil, ap.coil_mass_kg)):
                for s, y in zip((-1, 1), y_faces):
                    p = np.array([xz[0], y, xz[1]])
                    if np.any(p <= lo) or np.any(p >= hi):
                        raise GroundStructureError(f"actuator {u.name!r} anchor {p} lies outside the domain")
                    ids[(tag, s)] = len(xs)
                    xs.append(p)
                    sides.append(s)
                    masses.append(0.5 * mass)
                    pins.append(False)
            axial = []
            for s in (-1, 1):
                axial.append(len(bars))
                bars.append((ids[("core", s)], ids[("coil", s)], "actuator_axial", bridge_sec))
            lateral = []
            for tag in ("core", "coil"):
                lateral.append(len(bars))
                bars.append((ids[(tag, -1)], ids[(tag, 1)], "actuator_lateral", bridge_sec))
            if n_lat and sk.bridges_per_node > 0:
                for key, nid in ids.items():
                    s = key[1]
                    cand = np.flatnonzero(np.asarray(sides[:n_lat]) == s)
                    d = np.linalg.norm(lattice_pts[cand] - xs[nid], axis=1)
                    order = np.lexsort((cand, d))[: sk.bridges_per_node]
                    bars.extend((nid, int(cand[k]), "bridge", bridge_sec) for k in order)
            units.append(ActuatorUnit(u.name, tuple(axial), tuple(lateral), ap.L0_m, ap.dL_m, ap.L_core_m,
                                      ap.F_max_N, ap.kappa_free_N, ap.kappa_act_N))

        offset = len(xs)
        for i, n in enumerate(sk.nodes):
            xs.append(np.asarray(n.position_m, dtype=float))
            sides.append(SIDE_CODES[n.side])
            masses.append(n.mass_kg)
            pins.append(n.pinned)
        for i, b in enumerate(sk.bars):
            lo = 0 if b.absolute else offset
            a, c = b.a + lo, b.b + lo
            if not (lo <= a < len(xs) and lo <= c < len(xs)) or a == c:
                raise ConfigError(f"skeleton.bars[{i}]", "endpoints must be distinct, existing node indices")
            sec = bone_sec if b.role == "bone" else bridge_sec
            bars.append((a, c, b.role, sec))

    node_x = np.array(xs, dtype=float).reshape(-1, 3)
    keys = [tuple(sorted((a, b))) for a, b, _, _ in bars]
    if len(set(keys)) != len(keys):
        raise GroundStructureError("duplicate bar between the same pair of nodes")
    if len(node_x) > 1:
        close = cKDTree(node_x).query_pairs(1e-9)
        if close:
            raise GroundStructureError(f"coincident nodes {sorted(close)[0]}")
    bar_a = np.array([b[0] for b in bars], dtype=np.int64)
    bar_b = np.array([b[1] for b in bars], dtype=np.int64)
    L = np.linalg.norm(node_x[bar_a] - node_x[bar_b], axis=1) if bars else np.zeros(0)
    if np.any(L <= 0):
        raise GroundStructureError("bar with zero rest length")
    gs = GroundStructure(
        node_x=node_x,
        side=np.array(sides, dtype=np.int64),
        fixed_mass=np.array(masses, dtype=float),
        pinned=np.array(pins, dtype=bool),
        bar_a=bar_a,
        bar_b=bar_b,
        role=np.array([ROLE_CODES[b[2]] for b in bars], dtype=np.int64),
        L_ref=L,
        section=np.array([b[3] for b in bars], dtype=float).reshape(-1, 2),
        units=units,
        lattice_nodes=np.arange(n_lat),
    )
    log.info("ground structure: %d nodes, %d bars (%d designable), %d actuator units",
             gs.n_nodes, gs.n_bars, gs.n_designable, len(units))
    return gs


def _unit_faces(cfg: SceneConfig):
    sb = cfg.soft_body
    inset = cfg.skeleton.lattice.inset_m if cfg.skeleton.lattice is not None else 0.0025
    return sb.box_min_m[1] + inset, sb.box_max_m[1] - inset


# ---------------------------------------------------------------------------
# symmetry


@dataclass
class SymmetryMap:
    particle_mirror: np.ndarray
    node_mirror: np.ndarray
    bar_mirror: np.ndarray          # over designable bars, indexes the gamma vector
    plane_y: float

    @property
    def particle_pairs(self):
        i = np.arange(len(self.particle_mirror))
        keep = i < self.particle_mirror
        return list(zip(i[keep].tolist(), self.particle_mirror[keep].tolist()))

    @property
    def bar_pairs(self):
        i = np.arange(len(self.bar_mirror))
        keep = i < self.bar_mirror
        return list(zip(i[keep].tolist(), self.bar_mirror[keep].tolist()))

    @property
    def self_mirrored(self) -> np.ndarray:
        return np.flatnonzero(self.particle_mirror == np.arange(len(self.particle_mirror)))

    @property
    def self_mirrored_bars(self) -> np.ndarray:
        return np.flatnonzero(self.bar_mirror == np.arange(len(self.bar_mirror)))


def _mirror_points(pts, plane_y, tol, what):
    pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        return np.zeros(0, dtype=np.int64)
    ref = pts.copy()
    ref[:, 1] = 2.0 * plane_y - ref[:, 1]
    dist, idx = cKDTree(pts).query(ref)
    bad = np.flatnonzero(dist > tol)
    if len(bad):
        raise SymmetryError(f"{what} {bad[0]} at {pts[bad[0]]} has no mirror partner within {tol:g} m")
    idx = idx.astype(np.int64)
    if np.any(idx[idx] != np.arange(len(idx))):
        raise SymmetryError(f"{what} mirror pairing is not an involution")
    return idx


def build_symmetry_map(gs: GroundStructure, particles, plane_y: float, tol: float = 1e-9) -> SymmetryMap:
    """Pair particles, nodes and designable bars across the plane ``y = plane_y``."""
    pm = _mirror_points(particles.x if particles is not None else np.zeros((0, 3)), plane_y, tol, "particle")
    nm = _mirror_points(gs.node_x, plane_y, tol, "node")
    lookup = {tuple(sorted((a, b))): s for s, (a, b) in enumerate(zip(gs.bar_a.tolist(), gs.bar_b.tolist()))}
    des = gs.designable_index
    pos = {int(s): k for k, s in enumerate(des)}
    bm = np.empty(len(des), dtype=np.int64)
    for k, s in enumerate(des):
        key = tuple(sorted((int(nm[gs.bar_a[s]]), int(nm[gs.bar_b[s]]))))
        t = lookup.get(key)
        if t is None or t not in pos:
            raise SymmetryError(f"bar {s} ({gs.bar_a[s]}-{gs.bar_b[s]}) has no mirror partner")
        bm[k] = pos[t]
    return SymmetryMap(pm, nm, bm, float(plane_y))
