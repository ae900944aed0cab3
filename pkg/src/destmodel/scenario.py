"""Scenario configuration for the constant-velocity experiments.

Config files are flat ``key = value`` lines with dotted section keys::

    # comment
    run.preset = fig2
    scenario.horizon = 50
    scenario.x0 = 0, 240, 10000, 0
    destination.theta_deg = 90
    destination.points = 9000 0; 12000 0

Lists are comma separated; lists of points are ``;`` separated pairs.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constraint import DestinationConstraint, heading_constraint
from .dynamics import SystemModel


class ConfigError(ValueError):
    """Invalid scenario configuration."""


def cv_transition(dt):
    """Constant-velocity transition for state ``(x, vx, y, vy)``."""
    blk = np.array([[1.0, dt], [0.0, 1.0]])
    return np.kron(np.eye(2), blk)


def cv_noise_block(dt, accel_scale):
    """Per-step noise shape ``g^2 [[T^3/3, T^2/2], [T^2/2, T]]`` on each axis."""
    blk = np.array([[dt ** 3 / 3.0, dt ** 2 / 2.0], [dt ** 2 / 2.0, dt]])
    return accel_scale ** 2 * np.kron(np.eye(2), blk)


@dataclass
class ScenarioConfig:
    horizon: int = 50
    dt: float = 1.0
    accel_scale: float = 9.8
    x0: tuple = (0.0, 240.0, 10000.0, 0.0)
    destination: tuple = (12000.0, 0.0)
    theta_deg: float = 90.0
    trajectories: int = 8
    seed: int = 42
    weight_mode: str = "optimal"
    radial_mode: str = "uniform_ball"
    relaxed: bool = True
    compare_identity: bool = False
    # Extra start positions / destinations; each (origin, destination) pair is one set.
    origins: list = field(default_factory=list)
    destinations: list = field(default_factory=list)
    noise_block: tuple | None = None
    noise_full_file: str | None = None
    competitors: int = 200
    w2_scale: float = 1.0
    prop4_constraint: str = "full"
    qp_instances: int = 100
    name: str = "scenario"

    def validate(self):
        if int(self.horizon) < 1:
            raise ConfigError("scenario.horizon must be >= 1")
        if not self.dt > 0:
            raise ConfigError("scenario.dt must be > 0")
        if int(self.trajectories) < 1:
            raise ConfigError("run.trajectories must be >= 1")
        if len(self.x0) != 4:
            raise ConfigError("scenario.x0 needs 4 values (x, vx, y, vy)")
        if self.weight_mode not in ("optimal", "identity"):
            raise ConfigError(f"run.weight_mode must be optimal or identity, got {self.weight_mode!r}")
        if self.radial_mode not in ("uniform_ball", "boundary"):
            raise ConfigError(f"run.radial_mode must be uniform_ball or boundary, got {self.radial_mode!r}")
        if self.prop4_constraint not in ("full", "heading"):
            raise ConfigError("verify.prop4_constraint must be full or heading")
        if self.noise_block is not None and len(self.noise_block) != 16:
            raise ConfigError("noise.q needs 16 values (a 4x4 block)")
        if int(self.competitors) < 0 or int(self.qp_instances) < 1:
            raise ConfigError("verify.competitors must be >= 0 and verify.qp_instances >= 1")
        return self

    @property
    def theta(self):
        return np.deg2rad(self.theta_deg)

    def transition(self):
        return cv_transition(self.dt)

    def noise_q(self):
        if self.noise_block is not None:
            return np.asarray(self.noise_block, float).reshape(4, 4)
        return cv_noise_block(self.dt, self.accel_scale)

    def system(self) -> SystemModel:
        F = self.transition()
        if self.noise_full_file:
            try:
                Qw0 = np.loadtxt(self.noise_full_file, delimiter=",", ndmin=2)
            except OSError as exc:
                raise ConfigError(f"cannot read noise.q_w0_file: {exc}") from exc
            try:
                return SystemModel(np.broadcast_to(F, (self.horizon, 4, 4)), Qw0)
            except ValueError as exc:
                raise ConfigError(f"noise.q_w0_file: {exc}") from exc
        try:
            return SystemModel.time_invariant(F, self.noise_q(), self.horizon)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def constraint(self, destination=None) -> DestinationConstraint:
        dx, dy = self.destination if destination is None else destination
        return heading_constraint(dx, dy, self.theta)

    def sets(self):
        """``(x0, destination)`` pairs; extra origins replace the start position."""
        origins = [tuple(o) for o in self.origins] or [(self.x0[0], self.x0[2])]
        dests = [tuple(d) for d in self.destinations] or [tuple(self.destination)]
        out = []
        for ox, oy in origins:
            x0 = np.array([ox, self.x0[1], oy, self.x0[3]], dtype=float)
            for dest in dests:
                out.append((x0, dest))
        return out


PRESETS = {
    "fig2": dict(theta_deg=90.0, relaxed=True),
    "fig3": dict(theta_deg=0.0, relaxed=True),
    "fig8": dict(theta_deg=90.0, relaxed=False, compare_identity=True),
    "fig9": dict(theta_deg=90.0, relaxed=False, trajectories=5,
                 origins=[(0.0, 10000.0), (0.0, 6000.0), (2000.0, 14000.0)]),
    "fig10": dict(theta_deg=90.0, relaxed=False, trajectories=5,
                  destinations=[(9000.0, 0.0), (12000.0, 0.0), (15000.0, 0.0)]),
}


def preset(name) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return ScenarioConfig(name=name, **PRESETS[name])


def _floats(v):
    try:
        return tuple(float(x) for x in v.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"expected numbers, got {v!r}") from exc


def _points(v):
    pts = [_floats(p) for p in v.split(";") if p.strip()]
    if any(len(p) != 2 for p in pts):
        raise ConfigError(f"points must be 'x y' pairs separated by ';', got {v!r}")
    return pts


def _bool(v):
    low = v.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


def _num(kind):
    def parse(v):
        try:
            return kind(v)
        except ValueError as exc:
            raise ConfigError(f"expected {kind.__name__}, got {v!r}") from exc
    return parse


# config key -> (ScenarioConfig field, parser)
_KEYS = {
    "scenario.horizon": ("horizon", _num(int)),
    "scenario.dt": ("dt", _num(float)),
    "scenario.accel_scale": ("accel_scale", _num(float)),
    "scenario.x0": ("x0", _floats),
    "scenario.origins": ("origins", _points),
    "destination.x": ("destination_x", _num(float)),
    "destination.y": ("destination_y", _num(float)),
    "destination.theta_deg": ("theta_deg", _num(float)),
    "destination.points": ("destinations", _points),
    "run.trajectories": ("trajectories", _num(int)),
    "run.seed": ("seed", _num(int)),
    "run.weight_mode": ("weight_mode", str),
    "run.radial_mode": ("radial_mode", str),
    "run.relaxed": ("relaxed", _bool),
    "run.compare_identity": ("compare_identity", _bool),
    "run.name": ("name", str),
    "noise.q": ("noise_block", _floats),
    "noise.q_w0_file": ("noise_full_file", str),
    "verify.competitors": ("competitors", _num(int)),
    "verify.w2_scale": ("w2_scale", _num(float)),
    "verify.prop4_constraint": ("prop4_constraint", str),
    "verify.qp_instances": ("qp_instances", _num(int)),
}


def parse_config(text, base: ScenarioConfig | None = None, root: Path | None = None) -> ScenarioConfig:
    """Parse config text on top of ``base`` (or the ``run.preset`` it names)."""
    entries = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key != "run.preset" and key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        entries[key] = value
    if "run.preset" in entries:
        cfg = preset(entries.pop("run.preset"))
    else:
        cfg = dataclasses.replace(base) if base is not None else ScenarioConfig()
    dest = list(cfg.destination)
    for key, value in entries.items():
        attr, parse = _KEYS[key]
        parsed = parse(value)
        if attr == "destination_x":
            dest[0] = parsed
        elif attr == "destination_y":
            dest[1] = parsed
        else:
            setattr(cfg, attr, parsed)
    cfg.destination = tuple(dest)
    if cfg.noise_full_file and root is not None and not Path(cfg.noise_full_file).is_absolute():
        cfg.noise_full_file = str(root / cfg.noise_full_file)
    return cfg.validate()


def load_config(path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text, base, root=path.parent)
    if cfg.name == "scenario":
        cfg.name = path.stem
    return cfg
