"""Scenario configuration and pattern files.

Config files are flat ``key = value`` text with ``#`` comments. Every key
has a default (see ``ScenarioConfig``); unknown keys are rejected. Keys:

=============================  ============================================
``seed``, ``rounds``           base seed (unsigned 64-bit) and round count
``pattern_path``               pattern file, relative to the config file;
                               empty draws a random pattern every round
``pattern``                    inline pattern, layers separated by ``/``
``dt``, ``v_max_linear``,      control period and velocity caps
``v_max_angular``
``creep_fraction``,            minimum commanded speed (fraction of the cap)
``stall_timeout``              and the frozen-feedback watchdog, seconds
``sigma``                      ferromagnetic point noise, metres
``miss_probability``           chance a visible brick is missed while searching
``camera_*``                   fov (rad), max_range, width, height,
                               mount_x, mount_y, mount_height
``freeze_probability_align``,  localization freezes per metre, for the
``freeze_probability_place``   pick phase and the carry/place phase
``freeze_duration``,           freeze length (s) and drift per sqrt(metre)
``drift_sigma``
``k_lat``, ``k_fwd``,          tracking gains and range thresholds
``k_yaw``, ``slow_range``,
``stop_threshold``,
``near_range``,
``lost_timeout``
``standoff``, ``gap``          grasp standoff and spacing between bricks
``exploration_step``,          search bounds
``max_search_steps``,
``max_reacquire``,
``exclusion_radius``
``force_threshold``,           gripper contact model
``k_foam``,
``depth_increment``,
``max_press_depth``,
``tilt_tolerance_deg``,
``brick_tilt_max_deg``
``pose_tolerance``,            module success tolerances
``angle_tolerance_deg``
``brick.<C> = L W H``          override a brick class's dimensions
``pile.<C> = x y yaw n``       pile of ``n`` class-C bricks (yaw in degrees)
``pile_jitter``,               per-round pile perturbation (m, degrees)
``pile_yaw_jitter_deg``
``assembly_x``, ``assembly_y``,  wall origin and direction
``assembly_yaw_deg``
``random_pattern_min``,        length range and layer width of generated
``random_pattern_max``,        patterns
``random_layer_width``
=============================  ============================================
"""

from __future__ import annotations

import dataclasses
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    ConfigError,
    EmptyPattern,
    InvalidToken,
    MalformedValue,
    UnknownKey,
    UnsatisfiablePile,
)
from .planner import DEFAULT_CATALOG, BrickClass, BrickSpec, flatten

# fitted against the reference module failure rates by ``brickwork calibrate``
CALIBRATED_FREEZE_ALIGN = 0.07422
CALIBRATED_FREEZE_PLACE = 0.75


@dataclass(frozen=True)
class PileSpec:
    brick_class: BrickClass
    x: float
    y: float
    yaw_deg: float
    count: int


DEFAULT_PILES = (
    PileSpec(BrickClass.R, 12.0, 0.0, 90.0, 12),
    PileSpec(BrickClass.G, 5.0, 14.0, 0.0, 12),
    PileSpec(BrickClass.B, -10.0, 12.0, 30.0, 12),
)


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 42
    rounds: int = 50
    pattern_path: str = ""
    pattern: tuple[tuple[BrickClass, ...], ...] | None = None
    dt: float = 0.02
    v_max_linear: float = 0.5
    v_max_angular: float = 0.5
    creep_fraction: float = 0.05
    stall_timeout: float = 5.0
    sigma: float = 0.005
    miss_probability: float = 0.0
    camera_fov: float = 1.2
    camera_max_range: float = 25.0
    camera_width: int = 640
    camera_height: int = 480
    camera_mount_x: float = 0.0
    camera_mount_y: float = 0.0
    camera_mount_height: float = 0.5
    freeze_probability_align: float = CALIBRATED_FREEZE_ALIGN
    freeze_probability_place: float = CALIBRATED_FREEZE_PLACE
    freeze_duration: float = 3.0
    drift_sigma: float = 0.0
    k_lat: float = 0.5
    k_fwd: float = 0.2
    k_yaw: float = 1.0
    slow_range: float = 3.0
    stop_threshold: float = 2.75
    near_range: float = 2.5
    lost_timeout: float = 2.0
    standoff: float = 0.7
    gap: float = 0.0
    exploration_step: float = 2.0
    max_search_steps: int = 20
    max_reacquire: int = 10
    exclusion_radius: float = 0.2
    force_threshold: float = 55.0
    k_foam: float = 5000.0
    depth_increment: float = 0.001
    max_press_depth: float = 0.05
    tilt_tolerance_deg: float = 10.0
    brick_tilt_max_deg: float = 0.0
    pose_tolerance: float = 0.10
    angle_tolerance_deg: float = 5.0
    catalog: dict[BrickClass, BrickSpec] = field(default_factory=lambda: dict(DEFAULT_CATALOG))
    piles: tuple[PileSpec, ...] = DEFAULT_PILES
    pile_jitter: float = 1.5
    pile_yaw_jitter_deg: float = 15.0
    assembly_x: float = 0.0
    assembly_y: float = 0.0
    assembly_yaw_deg: float = 0.0
    random_pattern_min: int = 6
    random_pattern_max: int = 8
    random_layer_width: int = 4

    def with_overrides(self, **changes) -> ScenarioConfig:
        cfg = dataclasses.replace(self, **changes)
        validate(cfg)
        return cfg

    def supply(self) -> Counter:
        out: Counter = Counter()
        for p in self.piles:
            out[p.brick_class] += p.count
        return out


def _field_types() -> dict[str, type]:
    hints = {"int": int, "float": float, "str": str}
    out = {}
    for f in dataclasses.fields(ScenarioConfig):
        if f.type in hints:
            out[f.name] = hints[f.type]
    return out


SCALAR_KEYS = _field_types()


def _parse_number(key: str, raw: str, kind: type):
    try:
        value = kind(raw)
    except ValueError:
        raise MalformedValue(f"{key}: expected {kind.__name__}, got {raw!r}") from None
    if kind is float and not math.isfinite(value):
        raise MalformedValue(f"{key}: value must be finite")
    return value


def _brick_class(key: str, token: str) -> BrickClass:
    try:
        return BrickClass(token)
    except ValueError:
        raise UnknownKey(f"{key}: unknown brick class {token!r}") from None


def _floats(key: str, raw: str, n: int) -> list[float]:
    parts = raw.split()
    if len(parts) != n:
        raise MalformedValue(f"{key}: expected {n} numbers, got {raw!r}")
    return [_parse_number(key, p, float) for p in parts]


def parse_pattern(text: str, *, layer_separator: str | None = None) -> list[list[BrickClass]]:
    """Parse pattern text: one layer per line (bottom first), ``#`` comments."""
    lines = text.split(layer_separator) if layer_separator else text.splitlines()
    layers = []
    for lineno, line in enumerate(lines, start=1):
        body = line.split("#", 1)[0]
        layer = []
        col = 0
        for token in body.split():
            col = body.index(token, col) + 1
            try:
                layer.append(BrickClass(token))
            except ValueError:
                raise InvalidToken(lineno, col, token) from None
            col += len(token) - 1
        if layer:
            layers.append(layer)
    if not layers:
        raise EmptyPattern("pattern contains no bricks")
    return layers


def parse_pattern_file(text: str) -> list[list[BrickClass]]:
    return parse_pattern(text)


def load_pattern(path: str | Path) -> list[list[BrickClass]]:
    return parse_pattern(Path(path).read_text(encoding="utf-8"))


def parse_config(text: str, base_dir: str | Path | None = None) -> ScenarioConfig:
    """Parse ``key = value`` text into a validated ``ScenarioConfig``.

    ``pattern_path`` is resolved against ``base_dir`` and loaded so pile
    supply can be checked; I/O errors propagate as ``OSError``.
    """
    values: dict = {}
    catalog = dict(DEFAULT_CATALOG)
    piles: dict[BrickClass, PileSpec] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise MalformedValue(f"line {lineno}: expected 'key = value', got {body!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key in SCALAR_KEYS:
            kind = SCALAR_KEYS[key]
            values[key] = raw if kind is str else _parse_number(key, raw, kind)
        elif key == "pattern":
            values["pattern"] = tuple(tuple(layer) for layer in parse_pattern(raw, layer_separator="/"))
        elif key.startswith("brick."):
            cls = _brick_class(key, key[6:])
            length, width, height = _floats(key, raw, 3)
            try:
                catalog[cls] = BrickSpec(cls, length, width, height)
            except ValueError as e:
                raise MalformedValue(f"{key}: {e}") from None
        elif key.startswith("pile."):
            cls = _brick_class(key, key[5:])
            parts = raw.split()
            if len(parts) != 4:
                raise MalformedValue(f"{key}: expected 'x y yaw_deg count', got {raw!r}")
            x, y, yaw = (_parse_number(key, p, float) for p in parts[:3])
            count = _parse_number(key, parts[3], int)
            piles[cls] = PileSpec(cls, x, y, yaw, count)
        else:
            raise UnknownKey(f"line {lineno}: unknown key {key!r}")
    if piles:
        values["piles"] = tuple(piles[c] for c in BrickClass if c in piles)
    values["catalog"] = catalog
    pattern_path = values.get("pattern_path", "")
    if pattern_path and "pattern" not in values:
        path = Path(pattern_path)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        values["pattern_path"] = str(path)
        values["pattern"] = tuple(tuple(layer) for layer in load_pattern(path))
    cfg = ScenarioConfig(**values)
    validate(cfg)
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)


def validate(cfg: ScenarioConfig) -> None:
    if not (0 <= cfg.seed < 2**64):
        raise MalformedValue("seed must be an unsigned 64-bit integer")
    if cfg.rounds < 1:
        raise MalformedValue("rounds must be >= 1")
    positive = ("dt", "v_max_linear", "v_max_angular", "stall_timeout", "camera_fov",
                "camera_max_range", "k_foam", "depth_increment", "max_press_depth",
                "force_threshold", "lost_timeout", "exploration_step", "pose_tolerance",
                "angle_tolerance_deg", "stop_threshold", "slow_range")
    for name in positive:
        if getattr(cfg, name) <= 0:
            raise MalformedValue(f"{name} must be positive")
    non_negative = ("sigma", "drift_sigma", "freeze_duration", "freeze_probability_align",
                    "freeze_probability_place", "miss_probability", "gap", "creep_fraction",
                    "k_lat", "k_fwd", "k_yaw", "exclusion_radius", "pile_jitter",
                    "pile_yaw_jitter_deg", "brick_tilt_max_deg", "tilt_tolerance_deg",
                    "max_search_steps", "max_reacquire", "standoff")
    for name in non_negative:
        if getattr(cfg, name) < 0:
            raise MalformedValue(f"{name} must be non-negative")
    for name in ("freeze_probability_align", "freeze_probability_place", "miss_probability"):
        if getattr(cfg, name) > 1:
            raise MalformedValue(f"{name} must be <= 1")
    if not (0 < cfg.creep_fraction < 1):
        raise MalformedValue("creep_fraction must lie in (0, 1)")
    if not (0 < cfg.near_range <= cfg.stop_threshold <= cfg.slow_range):
        raise MalformedValue("range thresholds must satisfy 0 < near_range <= stop_threshold <= slow_range")
    if not (0 <= cfg.standoff < 1.0):
        raise MalformedValue("standoff must lie in [0, arm reach)")
    if cfg.camera_fov >= math.pi:
        raise MalformedValue("camera_fov must be below pi")
    if cfg.camera_width < 1 or cfg.camera_height < 1:
        raise MalformedValue("camera dimensions must be positive")
    if not (1 <= cfg.random_pattern_min <= cfg.random_pattern_max) or cfg.random_layer_width < 1:
        raise MalformedValue("random pattern bounds must satisfy 1 <= min <= max, width >= 1")
    for p in cfg.piles:
        if p.count < 0:
            raise MalformedValue(f"pile {p.brick_class}: count must be non-negative")
    if len({p.brick_class for p in cfg.piles}) != len(cfg.piles):
        raise MalformedValue("at most one pile per brick class")
    supply = cfg.supply()
    if cfg.pattern is not None:
        demand = Counter(flatten(cfg.pattern))
        for cls, n in demand.items():
            if cls not in cfg.catalog:
                raise ConfigError(f"pattern uses unknown brick class {cls}")
            if n > supply[cls]:
                raise UnsatisfiablePile(f"pattern needs {n} {cls} bricks, piles hold {supply[cls]}")
    else:
        stocked = [c for c in BrickClass if supply[c] > 0]
        if not stocked:
            raise UnsatisfiablePile("random patterns need at least one stocked pile")
        short = [c for c in stocked if supply[c] < cfg.random_pattern_max]
        if short:
            raise UnsatisfiablePile(
                f"random patterns of up to {cfg.random_pattern_max} bricks may exceed the "
                f"{', '.join(map(str, short))} pile supply")
