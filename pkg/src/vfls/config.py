"""Problem configuration: a flat key-value text format with dotted keys.

Example::

    # compressed square, stress constraint only
    mesh.nx = 300
    mesh.ny = 300
    mesh.h = 1.0
    constraints.stress = true
    constraints.stress_limit = 1.3

Unknown keys, missing required keys, and out-of-range values raise
ConfigError naming the offending field.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    """Invalid, unknown, or out-of-range configuration entry."""


@dataclass
class ProblemConfig:
    """Complete description of one optimization run."""

    # Mesh and geometry.
    nx: int = 100
    ny: int = 100
    h: float = 1.0
    lbracket: bool = False
    cutout_fraction: float = 0.6

    # Material.
    E: float = 1.0
    E_min: float = 1e-6
    nu: float = 0.3

    # Load magnitudes for the stress and buckling cases.
    stress_load: float = 1.0
    buckling_load: float = 1e-3

    # Constraint toggles and bounds.
    stress_constraint: bool = True
    stress_limit: float = 1.3
    buckling_constraint: bool = False
    buckling_limit: float = 0.15

    # Aggregation.
    p: float = 8.0
    gamma: float = 50.0
    n_modes: int = 6

    # B-spline velocity surface.
    degree_x: int = 3
    degree_y: int = 2
    knot_interval: float = 1.0

    # Velocity and optimizer limits.
    v_max: float = 0.1
    coeff_bound: float = 0.2
    move_limit: float = 0.2

    # Run control.
    max_iterations: int = 600
    tolerance: float = 1e-4

    # Level set initialization and maintenance.
    hole_rows: int = 4
    hole_cols: int = 4
    hole_radius: float = 6.0
    band_width: float = 0.0  # 0 means the default 2 h
    reinit_sweeps: int = 20

    # Output.
    out_dir: str = "out"
    write_vtk: bool = False

    # Reserved; the core is deterministic and does not consume it.
    seed: int = 0

    def validate(self) -> "ProblemConfig":
        def require(cond: bool, field_name: str, message: str):
            if not cond:
                raise ConfigError(f"{field_name}: {message}")

        require(self.nx >= 1, "mesh.nx", "must be a positive element count")
        require(self.ny >= 1, "mesh.ny", "must be a positive element count")
        require(self.h > 0.0, "mesh.h", "must be positive")
        require(
            0.0 < self.cutout_fraction < 1.0,
            "mesh.cutout_fraction",
            "must lie in (0, 1)",
        )
        require(self.E > 0.0, "material.E", "must be positive")
        require(
            0.0 < self.E_min < self.E,
            "material.E_min",
            "must lie strictly between 0 and material.E",
        )
        require(-1.0 < self.nu < 0.5, "material.nu", "must lie in (-1, 0.5)")
        require(
            self.stress_constraint or self.buckling_constraint,
            "constraints.stress",
            "at least one constraint must be enabled",
        )
        require(self.stress_limit > 0.0, "constraints.stress_limit", "must be positive")
        require(
            self.buckling_limit > 0.0, "constraints.buckling_limit", "must be positive"
        )
        require(self.p >= 1.0, "aggregation.p", "must be at least 1")
        require(self.gamma > 0.0, "aggregation.gamma", "must be positive")
        require(self.n_modes >= 1, "aggregation.n_modes", "must be at least 1")
        require(self.degree_x >= 0, "bspline.degree_x", "must be nonnegative")
        require(self.degree_y >= 0, "bspline.degree_y", "must be nonnegative")
        require(self.knot_interval > 0.0, "bspline.knot_interval", "must be positive")
        require(self.v_max > 0.0, "velocity.v_max", "must be positive")
        require(self.coeff_bound > 0.0, "velocity.coeff_bound", "must be positive")
        require(0.0 < self.move_limit <= 1.0, "mma.move_limit", "must lie in (0, 1]")
        require(self.max_iterations >= 0, "run.max_iterations", "must be nonnegative")
        require(self.tolerance > 0.0, "run.tolerance", "must be positive")
        require(self.hole_rows >= 0, "levelset.hole_rows", "must be nonnegative")
        require(self.hole_cols >= 0, "levelset.hole_cols", "must be nonnegative")
        require(
            self.hole_radius > 0.0 or self.hole_rows * self.hole_cols == 0,
            "levelset.hole_radius",
            "must be positive when holes are requested",
        )
        require(self.band_width >= 0.0, "levelset.band_width", "must be nonnegative")
        require(self.reinit_sweeps >= 0, "levelset.reinit_sweeps", "must be nonnegative")
        # CFL with dt = 1: capped velocities must respect 0.5 h.
        require(
            self.v_max <= 0.5 * self.h,
            "velocity.v_max",
            f"must not exceed 0.5 * mesh.h = {0.5 * self.h} (CFL with dt = 1)",
        )
        return self

    @property
    def effective_band_width(self) -> float:
        return self.band_width if self.band_width > 0.0 else 2.0 * self.h


# External dotted key -> (attribute, type) map.
_KEYMAP = {
    "mesh.nx": ("nx", int),
    "mesh.ny": ("ny", int),
    "mesh.h": ("h", float),
    "mesh.lbracket": ("lbracket", bool),
    "mesh.cutout_fraction": ("cutout_fraction", float),
    "material.E": ("E", float),
    "material.E_min": ("E_min", float),
    "material.nu": ("nu", float),
    "loads.stress": ("stress_load", float),
    "loads.buckling": ("buckling_load", float),
    "constraints.stress": ("stress_constraint", bool),
    "constraints.stress_limit": ("stress_limit", float),
    "constraints.buckling": ("buckling_constraint", bool),
    "constraints.buckling_limit": ("buckling_limit", float),
    "aggregation.p": ("p", float),
    "aggregation.gamma": ("gamma", float),
    "aggregation.n_modes": ("n_modes", int),
    "bspline.degree_x": ("degree_x", int),
    "bspline.degree_y": ("degree_y", int),
    "bspline.knot_interval": ("knot_interval", float),
    "velocity.v_max": ("v_max", float),
    "velocity.coeff_bound": ("coeff_bound", float),
    "mma.move_limit": ("move_limit", float),
    "run.max_iterations": ("max_iterations", int),
    "run.tolerance": ("tolerance", float),
    "run.seed": ("seed", int),
    "levelset.hole_rows": ("hole_rows", int),
    "levelset.hole_cols": ("hole_cols", int),
    "levelset.hole_radius": ("hole_radius", float),
    "levelset.band_width": ("band_width", float),
    "levelset.reinit_sweeps": ("reinit_sweeps", int),
    "output.dir": ("out_dir", str),
    "output.vtk": ("write_vtk", bool),
}

_ATTR_TO_KEY = {attr: key for key, (attr, _) in _KEYMAP.items()}


def _coerce(key: str, raw: str, kind):
    raw = raw.strip()
    if kind is bool:
        lowered = raw.lower()
        if lowered in ("true", "yes", "on", "1"):
            return True
        if lowered in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if kind is str:
        return raw
    try:
        if kind is int:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        return kind(raw)
    except ValueError:
        raise ConfigError(
            f"{key}: expected {kind.__name__}, got {raw!r}"
        ) from None


def parse_config_text(text: str) -> ProblemConfig:
    """Parse the flat key-value format into a validated ProblemConfig."""
    entries = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(
                f"line {lineno}: expected 'key = value', got {line.strip()!r}"
            )
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _KEYMAP:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = raw
    cfg = ProblemConfig()
    for key, raw in entries.items():
        attr, kind = _KEYMAP[key]
        setattr(cfg, attr, _coerce(key, raw, kind))
    return cfg.validate()


def load_config(path) -> ProblemConfig:
    return parse_config_text(Path(path).read_text())


def config_to_text(cfg: ProblemConfig) -> str:
    """Serialize a config in the same flat format (round-trips exactly)."""
    lines = []
    for f in fields(ProblemConfig):
        key = _ATTR_TO_KEY[f.name]
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
