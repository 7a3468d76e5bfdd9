"""Built-in benchmark problems.

Two geometries, each with a stress-only, buckling-only, and combined
variant. The compressed square is a 300 x 300 grid loaded downward at the
center of the top edge with the bottom edge fully fixed. The L-bracket is a
100 x 100 grid with the upper-right 60 x 60 block removed, hung from the top
of its vertical leg and loaded at the free corner of the horizontal leg.
"""

from __future__ import annotations

import dataclasses

from .config import ProblemConfig

_SQUARE = dict(
    nx=300, ny=300, h=1.0,
    stress_limit=1.3, p=8.0,
    buckling_limit=0.15, gamma=50.0, n_modes=6,
    stress_load=1.0, buckling_load=1e-3,
    knot_interval=3.0,
    v_max=0.1, coeff_bound=0.2, move_limit=0.2,
    hole_rows=4, hole_cols=4, hole_radius=18.0,
    max_iterations=600,
)

_LBRACKET = dict(
    nx=100, ny=100, h=1.0, lbracket=True, cutout_fraction=0.6,
    stress_limit=0.65, p=10.0,
    buckling_limit=2.5, gamma=50.0, n_modes=6,
    stress_load=1.0, buckling_load=1e-3,
    knot_interval=2.0,
    v_max=0.1, coeff_bound=0.2, move_limit=0.2,
    hole_rows=3, hole_cols=3, hole_radius=5.0,
    max_iterations=600,
)


def _make(base: dict, **overrides) -> ProblemConfig:
    return ProblemConfig(**{**base, **overrides}).validate()


_FACTORIES = {
    "square-stress": lambda: _make(
        _SQUARE, stress_constraint=True, buckling_constraint=False
    ),
    "square-buckling": lambda: _make(
        _SQUARE, stress_constraint=False, buckling_constraint=True
    ),
    "square-combined": lambda: _make(
        _SQUARE, stress_constraint=True, buckling_constraint=True
    ),
    "lbracket-stress": lambda: _make(
        _LBRACKET, stress_constraint=True, buckling_constraint=False
    ),
    "lbracket-buckling": lambda: _make(
        _LBRACKET, stress_constraint=False, buckling_constraint=True,
        max_iterations=800,
    ),
    "lbracket-combined": lambda: _make(
        _LBRACKET, stress_constraint=True, buckling_constraint=True,
        max_iterations=800,
    ),
}


def benchmark_names() -> list[str]:
    return sorted(_FACTORIES)


def benchmark_config(name: str) -> ProblemConfig:
    try:
        factory = _FACTORIES[name]
    except KeyError:
        known = ", ".join(benchmark_names())
        raise KeyError(f"unknown benchmark {name!r}; choose from: {known}")
    return factory()


def scaled_square(base: ProblemConfig, n: int) -> ProblemConfig:
    """Resize a square benchmark to an n x n grid, scaling lengths with it."""
    factor = n / base.nx
    return dataclasses.replace(
        base,
        nx=n, ny=n,
        knot_interval=base.knot_interval * factor,
        hole_radius=base.hole_radius * factor,
    ).validate()
