"""File writers for run results.

Convergence history and density rasters go to CSV with full round-trip
precision, the density also to a binary PGM preview, and optionally the
density plus level set to a legacy ASCII VTK structured-points file.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .driver import RunHistory
from .levelset import LevelSetGrid
from .mesh import StructuredMesh

HISTORY_HEADER = "iter,volume,sigma_pm,ks_mu,lambda1,max_vn,rel_change"


def _fmt(value: float) -> str:
    # repr round-trips float64 exactly; normalize the nan spelling.
    if math.isnan(value):
        return "nan"
    return repr(float(value))


def write_history_csv(history: RunHistory, path: Path) -> None:
    lines = [HISTORY_HEADER]
    for r in history:
        lines.append(
            f"{r.iteration},{_fmt(r.volume)},{_fmt(r.sigma_pm)},"
            f"{_fmt(r.ks_mu)},{_fmt(r.lambda1)},{_fmt(r.max_vn)},"
            f"{_fmt(r.rel_change)}"
        )
    path.write_text("\n".join(lines) + "\n")


def full_raster(mesh: StructuredMesh, values: np.ndarray, fill: float = 0.0):
    """Scatter active-element values onto the full (ny, nx) rectangle."""
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_active,):
        raise ValueError("value length does not match active element count")
    out = np.full(mesh.ny * mesh.nx, fill)
    out[mesh.active_ids] = values
    return out.reshape(mesh.ny, mesh.nx)


def write_field_csv(mesh: StructuredMesh, values: np.ndarray, path: Path) -> None:
    """Plain-text matrix, one row per element row, top row first (y descending)."""
    raster = np.flipud(full_raster(mesh, values))
    lines = [",".join(_fmt(v) for v in row) for row in raster]
    path.write_text("\n".join(lines) + "\n")


def write_density_pgm(mesh: StructuredMesh, density: np.ndarray, path: Path) -> None:
    """Binary 8-bit PGM, one pixel per element, solid material rendered black."""
    raster = np.flipud(full_raster(mesh, density))
    pixels = np.rint(255.0 * (1.0 - np.clip(raster, 0.0, 1.0))).astype(np.uint8)
    header = f"P5\n{mesh.nx} {mesh.ny}\n255\n".encode("ascii")
    path.write_bytes(header + pixels.tobytes())


def write_vtk(
    mesh: StructuredMesh,
    density: np.ndarray,
    grid: LevelSetGrid,
    path: Path,
) -> None:
    """Legacy ASCII structured-points file: cell density plus nodal level set."""
    lines = [
        "# vtk DataFile Version 3.0",
        "vfls result",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {mesh.nx + 1} {mesh.ny + 1} 1",
        "ORIGIN 0 0 0",
        f"SPACING {_fmt(mesh.h)} {_fmt(mesh.h)} {_fmt(mesh.h)}",
        f"CELL_DATA {mesh.nx * mesh.ny}",
        "SCALARS density float 1",
        "LOOKUP_TABLE default",
    ]
    lines.extend(_fmt(v) for v in full_raster(mesh, density).ravel())
    lines.extend([
        f"POINT_DATA {(mesh.nx + 1) * (mesh.ny + 1)}",
        "SCALARS phi float 1",
        "LOOKUP_TABLE default",
    ])
    lines.extend(_fmt(v) for v in np.asarray(grid.phi, dtype=float).ravel())
    path.write_text("\n".join(lines) + "\n")


def write_outputs(
    history: RunHistory,
    density: np.ndarray,
    grid: LevelSetGrid,
    mesh: StructuredMesh,
    out_dir,
    von_mises: np.ndarray | None = None,
    vtk: bool = False,
) -> dict[str, Path]:
    """Write every configured artifact into out_dir, returning name -> path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "history": out / "convergence.csv",
        "density": out / "density.csv",
        "preview": out / "density.pgm",
    }
    write_history_csv(history, paths["history"])
    write_field_csv(mesh, density, paths["density"])
    write_density_pgm(mesh, density, paths["preview"])
    if von_mises is not None:
        paths["von_mises"] = out / "von_mises.csv"
        write_field_csv(mesh, von_mises, paths["von_mises"])
    if vtk:
        paths["vtk"] = out / "result.vtk"
        write_vtk(mesh, density, grid, paths["vtk"])
    return paths


def read_field_csv(path) -> np.ndarray:
    """Inverse of write_field_csv, returning the (ny, nx) y-descending raster."""
    return np.loadtxt(path, delimiter=",", ndmin=2)
