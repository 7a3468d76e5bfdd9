"""One design step taken apart: sensitivities to spline coefficients to front speed.

The optimization loop hides the chain that turns element sensitivities
into a boundary motion. This script runs that chain once on a small
stress-constrained plate and dumps each stage (density sensitivities,
projected coefficient gradients, the capped velocity field sampled at
element centroids) as CSV columns for plotting.
"""

import csv
from pathlib import Path

import numpy as np

from vfls.bspline import velocity_field_from_knots
from vfls.config import ProblemConfig
from vfls.driver import analyze_state, build_problem
from vfls.levelset import density_from_levelset
from vfls.sensitivity import project_to_coefficients

OUT = Path(__file__).parent / "out" / "velocity_anatomy.csv"

config = ProblemConfig(
    nx=40,
    ny=40,
    stress_constraint=True,
    stress_limit=1.3,
    p=8.0,
    knot_interval=2.0,
    hole_rows=3,
    hole_cols=3,
    hole_radius=5.0,
).validate()

problem = build_problem(config)
grid = problem.grid0
density = density_from_levelset(grid, problem.mesh, problem.delta_h)
analysis = analyze_state(problem, density)
print(f"initial volume fraction {analysis.volume:.4f}, "
      f"stress measure {analysis.sigma_pm:.4f}")

# Stage 1: raw per-element sensitivities (objective and stress constraint).
dvol = analysis.dvol
dstress = analysis.constraint_grads[0]

# Stage 2: both fields projected onto the B-spline coefficient basis. Only
# coefficients whose support crosses the interface band pick up weight.
dvol_db = project_to_coefficients(
    dvol, grid, problem.mesh, problem.surface, problem.delta_h, problem.basis
).ravel()
dstress_db = project_to_coefficients(
    dstress, grid, problem.mesh, problem.surface, problem.delta_h, problem.basis
).ravel()
print(f"{np.count_nonzero(dvol_db)} of {dvol_db.size} coefficients carry "
      "interface weight")

# Stage 3: a descent-flavored coefficient step evaluated back at centroids
# and capped. The loop would get this step from MMA; a scaled steepest
# descent mix keeps the demo self-contained.
step = -(dvol_db / max(np.abs(dvol_db).max(), 1e-30)
         + dstress_db / max(np.abs(dstress_db).max(), 1e-30))
step *= config.coeff_bound
knots = np.asarray(problem.basis @ step)
velocity, scale = velocity_field_from_knots(knots, config.v_max)
print(f"peak knot speed {np.abs(knots).max():.4f}, cap scale {scale:.4f}")

OUT.parent.mkdir(parents=True, exist_ok=True)
with OUT.open("w", newline="") as handle:
    writer = csv.writer(handle)
    writer.writerow(["x", "y", "density", "dvol", "dstress", "velocity"])
    for eid, (cx, cy) in enumerate(problem.mesh.centroids):
        writer.writerow([
            f"{cx:.3f}", f"{cy:.3f}", f"{density[eid]:.6f}",
            f"{dvol[eid]:.6e}", f"{dstress[eid]:.6e}",
            f"{velocity[eid]:.6e}",
        ])
print(f"wrote {OUT}")
