"""Finite-difference verification of every analytic gradient path.

The checks run on small fixtures derived from a user configuration: the
constraint toggles, material, and aggregation parameters carry over while the
mesh shrinks to a size where dense finite differencing is cheap. Results
report the worst relative error over significant entries.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .buckling import solve_buckling_modes
from .config import ProblemConfig
from .driver import Problem, build_problem
from .fem import (
    ReducedFactorization,
    assemble_stiffness,
    assemble_stress_stiffness,
    element_stresses,
    solve_equilibrium,
)
from .levelset import (
    LevelSetGrid,
    advect_upwind,
    density_from_levelset,
    element_centroid_phi,
    smoothed_dirac,
)
from .sensitivity import (
    buckling_eigen_sensitivity,
    ks_aggregate,
    ks_sensitivity,
    pnorm_stress,
    pnorm_stress_sensitivity,
    project_to_coefficients,
    volume_and_sensitivity,
)

STRESS_TOLERANCE = 1e-4
BUCKLING_TOLERANCE = 1e-3
PROJECTION_TOLERANCE = 5e-2


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    tolerance: float
    passed: bool


def _small_problem(
    config: ProblemConfig, n: int, knot_fraction: float = 0.25
) -> Problem:
    length = n * config.h
    small = dataclasses.replace(
        config,
        nx=n,
        ny=n,
        knot_interval=length * knot_fraction,
        hole_rows=0,
        hole_cols=0,
        max_iterations=1,
    )
    return build_problem(small.validate())


def _seeded_density(problem: Problem, seed: int = 7) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(0.3, 1.0, problem.mesh.n_active)


def _max_rel_error(analytic: np.ndarray, reference: np.ndarray, floor: float):
    scale = np.abs(reference).max()
    if scale == 0.0:
        return 0.0
    significant = np.abs(reference) > floor * scale
    if not significant.any():
        return 0.0
    err = np.abs(analytic[significant] - reference[significant])
    return float((err / np.abs(reference[significant])).max())


def _scaled_error(analytic: np.ndarray, reference: np.ndarray) -> float:
    """Worst deviation relative to the largest reference entry.

    Central differencing through a linear solve carries an absolute noise
    floor of roughly solver-epsilon / step, so entries far below the
    gradient scale cannot be compared entry-relative at any tolerance.
    """
    scale = np.abs(reference).max()
    if scale == 0.0:
        return float(np.abs(analytic).max())
    return float(np.abs(analytic - reference).max() / scale)


def check_stress_gradient(config: ProblemConfig, step: float = 1e-6) -> CheckResult:
    """Central FD on the p-norm stress measure versus the adjoint gradient."""
    problem = _small_problem(config, 6)
    mesh, material = problem.mesh, problem.material
    density = _seeded_density(problem)

    def measure(rho):
        k = assemble_stiffness(mesh, rho, material)
        fact = ReducedFactorization(k, mesh)
        u = solve_equilibrium(k, mesh, problem.loads_stress, fact)
        return pnorm_stress(element_stresses(mesh, u, rho, material), config.p)

    k = assemble_stiffness(mesh, density, material)
    fact = ReducedFactorization(k, mesh)
    u = solve_equilibrium(k, mesh, problem.loads_stress, fact)
    analytic = pnorm_stress_sensitivity(mesh, u, density, material, config.p, fact)

    fd = np.empty(mesh.n_active)
    for e in range(mesh.n_active):
        bump = np.zeros(mesh.n_active)
        bump[e] = step
        fd[e] = (measure(density + bump) - measure(density - bump)) / (2 * step)
    err = _scaled_error(analytic, fd)
    return CheckResult("stress-pnorm-adjoint", err, STRESS_TOLERANCE, err <= STRESS_TOLERANCE)


def _buckling_measures(problem: Problem, density: np.ndarray):
    cfg = problem.config
    mesh, material = problem.mesh, problem.material
    k = assemble_stiffness(mesh, density, material)
    fact = ReducedFactorization(k, mesh)
    u = solve_equilibrium(k, mesh, problem.loads_buckling, fact)
    g = assemble_stress_stiffness(mesh, u, density, material)
    modes = solve_buckling_modes(
        k, g, mesh, min(cfg.n_modes, 4), factorization=fact, method="dense"
    )
    mu = 1.0 / modes.load_factors
    return (
        float(modes.load_factors[0]),
        ks_aggregate(mu, cfg.gamma),
        modes,
        u,
        fact,
    )


def check_buckling_gradients(config: ProblemConfig, step: float = 1e-5):
    """Central FD on lambda_1 and on the KS aggregate of 1/lambda."""
    problem = _small_problem(config, 6)
    mesh, material = problem.mesh, problem.material
    density = _seeded_density(problem)

    lam1, ks, modes, u, fact = _buckling_measures(problem, density)
    dlam = buckling_eigen_sensitivity(mesh, u, density, material, modes, fact)
    mu = 1.0 / modes.load_factors
    dmu = -dlam / modes.load_factors[:, None] ** 2
    analytic_lam1 = dlam[0]
    analytic_ks = ks_sensitivity(mu, dmu, problem.config.gamma)

    fd_lam1 = np.empty(mesh.n_active)
    fd_ks = np.empty(mesh.n_active)
    for e in range(mesh.n_active):
        bump = np.zeros(mesh.n_active)
        bump[e] = step
        lam_p, ks_p = _buckling_measures(problem, density + bump)[:2]
        lam_m, ks_m = _buckling_measures(problem, density - bump)[:2]
        fd_lam1[e] = (lam_p - lam_m) / (2 * step)
        fd_ks[e] = (ks_p - ks_m) / (2 * step)

    err_lam = _max_rel_error(analytic_lam1, fd_lam1, floor=1e-8)
    err_ks = _max_rel_error(analytic_ks, fd_ks, floor=1e-8)
    return [
        CheckResult(
            "buckling-lambda1-adjoint", err_lam, BUCKLING_TOLERANCE,
            err_lam <= BUCKLING_TOLERANCE,
        ),
        CheckResult(
            "buckling-ks-chain", err_ks, BUCKLING_TOLERANCE,
            err_ks <= BUCKLING_TOLERANCE,
        ),
    ]


def disk_levelset(problem: Problem, center, radius: float) -> LevelSetGrid:
    """Signed distance to a material disk, exact away from the center."""
    mesh = problem.mesh
    coords = mesh.node_coords()
    phi = radius - np.hypot(coords[:, 0] - center[0], coords[:, 1] - center[1])
    return LevelSetGrid(phi.reshape(mesh.ny + 1, mesh.nx + 1), mesh.h)


def strip_levelset(problem: Problem, left: float, right: float) -> LevelSetGrid:
    """Signed distance to a vertical material strip left <= x <= right."""
    mesh = problem.mesh
    coords = mesh.node_coords()
    phi = np.minimum(coords[:, 0] - left, right - coords[:, 0])
    return LevelSetGrid(phi.reshape(mesh.ny + 1, mesh.nx + 1), mesh.h)


def check_projection(config: ProblemConfig, step: float = 1e-3) -> CheckResult:
    """FD through one advection step versus the projected volume gradient.

    The velocity field of a single perturbed coefficient transports the front
    for one unit pseudo-time step; central differencing of the resulting
    volume is compared to the interface projection of dV/drho. The fixture
    is a vertical strip on a rectangular patch with a single-span spline:
    straight interfaces keep the discrete gradient norm at exactly 1, so
    the comparison isolates the projection formula itself. Coefficients
    count as interface-supported when they carry at least 1% of the largest
    basis weight inside the Dirac band.
    """
    rect = dataclasses.replace(config, lbracket=False)
    problem = _small_problem(rect, 10, knot_fraction=1.0)
    mesh = problem.mesh
    surface = problem.surface
    grid = strip_levelset(problem, 0.22 * mesh.lx, 0.78 * mesh.lx)

    density = density_from_levelset(grid, mesh, problem.delta_h)
    _, dvol = volume_and_sensitivity(density, mesh)
    analytic = project_to_coefficients(
        dvol, grid, mesh, surface, problem.delta_h, problem.basis
    ).ravel()

    def volume_after(coeffs):
        velocity = np.asarray(problem.basis @ coeffs)
        moved = advect_upwind(grid, velocity, 1.0, mesh)
        rho = density_from_levelset(moved, mesh, problem.delta_h)
        return volume_and_sensitivity(rho, mesh)[0]

    n = surface.n_coeffs
    fd = np.empty(n)
    for idx in range(n):
        bump = np.zeros(n)
        bump[idx] = step
        fd[idx] = (volume_after(bump) - volume_after(-bump)) / (2 * step)

    band = smoothed_dirac(
        element_centroid_phi(grid, mesh), problem.delta_h
    )
    weight = np.asarray(problem.basis.T @ band).ravel()
    supported = weight > 0.01 * weight.max()
    err = float(
        np.max(
            np.abs(analytic[supported] - fd[supported]) / np.abs(fd[supported])
        )
    )
    return CheckResult(
        "spline-projection", err, PROJECTION_TOLERANCE, err <= PROJECTION_TOLERANCE
    )


def run_all(config: ProblemConfig) -> list[CheckResult]:
    """Every gradient check relevant to the configured constraints."""
    results = []
    if config.stress_constraint:
        results.append(check_stress_gradient(config))
    if config.buckling_constraint:
        results.extend(check_buckling_gradients(config))
    results.append(check_projection(config))
    return results
