"""Outer optimization loop: analyze, update coefficients, transport the front.

Each iteration analyzes the current level set state (stiffness solve, stress
and buckling branches as configured, volume), projects every density
sensitivity onto the B-spline coefficients, takes one MMA step, evaluates and
caps the velocity field, advects the level set one unit pseudo-time step and
reinitializes it. History rows record the analysis state of each iteration;
on convergence the run stops before applying another update, so the returned
fields match the last row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bspline import (
    BsplineSurface,
    basis_matrix,
    surface_for_domain,
    velocity_field_from_knots,
)
from .buckling import solve_buckling_modes
from .config import ProblemConfig
from .fem import (
    MaterialModel,
    ReducedFactorization,
    assemble_stiffness,
    assemble_stress_stiffness,
    element_stresses,
    solve_equilibrium,
)
from .levelset import (
    HolePattern,
    LevelSetGrid,
    advect_upwind,
    density_from_levelset,
    initialize_with_holes,
    reinitialize,
)
from .mesh import StructuredMesh, build_mesh, lbracket_mask
from .mma import init_mma, mma_update
from .sensitivity import (
    buckling_eigen_sensitivity,
    ks_aggregate,
    ks_sensitivity,
    pnorm_stress,
    pnorm_stress_sensitivity,
    project_to_coefficients,
    volume_and_sensitivity,
)

# Load spreading: node counts along the loaded edge.
SQUARE_STRESS_LOAD_NODES = 6
SQUARE_BUCKLING_LOAD_NODES = 4
LBRACKET_LOAD_NODES = 5

CONSTRAINT_FEASIBILITY_RTOL = 1e-3
# Consecutive sub-tolerance iterations required before declaring convergence.
CONVERGENCE_WINDOW = 5


@dataclass
class RunRecord:
    iteration: int
    volume: float
    sigma_pm: float
    ks_mu: float
    lambda1: float
    max_vn: float
    rel_change: float


@dataclass
class RunHistory:
    records: list[RunRecord] = field(default_factory=list)

    def append(self, record: RunRecord):
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def volumes(self) -> np.ndarray:
        return np.array([r.volume for r in self.records])


@dataclass
class Problem:
    """Everything run_optimization needs, precomputed once."""

    config: ProblemConfig
    mesh: StructuredMesh
    material: MaterialModel
    surface: BsplineSurface
    basis: object  # sparse (n_active, n_coeffs) evaluation matrix
    grid0: LevelSetGrid
    loads_stress: tuple
    loads_buckling: tuple
    delta_h: float


@dataclass
class RunResult:
    history: RunHistory
    density: np.ndarray
    levelset: LevelSetGrid
    status: str  # "converged" or "max-iterations"
    iterations: int


def _centered_top_nodes(nx: int, count: int) -> np.ndarray:
    start = (nx - count + 1) // 2
    return np.arange(start, start + count)


def _square_supports(cfg: ProblemConfig):
    """Bottom edge fully fixed; loads spread over central top nodes."""
    bottom = np.arange(cfg.nx + 1)
    fixed = np.concatenate([2 * bottom, 2 * bottom + 1])

    def top_loads(total: float, count: int):
        top_row = cfg.ny * (cfg.nx + 1)
        nodes = top_row + _centered_top_nodes(cfg.nx, count)
        return tuple((2 * int(n) + 1, -total / count) for n in nodes)

    return fixed, top_loads


def _lbracket_supports(cfg: ProblemConfig):
    """Vertical-leg top edge fixed; load at the horizontal leg's top right."""
    cut_x = int(round(cfg.nx * cfg.cutout_fraction))
    cut_y = int(round(cfg.ny * cfg.cutout_fraction))
    leg_top = np.arange(0, cfg.nx - cut_x + 1) + cfg.ny * (cfg.nx + 1)
    fixed = np.concatenate([2 * leg_top, 2 * leg_top + 1])

    def corner_loads(total: float, count: int = LBRACKET_LOAD_NODES):
        row = (cfg.ny - cut_y) * (cfg.nx + 1)
        nodes = row + np.arange(cfg.nx - count + 1, cfg.nx + 1)
        return tuple((2 * int(n) + 1, -total / count) for n in nodes)

    return fixed, corner_loads


def build_problem(config: ProblemConfig) -> Problem:
    """Assemble mesh, supports, loads, spline surface, and the initial front."""
    config.validate()
    if config.lbracket:
        mask = lbracket_mask(config.nx, config.ny, config.cutout_fraction)
        fixed, make_loads = _lbracket_supports(config)
        loads_stress = make_loads(config.stress_load)
        loads_buckling = make_loads(config.buckling_load)
    else:
        mask = None
        fixed, make_loads = _square_supports(config)
        loads_stress = make_loads(config.stress_load, SQUARE_STRESS_LOAD_NODES)
        loads_buckling = make_loads(
            config.buckling_load, SQUARE_BUCKLING_LOAD_NODES
        )

    primary = loads_stress if config.stress_constraint else loads_buckling
    mesh = build_mesh(
        config.nx, config.ny, config.h,
        active_mask=mask, bc_spec=fixed, load_spec=primary,
    )
    material = MaterialModel(E=config.E, E_min=config.E_min, nu=config.nu)
    surface = surface_for_domain(
        mesh.lx, mesh.ly, config.degree_x, config.degree_y, config.knot_interval
    )
    basis = basis_matrix(surface, mesh.centroids)
    holes = None
    if config.hole_rows * config.hole_cols > 0:
        holes = HolePattern(config.hole_rows, config.hole_cols, config.hole_radius)
    grid0 = initialize_with_holes(mesh, holes)
    return Problem(
        config=config,
        mesh=mesh,
        material=material,
        surface=surface,
        basis=basis,
        grid0=grid0,
        loads_stress=loads_stress,
        loads_buckling=loads_buckling,
        delta_h=config.effective_band_width,
    )


@dataclass
class StateAnalysis:
    """One full analysis of a level set state."""

    volume: float
    dvol: np.ndarray
    constraint_values: np.ndarray
    constraint_grads: np.ndarray  # (m, n_active)
    sigma_pm: float
    ks_mu: float
    lambda1: float


def analyze_state(problem: Problem, density: np.ndarray) -> StateAnalysis:
    """Solve the configured physics at one density state.

    Returns constraint values in normalized form g = value/limit - 1 <= 0
    together with their density gradients.
    """
    cfg = problem.config
    mesh = problem.mesh
    material = problem.material
    k = assemble_stiffness(mesh, density, material)
    fact = ReducedFactorization(k, mesh)

    values, grads = [], []
    sigma_pm = ks_mu = lambda1 = math.nan
    if cfg.stress_constraint:
        u = solve_equilibrium(k, mesh, problem.loads_stress, fact)
        sigma_pm = pnorm_stress(
            element_stresses(mesh, u, density, material), cfg.p
        )
        dsig = pnorm_stress_sensitivity(mesh, u, density, material, cfg.p, fact)
        values.append(sigma_pm / cfg.stress_limit - 1.0)
        grads.append(dsig / cfg.stress_limit)
    if cfg.buckling_constraint:
        u = solve_equilibrium(k, mesh, problem.loads_buckling, fact)
        g = assemble_stress_stiffness(mesh, u, density, material)
        modes = solve_buckling_modes(k, g, mesh, cfg.n_modes, factorization=fact)
        lambda1 = float(modes.load_factors[0])
        dlam = buckling_eigen_sensitivity(mesh, u, density, material, modes, fact)
        mu = 1.0 / modes.load_factors
        dmu = -dlam / modes.load_factors[:, None] ** 2
        ks_mu = ks_aggregate(mu, cfg.gamma)
        dks = ks_sensitivity(mu, dmu, cfg.gamma)
        values.append(ks_mu / cfg.buckling_limit - 1.0)
        grads.append(dks / cfg.buckling_limit)

    volume, dvol = volume_and_sensitivity(density, mesh)
    return StateAnalysis(
        volume=volume,
        dvol=dvol,
        constraint_values=np.array(values),
        constraint_grads=np.array(grads),
        sigma_pm=sigma_pm,
        ks_mu=ks_mu,
        lambda1=lambda1,
    )


def run_optimization(
    problem: Problem,
    config: ProblemConfig | None = None,
    progress=None,
) -> RunResult:
    """Run the optimization loop to convergence or the iteration cap.

    Convergence requires the relative objective change to stay below the
    tolerance for CONVERGENCE_WINDOW consecutive iterations with every
    constraint inside its feasibility tolerance; a single quiet step in an
    otherwise moving run is noise, not a converged design. The terminating
    iteration applies no update (its history row records max_vn = 0), so the
    returned density and level set match the last history row. A capped run
    returns the state after the final update.
    """
    cfg = (config or problem.config).validate()
    mesh = problem.mesh
    surface = problem.surface
    grid = LevelSetGrid(problem.grid0.phi.copy(), problem.grid0.h)

    n_coeffs = surface.n_coeffs
    state = init_mma(
        np.zeros(n_coeffs),
        np.full(n_coeffs, -cfg.coeff_bound),
        np.full(n_coeffs, cfg.coeff_bound),
        cfg.move_limit,
    )
    surface.coeffs = np.zeros_like(surface.coeffs)

    history = RunHistory()
    status = "max-iterations"
    volume_prev = None
    quiet_steps = 0
    obj_scale = None
    con_scales = None
    density = density_from_levelset(grid, mesh, problem.delta_h)

    for it in range(1, cfg.max_iterations + 1):
        density = density_from_levelset(grid, mesh, problem.delta_h)
        try:
            analysis = analyze_state(problem, density)
        except Exception as exc:
            raise type(exc)(f"iteration {it}: {exc}") from exc

        rel = math.nan
        if volume_prev is not None:
            rel = abs(analysis.volume - volume_prev) / max(volume_prev, 1e-12)
        feasible = bool(
            np.all(analysis.constraint_values <= CONSTRAINT_FEASIBILITY_RTOL)
        )
        quiet_steps = quiet_steps + 1 if rel < cfg.tolerance else 0
        if quiet_steps >= CONVERGENCE_WINDOW and feasible:
            record = _make_record(it, analysis, 0.0, rel)
            history.append(record)
            if progress:
                progress(record)
            status = "converged"
            break

        dvol_db = project_to_coefficients(
            analysis.dvol, grid, mesh, surface, problem.delta_h, problem.basis
        ).ravel()
        grads_db = np.array([
            project_to_coefficients(
                gr, grid, mesh, surface, problem.delta_h, problem.basis
            ).ravel()
            for gr in analysis.constraint_grads
        ])
        # MMA behaves best when every gradient is O(1). Raw magnitudes here
        # differ by orders (volume ~1/n per band element, stress spiked at
        # hot spots), which either drowns the objective in the subproblem
        # regularization or hides the cost of a violation. Each function is
        # rescaled by a factor frozen at the first iteration, value and
        # gradient together, so the linearized model stays consistent with
        # the violation it is asked to remove.
        if obj_scale is None:
            peak = float(np.abs(dvol_db).max())
            obj_scale = 1.0 / peak if peak > 0.0 else 1.0
            con_scales = np.ones(len(grads_db))
            for i, row in enumerate(grads_db):
                peak = float(np.abs(row).max())
                if peak > 0.0:
                    con_scales[i] = 1.0 / peak
        coeffs, state = mma_update(
            state,
            analysis.volume * obj_scale,
            dvol_db * obj_scale,
            analysis.constraint_values * con_scales,
            grads_db * con_scales[:, None],
        )
        surface.coeffs = coeffs.reshape(surface.coeffs.shape)

        knot_values = np.asarray(problem.basis @ coeffs)
        capped, _ = velocity_field_from_knots(knot_values, cfg.v_max)
        max_vn = float(np.abs(knot_values).max()) if knot_values.size else 0.0

        grid = advect_upwind(grid, capped, 1.0, mesh)
        grid = reinitialize(grid, cfg.reinit_sweeps)

        record = _make_record(it, analysis, max_vn, rel)
        history.append(record)
        if progress:
            progress(record)
        volume_prev = analysis.volume

    density = density_from_levelset(grid, mesh, problem.delta_h)
    return RunResult(
        history=history,
        density=density,
        levelset=grid,
        status=status,
        iterations=len(history),
    )


def _make_record(it, analysis: StateAnalysis, max_vn, rel) -> RunRecord:
    return RunRecord(
        iteration=it,
        volume=analysis.volume,
        sigma_pm=analysis.sigma_pm,
        ks_mu=analysis.ks_mu,
        lambda1=analysis.lambda1,
        max_vn=max_vn,
        rel_change=rel,
    )
