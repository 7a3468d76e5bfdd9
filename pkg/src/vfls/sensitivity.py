"""Functionals and their discrete-adjoint density sensitivities.

Covers the volume fraction, the p-norm aggregate of centroid von Mises
stresses with its single-adjoint gradient, per-mode buckling load factor
gradients (one extra solve per mode against the shared factorization), the
KS aggregate of reciprocal load factors, and the projection of any
element-density sensitivity onto B-spline velocity coefficients.
"""

from __future__ import annotations

import numpy as np

from .bspline import BsplineSurface, basis_matrix
from .buckling import BucklingModes
from .fem import (
    MaterialModel,
    ReducedFactorization,
    constitutive_matrix,
    element_stresses,
    stiffness_derivative_products,
    strain_matrix,
    stress_stiffness_quadratic,
    stress_stiffness_u_derivative,
)
from .levelset import LevelSetGrid, element_centroid_phi, smoothed_dirac
from .mesh import StructuredMesh

_VM = np.array([[1.0, -0.5, 0.0], [-0.5, 1.0, 0.0], [0.0, 0.0, 3.0]])


def volume_and_sensitivity(density: np.ndarray, mesh: StructuredMesh):
    """Material volume fraction of the active region and its gradient."""
    density = np.asarray(density, dtype=float)
    if density.shape != (mesh.n_active,):
        raise ValueError("density length does not match active element count")
    n = mesh.n_active
    return density.sum() / n, np.full(n, 1.0 / n)


def pnorm_stress(stress, p: float) -> float:
    """p-norm aggregate of element von Mises stresses.

    Accepts a StressState or a raw array of nonnegative values. Factoring
    out the maximum keeps the powers in range and makes the bounds
    max <= result <= n^(1/p) max hold exactly in floating point.
    """
    svm = np.asarray(getattr(stress, "von_mises", stress), dtype=float)
    if p < 1.0:
        raise ValueError("p-norm exponent must be >= 1")
    if svm.size == 0:
        raise ValueError("empty stress array")
    peak = svm.max()
    if peak <= 0.0:
        return 0.0
    return peak * np.sum((svm / peak) ** p) ** (1.0 / p)


def pnorm_stress_sensitivity(
    mesh: StructuredMesh,
    u: np.ndarray,
    density: np.ndarray,
    material: MaterialModel,
    p: float,
    factorization: ReducedFactorization,
) -> np.ndarray:
    """Exact gradient of the stress p-norm with respect to element density.

    One adjoint solve against the existing stiffness factorization covers
    the implicit dependence through the displacement field; the explicit
    part accounts for the modulus factor inside the stress recovery.
    """
    stress = element_stresses(mesh, u, density, material)
    svm = stress.von_mises
    aggregate = pnorm_stress(stress, p)
    if aggregate <= 0.0:
        return np.zeros(mesh.n_active)
    s = np.stack([stress.sxx, stress.syy, stress.txy], axis=1)
    ratio = svm / aggregate
    pos = svm > 0.0

    # d(aggregate)/d(s_e) = ratio^(p-2)/aggregate * (VM s_e); the limit at
    # svm = 0 is zero and needs no epsilon floor.
    coef = np.zeros_like(svm)
    coef[pos] = ratio[pos] ** (p - 2.0) / aggregate
    t = coef[:, None] * (s @ _VM)

    db = constitutive_matrix(material.nu) @ strain_matrix(0.0, 0.0, mesh.h)
    fac = material.modulus(density)
    element_rhs = fac[:, None] * (t @ db)
    dagg_du = np.zeros(mesh.n_dofs)
    np.add.at(dagg_du, mesh.edofs, element_rhs)

    adjoint = factorization.solve(-dagg_du)

    de = material.E - material.E_min
    explicit = np.zeros_like(svm)
    explicit[pos] = ratio[pos] ** (p - 1.0) * svm[pos] * de / fac[pos]
    implicit = stiffness_derivative_products(mesh, material, adjoint, u)
    return explicit + implicit


def buckling_eigen_sensitivity(
    mesh: StructuredMesh,
    u: np.ndarray,
    density: np.ndarray,
    material: MaterialModel,
    modes: BucklingModes,
    factorization: ReducedFactorization,
) -> np.ndarray:
    """Per-mode load factor gradients, shape (n_modes, n_active).

    For K-orthonormal modes of (K + lambda G) phi = 0 with G depending on
    the equilibrium displacement u, the total derivative is

        dlam/drho_e = lam * [phi^T (dK/drho_e) phi
                             + lam phi^T (dG/drho_e) phi
                             - lam z^T (dK/drho_e) u],

    with one adjoint solve K z = grad_u(phi^T G phi) per mode.
    """
    density = np.asarray(density, dtype=float)
    fac = material.modulus(density)
    de = material.E - material.E_min
    db = constitutive_matrix(material.nu) @ strain_matrix(0.0, 0.0, mesh.h)
    unit_stress = u[mesh.edofs] @ db.T  # (n_active, 3), unit modulus

    out = np.empty((len(modes.load_factors), mesh.n_active))
    for i, lam in enumerate(modes.load_factors):
        phi = modes.modes[i]
        k_term = stiffness_derivative_products(mesh, material, phi, phi)
        q = stress_stiffness_quadratic(mesh, phi)
        g_term = de * np.einsum("ec,ec->e", q, unit_stress)
        rhs = stress_stiffness_u_derivative(mesh, density, material, phi)
        z = factorization.solve(rhs)
        z_term = stiffness_derivative_products(mesh, material, z, u)
        out[i] = lam * (k_term + lam * g_term - lam * z_term)
    return out


def ks_aggregate(values: np.ndarray, gamma: float) -> float:
    """Smooth maximum: max(v) + log(sum exp(gamma (v - max))) / gamma.

    Lies within [max(v), max(v) + log(n)/gamma], exactly in floating point.
    """
    values = np.asarray(values, dtype=float)
    if gamma <= 0.0:
        raise ValueError("KS parameter gamma must be positive")
    if values.size == 0:
        raise ValueError("empty KS input")
    peak = values.max()
    return peak + np.log(np.sum(np.exp(gamma * (values - peak)))) / gamma


def ks_weights(values: np.ndarray, gamma: float) -> np.ndarray:
    """Softmax weights of the KS aggregate; nonnegative, summing to one."""
    values = np.asarray(values, dtype=float)
    if gamma <= 0.0:
        raise ValueError("KS parameter gamma must be positive")
    w = np.exp(gamma * (values - values.max()))
    return w / w.sum()


def ks_sensitivity(
    values: np.ndarray, dvalues: np.ndarray, gamma: float
) -> np.ndarray:
    """Chain rule through the KS aggregate.

    Args:
      values: aggregated quantities, shape (m,).
      dvalues: their gradients, shape (m, n).

    Returns the softmax-weighted combination, shape (n,).
    """
    w = ks_weights(values, gamma)
    return w @ np.asarray(dvalues, dtype=float)


def project_to_coefficients(
    df_drho: np.ndarray,
    grid: LevelSetGrid,
    mesh: StructuredMesh,
    surface: BsplineSurface,
    delta_h: float,
    basis=None,
) -> np.ndarray:
    """Project an element-density sensitivity onto spline coefficients.

    Implements dF/db_kl = sum_e dF/drho_e * dirac(phi_e) * B_k(x_e) B_l(y_e)
    over active elements, which is the unit-pseudo-time shape derivative
    under the signed-distance assumption |grad phi| = 1. Only coefficients
    whose support meets the interface band receive nonzero entries.
    """
    df_drho = np.asarray(df_drho, dtype=float)
    if df_drho.shape != (mesh.n_active,):
        raise ValueError("sensitivity length does not match active element count")
    weights = df_drho * smoothed_dirac(element_centroid_phi(grid, mesh), delta_h)
    b = basis if basis is not None else basis_matrix(surface, mesh.centroids)
    return np.asarray(b.T @ weights).reshape(surface.coeffs.shape)
