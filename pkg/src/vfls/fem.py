"""Plane-stress Q4 finite elements on the structured grid.

Provides the unit element stiffness, global stiffness assembly with Ersatz
density interpolation, a reusable sparse factorization of the reduced system,
centroid stress recovery, and the stress (geometric) stiffness matrix built
from centroid stresses, together with its exact derivative with respect to
the displacement field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import StructuredMesh

_GAUSS = 1.0 / np.sqrt(3.0)
_CORNERS = np.array([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])


class SingularSystemError(RuntimeError):
    """Reduced stiffness system is singular or indefinite."""


@dataclass(frozen=True)
class MaterialModel:
    """Linear elastic material with Ersatz void interpolation.

    Element modulus is E_min + rho * (E - E_min), so fully void elements keep
    a small positive stiffness and the global matrix stays positive definite.
    """

    E: float
    E_min: float
    nu: float

    def __post_init__(self):
        if self.E <= 0.0:
            raise ValueError("material.E must be positive")
        if not 0.0 < self.E_min < self.E:
            raise ValueError("material.E_min must lie in (0, E)")
        if not -1.0 < self.nu < 0.5:
            raise ValueError("material.nu must lie in (-1, 0.5) for plane stress")

    def modulus(self, density: np.ndarray) -> np.ndarray:
        """Interpolated Young's modulus per element."""
        return self.E_min + np.asarray(density) * (self.E - self.E_min)


def constitutive_matrix(nu: float) -> np.ndarray:
    """Plane-stress constitutive matrix for unit Young's modulus."""
    return np.array(
        [[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, (1.0 - nu) / 2.0]]
    ) / (1.0 - nu * nu)


def _shape_gradients(xi: float, eta: float, h: float) -> np.ndarray:
    """Physical shape-function gradients (2, 4) at a parent point."""
    dn = np.empty((2, 4))
    dn[0] = 0.25 * _CORNERS[:, 0] * (1.0 + _CORNERS[:, 1] * eta)
    dn[1] = 0.25 * _CORNERS[:, 1] * (1.0 + _CORNERS[:, 0] * xi)
    return dn * (2.0 / h)


def strain_matrix(xi: float, eta: float, h: float) -> np.ndarray:
    """Strain-displacement matrix (3, 8) at a parent point."""
    dn = _shape_gradients(xi, eta, h)
    b = np.zeros((3, 8))
    b[0, 0::2] = dn[0]
    b[1, 1::2] = dn[1]
    b[2, 0::2] = dn[1]
    b[2, 1::2] = dn[0]
    return b


def unit_element_stiffness(nu: float, h: float = 1.0, thickness: float = 1.0) -> np.ndarray:
    """8x8 element stiffness for unit Young's modulus, 2x2 Gauss.

    For a square plane-stress element the result is independent of h.
    """
    d0 = constitutive_matrix(nu)
    ke = np.zeros((8, 8))
    det_j = h * h / 4.0
    for xi in (-_GAUSS, _GAUSS):
        for eta in (-_GAUSS, _GAUSS):
            b = strain_matrix(xi, eta, h)
            ke += b.T @ d0 @ b * det_j * thickness
    return ke


def geometric_templates(h: float = 1.0, thickness: float = 1.0) -> np.ndarray:
    """Stress-stiffness templates T (3, 8, 8) so that Ge = sum_c s[c] T[c].

    T[0], T[1], T[2] multiply sigma_xx, sigma_yy and tau_xy respectively.
    Integrands are biquadratic, so 2x2 Gauss integrates them exactly.
    """
    t = np.zeros((3, 8, 8))
    det_j = h * h / 4.0
    for xi in (-_GAUSS, _GAUSS):
        for eta in (-_GAUSS, _GAUSS):
            dn = _shape_gradients(xi, eta, h)
            gxx = np.outer(dn[0], dn[0]) * det_j * thickness
            gyy = np.outer(dn[1], dn[1]) * det_j * thickness
            gxy = (np.outer(dn[0], dn[1]) + np.outer(dn[1], dn[0])) * det_j * thickness
            for c in (0, 1):  # same coupling for both displacement components
                t[0, c::2, c::2] += gxx
                t[1, c::2, c::2] += gyy
                t[2, c::2, c::2] += gxy
    return t


def _check_density(mesh: StructuredMesh, density: np.ndarray) -> np.ndarray:
    density = np.asarray(density, dtype=float)
    if density.shape != (mesh.n_active,):
        raise ValueError(
            f"density has length {density.size}, expected {mesh.n_active}"
        )
    if not np.isfinite(density).all():
        raise ValueError("density contains non-finite values")
    return density


def assemble_stiffness(
    mesh: StructuredMesh, density: np.ndarray, material: MaterialModel
) -> sp.csc_matrix:
    """Assemble the global stiffness matrix over active elements."""
    density = _check_density(mesh, density)
    ke = unit_element_stiffness(material.nu, mesh.h, mesh.thickness)
    fac = material.modulus(density)
    data = fac[:, None] * ke.ravel()[None, :]
    rows = np.repeat(mesh.edofs, 8, axis=1).ravel()
    cols = np.tile(mesh.edofs, (1, 8)).ravel()
    k = sp.coo_matrix(
        (data.ravel(), (rows, cols)), shape=(mesh.n_dofs, mesh.n_dofs)
    ).tocsc()
    return k


class ReducedFactorization:
    """LU factorization of the stiffness restricted to free dofs.

    One factorization per design iteration serves the equilibrium solve,
    every adjoint solve, and the eigensolver's inner solves.
    """

    def __init__(self, k: sp.spmatrix, mesh: StructuredMesh):
        self.mesh = mesh
        self.free = mesh.free_dofs
        if self.free.size == 0:
            raise SingularSystemError("all dofs are constrained")
        self.k_ff = k.tocsc()[self.free][:, self.free].tocsc()
        try:
            self.lu = spla.splu(self.k_ff)
        except RuntimeError as exc:
            raise SingularSystemError(
                f"stiffness factorization failed: {exc}"
            ) from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve K u = rhs for a full-length rhs; fixed dofs return zero."""
        rhs = np.asarray(rhs, dtype=float)
        u = np.zeros(self.mesh.n_dofs)
        u[self.free] = self.lu.solve(rhs[self.free])
        if not np.isfinite(u).all():
            raise SingularSystemError("solve produced non-finite values")
        return u

    def solve_reduced(self, rhs_f: np.ndarray) -> np.ndarray:
        return self.lu.solve(rhs_f)


def solve_equilibrium(
    k: sp.spmatrix,
    mesh: StructuredMesh,
    loads=None,
    factorization: ReducedFactorization | None = None,
) -> np.ndarray:
    """Solve K u = f for the given load case (mesh.loads by default).

    The residual on free dofs must satisfy |K u - f| <= 1e-8 |f|; a larger
    residual indicates an ill-posed (under-constrained) system.
    """
    f = mesh.load_vector(loads)
    fact = factorization or ReducedFactorization(k, mesh)
    u = fact.solve(f)
    resid = (k @ u - f)[mesh.free_dofs]
    fnorm = np.linalg.norm(f)
    if fnorm > 0 and np.linalg.norm(resid) > 1e-8 * fnorm:
        raise SingularSystemError(
            "equilibrium residual exceeds 1e-8 of the load norm; "
            "the reduced system is singular or badly conditioned"
        )
    return u


@dataclass
class StressState:
    """Centroid stresses per active element."""

    sxx: np.ndarray
    syy: np.ndarray
    txy: np.ndarray
    von_mises: np.ndarray


def _unit_centroid_stress(
    mesh: StructuredMesh, u: np.ndarray, material: MaterialModel
) -> np.ndarray:
    """Centroid stress per active element for unit Young's modulus, (n, 3)."""
    db = constitutive_matrix(material.nu) @ strain_matrix(0.0, 0.0, mesh.h)
    return u[mesh.edofs] @ db.T


def element_stresses(
    mesh: StructuredMesh,
    u: np.ndarray,
    density: np.ndarray,
    material: MaterialModel,
) -> StressState:
    """Centroid stress recovery with the interpolated element modulus."""
    density = _check_density(mesh, density)
    s = material.modulus(density)[:, None] * _unit_centroid_stress(mesh, u, material)
    sxx, syy, txy = s[:, 0], s[:, 1], s[:, 2]
    svm = np.sqrt(np.maximum(sxx * sxx + syy * syy - sxx * syy + 3.0 * txy * txy, 0.0))
    return StressState(sxx=sxx, syy=syy, txy=txy, von_mises=svm)


def assemble_stress_stiffness(
    mesh: StructuredMesh,
    u: np.ndarray,
    density: np.ndarray,
    material: MaterialModel,
) -> sp.csc_matrix:
    """Assemble the geometric stiffness from centroid stresses.

    The centroid stress is held constant over each element; the matrix is
    linear in u and carries the sign of the stress state (negative-definite
    contributions under compression).
    """
    density = _check_density(mesh, density)
    templates = geometric_templates(mesh.h, mesh.thickness)
    s = material.modulus(density)[:, None] * _unit_centroid_stress(mesh, u, material)
    ge = np.einsum("ec,cab->eab", s, templates)
    rows = np.repeat(mesh.edofs, 8, axis=1).ravel()
    cols = np.tile(mesh.edofs, (1, 8)).ravel()
    return sp.coo_matrix(
        (ge.ravel(), (rows, cols)), shape=(mesh.n_dofs, mesh.n_dofs)
    ).tocsc()


def stress_stiffness_quadratic(
    mesh: StructuredMesh, phi: np.ndarray
) -> np.ndarray:
    """Per-element quadratic forms q_e[c] = phi_e^T T[c] phi_e, shape (n, 3).

    These give phi^T G phi = sum_e q_e . s_e for centroid stresses s_e, which
    is the whole coupling between mode shapes and the stress state.
    """
    templates = geometric_templates(mesh.h, mesh.thickness)
    pe = phi[mesh.edofs]
    return np.einsum("cab,ea,eb->ec", templates, pe, pe)


def stress_stiffness_u_derivative(
    mesh: StructuredMesh,
    density: np.ndarray,
    material: MaterialModel,
    phi: np.ndarray,
) -> np.ndarray:
    """Gradient of phi^T G(u) phi with respect to u (independent of u).

    G is linear in u through the centroid stress, so the gradient is exact
    and quadratic in phi.
    """
    density = _check_density(mesh, density)
    q = stress_stiffness_quadratic(mesh, phi)
    db = constitutive_matrix(material.nu) @ strain_matrix(0.0, 0.0, mesh.h)
    contrib = material.modulus(density)[:, None] * (q @ db)
    out = np.zeros(mesh.n_dofs)
    np.add.at(out, mesh.edofs, contrib)
    return out


def stiffness_derivative_products(
    mesh: StructuredMesh,
    material: MaterialModel,
    a: np.ndarray,
    b: np.ndarray,
) -> np.ndarray:
    """Per-element values a^T (dK/drho_e) b = (E - E_min) a_e^T K0 b_e."""
    ke = unit_element_stiffness(material.nu, mesh.h, mesh.thickness)
    ae = a[mesh.edofs]
    be = b[mesh.edofs]
    return (material.E - material.E_min) * np.einsum("ea,ab,eb->e", ae, ke, be)
