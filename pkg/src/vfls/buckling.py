"""Linearized buckling eigenproblem (K + lambda G) phi = 0.

The smallest positive load factors are found by solving the equivalent pencil
(-G) phi = mu K phi for the largest positive mu = 1/lambda, which lets the
Lanczos iteration reuse the stiffness factorization as its inner solve. Below
a size threshold a dense generalized eigensolve is used instead; both paths
return K-orthonormal modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import ReducedFactorization
from .mesh import StructuredMesh

DENSE_DOF_LIMIT = 2500
_ARPACK_MAXITER = 500
_ARPACK_TOL = 1e-8
_RESIDUAL_RTOL = 1e-6


class EigenSolveError(RuntimeError):
    """Eigenvalue iteration failed to converge."""


class InsufficientModesError(RuntimeError):
    """Fewer positive buckling load factors exist than were requested."""


@dataclass
class BucklingModes:
    """Load factors (ascending) and K-orthonormal modes, one row per mode.

    Modes are full dof-length vectors with zeros at constrained dofs, signed
    so the largest-magnitude component is positive.
    """

    load_factors: np.ndarray
    modes: np.ndarray


def solve_buckling_modes(
    k: sp.spmatrix,
    g: sp.spmatrix,
    mesh: StructuredMesh,
    n_modes: int,
    factorization: ReducedFactorization | None = None,
    method: str = "auto",
) -> BucklingModes:
    """Smallest positive load factors of (K + lambda G) phi = 0.

    Args:
      k: assembled stiffness.
      g: assembled stress stiffness under the reference load.
      mesh: provides the free-dof reduction.
      n_modes: number of modes requested (1 <= n_modes < free dof count).
      factorization: optional reused stiffness factorization.
      method: "auto", "dense", or "sparse".

    Raises:
      InsufficientModesError: fewer than n_modes positive load factors exist,
        e.g. when G vanishes under a negligible reference load.
      EigenSolveError: the iterative solver did not converge.
    """
    free = mesh.free_dofs
    if not 1 <= n_modes < free.size:
        raise ValueError("n_modes must lie in [1, free dof count)")
    if method not in ("auto", "dense", "sparse"):
        raise ValueError(f"unknown method {method!r}")

    k_ff = k.tocsc()[free][:, free].tocsc()
    g_ff = g.tocsc()[free][:, free].tocsc()
    neg_g = (-g_ff).tocsc()
    gnorm = spla.norm(g_ff)
    if gnorm == 0.0 or gnorm < 1e-14 * spla.norm(k_ff):
        raise InsufficientModesError(
            "insufficient buckling modes: stress stiffness is numerically zero "
            "(is the reference load negligible?)"
        )

    if method == "dense" or (method == "auto" and free.size < DENSE_DOF_LIMIT):
        mu, vecs = scipy.linalg.eigh(neg_g.toarray(), k_ff.toarray())
        mu = mu[-n_modes:][::-1]
        vecs = vecs[:, -n_modes:][:, ::-1]
    else:
        fact = factorization or ReducedFactorization(k, mesh)
        minv = spla.LinearOperator(
            k_ff.shape, matvec=fact.solve_reduced, dtype=float
        )
        rng = np.random.default_rng(12345)
        v0 = rng.standard_normal(free.size)
        try:
            mu, vecs = spla.eigsh(
                neg_g,
                k=n_modes,
                M=k_ff,
                Minv=minv,
                which="LA",
                v0=v0,
                maxiter=_ARPACK_MAXITER,
                tol=_ARPACK_TOL,
            )
        except spla.ArpackNoConvergence as exc:
            raise EigenSolveError(
                f"buckling eigensolve did not converge within "
                f"{_ARPACK_MAXITER} iterations: {exc}"
            ) from exc
        order = np.argsort(mu)[::-1]
        mu = mu[order]
        vecs = vecs[:, order]

    if np.any(mu <= 0.0):
        raise InsufficientModesError(
            f"insufficient buckling modes: only {int((mu > 0).sum())} positive "
            f"load factors exist, {n_modes} requested"
        )
    lam = 1.0 / mu  # ascending since mu is descending

    modes = np.zeros((n_modes, mesh.n_dofs))
    for i in range(n_modes):
        v = vecs[:, i]
        # K-orthonormal up to solver roundoff; renormalize exactly.
        v = v / np.sqrt(v @ (k_ff @ v))
        if v[np.argmax(np.abs(v))] < 0.0:
            v = -v
        modes[i, free] = v

    _check_residuals(k_ff, g_ff, lam, modes[:, free])
    return BucklingModes(load_factors=lam, modes=modes)


def _check_residuals(k_ff, g_ff, lam, vecs_ff):
    for i, lam_i in enumerate(lam):
        v = vecs_ff[i]
        kv = k_ff @ v
        resid = kv + lam_i * (g_ff @ v)
        if np.linalg.norm(resid) > _RESIDUAL_RTOL * np.linalg.norm(kv):
            raise EigenSolveError(
                f"mode {i} residual exceeds {_RESIDUAL_RTOL:g} of |K phi|; "
                "eigenpair is not converged"
            )
