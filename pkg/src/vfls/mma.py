"""Method of moving asymptotes with a primal-dual interior point subsolver.

Solves one convex separable approximation per design iteration:

    minimize   f0~(x) + a0 z + sum_j (c_j y_j + 0.5 d_j y_j^2)
    subject to g_j~(x) - a_j z - y_j <= b_j,  x in [alfa, beta],
               y >= 0, z >= 0,

where f0~ and g_j~ are rational approximations built from the current
gradients and the moving asymptotes. The elastic variables y_j keep the
subproblem feasible even when the outer constraints are violated. Asymptotes
start at half the variable range and adapt by factors 1.2 / 0.7 depending on
oscillation; steps are additionally limited to move_limit times the range.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

ASY_INIT = 0.5
ASY_INCR = 1.2
ASY_DECR = 0.7
ALBEFA = 0.1
RAA0 = 1e-5
EPSI_MIN = 1e-9
ELASTIC_WEIGHT = 1000.0


@dataclass(frozen=True)
class MmaState:
    """Design vector with the history the asymptote update needs."""

    x: np.ndarray
    x_prev1: np.ndarray
    x_prev2: np.ndarray
    low: np.ndarray
    upp: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    move_limit: float
    iteration: int


def init_mma(
    x0: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    move_limit: float,
) -> MmaState:
    """Fresh optimizer state at the starting point x0."""
    x0 = np.asarray(x0, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), x0.shape).copy()
    upper = np.broadcast_to(np.asarray(upper, dtype=float), x0.shape).copy()
    if np.any(lower >= upper):
        raise ValueError("lower bounds must be strictly below upper bounds")
    if np.any(x0 < lower) or np.any(x0 > upper):
        raise ValueError("starting point violates the box bounds")
    if not 0.0 < move_limit <= 1.0:
        raise ValueError("move_limit must lie in (0, 1]")
    rng = upper - lower
    return MmaState(
        x=x0.copy(),
        x_prev1=x0.copy(),
        x_prev2=x0.copy(),
        low=x0 - ASY_INIT * rng,
        upp=x0 + ASY_INIT * rng,
        lower=lower,
        upper=upper,
        move_limit=move_limit,
        iteration=0,
    )


def mma_update(
    state: MmaState,
    f0: float,
    df0_dx: np.ndarray,
    constraint_values: np.ndarray,
    constraint_gradients: np.ndarray,
):
    """One design update.

    Args:
      state: current MmaState.
      f0: objective value (carried for interface symmetry; the subproblem
        only needs gradients and constraint values).
      df0_dx: objective gradient, shape (n,).
      constraint_values: g_j(x) with the convention g_j <= 0 feasible, (m,).
      constraint_gradients: dg_j/dx, shape (m, n).

    Returns:
      (x_new, new_state). All iterates stay inside the box bounds and within
      move_limit * (upper - lower) of the previous point.
    """
    del f0
    x = state.x
    n = x.size
    df0 = np.asarray(df0_dx, dtype=float)
    if df0.shape != (n,):
        raise ValueError("objective gradient has the wrong length")
    g = np.atleast_1d(np.asarray(constraint_values, dtype=float))
    if g.size == 0:
        # The subsolver expects at least one row; a satisfied constant
        # constraint changes nothing.
        g = np.array([-1.0])
        dg = np.zeros((1, n))
    else:
        dg = np.asarray(constraint_gradients, dtype=float).reshape(g.size, -1)
    if dg.shape != (g.size, n):
        raise ValueError("constraint gradient matrix has the wrong shape")

    it = state.iteration + 1
    rng = state.upper - state.lower
    if it <= 2:
        low = x - ASY_INIT * rng
        upp = x + ASY_INIT * rng
    else:
        osc = (x - state.x_prev1) * (state.x_prev1 - state.x_prev2)
        factor = np.ones(n)
        factor[osc > 0.0] = ASY_INCR
        factor[osc < 0.0] = ASY_DECR
        low = x - factor * (state.x_prev1 - state.low)
        upp = x + factor * (state.upp - state.x_prev1)
        low = np.clip(low, x - 10.0 * rng, x - 0.01 * rng)
        upp = np.clip(upp, x + 0.01 * rng, x + 10.0 * rng)

    move = state.move_limit * rng
    alfa = np.maximum.reduce([state.lower, low + ALBEFA * (x - low), x - move])
    beta = np.minimum.reduce([state.upper, upp - ALBEFA * (upp - x), x + move])

    # Rational approximation coefficients.
    xmami = np.maximum(rng, 1e-5)
    ux = upp - x
    xl = x - low
    p0 = np.maximum(df0, 0.0)
    q0 = np.maximum(-df0, 0.0)
    pq0 = 0.001 * (p0 + q0) + RAA0 / xmami
    p0 = (p0 + pq0) * ux**2
    q0 = (q0 + pq0) * xl**2
    pc = np.maximum(dg, 0.0)
    qc = np.maximum(-dg, 0.0)
    pqc = 0.001 * (pc + qc) + RAA0 / xmami[None, :]
    pc = (pc + pqc) * ux[None, :] ** 2
    qc = (qc + pqc) * xl[None, :] ** 2
    b = pc @ (1.0 / ux) + qc @ (1.0 / xl) - g

    x_new = _subsolv(low, upp, alfa, beta, p0, q0, pc, qc, b)
    new_state = replace(
        state,
        x=x_new,
        x_prev1=x,
        x_prev2=state.x_prev1,
        low=low,
        upp=upp,
        iteration=it,
    )
    return x_new, new_state


def _subsolv(low, upp, alfa, beta, p0, q0, pc, qc, b):
    """Primal-dual Newton solve of the MMA subproblem.

    Follows Svanberg's standard scheme: interior point iteration over a
    decreasing barrier parameter epsi, with a backtracking line search that
    keeps all variables strictly interior. a0 = 1, a_j = 0, d_j = 1 and
    c_j = ELASTIC_WEIGHT throughout.
    """
    m, n = pc.shape
    a0 = 1.0
    a = np.zeros(m)
    c = np.full(m, ELASTIC_WEIGHT)
    d = np.ones(m)

    epsi = 1.0
    x = 0.5 * (alfa + beta)
    y = np.ones(m)
    z = 1.0
    lam = np.ones(m)
    xsi = np.maximum(1.0 / np.maximum(x - alfa, 1e-30), 1.0)
    eta = np.maximum(1.0 / np.maximum(beta - x, 1e-30), 1.0)
    mu = np.maximum(1.0, 0.5 * c)
    zet = 1.0
    s = np.ones(m)

    def residuals(x, y, z, lam, xsi, eta, mu, zet, s, epsi):
        ux1 = upp - x
        xl1 = x - low
        plam = p0 + lam @ pc
        qlam = q0 + lam @ qc
        gvec = pc @ (1.0 / ux1) + qc @ (1.0 / xl1)
        rex = plam / ux1**2 - qlam / xl1**2 - xsi + eta
        rey = c + d * y - mu - lam
        rez = a0 - zet - a @ lam
        relam = gvec - a * z - y + s - b
        rexsi = xsi * (x - alfa) - epsi
        reeta = eta * (beta - x) - epsi
        remu = mu * y - epsi
        rezet = zet * z - epsi
        res = lam * s - epsi
        full = np.concatenate(
            [rex, rey, [rez], relam, rexsi, reeta, remu, [rezet], res]
        )
        return full, np.linalg.norm(full), np.abs(full).max()

    while epsi > EPSI_MIN:
        _, residunorm, residumax = residuals(
            x, y, z, lam, xsi, eta, mu, zet, s, epsi
        )
        for _ in range(200):
            if residumax <= 0.9 * epsi:
                break
            ux1 = upp - x
            xl1 = x - low
            plam = p0 + lam @ pc
            qlam = q0 + lam @ qc
            gvec = pc @ (1.0 / ux1) + qc @ (1.0 / xl1)
            gg = pc / ux1[None, :] ** 2 - qc / xl1[None, :] ** 2

            delx = (
                plam / ux1**2
                - qlam / xl1**2
                - epsi / (x - alfa)
                + epsi / (beta - x)
            )
            dely = c + d * y - lam - epsi / y
            delz = a0 - a @ lam - epsi / z
            dellam = gvec - a * z - y - b + epsi / lam
            diagx = (
                2.0 * (plam / ux1**3 + qlam / xl1**3)
                + xsi / (x - alfa)
                + eta / (beta - x)
            )
            diagy = d + mu / y
            diaglamyi = s / lam + 1.0 / diagy

            if m < n:
                blam = dellam + dely / diagy - gg @ (delx / diagx)
                aa = np.zeros((m + 1, m + 1))
                aa[:m, :m] = np.diag(diaglamyi) + (gg / diagx[None, :]) @ gg.T
                aa[:m, m] = a
                aa[m, :m] = a
                aa[m, m] = -zet / z
                sol = np.linalg.solve(aa, np.concatenate([blam, [delz]]))
                dlam = sol[:m]
                dz = sol[m]
                dx = -delx / diagx - (dlam @ gg) / diagx
            else:
                dellamyi = dellam + dely / diagy
                aa = np.zeros((n + 1, n + 1))
                aa[:n, :n] = np.diag(diagx) + (
                    gg.T / diaglamyi[None, :]
                ) @ gg
                aa[:n, n] = -(a / diaglamyi) @ gg
                aa[n, :n] = aa[:n, n]
                aa[n, n] = zet / z + a @ (a / diaglamyi)
                rhs = np.concatenate(
                    [-(delx + (dellamyi / diaglamyi) @ gg),
                     [-(delz - a @ (dellamyi / diaglamyi))]]
                )
                sol = np.linalg.solve(aa, rhs)
                dx = sol[:n]
                dz = sol[n]
                dlam = (gg @ dx) / diaglamyi - dz * (a / diaglamyi) + (
                    dellamyi / diaglamyi
                )

            dy = -dely / diagy + dlam / diagy
            dxsi = -xsi + epsi / (x - alfa) - (xsi * dx) / (x - alfa)
            deta = -eta + epsi / (beta - x) + (eta * dx) / (beta - x)
            dmu = -mu + epsi / y - (mu * dy) / y
            dzet = -zet + epsi / z - zet * dz / z
            ds = -s + epsi / lam - (s * dlam) / lam

            xx = np.concatenate([y, [z], lam, xsi, eta, mu, [zet], s])
            dxx = np.concatenate([dy, [dz], dlam, dxsi, deta, dmu, [dzet], ds])
            step_xx = (-1.01 * dxx / xx).max()
            step_alfa = (-1.01 * dx / (x - alfa)).max()
            step_beta = (1.01 * dx / (beta - x)).max()
            steg = 1.0 / max(step_xx, step_alfa, step_beta, 1.0)

            old = (x, y, z, lam, xsi, eta, mu, zet, s)
            resinew = 2.0 * residunorm
            for _ in range(50):
                if resinew <= residunorm:
                    break
                x = old[0] + steg * dx
                y = old[1] + steg * dy
                z = old[2] + steg * dz
                lam = old[3] + steg * dlam
                xsi = old[4] + steg * dxsi
                eta = old[5] + steg * deta
                mu = old[6] + steg * dmu
                zet = old[7] + steg * dzet
                s = old[8] + steg * ds
                _, resinew, residumax = residuals(
                    x, y, z, lam, xsi, eta, mu, zet, s, epsi
                )
                steg *= 0.5
            residunorm = resinew
        epsi *= 0.1
    return x
