"""Pure-numpy hot kernel for the constrained-likelihood solver.

Reference implementation; `tomolab._kernel.pgd_cy` is the compiled twin with
the same interface. The kernel provides the dominant-cost operations of the
fit driver in `tomolab._kernel.driver`:

- project_psd_simplex: Frobenius-nearest density matrix (eigendecomposition
  plus simplex projection of the spectrum),
- probabilities / objective_from_probs / gradient_from_probs: one shared
  probability evaluation feeding both the objective and its gradient,
- mfista_chunk: a resumable block of monotone accelerated projected-gradient
  iterations with backtracking on the local Lipschitz estimate.

The measurement enters as a complex matrix `m` of shape (n_outcomes, d*d)
whose row j is conj(vec(E_j)), so outcome probabilities of a vectorized
density matrix x are Re(m @ x).

The MLE objective is evaluated as the generalized divergence
sum_j [nu_j log(nu_j/p_j) - nu_j + p_j], which is nonnegative term by term
for any normalization of the frequencies, vanishes exactly at a perfect fit,
and differs from the raw negative log-likelihood only by constants (every
setting's effects sum to the identity, so sum_j p_j is fixed). Written with
log1p it keeps full relative accuracy long after the raw log-likelihood sum
hits the double-precision noise floor. The squared-loss objective is
accurate near zero as written.
"""

from __future__ import annotations

import numpy as np

OBJECTIVE_MLE = 0
OBJECTIVE_LSQ = 1


def _simplex_project(vals: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    u = np.sort(vals)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    active = np.nonzero(u - (css - 1.0) / k > 0)[0][-1]
    theta = (css[active] - 1.0) / (active + 1.0)
    return np.maximum(vals - theta, 0.0)


def project_psd_simplex(mat: np.ndarray) -> np.ndarray:
    """Frobenius-nearest density matrix to a Hermitian matrix."""
    w, v = np.linalg.eigh(mat)
    w = _simplex_project(w)
    return (v * w) @ v.conj().T


def probabilities(m: np.ndarray, x: np.ndarray) -> np.ndarray:
    return (m @ x.ravel()).real


def objective_from_probs(p, nu_eff, objective, floor) -> float:
    if objective == OBJECTIVE_MLE:
        pc = np.maximum(p, floor)
        mask = nu_eff > 0.0
        nup = nu_eff[mask]
        pm = pc[mask]
        value = float(np.sum(nup * np.log1p((nup - pm) / pm) - nup + pm))
        return value + float(pc[~mask].sum())
    r = nu_eff - p
    return float(r @ r)


def gradient_from_probs(mh, p, nu_eff, objective, floor, dim) -> np.ndarray:
    # Divergence gradient weights omit the constant-sum +1 term: it shifts the
    # gradient by a multiple of the identity, which the trace-fixing
    # projection absorbs exactly.
    if objective == OBJECTIVE_MLE:
        w = np.zeros_like(p)
        mask = nu_eff > 0.0
        w[mask] = -nu_eff[mask] / np.maximum(p[mask], floor)
    else:
        w = 2.0 * (p - nu_eff)
    g = (mh @ w).reshape(dim, dim)
    return (g + g.conj().T) / 2.0


def factored_value_grad(m, mh, nu_eff, a, objective, floor, dim):
    """Objective, gradient, and state for the factored point rho = A A^H / Tr."""
    b = a @ a.conj().T
    tr = b.trace().real
    rho = b / tr
    p = probabilities(m, rho)
    val = objective_from_probs(p, nu_eff, objective, floor)
    g_rho = gradient_from_probs(mh, p, nu_eff, objective, floor, dim)
    inner = float(np.real(np.vdot(g_rho.ravel(), rho.ravel())))
    ga = 2.0 * ((g_rho @ a) - inner * a) / tr
    return val, ga, rho


def mfista_chunk(m, mh, nu_eff, dim, objective, floor, tol, budget, x, fx, y, t, lip):
    """Run up to `budget` monotone-FISTA iterations; resumable.

    Returns (x, fx, y, t, lip, iterations, residual, converged) where residual
    is the unit-step projected-gradient fixed-point norm ||P(x - grad) - x||
    at the last checked iterate (zero exactly at a constrained stationary
    point).
    """
    res = np.inf
    it = 0
    p_x = probabilities(m, x)
    while it < budget:
        it += 1
        g = gradient_from_probs(mh, p_x, nu_eff, objective, floor, dim)
        pg = project_psd_simplex(x - g)
        res = float(np.linalg.norm(pg - x))
        if res < tol:
            return x, fx, y, t, lip, it, res, True
        p_y = probabilities(m, y)
        gy = gradient_from_probs(mh, p_y, nu_eff, objective, floor, dim)
        fy = objective_from_probs(p_y, nu_eff, objective, floor)
        while True:
            z = project_psd_simplex(y - gy / lip)
            dz = z - y
            p_z = probabilities(m, z)
            fz = objective_from_probs(p_z, nu_eff, objective, floor)
            bound = fy + float(np.real(np.vdot(gy, dz))) + 0.5 * lip * float(np.linalg.norm(dz)) ** 2
            if fz <= bound + 1e-18 or lip > 1e20:
                break
            lip *= 2.0
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if fz <= fx:
            x_new, fx_new, p_new = z, fz, p_z
        else:
            x_new, fx_new, p_new = x, fx, p_x
        y_new = x_new + (t / t_new) * (z - x_new) + ((t - 1.0) / t_new) * (x_new - x)
        if float(np.real(np.vdot(z - y, z - x))) > 0.0:
            # momentum points uphill: restart acceleration
            y_new, t_new = x_new, 1.0
        x, fx, y, t, p_x = x_new, fx_new, y_new, t_new, p_new
        lip = max(lip * 0.8, 1e-12)
    return x, fx, y, t, lip, it, res, False
