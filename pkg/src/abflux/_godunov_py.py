"""Pure numpy Godunov stepping; the fallback when the compiled core is unavailable.

Works with any flux objects, not only polynomials.
"""

from __future__ import annotations

import numpy as np


def edge_fluxes(u, f_l, f_r, theta_l, theta_r, gamma, k):
    n = u.size
    F = np.empty(n + 1)
    F[0] = f_l(u[0]) if k > 0 else f_r(u[0])
    F[n] = f_r(u[n - 1]) if k < n else f_l(u[n - 1])
    a, b = u[:-1], u[1:]
    # interior edge i sits between cells i-1 and i
    if k > 1:
        F[1:k] = np.maximum(f_l(np.maximum(a[: k - 1], theta_l)), f_l(np.minimum(b[: k - 1], theta_l)))
    if k < n - 1:
        F[k + 1 : n] = np.maximum(f_r(np.maximum(a[k:], theta_r)), f_r(np.minimum(b[k:], theta_r)))
    if 0 < k < n:
        left = f_l(max(u[k - 1], theta_l))
        right = f_r(min(u[k], theta_r))
        F[k] = max(gamma, max(left, right))
    return F


def run_steps(u, f_l, f_r, theta_l, theta_r, gamma, k, lam, nsteps):
    fmin = 1e308
    n = u.size
    for _ in range(nsteps):
        F = edge_fluxes(u, f_l, f_r, theta_l, theta_r, gamma, k)
        if 0 < k < n:
            fmin = min(fmin, F[k])
        u -= lam * (F[1:] - F[:-1])
    return fmin
