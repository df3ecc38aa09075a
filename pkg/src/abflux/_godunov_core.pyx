# cython: cdivision=True
"""Compiled Godunov stepping for polynomial flux pairs.

Mirrors abflux._godunov_py operation for operation so both paths round
identically: Horner evaluation from the top coefficient down, then
u_i - lam * (F_right - F_left).
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline double horner(const double[::1] c, double u) noexcept nogil:
    cdef Py_ssize_t k = c.shape[0] - 1
    cdef double acc = c[k]
    while k > 0:
        k -= 1
        acc = acc * u + c[k]
    return acc


cdef inline double classical(const double[::1] c, double theta, double a, double b) noexcept nogil:
    cdef double fa = horner(c, a if a > theta else theta)
    cdef double fb = horner(c, b if b < theta else theta)
    return fa if fa > fb else fb


def run_steps(double[::1] u, const double[::1] cl, const double[::1] cr,
              double theta_l, double theta_r, double gamma,
              Py_ssize_t k, double lam, Py_ssize_t nsteps):
    """Advance ``u`` in place by ``nsteps`` steps of ratio lam = dt/dx.

    Cells 0..k-1 use the left flux, cells k..n-1 the right one; edge k sits
    at the interface. Returns the smallest interface flux seen.
    """
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i, j
    cdef double fmin = 1e308
    cdef double left, right, fi
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flux_arr = np.empty(n + 1)
    cdef double[::1] F = flux_arr
    with nogil:
        for j in range(nsteps):
            F[0] = horner(cl, u[0]) if k > 0 else horner(cr, u[0])
            F[n] = horner(cr, u[n - 1]) if k < n else horner(cl, u[n - 1])
            for i in range(1, n):
                if i < k:
                    F[i] = classical(cl, theta_l, u[i - 1], u[i])
                elif i > k:
                    F[i] = classical(cr, theta_r, u[i - 1], u[i])
                else:
                    left = horner(cl, u[i - 1] if u[i - 1] > theta_l else theta_l)
                    right = horner(cr, u[i] if u[i] < theta_r else theta_r)
                    fi = left if left > right else right
                    fi = gamma if gamma > fi else fi
                    F[i] = fi
                    if fi < fmin:
                        fmin = fi
            for i in range(n):
                u[i] = u[i] - lam * (F[i + 1] - F[i])
    return fmin
