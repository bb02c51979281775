"""Numpy implementations of the per-step kernels (fallback when the Cython module is absent).

All spectral arrays use the half-spectrum layout (n, n//2 + 1); vector quantities are
stacked along a leading axis of length 2.
"""

import numpy as np


def project(xi1, xi2, inv_xi_sq, a):
    """Leray projection of a stacked half-spectrum vector ``a``; the mean passes through."""
    dot = (xi1 * a[0] + xi2 * a[1]) * inv_xi_sq
    return np.stack([a[0] - xi1 * dot, a[1] - xi2 * dot])


def stress(u, b):
    """Physical-space products for the nonlinear terms.

    Returns (t11, t12, t22, w, umax2, bmax2) with t = b (x) b - u (x) u,
    w = u1 b2 - u2 b1 and the squared peak magnitudes of u and b.
    """
    u1, u2 = u
    b1, b2 = b
    t11 = b1 * b1 - u1 * u1
    t12 = b1 * b2 - u1 * u2
    t22 = b2 * b2 - u2 * u2
    w = u1 * b2 - u2 * b1
    umax2 = float(np.max(u1 * u1 + u2 * u2))
    bmax2 = float(np.max(b1 * b1 + b2 * b2))
    return t11, t12, t22, w, umax2, bmax2


def assemble(xi1, xi2, inv_xi_sq, filt, t11, t12, t22, w, project_b):
    """Spectral nonlinear terms from the transformed products.

    nu = P[filt * div t] and nb = filt * (d2 w, -d1 w), projected too when ``project_b``.
    """
    f1 = 1j * filt * (xi1 * t11 + xi2 * t12)
    f2 = 1j * filt * (xi1 * t12 + xi2 * t22)
    nu = project(xi1, xi2, inv_xi_sq, np.stack([f1, f2]))
    iw = 1j * filt * w
    nb = np.stack([xi2 * iw, -xi1 * iw])
    if project_b:
        nb = project(xi1, xi2, inv_xi_sq, nb)
    return nu, nb


def if_rk2_predict(ep, em, u, b, nu, nb, h):
    """z± <- E±(z± + h N±) in Elsasser variables, returned as (u, b)."""
    zp = ep * (u + b + h * (nu + nb))
    zm = em * (u - b + h * (nu - nb))
    return 0.5 * (zp + zm), 0.5 * (zp - zm)


def if_rk2_correct(ep, em, u, b, nu1, nb1, nu2, nb2, h):
    """z± <- E±(z± + h/2 N1±) + h/2 N2±, returned as (u, b)."""
    hh = 0.5 * h
    zp = ep * (u + b + hh * (nu1 + nb1)) + hh * (nu2 + nb2)
    zm = em * (u - b + hh * (nu1 - nb1)) + hh * (nu2 - nb2)
    return 0.5 * (zp + zm), 0.5 * (zp - zm)


def weighted_sum(weight, a):
    """sum(weight * |a|^2) over the trailing (n, nh) axes, summed over any leading axes."""
    a = np.asarray(a)
    return float(np.sum(weight * (a.real * a.real + a.imag * a.imag)))
