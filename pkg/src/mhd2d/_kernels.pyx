# cython: language_level=3
"""Fused loops for the per-step kernels; same signatures as mhd2d._kernels_py."""

import numpy as np

ctypedef double complex cplx


def project(const double[:, ::1] xi1, const double[:, ::1] xi2,
            const double[:, ::1] inv_xi_sq, const cplx[:, :, ::1] a):
    cdef Py_ssize_t n = a.shape[1], m = a.shape[2], i, j
    out = np.empty((2, n, m), dtype=np.complex128)
    cdef cplx[:, :, ::1] o = out
    cdef cplx dot
    with nogil:
        for i in range(n):
            for j in range(m):
                dot = (xi1[i, j] * a[0, i, j] + xi2[i, j] * a[1, i, j]) * inv_xi_sq[i, j]
                o[0, i, j] = a[0, i, j] - xi1[i, j] * dot
                o[1, i, j] = a[1, i, j] - xi2[i, j] * dot
    return out


def stress(const double[:, :, ::1] u, const double[:, :, ::1] b):
    cdef Py_ssize_t n = u.shape[1], m = u.shape[2], i, j
    t11 = np.empty((n, m))
    t12 = np.empty((n, m))
    t22 = np.empty((n, m))
    w = np.empty((n, m))
    cdef double[:, ::1] a11 = t11, a12 = t12, a22 = t22, aw = w
    cdef double u1, u2, b1, b2, su, sb
    cdef double umax2 = 0.0, bmax2 = 0.0
    with nogil:
        for i in range(n):
            for j in range(m):
                u1 = u[0, i, j]
                u2 = u[1, i, j]
                b1 = b[0, i, j]
                b2 = b[1, i, j]
                a11[i, j] = b1 * b1 - u1 * u1
                a12[i, j] = b1 * b2 - u1 * u2
                a22[i, j] = b2 * b2 - u2 * u2
                aw[i, j] = u1 * b2 - u2 * b1
                su = u1 * u1 + u2 * u2
                sb = b1 * b1 + b2 * b2
                # `not (x <= y)` admits NaN; `y == y` then keeps it from being overwritten
                if not (su <= umax2) and umax2 == umax2:
                    umax2 = su
                if not (sb <= bmax2) and bmax2 == bmax2:
                    bmax2 = sb
    return t11, t12, t22, w, umax2, bmax2


def assemble(const double[:, ::1] xi1, const double[:, ::1] xi2,
             const double[:, ::1] inv_xi_sq, const double[:, ::1] filt,
             const cplx[:, ::1] t11, const cplx[:, ::1] t12,
             const cplx[:, ::1] t22, const cplx[:, ::1] w, bint project_b):
    cdef Py_ssize_t n = t11.shape[0], m = t11.shape[1], i, j
    nu = np.empty((2, n, m), dtype=np.complex128)
    nb = np.empty((2, n, m), dtype=np.complex128)
    cdef cplx[:, :, ::1] ou = nu, ob = nb
    cdef cplx I = 1j
    cdef cplx f1, f2, dot, iw, g1, g2
    cdef double k1, k2, inv
    with nogil:
        for i in range(n):
            for j in range(m):
                k1 = xi1[i, j]
                k2 = xi2[i, j]
                inv = inv_xi_sq[i, j]
                f1 = I * filt[i, j] * (k1 * t11[i, j] + k2 * t12[i, j])
                f2 = I * filt[i, j] * (k1 * t12[i, j] + k2 * t22[i, j])
                dot = (k1 * f1 + k2 * f2) * inv
                ou[0, i, j] = f1 - k1 * dot
                ou[1, i, j] = f2 - k2 * dot
                iw = I * filt[i, j] * w[i, j]
                g1 = k2 * iw
                g2 = -k1 * iw
                if project_b:
                    dot = (k1 * g1 + k2 * g2) * inv
                    g1 = g1 - k1 * dot
                    g2 = g2 - k2 * dot
                ob[0, i, j] = g1
                ob[1, i, j] = g2
    return nu, nb


def if_rk2_predict(const cplx[:, ::1] ep, const cplx[:, ::1] em,
                   const cplx[:, :, ::1] u, const cplx[:, :, ::1] b,
                   const cplx[:, :, ::1] nu, const cplx[:, :, ::1] nb, double h):
    cdef Py_ssize_t n = u.shape[1], m = u.shape[2], c, i, j
    uo = np.empty((2, n, m), dtype=np.complex128)
    bo = np.empty((2, n, m), dtype=np.complex128)
    cdef cplx[:, :, ::1] ou = uo, ob = bo
    cdef cplx zp, zm
    with nogil:
        for c in range(2):
            for i in range(n):
                for j in range(m):
                    zp = ep[i, j] * (u[c, i, j] + b[c, i, j] + h * (nu[c, i, j] + nb[c, i, j]))
                    zm = em[i, j] * (u[c, i, j] - b[c, i, j] + h * (nu[c, i, j] - nb[c, i, j]))
                    ou[c, i, j] = 0.5 * (zp + zm)
                    ob[c, i, j] = 0.5 * (zp - zm)
    return uo, bo


def if_rk2_correct(const cplx[:, ::1] ep, const cplx[:, ::1] em,
                   const cplx[:, :, ::1] u, const cplx[:, :, ::1] b,
                   const cplx[:, :, ::1] nu1, const cplx[:, :, ::1] nb1,
                   const cplx[:, :, ::1] nu2, const cplx[:, :, ::1] nb2, double h):
    cdef Py_ssize_t n = u.shape[1], m = u.shape[2], c, i, j
    uo = np.empty((2, n, m), dtype=np.complex128)
    bo = np.empty((2, n, m), dtype=np.complex128)
    cdef cplx[:, :, ::1] ou = uo, ob = bo
    cdef cplx zp, zm
    cdef double hh = 0.5 * h
    with nogil:
        for c in range(2):
            for i in range(n):
                for j in range(m):
                    zp = (ep[i, j] * (u[c, i, j] + b[c, i, j] + hh * (nu1[c, i, j] + nb1[c, i, j]))
                          + hh * (nu2[c, i, j] + nb2[c, i, j]))
                    zm = (em[i, j] * (u[c, i, j] - b[c, i, j] + hh * (nu1[c, i, j] - nb1[c, i, j]))
                          + hh * (nu2[c, i, j] - nb2[c, i, j]))
                    ou[c, i, j] = 0.5 * (zp + zm)
                    ob[c, i, j] = 0.5 * (zp - zm)
    return uo, bo


def weighted_sum(weight, a):
    cdef const double[:, ::1] w = np.ascontiguousarray(weight, dtype=np.float64)
    arr = np.ascontiguousarray(a, dtype=np.complex128)
    if arr.ndim == 2:
        arr = arr[None]
    cdef const cplx[:, :, ::1] v = arr
    cdef Py_ssize_t c, i, j
    cdef double s = 0.0
    cdef cplx z
    with nogil:
        for c in range(v.shape[0]):
            for i in range(v.shape[1]):
                for j in range(v.shape[2]):
                    z = v[c, i, j]
                    s += w[i, j] * (z.real * z.real + z.imag * z.imag)
    return s
