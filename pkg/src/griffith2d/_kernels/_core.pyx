# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-triangle kernels (see numpy_backend for the contract)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double SQRT2 = 1.4142135623730951


def tri_geometry(double[:, ::1] vertices not None, long[:, ::1] triangles not None):
    cdef Py_ssize_t nt = triangles.shape[0]
    area_arr = np.empty(nt)
    gx_arr = np.empty((nt, 3))
    gy_arr = np.empty((nt, 3))
    cdef double[::1] area = area_arr
    cdef double[:, ::1] gx = gx_arr
    cdef double[:, ::1] gy = gy_arr
    cdef Py_ssize_t t
    cdef long i0, i1, i2
    cdef double x0, y0, x1, y1, x2, y2, a2, inv
    for t in range(nt):
        i0 = triangles[t, 0]
        i1 = triangles[t, 1]
        i2 = triangles[t, 2]
        x0 = vertices[i0, 0]; y0 = vertices[i0, 1]
        x1 = vertices[i1, 0]; y1 = vertices[i1, 1]
        x2 = vertices[i2, 0]; y2 = vertices[i2, 1]
        a2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        area[t] = 0.5 * a2
        inv = 1.0 / a2 if a2 != 0.0 else float("inf")
        gx[t, 0] = (y1 - y2) * inv
        gx[t, 1] = (y2 - y0) * inv
        gx[t, 2] = (y0 - y1) * inv
        gy[t, 0] = (x2 - x1) * inv
        gy[t, 1] = (x0 - x2) * inv
        gy[t, 2] = (x1 - x0) * inv
    return area_arr, gx_arr, gy_arr


def strain_fields(long[:, ::1] triangles not None, double[:, ::1] gx not None,
                  double[:, ::1] gy not None, double[:, ::1] u not None):
    cdef Py_ssize_t nt = triangles.shape[0]
    out_arr = np.empty((nt, 3))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t t, a
    cdef long v
    cdef double e11, e22, e12x, e12y
    for t in range(nt):
        e11 = 0.0; e22 = 0.0; e12x = 0.0; e12y = 0.0
        for a in range(3):
            v = triangles[t, a]
            e11 += gx[t, a] * u[v, 0]
            e22 += gy[t, a] * u[v, 1]
            e12x += gy[t, a] * u[v, 0]
            e12y += gx[t, a] * u[v, 1]
        out[t, 0] = e11
        out[t, 1] = e22
        out[t, 2] = 0.5 * (e12x + e12y)
    return out_arr


def full_gradients(long[:, ::1] triangles not None, double[:, ::1] gx not None,
                   double[:, ::1] gy not None, double[:, ::1] u not None):
    cdef Py_ssize_t nt = triangles.shape[0]
    out_arr = np.empty((nt, 2, 2))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t t, a
    cdef long v
    cdef double d00, d01, d10, d11
    for t in range(nt):
        d00 = 0.0; d01 = 0.0; d10 = 0.0; d11 = 0.0
        for a in range(3):
            v = triangles[t, a]
            d00 += gx[t, a] * u[v, 0]
            d01 += gy[t, a] * u[v, 0]
            d10 += gx[t, a] * u[v, 1]
            d11 += gy[t, a] * u[v, 1]
        out[t, 0, 0] = d00
        out[t, 0, 1] = d01
        out[t, 1, 0] = d10
        out[t, 1, 1] = d11
    return out_arr


def scalar_gradients(long[:, ::1] triangles not None, double[:, ::1] gx not None,
                     double[:, ::1] gy not None, double[::1] a not None):
    cdef Py_ssize_t nt = triangles.shape[0]
    out_arr = np.empty((nt, 2))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t t, k
    cdef long v
    cdef double dx, dy
    for t in range(nt):
        dx = 0.0; dy = 0.0
        for k in range(3):
            v = triangles[t, k]
            dx += gx[t, k] * a[v]
            dy += gy[t, k] * a[v]
        out[t, 0] = dx
        out[t, 1] = dy
    return out_arr


def elastic_density(double[:, ::1] C not None, double[:, ::1] strain not None):
    cdef Py_ssize_t nt = strain.shape[0]
    out_arr = np.empty(nt)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t t, i, j
    cdef double q, em0, em1, em2
    cdef double c00 = C[0, 0], c01 = C[0, 1], c02 = C[0, 2]
    cdef double c11 = C[1, 1], c12 = C[1, 2], c22 = C[2, 2]
    for t in range(nt):
        em0 = strain[t, 0]
        em1 = strain[t, 1]
        em2 = SQRT2 * strain[t, 2]
        q = c00 * em0 * em0 + c11 * em1 * em1 + c22 * em2 * em2
        q += 2.0 * (c01 * em0 * em1 + c02 * em0 * em2 + c12 * em1 * em2)
        out[t] = 0.5 * q
    return out_arr


def element_stiffness(double[:, ::1] C not None, double[:, ::1] gx not None,
                      double[:, ::1] gy not None, double[::1] area not None):
    cdef Py_ssize_t nt = area.shape[0]
    out_arr = np.empty((nt, 6, 6))
    cdef double[:, :, ::1] out = out_arr
    cdef double[3][6] B
    cdef double[3][6] CB
    cdef Py_ssize_t t, a, i, j, p, q
    cdef double acc
    for t in range(nt):
        for i in range(3):
            for p in range(6):
                B[i][p] = 0.0
        for a in range(3):
            B[0][2 * a] = gx[t, a]
            B[1][2 * a + 1] = gy[t, a]
            B[2][2 * a] = gy[t, a] / SQRT2
            B[2][2 * a + 1] = gx[t, a] / SQRT2
        for i in range(3):
            for p in range(6):
                acc = 0.0
                for j in range(3):
                    acc += C[i, j] * B[j][p]
                CB[i][p] = acc
        for p in range(6):
            for q in range(6):
                acc = 0.0
                for i in range(3):
                    acc += B[i][p] * CB[i][q]
                out[t, p, q] = area[t] * acc
    return out_arr
