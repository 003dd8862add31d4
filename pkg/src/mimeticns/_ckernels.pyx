# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element kernels; see ``_pykernels`` for the reference semantics."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def convection_blocks(double[:, :, ::1] coef, double[:, ::1] test_y, double[:, ::1] trial_y,
                      double[:, ::1] test_x, double[:, ::1] trial_x):
    cdef Py_ssize_t ne = coef.shape[0], qy = coef.shape[1], qx = coef.shape[2]
    cdef Py_ssize_t nby = test_y.shape[1], nay = trial_y.shape[1]
    cdef Py_ssize_t nbx = test_x.shape[1], nax = trial_x.shape[1]
    cdef Py_ssize_t e, a, b, j, k, m, l
    cdef double s, c, ty
    out_arr = np.zeros((ne, nby, nbx, nay, nax))
    cdef double[:, :, :, :, ::1] out = out_arr
    cdef double[:, :, ::1] t = np.empty((qy, nbx, nax))
    with nogil:
        for e in range(ne):
            for a in range(qy):
                for k in range(nbx):
                    for l in range(nax):
                        s = 0.0
                        for b in range(qx):
                            s = s + coef[e, a, b] * test_x[b, k] * trial_x[b, l]
                        t[a, k, l] = s
            for a in range(qy):
                for j in range(nby):
                    for m in range(nay):
                        ty = test_y[a, j] * trial_y[a, m]
                        if ty == 0.0:
                            continue
                        for k in range(nbx):
                            for l in range(nax):
                                out[e, j, k, m, l] += ty * t[a, k, l]
    return out_arr
