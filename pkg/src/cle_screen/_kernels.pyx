# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels for the patch classifier.

Direct (im2col-free) 3x3 valid convolution and 2x2 max-pooling, forward and
backward, parallelized with OpenMP. Layout is NHWC with a contiguous channel
axis; the convolution loops are blocked four output pixels wide so one weight
load feeds four FMA streams. All kernels are deterministic: no atomics, no
cross-thread reductions; every output element is written by exactly one
thread.

The NumPy fallback in `_kernels_np` implements the same signatures.
"""

import numpy as np

cimport openmp
from cython.parallel cimport parallel, prange
from libc.stdlib cimport free, malloc
from libc.string cimport memset

ctypedef fused floating:
    float
    double

IS_COMPILED = True


def set_num_threads(int n):
    """Cap the OpenMP thread count for all kernels in this process."""
    openmp.omp_set_num_threads(n)


def get_max_threads():
    return openmp.omp_get_max_threads()


def conv3x3_forward(floating[:, :, :, ::1] x, floating[:, :, :, ::1] w,
                    floating[::1] b, floating[:, :, :, ::1] out):
    """out[n,i,j,f] = b[f] + sum_{dy,dx,c} x[n,i+dy,j+dx,c] * w[dy,dx,c,f]"""
    cdef Py_ssize_t N = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3]
    cdef Py_ssize_t F = w.shape[3], OH = H - 2, OW = W - 2
    cdef Py_ssize_t OW4 = OW - (OW % 4)
    cdef Py_ssize_t idx, n, oh, ow, dy, dx, c, f
    cdef floating v0, v1, v2, v3
    cdef floating* acc
    cdef const floating* wrow
    cdef const floating* xrow
    with nogil, parallel():
        acc = <floating*> malloc(4 * F * sizeof(floating))
        for idx in prange(N * OH, schedule='static'):
            n = idx // OH
            oh = idx % OH
            for ow in range(0, OW4, 4):
                for f in range(F):
                    acc[f] = b[f]
                    acc[F + f] = b[f]
                    acc[2 * F + f] = b[f]
                    acc[3 * F + f] = b[f]
                for dy in range(3):
                    for dx in range(3):
                        xrow = &x[n, oh + dy, ow + dx, 0]
                        for c in range(C):
                            v0 = xrow[c]
                            v1 = xrow[C + c]
                            v2 = xrow[2 * C + c]
                            v3 = xrow[3 * C + c]
                            wrow = &w[dy, dx, c, 0]
                            for f in range(F):
                                acc[f] = acc[f] + v0 * wrow[f]
                                acc[F + f] = acc[F + f] + v1 * wrow[f]
                                acc[2 * F + f] = acc[2 * F + f] + v2 * wrow[f]
                                acc[3 * F + f] = acc[3 * F + f] + v3 * wrow[f]
                for f in range(F):
                    out[n, oh, ow, f] = acc[f]
                    out[n, oh, ow + 1, f] = acc[F + f]
                    out[n, oh, ow + 2, f] = acc[2 * F + f]
                    out[n, oh, ow + 3, f] = acc[3 * F + f]
            for ow in range(OW4, OW):
                for f in range(F):
                    acc[f] = b[f]
                for dy in range(3):
                    for dx in range(3):
                        for c in range(C):
                            v0 = x[n, oh + dy, ow + dx, c]
                            wrow = &w[dy, dx, c, 0]
                            for f in range(F):
                                acc[f] = acc[f] + v0 * wrow[f]
                for f in range(F):
                    out[n, oh, ow, f] = acc[f]
        free(acc)


def conv3x3_backward_input(floating[:, :, :, ::1] dy_out,
                           floating[:, :, :, ::1] wt,
                           floating[:, :, :, ::1] dx_in):
    """dx_in[n,y,x,c] += sum dy_out[n,i,j,f] * wt[dy,dx,f,c]; wt is w
    transposed to (3, 3, F, C). dx_in must be zero-initialized."""
    cdef Py_ssize_t N = dx_in.shape[0], C = dx_in.shape[3]
    cdef Py_ssize_t OH = dy_out.shape[1], OW = dy_out.shape[2], F = dy_out.shape[3]
    cdef Py_ssize_t OW4 = OW - (OW % 4)
    cdef Py_ssize_t n, oh, ow, dy, dx, c, f
    cdef floating g0, g1, g2, g3
    cdef floating* tmp
    cdef const floating* wtrow
    cdef const floating* grow
    with nogil, parallel():
        tmp = <floating*> malloc(4 * C * sizeof(floating))
        # one thread owns all writes for sample n: no races
        for n in prange(N, schedule='static'):
            for oh in range(OH):
                for ow in range(0, OW4, 4):
                    for dy in range(3):
                        for dx in range(3):
                            memset(tmp, 0, 4 * C * sizeof(floating))
                            grow = &dy_out[n, oh, ow, 0]
                            for f in range(F):
                                g0 = grow[f]
                                g1 = grow[F + f]
                                g2 = grow[2 * F + f]
                                g3 = grow[3 * F + f]
                                wtrow = &wt[dy, dx, f, 0]
                                for c in range(C):
                                    tmp[c] = tmp[c] + g0 * wtrow[c]
                                    tmp[C + c] = tmp[C + c] + g1 * wtrow[c]
                                    tmp[2 * C + c] = tmp[2 * C + c] + g2 * wtrow[c]
                                    tmp[3 * C + c] = tmp[3 * C + c] + g3 * wtrow[c]
                            for c in range(C):
                                dx_in[n, oh + dy, ow + dx, c] += tmp[c]
                                dx_in[n, oh + dy, ow + dx + 1, c] += tmp[C + c]
                                dx_in[n, oh + dy, ow + dx + 2, c] += tmp[2 * C + c]
                                dx_in[n, oh + dy, ow + dx + 3, c] += tmp[3 * C + c]
                for ow in range(OW4, OW):
                    for dy in range(3):
                        for dx in range(3):
                            memset(tmp, 0, C * sizeof(floating))
                            for f in range(F):
                                g0 = dy_out[n, oh, ow, f]
                                wtrow = &wt[dy, dx, f, 0]
                                for c in range(C):
                                    tmp[c] = tmp[c] + g0 * wtrow[c]
                            for c in range(C):
                                dx_in[n, oh + dy, ow + dx, c] += tmp[c]
        free(tmp)


def conv3x3_backward_weights(floating[:, :, :, ::1] x,
                             floating[:, :, :, ::1] dy_out,
                             floating[:, :, :, ::1] dw):
    """dw[dy,dx,c,f] = sum_{n,i,j} x[n,i+dy,j+dx,c] * dy_out[n,i,j,f].

    Parallel over the nine (dy, dx) taps; each tap's (C, F) tile is owned by
    one thread and stays cache-resident.
    """
    cdef Py_ssize_t N = x.shape[0], C = x.shape[3]
    cdef Py_ssize_t OH = dy_out.shape[1], OW = dy_out.shape[2], F = dy_out.shape[3]
    cdef Py_ssize_t OW4 = OW - (OW % 4)
    cdef Py_ssize_t t, dy, dx, n, oh, ow, c, f
    cdef floating v0, v1, v2, v3
    cdef floating* dwrow
    cdef const floating* g0r
    cdef const floating* g1r
    cdef const floating* g2r
    cdef const floating* g3r
    cdef const floating* xrow
    for t in prange(9, nogil=True, schedule='dynamic'):
        dy = t // 3
        dx = t % 3
        for n in range(N):
            for oh in range(OH):
                for ow in range(0, OW4, 4):
                    g0r = &dy_out[n, oh, ow, 0]
                    g1r = &dy_out[n, oh, ow + 1, 0]
                    g2r = &dy_out[n, oh, ow + 2, 0]
                    g3r = &dy_out[n, oh, ow + 3, 0]
                    xrow = &x[n, oh + dy, ow + dx, 0]
                    for c in range(C):
                        v0 = xrow[c]
                        v1 = xrow[C + c]
                        v2 = xrow[2 * C + c]
                        v3 = xrow[3 * C + c]
                        dwrow = &dw[dy, dx, c, 0]
                        for f in range(F):
                            dwrow[f] = dwrow[f] + (v0 * g0r[f] + v1 * g1r[f]
                                                   + v2 * g2r[f] + v3 * g3r[f])
                for ow in range(OW4, OW):
                    for c in range(C):
                        v0 = x[n, oh + dy, ow + dx, c]
                        dwrow = &dw[dy, dx, c, 0]
                        for f in range(F):
                            dwrow[f] = dwrow[f] + v0 * dy_out[n, oh, ow, f]


def maxpool2_forward(floating[:, :, :, ::1] x, floating[:, :, :, ::1] out,
                     unsigned char[:, :, :, ::1] argmax):
    """2x2/stride-2 max pool; argmax stores the winning quadrant (0..3)."""
    cdef Py_ssize_t N = x.shape[0], C = x.shape[3]
    cdef Py_ssize_t OH = out.shape[1], OW = out.shape[2]
    cdef Py_ssize_t idx, n, oh, ow, c
    cdef floating v0, v1, v2, v3, best
    cdef unsigned char k
    for idx in prange(N * OH, nogil=True, schedule='static'):
        n = idx // OH
        oh = idx % OH
        for ow in range(OW):
            for c in range(C):
                v0 = x[n, 2 * oh, 2 * ow, c]
                v1 = x[n, 2 * oh, 2 * ow + 1, c]
                v2 = x[n, 2 * oh + 1, 2 * ow, c]
                v3 = x[n, 2 * oh + 1, 2 * ow + 1, c]
                best = v0
                k = 0
                if v1 > best:
                    best = v1
                    k = 1
                if v2 > best:
                    best = v2
                    k = 2
                if v3 > best:
                    best = v3
                    k = 3
                out[n, oh, ow, c] = best
                argmax[n, oh, ow, c] = k


def maxpool2_backward(floating[:, :, :, ::1] dy_out,
                      unsigned char[:, :, :, ::1] argmax,
                      floating[:, :, :, ::1] dx_in):
    """Route gradients to the argmax positions; dx_in must be zeroed."""
    cdef Py_ssize_t N = dy_out.shape[0], C = dy_out.shape[3]
    cdef Py_ssize_t OH = dy_out.shape[1], OW = dy_out.shape[2]
    cdef Py_ssize_t idx, n, oh, ow, c
    cdef unsigned char k
    for idx in prange(N * OH, nogil=True, schedule='static'):
        n = idx // OH
        oh = idx % OH
        for ow in range(OW):
            for c in range(C):
                k = argmax[n, oh, ow, c]
                dx_in[n, 2 * oh + (k >> 1), 2 * ow + (k & 1), c] = dy_out[n, oh, ow, c]
