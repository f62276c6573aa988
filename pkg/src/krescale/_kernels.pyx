# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: direct-summation DFT, circular convolution, and the
strided convolution used by the network forward pass.  Semantics match
_kernels_py exactly; tests compare the two on random inputs."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def dft3(const cnp.complex128_t[:, :, ::1] field):
    cdef Py_ssize_t m = field.shape[0]
    cdef Py_ssize_t n = field.shape[1]
    cdef Py_ssize_t c = field.shape[2]
    cdef cnp.ndarray em_a = np.exp(-2j * np.pi * np.outer(np.arange(m), np.arange(m)) / m)
    cdef cnp.ndarray en_a = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n)
    cdef cnp.ndarray ec_a = np.exp(-2j * np.pi * np.outer(np.arange(c), np.arange(c)) / c)
    cdef cnp.complex128_t[:, ::1] em = em_a
    cdef cnp.complex128_t[:, ::1] en = en_a
    cdef cnp.complex128_t[:, ::1] ec = ec_a

    t1_a = np.empty((m, n, c), dtype=np.complex128)
    t2_a = np.empty((m, n, c), dtype=np.complex128)
    out_a = np.empty((m, n, c), dtype=np.complex128)
    cdef cnp.complex128_t[:, :, ::1] t1 = t1_a
    cdef cnp.complex128_t[:, :, ::1] t2 = t2_a
    cdef cnp.complex128_t[:, :, ::1] out = out_a

    cdef Py_ssize_t u, v, w, x, y, z
    cdef cnp.complex128_t acc

    for u in range(m):
        for y in range(n):
            for z in range(c):
                acc = 0
                for x in range(m):
                    acc = acc + em[u, x] * field[x, y, z]
                t1[u, y, z] = acc
    for u in range(m):
        for v in range(n):
            for z in range(c):
                acc = 0
                for y in range(n):
                    acc = acc + en[v, y] * t1[u, y, z]
                t2[u, v, z] = acc
    for u in range(m):
        for v in range(n):
            for w in range(c):
                acc = 0
                for z in range(c):
                    acc = acc + ec[w, z] * t2[u, v, z]
                out[u, v, w] = acc
    return out_a


def circular_conv2(const double[:, :, ::1] inp, const double[:, :, ::1] ker):
    cdef Py_ssize_t m = inp.shape[0]
    cdef Py_ssize_t n = inp.shape[1]
    cdef Py_ssize_t c = inp.shape[2]
    out_a = np.zeros((m, n))
    cdef double[:, ::1] out = out_a
    cdef Py_ssize_t i, j, x, y, z, ki, kj
    cdef double acc

    for i in range(m):
        for j in range(n):
            acc = 0.0
            for x in range(m):
                ki = i - x
                if ki < 0:
                    ki += m
                for y in range(n):
                    kj = j - y
                    if kj < 0:
                        kj += n
                    for z in range(c):
                        acc += inp[x, y, z] * ker[ki, kj, z]
            out[i, j] = acc
    return out_a


def conv2d_forward(const double[:, :, ::1] inp, const double[:, :, :, ::1] weights,
                   Py_ssize_t stride_h, Py_ssize_t stride_w,
                   Py_ssize_t pad_h, Py_ssize_t pad_w):
    cdef Py_ssize_t h = inp.shape[0]
    cdef Py_ssize_t w = inp.shape[1]
    cdef Py_ssize_t cin = inp.shape[2]
    cdef Py_ssize_t n_out = weights.shape[0]
    cdef Py_ssize_t kh = weights.shape[2]
    cdef Py_ssize_t kw = weights.shape[3]
    cdef Py_ssize_t out_h = (h + 2 * pad_h - kh) // stride_h + 1
    cdef Py_ssize_t out_w = (w + 2 * pad_w - kw) // stride_w + 1
    out_a = np.zeros((out_h, out_w, n_out))
    cdef double[:, :, ::1] out = out_a
    cdef Py_ssize_t ho, wo, o, i, j, z, ih, iw, ih0, iw0
    cdef double acc

    for ho in range(out_h):
        ih0 = ho * stride_h - pad_h
        for wo in range(out_w):
            iw0 = wo * stride_w - pad_w
            for o in range(n_out):
                acc = 0.0
                for i in range(kh):
                    ih = ih0 + i
                    if ih < 0 or ih >= h:
                        continue
                    for j in range(kw):
                        iw = iw0 + j
                        if iw < 0 or iw >= w:
                            continue
                        for z in range(cin):
                            acc += inp[ih, iw, z] * weights[o, z, i, j]
                out[ho, wo, o] = acc
    return out_a
