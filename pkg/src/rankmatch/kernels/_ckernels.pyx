# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled row kernels; same contract as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, fabs, NAN

cnp.import_array()


def kl_rows(const double[:, ::1] target, const double[:, ::1] pred, double floor):
    cdef Py_ssize_t B = target.shape[0], c = target.shape[1], i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.zeros(B)
    cdef double[::1] out = out_arr
    cdef double acc, d, h
    for i in range(B):
        acc = 0.0
        for j in range(c):
            d = target[i, j]
            if d > 0:
                h = pred[i, j]
                if h < floor:
                    h = floor
                acc += d * log(d / h)
        out[i] = acc
    return out_arr


def prr_rows(const double[:, ::1] pred, const double[:, ::1] source, double t, bint use_margin):
    cdef Py_ssize_t B = pred.shape[0], c = pred.shape[1], i, j, k, hi, lo
    loss_arr = np.zeros(B)
    grad_arr = np.zeros((B, c))
    cdef double[::1] loss = loss_arr
    cdef double[:, ::1] grad = grad_arr
    cdef double diff, gap, arg, acc
    for i in range(B):
        acc = 0.0
        for j in range(c - 1):
            for k in range(j + 1, c):
                diff = source[i, j] - source[i, k]
                if diff > t:
                    hi = j
                    lo = k
                elif -diff > t:
                    hi = k
                    lo = j
                else:
                    continue
                gap = fabs(diff) if use_margin else 0.0
                arg = gap - (pred[i, hi] - pred[i, lo])
                if arg > 0:
                    acc += arg
                    grad[i, hi] -= 1.0
                    grad[i, lo] += 1.0
        loss[i] = acc
    return loss_arr, grad_arr


def metric_rows(const double[:, ::1] truth, const double[:, ::1] pred):
    cdef Py_ssize_t B = truth.shape[0], c = truth.shape[1], i, j
    out_arr = np.empty((B, 6))
    cdef double[:, ::1] out = out_arr
    cdef double d, p, ad, s, r, cheb, clark, canb, kl, inter, dot, nd, np_, h
    for i in range(B):
        cheb = 0.0
        clark = 0.0
        canb = 0.0
        kl = 0.0
        inter = 0.0
        dot = 0.0
        nd = 0.0
        np_ = 0.0
        for j in range(c):
            d = truth[i, j]
            p = pred[i, j]
            ad = fabs(d - p)
            if ad > cheb:
                cheb = ad
            s = d + p
            if s != 0:
                r = ad / s
                clark += r * r
                canb += r
            if d > 0:
                h = p if p > 1e-12 else 1e-12
                kl += d * log(d / h)
            inter += d if d < p else p
            dot += d * p
            nd += d * d
            np_ += p * p
        out[i, 0] = cheb
        out[i, 1] = sqrt(clark)
        out[i, 2] = canb
        out[i, 3] = kl
        out[i, 4] = inter
        s = sqrt(nd) * sqrt(np_)
        out[i, 5] = dot / s if s > 0 else NAN
    return out_arr
