# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled edit-distance kernel.  Same contract as ``_pykernel``."""
from libc.stdlib cimport malloc, free
from libc.string cimport memset
from cpython.bytes cimport PyBytes_FromStringAndSize

cdef enum:
    MATCH = 0
    SUB = 1
    DEL = 2
    INS = 3


def distance(const int[:] a, const int[:] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j
    cdef int *prev = <int *> malloc((m + 1) * sizeof(int))
    cdef int *cur = <int *> malloc((m + 1) * sizeof(int))
    cdef int *tmp
    cdef int best, c, ai, result
    if prev == NULL or cur == NULL:
        free(prev)
        free(cur)
        raise MemoryError()
    try:
        for j in range(m + 1):
            prev[j] = <int> j
        for i in range(1, n + 1):
            ai = a[i - 1]
            cur[0] = <int> i
            for j in range(1, m + 1):
                best = prev[j - 1] + (ai != b[j - 1])
                c = prev[j] + 1
                if c < best:
                    best = c
                c = cur[j - 1] + 1
                if c < best:
                    best = c
                cur[j] = best
            tmp = prev
            prev = cur
            cur = tmp
        result = prev[m]
    finally:
        free(prev)
        free(cur)
    return result


def backtrace(const int[:] a, const int[:] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j, w = m + 1, k
    cdef int *prev = <int *> malloc(w * sizeof(int))
    cdef int *cur = <int *> malloc(w * sizeof(int))
    cdef int *tmp
    cdef unsigned char *back = <unsigned char *> malloc((n + 1) * w)
    cdef char *ops = <char *> malloc(n + m + 1)
    cdef int best, c, ai
    cdef unsigned char op
    if prev == NULL or cur == NULL or back == NULL or ops == NULL:
        free(prev)
        free(cur)
        free(back)
        free(ops)
        raise MemoryError("alignment matrix too large; align shorter spans")
    try:
        memset(back, INS, w)
        for j in range(w):
            prev[j] = <int> j
        for i in range(1, n + 1):
            ai = a[i - 1]
            cur[0] = <int> i
            back[i * w] = DEL
            for j in range(1, m + 1):
                if ai == b[j - 1]:
                    best = prev[j - 1]
                    op = MATCH
                else:
                    best = prev[j - 1] + 1
                    op = SUB
                c = prev[j] + 1
                if c < best:
                    best = c
                    op = DEL
                c = cur[j - 1] + 1
                if c < best:
                    best = c
                    op = INS
                cur[j] = best
                back[i * w + j] = op
            tmp = prev
            prev = cur
            cur = tmp

        k = 0
        i = n
        j = m
        while i > 0 or j > 0:
            op = back[i * w + j]
            ops[k] = <char> op
            k += 1
            if op == MATCH or op == SUB:
                i -= 1
                j -= 1
            elif op == DEL:
                i -= 1
            else:
                j -= 1
        # reverse in place
        for i in range(k // 2):
            op = <unsigned char> ops[i]
            ops[i] = ops[k - 1 - i]
            ops[k - 1 - i] = <char> op
        return PyBytes_FromStringAndSize(ops, k)
    finally:
        free(prev)
        free(cur)
        free(back)
        free(ops)
