# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled edit-distance kernels (same contract as ``_align_py``)."""

from libc.stdlib cimport malloc, free

cdef enum:
    MATCH = 0
    SUBSTITUTE = 1
    DELETE = 2
    INSERT = 3


cdef long long* _to_buffer(seq, Py_ssize_t n) except NULL:
    cdef long long* buf = <long long*> malloc((n + 1) * sizeof(long long))
    cdef Py_ssize_t k
    if buf == NULL:
        raise MemoryError()
    for k in range(n):
        buf[k] = seq[k]
    return buf


def edit_distance(ref, hyp):
    cdef Py_ssize_t n = len(ref), m = len(hyp)
    cdef Py_ssize_t i, j
    cdef long long r, best, diag, up
    cdef long long* a
    cdef long long* b
    cdef long long* row
    if n == 0:
        return m
    if m == 0:
        return n
    a = _to_buffer(ref, n)
    b = _to_buffer(hyp, m)
    row = <long long*> malloc((m + 1) * sizeof(long long))
    if row == NULL:
        free(a)
        free(b)
        raise MemoryError()
    try:
        for j in range(m + 1):
            row[j] = j
        for i in range(1, n + 1):
            r = a[i - 1]
            diag = row[0]
            row[0] = i
            for j in range(1, m + 1):
                up = row[j]
                best = diag + (0 if r == b[j - 1] else 1)
                if up + 1 < best:
                    best = up + 1
                if row[j - 1] + 1 < best:
                    best = row[j - 1] + 1
                diag = up
                row[j] = best
        return row[m]
    finally:
        free(a)
        free(b)
        free(row)


def alignment_ops(ref, hyp):
    cdef Py_ssize_t n = len(ref), m = len(hyp)
    cdef Py_ssize_t i, j, w = m + 1
    cdef long long best, cost, diag
    cdef long long* a = _to_buffer(ref, n)
    cdef long long* b = _to_buffer(hyp, m)
    cdef long long* t = <long long*> malloc((n + 1) * w * sizeof(long long))
    if t == NULL:
        free(a)
        free(b)
        raise MemoryError()
    ops = []
    try:
        for j in range(m + 1):
            t[j] = j
        for i in range(1, n + 1):
            t[i * w] = i
            for j in range(1, m + 1):
                best = t[(i - 1) * w + j - 1] + (0 if a[i - 1] == b[j - 1] else 1)
                if t[(i - 1) * w + j] + 1 < best:
                    best = t[(i - 1) * w + j] + 1
                if t[i * w + j - 1] + 1 < best:
                    best = t[i * w + j - 1] + 1
                t[i * w + j] = best

        i = n
        j = m
        while i > 0 or j > 0:
            cost = t[i * w + j]
            if i > 0 and j > 0:
                diag = t[(i - 1) * w + j - 1]
                if a[i - 1] == b[j - 1] and diag == cost:
                    ops.append((MATCH, i - 1, j - 1))
                    i -= 1
                    j -= 1
                    continue
                if diag + 1 == cost:
                    ops.append((SUBSTITUTE, i - 1, j - 1))
                    i -= 1
                    j -= 1
                    continue
            if i > 0 and t[(i - 1) * w + j] + 1 == cost:
                ops.append((DELETE, i - 1, -1))
                i -= 1
            else:
                ops.append((INSERT, -1, j - 1))
                j -= 1
    finally:
        free(a)
        free(b)
        free(t)
    ops.reverse()
    return ops
