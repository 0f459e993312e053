# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled kernels for the hot rational inner loops.

Arithmetic stays on exact Python ``Fraction`` objects; the win comes from
compiled loop/dispatch overhead, so results are identical to the pure-Python
twin in ``_kernels_py``.
"""

from fractions import Fraction

IMPLEMENTATION = "cython"

_ZERO = Fraction(0)
_ONE = Fraction(1)


def combine_dense(list weights, list rows, list bias_row):
    cdef Py_ssize_t j, t, width
    cdef list out = list(bias_row)
    cdef list row
    width = len(out)
    for j in range(len(weights)):
        w = weights[j]
        if w == 0:
            continue
        row = rows[j]
        for t in range(width):
            c = row[t]
            if c != 0:
                out[t] = out[t] + w * c
    return out


def interval_dense(list coeffs, c0, list los, list his):
    cdef Py_ssize_t t, n
    lo = c0
    hi = c0
    n = len(coeffs)
    for t in range(n):
        c = coeffs[t]
        if c > 0:
            lo = lo + c * los[t]
            hi = hi + c * his[t]
        elif c < 0:
            lo = lo + c * his[t]
            hi = hi + c * los[t]
    return lo, hi


def pivot_dense(list rows, Py_ssize_t pr, Py_ssize_t pc):
    cdef Py_ssize_t i, t, width, nrows
    cdef list prow, row, nrow
    prow = rows[pr]
    inv = 1 / prow[pc]  # works for Fraction and gmpy2.mpq alike
    width = len(prow)
    if inv != 1:
        nrow = [None] * width
        for t in range(width):
            nrow[t] = prow[t] * inv
        rows[pr] = prow = nrow
    nrows = len(rows)
    for i in range(nrows):
        if i == pr:
            continue
        row = rows[i]
        f = row[pc]
        if f == 0:
            continue
        nrow = [None] * width
        for t in range(width):
            nrow[t] = row[t] - f * prow[t]
        rows[i] = nrow


def simplex_optimize(list data, list basis, Py_ssize_t allowed_cols):
    """Bland-rule primal simplex loop; last row of ``data`` is the objective.
    Mutates ``data``/``basis``; returns 0 = optimal, 1 = unbounded."""
    cdef Py_ssize_t m = len(data) - 1
    cdef Py_ssize_t rhs = len(data[0]) - 1
    cdef Py_ssize_t enter, leave, i, j
    cdef list obj, row
    while True:
        obj = data[m]
        enter = -1
        for j in range(allowed_cols):
            if obj[j] < 0:
                enter = j
                break
        if enter < 0:
            return 0
        leave = -1
        best = None
        for i in range(m):
            row = data[i]
            a = row[enter]
            if a > 0:
                ratio = row[rhs] / a
                if (
                    best is None
                    or ratio < best
                    or (ratio == best and basis[i] < basis[leave])
                ):
                    best = ratio
                    leave = i
        if leave < 0:
            return 1
        pivot_dense(data, leave, enter)
        basis[leave] = enter
