"""Pure-Python kernels: reference implementation of the hot inner loops.

Semantics must match ``_speedups.pyx`` exactly; both operate on dense lists
of ``Fraction`` objects, so results are bit-identical either way.
"""

from fractions import Fraction

IMPLEMENTATION = "python"

_ZERO = Fraction(0)


def combine_dense(weights, rows, bias_row):
    """out[t] = bias_row[t] + sum_j weights[j] * rows[j][t].

    ``rows`` is a list of equal-length dense coefficient rows; zero weights
    skip their row entirely.
    """
    out = list(bias_row)
    width = len(out)
    for w, row in zip(weights, rows):
        if w == 0:
            continue
        for t in range(width):
            c = row[t]
            if c != 0:
                out[t] = out[t] + w * c
    return out


def interval_dense(coeffs, c0, los, his):
    """Tight range of ``c0 + sum_t coeffs[t] * x_t`` for ``x_t`` in boxes."""
    lo = c0
    hi = c0
    for t in range(len(coeffs)):
        c = coeffs[t]
        if c > 0:
            lo = lo + c * los[t]
            hi = hi + c * his[t]
        elif c < 0:
            lo = lo + c * his[t]
            hi = hi + c * los[t]
    return lo, hi


def pivot_dense(rows, pr, pc):
    """Simplex tableau pivot in place on row ``pr``, column ``pc``."""
    prow = rows[pr]
    inv = 1 / prow[pc]  # works for Fraction and gmpy2.mpq alike
    if inv != 1:
        rows[pr] = prow = [x * inv for x in prow]
    width = len(prow)
    for i in range(len(rows)):
        if i == pr:
            continue
        row = rows[i]
        f = row[pc]
        if f == 0:
            continue
        rows[i] = [row[t] - f * prow[t] for t in range(width)]


def simplex_optimize(data, basis, allowed_cols):
    """Bland-rule primal simplex loop on a tableau whose last row is the
    (negated-reduced-cost) objective. Mutates ``data``/``basis`` in place
    and returns 0 when optimal, 1 when unbounded."""
    m = len(data) - 1
    rhs = len(data[0]) - 1
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
            a = data[i][enter]
            if a > 0:
                ratio = data[i][rhs] / a
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
