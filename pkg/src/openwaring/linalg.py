"""Exact rational and arbitrary-precision complex linear algebra.

The rational routines run fraction-free (Bareiss) elimination on an
integer-cleared copy of the matrix, so no rank decision ever depends on
rounding.  The complex routines use partial pivoting with a relative
magnitude threshold for rank decisions.

Matrices are plain lists of row lists; vectors are lists.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd

from mpmath import mpc, mpf, workprec

from .errors import ConsistencyError, InvalidInputError
from .numerics import AppComplex, GUARD_BITS, is_exact_scalar, values_precision


# ---------------------------------------------------------------------------
# exact rational elimination


def _clear_denominators(row):
    denom = 1
    for x in row:
        denom = denom * x.denominator // gcd(denom, x.denominator)
    return [int(x * denom) for x in row]


def _bareiss_echelon(rows):
    """Integer fraction-free echelon form.

    Returns (echelon, pivot_cols); ``echelon`` rows are integer lists and
    pivot_cols[i] is the pivot column of row i.
    """
    m = [list(r) for r in rows]
    nrows = len(m)
    ncols = len(m[0]) if nrows else 0
    piv_cols = []
    prev = 1
    r = 0
    for c in range(ncols):
        pivot_row = None
        for i in range(r, nrows):
            if m[i][c] != 0:
                pivot_row = i
                break
        if pivot_row is None:
            continue
        m[r], m[pivot_row] = m[pivot_row], m[r]
        for i in range(r + 1, nrows):
            for j in range(c + 1, ncols):
                m[i][j] = (m[r][c] * m[i][j] - m[i][c] * m[r][j]) // prev
            m[i][c] = 0
        prev = m[r][c]
        piv_cols.append(c)
        r += 1
        if r == nrows:
            break
    return m[:r], piv_cols


def rational_echelon(rows):
    """Echelon form of a Fraction matrix via Bareiss; returns
    (echelon_rows as Fractions, pivot_cols)."""
    if not rows:
        return [], []
    int_rows = [_clear_denominators([Fraction(x) for x in row]) for row in rows]
    ech, piv = _bareiss_echelon(int_rows)
    return [[Fraction(x) for x in row] for row in ech], piv


def rational_rank(rows) -> int:
    return len(rational_echelon(rows)[1])


def rational_kernel(rows):
    """Basis of the right kernel {v : A v = 0} of a Fraction matrix.

    Returned vectors are exact Fractions with the free variable set to 1.
    """
    if not rows:
        return []
    ncols = len(rows[0])
    ech, piv = rational_echelon(rows)
    piv_set = set(piv)
    free = [c for c in range(ncols) if c not in piv_set]
    basis = []
    for fc in free:
        v = [Fraction(0)] * ncols
        v[fc] = Fraction(1)
        # back-substitute pivot entries from the bottom up
        for i in range(len(piv) - 1, -1, -1):
            pc = piv[i]
            s = sum((ech[i][j] * v[j] for j in range(pc + 1, ncols)), Fraction(0))
            v[pc] = -s / ech[i][pc]
        basis.append(v)
    return basis


def rational_solve(rows, rhs):
    """One exact solution of A x = b, or None when inconsistent."""
    if not rows:
        return None
    ncols = len(rows[0])
    aug = [list(row) + [b] for row, b in zip(rows, rhs)]
    ech, piv = rational_echelon(aug)
    # a pivot in the rhs column means inconsistency
    if ncols in piv:
        return None
    x = [Fraction(0)] * ncols
    for i in range(len(piv) - 1, -1, -1):
        pc = piv[i]
        s = sum((ech[i][j] * x[j] for j in range(pc + 1, ncols)), Fraction(0))
        x[pc] = (ech[i][ncols] - s) / ech[i][pc]
    return x


def rational_det(rows) -> Fraction:
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise InvalidInputError("determinant needs a square matrix")
    if n == 0:
        return Fraction(1)
    m = [[Fraction(x) for x in row] for row in rows]
    det = Fraction(1)
    for c in range(n):
        pivot_row = None
        for i in range(c, n):
            if m[i][c] != 0:
                pivot_row = i
                break
        if pivot_row is None:
            return Fraction(0)
        if pivot_row != c:
            m[c], m[pivot_row] = m[pivot_row], m[c]
            det = -det
        det *= m[c][c]
        inv = Fraction(1) / m[c][c]
        for i in range(c + 1, n):
            if m[i][c] == 0:
                continue
            f = m[i][c] * inv
            for j in range(c, n):
                m[i][j] -= f * m[c][j]
    return det


def rational_inverse(rows):
    n = len(rows)
    aug = [[Fraction(x) for x in row] + [Fraction(1 if i == j else 0) for j in range(n)]
           for i, row in enumerate(rows)]
    # Gauss-Jordan; exact arithmetic so plain elimination is fine here
    for c in range(n):
        pivot_row = None
        for i in range(c, n):
            if aug[i][c] != 0:
                pivot_row = i
                break
        if pivot_row is None:
            raise InvalidInputError("matrix is singular")
        aug[c], aug[pivot_row] = aug[pivot_row], aug[c]
        inv = Fraction(1) / aug[c][c]
        aug[c] = [x * inv for x in aug[c]]
        for i in range(n):
            if i != c and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[c])]
    return [row[n:] for row in aug]


# ---------------------------------------------------------------------------
# approximate complex elimination


def _unwrap(rows, bits):
    with workprec(bits):
        out = []
        for row in rows:
            wrow = []
            for x in row:
                if isinstance(x, AppComplex):
                    wrow.append(x.to_mpc())
                elif isinstance(x, Fraction):
                    wrow.append(mpc(mpf(x.numerator) / mpf(x.denominator)))
                else:
                    wrow.append(mpc(x))
            out.append(wrow)
        return out


def _matrix_bits(rows, precision_bits):
    flat = [x for row in rows for x in row]
    return max(values_precision(flat, precision_bits), precision_bits)


def complex_echelon(rows, precision_bits, tol):
    """Row echelon with partial pivoting; pivots below tol*scale count as 0.

    Returns (echelon mpc rows, pivot_cols, scale).
    """
    bits = _matrix_bits(rows, precision_bits) + GUARD_BITS
    m = _unwrap(rows, bits)
    nrows = len(m)
    ncols = len(m[0]) if nrows else 0
    with workprec(bits):
        scale = mpf(0)
        for row in m:
            for x in row:
                if abs(x) > scale:
                    scale = abs(x)
        thresh = tol * scale if scale > 0 else tol
        piv_cols = []
        r = 0
        for c in range(ncols):
            best, best_abs = None, thresh
            for i in range(r, nrows):
                a = abs(m[i][c])
                if a > best_abs:
                    best, best_abs = i, a
            if best is None:
                continue
            m[r], m[best] = m[best], m[r]
            for i in range(r + 1, nrows):
                if m[i][c] == 0:
                    continue
                f = m[i][c] / m[r][c]
                m[i][c] = mpc(0)
                for j in range(c + 1, ncols):
                    m[i][j] -= f * m[r][j]
            piv_cols.append(c)
            r += 1
            if r == nrows:
                break
        return m[:r], piv_cols, scale


def complex_rank(rows, precision_bits, tol) -> int:
    return len(complex_echelon(rows, precision_bits, tol)[1])


def complex_kernel(rows, precision_bits, tol):
    """Right-kernel basis of an approximate matrix, as AppComplex vectors."""
    if not rows:
        return []
    ncols = len(rows[0])
    bits = _matrix_bits(rows, precision_bits)
    ech, piv, _ = complex_echelon(rows, precision_bits, tol)
    piv_set = set(piv)
    free = [c for c in range(ncols) if c not in piv_set]
    basis = []
    with workprec(bits + GUARD_BITS):
        for fc in free:
            v = [mpc(0)] * ncols
            v[fc] = mpc(1)
            for i in range(len(piv) - 1, -1, -1):
                pc = piv[i]
                s = mpc(0)
                for j in range(pc + 1, ncols):
                    s += ech[i][j] * v[j]
                v[pc] = -s / ech[i][pc]
            basis.append([AppComplex.from_mpc(x, bits) for x in v])
    return basis


def complex_solve_lstsq(rows, rhs, precision_bits):
    """Least-squares solution of A x = b via the normal equations.

    Returns (x as AppComplex list, residual_max as mpf): residual_max is the
    max coefficient magnitude of A x - b.
    """
    bits = _matrix_bits(rows, precision_bits) + GUARD_BITS
    a = _unwrap(rows, bits)
    b = _unwrap([[x] for x in rhs], bits)
    nrows = len(a)
    ncols = len(a[0]) if nrows else 0
    with workprec(bits):
        # normal equations A^H A x = A^H b
        ata = [[mpc(0)] * ncols for _ in range(ncols)]
        atb = [mpc(0)] * ncols
        for i in range(ncols):
            for j in range(ncols):
                s = mpc(0)
                for k in range(nrows):
                    s += a[k][i].conjugate() * a[k][j]
                ata[i][j] = s
            s = mpc(0)
            for k in range(nrows):
                s += a[k][i].conjugate() * b[k][0]
            atb[i] = s
        # solve by elimination with partial pivoting
        aug = [ata[i] + [atb[i]] for i in range(ncols)]
        for c in range(ncols):
            best, best_abs = c, abs(aug[c][c])
            for i in range(c + 1, ncols):
                if abs(aug[i][c]) > best_abs:
                    best, best_abs = i, abs(aug[i][c])
            if best_abs == 0:
                # rank-deficient normal matrix: set this variable to zero
                aug[c][c] = mpc(1)
                aug[c][ncols] = mpc(0)
                for i in range(ncols):
                    if i != c:
                        aug[i][c] = mpc(0)
                continue
            aug[c], aug[best] = aug[best], aug[c]
            for i in range(ncols):
                if i != c and aug[i][c] != 0:
                    f = aug[i][c] / aug[c][c]
                    for j in range(c, ncols + 1):
                        aug[i][j] -= f * aug[c][j]
        x = [aug[i][ncols] / aug[i][i] for i in range(ncols)]
        resid = mpf(0)
        for k in range(nrows):
            s = mpc(0)
            for j in range(ncols):
                s += a[k][j] * x[j]
            r = abs(s - b[k][0])
            if r > resid:
                resid = r
        return [AppComplex.from_mpc(v, bits - GUARD_BITS) for v in x], resid


def complex_inverse(rows, precision_bits, tol):
    n = len(rows)
    bits = _matrix_bits(rows, precision_bits) + GUARD_BITS
    m = _unwrap(rows, bits)
    with workprec(bits):
        scale = max((abs(x) for row in m for x in row), default=mpf(0))
        thresh = tol * scale if scale > 0 else tol
        aug = [m[i] + [mpc(1 if i == j else 0) for j in range(n)] for i in range(n)]
        for c in range(n):
            best, best_abs = None, thresh
            for i in range(c, n):
                if abs(aug[i][c]) > best_abs:
                    best, best_abs = i, abs(aug[i][c])
            if best is None:
                raise InvalidInputError("matrix is numerically singular")
            aug[c], aug[best] = aug[best], aug[c]
            inv = 1 / aug[c][c]
            aug[c] = [x * inv for x in aug[c]]
            for i in range(n):
                if i != c and aug[i][c] != 0:
                    f = aug[i][c]
                    aug[i] = [x - f * y for x, y in zip(aug[i], aug[c])]
        return [[AppComplex.from_mpc(x, bits - GUARD_BITS) for x in row[n:]]
                for row in aug]


# ---------------------------------------------------------------------------
# kind-dispatching front ends


def matrix_is_exact(rows) -> bool:
    return all(is_exact_scalar(x) for row in rows for x in row)


def kernel_basis(rows, precision_bits, tol):
    """Right-kernel basis; exact Fractions when the matrix is exact."""
    if not rows:
        return []
    if matrix_is_exact(rows):
        return rational_kernel([[Fraction(x) for x in row] for row in rows])
    return complex_kernel(rows, precision_bits, tol)


def matrix_rank(rows, precision_bits, tol) -> int:
    if not rows or not rows[0]:
        return 0
    if matrix_is_exact(rows):
        return rational_rank([[Fraction(x) for x in row] for row in rows])
    return complex_rank(rows, precision_bits, tol)


def invert_matrix(rows, precision_bits, tol):
    if matrix_is_exact(rows):
        return rational_inverse(rows)
    return complex_inverse(rows, precision_bits, tol)


def transpose(rows):
    return [list(col) for col in zip(*rows)]


def mat_vec(rows, vec):
    out = []
    for row in rows:
        s = None
        for a, b in zip(row, vec):
            term = a * b
            s = term if s is None else s + term
        out.append(s if s is not None else Fraction(0))
    return out


def complete_to_basis(columns_tail):
    """Complete the given independent columns to an invertible matrix.

    ``columns_tail`` is a list of column vectors that will occupy the LAST
    positions; earlier positions are filled greedily with standard basis
    vectors.  Rational input gives an exact rational matrix.
    """
    if not columns_tail:
        raise InvalidInputError("need at least one column")
    n = len(columns_tail[0])
    k = len(columns_tail)
    exact = all(is_exact_scalar(x) for col in columns_tail for x in col)
    chosen = []
    for i in range(n):
        if len(chosen) == n - k:
            break
        e = [Fraction(1 if j == i else 0) for j in range(n)]
        candidate_cols = chosen + [e] + columns_tail
        rows = transpose(candidate_cols)
        if exact:
            ok = rational_rank(rows) == len(candidate_cols)
        else:
            ok = complex_rank(rows, values_precision(
                [x for col in columns_tail for x in col]),
                mpf(2) ** (-64)) == len(candidate_cols)
        if ok:
            chosen.append(e)
    if len(chosen) != n - k:
        raise ConsistencyError("could not complete columns to a basis")
    cols = chosen + list(columns_tail)
    return transpose(cols)
