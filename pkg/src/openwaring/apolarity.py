"""Graded pieces of the annihilator of a form, essential-variable analysis
and base-point detection for apolar linear systems.

The degree-e piece of the annihilator is computed as the left kernel of the
catalecticant matrix of the contraction pairing.  Everything stays in exact
rational arithmetic when the input form is rational; forms with approximate
coefficients go through thresholded complex elimination instead.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

from mpmath import mpf, workprec

from . import linalg
from .errors import (ConsistencyError, DegenerateSystemError,
                     InvalidInputError, RetryBudgetError)
from .numerics import (AppComplex, DEFAULT_PRECISION_BITS, GUARD_BITS,
                       UniPoly, is_exact_scalar, scalar_is_zero, tolerance,
                       univariate_roots)
from .poly import (DualOp, Form, LinearForm, change_coordinates, evaluate,
                   monomials_of_degree)

DEFAULT_SEED = 1729
DEFAULT_MAX_RETRIES = 64


@dataclass(frozen=True)
class CatMatrix:
    """Matrix of the contraction pairing in fixed degree.

    Row ``r`` (a dual monomial of degree e) expands ``r`` applied to the
    form over the degree d-e monomial basis, both in graded-lex order; the
    left kernel of ``entries`` is the degree-e piece of the annihilator.
    """

    row_labels: tuple
    col_labels: tuple
    entries: tuple
    e: int
    d: int

    def rank(self, precision_bits=DEFAULT_PRECISION_BITS):
        rows = [list(r) for r in self.entries]
        return linalg.matrix_rank(rows, precision_bits, tolerance(precision_bits))


class ProjPoint:
    """Point of projective space, normalized so the largest-modulus
    coordinate equals one."""

    __slots__ = ("coords",)

    def __init__(self, coords, precision_bits=DEFAULT_PRECISION_BITS):
        vals = [c if isinstance(c, AppComplex) else AppComplex(c, 0, precision_bits)
                for c in coords]
        if all(abs(v) == 0 for v in vals):
            raise InvalidInputError("projective point cannot be all zero")
        best = max(range(len(vals)), key=lambda i: abs(vals[i]))
        pivot = vals[best]
        object.__setattr__(self, "coords",
                           tuple(v / pivot for v in vals))

    def __setattr__(self, name, value):
        raise AttributeError("ProjPoint is immutable")

    @property
    def num_vars(self):
        return len(self.coords)

    def to_linear_form(self) -> LinearForm:
        return LinearForm(self.coords)

    def distance(self, other) -> mpf:
        """max-coordinate distance between the normalized representatives."""
        return max(abs(a - b) for a, b in zip(self.coords, other.coords))

    def __repr__(self):
        import mpmath
        rendered = ":".join(
            f"{mpmath.nstr(c.real, 8)}{'+' + mpmath.nstr(c.imag, 8) + 'j' if c.imag != 0 else ''}"
            for c in self.coords)
        return f"[{rendered}]"


def catalecticant(f: Form, e: int) -> CatMatrix:
    """Matrix of contraction by degree-e dual monomials against f."""
    if not 0 <= e <= f.degree:
        raise InvalidInputError(f"e must lie in [0, {f.degree}], got {e}")
    n = f.num_vars
    rows = monomials_of_degree(n, e)
    cols = monomials_of_degree(n, f.degree - e)
    entries = []
    for a in rows:
        row = []
        for b in cols:
            target = tuple(a[i] + b[i] for i in range(n))
            c = f.coeffs.get(target)
            if c is None:
                row.append(Fraction(0))
            else:
                mult = 1
                for i in range(n):
                    if a[i]:
                        mult *= factorial(a[i] + b[i]) // factorial(b[i])
                row.append(c * mult)
        entries.append(tuple(row))
    return CatMatrix(tuple(rows), tuple(cols), tuple(entries), e, f.degree)


def apolar_component(f: Form, e: int,
                     precision_bits=DEFAULT_PRECISION_BITS):
    """Basis of the degree-e annihilator of f, as DualOps.

    Exact rational vectors for rational f; each basis element contracts f
    to zero (exactly, or within tolerance for approximate input).
    """
    cat = catalecticant(f, e)
    rows = linalg.transpose([list(r) for r in cat.entries])
    kern = linalg.kernel_basis(rows, precision_bits, tolerance(precision_bits))
    ops = []
    for vec in kern:
        coeffs = {expo: c for expo, c in zip(cat.row_labels, vec)
                  if not (is_exact_scalar(c) and c == 0)}
        op = DualOp(f.num_vars, e, coeffs)
        if not op.is_exact():
            # numerical-noise entries would overstate supports downstream
            op = op.cleaned(tolerance(precision_bits) * op.max_abs())
        ops.append(op)
    return ops


def essential_variables(f, precision_bits=DEFAULT_PRECISION_BITS) -> int:
    """Rank of the first catalecticant: the minimal number of variables f
    can be written in after a linear change of coordinates."""
    if f.is_zero():
        raise InvalidInputError("the zero form has no essential variable count")
    if f.degree == 0:
        return 0
    return catalecticant(f, 1).rank(precision_bits)


def essential_split(f: Form, precision_bits=DEFAULT_PRECISION_BITS):
    """Invertible M such that change_coordinates(f, M) uses only the first
    m = essential_variables(f) variables, plus that restriction g.

    M is exact rational for rational f.
    """
    n = f.num_vars
    m = essential_variables(f, precision_bits)
    if m == n:
        ident = [[Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]
        return ident, f
    cat = catalecticant(f, 1)
    # columns j > m of M must lie in the left kernel of the first catalecticant
    rows = [list(r) for r in cat.entries]
    left_kernel = linalg.kernel_basis(linalg.transpose(rows), precision_bits,
                                      tolerance(precision_bits))
    if len(left_kernel) != n - m:
        raise ConsistencyError("left kernel dimension disagrees with the rank")
    matrix = linalg.complete_to_basis([list(v) for v in left_kernel])
    h = change_coordinates(f, matrix)
    g = restrict_to_prefix(h, m, precision_bits)
    return matrix, g


def restrict_to_prefix(h, m: int, precision_bits=DEFAULT_PRECISION_BITS):
    """Drop the trailing variables of a polynomial supported on its first m
    variables (coefficients touching the tail must vanish within tolerance)."""
    tol = tolerance(precision_bits) * (h.max_abs() if h.coeffs else Fraction(0))
    out = {}
    for expo, c in h.coeffs.items():
        if any(expo[m:]):
            if not scalar_is_zero(c, tol):
                raise ConsistencyError(
                    "polynomial is not supported on the first variables")
            continue
        out[expo[:m]] = c
    return type(h)(m, h.degree, out)


# ---------------------------------------------------------------------------
# base points


def _binary_dual_roots(op: DualOp, precision_bits):
    """Projective zeros [l0:l1] of a binary dual form, with multiplicity.

    A degree drop of the dehomogenization (exact, or below tolerance for
    approximate coefficients) contributes the point at infinity [0:1]."""
    coeffs = [Fraction(0)] * (op.degree + 1)
    for expo, c in op.coeffs.items():
        coeffs[expo[1]] = c
    tol_lead = tolerance(precision_bits) * op.max_abs()
    while coeffs and scalar_is_zero(coeffs[-1], tol_lead):
        coeffs.pop()
    p = UniPoly(coeffs)
    pts = []
    deg_t = p.degree
    if deg_t >= 1:
        for r in univariate_roots(p, precision_bits):
            pts.append(ProjPoint((AppComplex(1, 0, precision_bits), r),
                                 precision_bits))
    elif p.is_zero():
        raise DegenerateSystemError("dual form vanishes identically")
    for _ in range(op.degree - max(deg_t, 0)):
        pts.append(ProjPoint((AppComplex(0, 0, precision_bits),
                              AppComplex(1, 0, precision_bits)), precision_bits))
    return pts


def _op_vanishes_at(op: DualOp, point: ProjPoint, precision_bits) -> bool:
    tol = tolerance(precision_bits) * op.norm1()
    val = evaluate(op, point.coords)
    return scalar_is_zero(val, tol) if not is_exact_scalar(val) else val == 0


def _dedupe_points(points, precision_bits):
    with workprec(precision_bits + GUARD_BITS):
        sep = mpf(2) ** (-(precision_bits // 4))
        out = []
        for p in points:
            if all(p.distance(q) > sep for q in out):
                out.append(p)
    return out


def _sorted_points(points):
    def key(p):
        return tuple((c.real, c.imag) for c in p.coords)
    return sorted(points, key=key)


def base_points(f: Form, e: int, precision_bits=DEFAULT_PRECISION_BITS,
                seed=DEFAULT_SEED, max_retries=DEFAULT_MAX_RETRIES):
    """Common projective zeros of the degree-e annihilator (n <= 3 only).

    Candidates come from intersecting two random rational combinations of
    the kernel basis; each candidate is certified against the whole basis.
    An empty list means the system is base-point free within tolerance.
    """
    n = f.num_vars
    if n > 3:
        raise InvalidInputError("base point detection is implemented for n <= 3")
    basis = apolar_component(f, e, precision_bits)
    if not basis:
        raise InvalidInputError("the degree-e annihilator is zero")
    if n == 1:
        return []
    if n == 2:
        candidates = _binary_dual_roots(basis[0], precision_bits)
        certified = [p for p in candidates
                     if all(_op_vanishes_at(op, p, precision_bits) for op in basis)]
        return _sorted_points(_dedupe_points(certified, precision_bits))

    if len(basis) == 1:
        raise DegenerateSystemError(
            "a single curve cuts out a positive-dimensional zero set")

    from .decompose import _curve_pair_candidates  # shared resultant machinery

    rng = random.Random(seed)
    zero_resultants = 0
    for attempt in range(max_retries):
        c0 = [Fraction(rng.randint(-8, 8)) for _ in basis]
        c1 = [Fraction(rng.randint(-8, 8)) for _ in basis]
        d0 = _combine_ops(basis, c0)
        d1 = _combine_ops(basis, c1)
        if d0 is None or d1 is None or _proportional_ops(d0, d1, precision_bits):
            continue
        try:
            candidates = _curve_pair_candidates(d0, d1, precision_bits, rng)
        except DegenerateSystemError:
            zero_resultants += 1
            if zero_resultants >= 3:
                raise
            continue
        certified = [p for p in candidates
                     if all(_op_vanishes_at(op, p, precision_bits) for op in basis)]
        return _sorted_points(_dedupe_points(certified, precision_bits))
    raise RetryBudgetError("base point search exhausted its retry budget")


def _combine_ops(basis, weights):
    out = None
    for op, w in zip(basis, weights):
        if is_exact_scalar(w) and w == 0:
            continue
        term = op.scale(w)
        out = term if out is None else out + term
    if out is None or out.is_zero():
        return None
    return out


def _proportional_ops(a: DualOp, b: DualOp, precision_bits) -> bool:
    tol = tolerance(precision_bits) * a.norm1() * b.norm1()
    keys = set(a.coeffs) | set(b.coeffs)
    for k1 in keys:
        for k2 in keys:
            if k1 >= k2:
                continue
            cross = (a.coeffs.get(k1, Fraction(0)) * b.coeffs.get(k2, Fraction(0))
                     - a.coeffs.get(k2, Fraction(0)) * b.coeffs.get(k1, Fraction(0)))
            if is_exact_scalar(cross):
                if cross != 0:
                    return False
            elif not scalar_is_zero(cross, tol):
                return False
    return True


# ---------------------------------------------------------------------------
# power witness (base point <=> some contraction is a pure power)


def power_witness(f: Form, l: LinearForm, e: int,
                  precision_bits=DEFAULT_PRECISION_BITS):
    """A dual operator of degree d-e contracting f to a multiple of l^e,
    or None when no such operator exists."""
    d = f.degree
    if e > d:
        raise InvalidInputError("e must not exceed the degree of f")
    if l.num_vars != f.num_vars:
        raise InvalidInputError("mismatched number of variables")
    from .poly import linear_power
    n = f.num_vars
    cat = catalecticant(f, d - e)
    target_form = linear_power(l, e)
    target = [target_form.coeffs.get(b, Fraction(0)) for b in cat.col_labels]
    # solve (entries)^T is not needed: unknown row-combination x with
    # sum_r x_r * entries[r] = target, i.e. A^T x = target
    rows = linalg.transpose([list(r) for r in cat.entries])
    if linalg.matrix_is_exact(rows) and all(is_exact_scalar(t) for t in target):
        x = linalg.rational_solve(rows, target)
        if x is None:
            return None
    else:
        x, resid = linalg.complex_solve_lstsq(rows, target, precision_bits)
        scale = max(target_form.max_abs(), f.max_abs())
        if resid > tolerance(precision_bits) * scale:
            return None
    coeffs = {expo: c for expo, c in zip(cat.row_labels, x)
              if not (is_exact_scalar(c) and c == 0)}
    if not coeffs:
        return None
    op = DualOp(n, d - e, coeffs)
    return op
