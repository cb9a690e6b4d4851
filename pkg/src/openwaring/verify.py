"""Independent certification of decompositions and catalecticant rank lower
bounds.

The reconstruction here deliberately does not share code with the
decomposition pipeline: powers of linear forms are expanded by repeated
sparse multiplication rather than the multinomial formula, so a bug in one
expansion cannot hide in the other.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from mpmath import mpf

from .apolarity import catalecticant, essential_variables
from .bounds import recursion_bound
from .decompose import Decomposition, ForbiddenSet, is_forbidden
from .errors import InvalidInputError
from .numerics import DEFAULT_PRECISION_BITS, is_exact_scalar, tolerance
from .poly import Form


@dataclass(frozen=True)
class VerifyReport:
    """Outcome of re-checking a decomposition against its target."""

    residual: object
    term_count: int
    bound_value: int
    forbidden_violations: tuple
    exact: bool
    passed: bool

    def residual_log2(self):
        """log2 of the residual, or None when it is exactly zero."""
        import math
        if is_exact_scalar(self.residual):
            if self.residual == 0:
                return None
            q = Fraction(self.residual)
            return (math.log2(q.numerator) - math.log2(q.denominator))
        if self.residual == 0:
            return None
        import mpmath
        return float(mpmath.log(self.residual, 2))


def _expand_power(coords, d, n):
    """(sum_i coords[i] x_i)^d by repeated sparse multiplication."""
    acc = {(0,) * n: Fraction(1)}
    base = {}
    for i, c in enumerate(coords):
        if is_exact_scalar(c) and c == 0:
            continue
        base[tuple(1 if j == i else 0 for j in range(n))] = c
    for _ in range(d):
        nxt = {}
        for ea, ca in acc.items():
            for eb, cb in base.items():
                key = tuple(x + y for x, y in zip(ea, eb))
                val = nxt.get(key, Fraction(0)) + ca * cb
                if is_exact_scalar(val) and val == 0:
                    nxt.pop(key, None)
                else:
                    nxt[key] = val
        acc = nxt
    return acc


def check_decomposition(f: Form, dec: Decomposition,
                        V: ForbiddenSet | None = None,
                        tol=None,
                        precision_bits=DEFAULT_PRECISION_BITS) -> VerifyReport:
    """Re-verify a decomposition: reconstruction, avoidance, term bound.

    Rational data is compared exactly; otherwise the residual is the max
    coefficient mismatch normalized by the 1-norm of f, accepted below
    ``tol`` (default 2^-(precision/2)).
    """
    if V is None:
        V = ForbiddenSet.empty(f.num_vars)
    if dec.num_vars != f.num_vars or dec.degree != f.degree:
        raise InvalidInputError("decomposition does not match the form's shape")
    if V.num_vars != f.num_vars:
        raise InvalidInputError("forbidden set does not match the form")
    if tol is None:
        tol = tolerance(precision_bits)

    n, d = f.num_vars, f.degree
    total = {}
    for c, l in dec.terms:
        if l.is_zero():
            raise InvalidInputError("decomposition contains a zero linear form")
        for expo, v in _expand_power(l.coords, d, n).items():
            s = total.get(expo, Fraction(0)) + c * v
            if is_exact_scalar(s) and s == 0:
                total.pop(expo, None)
            else:
                total[expo] = s

    all_exact = (f.is_exact() and dec.exact
                 and all(is_exact_scalar(v) for v in total.values()))
    norm = f.norm1()
    scale = norm if (not is_exact_scalar(norm) or norm > 0) else Fraction(1)

    deltas = dict(total)
    for expo, v in f.coeffs.items():
        s = deltas.get(expo, Fraction(0)) - v
        if is_exact_scalar(s) and s == 0:
            deltas.pop(expo, None)
        else:
            deltas[expo] = s

    if all_exact:
        residual = Fraction(0)
        for v in deltas.values():
            if abs(v) > residual:
                residual = abs(v)
        residual = residual / scale
        residual_ok = residual == 0
    else:
        residual = mpf(0)
        for v in deltas.values():
            mag = abs(Fraction(v)) if is_exact_scalar(v) else abs(v)
            mag = mpf(1) * mag
            if mag > residual:
                residual = mag
        residual = residual / (mpf(1) * scale)
        residual_ok = residual <= tol

    violations = tuple(i for i, (c, l) in enumerate(dec.terms)
                       if is_forbidden(l, V, tol))
    bound_value = recursion_bound(
        max(essential_variables(f, precision_bits), 1), d, "improved")
    passed = residual_ok and not violations and dec.term_count <= bound_value
    return VerifyReport(residual, dec.term_count, bound_value, violations,
                        all_exact, passed)


def catalecticant_lower_bound(f: Form,
                              precision_bits=DEFAULT_PRECISION_BITS) -> int:
    """max_e rank of the degree-e catalecticant: a certified lower bound on
    the classical Waring rank."""
    if f.is_zero():
        raise InvalidInputError("the zero form has no rank bound")
    if f.degree < 2:
        return 1
    best = 1
    for e in range(1, f.degree):
        r = catalecticant(f, e).rank(precision_bits)
        if r > best:
            best = r
    return best
