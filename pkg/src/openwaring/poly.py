"""Multivariate homogeneous forms, dual operators and the contraction action.

``Form`` lives in the polynomial ring k[x_0..x_{n-1}]; ``DualOp`` lives in
the dual ring of constant-coefficient differential operators, which acts on
forms by plain iterated partial differentiation (no divided-power
normalization).  Both are sparse maps from exponent vectors to nonzero
scalars; monomials are kept in graded-lexicographic order everywhere a
deterministic layout matters.
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache
from math import factorial

from .errors import (InvalidInputError, NonHomogeneousError, ParseError)
from .numerics import is_exact_scalar, max_abs_of, scalar_is_zero


@lru_cache(maxsize=None)
def monomials_of_degree(num_vars: int, degree: int):
    """All exponent vectors of the given total degree, graded-lex descending
    (x_0 weighs heaviest)."""
    if num_vars <= 0:
        return (() if degree else ((),))
    if num_vars == 1:
        return ((degree,),)
    out = []
    for e0 in range(degree, -1, -1):
        for tail in monomials_of_degree(num_vars - 1, degree - e0):
            out.append((e0,) + tail)
    return tuple(out)


class _SparsePoly:
    """Shared sparse representation for Form and DualOp."""

    __slots__ = ("num_vars", "degree", "coeffs")

    def __init__(self, num_vars, degree, coeffs):
        if num_vars < 1:
            raise InvalidInputError("need at least one variable")
        if degree < 0:
            raise InvalidInputError("degree must be non-negative")
        clean = {}
        for expo, c in coeffs.items():
            expo = tuple(int(e) for e in expo)
            if len(expo) != num_vars or any(e < 0 for e in expo):
                raise InvalidInputError(f"bad exponent vector {expo}")
            if sum(expo) != degree:
                raise InvalidInputError(
                    f"exponent {expo} has degree {sum(expo)}, expected {degree}")
            if isinstance(c, int):
                c = Fraction(c)
            if is_exact_scalar(c) and c == 0:
                continue
            if expo in clean:
                raise InvalidInputError(f"duplicate exponent {expo}")
            clean[expo] = c
        object.__setattr__(self, "num_vars", int(num_vars))
        object.__setattr__(self, "degree", int(degree))
        object.__setattr__(self, "coeffs", clean)

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def is_zero(self, tol=0) -> bool:
        if not self.coeffs:
            return True
        return all(scalar_is_zero(c, tol) for c in self.coeffs.values())

    def is_exact(self) -> bool:
        return all(is_exact_scalar(c) for c in self.coeffs.values())

    def coefficient(self, expo):
        return self.coeffs.get(tuple(expo), Fraction(0))

    def norm1(self):
        s = Fraction(0)
        for c in self.coeffs.values():
            s = s + abs(c)
        return s

    def max_abs(self):
        return max_abs_of(self.coeffs.values())

    def _same_shape(self, other):
        if type(self) is not type(other):
            raise InvalidInputError("cannot combine a Form with a DualOp")
        if self.num_vars != other.num_vars or self.degree != other.degree:
            raise InvalidInputError("mismatched number of variables or degree")

    def __add__(self, other):
        self._same_shape(other)
        out = dict(self.coeffs)
        for expo, c in other.coeffs.items():
            s = out.get(expo, Fraction(0)) + c
            if is_exact_scalar(s) and s == 0:
                out.pop(expo, None)
            else:
                out[expo] = s
        return type(self)(self.num_vars, self.degree, out)

    def __sub__(self, other):
        return self + other.scale(Fraction(-1))

    def __neg__(self):
        return self.scale(Fraction(-1))

    def scale(self, c):
        if is_exact_scalar(c) and c == 0:
            return type(self)(self.num_vars, self.degree, {})
        return type(self)(self.num_vars, self.degree,
                          {e: c * v for e, v in self.coeffs.items()})

    def cleaned(self, tol):
        """Drop coefficients with |c| <= tol (used on approximate data)."""
        out = {e: c for e, c in self.coeffs.items() if not scalar_is_zero(c, tol)}
        return type(self)(self.num_vars, self.degree, out)

    def sorted_items(self):
        return sorted(self.coeffs.items(), key=lambda kv: kv[0], reverse=True)

    def __eq__(self, other):
        return (type(self) is type(other) and self.num_vars == other.num_vars
                and self.degree == other.degree and self.coeffs == other.coeffs)

    def __repr__(self):
        return f"{type(self).__name__}({self.num_vars}, {self.degree}, {render_form(self)!r})"


class Form(_SparsePoly):
    """Homogeneous polynomial of fixed degree in k[x_0..x_{n-1}]."""


class DualOp(_SparsePoly):
    """Homogeneous element of the dual ring, acting by differentiation."""


class LinearForm:
    """A linear form given by its coordinate vector (l_0, ..., l_{n-1})."""

    __slots__ = ("coords",)

    def __init__(self, coords):
        coords = tuple(Fraction(c) if isinstance(c, int) else c for c in coords)
        if not coords:
            raise InvalidInputError("linear form needs at least one coordinate")
        object.__setattr__(self, "coords", coords)

    def __setattr__(self, name, value):
        raise AttributeError("LinearForm is immutable")

    @property
    def num_vars(self):
        return len(self.coords)

    def is_zero(self, tol=0) -> bool:
        return all(scalar_is_zero(c, tol) for c in self.coords)

    def is_exact(self) -> bool:
        return all(is_exact_scalar(c) for c in self.coords)

    def scale(self, c):
        return LinearForm(tuple(c * x for x in self.coords))

    def to_form(self) -> Form:
        n = len(self.coords)
        return Form(n, 1, {tuple(1 if j == i else 0 for j in range(n)): c
                           for i, c in enumerate(self.coords)
                           if not (is_exact_scalar(c) and c == 0)})

    @classmethod
    def from_form(cls, f: Form) -> "LinearForm":
        if f.degree != 1:
            raise InvalidInputError("not a linear form")
        coords = [Fraction(0)] * f.num_vars
        for expo, c in f.coeffs.items():
            coords[expo.index(1)] = c
        return cls(coords)

    def __eq__(self, other):
        return isinstance(other, LinearForm) and self.coords == other.coords

    def __repr__(self):
        return f"LinearForm({list(self.coords)!r})"


# ---------------------------------------------------------------------------
# core operations


def contract(op: DualOp, f: Form) -> Form:
    """Apply a dual operator to a form: each dual monomial acts as the
    corresponding iterated partial derivative."""
    if not isinstance(op, DualOp) or not isinstance(f, Form):
        raise InvalidInputError("contract expects (DualOp, Form)")
    if op.num_vars != f.num_vars:
        raise InvalidInputError("mismatched number of variables")
    if op.degree > f.degree:
        raise InvalidInputError(
            f"operator degree {op.degree} exceeds form degree {f.degree}")
    n = f.num_vars
    out = {}
    for a, u in op.coeffs.items():
        for b, v in f.coeffs.items():
            if any(b[i] < a[i] for i in range(n)):
                continue
            mult = 1
            for i in range(n):
                if a[i]:
                    mult *= factorial(b[i]) // factorial(b[i] - a[i])
            target = tuple(b[i] - a[i] for i in range(n))
            s = out.get(target, Fraction(0)) + u * v * mult
            if is_exact_scalar(s) and s == 0:
                out.pop(target, None)
            else:
                out[target] = s
    return Form(n, f.degree - op.degree, out)


def dual_power(alpha, e: int) -> DualOp:
    """e-th power of a degree-1 dual operator with the given coordinates."""
    return _power_of_linear(tuple(alpha), e, DualOp)


def linear_power(l: LinearForm, d: int) -> Form:
    """(l_0 x_0 + ... + l_{n-1} x_{n-1})^d by multinomial expansion."""
    return _power_of_linear(l.coords, d, Form)


def _power_of_linear(coords, d, cls):
    if d < 0:
        raise InvalidInputError("exponent must be non-negative")
    n = len(coords)
    out = {}
    for expo in monomials_of_degree(n, d):
        c = Fraction(factorial(d))
        for e in expo:
            c /= factorial(e)
        val = c
        skip = False
        for x, e in zip(coords, expo):
            if e == 0:
                continue
            if is_exact_scalar(x) and x == 0:
                skip = True
                break
            val = val * x ** e
        if skip or (is_exact_scalar(val) and val == 0):
            continue
        out[expo] = val
    return cls(n, d, out)


def _substitute(f, matrix):
    """Substitute x_i -> sum_j matrix[i][j] x_j; no invertibility demanded."""
    n = f.num_vars
    cls = type(f)
    lin = [LinearForm(matrix[i]) for i in range(n)]
    out = cls(n, f.degree, {})
    for expo, c in f.coeffs.items():
        term = None
        for i, e in enumerate(expo):
            if e == 0:
                continue
            piece = _power_of_linear(lin[i].coords, e, cls)
            term = piece if term is None else _multiply(term, piece)
        if term is None:
            term = cls(n, 0, {(0,) * n: Fraction(1)})
        out = out + term.scale(c)
    return out


def _multiply(f, g):
    """Sparse product of two homogeneous polynomials of the same kind."""
    cls = type(f)
    n = f.num_vars
    out = {}
    for a, u in f.coeffs.items():
        for b, v in g.coeffs.items():
            t = tuple(a[i] + b[i] for i in range(n))
            s = out.get(t, Fraction(0)) + u * v
            if is_exact_scalar(s) and s == 0:
                out.pop(t, None)
            else:
                out[t] = s
    return cls(n, f.degree + g.degree, out)


def change_coordinates(f, matrix):
    """Substitute x_i -> sum_j M[i][j] x_j; M must be invertible.

    Works for Form and DualOp alike.  Invertibility is checked by exact
    determinant for rational matrices.
    """
    n = f.num_vars
    if len(matrix) != n or any(len(row) != n for row in matrix):
        raise InvalidInputError("matrix shape must match the number of variables")
    if all(is_exact_scalar(x) for row in matrix for x in row):
        from .linalg import rational_det
        if rational_det(matrix) == 0:
            raise InvalidInputError("coordinate change matrix is singular")
    return _substitute(f, matrix)


def evaluate(f, coords):
    """Value of a Form/DualOp at a coordinate vector."""
    if len(coords) != f.num_vars:
        raise InvalidInputError("mismatched number of variables")
    total = Fraction(0)
    for expo, c in f.coeffs.items():
        val = c
        skip = False
        for x, e in zip(coords, expo):
            if e == 0:
                continue
            if is_exact_scalar(x) and x == 0:
                skip = True
                break
            val = val * x ** e
        if not skip:
            total = total + val
    return total


def evaluate_dual(op: DualOp, l: LinearForm):
    """Value of a dual operator at the point of PS_1 given by l.

    Substitutes the i-th dual variable by coords[i]; vanishing means [l]
    lies on the hypersurface cut out by the operator.
    """
    if op.num_vars != l.num_vars:
        raise InvalidInputError("mismatched number of variables")
    return evaluate(op, l.coords)


# ---------------------------------------------------------------------------
# text grammar

_TOKEN_FACTOR = re.compile(r"^([a-zA-Z])(\d+)(?:\^(\d+))?$")
_TOKEN_COEFF = re.compile(r"^(-?\d+)(?:/(\d+))?$")


def parse_form(text: str, num_vars: int, var: str = "x") -> Form:
    """Parse a form from the textual grammar.

    Terms are separated by ``+``/``-``; each term is an optional rational
    coefficient (``p/q`` or an integer) and ``*``-separated variables
    ``x<i>`` with an optional ``^<k>`` power, zero-based indices.
    Whitespace is insignificant.  Non-homogeneous input is rejected with
    the offending monomials listed.
    """
    if num_vars < 1:
        raise InvalidInputError("need at least one variable")
    squashed = text.replace(" ", "").replace("\t", "")
    if not squashed:
        raise ParseError("empty form")
    # split into signed terms
    terms = []
    cur = ""
    sign = 1
    first = True
    for ch in squashed:
        if ch in "+-" and not first and cur:
            terms.append((sign, cur))
            sign = 1 if ch == "+" else -1
            cur = ""
            continue
        if ch in "+-" and (first or not cur):
            if ch == "-":
                sign = -sign
            first = False
            continue
        cur += ch
        first = False
    if cur:
        terms.append((sign, cur))
    if not terms:
        raise ParseError("no terms found")

    parsed = []  # (coeff, expo) per term, degree not yet checked
    for sgn, term in terms:
        coeff = Fraction(sgn)
        expo = [0] * num_vars
        for piece in term.split("*"):
            if not piece:
                raise ParseError(f"empty factor in term {term!r}")
            m = _TOKEN_FACTOR.match(piece)
            if m:
                letter, idx, power = m.group(1), int(m.group(2)), m.group(3)
                if letter != var:
                    raise ParseError(
                        f"unknown variable letter {letter!r}, expected {var!r}")
                if idx >= num_vars:
                    raise ParseError(
                        f"variable index {idx} out of range for {num_vars} variables")
                expo[idx] += int(power) if power else 1
                continue
            m = _TOKEN_COEFF.match(piece)
            if m:
                num, den = int(m.group(1)), m.group(2)
                if den is not None and int(den) == 0:
                    raise ParseError("zero denominator")
                coeff *= Fraction(num, int(den)) if den else Fraction(num)
                continue
            raise ParseError(f"cannot parse factor {piece!r}")
        parsed.append((coeff, tuple(expo)))

    degrees = {sum(e) for _, e in parsed}
    if len(degrees) > 1:
        top = max(degrees)
        offending = [_render_monomial(e, var) for _, e in parsed if sum(e) != top]
        raise NonHomogeneousError(
            f"form is not homogeneous; offending monomials: {', '.join(offending)}",
            offending)
    degree = degrees.pop()
    out = {}
    for coeff, expo in parsed:
        out[expo] = out.get(expo, Fraction(0)) + coeff
    return Form(num_vars, degree, {e: c for e, c in out.items() if c != 0})


def _render_monomial(expo, var):
    parts = []
    for i, e in enumerate(expo):
        if e == 1:
            parts.append(f"{var}{i}")
        elif e > 1:
            parts.append(f"{var}{i}^{e}")
    return "*".join(parts) if parts else "1"


def _render_scalar(c):
    if isinstance(c, Fraction):
        return str(c)
    import mpmath
    re_s = mpmath.nstr(c.real, 12)
    im_s = mpmath.nstr(c.imag, 12)
    return f"({re_s}{'+' if c.imag >= 0 else ''}{im_s}j)"


def render_form(f, var: str = "x") -> str:
    """Inverse of parse_form on rational forms; graded-lex term order."""
    if not f.coeffs:
        return "0"
    parts = []
    for expo, c in f.sorted_items():
        mono = _render_monomial(expo, var)
        if isinstance(c, Fraction):
            neg = c < 0
            mag = abs(c)
            if mono == "1":
                body = str(mag)
            elif mag == 1:
                body = mono
            else:
                body = f"{mag}*{mono}"
            sign = "-" if neg else "+"
        else:
            body = _render_scalar(c) + ("" if mono == "1" else f"*{mono}")
            sign = "+"
        if not parts:
            parts.append(body if sign == "+" else f"-{body}")
        else:
            parts.append(f" {sign} {body}")
    return "".join(parts)
