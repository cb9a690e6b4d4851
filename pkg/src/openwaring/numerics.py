"""Scalar tower and univariate polynomial utilities.

Two kinds of scalars flow through the package:

* exact rationals — ``fractions.Fraction`` (aliased ``Rational``), used
  whenever a computation can stay exact;
* ``AppComplex`` — arbitrary-precision complex numbers backed by mpmath,
  tagged with an explicit bit precision, used once roots or d-th roots
  force us off the rationals.

Mixed arithmetic promotes to ``AppComplex`` at the larger of the two
precisions.  All values are immutable.
"""

from __future__ import annotations

import mpmath
from fractions import Fraction
from mpmath import mpf, mpc, workprec

from .errors import ConsistencyError, InvalidInputError

Rational = Fraction

DEFAULT_PRECISION_BITS = 256
MIN_PRECISION_BITS = 64

#: extra working bits used inside iterative kernels before rounding back
GUARD_BITS = 32


def tolerance(precision_bits: int):
    """Residual acceptance threshold 2**(-precision_bits/2) as an mpf."""
    with workprec(64):
        return mpf(2) ** (-(precision_bits // 2))


def _to_mpf(x, bits):
    with workprec(bits):
        if isinstance(x, Fraction):
            return mpf(x.numerator) / mpf(x.denominator)
        return mpf(x)


class AppComplex:
    """Arbitrary-precision complex scalar with an explicit precision tag.

    Arithmetic between two ``AppComplex`` values is carried out at the
    maximum of their precisions; ints and ``Fraction`` promote to the
    precision of the other operand.
    """

    __slots__ = ("real", "imag", "precision_bits")

    def __init__(self, real=0, imag=0, precision_bits=DEFAULT_PRECISION_BITS):
        if precision_bits < MIN_PRECISION_BITS:
            raise InvalidInputError(
                f"precision_bits must be >= {MIN_PRECISION_BITS}, got {precision_bits}")
        object.__setattr__(self, "precision_bits", int(precision_bits))
        object.__setattr__(self, "real", _to_mpf(real, precision_bits))
        object.__setattr__(self, "imag", _to_mpf(imag, precision_bits))

    def __setattr__(self, name, value):
        raise AttributeError("AppComplex is immutable")

    @classmethod
    def from_mpc(cls, z, precision_bits):
        # constructors round to the ambient precision, so pin it first
        with workprec(precision_bits):
            z = mpc(z)
        return cls(z.real, z.imag, precision_bits)

    def to_mpc(self):
        with workprec(self.precision_bits):
            return mpc(self.real, self.imag)

    def __complex__(self):
        return complex(self.real, self.imag)

    def _coerce(self, other):
        if isinstance(other, AppComplex):
            return other, max(self.precision_bits, other.precision_bits)
        if isinstance(other, (int, Fraction)):
            return AppComplex(other, 0, self.precision_bits), self.precision_bits
        return None, None

    def _binop(self, other, op):
        rhs, bits = self._coerce(other)
        if rhs is None:
            return NotImplemented
        with workprec(bits + GUARD_BITS):
            out = op(self.to_mpc(), rhs.to_mpc())
        return AppComplex.from_mpc(out, bits)

    def __add__(self, other):
        return self._binop(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binop(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._binop(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binop(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binop(other, lambda a, b: a / b)

    def __rtruediv__(self, other):
        return self._binop(other, lambda a, b: b / a)

    def __neg__(self):
        # mpf negation rounds at the ambient precision, so pin it
        with workprec(self.precision_bits):
            return AppComplex(-self.real, -self.imag, self.precision_bits)

    def __pow__(self, e):
        if not isinstance(e, int) or e < 0:
            return NotImplemented
        with workprec(self.precision_bits + GUARD_BITS):
            out = self.to_mpc() ** e
        return AppComplex.from_mpc(out, self.precision_bits)

    def conjugate(self):
        with workprec(self.precision_bits):
            return AppComplex(self.real, -self.imag, self.precision_bits)

    def __abs__(self):
        with workprec(self.precision_bits + GUARD_BITS):
            return abs(self.to_mpc())

    def __repr__(self):
        return (f"AppComplex({mpmath.nstr(self.real, 12)}, "
                f"{mpmath.nstr(self.imag, 12)}, bits={self.precision_bits})")


# ---------------------------------------------------------------------------
# generic scalar helpers


def is_exact_scalar(x) -> bool:
    return isinstance(x, (int, Fraction))


def scalar_abs(x):
    """|x| as a Fraction (exact input) or mpf."""
    if is_exact_scalar(x):
        return abs(Fraction(x))
    return abs(x)


def scalar_is_zero(x, tol=0) -> bool:
    """Exact zero test for rationals; |x| <= tol for approximate scalars."""
    if is_exact_scalar(x):
        return x == 0
    return abs(x) <= tol


def max_abs_of(values):
    """max |v| over mixed rational/approximate scalars.

    Returns a Fraction when every value is exact, otherwise an mpf
    (rationals are rounded to 64 bits; only used for thresholds).
    """
    exact = []
    approx = []
    for v in values:
        if is_exact_scalar(v):
            exact.append(abs(Fraction(v)))
        else:
            approx.append(abs(v))
    if not approx:
        return max(exact, default=Fraction(0))
    m = max(approx)
    for e in exact:
        fe = _to_mpf(e, 64)
        if fe > m:
            m = fe
    return m


def as_app_complex(x, precision_bits=DEFAULT_PRECISION_BITS) -> AppComplex:
    if isinstance(x, AppComplex):
        return x
    return AppComplex(x, 0, precision_bits)


def scalar_precision(x) -> int:
    return x.precision_bits if isinstance(x, AppComplex) else DEFAULT_PRECISION_BITS


def values_precision(values, default=DEFAULT_PRECISION_BITS) -> int:
    """Smallest precision tag among the approximate values, else the default."""
    bits = [v.precision_bits for v in values if isinstance(v, AppComplex)]
    return min(bits) if bits else default


# ---------------------------------------------------------------------------
# univariate polynomials


class UniPoly:
    """Dense univariate polynomial; ``coeffs[k]`` is the coefficient of t^k.

    Coefficients are Fractions or AppComplex.  Trailing zero coefficients
    are trimmed exactly for rational input (approximate coefficients are
    kept as given, so the stated degree of an approximate polynomial is the
    caller's responsibility).
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        coeffs = [Fraction(c) if isinstance(c, int) else c for c in coeffs]
        while coeffs and is_exact_scalar(coeffs[-1]) and coeffs[-1] == 0:
            coeffs.pop()
        object.__setattr__(self, "coeffs", tuple(coeffs))

    def __setattr__(self, name, value):
        raise AttributeError("UniPoly is immutable")

    @property
    def degree(self) -> int:
        """Degree; -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_exact(self) -> bool:
        return all(is_exact_scalar(c) for c in self.coeffs)

    def __eq__(self, other):
        return isinstance(other, UniPoly) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __add__(self, other):
        n = max(len(self.coeffs), len(other.coeffs))
        out = []
        for k in range(n):
            a = self.coeffs[k] if k < len(self.coeffs) else Fraction(0)
            b = other.coeffs[k] if k < len(other.coeffs) else Fraction(0)
            out.append(a + b)
        return UniPoly(out)

    def __neg__(self):
        return UniPoly([-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if self.is_zero() or other.is_zero():
            return UniPoly([])
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a * b
        return UniPoly(out)

    def scale(self, c):
        return UniPoly([c * a for a in self.coeffs])

    def derivative(self):
        return UniPoly([k * c for k, c in enumerate(self.coeffs)][1:])

    def __call__(self, x):
        """Horner evaluation; accepts any scalar the coefficients mix with."""
        acc = None
        for c in reversed(self.coeffs):
            acc = c if acc is None else acc * x + c
        if acc is None:
            return Fraction(0)
        return acc

    def max_abs(self):
        if self.is_zero():
            return Fraction(0)
        return max_abs_of(self.coeffs)

    def divmod(self, other):
        """Exact rational division with remainder; rational input only."""
        if not (self.is_exact() and other.is_exact()):
            raise InvalidInputError("polynomial divmod requires rational coefficients")
        if other.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        rem = list(self.coeffs)
        quo = [Fraction(0)] * max(0, len(rem) - len(other.coeffs) + 1)
        dlead = other.coeffs[-1]
        dn = other.degree
        while len(rem) - 1 >= dn and any(c != 0 for c in rem):
            while rem and rem[-1] == 0:
                rem.pop()
            if len(rem) - 1 < dn:
                break
            k = len(rem) - 1 - dn
            q = rem[-1] / dlead
            quo[k] = q
            for i, c in enumerate(other.coeffs):
                rem[k + i] -= q * c
        return UniPoly(quo), UniPoly(rem)

    def __repr__(self):
        return f"UniPoly({list(self.coeffs)!r})"


def poly_gcd(p: UniPoly, q: UniPoly) -> UniPoly:
    """Monic gcd over the rationals by the Euclidean algorithm."""
    a, b = p, q
    while not b.is_zero():
        _, r = a.divmod(b)
        a, b = b, r
    if a.is_zero():
        return a
    lead = a.coeffs[-1]
    return a.scale(Fraction(1) / lead)


def squarefree_part(p: UniPoly) -> UniPoly:
    """p / gcd(p, p'), normalized monic: same roots, all simple."""
    if p.is_zero():
        raise InvalidInputError("squarefree_part of the zero polynomial")
    if not p.is_exact():
        raise InvalidInputError("squarefree_part requires rational coefficients")
    if p.degree == 0:
        return UniPoly([Fraction(1)])
    g = poly_gcd(p, p.derivative())
    q, r = p.divmod(g)
    if not r.is_zero():
        raise ConsistencyError("gcd does not divide its argument")
    return q.scale(Fraction(1) / q.coeffs[-1])


def is_squarefree(p: UniPoly) -> bool:
    return squarefree_part(p).degree == p.degree


def squarefree_decomposition(p: UniPoly):
    """Yun's algorithm: [(g_i, i)] with p = lc * prod g_i^i, g_i squarefree,
    pairwise coprime, returned only for nonconstant g_i."""
    if p.is_zero():
        raise InvalidInputError("squarefree decomposition of the zero polynomial")
    out = []
    g = poly_gcd(p, p.derivative())
    if g.degree == 0:
        return [(p.scale(Fraction(1) / p.coeffs[-1]), 1)] if p.degree > 0 else []
    w, _ = p.divmod(g)
    y, _ = p.derivative().divmod(g)
    i = 1
    while w.degree > 0:
        z = y - w.derivative()
        h = poly_gcd(w, z)
        if h.degree > 0:
            out.append((h, i))
        w, _ = w.divmod(h)
        y, _ = z.divmod(h)
        i += 1
    return out


# ---------------------------------------------------------------------------
# root finding


def _aberth(coeffs, work_bits, max_iters=400):
    """Aberth–Ehrlich simultaneous iteration on an mpc coefficient list.

    ``coeffs`` is ascending with nonzero leading and constant terms.
    Deterministic: fixed initial points on a circle with an angular offset.
    Returns a list of deg(p) approximations.
    """
    n = len(coeffs) - 1
    with workprec(work_bits):
        cs = [mpc(c) for c in coeffs]
        lead = cs[-1]
        monic = [c / lead for c in cs]
        dmonic = [k * monic[k] for k in range(1, n + 1)]

        # initial guesses: circle of radius |a0/an|^(1/n), offset angles
        r = abs(monic[0]) ** (mpf(1) / n)
        if r == 0 or r < mpf(2) ** (-work_bits // 2):
            r = mpf(1) / 2
        two_pi = 2 * mpmath.pi
        z = [r * mpmath.exp(mpc(0, two_pi * k / n + mpf(1) / 2)) for k in range(n)]

        stop = mpf(2) ** (-(work_bits - 8))

        def peval(poly, x):
            acc = mpc(0)
            for c in reversed(poly):
                acc = acc * x + c
            return acc

        for _ in range(max_iters):
            max_step = mpf(0)
            for k in range(n):
                pv = peval(monic, z[k])
                dv = peval(dmonic, z[k])
                if pv == 0:
                    continue
                if dv == 0:
                    # nudge deterministically off a critical point
                    z[k] = z[k] + (abs(z[k]) + 1) * mpf(2) ** (-work_bits // 4)
                    max_step = mpf(1)
                    continue
                newt = pv / dv
                s = mpc(0)
                for j in range(n):
                    if j != k:
                        diff = z[k] - z[j]
                        if diff == 0:
                            diff = mpc(mpf(2) ** (-work_bits), 0)
                        s += 1 / diff
                denom = 1 - newt * s
                if denom == 0:
                    step = newt
                else:
                    step = newt / denom
                z[k] = z[k] - step
                rel = abs(step) / (1 + abs(z[k]))
                if rel > max_step:
                    max_step = rel
            if max_step <= stop:
                break
        return [mpc(w) for w in z]


def _newton_polish(coeffs, roots, work_bits, steps=6):
    with workprec(work_bits):
        cs = [mpc(c) for c in coeffs]
        dcs = [k * cs[k] for k in range(1, len(cs))]

        def peval(poly, x):
            acc = mpc(0)
            for c in reversed(poly):
                acc = acc * x + c
            return acc

        out = []
        for z in roots:
            w = mpc(z)
            for _ in range(steps):
                dv = peval(dcs, w)
                if dv == 0:
                    break
                w = w - peval(cs, w) / dv
            out.append(w)
        return out


def _coeffs_to_mpc(p: UniPoly, bits):
    with workprec(bits):
        out = []
        for c in p.coeffs:
            if isinstance(c, Fraction):
                out.append(mpc(mpf(c.numerator) / mpf(c.denominator)))
            elif isinstance(c, AppComplex):
                out.append(c.to_mpc())
            else:
                out.append(mpc(c))
        return out


def univariate_roots(p: UniPoly, precision_bits: int = DEFAULT_PRECISION_BITS):
    """All deg(p) complex roots, with multiplicity, as AppComplex.

    Rational input goes through a squarefree decomposition first, so each
    Aberth run only ever sees simple roots; approximate input is solved
    directly.  Every returned root r satisfies
    |p(r)| <= 2^(-precision_bits/2) * max|coeff| * max(1, |r|)^deg.
    """
    if p.is_zero():
        raise InvalidInputError("cannot extract roots of the zero polynomial")
    if p.degree < 1:
        raise InvalidInputError("root extraction needs degree >= 1")

    # split off roots at the origin
    nzero = 0
    coeffs = list(p.coeffs)
    tol_zero = tolerance(precision_bits) * p.max_abs()
    while coeffs and scalar_is_zero(coeffs[0], tol_zero):
        coeffs.pop(0)
        nzero += 1
    if not coeffs:
        raise InvalidInputError("polynomial is zero within the working tolerance")
    body = UniPoly(coeffs)

    roots = []
    if not body.is_zero() and body.degree >= 1:
        work = precision_bits + 2 * GUARD_BITS
        if body.is_exact():
            for factor, mult in squarefree_decomposition(body):
                if factor.degree < 1:
                    continue
                if factor.degree == 1:
                    r = -factor.coeffs[0] / factor.coeffs[1]
                    rr = AppComplex(r, 0, precision_bits)
                    roots.extend([rr] * mult)
                    continue
                cs = _coeffs_to_mpc(factor, work)
                approx = _aberth(cs, work)
                approx = _newton_polish(cs, approx, work)
                for r in approx:
                    roots.extend([AppComplex.from_mpc(r, precision_bits)] * mult)
        else:
            lead = body.coeffs[-1]
            lead_abs = mpf(1) * (abs(lead) if not is_exact_scalar(lead)
                                 else abs(Fraction(lead)))
            if lead_abs <= tolerance(precision_bits) * body.max_abs():
                raise InvalidInputError(
                    "leading coefficient is numerically zero; trim the degree first")
            cs = _coeffs_to_mpc(body, work)
            approx = _aberth(cs, work)
            approx = _newton_polish(cs, approx, work)
            roots.extend(AppComplex.from_mpc(r, precision_bits) for r in approx)

    roots.extend(AppComplex(0, 0, precision_bits) for _ in range(nzero))
    if len(roots) != p.degree:
        raise ConsistencyError(
            f"found {len(roots)} roots for a degree-{p.degree} polynomial")

    # residual certificate
    tol = tolerance(precision_bits)
    scale = p.max_abs()
    with workprec(precision_bits + GUARD_BITS):
        cs = _coeffs_to_mpc(p, precision_bits + GUARD_BITS)
        for r in roots:
            z = r.to_mpc()
            acc = mpc(0)
            for c in reversed(cs):
                acc = acc * z + c
            bound = tol * scale * max(mpf(1), abs(z)) ** p.degree
            if abs(acc) > bound:
                raise ConsistencyError(
                    "root residual exceeds the acceptance threshold")

    def _key(r):
        return (r.real, r.imag)

    return sorted(roots, key=_key)
