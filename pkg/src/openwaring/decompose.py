"""Decomposition of forms into sums of d-th powers of linear forms, all of
them avoiding a forbidden closed set.

The dispatcher peels off the essential variables, then routes by shape:
single-term cases, the binary algorithm (annihilator generators and their
roots), the quadratic recursion (exact over the rationals), the ternary
cubic pipeline (pencils of conics, with a cubing perturbation when the
degree-2 annihilator has a base point), and the general inductive step,
which contracts by a generic degree-1 operator, lifts the terms, shrinks
the carried index set until the remainder lives in a hyperplane, and
recurses there.

Every random choice is drawn from a seeded generator passed down the whole
call tree, so identical (input, seed) pairs replay identically.  Exact
rational arithmetic is used wherever the inputs allow; complex scalars at a
fixed bit precision take over once roots enter.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from mpmath import mpf, workprec

from . import linalg
from .apolarity import (DEFAULT_MAX_RETRIES, DEFAULT_SEED, ProjPoint,
                        apolar_component, base_points, essential_split,
                        essential_variables, restrict_to_prefix)
from .errors import (CommonComponentError, ConsistencyError,
                     DegenerateSystemError, InvalidInputError, NoFitError,
                     NonTransversalError, ParseError, RetryBudgetError)
from .numerics import (AppComplex, DEFAULT_PRECISION_BITS, GUARD_BITS,
                       UniPoly, is_exact_scalar, is_squarefree, max_abs_of,
                       scalar_is_zero, squarefree_part, tolerance,
                       univariate_roots)
from .poly import (DualOp, Form, LinearForm, change_coordinates, contract,
                   dual_power, evaluate, linear_power, monomials_of_degree,
                   parse_form, render_form, _substitute)

_MAX_HEIGHT = 1 << 14


# ---------------------------------------------------------------------------
# forbidden sets


class ForbiddenSet:
    """Finite list of nonzero homogeneous constraints on linear forms.

    A linear form l is forbidden exactly when some constraint vanishes at
    its coordinate vector; nonzero constraints keep the forbidden set a
    proper closed subset.
    """

    __slots__ = ("num_vars", "constraints")

    def __init__(self, num_vars, constraints=()):
        constraints = tuple(constraints)
        for g in constraints:
            if not isinstance(g, Form):
                raise InvalidInputError("constraints must be Form instances")
            if g.num_vars != num_vars:
                raise InvalidInputError("constraint has the wrong number of variables")
            if g.degree < 1 or g.is_zero():
                raise InvalidInputError("constraints must be nonzero of degree >= 1")
        object.__setattr__(self, "num_vars", int(num_vars))
        object.__setattr__(self, "constraints", constraints)

    def __setattr__(self, name, value):
        raise AttributeError("ForbiddenSet is immutable")

    @classmethod
    def empty(cls, num_vars):
        return cls(num_vars, ())

    def is_empty(self):
        return not self.constraints

    def with_constraint(self, g: Form):
        return ForbiddenSet(self.num_vars, self.constraints + (g,))

    @classmethod
    def from_text(cls, text: str, num_vars: int):
        """One constraint per line, grammar variables l0..l{n-1}."""
        constraints = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                constraints.append(parse_form(line, num_vars, var="l"))
            except ParseError as exc:
                raise ParseError(f"avoid-file line {lineno}: {exc}") from exc
        return cls(num_vars, constraints)

    def to_text(self) -> str:
        return "\n".join(render_form(g, var="l") for g in self.constraints)

    def __repr__(self):
        return f"ForbiddenSet({self.num_vars}, {len(self.constraints)} constraints)"


def is_forbidden(l: LinearForm, V: ForbiddenSet, tol=None) -> bool:
    """Membership of l in the forbidden set.

    Exact zero test when both l and the constraints are rational; for
    approximate data the test is conservative, flagging l whenever any
    constraint value is within tolerance of zero.
    """
    if l.num_vars != V.num_vars:
        raise InvalidInputError("mismatched number of variables")
    if not V.constraints:
        return False
    if tol is None:
        tol = tolerance(DEFAULT_PRECISION_BITS)
    l_scale = max_abs_of(l.coords)
    for g in V.constraints:
        val = evaluate(g, l.coords)
        if is_exact_scalar(val):
            if val == 0:
                return True
        else:
            bound = tol * g.norm1() * max(mpf(1), mpf(1) * l_scale) ** g.degree
            if abs(val) <= bound:
                return True
    return False


# ---------------------------------------------------------------------------
# decompositions


@dataclass(frozen=True)
class Decomposition:
    """Presentation of a form as sum c_i * l_i^degree."""

    degree: int
    num_vars: int
    terms: tuple
    exact: bool
    trace: tuple = ()

    @property
    def term_count(self) -> int:
        return len(self.terms)

    def reconstruct(self) -> Form:
        total = Form(self.num_vars, self.degree, {})
        for c, l in self.terms:
            total = total + linear_power(l, self.degree).scale(c)
        return total


def _terms_are_exact(terms) -> bool:
    return all(is_exact_scalar(c) and l.is_exact() for c, l in terms)


# ---------------------------------------------------------------------------
# shared context for the randomized pipeline


@dataclass
class _Ctx:
    rng: random.Random
    precision_bits: int
    max_retries: int
    trace: list = field(default_factory=list)

    @property
    def tol(self):
        return tolerance(self.precision_bits)

    def note(self, msg: str):
        self.trace.append(msg)

    def heights(self):
        """Deterministic (attempt, height) schedule, doubling each round."""
        for attempt in range(self.max_retries):
            yield attempt, min(8 << attempt, _MAX_HEIGHT)

    def int_vector(self, n, height):
        while True:
            v = tuple(self.rng.randint(-height, height) for _ in range(n))
            if any(v):
                return v


def _constant_value(form):
    return form.coeffs.get((0,) * form.num_vars, Fraction(0))


def _pad(coords, n):
    return tuple(coords) + (Fraction(0),) * (n - len(coords))


def _linear_divides(alpha, g: Form, precision_bits) -> bool:
    """Whether the linear function sum alpha_i l_i divides the constraint g,
    i.e. the hyperplane it cuts out is contained in V(g).

    Decided by restricting g to the hyperplane: substitute the pivot
    variable and test for the zero polynomial (within tolerance when g is
    approximate, erring on the side of True)."""
    n = g.num_vars
    pivot = next(i for i, a in enumerate(alpha) if a != 0)
    rows = []
    for i in range(n):
        if i == pivot:
            rows.append([-Fraction(alpha[j], alpha[pivot]) if j != pivot else Fraction(0)
                         for j in range(n)])
        else:
            rows.append([Fraction(1 if j == i else 0) for j in range(n)])
    restricted = _substitute(g, rows)
    if restricted.is_exact():
        return restricted.is_zero()
    ratio = 1 + sum(abs(Fraction(a, alpha[pivot])) for a in alpha)
    tol = tolerance(precision_bits) * g.norm1() * mpf(1) * ratio ** g.degree
    return restricted.is_zero(tol)


def _hyperplane_change(beta, precision_bits):
    """(M, A) with M invertible, last column proportional to beta, A = M^-T.

    A maps padded hyperplane coordinates back to ambient linear forms.
    """
    M = linalg.complete_to_basis([list(beta)])
    Minv = linalg.invert_matrix(M, precision_bits, tolerance(precision_bits))
    return M, linalg.transpose(Minv)


def _project_prefix(g, m):
    """Set the trailing variables of g to zero and drop them (no vanishing
    requirement: this is evaluation, not a support assertion)."""
    out = {}
    for expo, c in g.coeffs.items():
        if any(expo[m:]):
            continue
        out[expo[:m]] = c
    return type(g)(m, g.degree, out)


def _restrict_forbidden(V: ForbiddenSet, A, m, precision_bits, hard=True):
    """Forbidden set seen from hyperplane coordinates b: constraints
    g(A (b, 0)).  A vanishing restriction means every decomposition inside
    the subspace is forbidden; ``hard`` controls the error class."""
    out = []
    for g in V.constraints:
        sub = _project_prefix(_substitute(g, A), m)
        tol = tolerance(precision_bits) * g.norm1()
        if sub.is_zero() or (not sub.is_exact() and sub.is_zero(tol)):
            if hard:
                raise ConsistencyError(
                    "constraint restricts to zero on a hyperplane chosen to avoid it")
            raise InvalidInputError(
                "the forbidden set contains the essential coordinate subspace; "
                "no decomposition within the bound exists")
        out.append(sub)
    return ForbiddenSet(m, out)


def _map_terms_back(terms, A, n):
    return [(c, LinearForm(linalg.mat_vec(A, _pad(l.coords, n)))) for c, l in terms]


# ---------------------------------------------------------------------------
# coefficient fitting


def fit_coefficients(f: Form, points, precision_bits=DEFAULT_PRECISION_BITS):
    """Scalars c_i with sum c_i l_i^d = f, one per given point.

    Solved in the monomial basis: exactly when everything is rational,
    else by least squares with a residual check.  Coefficients that come
    out as zero stay in the returned list (aligned with ``points``) but are
    returned as exact zeros so callers can drop those terms.
    """
    if not points:
        raise InvalidInputError("need at least one point")
    n, d = f.num_vars, f.degree
    for p in points:
        if p.num_vars != n:
            raise InvalidInputError("point has the wrong number of variables")
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            if _proportional_linear(points[i], points[j], precision_bits):
                raise InvalidInputError("points must be pairwise non-proportional")
    monos = monomials_of_degree(n, d)
    powers = [linear_power(p, d) for p in points]
    rows = [[pw.coeffs.get(mono, Fraction(0)) for pw in powers] for mono in monos]
    rhs = [f.coeffs.get(mono, Fraction(0)) for mono in monos]
    scale = max(mpf(1), mpf(1) * f.max_abs())
    if linalg.matrix_is_exact(rows) and all(is_exact_scalar(x) for x in rhs):
        sol = linalg.rational_solve(rows, rhs)
        if sol is None:
            _, resid = linalg.complex_solve_lstsq(rows, rhs, 64)
            raise NoFitError("target form is not in the span of the given powers",
                             residual=resid)
        return sol
    sol, resid = linalg.complex_solve_lstsq(rows, rhs, precision_bits)
    if resid > tolerance(precision_bits) * scale:
        raise NoFitError("least-squares residual exceeds tolerance", residual=resid)
    snap = mpf(2) ** (-(precision_bits * 3) // 4) * scale
    return [Fraction(0) if scalar_is_zero(c, snap) else c for c in sol]


def _proportional_linear(a: LinearForm, b: LinearForm, precision_bits) -> bool:
    tol = tolerance(precision_bits) * max(mpf(1), mpf(1) * max_abs_of(a.coords)) \
        * max(mpf(1), mpf(1) * max_abs_of(b.coords))
    n = a.num_vars
    for i in range(n):
        for j in range(i + 1, n):
            cross = a.coords[i] * b.coords[j] - a.coords[j] * b.coords[i]
            if is_exact_scalar(cross):
                if cross != 0:
                    return False
            elif not scalar_is_zero(cross, tol):
                return False
    return True


# ---------------------------------------------------------------------------
# conic intersection and curve-pair candidates


def _dual_as_unipoly_coeffs(op: DualOp):
    """Write a ternary dual form as a polynomial in l2 whose coefficients
    are UniPolys in t, after the substitution l0 = 1, l1 = t."""
    e = op.degree
    out = []
    for k in range(e + 1):
        coeffs = [Fraction(0)] * (e - k + 1)
        for expo, c in op.coeffs.items():
            if expo[2] == k:
                coeffs[expo[1]] = c
        out.append(UniPoly(coeffs))
    return out


def _sylvester_resultant(p_coeffs, q_coeffs, precision_bits):
    """Resultant in l2 of two polynomials with UniPoly-in-t coefficients,
    computed as a Sylvester determinant by evaluation/interpolation."""
    ep = len(p_coeffs) - 1
    eq = len(q_coeffs) - 1
    size = ep + eq
    rows = []
    for shift in range(eq):
        row = [UniPoly([])] * size
        for j, c in enumerate(reversed(p_coeffs)):
            row[shift + j] = c
        rows.append(row)
    for shift in range(ep):
        row = [UniPoly([])] * size
        for j, c in enumerate(reversed(q_coeffs)):
            row[shift + j] = c
        rows.append(row)
    # the resultant of two forms is homogeneous of degree ep*eq in the
    # remaining variables, so ep*eq + 1 nodes pin it down
    deg_bound = ep * eq
    nodes = [Fraction(k) for k in range(deg_bound + 1)]
    values = []
    exact = all(c.is_exact() for c in p_coeffs + q_coeffs)
    for t in nodes:
        m = [[c(t) for c in row] for row in rows]
        if exact:
            values.append(linalg.rational_det(m))
        else:
            values.append(_complex_det(m, precision_bits))
    return _lagrange_interpolate(nodes, values)


def _complex_det(rows, precision_bits):
    bits = precision_bits + GUARD_BITS
    m = linalg._unwrap(rows, bits)
    n = len(m)
    with workprec(bits):
        det = 1
        for c in range(n):
            best, best_abs = None, mpf(0)
            for i in range(c, n):
                if abs(m[i][c]) > best_abs:
                    best, best_abs = i, abs(m[i][c])
            if best is None or best_abs == 0:
                return AppComplex(0, 0, precision_bits)
            if best != c:
                m[c], m[best] = m[best], m[c]
                det = -det
            det = det * m[c][c]
            for i in range(c + 1, n):
                if m[i][c] == 0:
                    continue
                fct = m[i][c] / m[c][c]
                for j in range(c, n):
                    m[i][j] -= fct * m[c][j]
        return AppComplex.from_mpc(det, precision_bits)


def _lagrange_interpolate(nodes, values):
    acc = UniPoly([])
    for i, (xi, yi) in enumerate(zip(nodes, values)):
        if is_exact_scalar(yi) and yi == 0:
            continue
        basis = UniPoly([Fraction(1)])
        denom = Fraction(1)
        for j, xj in enumerate(nodes):
            if j == i:
                continue
            basis = basis * UniPoly([-xj, Fraction(1)])
            denom *= xi - xj
        acc = acc + basis.scale(yi / denom)
    return acc


def _coordinate_changes(n, count):
    """Deterministic sequence: identity, then fixed pseudo-random invertible
    integer matrices."""
    ident = [[Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]
    yield ident
    rng = random.Random(0x5EED + n)
    produced = 0
    while produced < count:
        M = [[Fraction(rng.randint(-3, 3)) for _ in range(n)] for _ in range(n)]
        if linalg.rational_det(M) != 0:
            produced += 1
            yield M


def _leading_ok(coeffs_l2, tol_scale):
    lead = coeffs_l2[-1]
    if lead.is_zero():
        return False
    if lead.degree != 0:
        return False
    c = lead.coeffs[0]
    if is_exact_scalar(c):
        return c != 0
    return not scalar_is_zero(c, tol_scale)


def conic_intersection(D0: DualOp, D1: DualOp,
                       precision_bits=DEFAULT_PRECISION_BITS):
    """The four intersection points of two plane conics, all simple.

    Eliminates one variable by a Sylvester resultant to a degree-4
    univariate polynomial, back-substitutes, and maps through a coordinate
    change when the leading structure degenerates.  Raises
    NonTransversalError on a repeated intersection point and
    CommonComponentError when the conics share a component.
    """
    if D0.num_vars != 3 or D1.num_vars != 3:
        raise InvalidInputError("conic intersection works in three variables")
    if D0.degree != 2 or D1.degree != 2:
        raise InvalidInputError("both inputs must have degree 2")
    if D0.is_zero() or D1.is_zero():
        raise InvalidInputError("conics must be nonzero")
    tol = tolerance(precision_bits)
    saw_repeated = False
    for T in _coordinate_changes(3, 6):
        d0 = change_coordinates(D0, T)
        d1 = change_coordinates(D1, T)
        p = _dual_as_unipoly_coeffs(d0)
        q = _dual_as_unipoly_coeffs(d1)
        scale0 = tol * d0.norm1()
        scale1 = tol * d1.norm1()
        if not (_leading_ok(p, scale0) and _leading_ok(q, scale1)):
            continue
        R = _sylvester_resultant(p, q, precision_bits)
        r_scale = tol * max(mpf(1), mpf(1) * (d0.norm1() * d1.norm1()) ** 2)
        if R.is_zero() or all(scalar_is_zero(c, r_scale) for c in R.coeffs):
            raise CommonComponentError("the conics share a component")
        if R.degree < 4 or scalar_is_zero(R.coeffs[4] if R.degree == 4 else Fraction(0),
                                          r_scale):
            continue  # an intersection escaped to infinity; move the chart
        if R.is_exact() and not is_squarefree(R):
            saw_repeated = True
            continue
        roots = univariate_roots(R, precision_bits)
        with workprec(precision_bits):
            sep = mpf(2) ** (-(precision_bits // 4))
            distinct = True
            for i in range(len(roots)):
                for j in range(i + 1, len(roots)):
                    if abs(roots[i].to_mpc() - roots[j].to_mpc()) <= sep:
                        distinct = False
        if not distinct:
            saw_repeated = True
            continue
        pts = []
        ok = True
        for t in roots:
            l2 = _back_substitute_l2(p, q, t, precision_bits)
            if l2 is None:
                ok = False
                break
            inner = ProjPoint((AppComplex(1, 0, precision_bits), t, l2),
                              precision_bits)
            outer = ProjPoint(linalg.mat_vec(T, inner.coords), precision_bits)
            pts.append(outer)
        if not ok:
            continue
        for pt in pts:
            for op in (D0, D1):
                val = evaluate(op, pt.coords)
                if abs(val) > tol * op.norm1():
                    raise ConsistencyError("intersection point residual too large")
        return _sorted_proj(pts)
    if saw_repeated:
        raise NonTransversalError("the conics meet with multiplicity")
    raise DegenerateSystemError("no usable chart found for the conic pair")


def _trim_leading(values, precision_bits):
    """UniPoly from evaluated coefficients, with numerically-zero leading
    entries removed so the stated degree is meaningful."""
    vals = list(values)
    scale = mpf(1) * max_abs_of(vals) if vals else mpf(0)
    tol = tolerance(precision_bits) * scale
    while vals and scalar_is_zero(vals[-1], tol):
        vals.pop()
    return UniPoly(vals)


def _back_substitute_l2(p_coeffs, q_coeffs, t, precision_bits):
    """Common l2-root of the two polynomials at parameter t, via the linear
    combination eliminating the top power; None when ambiguous.

    The elimination denominator must be comfortably nonzero (a quarter of
    the working bits) or the division would eat the precision budget;
    otherwise the roots of both quadratics are paired directly."""
    a = [c(t) for c in p_coeffs]
    b = [c(t) for c in q_coeffs]
    if len(a) == 3 and len(b) == 3:
        mu = b[2] * a[1] - a[2] * b[1]
        nu = b[2] * a[0] - a[2] * b[0]
        thresh = mpf(2) ** (-(precision_bits // 4)) * max(
            mpf(1), mpf(1) * max_abs_of(a) * max_abs_of(b))
        if not scalar_is_zero(mu, thresh):
            return -nu / mu
    # fall back to pairing roots of both univariates
    pa = _trim_leading(a, precision_bits)
    pb = _trim_leading(b, precision_bits)
    if pa.degree < 1 or pb.degree < 1:
        return None
    try:
        ra = univariate_roots(pa, precision_bits)
        rb = univariate_roots(pb, precision_bits)
    except InvalidInputError:
        return None
    with workprec(precision_bits):
        sep = mpf(2) ** (-(precision_bits // 3))
        matches = [x for x in ra if any(abs(x.to_mpc() - y.to_mpc()) <= sep for y in rb)]
        if len(matches) == 1:
            return matches[0]
    return None


def _sorted_proj(points):
    def key(p):
        return tuple((c.real, c.imag) for c in p.coords)
    return sorted(points, key=key)


def _curve_pair_candidates(D0: DualOp, D1: DualOp, precision_bits, rng):
    """Candidate common zeros of two ternary curves of equal degree.

    Unlike conic_intersection this tolerates tangency (the squarefree part
    of the resultant is used) since the caller certifies candidates against
    a whole linear system anyway.  Raises DegenerateSystemError when the
    curves share a component or no chart separates the points.
    """
    e = D0.degree
    tol = tolerance(precision_bits)
    changes = [next(_coordinate_changes(3, 1))]
    local = random.Random(rng.randrange(1 << 30))
    for _ in range(3):
        while True:
            M = [[Fraction(local.randint(-3, 3)) for _ in range(3)] for _ in range(3)]
            if linalg.rational_det(M) != 0:
                changes.append(M)
                break
    for T in changes:
        d0 = change_coordinates(D0, T)
        d1 = change_coordinates(D1, T)
        p = _dual_as_unipoly_coeffs(d0)
        q = _dual_as_unipoly_coeffs(d1)
        if not (_leading_ok(p, tol * d0.norm1()) and _leading_ok(q, tol * d1.norm1())):
            continue
        R = _sylvester_resultant(p, q, precision_bits)
        r_scale = tol * max(mpf(1), mpf(1) * (d0.norm1() * d1.norm1()) ** e)
        if R.is_zero() or all(scalar_is_zero(c, r_scale) for c in R.coeffs):
            raise DegenerateSystemError("curve pair shares a component")
        if R.degree < e * e:
            continue
        if R.is_exact():
            R = squarefree_part(R)
        roots = univariate_roots(R, precision_bits)
        pts = []
        with workprec(precision_bits):
            sep = mpf(2) ** (-(precision_bits // 4))
            uniq = []
            for r in roots:
                if all(abs(r.to_mpc() - u.to_mpc()) > sep for u in uniq):
                    uniq.append(r)
        for t in uniq:
            for l2 in _common_roots_at(p, q, t, precision_bits):
                inner = ProjPoint((AppComplex(1, 0, precision_bits), t, l2),
                                  precision_bits)
                pts.append(ProjPoint(linalg.mat_vec(T, inner.coords),
                                     precision_bits))
        return _sorted_proj(pts)
    raise DegenerateSystemError("no usable chart for the curve pair")


def _common_roots_at(p_coeffs, q_coeffs, t, precision_bits):
    pa = _trim_leading([c(t) for c in p_coeffs], precision_bits)
    pb = _trim_leading([c(t) for c in q_coeffs], precision_bits)
    if pa.degree < 1 and pb.degree < 1:
        return []
    try:
        ra = univariate_roots(pa, precision_bits) if pa.degree >= 1 else []
        rb = univariate_roots(pb, precision_bits) if pb.degree >= 1 else []
    except InvalidInputError:
        return []
    if pa.degree < 1:
        return rb
    if pb.degree < 1:
        return ra
    with workprec(precision_bits):
        sep = mpf(2) ** (-(precision_bits // 3))
        return [x for x in ra if any(abs(x.to_mpc() - y.to_mpc()) <= sep for y in rb)]


# ---------------------------------------------------------------------------
# coefficient absorption


def _int_nth_root(k: int, d: int):
    """Exact integer d-th root of k >= 0, or None."""
    if k < 0:
        return None
    if k in (0, 1):
        return k
    lo, hi = 1, 1 << ((k.bit_length() + d - 1) // d + 1)
    while lo < hi:
        mid = (lo + hi) // 2
        if mid ** d < k:
            lo = mid + 1
        else:
            hi = mid
    return lo if lo ** d == k else None


def _rational_nth_root(c: Fraction, d: int):
    neg = c < 0
    if neg and d % 2 == 0:
        return None
    num = _int_nth_root(abs(c.numerator), d)
    den = _int_nth_root(c.denominator, d)
    if num is None or den is None:
        return None
    root = Fraction(num, den)
    return -root if neg else root


def absorb_coefficients(dec: Decomposition,
                        precision_bits=DEFAULT_PRECISION_BITS) -> Decomposition:
    """Scale each linear form by a principal d-th root of its coefficient so
    every coefficient becomes 1.

    Stays exact for terms whose coefficient is a d-th power of a rational
    (including sign flips in odd degree); otherwise the term, and hence the
    decomposition, becomes approximate.
    """
    d = dec.degree
    if d == 0:
        raise InvalidInputError("cannot absorb coefficients at degree 0")
    new_terms = []
    for c, l in dec.terms:
        if is_exact_scalar(c):
            root = _rational_nth_root(Fraction(c), d)
            if root is not None:
                new_terms.append((Fraction(1), l.scale(root)))
                continue
            z = AppComplex(Fraction(c), 0, precision_bits)
        else:
            z = c
        with workprec(precision_bits + GUARD_BITS):
            w = z.to_mpc() ** (mpf(1) / d)
        root = AppComplex.from_mpc(w, precision_bits)
        new_terms.append((Fraction(1), l.scale(root)))
    return Decomposition(dec.degree, dec.num_vars, tuple(new_terms),
                         _terms_are_exact(new_terms),
                         dec.trace + ("absorb-coefficients",))


# ---------------------------------------------------------------------------
# the decomposition pipeline


def _merge_proportional(terms, d, precision_bits):
    """Fold proportional linear forms into single terms and drop the terms
    whose coefficient became (numerically) zero."""
    merged = []
    for c, l in terms:
        if l.is_zero():
            raise ConsistencyError("zero linear form in a decomposition")
        hit = None
        for idx, (c0, l0) in enumerate(merged):
            if _proportional_linear(l, l0, precision_bits):
                hit = idx
                break
        if hit is None:
            merged.append((c, l))
            continue
        c0, l0 = merged[hit]
        j = max(range(l0.num_vars), key=lambda i: mpf(1) * max_abs_of([l0.coords[i]]))
        lam = l.coords[j] / l0.coords[j]
        merged[hit] = (c0 + c * lam ** d, l0)
    out = []
    drop = mpf(2) ** (-(precision_bits * 3) // 4)
    scale = max([mpf(1)] + [mpf(1) * max_abs_of([c]) for c, _ in merged])
    for c, l in merged:
        if is_exact_scalar(c) and c == 0:
            continue
        if not is_exact_scalar(c) and scalar_is_zero(c, drop * scale):
            continue
        out.append((c, l))
    return out


def _check_reconstruction(f, terms, precision_bits):
    total = Form(f.num_vars, f.degree, {})
    for c, l in terms:
        total = total + linear_power(l, f.degree).scale(c)
    delta = total - f
    scale = max(mpf(1), mpf(1) * f.norm1())
    if not delta.is_zero(tolerance(precision_bits) * scale):
        raise ConsistencyError("reconstruction drifted beyond tolerance")


def _forced_single_term(coeff, l, V, ctx, label):
    if is_forbidden(l, V, ctx.tol):
        raise InvalidInputError(
            f"{label}: the unique single-term presentation is forbidden; "
            "no presentation within the bound exists")
    ctx.note(f"dispatch: single-term ({label})")
    return [(coeff, l)]


def _dispatch(f: Form, V: ForbiddenSet, ctx: _Ctx):
    """Route an essential or non-essential form to its algorithm, peeling
    off non-essential variables first.  Returns a list of terms."""
    n = f.num_vars
    d = f.degree
    if d < 1:
        raise InvalidInputError("degree must be at least 1")
    if f.is_zero():
        raise InvalidInputError("cannot decompose the zero form")
    m = essential_variables(f, ctx.precision_bits)
    if m == n:
        return _dispatch_essential(f, V, ctx)
    ctx.note(f"essential-split: {n} -> {m}")
    M, g = essential_split(f, ctx.precision_bits)
    Minv = linalg.invert_matrix(M, ctx.precision_bits, ctx.tol)
    A = linalg.transpose(Minv)
    Vr = _restrict_forbidden(V, A, m, ctx.precision_bits, hard=False)
    sub = _dispatch_essential(g, Vr, ctx)
    return _map_terms_back(sub, A, n)


def _dispatch_essential(f: Form, V: ForbiddenSet, ctx: _Ctx):
    n, d = f.num_vars, f.degree
    if d == 1:
        return _forced_single_term(Fraction(1), LinearForm.from_form(f), V, ctx,
                                   "degree one")
    if n == 1:
        c = f.coeffs[(d,)]
        return _forced_single_term(c, LinearForm((Fraction(1),)), V, ctx,
                                   "one essential variable")
    if n == 2:
        ctx.note(f"dispatch: binary(d={d})")
        return _binary_essential(f, V, ctx)
    if d == 2:
        ctx.note(f"dispatch: quadratic(m={n})")
        return _quadratic_essential(f, V, ctx)
    if n == 3 and d == 3:
        ctx.note("dispatch: ternary-cubic")
        return _ternary_cubic_essential(f, V, ctx)
    ctx.note(f"dispatch: inductive(n={n},d={d})")
    return _inductive_essential(f, V, ctx)


# --- quadratic ---


def _quadratic_essential(f: Form, V: ForbiddenSet, ctx: _Ctx):
    """Exact recursion: peel off one square, restrict to the annihilating
    hyperplane, recurse; exactly one rational term per essential variable
    when f is rational."""
    n = f.num_vars
    scale = max(mpf(1), mpf(1) * f.max_abs())
    if f.is_zero(ctx.tol * scale):
        return []
    if n == 1:
        return _forced_single_term(f.coeffs[(2,)], LinearForm((Fraction(1),)),
                                   V, ctx, "final quadratic variable")
    chosen = None
    for attempt, height in ctx.heights():
        alpha = ctx.int_vector(n, height)
        c2 = _constant_value(contract(dual_power(alpha, 2), f))
        a_norm = sum(abs(a) for a in alpha)
        if scalar_is_zero(c2, ctx.tol * scale * a_norm * a_norm):
            continue
        if any(_linear_divides(alpha, g, ctx.precision_bits) for g in V.constraints):
            continue
        lform = contract(dual_power(alpha, 1), f)
        coords = [Fraction(0)] * n
        for expo, c in lform.coeffs.items():
            coords[expo.index(1)] = c
        L = LinearForm(coords)
        if L.is_zero(ctx.tol * scale * a_norm) or is_forbidden(L, V, ctx.tol):
            continue
        chosen = (alpha, c2, L)
        break
    if chosen is None:
        raise RetryBudgetError("quadratic step found no usable direction",
                               ctx.trace)
    alpha, c2, L = chosen
    coeff = 1 / (2 * c2) if not is_exact_scalar(c2) else Fraction(1, 2) / c2
    term = (coeff, L)
    F2 = f - linear_power(L, 2).scale(coeff)
    if not F2.is_exact():
        F2 = F2.cleaned(ctx.tol * scale * mpf(2) ** (-GUARD_BITS))
    if F2.is_zero(ctx.tol * scale):
        return [term]
    M, A = _hyperplane_change([Fraction(a) for a in alpha], ctx.precision_bits)
    h = change_coordinates(F2, M)
    g = restrict_to_prefix(h, n - 1, ctx.precision_bits)
    if essential_variables(g, ctx.precision_bits) != n - 1:
        raise ConsistencyError("quadratic remainder has unexpected rank")
    Vr = _restrict_forbidden(V, A, n - 1, ctx.precision_bits)
    sub = _quadratic_essential(g, Vr, ctx)
    return [term] + _map_terms_back(sub, A, n)


# --- binary ---


def _binary_squarefree_exact(op: DualOp) -> bool:
    """Squarefree test for a rational binary dual form, point at infinity
    included."""
    coeffs = [Fraction(0)] * (op.degree + 1)
    for expo, c in op.coeffs.items():
        coeffs[expo[1]] = c
    p = UniPoly(coeffs)
    inf_mult = op.degree - max(p.degree, 0)
    if inf_mult > 1:
        return False
    return p.degree < 1 or is_squarefree(p)


def _binary_points_of(op: DualOp, ctx: _Ctx):
    from .apolarity import _binary_dual_roots, _dedupe_points
    pts = _binary_dual_roots(op, ctx.precision_bits)
    if len(_dedupe_points(pts, ctx.precision_bits)) != len(pts):
        return None
    return pts


def _binary_essential(f: Form, V: ForbiddenSet, ctx: _Ctx):
    """Sylvester-style decomposition of a binary form of any degree."""
    d = f.degree
    gen_e = None
    generator = None
    for e in range(1, d + 1):
        comp = apolar_component(f, e, ctx.precision_bits)
        if comp:
            gen_e, generator = e, comp[0]
            break
    if gen_e is None or gen_e < 2:
        raise ConsistencyError("binary form is not essential in two variables")

    def attempt_with(op, note):
        if op.is_exact() and not _binary_squarefree_exact(op):
            return None
        pts = _binary_points_of(op, ctx)
        if pts is None:
            return None
        lfs = [p.to_linear_form() for p in pts]
        if any(is_forbidden(lf, V, ctx.tol) for lf in lfs):
            return None
        try:
            cs = fit_coefficients(f, lfs, ctx.precision_bits)
        except NoFitError:
            return None
        ctx.note(note)
        return [(c, lf) for c, lf in zip(cs, lfs)
                if not (is_exact_scalar(c) and c == 0)]

    result = attempt_with(generator, f"binary: generator of degree {gen_e}")
    if result is not None:
        return result

    comp_d = apolar_component(f, d, ctx.precision_bits)
    if not comp_d:
        raise ConsistencyError("degree-d annihilator of a binary form is never zero")
    for attempt, height in ctx.heights():
        weights = [Fraction(ctx.rng.randint(-height, height)) for _ in comp_d]
        op = None
        for w, basis_op in zip(weights, comp_d):
            if w == 0:
                continue
            piece = basis_op.scale(w)
            op = piece if op is None else op + piece
        if op is None or op.is_zero():
            continue
        result = attempt_with(op, f"binary: sampled degree-{d} element "
                                   f"(attempt {attempt})")
        if result is not None:
            return result
    raise RetryBudgetError("binary sampling exhausted its retry budget", ctx.trace)


# --- ternary cubics ---


def _ternary_good(f: Form, V: ForbiddenSet, ctx: _Ctx):
    basis = apolar_component(f, 2, ctx.precision_bits)
    if len(basis) < 2:
        raise DegenerateSystemError("conic system of the cubic is too small")
    for attempt, height in ctx.heights():
        w0 = [Fraction(ctx.rng.randint(-height, height)) for _ in basis]
        w1 = [Fraction(ctx.rng.randint(-height, height)) for _ in basis]
        D0 = _combine(basis, w0)
        D1 = _combine(basis, w1)
        if D0 is None or D1 is None:
            continue
        try:
            pts = conic_intersection(D0, D1, ctx.precision_bits)
        except (NonTransversalError, CommonComponentError, DegenerateSystemError):
            continue
        if len(pts) != 4:
            continue
        lfs = [p.to_linear_form() for p in pts]
        if any(is_forbidden(lf, V, ctx.tol) for lf in lfs):
            continue
        try:
            cs = fit_coefficients(f, lfs, ctx.precision_bits)
        except NoFitError:
            continue
        ctx.note(f"ternary: pencil attempt {attempt} succeeded")
        return [(c, lf) for c, lf in zip(cs, lfs)
                if not (is_exact_scalar(c) and c == 0)]
    raise RetryBudgetError("pencil sampling exhausted its retry budget", ctx.trace)


def _combine(basis, weights):
    out = None
    for op, w in zip(basis, weights):
        if w == 0:
            continue
        piece = op.scale(w)
        out = piece if out is None else out + piece
    if out is None or out.is_zero():
        return None
    return out


def _ternary_cubic_essential(f: Form, V: ForbiddenSet, ctx: _Ctx):
    bp_seed = ctx.rng.randrange(1 << 30)
    bp = base_points(f, 2, ctx.precision_bits, seed=bp_seed,
                     max_retries=ctx.max_retries)
    if not bp:
        ctx.note("ternary: base-point free")
        return _ternary_good(f, V, ctx)
    ctx.note(f"ternary: {len(bp)} base point(s); perturbing by a cube")
    for attempt, height in ctx.heights():
        coords = ctx.int_vector(3, height)
        l = LinearForm([Fraction(c) for c in coords])
        if is_forbidden(l, V, ctx.tol):
            continue
        f2 = f + linear_power(l, 3)
        if f2.is_zero() or essential_variables(f2, ctx.precision_bits) != 3:
            continue
        bp2 = base_points(f2, 2, ctx.precision_bits,
                          seed=ctx.rng.randrange(1 << 30),
                          max_retries=ctx.max_retries)
        if bp2:
            continue
        ctx.note(f"ternary: perturbation l=({','.join(str(c) for c in coords)})")
        good = _ternary_good(f2, V, ctx)
        return good + [(Fraction(-1), l)]
    raise RetryBudgetError("perturbation sampling exhausted its retry budget",
                           ctx.trace)


# --- the inductive step ---


def _inductive_essential(f: Form, V: ForbiddenSet, ctx: _Ctx):
    n, d = f.num_vars, f.degree
    scale = max(mpf(1), mpf(1) * f.max_abs())

    alpha = None
    for attempt, height in ctx.heights():
        cand = ctx.int_vector(n, height)
        if any(_linear_divides(cand, g, ctx.precision_bits) for g in V.constraints):
            continue
        fprime = contract(dual_power(cand, 1), f)
        if fprime.is_zero(ctx.tol * scale):
            continue
        if essential_variables(fprime, ctx.precision_bits) != n:
            continue
        alpha = cand
        break
    if alpha is None:
        raise RetryBudgetError("no usable contraction direction found", ctx.trace)
    ctx.note(f"inductive(n={n},d={d}): alpha=({','.join(str(a) for a in alpha)})")

    alpha_constraint = LinearForm([Fraction(a) for a in alpha]).to_form()
    fprime = contract(dual_power(alpha, 1), f)
    sub = _dispatch(fprime, V.with_constraint(alpha_constraint), ctx)

    lifted = []
    for c, l in sub:
        dot = None
        for a, x in zip(alpha, l.coords):
            piece = a * x
            dot = piece if dot is None else dot + piece
        if scalar_is_zero(dot, ctx.tol * max(mpf(1), mpf(1) * max_abs_of(l.coords))
                          * sum(abs(a) for a in alpha)):
            raise ConsistencyError("lifted term is annihilated by alpha")
        lifted.append((c / (d * dot), l))

    T = list(range(len(lifted)))
    beta = [Fraction(a) for a in alpha]
    remainder_zero = False
    F2 = None
    kernel = None
    while True:
        F2 = f
        for i in T:
            w, l = lifted[i]
            F2 = F2 - linear_power(l, d).scale(w)
        if not F2.is_exact():
            F2 = F2.cleaned(ctx.tol * scale * mpf(2) ** (-GUARD_BITS))
        if F2.is_zero(ctx.tol * scale):
            remainder_zero = True
            break
        residual = contract(DualOp(n, 1, {
            tuple(1 if j == i else 0 for j in range(n)): b
            for i, b in enumerate(beta) if not (is_exact_scalar(b) and b == 0)}), F2)
        beta_norm = max(mpf(1), mpf(1) * max_abs_of(beta))
        if not residual.is_zero(ctx.tol * scale * beta_norm * d):
            raise ConsistencyError("carried operator stopped annihilating the remainder")
        kernel = apolar_component(F2, 1, ctx.precision_bits)
        if not kernel:
            raise ConsistencyError("remainder lost its degree-one annihilator")
        if len(kernel) == 1:
            break
        i = T[0]
        li = lifted[i][1]
        dots = []
        for op in kernel:
            coords = _dual_coords(op)
            s = None
            for b, x in zip(coords, li.coords):
                piece = b * x
                s = piece if s is None else s + piece
            dots.append(s)
        dot_scale = ctx.tol * max(mpf(1), mpf(1) * max_abs_of(li.coords))
        pick = next((k for k, s in enumerate(dots) if scalar_is_zero(s, dot_scale)),
                    None)
        if pick is not None:
            beta = _dual_coords(kernel[pick])
        else:
            c0 = _dual_coords(kernel[0])
            c1 = _dual_coords(kernel[1])
            beta = [dots[1] * a - dots[0] * b for a, b in zip(c0, c1)]
        T.remove(i)
        ctx.note(f"inductive: |T| -> {len(T)}")

    head = [lifted[i] for i in T]
    if remainder_zero:
        ctx.note("inductive: remainder vanished")
        return head

    beta = _dual_coords(kernel[0])
    M, A = _hyperplane_change(beta, ctx.precision_bits)
    h = change_coordinates(F2, M)
    if not h.is_exact():
        h = h.cleaned(ctx.tol * max(mpf(1), mpf(1) * h.max_abs())
                      * mpf(2) ** (-GUARD_BITS))
    g2 = restrict_to_prefix(h, n - 1, ctx.precision_bits)
    if essential_variables(g2, ctx.precision_bits) != n - 1:
        raise ConsistencyError("remainder is not essential in the hyperplane")
    Vr = _restrict_forbidden(V, A, n - 1, ctx.precision_bits)
    ctx.note(f"inductive: remainder in {n - 1} vars, |T|={len(T)}")
    sub2 = _dispatch(g2, Vr, ctx)
    return head + _map_terms_back(sub2, A, n)


def _dual_coords(op: DualOp):
    coords = [Fraction(0)] * op.num_vars
    for expo, c in op.coeffs.items():
        coords[expo.index(1)] = c
    return coords


# ---------------------------------------------------------------------------
# public entry points


def _run(f, V, seed, precision_bits, max_retries, runner):
    if V is None:
        V = ForbiddenSet.empty(f.num_vars)
    if V.num_vars != f.num_vars:
        raise InvalidInputError("forbidden set has the wrong number of variables")
    if f.is_zero():
        raise InvalidInputError("cannot decompose the zero form")
    ctx = _Ctx(random.Random(seed), precision_bits, max_retries)
    terms = runner(f, V, ctx)
    terms = _merge_proportional(terms, f.degree, precision_bits)
    _check_reconstruction(f, terms, precision_bits)
    return Decomposition(f.degree, f.num_vars, tuple(terms),
                         _terms_are_exact(terms), tuple(ctx.trace))


def decompose(f: Form, V: ForbiddenSet | None = None, seed=DEFAULT_SEED,
              precision_bits=DEFAULT_PRECISION_BITS,
              max_retries=DEFAULT_MAX_RETRIES) -> Decomposition:
    """Full pipeline: essential split, dispatch by shape, verified terms.

    The term count never exceeds the recursion bound at the essential
    variable count, and no term lies in the forbidden set.
    """
    return _run(f, V, seed, precision_bits, max_retries, _dispatch)


def decompose_quadratic(f: Form, V: ForbiddenSet | None = None,
                        seed=DEFAULT_SEED,
                        precision_bits=DEFAULT_PRECISION_BITS,
                        max_retries=DEFAULT_MAX_RETRIES) -> Decomposition:
    """Exact decomposition of a quadratic form: as many terms as its rank."""
    if f.degree != 2:
        raise InvalidInputError("decompose_quadratic needs degree 2")

    def runner(g, W, ctx):
        n = g.num_vars
        m = essential_variables(g, ctx.precision_bits)
        if m == n:
            return _quadratic_essential(g, W, ctx)
        ctx.note(f"essential-split: {n} -> {m}")
        M, core = essential_split(g, ctx.precision_bits)
        A = linalg.transpose(linalg.invert_matrix(M, ctx.precision_bits, ctx.tol))
        Wr = _restrict_forbidden(W, A, m, ctx.precision_bits, hard=False)
        sub = _quadratic_essential(core, Wr, ctx)
        return _map_terms_back(sub, A, n)

    return _run(f, V, seed, precision_bits, max_retries, runner)


def decompose_binary(f: Form, V: ForbiddenSet | None = None, seed=DEFAULT_SEED,
                     precision_bits=DEFAULT_PRECISION_BITS,
                     max_retries=DEFAULT_MAX_RETRIES) -> Decomposition:
    """Decomposition of a form with two essential variables into at most
    deg(f) powers."""

    def runner(g, W, ctx):
        n = g.num_vars
        m = essential_variables(g, ctx.precision_bits)
        if m != 2:
            raise InvalidInputError(
                f"decompose_binary needs two essential variables, found {m}")
        if n == 2:
            return _binary_essential(g, W, ctx)
        ctx.note(f"essential-split: {n} -> 2")
        M, core = essential_split(g, ctx.precision_bits)
        A = linalg.transpose(linalg.invert_matrix(M, ctx.precision_bits, ctx.tol))
        Wr = _restrict_forbidden(W, A, 2, ctx.precision_bits, hard=False)
        sub = _binary_essential(core, Wr, ctx)
        return _map_terms_back(sub, A, n)

    return _run(f, V, seed, precision_bits, max_retries, runner)


def decompose_ternary_cubic(f: Form, V: ForbiddenSet | None = None,
                            seed=DEFAULT_SEED,
                            precision_bits=DEFAULT_PRECISION_BITS,
                            max_retries=DEFAULT_MAX_RETRIES) -> Decomposition:
    """At most 5 powers for an essential ternary cubic; at most 4 when the
    degree-2 annihilator is base-point free."""
    if f.num_vars != 3 or f.degree != 3:
        raise InvalidInputError("decompose_ternary_cubic needs n=3, d=3")
    if essential_variables(f, precision_bits) != 3:
        raise InvalidInputError(
            "decompose_ternary_cubic needs all three variables essential")
    return _run(f, V, seed, precision_bits, max_retries,
                _ternary_cubic_essential)


def decompose_inductive(f: Form, V: ForbiddenSet | None = None,
                        seed=DEFAULT_SEED,
                        precision_bits=DEFAULT_PRECISION_BITS,
                        max_retries=DEFAULT_MAX_RETRIES) -> Decomposition:
    """One inductive step (contract, lift, shrink, restrict) for n >= 3,
    d >= 3 away from the ternary-cubic base case."""
    n, d = f.num_vars, f.degree
    if n < 3 or d < 3 or (n == 3 and d == 3):
        raise InvalidInputError("decompose_inductive needs n,d >= 3 beyond (3,3)")
    if essential_variables(f, precision_bits) != n:
        raise InvalidInputError("decompose_inductive needs all variables essential")
    return _run(f, V, seed, precision_bits, max_retries,
                _inductive_essential)
