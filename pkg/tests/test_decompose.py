import random
from fractions import Fraction

import pytest
from mpmath import mpf

from openwaring import (AppComplex, CommonComponentError, Decomposition,
                        DualOp, ForbiddenSet, Form, InvalidInputError,
                        LinearForm, NoFitError, absorb_coefficients,
                        base_points, catalecticant_lower_bound,
                        check_decomposition, conic_intersection, decompose,
                        decompose_binary, decompose_inductive,
                        decompose_quadratic, decompose_ternary_cubic,
                        essential_variables, fit_coefficients, is_forbidden,
                        linear_power, parse_form, recursion_bound)
from conftest import (random_essential_form, random_form, random_hyperplanes,
                      random_linear_form)


def gram_rank(f):
    """Independent oracle: rank of the symmetric coefficient matrix by a
    local fraction elimination."""
    n = f.num_vars
    a = [[Fraction(0)] * n for _ in range(n)]
    for expo, c in f.coeffs.items():
        idx = [i for i, e in enumerate(expo) for _ in range(e)]
        i, j = idx[0], idx[1]
        if i == j:
            a[i][i] = c
        else:
            a[i][j] = a[j][i] = c / 2
    rank = 0
    rows = [row[:] for row in a]
    for col in range(n):
        piv = next((r for r in range(rank, n) if rows[r][col] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for r in range(rank + 1, n):
            if rows[r][col]:
                fct = rows[r][col] / rows[rank][col]
                rows[r] = [x - fct * y for x, y in zip(rows[r], rows[rank])]
        rank += 1
    return rank


class TestForbiddenSet:
    def test_membership(self):
        V = ForbiddenSet.from_text("l0", 3)
        assert not is_forbidden(LinearForm([1, 1, 0]), V)
        assert is_forbidden(LinearForm([0, 1, 0]), V)

    def test_conservative_on_tiny_coordinates(self):
        V = ForbiddenSet.from_text("l1", 3)
        eps = AppComplex(0, 0, 256) + AppComplex(mpf(2) ** -200, 0, 256)
        l = LinearForm([AppComplex(1, 0, 256), eps, AppComplex(0, 0, 256)])
        assert is_forbidden(l, V)

    def test_file_round_trip(self):
        V = ForbiddenSet.from_text("l0\n2*l1^2 - l0*l2\n", 3)
        assert len(V.constraints) == 2
        again = ForbiddenSet.from_text(V.to_text(), 3)
        assert [g.coeffs for g in again.constraints] == \
            [g.coeffs for g in V.constraints]

    def test_rejects_zero_constraint(self):
        with pytest.raises(InvalidInputError):
            ForbiddenSet(2, (Form(2, 1, {}),))


class TestQuadratic:
    def test_product_of_variables(self):
        f = parse_form("x0*x1", 2)
        dec = decompose_quadratic(f)
        assert dec.term_count == 2 and dec.exact
        assert check_decomposition(f, dec).passed

    def test_diagonal(self):
        f = parse_form("x0^2 + x1^2 + x2^2", 3)
        dec = decompose_quadratic(f)
        assert dec.term_count == 3 and dec.exact

    def test_rank_two_in_four_vars(self, rng):
        f = linear_power(LinearForm([1, 2, 0, 1]), 2) + \
            linear_power(LinearForm([0, 1, 1, -1]), 2)
        assert gram_rank(f) == 2
        dec = decompose_quadratic(f, seed=3)
        assert dec.term_count == 2 and dec.exact
        assert check_decomposition(f, dec).passed

    def test_term_count_equals_gram_rank(self, rng):
        for trial in range(12):
            n = rng.randint(2, 6)
            f = random_form(rng, n, 2)
            if f.is_zero():
                continue
            dec = decompose_quadratic(f, seed=trial)
            assert dec.term_count == gram_rank(f)
            assert dec.exact
            rep = check_decomposition(f, dec)
            assert rep.passed and rep.residual == 0

    def test_avoidance(self, rng):
        f = parse_form("x0^2 + x1^2", 2)
        V = ForbiddenSet.from_text("l0\nl1\nl0 - l1", 2)
        dec = decompose_quadratic(f, V, seed=1)
        assert dec.term_count == 2
        rep = check_decomposition(f, dec, V)
        assert rep.passed and not rep.forbidden_violations

    def test_wrong_degree_rejected(self):
        with pytest.raises(InvalidInputError):
            decompose_quadratic(parse_form("x0^3", 2))


class TestBinary:
    def test_two_cubes(self):
        f = parse_form("x0^3 + x1^3", 2)
        dec = decompose_binary(f)
        assert dec.term_count == 2
        assert check_decomposition(f, dec).passed

    def test_product_quadric(self):
        f = parse_form("x0*x1", 2)
        dec = decompose_binary(f)
        assert dec.term_count == 2

    @pytest.mark.parametrize("d", range(2, 11))
    def test_monomial_needs_full_count(self, d):
        f = Form(2, d, {(d - 1, 1): Fraction(1)})
        dec = decompose_binary(f, seed=5)
        assert dec.term_count == d
        assert check_decomposition(f, dec).passed

    def test_avoidance(self, rng):
        f = parse_form("x0^3 + x1^3", 2)
        V = ForbiddenSet.from_text("l0\nl1", 2)  # forbids both obvious terms
        dec = decompose_binary(f, V, seed=2)
        rep = check_decomposition(f, dec, V)
        assert rep.passed and dec.term_count <= 3

    def test_embedded_binary(self):
        f = parse_form("x0^3 + x1^3", 4)
        dec = decompose_binary(f, seed=1)
        assert dec.num_vars == 4
        assert check_decomposition(f, dec).passed

    def test_requires_two_essential_variables(self):
        with pytest.raises(InvalidInputError):
            decompose_binary(parse_form("x0^3", 2))


class TestTernaryCubic:
    def test_rank_five_form(self):
        f = parse_form("x0*x1^2 + x1*x2^2", 3)
        dec = decompose_ternary_cubic(f, seed=4)
        assert dec.term_count == 5
        assert check_decomposition(f, dec).passed

    def test_fermat_bad_path(self):
        f = parse_form("x0^3 + x1^3 + x2^3", 3)
        dec = decompose_ternary_cubic(f, seed=4)
        assert dec.term_count == 5
        assert any("perturb" in t for t in dec.trace)
        assert check_decomposition(f, dec).passed

    def test_generic_cubic_four_terms(self, rng):
        f = random_essential_form(rng, 3, 3)
        assert base_points(f, 2) == []
        dec = decompose_ternary_cubic(f, seed=9)
        assert dec.term_count <= 4
        assert check_decomposition(f, dec).passed

    def test_avoidance(self, rng):
        f = parse_form("x0*x1^2 + x1*x2^2", 3)
        V = ForbiddenSet.from_text("l0", 3)
        dec = decompose_ternary_cubic(f, V, seed=4)
        rep = check_decomposition(f, dec, V)
        assert rep.passed and dec.term_count == 5

    def test_preconditions(self):
        with pytest.raises(InvalidInputError):
            decompose_ternary_cubic(parse_form("x0^3", 3))
        with pytest.raises(InvalidInputError):
            decompose_ternary_cubic(parse_form("x0^4", 4))


class TestConicIntersection:
    def test_sign_pattern(self):
        D0 = DualOp(3, 2, {(2, 0, 0): Fraction(1), (0, 2, 0): Fraction(-1)})
        D1 = DualOp(3, 2, {(2, 0, 0): Fraction(1), (0, 0, 2): Fraction(-1)})
        pts = conic_intersection(D0, D1)
        assert len(pts) == 4
        for p in pts:
            vals = [c / p.coords[0] for c in p.coords]
            assert abs(abs(vals[1]) - 1) < 1e-40
            assert abs(abs(vals[2]) - 1) < 1e-40

    def test_shared_component(self):
        D0 = DualOp(3, 2, {(1, 1, 0): Fraction(1)})
        D1 = DualOp(3, 2, {(1, 0, 1): Fraction(1)})
        with pytest.raises(CommonComponentError):
            conic_intersection(D0, D1)

    def test_random_pair_residuals(self, rng):
        from openwaring.poly import evaluate
        from openwaring.numerics import tolerance
        for _ in range(5):
            ops = []
            for _ in range(2):
                coeffs = {}
                from openwaring.poly import monomials_of_degree
                for expo in monomials_of_degree(3, 2):
                    c = rng.randint(-6, 6)
                    if c:
                        coeffs[expo] = Fraction(c)
                if not coeffs:
                    continue
                ops.append(DualOp(3, 2, coeffs))
            if len(ops) < 2:
                continue
            try:
                pts = conic_intersection(ops[0], ops[1])
            except CommonComponentError:
                continue
            assert len(pts) == 4
            for p in pts:
                for op in ops:
                    assert abs(evaluate(op, p.coords)) <= \
                        tolerance(256) * op.norm1()


class TestFitCoefficients:
    def test_two_cubes(self):
        f = parse_form("x0^3 + x1^3", 2)
        cs = fit_coefficients(f, [LinearForm([1, 0]), LinearForm([0, 1])])
        assert cs == [Fraction(1), Fraction(1)]

    def test_polarization_identity(self):
        f = parse_form("x0*x1", 2)
        cs = fit_coefficients(f, [LinearForm([1, 1]), LinearForm([1, -1])])
        assert cs == [Fraction(1, 4), Fraction(-1, 4)]

    def test_no_fit(self):
        f = parse_form("x0*x1", 2)
        with pytest.raises(NoFitError):
            fit_coefficients(f, [LinearForm([1, 0]), LinearForm([0, 1])])

    def test_proportional_points_rejected(self):
        f = parse_form("x0^2", 2)
        with pytest.raises(InvalidInputError):
            fit_coefficients(f, [LinearForm([1, 0]), LinearForm([2, 0])])

    def test_recovers_planted_coefficients(self, rng):
        for _ in range(10):
            n = rng.randint(2, 3)
            d = rng.randint(2, 4)
            points, seen = [], set()
            while len(points) < 3:
                l = random_linear_form(rng, n)
                key = tuple(l.coords)
                if key not in seen:
                    seen.add(key)
                    points.append(l)
            try:
                planted = [Fraction(rng.randint(1, 9)) for _ in points]
                f = Form(n, d, {})
                for c, l in zip(planted, points):
                    f = f + linear_power(l, d).scale(c)
                got = fit_coefficients(f, points)
            except InvalidInputError:
                continue  # proportional sample; try the next trial
            assert got == planted


class TestAbsorb:
    def test_perfect_cube(self):
        dec = Decomposition(3, 2, ((Fraction(8), LinearForm([1, 0])),), True)
        out = absorb_coefficients(dec)
        assert out.exact
        assert out.terms[0][0] == 1
        assert out.terms[0][1].coords == (Fraction(2), Fraction(0))

    def test_sign_absorbs_in_odd_degree(self):
        dec = Decomposition(3, 2, ((Fraction(-1), LinearForm([2, 1])),), True)
        out = absorb_coefficients(dec)
        assert out.exact
        assert out.terms[0][1].coords == (Fraction(-2), Fraction(-1))

    def test_irrational_square_root_goes_approximate(self):
        f = parse_form("2*x0^2", 2)
        dec = Decomposition(2, 2, ((Fraction(2), LinearForm([1, 0])),), True)
        out = absorb_coefficients(dec)
        assert not out.exact
        assert check_decomposition(f, out).passed


class TestInductive:
    @pytest.mark.parametrize("shape", [(4, 3), (3, 4), (4, 4), (5, 3)])
    def test_random_instances(self, shape, rng):
        n, d = shape
        f = random_essential_form(rng, n, d)
        dec = decompose_inductive(f, seed=17)
        assert dec.term_count <= recursion_bound(n, d, "improved")
        rep = check_decomposition(f, dec)
        assert rep.passed

    def test_carried_set_shrinks_when_remainder_degenerates(self, rng,
                                                            monkeypatch):
        # Instrumented run: pad the inner decomposition with extra lifted
        # terms so the remainder collapses to a single d-th power inside the
        # contraction hyperplane.  The carried index set must then shrink,
        # monotonically, and the final answer must still verify.
        import sys
        dmod = sys.modules["openwaring.decompose"]

        f = random_essential_form(rng, 4, 3)
        real_dispatch = dmod._dispatch
        state = {"armed": True}

        def padded_dispatch(g, W, ctx):
            if not state["armed"] or g.degree != 2:
                return real_dispatch(g, W, ctx)
            state["armed"] = False
            # the contraction direction is the last constraint added to W
            alpha = [Fraction(0)] * 4
            for expo, c in W.constraints[-1].coeffs.items():
                alpha[expo.index(1)] = c
            i1 = max(range(4), key=lambda i: abs(alpha[i]))
            i0 = (i1 + 1) % 4
            m = [Fraction(0)] * 4
            m[i0], m[i1] = alpha[i1], -alpha[i0]
            target = linear_power(LinearForm(m), 3)
            inner = real_dispatch(g, W, ctx)
            lift_sum = Form(4, 3, {})
            for c, l in inner:
                dot = sum(a * x for a, x in zip(alpha, l.coords))
                lift_sum = lift_sum + linear_power(l, 3).scale(c / (3 * dot))
            # pad with a presentation of (remainder - target), re-scaled so
            # the lifting step reproduces it exactly; the remainder lives in
            # the contraction hyperplane, so shift it off by a generic cube
            h = f - lift_sum - target
            l0 = None
            for probe in ([1, 1, 1, 1], [1, 2, 1, 1], [2, 1, 1, 3], [1, 1, 2, 5]):
                cand = LinearForm([Fraction(x) for x in probe])
                if sum(a * x for a, x in zip(alpha, cand.coords)) == 0:
                    continue
                if essential_variables(h + linear_power(cand, 3)) == 4:
                    l0 = cand
                    break
            assert l0 is not None
            extras = []
            for c, l in real_dispatch(h + linear_power(l0, 3), W, ctx):
                dot = sum(a * x for a, x in zip(alpha, l.coords))
                extras.append((c * 3 * dot, l))
            dot0 = sum(a * x for a, x in zip(alpha, l0.coords))
            extras.append((Fraction(-3) * dot0, l0))
            return inner + extras

        monkeypatch.setattr(dmod, "_dispatch", padded_dispatch)
        dec = decompose_inductive(f, seed=31)
        monkeypatch.setattr(dmod, "_dispatch", real_dispatch)
        # the padding deliberately wrecks term economy, so only the
        # reconstruction and the shrink behaviour are asserted here
        rep = check_decomposition(f, dec)
        assert rep.residual <= mpf(2) ** -128
        assert not rep.forbidden_violations
        sizes = [int(t.rsplit(" ", 1)[1]) for t in dec.trace
                 if t.startswith("inductive: |T| ->")]
        assert sizes, "the carried index set never shrank"
        assert sizes == sorted(sizes, reverse=True)

    def test_preconditions(self):
        with pytest.raises(InvalidInputError):
            decompose_inductive(parse_form("x0^3 + x1^3 + x2^3", 3))
        with pytest.raises(InvalidInputError):
            decompose_inductive(parse_form("x0^2 + x1^2 + x2^2 + x3^2", 4))


class TestDispatcher:
    def test_single_cube(self):
        f = parse_form("x0^3", 2)
        dec = decompose(f)
        assert dec.term_count == 1 and dec.exact

    def test_power_of_sum_after_split(self):
        f = linear_power(LinearForm([1, 1, 0]), 4)
        dec = decompose(f)
        assert dec.term_count == 1
        assert check_decomposition(f, dec).passed

    def test_rank_five_form_with_avoidance(self):
        f = parse_form("x0*x1^2 + x1*x2^2", 3)
        V = ForbiddenSet.from_text("l0", 3)
        dec = decompose(f, V, seed=6)
        assert dec.term_count == 5
        for _, l in dec.terms:
            first = l.coords[0]
            assert not (isinstance(first, Fraction) and first == 0)
        assert check_decomposition(f, dec, V).passed

    def test_degree_one(self):
        f = parse_form("x0 + 2*x1", 2)
        dec = decompose(f)
        assert dec.term_count == 1

    def test_forbidden_single_term_raises(self):
        f = parse_form("x0^3", 2)
        V = ForbiddenSet.from_text("l1", 2)  # forbids anything with l1 = 0
        with pytest.raises(InvalidInputError):
            decompose(f, V)

    def test_zero_rejected(self):
        with pytest.raises(InvalidInputError):
            decompose(Form(2, 2, {}))

    def test_end_to_end_random(self, rng):
        for trial in range(10):
            n = rng.randint(2, 4)
            d = rng.randint(2, 4)
            f = random_form(rng, n, d)
            if f.is_zero():
                continue
            V = random_hyperplanes(rng, n, rng.randint(0, 3))
            dec = decompose(f, V, seed=trial)
            m = essential_variables(f)
            assert dec.term_count <= recursion_bound(max(m, 1), d, "improved")
            rep = check_decomposition(f, dec, V)
            assert rep.passed
            assert catalecticant_lower_bound(f) <= dec.term_count

    def test_determinism(self):
        f = parse_form("x0*x1^2 + x1*x2^2", 3)
        a = decompose(f, seed=123)
        b = decompose(f, seed=123)
        assert a.trace == b.trace
        assert [(repr(c), [repr(x) for x in l.coords]) for c, l in a.terms] == \
            [(repr(c), [repr(x) for x in l.coords]) for c, l in b.terms]
