import random
from fractions import Fraction

import pytest
import sympy

from openwaring import (DegenerateSystemError, DualOp, Form, InvalidInputError,
                        LinearForm, apolar_component, base_points,
                        catalecticant, change_coordinates, contract,
                        essential_split, essential_variables, linear_power,
                        parse_form, power_witness)
from openwaring.linalg import rational_rank
from conftest import random_form, random_essential_form, random_linear_form


def sympy_catalecticant_rank(f, e):
    """Independent oracle: build the contraction matrix by sympy
    differentiation and take sympy's rank."""
    n, d = f.num_vars, f.degree
    xs = sympy.symbols(f"x0:{n}")
    expr = sympy.Integer(0)
    for expo, c in f.coeffs.items():
        t = sympy.Rational(c.numerator, c.denominator)
        for x, k in zip(xs, expo):
            t *= x ** k
        expr += t
    from openwaring.poly import monomials_of_degree
    rows = []
    for a in monomials_of_degree(n, e):
        de = expr
        for i, k in enumerate(a):
            for _ in range(k):
                de = sympy.diff(de, xs[i])
        poly = sympy.Poly(de, *xs)
        row = [poly.coeff_monomial(sympy.prod([x ** k for x, k in zip(xs, b)]))
               for b in monomials_of_degree(n, d - e)]
        rows.append(row)
    return sympy.Matrix(rows).rank()


class TestCatalecticant:
    def test_cubic_monomial_rank_one(self):
        f = parse_form("x0^3", 2)
        assert catalecticant(f, 1).rank() == 1

    def test_diagonal_quadric(self):
        f = parse_form("x0^2 + x1^2", 2)
        assert catalecticant(f, 1).rank() == 2

    def test_fermat_cubic_middle_rank(self):
        f = parse_form("x0^3 + x1^3 + x2^3", 3)
        cat = catalecticant(f, 2)
        assert cat.rank() == 3
        assert cat.rank() == sympy_catalecticant_rank(f, 2)

    def test_entries_match_contraction(self, rng):
        f = random_form(rng, 3, 3)
        cat = catalecticant(f, 1)
        for label, row in zip(cat.row_labels, cat.entries):
            op = DualOp(3, 1, {label: Fraction(1)})
            img = contract(op, f)
            for mono, entry in zip(cat.col_labels, row):
                assert img.coeffs.get(mono, Fraction(0)) == entry

    def test_out_of_range(self):
        f = parse_form("x0^2", 2)
        with pytest.raises(InvalidInputError):
            catalecticant(f, 3)

    def test_rank_symmetry(self, rng):
        for _ in range(10):
            n = rng.randint(2, 4)
            d = rng.randint(2, 5)
            f = random_form(rng, n, d)
            for e in range(d + 1):
                assert catalecticant(f, e).rank() == catalecticant(f, d - e).rank()


class TestApolarComponent:
    def test_two_cubes(self):
        f = parse_form("x0^3 + x1^3", 2)
        basis = apolar_component(f, 2)
        assert len(basis) == 1
        assert basis[0].coeffs.keys() == {(1, 1)}

    def test_product_quadric(self):
        f = parse_form("x0*x1", 2)
        basis = apolar_component(f, 2)
        keys = {tuple(op.coeffs) for op in basis}
        assert keys == {((2, 0),), ((0, 2),)}

    def test_rank_five_cubic_kernel(self):
        f = parse_form("x0*x1^2 + x1*x2^2", 3)
        basis = apolar_component(f, 2)
        assert len(basis) == 3
        # span equality with {d0^2, d0*d2, d0*d1 - d2^2}
        expected = [
            DualOp(3, 2, {(2, 0, 0): Fraction(1)}),
            DualOp(3, 2, {(1, 0, 1): Fraction(1)}),
            DualOp(3, 2, {(1, 1, 0): Fraction(1), (0, 0, 2): Fraction(-1)}),
        ]
        from openwaring.poly import monomials_of_degree
        monos = monomials_of_degree(3, 2)
        vecs = [[op.coeffs.get(m, Fraction(0)) for m in monos]
                for op in basis + expected]
        assert rational_rank(vecs) == 3

    def test_every_element_annihilates(self, rng):
        for _ in range(8):
            f = random_form(rng, 3, 3)
            for e in (1, 2):
                for op in apolar_component(f, e):
                    assert contract(op, f).is_zero()

    def test_kernel_dimension_count(self, rng):
        f = random_form(rng, 3, 4)
        for e in (1, 2):
            cat = catalecticant(f, e)
            assert len(apolar_component(f, e)) + cat.rank() == len(cat.row_labels)


class TestEssential:
    def test_power_of_linear(self):
        f = linear_power(LinearForm([1, 1, 0]), 3)
        assert essential_variables(f) == 1

    def test_two_squares_in_three_vars(self):
        f = parse_form("x0^2 + x1^2", 3)
        assert essential_variables(f) == 2

    def test_rank_five_cubic(self):
        f = parse_form("x0*x1^2 + x1*x2^2", 3)
        assert essential_variables(f) == 3

    def test_invariance_under_coordinate_change(self, rng):
        from openwaring.linalg import rational_det
        for _ in range(8):
            n = rng.randint(2, 4)
            f = random_form(rng, n, 3)
            while True:
                m = [[Fraction(rng.randint(-4, 4)) for _ in range(n)]
                     for _ in range(n)]
                if rational_det(m) != 0:
                    break
            assert essential_variables(change_coordinates(f, m)) == \
                essential_variables(f)

    def test_split_round_trip(self, rng):
        f = linear_power(LinearForm([1, 1, 0]), 3)
        m, g = essential_split(f)
        assert g.num_vars == 1 and g.degree == 3
        h = change_coordinates(f, m)
        assert all(not any(expo[1:]) for expo in h.coeffs)

    def test_split_embedded_quadric(self, rng):
        f = parse_form("x0*x1", 4)
        m, g = essential_split(f)
        assert g.num_vars == 2
        assert essential_variables(g) == 2

    def test_identity_when_essential(self):
        f = parse_form("x0*x1^2 + x1*x2^2", 3)
        m, g = essential_split(f)
        assert g == f

    def test_zero_form_rejected(self):
        with pytest.raises(InvalidInputError):
            essential_variables(Form(2, 2, {}))


class TestBasePoints:
    def test_fermat_coordinate_points(self):
        # hand oracle: common zeros of {y0*y1, y0*y2, y1*y2} are the three
        # coordinate points
        f = parse_form("x0^3 + x1^3 + x2^3", 3)
        pts = base_points(f, 2)
        assert len(pts) == 3
        for p in pts:
            big = [i for i, c in enumerate(p.coords) if abs(c) > 0.5]
            small = [i for i, c in enumerate(p.coords) if abs(c) < 1e-30]
            assert len(big) == 1 and len(small) == 2

    def test_rank_five_cubic_single_base_point(self):
        # oracle: zeros of {y0^2, y0*y2, y0*y1 - y2^2} force y0 = y2 = 0
        f = parse_form("x0*x1^2 + x1*x2^2", 3)
        pts = base_points(f, 2)
        assert len(pts) == 1
        p = pts[0]
        assert abs(p.coords[1]) > 0.5
        assert abs(p.coords[0]) < 1e-30 and abs(p.coords[2]) < 1e-30

    def test_generic_cubic_is_base_point_free(self, rng):
        for _ in range(5):
            f = random_essential_form(rng, 3, 3)
            assert base_points(f, 2) == []

    def test_binary_case(self):
        f = parse_form("x0^3*x1", 2)  # annihilator contains d1^2
        pts = base_points(f, 2)
        # d1^2 and d0^4 generate; degree-2 piece is spanned by d1^2 alone
        assert len(pts) == 1

    def test_positive_dimensional_rejected(self):
        f = parse_form("x0^4 + x1^4 + x0^2*x1^2", 3)
        # f ignores x2 entirely: the e=1 component is 1-dimensional (d2)
        with pytest.raises(DegenerateSystemError):
            base_points(f, 1)


class TestPowerWitness:
    def test_cube_plus_binary(self):
        f = parse_form("x0^3 + x1^3 - 2*x1^2*x2 + x1*x2^2", 3)
        w = power_witness(f, LinearForm([1, 0, 0]), 2)
        assert w is not None
        img = contract(w, f)
        # proportional to x0^2
        assert set(img.coeffs) == {(2, 0, 0)}

    def test_rank_five_form_witness(self):
        f = parse_form("x0*x1^2 + x1*x2^2", 3)
        w = power_witness(f, LinearForm([0, 1, 0]), 2)
        assert w is not None
        img = contract(w, f)
        assert set(img.coeffs) == {(0, 2, 0)}

    def test_generic_no_witness(self, rng):
        f = random_essential_form(rng, 3, 3)
        assert base_points(f, 2) == []
        for _ in range(4):
            l = random_linear_form(rng, 3)
            assert power_witness(f, l, 2) is None

    def test_witness_iff_base_point(self):
        # base point <=> pure-power witness on the constructed examples
        for text in ("x0^3 + x1^3 + x2^3", "x0*x1^2 + x1*x2^2"):
            f = parse_form(text, 3)
            for p in base_points(f, 2):
                # snap the numeric point to the nearest rational vector
                coords = [Fraction(round(float(c.real))) for c in p.coords]
                w = power_witness(f, LinearForm(coords), 2)
                assert w is not None
