import random
from fractions import Fraction

import mpmath
import pytest
from mpmath import mpf

from openwaring import InvalidInputError
from openwaring.numerics import (AppComplex, UniPoly, is_squarefree,
                                 squarefree_decomposition, squarefree_part,
                                 univariate_roots)


def poly(*coeffs):
    return UniPoly([Fraction(c) for c in coeffs])


class TestAppComplex:
    def test_precision_propagates_as_max(self):
        a = AppComplex(1, 0, 128)
        b = AppComplex(2, 1, 256)
        assert (a + b).precision_bits == 256
        assert (a * b).precision_bits == 256

    def test_mixed_arithmetic_with_rationals(self):
        a = AppComplex(Fraction(1, 3), 0, 128)
        out = Fraction(3) * a + 1
        assert abs(out.real - 2) < mpf(2) ** -100
        assert out.precision_bits == 128

    def test_high_precision_survives_negation(self):
        with mpmath.workprec(300):
            z = mpmath.mpf(2) ** mpmath.mpf("0.5")
        a = AppComplex(z, 0, 256)
        back = -(-a)
        assert abs(back.real - a.real) == 0

    def test_minimum_precision_enforced(self):
        with pytest.raises(InvalidInputError):
            AppComplex(1, 0, 32)


class TestUniPoly:
    def test_divmod_exact(self):
        p = poly(-2, 0, 0, 1)
        d = poly(-1, 1)
        q, r = p.divmod(d)
        assert q * d + r == p

    def test_gcd_and_squarefree_part(self):
        # (t-1)^2 (t+2) -> (t-1)(t+2) up to scalar
        p = poly(2, -3, 0, 1)
        sf = squarefree_part(p)
        assert sf.degree == 2
        q, r = p.divmod(sf)
        assert r.is_zero()

    def test_squarefree_already(self):
        p = poly(1, 0, 1)
        assert squarefree_part(p) == p
        assert is_squarefree(p)

    def test_cube_collapses(self):
        p = poly(0, 0, 0, 1)  # t^3
        sf = squarefree_part(p)
        assert sf.degree == 1
        assert not is_squarefree(p)

    def test_yun_decomposition(self):
        # (t-1)^2 (t+2)^3
        p = poly(-1, 1) * poly(-1, 1) * poly(2, 1) * poly(2, 1) * poly(2, 1)
        parts = squarefree_decomposition(p)
        assert sorted(m for _, m in parts) == [2, 3]
        recon = UniPoly([Fraction(1)])
        for g, m in parts:
            for _ in range(m):
                recon = recon * g
        assert squarefree_part(recon) == squarefree_part(p)

    def test_squarefree_divides_exactly(self, rng):
        for _ in range(20):
            deg = rng.randint(1, 8)
            p = UniPoly([Fraction(rng.randint(-9, 9)) for _ in range(deg)]
                        + [Fraction(rng.randint(1, 9))])
            sf = squarefree_part(p)
            _, r = p.divmod(sf)
            assert r.is_zero()
            assert is_squarefree(p) == (sf.degree == p.degree)


class TestRoots:
    def test_factorable_quadratics(self):
        roots = univariate_roots(poly(-1, 0, 1), 256)
        vals = sorted(float(r.real) for r in roots)
        assert abs(vals[0] + 1) < 1e-30 and abs(vals[1] - 1) < 1e-30
        roots = univariate_roots(poly(1, 0, 1), 256)
        imags = sorted(float(r.imag) for r in roots)
        assert abs(imags[0] + 1) < 1e-30 and abs(imags[1] - 1) < 1e-30

    def test_cube_root_of_two_residuals(self):
        # oracle: every root must satisfy |r^3 - 2| below the 256-bit threshold
        roots = univariate_roots(poly(-2, 0, 0, 1), 256)
        assert len(roots) == 3
        for r in roots:
            z = r.to_mpc()
            assert abs(z ** 3 - 2) <= mpf(2) ** -128 * 2

    def test_multiplicities_reported(self):
        # (t-1)^2 (t+2)
        roots = univariate_roots(poly(2, -3, 0, 1), 256)
        near_one = [r for r in roots if abs(r.to_mpc() - 1) < 1e-40]
        assert len(roots) == 3 and len(near_one) == 2

    def test_zero_polynomial_rejected(self):
        with pytest.raises(InvalidInputError):
            univariate_roots(UniPoly([]), 256)
        with pytest.raises(InvalidInputError):
            univariate_roots(poly(5), 256)

    def test_reconstruction_from_roots(self):
        # product of (t - r_i), rescaled by the leading coefficient,
        # matches the input coefficientwise within 2^(-precision/2)
        rng = random.Random(7)
        for _ in range(12):
            deg = rng.randint(1, 12)
            coeffs = [Fraction(rng.randint(-9, 9)) for _ in range(deg)]
            coeffs.append(Fraction(rng.choice([1, 2, 3, -1, -2])))
            p = UniPoly(coeffs)
            roots = univariate_roots(p, 256)
            with mpmath.workprec(320):
                acc = [mpmath.mpc(1)]
                for r in roots:
                    z = r.to_mpc()
                    new = [mpmath.mpc(0)] * (len(acc) + 1)
                    for i, a in enumerate(acc):
                        new[i + 1] += a
                        new[i] -= a * z
                    acc = new
                lead = mpmath.mpf(p.coeffs[-1].numerator) / mpmath.mpf(
                    p.coeffs[-1].denominator)
                scale = max(abs(mpmath.mpf(c.numerator) / mpmath.mpf(c.denominator))
                            for c in p.coeffs)
                for i, c in enumerate(p.coeffs):
                    want = mpmath.mpf(c.numerator) / mpmath.mpf(c.denominator)
                    got = acc[i] * lead
                    assert abs(got - want) <= mpf(2) ** -128 * max(scale, 1)

    def test_roots_deterministic(self):
        p = poly(3, -5, 0, 7, 2)
        a = univariate_roots(p, 256)
        b = univariate_roots(p, 256)
        assert [(x.real, x.imag) for x in a] == [(x.real, x.imag) for x in b]
