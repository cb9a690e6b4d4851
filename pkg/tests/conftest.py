import random
from fractions import Fraction

import pytest

from openwaring import ForbiddenSet, Form, LinearForm, essential_variables
from openwaring.poly import monomials_of_degree


def random_form(rng, n, d, lo=-9, hi=9):
    coeffs = {}
    for expo in monomials_of_degree(n, d):
        c = rng.randint(lo, hi)
        if c:
            coeffs[expo] = Fraction(c)
    return Form(n, d, coeffs) if coeffs else random_form(rng, n, d, lo, hi)


def random_essential_form(rng, n, d, lo=-9, hi=9):
    while True:
        f = random_form(rng, n, d, lo, hi)
        if essential_variables(f) == n:
            return f


def random_hyperplanes(rng, n, count, lo=-5, hi=5):
    constraints = []
    for _ in range(count):
        while True:
            v = [Fraction(rng.randint(lo, hi)) for _ in range(n)]
            if any(v):
                break
        constraints.append(LinearForm(v).to_form())
    return ForbiddenSet(n, constraints)


def random_linear_form(rng, n, lo=-6, hi=6):
    while True:
        v = [Fraction(rng.randint(lo, hi)) for _ in range(n)]
        if any(v):
            return LinearForm(v)


@pytest.fixture
def rng():
    return random.Random(20240817)
