"""Upper-bound arithmetic for term counts: the binomial bound, the improved
closed form, and the recursion table they both satisfy.

All values are exact arbitrary-size integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

from .errors import InvalidInputError, OutOfDomainError

BASE_MODES = ("bbs", "improved")


def _comb0(a: int, b: int) -> int:
    """Binomial coefficient with C(a,b) = 0 outside 0 <= b <= a."""
    if a < 0 or b < 0 or b > a:
        return 0
    return comb(a, b)


def bbs_bound(n: int, d: int) -> int:
    """C(n+d-2, d-1): the binomial upper bound on the term count."""
    if n < 1 or d < 1:
        raise InvalidInputError("n and d must be positive")
    return comb(n + d - 2, d - 1)


def improved_bound(n: int, d: int) -> int:
    """C(n+d-2, d-1) - C(n+d-6, d-3); only claimed for n, d >= 3."""
    if n < 3 or d < 3:
        raise OutOfDomainError(
            f"improved bound is only defined for n, d >= 3, got ({n}, {d})")
    return comb(n + d - 2, d - 1) - _comb0(n + d - 6, d - 3)


@dataclass(frozen=True)
class BoundTable:
    """Dynamic-programming fill of B(n,d) = B(n-1,d) + B(n,d-1).

    Base rows: B(1,d) = 1 and B(n,1) = 1 (dispatcher convenience),
    B(2,d) = d, B(n,2) = n; in ``improved`` mode additionally B(3,3) = 5.
    """

    max_n: int
    max_d: int
    base_mode: str
    entries: tuple

    @classmethod
    def build(cls, max_n: int, max_d: int, base_mode: str = "improved"):
        if base_mode not in BASE_MODES:
            raise InvalidInputError(f"base_mode must be one of {BASE_MODES}")
        if max_n < 1 or max_d < 1:
            raise InvalidInputError("table limits must be positive")
        table = {}
        for n in range(1, max_n + 1):
            for d in range(1, max_d + 1):
                if n == 1 or d == 1:
                    v = 1
                elif n == 2:
                    v = d
                elif d == 2:
                    v = n
                elif base_mode == "improved" and n == 3 and d == 3:
                    v = 5
                else:
                    v = table[(n - 1, d)] + table[(n, d - 1)]
                table[(n, d)] = v
        return cls(max_n, max_d, base_mode, tuple(sorted(table.items())))

    def value(self, n: int, d: int) -> int:
        if not (1 <= n <= self.max_n and 1 <= d <= self.max_d):
            raise InvalidInputError(f"({n}, {d}) outside the table")
        return dict(self.entries)[(n, d)]


@lru_cache(maxsize=None)
def _table_cached(max_n, max_d, base_mode):
    return BoundTable.build(max_n, max_d, base_mode)


def recursion_bound(n: int, d: int, base_mode: str = "improved") -> int:
    """Recursion value B(n,d) under the chosen base mode."""
    if n < 1 or d < 1:
        raise InvalidInputError("n and d must be positive")
    table = _table_cached(max(n, 3), max(d, 3), base_mode)
    return table.value(n, d)
