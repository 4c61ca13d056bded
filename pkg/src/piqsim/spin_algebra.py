"""Combinatorics of the coupled spin basis of N spin-1/2 particles.

All angular momenta are carried as doubled integers (``twoJ``, ``twoM``) so
that the half-integer blocks of odd N are represented exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, sqrt


class DomainError(ValueError):
    """Raised when indices or parameters violate a physical constraint."""


@dataclass(frozen=True, order=True)
class BlockIndex:
    twoJ: int

    @property
    def dim(self) -> int:
        return self.twoJ + 1

    @property
    def J(self) -> float:
        return self.twoJ / 2


def _check_block(N: int, twoJ: int) -> None:
    if N < 1:
        raise DomainError(f"N must be positive, got {N}")
    if twoJ < 0 or twoJ > N:
        raise DomainError(f"2J={twoJ} outside [0, {N}]")
    if (N - twoJ) % 2:
        raise DomainError(f"2J={twoJ} has the wrong parity for N={N}")


@lru_cache(maxsize=None)
def multiplicity(N: int, twoJ: int) -> int:
    """Number of copies d_N^J of the spin-J irrep in (C^2)^{⊗N}.

    Uses ``(2J+1) N! / ((N/2-J)! (N/2+J+1)!) = C(N, k) - C(N, k-1)`` with
    ``k = N/2 - J``, which stays in exact integer arithmetic.
    """
    _check_block(N, twoJ)
    k = (N - twoJ) // 2
    return comb(N, k) - (comb(N, k - 1) if k > 0 else 0)


@lru_cache(maxsize=None)
def alpha(N: int, twoJ: int) -> int:
    """Cumulative multiplicity: sum of d_N^{J'} for J' from J up to N/2."""
    if N < 1:
        raise DomainError(f"N must be positive, got {N}")
    if twoJ < 0 or (N - twoJ) % 2:
        raise DomainError(f"2J={twoJ} has the wrong parity for N={N}")
    if twoJ > N:
        return 0
    return multiplicity(N, twoJ) + alpha(N, twoJ + 2)


def _root(x: int) -> float:
    # products are computed on doubled indices, so x = 4 * (true product)
    return sqrt(x) / 2 if x > 0 else 0.0


def ladder_coefficients(twoJ: int, twoM: int) -> tuple[float, float, float, float]:
    """Return ``(A_plus, A_minus, B_minus, D_minus)`` at (J, M).

    A± = sqrt((J∓M)(J±M+1)), B- = -sqrt((J+M)(J+M-1)),
    D- = sqrt((J-M+1)(J-M+2)). Any factor whose radicand is negative or zero
    evaluates to exactly 0, so callers may probe indices outside the block.
    """
    a_plus = _root((twoJ - twoM) * (twoJ + twoM + 2))
    a_minus = _root((twoJ + twoM) * (twoJ - twoM + 2))
    b_minus = -_root((twoJ + twoM) * (twoJ + twoM - 2))
    d_minus = _root((twoJ - twoM + 2) * (twoJ - twoM + 4))
    # a single negative factor times a negative factor would sneak through
    if twoJ - twoM < 0 or twoJ + twoM + 2 < 0:
        a_plus = 0.0
    if twoJ + twoM < 0 or twoJ - twoM + 2 < 0:
        a_minus = 0.0
    if twoJ + twoM < 0 or twoJ + twoM - 2 < 0:
        b_minus = 0.0
    if twoJ - twoM + 2 < 0 or twoJ - twoM + 4 < 0:
        d_minus = 0.0
    return a_plus, a_minus, b_minus + 0.0, d_minus


def parameter_count(N: int) -> int:
    """Real parameters of a permutation-invariant state, (N+1)(N+2)(N+3)/6."""
    if N < 1:
        raise DomainError(f"N must be positive, got {N}")
    return (N + 1) * (N + 2) * (N + 3) // 6


def block_list(N: int) -> list[BlockIndex]:
    if N < 1:
        raise DomainError(f"N must be positive, got {N}")
    return [BlockIndex(twoJ) for twoJ in range(N % 2, N + 1, 2)]


def m_values(twoJ: int) -> range:
    """Doubled M values of a block in storage order (M = J first)."""
    return range(twoJ, -twoJ - 1, -2)
