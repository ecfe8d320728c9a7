"""Wigner 3j symbols and symmetric-top matrix elements of D^1.

The 3j symbol is evaluated from the Racah sum. Every factorial is kept as a
map of prime exponents so the square-root prefactor splits into an exact
rational part and a square-free radicand; the alternating sum itself is an
exact rational. Only the final square root is rounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

__all__ = [
    "AngularIndex",
    "wigner3j",
    "symtop_element",
    "sigma_of_m_reflection",
]


@lru_cache(maxsize=None)
def _primes_upto(n: int) -> tuple[int, ...]:
    if n < 2:
        return ()
    sieve = bytearray([1]) * (n + 1)
    sieve[0] = sieve[1] = 0
    for p in range(2, int(n**0.5) + 1):
        if sieve[p]:
            sieve[p * p :: p] = bytearray(len(sieve[p * p :: p]))
    return tuple(i for i, flag in enumerate(sieve) if flag)


@dataclass(frozen=True)
class AngularIndex:
    """Symmetric-top quantum numbers |J, K, M>."""

    J: int
    K: int
    M: int

    def __post_init__(self):
        if self.J < 0:
            raise ValueError(f"J must be non-negative, got {self.J}")
        if abs(self.K) > self.J or abs(self.M) > self.J:
            raise ValueError(f"|K|, |M| must not exceed J: {self}")


def _twice(x) -> int:
    """Return 2*x as an int, rejecting anything that is not a half-integer."""
    two_x = Fraction(x) * 2
    if two_x.denominator != 1:
        raise ValueError(f"{x!r} is not an integer or half-integer")
    return int(two_x)


@lru_cache(maxsize=None)
def _factorial_exponents(n: int) -> dict[int, int]:
    # Legendre's formula
    out = {}
    for p in _primes_upto(n):
        e, q = 0, p
        while q <= n:
            e += n // q
            q *= p
        out[p] = e
    return out


def _racah_bounds(tj1, tj2, tj3, tm1, tm2):
    # all arguments doubled; returns the k range of the Racah sum (undoubled)
    kmin = max(0, (tj2 - tj3 - tm1) // 2, (tj1 - tj3 + tm2) // 2)
    kmax = min((tj1 + tj2 - tj3) // 2, (tj1 - tm1) // 2, (tj2 + tm2) // 2)
    return kmin, kmax


@lru_cache(maxsize=200_000)
def _w3j_exact(tj1, tj2, tj3, tm1, tm2, tm3) -> float:
    num = [
        (tj1 + tj2 - tj3) // 2,
        (tj1 - tj2 + tj3) // 2,
        (-tj1 + tj2 + tj3) // 2,
        (tj1 + tm1) // 2,
        (tj1 - tm1) // 2,
        (tj2 + tm2) // 2,
        (tj2 - tm2) // 2,
        (tj3 + tm3) // 2,
        (tj3 - tm3) // 2,
    ]
    exps: dict[int, int] = {}
    for n in num:
        for p, e in _factorial_exponents(n).items():
            exps[p] = exps.get(p, 0) + e
    for p, e in _factorial_exponents((tj1 + tj2 + tj3) // 2 + 1).items():
        exps[p] = exps.get(p, 0) - e
    # sqrt(prod p^e) = (outer_num / outer_den) * sqrt(radicand), radicand square-free
    outer_num, outer_den, radicand = 1, 1, 1
    for p, e in exps.items():
        if e % 2:
            radicand *= p
        half = e // 2  # floor: an odd negative e leaves p^+1 under the root
        if half >= 0:
            outer_num *= p**half
        else:
            outer_den *= p ** (-half)

    kmin, kmax = _racah_bounds(tj1, tj2, tj3, tm1, tm2)
    f = math.factorial
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        d = (
            f(k)
            * f((tj3 - tj2 + tm1) // 2 + k)
            * f((tj3 - tj1 - tm2) // 2 + k)
            * f((tj1 + tj2 - tj3) // 2 - k)
            * f((tj1 - tm1) // 2 - k)
            * f((tj2 + tm2) // 2 - k)
        )
        total += Fraction(-1 if k % 2 else 1, d)
    phase = -1 if ((tj1 - tj2 - tm3) // 2) % 2 else 1
    scaled = total * Fraction(outer_num, outer_den)
    if radicand.bit_length() < 1000:
        return phase * float(scaled) * math.sqrt(radicand)
    # radicand beyond float range: take the root in fixed point
    root = Fraction(math.isqrt(radicand << 2000), 1 << 1000)
    return phase * float(scaled * root)


def wigner3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol (j1 j2 j3; m1 m2 m3).

    Arguments may be ints, floats or Fractions holding integers or
    half-integers. Returns 0.0 whenever the triangle rule, m1 + m2 + m3 = 0 or
    integrality of j1 + j2 + j3 fails.
    """
    tj = [_twice(j) for j in (j1, j2, j3)]
    tm = [_twice(m) for m in (m1, m2, m3)]
    for a, b in zip(tj, tm):
        if a < 0:
            raise ValueError(f"negative angular momentum {a / 2}")
        if abs(b) > a:
            raise ValueError(f"|m| = {abs(b) / 2} exceeds j = {a / 2}")
        if (a - b) % 2:
            raise ValueError(f"j = {a / 2} and m = {b / 2} differ by a half-integer")
    tj1, tj2, tj3 = tj
    if sum(tm) != 0:
        return 0.0
    if tj3 > tj1 + tj2 or tj3 < abs(tj1 - tj2) or sum(tj) % 2:
        return 0.0
    return _w3j_exact(*tj, *tm)


def symtop_element(bra: AngularIndex, M: int, K: int, ket: AngularIndex) -> float:
    """<J'' K'' M''| D^1_{MK} |J' K' M'> in the symmetric-top basis.

    ``bra`` carries (J'', K'', M''), ``ket`` carries (J', K', M').
    """
    if M not in (-1, 0, 1) or K not in (-1, 0, 1):
        raise ValueError("D^1 indices must lie in {-1, 0, 1}")
    if abs(bra.J - ket.J) > 1:
        return 0.0
    if bra.M != ket.M + M or bra.K != ket.K + K:
        return 0.0
    phase = -1.0 if (bra.M + bra.K) % 2 else 1.0
    return (
        math.sqrt((2 * bra.J + 1) * (2 * ket.J + 1))
        * phase
        * wigner3j(ket.J, 1, bra.J, ket.M, M, -bra.M)
        * wigner3j(ket.J, 1, bra.J, ket.K, K, -bra.K)
    )


# H(M > 0) = sigma * H(M < 0), keyed by (polarization, |dJ| == 1)
_SIGMA = {
    ("z", False): -1,
    ("z", True): 1,
    ("x", False): 1,
    ("x", True): -1,
    ("y", False): -1,
    ("y", True): 1,
}


def sigma_of_m_reflection(delta_j: int, polarization: str) -> int:
    """Sign relating a transition element to its M -> -M mirror image."""
    if delta_j not in (-1, 0, 1):
        raise ValueError(f"dipole transitions need |dJ| <= 1, got {delta_j}")
    try:
        return _SIGMA[polarization, delta_j != 0]
    except KeyError:
        raise ValueError(f"unknown polarization {polarization!r}") from None
