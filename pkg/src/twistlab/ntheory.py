"""Exact integer number theory: factorization, divisor counts, totients, prime windows."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

SIEVE_LIMIT = 10**6
INT64_MAX = 2**63

# deterministic Miller-Rabin witnesses for n < 3.3e24
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


class OverflowError64(ArithmeticError):
    """An integer left the supported 64-bit range."""


def check_int64(n: int, what: str = "value") -> int:
    if abs(n) >= INT64_MAX:
        raise OverflowError64(f"{what}={n} exceeds the 64-bit range")
    return n


@lru_cache(maxsize=None)
def _sieve(limit: int) -> np.ndarray:
    is_p = np.ones(limit + 1, dtype=bool)
    is_p[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if is_p[p]:
            is_p[p * p :: p] = False
    return is_p


def primes_up_to(limit: int) -> np.ndarray:
    """All primes <= limit as an int64 array."""
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    return np.flatnonzero(_sieve(int(limit))).astype(np.int64)


@lru_cache(maxsize=None)
def smallest_prime_factor(limit: int) -> np.ndarray:
    """spf[n] for 0 <= n <= limit (spf[0] = spf[1] = 0)."""
    spf = np.zeros(limit + 1, dtype=np.int64)
    for p in primes_up_to(math.isqrt(limit)):
        p = int(p)
        block = spf[p * p :: p]
        block[block == 0] = p
    idx = np.arange(limit + 1)
    mask = spf == 0
    spf[mask] = idx[mask]
    spf[:2] = 0
    spf.setflags(write=False)
    return spf


def is_prime(n: int) -> bool:
    """Deterministic primality for 0 <= n < 2^64."""
    if n < 2:
        return False
    if n <= SIEVE_LIMIT:
        return bool(_sieve(SIEVE_LIMIT)[n])
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_brent(n: int) -> int:
    if n % 2 == 0:
        return 2
    for c in range(1, 200):
        y, r, q, g = 2, 1, 1, 1
        x = ys = y
        m = 128
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = math.gcd(q, n)
                k += m
            r *= 2
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = math.gcd(abs(x - ys), n)
        if g != n:
            return g
    raise ArithmeticError(f"failed to split {n}")


@dataclass(frozen=True)
class Factorization:
    """Prime factorization as ascending (prime, exponent) pairs."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        primes = [p for p, _ in self.pairs]
        if any(a >= b for a, b in zip(primes, primes[1:])):
            raise ValueError("primes must be strictly increasing")
        if any(e < 1 for _, e in self.pairs):
            raise ValueError("exponents must be positive")

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def as_dict(self) -> dict[int, int]:
        return dict(self.pairs)

    @property
    def primes(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.pairs)

    def value(self) -> int:
        out = 1
        for p, e in self.pairs:
            out *= p**e
        return out


@lru_cache(maxsize=65536)
def factorize(n: int) -> Factorization:
    """Exact factorization of 1 <= n < 2^63."""
    n = int(n)
    if n < 1:
        raise ValueError(f"factorize needs n >= 1, got {n}")
    check_int64(n, "n")
    found: dict[int, int] = {}
    m = n
    if m <= SIEVE_LIMIT:
        spf = smallest_prime_factor(SIEVE_LIMIT)
        while m > 1:
            p = int(spf[m])
            found[p] = found.get(p, 0) + 1
            m //= p
    else:
        for p in primes_up_to(min(SIEVE_LIMIT, math.isqrt(m))):
            p = int(p)
            if p * p > m:
                break
            while m % p == 0:
                found[p] = found.get(p, 0) + 1
                m //= p
        stack = [m] if m > 1 else []
        while stack:
            c = stack.pop()
            if is_prime(c):
                found[c] = found.get(c, 0) + 1
            else:
                d = _pollard_brent(c)
                stack.extend((d, c // d))
    return Factorization(tuple(sorted(found.items())))


def divisor_count(n: int) -> int:
    out = 1
    for _, e in factorize(n):
        out *= e + 1
    return out


def divisor_count_table(n_max: int) -> np.ndarray:
    """d(n) for 0 <= n <= n_max (d(0) set to 0)."""
    d = np.zeros(n_max + 1, dtype=np.int64)
    for k in range(1, n_max + 1):
        d[k::k] += 1
    return d


def euler_phi(n: int) -> int:
    out = n
    for p, _ in factorize(n):
        out = out // p * (p - 1)
    return out


def divisors(n: int) -> list[int]:
    divs = [1]
    for p, e in factorize(n):
        divs = [d * p**k for d in divs for k in range(e + 1)]
    return sorted(divs)


def is_squarefree(n: int) -> bool:
    return all(e == 1 for _, e in factorize(n))


def primes_in_window(lo: float, hi: float, coprime_to: int = 1) -> list[int]:
    """Primes p with lo < p <= hi and gcd(p, coprime_to) = 1."""
    if not 0 < lo < hi:
        raise ValueError(f"need 0 < lo < hi, got ({lo}, {hi})")
    ps = primes_up_to(int(math.floor(hi)))
    return [int(p) for p in ps if p > lo and coprime_to % p != 0]


def crt(residues: list[int], moduli: list[int]) -> int:
    """Solution mod prod(moduli) of x = r_i (mod m_i), moduli pairwise coprime."""
    x, m = 0, 1
    for r, mi in zip(residues, moduli):
        inv = pow(m, -1, mi)
        x = x + m * ((r - x) * inv % mi)
        m *= mi
    return x % m


def primitive_root(p: int) -> int:
    """Smallest primitive root modulo the odd prime p."""
    if p == 2:
        return 1
    qs = factorize(p - 1).primes
    for g in range(2, p):
        if all(pow(g, (p - 1) // q, p) != 1 for q in qs):
            return g
    raise ArithmeticError(f"no primitive root mod {p}")


def primitive_root_prime_power(p: int, e: int) -> int:
    """Smallest primitive root modulo p^e for odd p."""
    pe = p**e
    order = pe // p * (p - 1)
    qs = factorize(order).primes
    for g in range(2, pe):
        if g % p == 0:
            continue
        if all(pow(g, order // q, pe) != 1 for q in qs):
            return g
    raise ArithmeticError(f"no primitive root mod {p}^{e}")


def multiplicative_order(a: int, n: int) -> int:
    if math.gcd(a, n) != 1:
        raise ValueError("a must be a unit mod n")
    order = euler_phi(n)
    for q, e in factorize(order):
        for _ in range(e):
            if pow(a, order // q, n) == 1:
                order //= q
            else:
                break
    return order
