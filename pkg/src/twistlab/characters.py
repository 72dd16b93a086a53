"""Dirichlet characters mod Q, indexed by exponent vectors against fixed generators.

Each prime-power factor of Q contributes one or two cyclic generators: the
smallest primitive root for odd p^e, and the pair (-1, 5) for 2^e with e >= 3.
A character is an exponent vector; its value at n is exp(2*pi*i*j/D) where D is
the group exponent and j is an exact integer built from discrete logs.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .ntheory import euler_phi, factorize, primitive_root_prime_power


@dataclass(frozen=True)
class _Component:
    """One cyclic factor: generator `gen` of order `order` inside (Z/modulus)^*."""

    prime: int
    modulus: int
    gen: int
    order: int
    dlog: np.ndarray = field(repr=False, compare=False)  # dlog[r] for r mod modulus, -1 on non-units


def _odd_component(p: int, e: int) -> _Component:
    pe = p**e
    g = primitive_root_prime_power(p, e) if pe > 2 else 1
    order = pe // p * (p - 1)
    dlog = np.full(pe, -1, dtype=np.int64)
    x = 1
    for k in range(order):
        dlog[x] = k
        x = x * g % pe
    dlog.setflags(write=False)
    return _Component(p, pe, g, order, dlog)


def _two_components(e: int) -> list[_Component]:
    m = 2**e
    if e == 1:
        return []
    if e == 2:
        dlog = np.full(4, -1, dtype=np.int64)
        dlog[1], dlog[3] = 0, 1
        dlog.setflags(write=False)
        return [_Component(2, 4, m - 1, 2, dlog)]
    order5 = 2 ** (e - 2)
    dlog_sign = np.full(m, -1, dtype=np.int64)
    dlog_five = np.full(m, -1, dtype=np.int64)
    x = 1
    for b in range(order5):
        dlog_sign[x], dlog_five[x] = 0, b
        dlog_sign[m - x], dlog_five[m - x] = 1, b
        x = x * 5 % m
    dlog_sign.setflags(write=False)
    dlog_five.setflags(write=False)
    return [_Component(2, m, m - 1, 2, dlog_sign), _Component(2, m, 5, order5, dlog_five)]


def _root_table(D: int) -> np.ndarray:
    """exp(2*pi*i*j/D), exact at quarter turns."""
    j = np.arange(D)
    tab = np.exp(2j * np.pi * j / D)
    exact = {0: 1.0, 1: 1j, 2: -1.0, 3: -1j}
    for j4 in range(4):
        if (j4 * D) % 4 == 0:
            tab[j4 * D // 4] = exact[j4]
    tab.setflags(write=False)
    return tab


@dataclass(frozen=True)
class DirichletCharacter:
    """A character mod Q given by its exponent vector."""

    group: "CharacterGroup" = field(repr=False, compare=False)
    exponents: tuple[int, ...]
    modulus: int

    def __call__(self, n):
        return self.group.evaluate(self, n)

    def values(self, n) -> np.ndarray:
        return self.group.values(self, n)

    @property
    def index(self) -> int:
        return self.group.index_of(self)

    @property
    def is_principal(self) -> bool:
        return all(k == 0 for k in self.exponents)

    @property
    def order(self) -> int:
        out = 1
        for k, c in zip(self.exponents, self.group.components):
            out = math.lcm(out, c.order // math.gcd(k, c.order))
        return out

    @property
    def conductor(self) -> int:
        return self.group.conductor(self)

    @property
    def is_primitive(self) -> bool:
        return self.conductor == self.modulus

    def conj(self) -> "DirichletCharacter":
        return self.group.character(
            tuple((-k) % c.order for k, c in zip(self.exponents, self.group.components))
        )

    def __mul__(self, other: "DirichletCharacter") -> "DirichletCharacter":
        if other.modulus != self.modulus:
            raise ValueError("characters must share a modulus")
        return self.group.character(
            tuple((a + b) % c.order for a, b, c in zip(self.exponents, other.exponents, self.group.components))
        )


class CharacterGroup:
    """The full group of Dirichlet characters mod Q."""

    def __init__(self, Q: int):
        if Q < 1:
            raise ValueError(f"modulus must be >= 1, got {Q}")
        self.Q = int(Q)
        comps: list[_Component] = []
        for p, e in factorize(self.Q):
            comps.extend(_two_components(e) if p == 2 else [_odd_component(p, e)])
        self.components: tuple[_Component, ...] = tuple(comps)
        self.orders = tuple(c.order for c in comps)
        self.exponent = math.lcm(*self.orders) if comps else 1
        self._roots = _root_table(self.exponent)
        self._scale = tuple(self.exponent // c.order for c in comps)
        # residue tables mod Q: dlog of n mod Q for each component, -1 marks non-units
        r = np.arange(self.Q)
        self._dlogs = tuple(c.dlog[r % c.modulus] for c in comps)
        unit = np.gcd(r, self.Q) == 1
        self._unit = unit

    def __len__(self) -> int:
        return euler_phi(self.Q)

    def __repr__(self) -> str:
        return f"CharacterGroup(Q={self.Q}, orders={self.orders})"

    @property
    def generators(self) -> tuple[int, ...]:
        """Generators as residues mod Q (lifted by CRT with 1 on other factors)."""
        out = []
        for c in self.components:
            other = self.Q // c.modulus
            out.append(_lift(c.gen, c.modulus, other))
        return tuple(out)

    def character(self, exponents) -> DirichletCharacter:
        exps = tuple(int(k) % o for k, o in zip(exponents, self.orders))
        if len(exps) != len(self.orders):
            raise ValueError(f"expected {len(self.orders)} exponents")
        return DirichletCharacter(self, exps, self.Q)

    def __iter__(self):
        for exps in itertools.product(*(range(o) for o in self.orders)):
            yield DirichletCharacter(self, exps, self.Q)

    def characters(self) -> list[DirichletCharacter]:
        return list(self)

    def __getitem__(self, index: int) -> DirichletCharacter:
        n = len(self)
        if not -n <= index < n:
            raise IndexError(index)
        index %= n
        exps = []
        for o in reversed(self.orders):
            exps.append(index % o)
            index //= o
        return DirichletCharacter(self, tuple(reversed(exps)), self.Q)

    def index_of(self, chi: DirichletCharacter) -> int:
        idx = 0
        for k, o in zip(chi.exponents, self.orders):
            idx = idx * o + k
        return idx

    @property
    def principal(self) -> DirichletCharacter:
        return DirichletCharacter(self, (0,) * len(self.orders), self.Q)

    def first_nonprincipal(self) -> DirichletCharacter:
        return self[1] if len(self) > 1 else self.principal

    def _phase(self, chi: DirichletCharacter, r: np.ndarray) -> np.ndarray:
        j = np.zeros(r.shape, dtype=np.int64)
        for k, s, d in zip(chi.exponents, self._scale, self._dlogs):
            if k:
                j += (k * s) * d[r]
        return j % self.exponent

    def values(self, chi: DirichletCharacter, n) -> np.ndarray:
        """Vectorized chi(n) for an integer array n."""
        r = np.mod(np.asarray(n, dtype=np.int64), self.Q)
        out = self._roots[self._phase(chi, r)].astype(complex)
        out[~self._unit[r]] = 0.0
        return out

    def evaluate(self, chi: DirichletCharacter, n: int) -> complex:
        r = int(n) % self.Q
        if not self._unit[r]:
            return 0j
        j = 0
        for k, s, d in zip(chi.exponents, self._scale, self._dlogs):
            j += k * s * int(d[r])
        return complex(self._roots[j % self.exponent])

    def table(self) -> np.ndarray:
        """Array X with X[i, n] = chi_i(n) for 0 <= n < Q, rows in canonical order."""
        r = np.arange(self.Q)
        return np.array([self.values(chi, r) for chi in self]).reshape(len(self), self.Q)

    def conductor(self, chi: DirichletCharacter) -> int:
        cond = 1
        comps = self.components
        i = 0
        while i < len(comps):
            c = comps[i]
            if c.prime == 2 and c.modulus >= 8:
                a, b = chi.exponents[i], chi.exponents[i + 1]
                ob = comps[i + 1].order
                five_order = ob // math.gcd(b, ob)
                if five_order > 1:
                    cond *= 2 ** (five_order.bit_length() - 1 + 2)
                elif a:
                    cond *= 4
                i += 2
                continue
            k = chi.exponents[i]
            d = c.order // math.gcd(k, c.order)
            if d > 1:
                if c.prime == 2:
                    cond *= 4
                else:
                    v = 0
                    while d % c.prime == 0:
                        d //= c.prime
                        v += 1
                    cond *= c.prime ** (1 + v)
            i += 1
        return cond


def _lift(g: int, m: int, other: int) -> int:
    """x = g (mod m), x = 1 (mod other)."""
    if other == 1:
        return g % m
    return (g + m * ((1 - g) * pow(m, -1, other) % other)) % (m * other)


@lru_cache(maxsize=256)
def character_group(Q: int) -> CharacterGroup:
    return CharacterGroup(Q)


def evaluate(chi: DirichletCharacter, n: int) -> complex:
    return chi.group.evaluate(chi, n)


def orthogonality_sum(Q: int, a: int, b: int) -> complex:
    """Sum over all characters mod Q of chi(a) * conj(chi(b))."""
    if math.gcd(a, Q) != 1 or math.gcd(b, Q) != 1:
        raise ValueError(f"a={a} and b={b} must both be coprime to Q={Q}")
    G = character_group(Q)
    va = np.array([G.evaluate(chi, a) for chi in G])
    vb = np.array([G.evaluate(chi, b) for chi in G])
    return complex(np.sum(va * np.conj(vb)))


def orthogonality_matrix(Q: int) -> np.ndarray:
    """M[a, b] = sum_chi chi(a) conj(chi(b)) for all residues 0 <= a, b < Q."""
    X = character_group(Q).table()
    return X.T @ np.conj(X)
