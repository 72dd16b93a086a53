"""Hecke eigenform coefficients, Euler-factor ratios and the Rankin-Selberg constant.

Coefficients are normalized, A(n) = a(n) / n^((k-1)/2). They are built from a table
of prime eigenvalues: the Hecke recursion fills prime powers and multiplicativity
fills the rest. The weight-12 level-1 form is generated from the q-expansion of
eta(q)^24, computed exactly by modular FFT convolutions and CRT.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ntheory import factorize, is_prime, is_squarefree, primes_up_to
from .special import kernel_V

try:  # Python >= 3.11
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as _toml

CACHE_CAP = 10**7
ETA_MAX = 10**5


class TableExhaustedError(LookupError):
    """A coefficient needs a prime eigenvalue that the table does not contain."""

    def __init__(self, prime: int, bound: int | None = None):
        self.prime = prime
        msg = f"prime table exhausted: no eigenvalue for p={prime}"
        if bound is not None:
            msg += f" (table covers p <= {bound})"
        super().__init__(msg)


class CacheLimitError(MemoryError):
    """The coefficient cache would exceed its fixed cap."""


class EigenformParseError(ValueError):
    pass


# ---------------------------------------------------------------- eta^24 oracle

def _moduli_below(start: int, count_bound: float) -> list[int]:
    """Primes below `start`, largest first, until their product exceeds count_bound."""
    out, prod = [], 1
    for p in reversed(primes_up_to(start - 1).tolist()):
        out.append(p)
        prod *= p
        if prod > count_bound:
            return out
    raise ArithmeticError("ran out of moduli")


def _eta3_mod(n: int, p: int) -> np.ndarray:
    """Coefficients of prod (1 - q^m)^3 below q^n, centered mod p (Jacobi's identity)."""
    c = np.zeros(n, dtype=np.int64)
    k = 0
    while k * (k + 1) // 2 < n:
        c[k * (k + 1) // 2] = (-1) ** k * (2 * k + 1)
        k += 1
    return _center(c % p, p)


def _center(a: np.ndarray, p: int) -> np.ndarray:
    return np.where(a > p // 2, a - p, a)


def _square_mod(a: np.ndarray, p: int) -> np.ndarray:
    n = len(a)
    size = 1 << (2 * n - 1).bit_length()
    fa = np.fft.rfft(a.astype(np.float64), size)
    r = np.fft.irfft(fa * fa, size)[:n]
    ri = np.rint(r)
    err = float(np.max(np.abs(r - ri))) if n else 0.0
    if err >= 0.2:
        raise ArithmeticError(f"FFT rounding error {err:.3g} too large for exact convolution")
    return _center(ri.astype(np.int64) % p, p)


def _eta24_raw(n_max: int) -> list[int]:
    n = n_max  # q * prod^24: coefficient of q^j in prod^24 is a(j + 1)
    # |a(m)| <= d(m) m^(11/2) <= 2 sqrt(m) m^(11/2)
    bound = 2 * 2 * n_max**6.0 + 1
    moduli = _moduli_below(4096, bound)
    residues = []
    for p in moduli:
        a = _eta3_mod(n, p)
        for _ in range(3):
            a = _square_mod(a, p)
        residues.append(a)
    M = math.prod(moduli)
    total = np.zeros(n, dtype=object)
    for p, r in zip(moduli, residues):
        Mi = M // p
        total = (total + (r % p).astype(object) * (Mi * pow(Mi, -1, p))) % M
    half = M // 2
    return [int(v - M) if v > half else int(v) for v in total]


def eta24_expansion(n_max: int) -> list[int]:
    """Exact a(1..n_max) for q * prod_{m>=1} (1 - q^m)^24."""
    if not 1 <= n_max <= ETA_MAX:
        raise ValueError(f"n_max must lie in [1, {ETA_MAX}]")
    return _eta24_raw(n_max)


# ---------------------------------------------------------------- eigenforms

@dataclass(eq=False)
class HeckeEigenform:
    """Holomorphic Hecke eigenform of even weight k >= 4 and square-free level N."""

    weight: int
    level: int
    prime_table: dict[int, float]
    name: str = "f"
    _cache: np.ndarray = field(default=None, init=False, repr=False)
    _memo: dict = field(default_factory=dict, init=False, repr=False)
    _pp: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.weight < 4 or self.weight % 2:
            raise ValueError(f"weight must be even and >= 4, got {self.weight}")
        if self.level < 1 or not is_squarefree(self.level):
            raise ValueError(f"level must be square-free, got {self.level}")
        for p in self.prime_table:
            if not is_prime(p):
                raise ValueError(f"prime table key {p} is not prime")
        self.prime_table = dict(sorted(self.prime_table.items()))
        self.prime_bound = max(self.prime_table, default=1)
        self._norm = (self.weight - 1) / 2.0
        self._cache = np.array([0.0, 1.0])

    # -- prime data

    def normalized_prime(self, p: int) -> float:
        try:
            return float(self.prime_table[p]) / p**self._norm
        except KeyError:
            raise TableExhaustedError(p, self.prime_bound) from None

    def prime_power(self, p: int, r: int) -> float:
        """A(p^r) via the Hecke recursion (p not dividing N) or A(p)^r (p | N)."""
        seq = self._pp.get(p)
        if seq is None:
            seq = [1.0, self.normalized_prime(p)]
            self._pp[p] = seq
        ap = seq[1]
        ramified = self.level % p == 0
        while len(seq) <= r:
            if ramified:
                seq.append(seq[-1] * ap)
            else:
                seq.append(ap * seq[-1] - seq[-2])
        return seq[r]

    # -- coefficients

    def coefficient(self, n: int) -> float:
        n = int(n)
        if n < 1:
            raise ValueError("n must be positive")
        if n < len(self._cache):
            return float(self._cache[n])
        hit = self._memo.get(n)
        if hit is not None:
            return hit
        out = 1.0
        for p, e in factorize(n):
            out *= self.prime_power(p, e)
        if len(self._cache) + len(self._memo) >= CACHE_CAP:
            raise CacheLimitError(f"coefficient cache cap {CACHE_CAP} reached")
        self._memo[n] = out
        return out

    def materialize(self, n_max: int) -> np.ndarray:
        """Array A[0..n_max] (A[0] = 0), filled by a multiplicative sieve; read-only."""
        n_max = int(n_max)
        if n_max + 1 > CACHE_CAP:
            raise CacheLimitError(f"n_max={n_max} exceeds the coefficient cache cap {CACHE_CAP}")
        if n_max < len(self._cache):
            return self._cache[: n_max + 1]
        primes = primes_up_to(n_max)
        missing = [int(p) for p in primes if int(p) not in self.prime_table]
        if missing:
            raise TableExhaustedError(missing[0], self.prime_bound)
        A = np.ones(n_max + 1)
        A[0] = 0.0
        root = math.isqrt(n_max)
        for p in primes.tolist():
            if p > root:
                A[p::p] *= self.prime_power(p, 1)
                continue
            count = n_max // p
            e = np.ones(count, dtype=np.int64)
            pk = p
            while pk <= count:
                e[pk - 1 :: pk] += 1
                pk *= p
            powers = np.array([self.prime_power(p, r) for r in range(int(e.max()) + 1)])
            A[p::p] *= powers[e]
        A.setflags(write=False)
        self._cache = A
        return A

    def coefficients(self, n) -> np.ndarray:
        """Vectorized A(n) for an integer array n (uses the materialized cache)."""
        n = np.asarray(n, dtype=np.int64)
        top = int(n.max()) if n.size else 0
        if top >= len(self._cache):
            self.materialize(top)
        return self._cache[n]

    # -- io

    @classmethod
    def from_file(cls, path) -> "HeckeEigenform":
        text = Path(path).read_text(encoding="utf-8")
        return cls.from_toml(text, name=Path(path).stem)

    @classmethod
    def from_toml(cls, text: str, name: str = "f") -> "HeckeEigenform":
        try:
            data = _toml.loads(text)
        except _toml.TOMLDecodeError as exc:
            raise EigenformParseError(f"eigenform file: {exc}") from None

        def where(key: str) -> str:
            for i, line in enumerate(text.splitlines(), 1):
                if re.match(rf"\s*{re.escape(key)}\s*=", line):
                    return f"line {i}, field '{key}'"
            return f"field '{key}'"

        for key in ("weight", "level", "primes"):
            if key not in data:
                raise EigenformParseError(f"eigenform file: missing {where(key)}")
        weight, level = data["weight"], data["level"]
        if not isinstance(weight, int) or isinstance(weight, bool):
            raise EigenformParseError(f"{where('weight')}: expected an integer, got {weight!r}")
        if not isinstance(level, int) or isinstance(level, bool):
            raise EigenformParseError(f"{where('level')}: expected an integer, got {level!r}")
        table: dict[int, float] = {}
        for i, entry in enumerate(data["primes"]):
            if not (isinstance(entry, list) and len(entry) == 2):
                raise EigenformParseError(f"{where('primes')}: entry {i} must be [p, a_p], got {entry!r}")
            p, ap = entry
            if isinstance(ap, str):
                try:
                    ap = float(ap)
                except ValueError:
                    raise EigenformParseError(f"{where('primes')}: entry {i} has non-numeric a_p {entry[1]!r}") from None
            if not isinstance(p, int) or not isinstance(ap, (int, float)):
                raise EigenformParseError(f"{where('primes')}: entry {i} must hold numbers, got {entry!r}")
            table[p] = ap
        try:
            return cls(weight, level, table, name=data.get("name", name))
        except ValueError as exc:
            raise EigenformParseError(f"eigenform file: {exc}") from None

    def to_toml(self) -> str:
        rows = ",\n  ".join(f"[{p}, {int(a) if float(a).is_integer() else a}]" for p, a in self.prime_table.items())
        return f'name = "{self.name}"\nweight = {self.weight}\nlevel = {self.level}\nprimes = [\n  {rows},\n]\n'


_DELTA: dict[int, HeckeEigenform] = {}


def delta_form(prime_bound: int = ETA_MAX) -> HeckeEigenform:
    """The weight-12 level-1 eigenform, prime table taken from the eta^24 expansion."""
    if prime_bound not in _DELTA:
        tau = _eta24_raw(prime_bound)
        table = {int(p): tau[int(p) - 1] for p in primes_up_to(prime_bound)}
        _DELTA[prime_bound] = HeckeEigenform(12, 1, table, name="delta")
    return _DELTA[prime_bound]


def load_form(source: str) -> HeckeEigenform:
    """'delta' / 'delta:<bound>' for the builtin form, anything else is a file path."""
    if source == "delta":
        return delta_form()
    if source.startswith("delta:"):
        return delta_form(int(source.split(":", 1)[1]))
    return HeckeEigenform.from_file(source)


# ---------------------------------------------------------------- Euler ratios

@dataclass(frozen=True)
class EulerRatio:
    l1: int
    l2: int
    s: complex
    value: complex
    depth: int


def _local_sums(f: HeckeEigenform, p: int, s: complex, shifted_first: bool, tol: float = 1e-14):
    """(sum_j A(p^{j+1}) conj A(p^j) p^{-js}, sum_j |A(p^j)|^2 p^{-js}) and the depth used."""
    sigma = complex(s).real
    num = den = 0j
    j = 0
    while True:
        w = complex(p) ** (-j * complex(s))
        a_j, a_j1 = f.prime_power(p, j), f.prime_power(p, j + 1)
        num += (a_j1 * np.conj(a_j) if shifted_first else a_j * np.conj(a_j1)) * w
        den += abs(a_j) ** 2 * w
        j += 1
        if (j + 2) ** 2 * p ** (-j * sigma) < tol:
            return num, den, j


def euler_ratio(f: HeckeEigenform, l1: int, l2: int, s: complex) -> EulerRatio:
    """(sum_m A(l2 m) conj A(l1 m) m^-s) / (sum_m |A(m)|^2 m^-s) as a product of local ratios."""
    s = complex(s)
    if l1 == l2:
        raise ValueError("euler_ratio needs l1 != l2")
    if s.real <= 0:
        raise ValueError("euler_ratio needs Re s > 0")
    for l in (l1, l2):
        if not is_prime(l) or f.level % l == 0:
            raise ValueError(f"{l} must be a prime not dividing the level {f.level}")
    n2, d2, j2 = _local_sums(f, l2, s, shifted_first=True)
    n1, d1, j1 = _local_sums(f, l1, s, shifted_first=False)
    return EulerRatio(l1, l2, s, (n2 / d2) * (n1 / d1), max(j1, j2))


def b_constant(f: HeckeEigenform, l1: int, l2: int) -> float:
    """1/l1 when l1 == l2, else E_{l1,l2}(1) / (l1 l2)."""
    for l in (l1, l2):
        if math.gcd(l, f.level) != 1:
            raise ValueError(f"{l} must be coprime to the level")
    if l1 == l2:
        return 1.0 / l1
    return (euler_ratio(f, l1, l2, 1.0).value / (l1 * l2)).real


# ---------------------------------------------------------------- Rankin-Selberg

@dataclass(frozen=True)
class RankinSelbergFit:
    c: float
    intercept: float
    fit_residual: float
    asymptotic: bool
    x_grid: tuple[float, ...]
    values: tuple[float, ...]


def smoothed_square_mass(f: HeckeEigenform, x: float) -> float:
    """D(x) = sum_m |A(m)|^2 / m * V(m/x)^2, truncated where V < 1e-16."""
    n_max = int(math.ceil(2.06 * x))
    A = f.materialize(n_max)
    m = np.arange(1, n_max + 1, dtype=float)
    terms = A[1:] ** 2 / m * kernel_V(m / x) ** 2
    return math.fsum(terms.tolist())


def rankin_selberg_constant(f: HeckeEigenform, x_grid, residual_threshold: float = 1e-2) -> RankinSelbergFit:
    """Slope c of D(x) against log x by least squares."""
    xs = np.asarray(sorted(float(x) for x in x_grid))
    if len(xs) < 4 or xs[-1] / xs[0] < 10:
        raise ValueError("x_grid needs >= 4 points spanning at least one decade")
    D = np.array([smoothed_square_mass(f, x) for x in xs])
    X = np.column_stack([np.ones_like(xs), np.log(xs)])
    coef, *_ = np.linalg.lstsq(X, D, rcond=None)
    resid = D - X @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    return RankinSelbergFit(float(coef[1]), float(coef[0]), rms, rms < residual_threshold, tuple(xs), tuple(D))


@dataclass(frozen=True)
class ResidueProbe:
    c: float
    constant_term: float
    raw_probe: float
    w: tuple[float, float]
    M: int


def rankin_selberg_probe(f: HeckeEigenform, w: float = 0.05, M: int = 10**5) -> ResidueProbe:
    """Residue of sum_m |A(m)|^2 m^(-1-w) at w = 0 from partial sums at w and w/2.

    With R(w) = c/w + g + O(w) and the tail beyond M modelled as c M^-w / w, the
    partial sums S_M(w) satisfy w S_M(w) + c M^-w = c + g w; two values of w give
    a 2x2 linear system for (c, g). `raw_probe` is the single-w estimate
    w S_M(w) + c M^-w, which carries the O(w) bias g*w.
    """
    A = f.materialize(M)
    m = np.arange(1, M + 1, dtype=float)
    a2 = A[1:] ** 2

    def partial(wv: float) -> float:
        return math.fsum((a2 * m ** (-1.0 - wv)).tolist())

    w1, w2 = w, w / 2
    S1, S2 = partial(w1), partial(w2)
    lhs = np.array([[1 - M**-w1, w1], [1 - M**-w2, w2]])
    c, g = np.linalg.solve(lhs, np.array([w1 * S1, w2 * S2]))
    return ResidueProbe(float(c), float(g), float(w1 * S1 + c * M**-w1), (w1, w2), M)
