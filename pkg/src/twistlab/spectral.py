"""Explicit spectral-side objects: the shifted convolution sum Z_Q, the closed form of M and
its residues c_r, and the cusp-dependent Euler product kappa."""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .forms import HeckeEigenform
from .ntheory import divisors, factorize, is_squarefree, primes_up_to
from .special import PoleError, complex_gamma, riemann_zeta

POLE_DISTANCE = 1e-6


# ---------------------------------------------------------------- Z_Q

@dataclass(frozen=True)
class ShiftedConvolutionPoint:
    """Z_Q(s, w) truncated to h0 <= h_max, m2 <= m_max, with a certified bound on the rest."""

    s: complex
    w: complex
    l1: int
    l2: int
    Q: int
    m_max: int
    h_max: int
    value: complex
    tail_bound: float
    terms: int = 0
    note: str = ""


@lru_cache(maxsize=64)
def divisor_constant(delta: float) -> float:
    """C(delta) with d(n) <= C(delta) n^delta for all n >= 1."""
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    C = 1.0
    for p in primes_up_to(int(2 ** (1.0 / delta)) + 1):
        best, e = 1.0, 1
        while True:
            v = (e + 1) * p ** (-e * delta)
            if v <= best and e > 1 / (delta * math.log(p)) + 1:
                break
            best = max(best, v)
            e += 1
        C *= best
    return C


def _power_tail(e: float, N: int) -> float:
    """Bound for sum_{n > N} n^e, e < -1."""
    return N ** (e + 1) / (-e - 1)


def _power_total(e: float) -> float:
    """sum_{n >= 1} n^e = zeta(-e), e < -1."""
    return float(riemann_zeta(-e).real)


def z_q_tail_bound(s: complex, w: complex, l1: int, l2: int, Q: int, weight: int, m_max: int, h_max: int) -> float:
    """Bound for the part of Z_Q with h0 > h_max or m2 > m_max, from |A(m)| <= d(m) <= C(delta) m^delta.

    Each term is at most C^2 K [a^(q - w') b^(delta - sigma - p) + a^(-w') b^(2 delta - sigma)], with
    a = h0 Q, b = l2 m2, p = (k-1)/2, q = p + delta, w' = Re w + p and K = max(1, 2^(q-1)).
    The divisibility condition is dropped, so the bound sums over every (h0, m2) in the tail region.
    """
    sigma, p = complex(s).real, (weight - 1) / 2.0
    wp = complex(w).real + p
    best = math.inf
    for delta in (0.06, 0.08, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5):
        q = p + delta
        K = max(1.0, 2.0 ** (q - 1))
        pieces = [(q - wp, delta - sigma - p), (-wp, 2 * delta - sigma)]
        if any(ea >= -1 or eb >= -1 for ea, eb in pieces):
            continue
        total = 0.0
        for ea, eb in pieces:
            sa_tail = Q**ea * _power_tail(ea, h_max)
            sa_all = Q**ea * _power_total(ea)
            sb_tail = l2**eb * _power_tail(eb, m_max)
            sb_all = l2**eb * _power_total(eb)
            total += sa_tail * sb_all + sa_all * sb_tail
        C = divisor_constant(delta)
        if C > 1e150:  # too large to be useful, and C**2 would overflow
            continue
        best = min(best, C * C * K * total)
    if not math.isfinite(best):
        raise ValueError(f"no certified tail bound at s={s}, w={w}: outside the absolute-convergence margin")
    return best


def z_q_direct(
    f: HeckeEigenform,
    s: complex,
    w: complex,
    l1: int,
    l2: int,
    Q: int,
    m_max: int = 1000,
    h_max: int = 1000,
    threads: int = 1,
    block: int = 256,
) -> ShiftedConvolutionPoint:
    """Z_Q(s, w) = sum over h0, m2 >= 1 with m1 l1 = m2 l2 + h0 Q of
    A(m1) conj(A(m2)) (1 + h0 Q/(l2 m2))^((k-1)/2) / ((l2 m2)^s (h0 Q)^(w + (k-1)/2))."""
    s, w = complex(s), complex(w)
    p = (f.weight - 1) / 2.0
    # for large h0 the terms behave like (h0 Q)^-w, so absolute convergence needs Re w > 1
    if s.real <= 2 or w.real <= 1:
        raise ValueError(f"need Re s > 2 and Re w > 1 (absolute convergence), got s={s}, w={w}")
    bound = z_q_tail_bound(s, w, l1, l2, Q, f.weight, m_max, h_max)
    n_top = (l2 * m_max + Q * h_max) // l1
    A = f.materialize(max(n_top, m_max))
    inv = pow(l2, -1, l1) if l1 != l2 else None
    wp = w + p

    def run(hs: range):
        re, im, cnt = [], [], 0
        for h in hs:
            if l1 == l2:
                if (h * Q) % l1:
                    continue
                m2 = np.arange(1, m_max + 1)
            else:
                r = (-h * Q * inv) % l1
                m2 = np.arange(r if r else l1, m_max + 1, l1)
            if m2.size == 0:
                continue
            m1 = (m2 * l2 + h * Q) // l1
            b = (l2 * m2).astype(float)
            a = float(h * Q)
            logs = p * np.log1p(a / b) - s * np.log(b) - wp * math.log(a)
            t = A[m1] * np.conj(A[m2]) * np.exp(logs)
            re.append(math.fsum(t.real.tolist()))
            im.append(math.fsum(t.imag.tolist()))
            cnt += m2.size
        return math.fsum(re), math.fsum(im), cnt

    blocks = [range(i, min(i + block, h_max + 1)) for i in range(1, h_max + 1, block)]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    value = complex(math.fsum(x[0] for x in parts), math.fsum(x[1] for x in parts))
    count = sum(x[2] for x in parts)
    note = "" if count else "no (h0, m2) pair satisfies the divisibility condition in range"
    return ShiftedConvolutionPoint(s, w, l1, l2, Q, m_max, h_max, value, bound, count, note)


# ---------------------------------------------------------------- M and c_r

def _near_nonpositive_int(x: complex, tol: float = POLE_DISTANCE) -> bool:
    n = round(x.real)
    return n <= 0 and abs(x - n) < tol


def _gamma_checked(x: complex, label: str) -> complex:
    if _near_nonpositive_int(complex(x)):
        raise PoleError(f"{label} is within {POLE_DISTANCE:g} of a pole (argument {x})")
    return complex(complex_gamma(complex(x)))


M_DOMAIN_NOTE = "closed form stated for Re(s+z) <= 1/2 + max(0, |Re z|); evaluated wherever finite"


def m_closed_form(s: complex, z: complex) -> complex:
    """sqrt(pi) 2^(1/2-s) Gamma(s-1/2+z) Gamma(s-1/2-z) Gamma(1-s) / (Gamma(1/2+z) Gamma(1/2-z))."""
    s, z = complex(s), complex(z)
    g1 = _gamma_checked(s - 0.5 + z, "Gamma(s-1/2+z)")
    g2 = _gamma_checked(s - 0.5 - z, "Gamma(s-1/2-z)")
    g3 = _gamma_checked(1 - s, "Gamma(1-s)")
    d1 = _gamma_checked(0.5 + z, "Gamma(1/2+z)")
    d2 = _gamma_checked(0.5 - z, "Gamma(1/2-z)")
    return math.sqrt(math.pi) * 2 ** (0.5 - s) * g1 * g2 * g3 / (d1 * d2)


def m_domain_ok(s: complex, z: complex) -> bool:
    s, z = complex(s), complex(z)
    return (s + z).real <= 0.5 + max(0.0, abs(z.real))


def c_r_special(r: int, v: float) -> float:
    """Limits of c_r at the half-integer points v = sign * z = +-1/2."""
    if v == -0.5:
        return -(2 ** (r + 0.5)) * math.sqrt(math.pi) / (2 * math.factorial(r + 1))
    if v == 0.5:
        if r == 0:
            return math.sqrt(math.pi / 2)
        return 2 ** (r - 0.5) * math.sqrt(math.pi) / (2 * math.factorial(r))
    raise ValueError("special values exist only at +-1/2")


def c_r_generic(r: int, v: complex) -> complex:
    """(-1)^r sqrt(pi) 2^(-v+r) Gamma(2v-r) Gamma(1/2-v+r) / (r! Gamma(1/2+v) Gamma(1/2-v)), v = sign * z."""
    v = complex(v)
    num = _gamma_checked(2 * v - r, "Gamma(2v-r)") * _gamma_checked(0.5 - v + r, "Gamma(1/2-v+r)")
    den = _gamma_checked(0.5 + v, "Gamma(1/2+z)") * _gamma_checked(0.5 - v, "Gamma(1/2-z)")
    return (-1) ** r * math.sqrt(math.pi) * 2 ** (-v + r) * num / (math.factorial(r) * den)


def c_r_residue(r: int, z: complex, sign: int = 1) -> complex:
    """Residue of the closed-form M at s = 1/2 + sign*z - r."""
    if r < 0 or int(r) != r:
        raise ValueError("r must be a nonnegative integer")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    v = sign * complex(z)
    if v.imag == 0 and v.real in (0.5, -0.5):
        return complex(c_r_special(int(r), v.real))
    return c_r_generic(int(r), v)


def contour_residue(func, center: complex, radius: float = 1e-3, nodes: int = 64) -> complex:
    """(1/2 pi i) times the integral of func around a circle; trapezoid rule, spectrally accurate."""
    total = 0j
    for j in range(nodes):
        e = cmath.exp(2j * math.pi * j / nodes)
        total += func(center + radius * e) * radius * e
    return total / nodes


def richardson_limit(func, target: complex, offsets=(1e-2, 1e-3, 1e-4)) -> complex:
    """Extrapolate func(target + h) to h = 0 through the given offsets (polynomial in h)."""
    hs = np.array(offsets, dtype=float)
    vals = np.array([func(target + h) for h in hs], dtype=complex)
    # Neville's scheme at h = 0
    P = list(vals)
    n = len(hs)
    for k in range(1, n):
        for i in range(n - k):
            P[i] = (hs[i] * P[i + 1] - hs[i + k] * P[i]) / (hs[i] - hs[i + k])
    return complex(P[0])


# ---------------------------------------------------------------- kappa


@dataclass(frozen=True)
class KappaParams:
    """Cusp 1/w of Gamma_0(N) (w | N, N square-free), modulus Q coprime to N, arguments (s', z)."""

    N: int
    w: int
    Q: int
    s_prime: object
    z: object
    Q_factorization: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.N < 1 or not is_squarefree(self.N):
            raise ValueError(f"level N={self.N} must be square-free")
        if self.N % self.w:
            raise ValueError(f"w={self.w} does not divide N={self.N}")
        if math.gcd(self.Q, self.N) != 1:
            raise ValueError(f"gcd(Q, N) must be 1 (Q={self.Q}, N={self.N})")
        if not self.Q_factorization:
            object.__setattr__(self, "Q_factorization", tuple(factorize(self.Q)))


def _as_exact(x):
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, float) and x.is_integer() or isinstance(x, float) and (2 * x).is_integer():
        return Fraction(x)
    return None


def _ipow(p: int, e):
    """p^e: exact Fraction for integer e, complex otherwise."""
    if isinstance(e, Fraction) and e.denominator == 1:
        return Fraction(p) ** int(e)
    return complex(p) ** complex(e)


def kappa(params: KappaParams):
    """kappa_{1/w, Q}(s', -z) from the Euler-product formula, with the parameter z entering as displayed:

        Q^-(s'+z) (1/(wN))^(1/2-z) prod_{p|N} (1 - p^-(1-2z))^-1 prod_{p|N/w} (1 - p^-(s'-z))
        prod_{p|w} (-1 + p^(1-(s'+z))) prod_{p^g || Q} [sum_{j<=g} u^j - p^-(s'-z) sum_{j<g} u^j],  u = p^(2z).

    The Q-factor is the displayed quotient by (1 - p^2z) after cancelling it. When every exponent is
    an integer the result is an exact Fraction.
    """
    sp, z = _as_exact(params.s_prime), _as_exact(params.z)
    exact = sp is not None and z is not None
    if exact:
        exps = [sp + z, Fraction(1, 2) - z, 1 - 2 * z, sp - z, 2 * z]
        exact = all(e.denominator == 1 for e in exps)
    if not exact:
        sp, z = complex(params.s_prime), complex(params.z)
    one = Fraction(1) if exact else 1 + 0j
    N, w, Q = params.N, params.w, params.Q
    out = one / _ipow(Q, sp + z) if exact else complex(Q) ** (-(sp + z))
    out *= _ipow(w * N, -(Fraction(1, 2) - z) if exact else -(0.5 - z))
    Nw = N // w
    for p, _ in factorize(N):
        den = 1 - _ipow(p, -(1 - 2 * z))
        if p in _prime_set(Nw):
            num = 1 - _ipow(p, -(sp - z))
            if sp - z == 1 - 2 * z:  # removable: numerator and denominator coincide
                out *= one
                continue
        else:
            num = -1 + _ipow(p, 1 - (sp + z))
            if num == 0:  # the factor vanishes along s' = 1 - z, whatever the denominator
                return one * 0
        if abs(den) < 1e-9:
            raise ZeroDivisionError(f"factor (1 - {p}^-(1-2z)) vanishes at z={params.z}")
        out *= num / den
    for p, g in params.Q_factorization:
        u = _ipow(p, 2 * z)
        ps = _ipow(p, -(sp - z))
        geo_full = sum((u**j for j in range(g + 1)), one * 0)
        geo_short = sum((u**j for j in range(g)), one * 0)
        out *= geo_full - ps * geo_short
    return out


def _prime_set(n: int) -> set:
    return {p for p, _ in factorize(n)}


def kappa_value(N: int, w: int, Q: int, s_prime, z):
    return kappa(KappaParams(N, w, Q, s_prime, z))


def kappa_bound_probe(N: int, Q: int, z_grid) -> float:
    """max over cusps 1/w (w | N) and the grid of |kappa_{1/w,Q}(1/2, -z)| times Q^(1/2), Re z = 0."""
    best = 0.0
    for z in z_grid:
        z = complex(z)
        if abs(z.real) > 1e-12 or abs(z) < 1e-3:
            raise ValueError("grid points must have Re z = 0 and |z| >= 1e-3")
        for w in divisors(N):
            best = max(best, abs(complex(kappa(KappaParams(N, w, Q, 0.5, z)))))
    return best * math.sqrt(Q)


def gamma0_index(N: int) -> int:
    """[SL_2(Z) : Gamma_0(N)] = N prod_{p | N} (1 + 1/p)."""
    out = Fraction(N)
    for p, _ in factorize(N):
        out *= Fraction(p + 1, p)
    return int(out)


def fundamental_volume(N: int) -> float:
    """pi [SL_2(Z) : Gamma_0(N)] / 3, the hyperbolic area of Gamma_0(N) backslash H."""
    return math.pi * gamma0_index(N) / 3.0
