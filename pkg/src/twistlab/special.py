"""Special functions and vertical-line Mellin inversion.

Gamma uses a Lanczos approximation (g = 607/128, 15 terms) in log form with the
reflection formula for Re s < 1/2. Zeta uses Euler-Maclaurin summation, with the
functional equation for Re s < 0. Mellin inversion is a trapezoid rule whose
step comes from the integrand's strip of analyticity and whose truncation height
comes from a caller-supplied decay envelope; both choices are checked at run time.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np


class PoleError(ArithmeticError):
    """Evaluation requested at (or too close to) a pole."""


class EnvelopeError(ValueError):
    """A decay envelope is missing, non-integrable or violated by the integrand."""


# ---------------------------------------------------------------- Gamma

_LANCZOS_G = 607.0 / 128.0
_LANCZOS_C = np.array([
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
])
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _log_gamma_right(z: np.ndarray) -> np.ndarray:
    """log Gamma(z) for Re z >= 1/2 (principal branch up to multiples of 2*pi*i)."""
    zm = z - 1.0
    series = np.full(zm.shape, _LANCZOS_C[0], dtype=complex)
    for k in range(1, len(_LANCZOS_C)):
        series = series + _LANCZOS_C[k] / (zm + k)
    t = zm + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (zm + 0.5) * np.log(t) - t + np.log(series)


def _is_pole(z: np.ndarray) -> np.ndarray:
    return (z.imag == 0) & (z.real <= 0) & (z.real == np.round(z.real))


def complex_gamma(s):
    """Gamma(s) for complex s (scalar or array); raises PoleError at 0, -1, -2, ..."""
    z = np.asarray(s, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if np.any(_is_pole(z)):
        bad = z[_is_pole(z)][0]
        raise PoleError(f"Gamma has a pole at s={bad.real:g}")
    out = np.empty(z.shape, dtype=complex)
    right = z.real >= 0.5
    out[right] = np.exp(_log_gamma_right(z[right]))
    left = ~right
    if np.any(left):
        zl = z[left]
        out[left] = np.pi / (np.sin(np.pi * zl) * np.exp(_log_gamma_right(1.0 - zl)))
    return complex(out[0]) if scalar else out


def log_gamma_right(s) -> complex:
    """log Gamma(s) for Re s >= 1/2 (branch-continuous along vertical lines)."""
    z = np.atleast_1d(np.asarray(s, dtype=complex))
    if np.any(z.real < 0.5):
        raise ValueError("log_gamma_right needs Re s >= 1/2")
    return _log_gamma_right(z)


# ---------------------------------------------------------------- zeta

@lru_cache(maxsize=None)
def _bernoulli_even(count: int) -> tuple[float, ...]:
    """B_2, B_4, ..., B_{2*count} as floats, via the Akiyama-Tanigawa algorithm."""
    n = 2 * count
    a = [Fraction(0)] * (n + 1)
    b = []
    for m in range(n + 1):
        a[m] = Fraction(1, m + 1)
        for j in range(m, 0, -1):
            a[j - 1] = j * (a[j - 1] - a[j])
        b.append(a[0])
    return tuple(float(b[2 * k]) for k in range(1, count + 1))


def _zeta_em(s: complex) -> complex:
    """Euler-Maclaurin for Re s >= -1/2, s != 1."""
    N = int(max(12, math.ceil(abs(s.imag) / 2 + abs(s.real) / 4 + 12)))
    n = np.arange(1, N, dtype=float)
    head = np.exp(-s * np.log(n))
    total = complex(math.fsum(head.real.tolist()), math.fsum(head.imag.tolist()))
    logN = math.log(N)
    Ns = cmath.exp(-s * logN)
    total += N * Ns / (s - 1) + 0.5 * Ns
    bern = _bernoulli_even(40)
    rising = s  # s (s+1) ... (s + 2k - 2)
    Npow = Ns / N  # N^{-s-1}
    fact = 2.0  # (2k)!
    for k in range(1, 41):
        term = bern[k - 1] / fact * rising * Npow
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
        rising *= (s + 2 * k - 1) * (s + 2 * k)
        Npow /= N * N
        fact *= (2 * k + 1) * (2 * k + 2)
    return total


def riemann_zeta(s) -> complex:
    """Riemann zeta at complex s != 1."""
    s = complex(s)
    if s == 1:
        raise PoleError("zeta has a pole at s=1")
    if s.real >= -0.5:  # reflecting closer to 0 would evaluate zeta(1-s) next to its pole
        return _zeta_em(s)
    if s.imag == 0 and s.real == round(s.real) and int(round(s.real)) % 2 == 0:
        return 0j
    # functional equation: zeta(s) = 2^s pi^(s-1) sin(pi s/2) Gamma(1-s) zeta(1-s)
    return (
        cmath.exp(s * math.log(2.0) + (s - 1) * math.log(math.pi))
        * cmath.sin(math.pi * s / 2)
        * complex_gamma(1 - s)
        * _zeta_em(1 - s)
    )


def completed_zeta(s) -> complex:
    """pi^(-s/2) Gamma(s/2) zeta(s), symmetric under s -> 1 - s."""
    s = complex(s)
    if s == 0 or s == 1:
        raise PoleError(f"completed zeta has a pole at s={s.real:g}")
    return cmath.exp(-0.5 * s * math.log(math.pi)) * complex_gamma(s / 2) * riemann_zeta(s)


# ---------------------------------------------------------------- smoothing pair

def kernel_V(x):
    """V(x) = exp(-x^5) for x >= 0."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("V is defined for x >= 0")
    out = np.exp(-(xa**5))
    return float(out) if out.ndim == 0 else out


def kernel_v(s):
    """v(s) = Gamma(s/5)/5 on -5 < Re s < 5."""
    z = np.asarray(s, dtype=complex)
    if np.any(np.abs(z.real) >= 5):
        raise ValueError("v is only used on -5 < Re s < 5")
    if np.any(z == 0):
        raise PoleError("v has a pole at s=0")
    return complex_gamma(z / 5) / 5


@dataclass(frozen=True)
class SmoothingKernel:
    """The fixed pair V(x) = exp(-x^5), v(s) = Gamma(s/5)/5."""

    strip: tuple[float, float] = (-5.0, 5.0)

    def V(self, x):
        return kernel_V(x)

    def v(self, s):
        return kernel_v(s)

    def truncation(self, x: float, cutoff: float = 1e-16) -> int:
        """Smallest n_max with V(n/x) < cutoff for all n > n_max."""
        return int(math.ceil(x * (-math.log(cutoff)) ** 0.2))


# ---------------------------------------------------------------- Mellin inversion

@dataclass(frozen=True)
class DecayEnvelope:
    """Bound |f(sigma + i tau)| <= const * (1 + |tau|)^power * exp(-rate |tau|)."""

    const: float
    power: float
    rate: float

    def __call__(self, tau):
        ta = np.abs(np.asarray(tau, dtype=float))
        return self.const * (1.0 + ta) ** self.power * np.exp(-self.rate * ta)

    def tail(self, T: float) -> float:
        """Upper bound for the one-sided integral of the envelope over tau > T."""
        if self.rate <= 0:
            raise EnvelopeError("envelope rate must be positive for a finite tail")
        a = self.power + 1.0
        y = self.rate * (1.0 + T)
        # integral = const * e^rate * rate^-a * Gamma(a, y)
        if a <= 1.0:
            gam = y ** (a - 1.0) * math.exp(-y)
        elif y > 2.0 * (a - 1.0):
            gam = y ** (a - 1.0) * math.exp(-y) * y / (y - a + 1.0)
        else:
            return math.inf
        return self.const * math.exp(self.rate) * self.rate ** (-a) * gam

    def mass(self) -> float:
        """Upper bound for the two-sided integral of the envelope."""
        if self.power <= 0:
            return 2.0 * self.const / self.rate
        a = self.power + 1.0
        return 2.0 * self.const * math.exp(self.rate) * self.rate ** (-a) * math.gamma(a)


@dataclass(frozen=True)
class MellinIntegrand:
    """A function on vertical lines, with its analyticity strip and decay shape.

    `power(sigma)` and `rate` give the decay shape on the line Re s = sigma; the
    constant is calibrated by sampling and then checked at every quadrature node.
    """

    func: Callable[[np.ndarray], np.ndarray]
    strip: tuple[float, float]
    power: Callable[[float], float]
    rate: float
    name: str = "f"

    def envelope(self, sigma: float, probe: float = 60.0) -> DecayEnvelope:
        tau = np.linspace(-probe, probe, 2401)
        vals = np.abs(self.func(sigma + 1j * tau))
        shape = DecayEnvelope(1.0, self.power(sigma), self.rate)(tau)
        ratio = vals / shape
        if not np.all(np.isfinite(ratio)):
            raise EnvelopeError(f"{self.name} is not finite on Re s = {sigma}")
        return DecayEnvelope(2.0 * float(ratio.max()), self.power(sigma), self.rate)


@dataclass
class VerticalLineIntegral:
    """(1/2pi) * integral of f(sigma + i tau) x^(-sigma - i tau) d tau, with error accounting."""

    abscissa: float
    integrand: MellinIntegrand = field(repr=False)
    T: float
    h: float
    value: complex
    tail_bound: float
    discretization: float
    nodes: int

    @property
    def error_bound(self) -> float:
        return self.tail_bound + self.discretization


def _trapezoid(f: MellinIntegrand, sigma: float, x: float, h: float, T: float, env: DecayEnvelope):
    n = int(math.floor(T / h))
    tau = h * np.arange(-n, n + 1)
    s = sigma + 1j * tau
    fv = f.func(s)
    bad = np.abs(fv) > env(tau) * (1 + 1e-9)
    if np.any(bad):
        t0 = tau[bad][0]
        raise EnvelopeError(
            f"{f.name}: |f| exceeds its envelope at tau={t0:.4g} on Re s={sigma}"
        )
    terms = fv * np.exp(-s * math.log(x))
    total = complex(math.fsum(terms.real.tolist()), math.fsum(terms.imag.tolist()))
    return total * h / (2.0 * math.pi), len(tau)


def inverse_mellin(
    f: MellinIntegrand, abscissa: float, x: float, tol: float = 1e-10, max_halvings: int = 8
) -> VerticalLineIntegral:
    """Trapezoid evaluation of (1/2 pi i) * integral over Re s = abscissa of f(s) x^-s ds.

    The truncation height T is the smallest height at which the envelope tail
    (both sides, times x^-sigma / 2pi) is below tol/2. The step h starts from
    exp(-2 pi d / h) < tol, with d the distance to the strip edge, and is halved
    until successive trapezoid sums agree to tol/2.
    """
    lo, hi = f.strip
    if not lo < abscissa < hi:
        raise ValueError(f"abscissa {abscissa} outside the strip ({lo}, {hi}) of {f.name}")
    if x <= 0:
        raise ValueError("x must be positive")
    env = f.envelope(abscissa)
    if env.rate <= 0:
        raise EnvelopeError(f"{f.name}: envelope does not decay (rate={env.rate})")
    scale = x ** (-abscissa) / math.pi  # two tails, each over 2 pi
    T = 1.0
    while scale * env.tail(T) > tol / 2:
        T *= 1.25
        if T > 1e6:
            raise EnvelopeError(f"{f.name}: envelope tail too heavy for tol={tol}")
    tail = scale * env.tail(T)

    d = 0.95 * min(abscissa - lo, hi - abscissa)
    growth = max(x**d, x**-d) * x ** (-abscissa)
    mass = max(env.mass(), 1e-300)
    h = 2.0 * math.pi * d / math.log(max(growth * mass / tol, 2.0) + 1.0)
    prev, _ = _trapezoid(f, abscissa, x, h, T, env)
    for _ in range(max_halvings):
        h /= 2
        cur, n = _trapezoid(f, abscissa, x, h, T, env)
        diff = abs(cur - prev)
        if diff <= tol / 2:
            return VerticalLineIntegral(abscissa, f, T, h, cur, tail, diff, n)
        prev = cur
    raise EnvelopeError(f"{f.name}: trapezoid did not settle after {max_halvings} halvings")


def v_integrand() -> MellinIntegrand:
    """v(s) = Gamma(s/5)/5 as a Mellin integrand on 0 < Re s < 5."""
    return MellinIntegrand(
        func=lambda s: complex_gamma(s / 5) / 5,
        strip=(0.0, 5.0),
        power=lambda sigma: sigma / 5 - 0.5,
        rate=math.pi / 10,
        name="v",
    )


def beta_integrand(beta: complex) -> MellinIntegrand:
    """Gamma(u) Gamma(beta - u) / Gamma(beta) on 0 < Re u < Re beta."""
    beta = complex(beta)
    if beta.real <= 0:
        raise ValueError("need Re beta > 0")
    gb = complex_gamma(beta)
    return MellinIntegrand(
        func=lambda u: complex_gamma(u) * complex_gamma(beta - u) / gb,
        strip=(0.0, beta.real),
        power=lambda sigma: beta.real - 1.0,
        rate=math.pi,
        name="beta kernel",
    )


def beta_mellin_identity(t: float, beta: complex, gamma: float, tol: float = 1e-10):
    """(lhs, rhs): numeric inverse Mellin of Gamma(u)Gamma(beta-u)/Gamma(beta) t^-u, and (1+t)^-beta."""
    beta = complex(beta)
    if t <= 0:
        raise ValueError("t must be positive")
    if not 0 < gamma < beta.real:
        raise ValueError(f"abscissa {gamma} must lie in (0, Re beta) = (0, {beta.real})")
    lhs = inverse_mellin(beta_integrand(beta), gamma, t, tol=tol).value
    rhs = cmath.exp(-beta * math.log1p(t))
    return lhs, rhs
