"""Twisted L-values: absolutely convergent Dirichlet series and the smoothed critical-line sum."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .characters import DirichletCharacter, character_group
from .forms import HeckeEigenform
from .special import kernel_V

TRUNCATION_FACTOR = 2.06  # V(2.06) < 1e-16


@dataclass(frozen=True)
class ExponentTable:
    """Reference exponents for L(1/2 + it, f x chi) in the Q and t aspects."""

    theta: Fraction = Fraction(7, 64)

    @property
    def convexity(self) -> Fraction:
        return Fraction(1, 2)

    @property
    def q_aspect(self) -> Fraction:
        return Fraction(3, 8)

    @property
    def blomer_harcos(self) -> Fraction:
        return Fraction(1, 2) - Fraction(1, 40)

    @property
    def munshi(self) -> Fraction:
        return Fraction(1, 2) - Fraction(1, 18)

    @property
    def wu(self) -> Fraction:
        return Fraction(3, 8) + self.theta / 4

    @property
    def t_exponent(self) -> Fraction:
        return 1 / (3 - 2 * self.theta)

    def as_dict(self) -> dict[str, Fraction]:
        return {
            "convexity": self.convexity,
            "q_aspect": self.q_aspect,
            "t_exponent": self.t_exponent,
            "blomer_harcos": self.blomer_harcos,
            "munshi": self.munshi,
            "wu": self.wu,
        }


@dataclass(frozen=True)
class LValueRequest:
    form: HeckeEigenform
    chi: DirichletCharacter
    s: complex
    x: float
    n_max: int

    def __post_init__(self):
        if self.n_max < TRUNCATION_FACTOR * self.x - 1:
            raise ValueError(f"n_max={self.n_max} too small for x={self.x}; need >= {TRUNCATION_FACTOR}x")


@dataclass(frozen=True)
class SeriesValue:
    value: complex
    tail_bound: float
    n_max: int


def _principal_one() -> DirichletCharacter:
    return character_group(1).principal


def _fsum_complex(z: np.ndarray) -> complex:
    return complex(math.fsum(z.real.tolist()), math.fsum(z.imag.tolist()))


def divisor_tail_bound(sigma: float, N: int) -> float:
    """Upper bound for sum_{n > N} d(n) n^-sigma, sigma > 1, using D(y) <= y (log y + 1)."""
    if sigma <= 1:
        raise ValueError("need sigma > 1")
    u = sigma - 1.0
    return sigma * N ** (-u) * ((math.log(N) + 1.0) / u + 1.0 / u**2)


def dirichlet_series(f: HeckeEigenform, chi: DirichletCharacter | None, s: complex, n_max: int) -> SeriesValue:
    """Partial sum of A(n) chi(n) n^-s up to n_max, plus a divisor-bound tail estimate."""
    s = complex(s)
    if s.real <= 1.5:
        raise ValueError(f"dirichlet_series needs Re s > 3/2, got {s.real}")
    chi = chi or _principal_one()
    n = np.arange(1, n_max + 1)
    A = f.materialize(n_max)[1:]
    terms = A * chi.values(n) * np.exp(-s * np.log(n))
    return SeriesValue(_fsum_complex(terms), divisor_tail_bound(s.real, n_max), n_max)


def truncation_length(x: float) -> int:
    return int(math.ceil(TRUNCATION_FACTOR * x))


def smoothed_terms(f: HeckeEigenform, chi: DirichletCharacter | None, s: complex, x: float) -> np.ndarray:
    """Term array A(n) chi(n) n^-s V(n/x) for 1 <= n <= ceil(2.06 x)."""
    chi = chi or _principal_one()
    N = truncation_length(x)
    n = np.arange(1, N + 1)
    A = f.materialize(N)[1:]
    return A * chi.values(n) * np.exp(-complex(s) * np.log(n)) * kernel_V(n / x)


def smoothed_sum(f: HeckeEigenform, chi: DirichletCharacter | None, s: complex, x: float) -> complex:
    """sum_n A(n) chi(n) n^-s V(n/x) at a general point s."""
    return _fsum_complex(smoothed_terms(f, chi, s, x))


def smoothed_L(f: HeckeEigenform, chi: DirichletCharacter | None, t: float, x: float) -> complex:
    """Smoothed approximation to L(1/2 + it, f x chi) with cutoff x."""
    if x < 10:
        raise ValueError("smoothed_L needs x >= 10")
    return smoothed_sum(f, chi, complex(0.5, t), x)


@dataclass(frozen=True)
class ExponentFit:
    slope_Q: float
    slope_t: float
    intercept: float
    r2: float
    n_samples: int
    q_span_decades: float
    t_span_decades: float


def exponent_fit(samples) -> ExponentFit:
    """Least squares of log|L| on (1, log Q, log(1+|t|))."""
    rows = [(float(Q), float(t), float(L)) for Q, t, L in samples]
    if len(rows) < 8:
        raise ValueError(f"exponent_fit needs >= 8 samples, got {len(rows)}")
    Q = np.array([r[0] for r in rows])
    t = np.array([r[1] for r in rows])
    L = np.array([r[2] for r in rows])
    if np.any(L <= 0) or np.any(Q <= 0):
        raise ValueError("Q and |L| must be positive")
    X = np.column_stack([np.ones(len(rows)), np.log(Q), np.log1p(np.abs(t))])
    if np.linalg.matrix_rank(X) < 3:
        raise ValueError("degenerate design: Q and t must each take at least two values, not collinearly")
    y = np.log(L)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    q_span = float(np.log10(Q.max() / Q.min()))
    t_span = float(np.log10((1 + np.abs(t)).max() / (1 + np.abs(t)).min()))
    return ExponentFit(float(coef[1]), float(coef[2]), float(coef[0]), r2, len(rows), q_span, t_span)
