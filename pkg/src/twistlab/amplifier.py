"""Amplified second moment: parameters, direct evaluation and exact decomposition.

The moment is the bilinear form

    S = phi(Q) * sum over pairs (m1, l1), (m2, l2) with m1 l1 = m2 l2 (mod Q) of
        u(m1, l1) conj(u(m2, l2)) * G exp(-G |log(l1 m1 / (l2 m2))|),

    u(m, l) = A(m) conj(chi(l)) l^alpha m^(-1/2 - i t) V(m/x),

with m <= ceil(2.06 x) and l running over the amplifier primes. It splits exactly
into the equal-product terms (l1 = l2, then l1 != l2) and the two shifted families
m1 l1 = m2 l2 + hQ and m2 l2 = m1 l1 + hQ.

All reductions use math.fsum on real and imaginary parts separately. fsum is
correctly rounded and therefore independent of summation order, so results are
bit-identical for any thread count.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .characters import DirichletCharacter, character_group
from .forms import HeckeEigenform, euler_ratio, smoothed_square_mass
from .lfunc import smoothed_L, truncation_length
from .ntheory import euler_phi, primes_in_window
from .special import kernel_V

H_CUTOFF = 40.0  # drop shifted terms once G * log(ratio) exceeds this
MAX_PAIRS = 10**9
DEFAULT_THETA = Fraction(7, 64)


def _fsum_c(parts) -> complex:
    """Correctly rounded complex sum of a list of arrays/scalars."""
    re, im = [], []
    for p in parts:
        a = np.asarray(p, dtype=complex).ravel()
        re.append(a.real)
        im.append(a.imag)
    if not re:
        return 0j
    re, im = np.concatenate(re), np.concatenate(im)
    # exact zeros (underflowed kernels) do not change an exact sum
    return complex(math.fsum(re[re != 0].tolist()), math.fsum(im[im != 0].tolist()))


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- parameters

@dataclass(frozen=True)
class AmplifierParams:
    """Amplifier configuration: modulus, height, kernel width G, prime window and cutoff x."""

    Q: int
    t: float
    G: float
    primes: tuple[int, ...]
    x: float
    N: int = 1
    L: float | None = None
    theta: Fraction = DEFAULT_THETA
    a: float | None = None
    r: float = 0.0
    mode: str = "manual"
    notes: tuple[str, ...] = ()

    @property
    def log_conductor(self) -> float:
        return math.log(self.Q * (1.0 + abs(self.t)))

    @property
    def alpha(self) -> float:
        lc = self.log_conductor
        if lc <= 0:
            raise ValueError("alpha = 1/log(Q(1+|t|)) is undefined when Q(1+|t|) = 1")
        return 1.0 / lc

    @property
    def A(self) -> float:
        return math.sqrt(10.0 * self.log_conductor)

    @property
    def t_tilde(self) -> float:
        return self.t + self.r

    @property
    def n_max(self) -> int:
        return truncation_length(self.x)

    @property
    def phi_Q(self) -> int:
        return euler_phi(self.Q)

    def as_dict(self) -> dict:
        return {
            "Q": self.Q, "t": self.t, "G": self.G, "primes": list(self.primes), "x": self.x,
            "N": self.N, "L": self.L, "theta": str(self.theta), "a": self.a, "r": self.r,
            "mode": self.mode, "notes": list(self.notes),
        }


def theorem_G(Q: int, t: float, theta=DEFAULT_THETA) -> float:
    """(1+|t|)^(2/(3-2 theta)) (log Q)^5."""
    a = 2.0 / (3.0 - 2.0 * float(theta))
    return (1.0 + abs(t)) ** a * math.log(Q) ** 5


def derive_params(
    Q: int,
    t: float = 0.0,
    theta=DEFAULT_THETA,
    mode: str = "theorem",
    *,
    N: int = 1,
    x: float | None = None,
    L: float | None = None,
    G: float | None = None,
    primes=None,
    r: float = 0.0,
) -> AmplifierParams:
    """Build amplifier parameters.

    "theorem": G = (1+|t|)^(2/(3-2 theta)) (log Q)^5 floored at 2A, L = Q^(1/4).
    "manual": explicit G, L and/or prime list; missing values fall back to the theorem choices.
    """
    theta = Fraction(theta).limit_denominator(10**6) if not isinstance(theta, Fraction) else theta
    if mode not in ("theorem", "manual"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "theorem" and Q < 3:
        raise ValueError("theorem mode needs Q >= 3")
    if Q < 1:
        raise ValueError("Q must be positive")
    notes = []
    a = 2.0 / (3.0 - 2.0 * float(theta))
    lc = math.log(Q * (1.0 + abs(t)))
    two_A = 2.0 * math.sqrt(10.0 * lc)
    if mode == "theorem" or G is None:
        G = max(theorem_G(Q, t, theta) if Q > 1 else 0.0, two_A)
    elif G < two_A:
        notes.append(f"G={G:g} below 2A={two_A:.4g}")
    if G <= 0:
        raise ValueError("G must be positive")
    if mode == "theorem" or (L is None and primes is None):
        L = Q**0.25
    if L is not None and L >= Q:
        raise ValueError(f"L={L} must be smaller than Q={Q}")
    if mode == "theorem" or primes is None:
        primes = primes_in_window(L, 2 * L, Q * N) if L and L > 0 else []
    else:
        primes = sorted(int(p) for p in primes)
        bad = [p for p in primes if math.gcd(p, Q * N) != 1]
        if bad:
            raise ValueError(f"amplifier primes {bad} are not coprime to QN={Q * N}")
    if not primes:
        notes.append("empty prime window")
    if x is None:
        x = 3.0 * Q * (1.0 + abs(t))
    return AmplifierParams(
        Q=int(Q), t=float(t), G=float(G), primes=tuple(primes), x=float(x), N=int(N), L=L,
        theta=theta, a=a, r=float(r), mode=mode, notes=tuple(notes),
    )


def cauchy_kernel_mass(G: float, theta_log: float) -> float:
    """Closed form of the integral of exp(i theta r) dr / (pi (1 + (r/G)^2)): G exp(-G |theta|)."""
    if G <= 0:
        raise ValueError("G must be positive")
    return G * math.exp(-G * abs(theta_log))


# ---------------------------------------------------------------- term tables

def _term_weights(p: AmplifierParams, f: HeckeEigenform, chi: DirichletCharacter) -> dict[int, np.ndarray]:
    """u[l][m] = A(m) conj(chi(l)) l^alpha m^(-1/2 - i t) V(m/x) for 1 <= m <= n_max (index 0 unused)."""
    N = p.n_max
    A = f.materialize(N)
    m = np.arange(1, N + 1, dtype=float)
    base = np.zeros(N + 1, dtype=complex)
    base[1:] = A[1:] * np.exp(-complex(0.5, p.t_tilde) * np.log(m)) * kernel_V(m / p.x)
    alpha = p.alpha if p.primes else 0.0
    out = {}
    for l in p.primes:
        out[l] = base * (np.conj(chi(l)) * l**alpha)
    return out


def _check_chi(p: AmplifierParams, chi: DirichletCharacter):
    if chi.modulus != p.Q:
        raise ValueError(f"character modulus {chi.modulus} does not match Q={p.Q}")


# ---------------------------------------------------------------- direct form

def _class_sum_matrix(u: np.ndarray, lam: np.ndarray, G: float) -> complex:
    K = G * np.exp(-G * np.abs(lam[:, None] - lam[None, :]))
    return _fsum_c([(u[:, None] * np.conj(u[None, :])) * K])


def _class_sum_recursive(u: np.ndarray, lam: np.ndarray, G: float) -> complex:
    order = np.argsort(lam, kind="stable")
    u, lam = u[order], lam[order]
    decay = np.exp(-G * np.diff(lam))
    cross = np.empty(len(u), dtype=complex)
    acc = 0j
    cross[0] = 0j
    for i in range(1, len(u)):
        acc = decay[i - 1] * (acc + np.conj(u[i - 1]))
        cross[i] = u[i] * acc
    diag = np.abs(u) ** 2
    return complex(G * (math.fsum(diag.tolist()) + 2.0 * math.fsum(cross.real.tolist())), 0.0)


def compute_S_direct(
    p: AmplifierParams, f: HeckeEigenform, chi: DirichletCharacter, method: str = "pairs", threads: int = 1
) -> float:
    """The moment as phi(Q) times a sum over residue classes a mod Q of kernel-weighted pair sums."""
    _check_chi(p, chi)
    if not p.primes:
        return 0.0
    u = _term_weights(p, f, chi)
    N = p.n_max
    m = np.arange(1, N + 1)
    U = np.concatenate([u[l][1:] for l in p.primes])
    prod = np.concatenate([m * l for l in p.primes])
    lam = np.log(prod.astype(float))
    cls = prod % p.Q
    order = np.lexsort((prod, cls))
    U, lam, cls = U[order], lam[order], cls[order]
    bounds = np.flatnonzero(np.diff(cls)) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [len(cls)]])
    sizes = ends - starts
    if method == "pairs" and int(np.sum(sizes.astype(np.int64) ** 2)) > MAX_PAIRS:
        raise ValueError(f"pair count exceeds {MAX_PAIRS}; lower x or use method='recursive'")
    kernel = {"pairs": _class_sum_matrix, "recursive": _class_sum_recursive}[method]
    blocks = [(int(a), int(b)) for a, b in zip(starts, ends)]
    parts = _map(lambda ab: kernel(U[ab[0]:ab[1]], lam[ab[0]:ab[1]], p.G), blocks, threads)
    return p.phi_Q * _fsum_c(parts).real


# ---------------------------------------------------------------- decomposition

@dataclass
class MomentDecomposition:
    S_d1: complex
    S_d2: complex
    S_o1: complex
    S_o2: complex
    S_direct: float | None = None
    truncation: dict = field(default_factory=dict)

    @property
    def total(self) -> complex:
        return self.S_d1 + self.S_d2 + self.S_o1 + self.S_o2

    @property
    def S_d(self) -> complex:
        return self.S_d1 + self.S_d2

    def as_dict(self) -> dict:
        c = lambda z: [z.real, z.imag]
        return {
            "S_d1": c(self.S_d1), "S_d2": c(self.S_d2), "S_o1": c(self.S_o1), "S_o2": c(self.S_o2),
            "S_direct": self.S_direct, "total": c(self.total), "truncation": self.truncation,
        }


def compute_S_d1(p: AmplifierParams, f: HeckeEigenform) -> float:
    """phi(Q) G (sum_l l^(2 alpha)) sum_m |A(m)|^2 / m V(m/x)^2; independent of chi and t."""
    if not p.primes:
        return 0.0
    lsum = math.fsum(l ** (2 * p.alpha) for l in p.primes)
    return p.phi_Q * p.G * lsum * smoothed_square_mass(f, p.x)


def compute_S_d2(p: AmplifierParams, f: HeckeEigenform, chi: DirichletCharacter) -> complex:
    """Terms with l1 != l2 and m1 l1 = m2 l2, i.e. m1 = l2 m, m2 = l1 m."""
    _check_chi(p, chi)
    u = _term_weights(p, f, chi)
    N = p.n_max
    parts = []
    for l1 in p.primes:
        for l2 in p.primes:
            if l1 == l2:
                continue
            mm = np.arange(1, N // max(l1, l2) + 1)
            parts.append(u[l1][l2 * mm] * np.conj(u[l2][l1 * mm]))
    return p.phi_Q * p.G * _fsum_c(parts)


def _shifted_block(p: AmplifierParams, u: dict, la: int, lb: int):
    """Terms u(ma, la) conj(u(mb, lb)) G exp(-G log(ma la / (mb lb))) over ma la = mb lb + hQ.

    Returns (terms, pair count, h range used, dropped-mass bound).
    """
    N, Q, G = p.n_max, p.Q, p.G
    ua, ub = u[la], u[lb]
    h_top = (la * N - lb) // Q  # beyond this ma > N for every mb >= 1
    ratio_top = math.expm1(H_CUTOFF / G)  # keep hQ/(mb lb) <= ratio_top
    out, count, dropped, h_used = [], 0, 0.0, 0
    abs_a = np.abs(ua)
    inv_lb = pow(lb, -1, la) if la != lb else None
    for h in range(1, h_top + 1):
        if la == lb:
            if (h * Q) % la:
                continue
            mb = np.arange(1, N + 1)
        else:
            r = (-h * Q * inv_lb) % la
            start = r if r else la
            mb = np.arange(start, N + 1, la)
        if mb.size == 0:
            continue
        n = mb * lb + h * Q
        ma = n // la
        ok = ma <= N
        mb, ma = mb[ok], ma[ok]
        if mb.size == 0:
            continue
        rho = (h * Q) / (mb * lb)
        keep = rho <= ratio_top
        if not np.all(keep):
            dropped += float(np.sum(abs_a[ma[~keep]] * np.abs(ub[mb[~keep]]))) * G * math.exp(-H_CUTOFF)
            mb, ma, rho = mb[keep], ma[keep], rho[keep]
            if mb.size == 0:
                continue
        h_used = h
        count += mb.size
        out.append(ua[ma] * np.conj(ub[mb]) * (G * np.exp(-G * np.log1p(rho))))
    return out, count, h_used, dropped


def _shifted_sum(p: AmplifierParams, u: dict, swap: bool, threads: int):
    pairs = [(l1, l2) for l1 in p.primes for l2 in p.primes]

    def one(pair):
        l1, l2 = pair
        if not swap:  # m1 l1 = m2 l2 + hQ, terms u(m1,l1) conj(u(m2,l2))
            terms, cnt, h, drop = _shifted_block(p, u, l1, l2)
            return _fsum_c(terms), cnt, h, drop
        # m2 l2 = m1 l1 + hQ: roles of the two factors exchanged, conjugate restores order
        terms, cnt, h, drop = _shifted_block(p, u, l2, l1)
        return np.conj(_fsum_c(terms)), cnt, h, drop

    res = _map(one, pairs, threads)
    total = _fsum_c([r[0] for r in res])
    meta = {
        "pairs": int(sum(r[1] for r in res)),
        "h_max": int(max((r[2] for r in res), default=0)),
        "dropped_bound": float(sum(r[3] for r in res)) * p.phi_Q,
    }
    return p.phi_Q * total, meta


def compute_decomposition(
    p: AmplifierParams,
    f: HeckeEigenform,
    chi: DirichletCharacter,
    include_direct: bool = True,
    threads: int = 1,
    method: str = "pairs",
) -> MomentDecomposition:
    """S_d1, S_d2, S_o1, S_o2 summed by their own constraints (and optionally S_direct)."""
    _check_chi(p, chi)
    u = _term_weights(p, f, chi)
    if p.primes:
        S_d1 = complex(compute_S_d1(p, f))
        S_d2 = compute_S_d2(p, f, chi)
        S_o1, meta1 = _shifted_sum(p, u, swap=False, threads=threads)
        S_o2, meta2 = _shifted_sum(p, u, swap=True, threads=threads)
    else:
        S_d1 = S_d2 = S_o1 = S_o2 = 0j
        meta1 = meta2 = {"pairs": 0, "h_max": 0, "dropped_bound": 0.0}
    direct = compute_S_direct(p, f, chi, method=method, threads=threads) if include_direct else None
    trunc = {
        "n_max": p.n_max,
        "m_range": [1, p.n_max],
        "h_cutoff": f"G*log(1+hQ/(m l)) <= {H_CUTOFF:g}",
        "o1": meta1,
        "o2": meta2,
    }
    return MomentDecomposition(S_d1, S_d2, S_o1, S_o2, direct, trunc)


# ---------------------------------------------------------------- main-term predictions

@dataclass(frozen=True)
class DiagonalPrediction:
    main: float
    error_envelope: float


def _window_L(p: AmplifierParams) -> float:
    return p.L if p.L is not None else (max(p.primes) / 2.0 if p.primes else 0.0)


def predict_S_d1(p: AmplifierParams, f: HeckeEigenform, c: float) -> DiagonalPrediction:
    """phi(Q) G (sum_l l^(2 alpha)) c log x, with the envelope Q G L^(1 + 2 alpha)."""
    lsum = math.fsum(l ** (2 * p.alpha) for l in p.primes) if p.primes else 0.0
    main = p.phi_Q * p.G * lsum * c * math.log(p.x)
    L = _window_L(p)
    return DiagonalPrediction(main, p.Q * p.G * L ** (1 + 2 * p.alpha) if L > 0 else 0.0)


def predict_S_d2_main(p: AmplifierParams, f: HeckeEigenform, chi: DirichletCharacter, c: float) -> complex:
    """Main term of the l1 != l2 diagonal: c E_{l1,l2}(1) log(x/l2) with the amplifier weights."""
    _check_chi(p, chi)
    tt = p.t_tilde
    parts = []
    for l1 in p.primes:
        for l2 in p.primes:
            if l1 == l2:
                continue
            w = np.conj(chi(l1)) * chi(l2) * (l1 * l2) ** p.alpha
            w *= l2 ** complex(-0.5, -tt) * l1 ** complex(-0.5, tt)
            E = euler_ratio(f, l1, l2, 1.0).value
            parts.append(w * c * E * math.log(p.x / l2))
    return p.phi_Q * p.G * _fsum_c(parts)


# ---------------------------------------------------------------- smoothing experiment

@dataclass
class TSmoothingResult:
    rows: list  # (G, rel_err)
    slope: float
    intercept: float
    skipped: list
    termwise: list  # (G, termwise relative deviation)
    termwise_slope: float
    instance: dict


def _shift_terms(f: HeckeEigenform, l1: int, l2: int, Q: int, x: float, t: float):
    """Weights w and shifts rho = h0 Q / (m2 l2) over m1 l1 = m2 l2 + h0 Q, m1, m2 <= n_max."""
    N = truncation_length(x)
    A = f.materialize(N)
    n = np.arange(1, N + 1, dtype=float)
    a1 = np.zeros(N + 1, dtype=complex)
    a2 = np.zeros(N + 1, dtype=complex)
    Vn = kernel_V(n / x)
    a1[1:] = A[1:] * np.exp(-complex(0.5, t) * np.log(n)) * Vn
    a2[1:] = np.conj(A[1:]) * np.exp(-complex(0.5, -t) * np.log(n)) * Vn
    W, R = [], []
    h_top = (l1 * N - l2) // Q
    inv = pow(l2, -1, l1) if l1 != l2 else None
    for h in range(1, h_top + 1):
        if l1 == l2:
            if (h * Q) % l1:
                continue
            m2 = np.arange(1, N + 1)
        else:
            r = (-h * Q * inv) % l1
            m2 = np.arange(r if r else l1, N + 1, l1)
        m1 = (m2 * l2 + h * Q) // l1
        ok = m1 <= N
        m1, m2 = m1[ok], m2[ok]
        if m1.size == 0:
            continue
        W.append(a1[m1] * a2[m2])
        R.append(h * Q / (m2 * l2))
    if not W:
        return np.zeros(0, dtype=complex), np.zeros(0)
    return np.concatenate(W), np.concatenate(R)


def T_sums(f: HeckeEigenform, l1: int, l2: int, Q: int, G: float, x: float, t: float = 0.0):
    """(T_o1, T_tilde): kernels exp(-G log(1 + rho)) and exp(-G rho) over the same shifted pairs."""
    W, R = _shift_terms(f, l1, l2, Q, x, t)
    return _fsum_c([W * np.exp(-G * np.log1p(R))]), _fsum_c([W * np.exp(-G * R)])


def large_shift_check(f: HeckeEigenform, l1: int, l2: int, Q: int, G: float, x: float, t: float = 0.0):
    """Effect on T_o1 of removing terms with h0 Q >= m2 l2, against exp(-G log 2) times their weight mass.

    Returns (change, weighted_bound, count_bound, count).
    """
    W, R = _shift_terms(f, l1, l2, Q, x, t)
    big = R >= 1.0
    change = abs(_fsum_c([W[big] * np.exp(-G * np.log1p(R[big]))]))
    e = math.exp(-G * math.log(2.0))
    return change, e * float(np.sum(np.abs(W[big]))), e * int(big.sum()), int(big.sum())


def compare_T_smoothing(f: HeckeEigenform, l1: int, l2: int, Q: int, G_list, x: float, t: float = 0.0) -> TSmoothingResult:
    """Relative error |T_o1 - T_tilde| / |T_tilde| for each G, and its log-log slope in G."""
    G_list = [float(g) for g in G_list]
    if len(G_list) < 4 or any(b <= a for a, b in zip(G_list, G_list[1:])) or G_list[0] < 20:
        raise ValueError("G_list must be increasing, with >= 4 values, each >= 20")
    W, R = _shift_terms(f, l1, l2, Q, x, t)
    absW = np.abs(W)
    rows, skipped, termwise = [], [], []
    for G in G_list:
        k1 = np.exp(-G * np.log1p(R))
        k2 = np.exp(-G * R)
        To1 = _fsum_c([W * k1])
        Tt = _fsum_c([W * k2])
        if abs(Tt) < 1e-300:
            skipped.append(G)
            continue
        rows.append((G, abs(To1 - Tt) / abs(Tt)))
        dev, ref = absW * np.abs(k1 - k2), absW * k2
        termwise.append((G, math.fsum(dev[dev != 0].tolist()) / math.fsum(ref[ref != 0].tolist())))

    def fit(pts):
        if len(pts) < 2:
            return math.nan, math.nan
        lg = np.log([g for g, _ in pts])
        le = np.log([max(e, 1e-300) for _, e in pts])
        slope, icpt = np.polyfit(lg, le, 1)
        return float(slope), float(icpt)

    slope, icpt = fit(rows)
    tslope, _ = fit(termwise)
    inst = {"l1": l1, "l2": l2, "Q": Q, "x": x, "t": t, "terms": int(W.size)}
    return TSmoothingResult(rows, slope, icpt, skipped, termwise, tslope, inst)


# ---------------------------------------------------------------- amplification inequality

@dataclass(frozen=True)
class InequalityCheck:
    lhs: float
    rhs: float
    holds: bool


def amplifier_inequality_check(
    p: AmplifierParams, f: HeckeEigenform, chi: DirichletCharacter, x: float | None = None
) -> InequalityCheck:
    """|L(chi)|^2 |sum_l 1|^2 against sum_psi |L(psi)|^2 |sum_l conj(chi(l)) psi(l)|^2, smoothed L on both sides."""
    _check_chi(p, chi)
    x = p.x if x is None else x
    group = character_group(p.Q)
    ls = np.array(p.primes, dtype=np.int64)
    Lchi = smoothed_L(f, chi, p.t, x)
    lhs = abs(Lchi) ** 2 * len(ls) ** 2
    conj_chi_l = np.conj(chi.values(ls)) if len(ls) else np.zeros(0)
    parts = []
    for psi in group:
        amp = _fsum_c([conj_chi_l * psi.values(ls)]) if len(ls) else 0j
        parts.append(abs(smoothed_L(f, psi, p.t, x)) ** 2 * abs(amp) ** 2)
    rhs = math.fsum(parts)
    return InequalityCheck(lhs, rhs, lhs <= rhs * (1 + 1e-9))
