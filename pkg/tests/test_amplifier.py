import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from twistlab.amplifier import (
    amplifier_inequality_check,
    cauchy_kernel_mass,
    compare_T_smoothing,
    compute_decomposition,
    compute_S_d1,
    compute_S_d2,
    compute_S_direct,
    derive_params,
    large_shift_check,
    predict_S_d1,
    predict_S_d2_main,
    T_sums,
    theorem_G,
)
from twistlab.characters import character_group
from twistlab.ntheory import euler_phi
from twistlab.special import kernel_V


def pair_loop(p, f, chi):
    """Plain-Python sum over all ((m1, l1), (m2, l2)) with m1 l1 = m2 l2 mod Q."""
    n_max = math.ceil(2.06 * p.x)
    tt, al = p.t_tilde, p.alpha
    terms = []
    for l in p.primes:
        for m in range(1, n_max + 1):
            u = (f.coefficient(m) * chi(l).conjugate() * l**al * m ** complex(-0.5, -tt)
                 * math.exp(-((m / p.x) ** 5)))
            terms.append((m * l, u))
    total = 0j
    for P1, u1 in terms:
        for P2, u2 in terms:
            if (P1 - P2) % p.Q == 0:
                total += u1 * u2.conjugate() * p.G * math.exp(-p.G * abs(math.log(P1 / P2)))
    return euler_phi(p.Q) * total


def test_theorem_params():
    p = derive_params(10007, 2.0)
    assert p.G == pytest.approx(3.0 ** (2 / (3 - 14 / 64)) * math.log(10007) ** 5)
    assert p.L == pytest.approx(10007**0.25)
    assert all(p.L < l <= 2 * p.L for l in p.primes) and p.primes
    assert p.x == pytest.approx(3 * 10007 * 3.0)
    assert p.theta == Fraction(7, 64)
    assert p.n_max == math.ceil(2.06 * p.x)
    assert p.alpha == pytest.approx(1 / math.log(10007 * 3))
    assert p.A == pytest.approx(math.sqrt(10 * math.log(10007 * 3)))


def test_manual_params_and_notes():
    p = derive_params(11, 0.0, mode="manual", G=3.0, primes=[2, 3], x=40)
    assert p.primes == (2, 3) and p.G == 3.0
    assert any("below 2A" in n for n in p.notes)
    with pytest.raises(ValueError, match="coprime"):
        derive_params(12, mode="manual", primes=[2, 5])
    with pytest.raises(ValueError):
        derive_params(2)
    with pytest.raises(ValueError):
        derive_params(11, mode="bogus")
    assert theorem_G(101, 0.0) == pytest.approx(math.log(101) ** 5)


@pytest.mark.parametrize("G,theta", [(1.0, 0.3), (12.0, 0.05), (40.0, 0.0), (5.0, -0.2)])
def test_cauchy_kernel_mass(G, theta):
    dens = lambda r: 1.0 / (math.pi * (1.0 + (r / G) ** 2))
    if theta == 0.0:
        val = 2 * quad(dens, 0, math.inf)[0]
    else:
        val = 2 * quad(dens, 0, math.inf, weight="cos", wvar=abs(theta))[0]
    assert cauchy_kernel_mass(G, theta) == pytest.approx(val, rel=1e-7)


def test_direct_kernel_from_integral_form(delta):
    """Each class as int |sum u_i P_i^(-ir)|^2 dr / (pi (1 + (r/G)^2)), integrated numerically.

    The diagonal part integrates to G sum |u_i|^2 exactly; the oscillating rest is
    integrated on [-R, R] by Gauss-Legendre panels, and its tails are bounded by
    integration by parts: |int_R^inf cos(theta r + c) k(r) dr| <= 2 k(R) / |theta|.
    """
    p = derive_params(7, 0.0, mode="manual", G=2.0, primes=[2, 3], x=4.0)
    chi = character_group(7)[1]
    G, R = p.G, 3000.0
    nodes, weights = np.polynomial.legendre.leggauss(16)
    edges = np.arange(-R, R + 0.25, 0.5)
    r = (0.25 * nodes[None, :] + 0.5 * (edges[:-1, None] + edges[1:, None])).ravel()
    w = np.tile(0.25 * weights, len(edges) - 1)
    kern = 1.0 / (math.pi * (1.0 + (r / G) ** 2))
    by_class = {}
    for l in p.primes:
        for m in range(1, p.n_max + 1):
            u = delta.coefficient(m) * chi(l).conjugate() * l**p.alpha * m**-0.5 * kernel_V(m / p.x)
            cls = by_class.setdefault((m * l) % 7, {})
            cls[m * l] = cls.get(m * l, 0j) + u  # equal products share one frequency
    total, tail = 0.0, 0.0
    kR = 1.0 / (math.pi * (1.0 + (R / G) ** 2))
    for members in by_class.values():
        P = np.array(list(members), dtype=float)
        u = np.array(list(members.values()))
        diag = float(np.sum(np.abs(u) ** 2))
        z = np.exp(-1j * np.outer(r, np.log(P))) @ u
        total += G * diag + float(np.sum(w * kern * (np.abs(z) ** 2 - diag)))
        for i in range(len(P)):
            for j in range(len(P)):
                if i != j:
                    tail += 2 * 2 * kR * abs(u[i] * u[j]) / abs(math.log(P[i] / P[j]))
    got = compute_S_direct(p, delta, chi)
    assert abs(got - euler_phi(7) * total) <= euler_phi(7) * tail + 1e-10 * abs(got)
    assert euler_phi(7) * tail < 1e-4 * abs(got)


@settings(max_examples=15)
@given(
    Q=st.sampled_from([5, 7, 11, 12, 13]),
    primes=st.sampled_from([(17,), (17, 19), (19, 23, 29)]),
    t=st.floats(-3, 3),
    G=st.floats(1.0, 30.0),
    x=st.floats(5.0, 14.0),
    idx=st.integers(0, 3),
)
def test_decomposition_matches_pair_loop(delta, Q, primes, t, G, x, idx):
    p = derive_params(Q, t, mode="manual", G=G, primes=primes, x=x)
    chi = character_group(Q)[idx]
    ref = pair_loop(p, delta, chi)
    d = compute_decomposition(p, delta, chi)
    assert abs(ref.imag) <= 1e-12 * abs(ref)
    assert d.S_direct == pytest.approx(ref.real, rel=1e-11)
    assert d.total.real == pytest.approx(ref.real, rel=1e-11)
    assert abs(d.S_o2 - np.conj(d.S_o1)) <= 1e-12 * max(1.0, abs(d.S_o1))


def test_pairs_and_recursive_agree_and_threads_invariant(delta):
    p = derive_params(101, 1.5, mode="manual", G=25.0, primes=[2, 3, 5], x=300)
    chi = character_group(101)[7]
    a = compute_S_direct(p, delta, chi, "pairs")
    b = compute_S_direct(p, delta, chi, "recursive")
    assert b == pytest.approx(a, rel=1e-12)
    d1 = compute_decomposition(p, delta, chi, threads=1)
    d4 = compute_decomposition(p, delta, chi, threads=4)
    assert d1.as_dict() == d4.as_dict()


def test_S_d1_independent_of_chi_and_t(delta):
    # t enters only through alpha, so normalize by sum_l l^(2 alpha)
    vals = set()
    for t, idx in [(0.0, 1), (4.0, 1), (0.0, 5), (4.0, 7)]:
        p = derive_params(13, t, mode="manual", G=10.0, primes=[2, 3], x=80)
        S = compute_decomposition(p, delta, character_group(13)[idx], include_direct=False).S_d1
        vals.add(round(S.real / math.fsum(l ** (2 * p.alpha) for l in p.primes), 9))
    assert len(vals) == 1


def test_empty_offdiagonal_for_large_modulus(delta):
    # ma la - mb lb ranges inside (-Q, Q) when la * n_max < Q
    p = derive_params(2003, 0.0, mode="manual", G=12.0, primes=[2, 3], x=100)
    d = compute_decomposition(p, delta, character_group(2003)[1])
    assert d.S_o1 == 0 and d.S_o2 == 0
    assert d.truncation["o1"]["pairs"] == 0


def test_diagonal_prediction_remainder_is_bounded(delta):
    resid = []
    for x in (1e2, 1e3, 1e4):
        p = derive_params(101, 0.0, x=x)
        S_d1 = compute_S_d1(p, delta)
        pred = predict_S_d1(p, delta, 0.38408)
        assert abs(S_d1 - pred.main) < pred.error_envelope
        resid.append((S_d1 - pred.main) / (p.phi_Q * p.G * math.fsum(l ** (2 * p.alpha) for l in p.primes)))
    # the remainder is O(1): flat in x while the main term grows by log(100)
    assert max(resid) - min(resid) < 0.01


@pytest.mark.parametrize("idx", [1, 3])
def test_S_d2_main_term_carries_the_log_growth(delta, idx):
    chi = character_group(101)[idx]
    got, main = [], []
    for x in (1e3, 1e4):
        p = derive_params(101, 0.7, mode="manual", G=20.0, primes=[2, 3], x=x)
        got.append(compute_S_d2(p, delta, chi))
        main.append(predict_S_d2_main(p, delta, chi, 0.38408))
    growth, predicted = got[1] - got[0], main[1] - main[0]
    assert abs(growth - predicted) < 0.01 * abs(predicted)


def test_large_shift_check(delta):
    change, wbound, cbound, count = large_shift_check(delta, 2, 3, 5, 40.0, 600)
    assert count > 0
    assert change <= wbound
    To1, Tt = T_sums(delta, 2, 3, 5, 40.0, 600)
    assert abs(To1) > 0 and abs(Tt) > 0


def test_compare_T_smoothing_shape(delta):
    r = compare_T_smoothing(delta, 2, 3, 5, [20, 40, 80, 160], 500)
    assert len(r.rows) + len(r.skipped) == 4
    assert all(e >= 0 for _, e in r.rows)
    with pytest.raises(ValueError):
        compare_T_smoothing(delta, 2, 3, 5, [20, 40, 80], 500)
    with pytest.raises(ValueError):
        compare_T_smoothing(delta, 2, 3, 5, [10, 40, 80, 160], 500)


@pytest.mark.parametrize("Q", [7, 11, 13])
def test_amplifier_inequality_all_characters(delta, Q):
    p = derive_params(Q, 1.0, mode="manual", G=10.0, primes=[2, 3, 5], x=60)
    for chi in character_group(Q):
        assert amplifier_inequality_check(p, delta, chi).holds


def test_character_modulus_mismatch(delta):
    p = derive_params(11, mode="manual", G=10.0, primes=[2], x=20)
    with pytest.raises(ValueError, match="modulus"):
        compute_S_direct(p, delta, character_group(13)[1])
