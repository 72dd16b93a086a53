import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twistlab.forms import (
    EigenformParseError,
    HeckeEigenform,
    TableExhaustedError,
    b_constant,
    delta_form,
    eta24_expansion,
    euler_ratio,
    load_form,
    rankin_selberg_constant,
    rankin_selberg_probe,
    smoothed_square_mass,
)
from twistlab.ntheory import divisor_count_table, primes_up_to

# Petersson norm of Delta (standard literature value), used only as an outside check
PETERSSON_DELTA = 1.035362056804320922e-6


def naive_tau(n_max):
    """q prod (1 - q^n)^24 by exact integer polynomial multiplication."""
    poly = [1] + [0] * (n_max - 1)  # coefficients of q^0..q^(n_max-1) of prod (1-q^n)^24
    for n in range(1, n_max):
        for _ in range(24):
            for k in range(n_max - 1, n - 1, -1):
                poly[k] -= poly[k - n]
    return poly  # tau(m) = poly[m - 1]


@pytest.fixture(scope="module")
def tau_oracle():
    return naive_tau(400)


def test_eta_expansion_matches_naive_product(tau_oracle):
    assert eta24_expansion(400) == tau_oracle


def test_known_tau_values():
    tau = eta24_expansion(10)
    assert tau == [1, -24, 252, -1472, 4830, -6048, -16744, 84480, -113643, -115920]


def test_hecke_coefficients_match_naive_product(delta, tau_oracle):
    A = delta.materialize(400)
    n = np.arange(1, 401, dtype=float)
    expect = np.array(tau_oracle, dtype=float) / n**5.5
    assert np.max(np.abs(A[1:] - expect) / np.maximum(np.abs(expect), 1e-300)) < 1e-12


@given(st.integers(1, 3000), st.integers(1, 3000))
def test_multiplicative_on_coprime(delta, m, n):
    if math.gcd(m, n) != 1:
        return
    assert abs(delta.coefficient(m * n) - delta.coefficient(m) * delta.coefficient(n)) < 1e-9


@given(st.sampled_from([2, 3, 5, 7, 11, 13]), st.integers(1, 12))
def test_hecke_relation(delta, p, r):
    lhs = delta.prime_power(p, 1) * delta.prime_power(p, r)
    rhs = delta.prime_power(p, r + 1) + delta.prime_power(p, r - 1)
    assert abs(lhs - rhs) < 1e-9


def test_materialize_matches_coefficient(delta):
    A = delta.materialize(5000)
    for n in (1, 2, 64, 720, 2310, 4096, 4999):
        assert A[n] == pytest.approx(delta.coefficient(n), rel=1e-12)
    assert not A.flags.writeable


def test_deligne_bound(delta):
    A = delta.materialize(10**5)
    d = divisor_count_table(10**5)
    assert np.all(np.abs(A[1:]) <= d[1:])


def test_table_exhausted():
    f = delta_form(100)
    assert f.coefficient(97 * 89) != 0
    with pytest.raises(TableExhaustedError):
        f.coefficient(101)
    with pytest.raises(TableExhaustedError):
        f.materialize(200)


def test_toml_roundtrip_and_errors(tmp_path):
    f = delta_form(200)
    path = tmp_path / "delta200.toml"
    path.write_text(f.to_toml())
    g = load_form(str(path))
    assert (g.weight, g.level) == (12, 1)
    assert np.array_equal(g.materialize(199), f.materialize(199))
    with pytest.raises(EigenformParseError, match="weight"):
        HeckeEigenform.from_toml('weight = "twelve"\nlevel = 1\nprimes = [[2, -24]]\n')
    with pytest.raises(EigenformParseError, match="line 3"):
        HeckeEigenform.from_toml("weight = 12\nlevel = 1\nprimes = [[2]]\n")
    with pytest.raises(EigenformParseError, match="level"):
        HeckeEigenform.from_toml("weight = 12\nlevel = 4\nprimes = [[2, -24]]\n")


def test_form_validation():
    with pytest.raises(ValueError):
        HeckeEigenform(11, 1, {2: 1.0})
    with pytest.raises(ValueError):
        HeckeEigenform(12, 1, {4: 1.0})


def smooth_ratio(f, l1, l2, s, bound=1e40):
    """Both series restricted to m = l1^a l2^b; the coprime part cancels."""
    num = den = 0.0
    a = 0
    while l1**a <= bound:
        b = 0
        while l1**a * l2**b <= bound:
            w = float(l1**a * l2**b) ** (-s)
            pa, pb = f.prime_power(l1, a), f.prime_power(l2, b)
            num += pa * f.prime_power(l2, b + 1) * f.prime_power(l1, a + 1) * pb * w
            den += (pa * pb) ** 2 * w
            b += 1
        a += 1
    return num / den


@pytest.mark.parametrize("l1,l2", [(2, 3), (3, 2), (3, 7), (5, 13), (19, 2)])
@pytest.mark.parametrize("s", [1.0, 2.0, 0.6])
def test_euler_ratio_vs_smooth_series(delta, l1, l2, s):
    E = euler_ratio(delta, l1, l2, s).value
    assert abs(E - smooth_ratio(delta, l1, l2, s)) < 1e-10 * max(1, abs(E))


def test_euler_ratio_vs_naive_truncation(delta):
    # plain truncation at M = 3e4 leaves a relative error of a few 1e-6 at s = 2
    M = 3 * 10**4
    A = delta.materialize(3 * M)
    m = np.arange(1, M + 1)
    num = math.fsum((A[3 * m] * A[2 * m] * m**-2.0).tolist())
    den = math.fsum((A[m] ** 2 * m**-2.0).tolist())
    E = euler_ratio(delta, 2, 3, 2.0).value.real
    assert abs(E - num / den) < 1e-5 * abs(E)


def test_euler_ratio_large_s_limit(delta):
    E = euler_ratio(delta, 2, 5, 40.0).value
    assert abs(E - delta.coefficient(2) * delta.coefficient(5)) < 1e-9


def test_euler_ratio_domain(delta):
    with pytest.raises(ValueError):
        euler_ratio(delta, 3, 3, 1.0)
    with pytest.raises(ValueError):
        euler_ratio(delta, 4, 3, 1.0)
    with pytest.raises(ValueError):
        euler_ratio(delta, 2, 3, -0.5)


def test_b_constant(delta):
    assert b_constant(delta, 7, 7) == 1 / 7
    assert b_constant(delta, 2, 3) == pytest.approx(euler_ratio(delta, 2, 3, 1.0).value.real / 6, rel=1e-15)


def test_rankin_selberg_routes_agree(delta):
    fit = rankin_selberg_constant(delta, [1e2, 10**2.5, 1e3, 10**3.5, 1e4])
    probe = rankin_selberg_probe(delta)
    literature = 3 * (4 * math.pi) ** 12 * PETERSSON_DELTA / (math.pi * math.gamma(12))
    assert fit.asymptotic
    assert abs(fit.c - probe.c) / probe.c < 0.02
    assert abs(fit.c - literature) / literature < 0.01
    assert abs(probe.c - literature) / literature < 0.01
    # the single-w probe is biased by g*w
    assert abs(probe.raw_probe - probe.c - probe.constant_term * probe.w[0]) < 1e-6


def test_smoothed_square_mass_grows_like_log(delta):
    a, b = smoothed_square_mass(delta, 1e3), smoothed_square_mass(delta, 1e4)
    assert 0.3 < (b - a) / math.log(10) < 0.45


def test_rankin_selberg_needs_a_decade(delta):
    with pytest.raises(ValueError):
        rankin_selberg_constant(delta, [100, 200, 300, 400])
