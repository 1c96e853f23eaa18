import math

import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from evonet.errors import DenominatorVanishes, Divergent, DomainError, NoConvergence
from evonet.quadrature import (
    IntegrandSpec,
    gamma_ratio_asymptotic,
    geometric_eps,
    integrate_singular,
    limit_ratio_eps_to_zero,
)

# mpmath.quad at 40 digits of z^2 (1-z)^4 (3/2-z)^-4 on (0, 1)
G_EX1 = 0.0076277020974023784


def test_example1_tail_integral():
    spec = IntegrandSpec(alpha=2, beta=4, delta=-4, c=1.5)
    res = integrate_singular(spec, 0, 1, tol=1e-10)
    assert res.converged
    assert res.value == pytest.approx(G_EX1, rel=1e-12)
    # identity tying the integral to the head: (19/2) P(0) = (171/4) g
    assert 9.5 * (47 - 171 / 4 * math.log(3)) == pytest.approx(171 / 4 * res.value, rel=1e-12)
    assert res.abs_error_estimate <= 1e-10


def test_constant_integrand():
    assert integrate_singular(IntegrandSpec(), 0, 1).value == pytest.approx(1.0, abs=1e-14)


def test_divergent_endpoint():
    with pytest.raises(Divergent):
        integrate_singular(IntegrandSpec(alpha=-1.5), 0, 1)
    with pytest.raises(Divergent):
        integrate_singular(IntegrandSpec(beta=-1.0), 0, 1)
    with pytest.raises(Divergent):
        integrate_singular(IntegrandSpec(exp_kind="inv_z", exp_coef=2.0), 0, 1)


def test_interior_singularity_split():
    # |z - 1/2|^-0.5 on (0, 1) = 2 * 2 * sqrt(1/2)
    spec = IntegrandSpec(delta=-0.5, c=0.5)
    assert integrate_singular(spec, 0, 1).value == pytest.approx(4 * math.sqrt(0.5), rel=1e-12)
    with pytest.raises(Divergent):
        integrate_singular(IntegrandSpec(delta=-1.0, c=0.5), 0, 1)


def test_exponential_forms():
    # int_0^1 exp(-2 z) = (1 - e^-2)/2
    lin = IntegrandSpec(exp_kind="lin", exp_coef=-2.0)
    assert integrate_singular(lin, 0, 1).value == pytest.approx(-math.expm1(-2) / 2, rel=1e-13)
    # int_0^1 exp(-1/z) dz = e^-1 - E1(1)
    inv = IntegrandSpec(exp_kind="inv_z", exp_coef=-1.0)
    assert integrate_singular(inv, 0, 1).value == pytest.approx(math.exp(-1) - special.exp1(1), rel=1e-12)
    # int_0^1 exp(1/(z-1)) dz is the same integral mirrored
    inv1 = IntegrandSpec(exp_kind="inv_zm1", exp_coef=1.0)
    assert integrate_singular(inv1, 0, 1).value == pytest.approx(math.exp(-1) - special.exp1(1), rel=1e-12)


BETA_ARGS = [0.5, 1, 2.5, 5]


@pytest.mark.parametrize("a", BETA_ARGS)
@pytest.mark.parametrize("b", BETA_ARGS)
def test_beta_identity(a, b):
    tol = 1e-12
    res = integrate_singular(IntegrandSpec(alpha=a - 1, beta=b - 1), 0, 1, tol=tol)
    assert abs(res.value - special.beta(a, b)) <= 10 * max(tol, 1e-11 * special.beta(a, b))


@settings(max_examples=40, deadline=None)
@given(
    st.floats(-0.9, 6), st.floats(-0.9, 6), st.floats(-0.9, 3),
    st.floats(1.05, 3), st.floats(0.05, 0.95),
)
def test_split_additivity(alpha, beta, delta, c, x):
    spec = IntegrandSpec(alpha=alpha, beta=beta, delta=delta, c=c)
    tol = 1e-12
    whole = integrate_singular(spec, 0, 1, tol=tol).value
    parts = integrate_singular(spec, 0, x, tol=tol).value + integrate_singular(spec, x, 1, tol=tol).value
    assert abs(whole - parts) <= 2 * max(tol, 1e-11 * abs(whole))


def test_large_power_integrand():
    # Beta(501, 5) stresses the sharp peak near 1
    res = integrate_singular(IntegrandSpec(alpha=500, beta=4), 0, 1)
    assert res.value == pytest.approx(special.beta(501, 5), rel=1e-10)


def test_limit_linear_probe():
    res = limit_ratio_eps_to_zero(lambda e: e + 0.25, lambda e: 1.0)
    assert res.value == pytest.approx(0.25, abs=1e-13)


def test_limit_fractional_power():
    res = limit_ratio_eps_to_zero(lambda e: 0.25 + 3 * e**0.37, lambda e: 1 + e**1.5)
    assert res.value == pytest.approx(0.25, abs=1e-9)


def test_limit_denominator_vanishes():
    with pytest.raises(DenominatorVanishes):
        limit_ratio_eps_to_zero(lambda e: 1.0, lambda e: 0.0)


def test_limit_oscillation():
    with pytest.raises(NoConvergence):
        limit_ratio_eps_to_zero(lambda e: math.sin(1 / e), lambda e: 1.0)


def test_geometric_eps():
    eps = geometric_eps()
    assert eps[0] == 1e-2 and eps[1] == 5e-3 and len(eps) == 16


def test_gamma_ratio_examples():
    assert gamma_ratio_asymptotic(37, 2.5, 0) == 1.0
    assert gamma_ratio_asymptotic(10, 0, 1) == pytest.approx(1.0, abs=1e-14)
    val = gamma_ratio_asymptotic(10_000, 0.5, 4)
    # k^4 Gamma(k + 1/2) / Gamma(k + 9/2) at k = 1e4, mpmath with 40 digits
    assert val == pytest.approx(0.99920042481007753873, rel=1e-12)
    assert abs(val - 1) < 1e-3


def test_gamma_ratio_large_k_no_overflow():
    assert math.isfinite(gamma_ratio_asymptotic(10**6, 3.0, 7.5))
    with pytest.raises(DomainError):
        gamma_ratio_asymptotic(1, -5, 2)


@given(st.floats(0.1, 5), st.floats(0.5, 8))
def test_gamma_ratio_monotone(k0, gamma):
    ks = [10**j for j in range(3, 7)]
    dev = [abs(gamma_ratio_asymptotic(k, k0, gamma) - 1) for k in ks]
    assert all(b <= a + 1e-15 for a, b in zip(dev, dev[1:]))
