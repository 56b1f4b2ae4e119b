import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from bonnetmyers.errors import DomainError, MonotonicityError, UnboundedDomainError
from bonnetmyers.functional import (
    calabi_bound, eval_F, eval_segment_criterion, functional_integrand,
    mean_curvature_lower_bound, ray_tail_check, truncation_radius,
)
from bonnetmyers.profiles import (
    NON_INCREASING, Constant, ConstantPsi, ExpDecay, PolyDecay, PowerPsi, SampledPsi,
    SqrtProfilePsi,
)


def oracle_F(q, psi, a, b):
    """scipy.quad value of the functional, correction taken from psi directly."""
    f = lambda r: float(psi(r) * q(r) / (psi(r) ** 2 + q(r)))
    pts = [x for x in (getattr(q, "cutoff", None),) if x is not None and a < x < b]
    val, _ = quad(f, a, b, points=pts or None, epsabs=1e-13, epsrel=1e-13, limit=500)
    if psi.monotonicity == NON_INCREASING:
        val -= 0.25 * math.log(psi(a) / psi(b))
    return val


@pytest.mark.parametrize("q, psi, a, b", [
    (Constant(1.0), ConstantPsi(1.0), 0.0, 3.0),
    (PolyDecay(16, 4, 1), PowerPsi(1.0, 0.5, shift=1.0), 0.0, 20.0),
    (PolyDecay(4, 1.5, 1), PowerPsi(1.0, -0.5, shift=1.0), 0.2, 15.0),
    (ExpDecay(20, 1), SqrtProfilePsi(ExpDecay(20, 1)), 0.0, 10.0),
])
def test_matches_scipy_quad(q, psi, a, b):
    fv = eval_F(q, psi, a, b, 1e-12)
    assert fv.value == pytest.approx(oracle_F(q, psi, a, b), abs=1e-10)
    assert fv.truncated_at is None


def test_segment_example_value():
    # q = 1, psi = 10 on [0, pi]: integrand is the constant 10/101
    fv = eval_F(Constant(1.0), ConstantPsi(10.0), 0.0, math.pi)
    assert fv.value == pytest.approx(10 * math.pi / 101, rel=1e-12)


def test_exponential_log2_value():
    # c = 1, p = 1, x = 1 from 0: log(1 + 1) = log 2
    fv = eval_F(ExpDecay(1.0, 1.0), ConstantPsi(1.0), 0.0, math.inf)
    assert fv.value == pytest.approx(math.log(2), abs=1e-10)
    assert fv.truncated_at is not None
    assert fv.abs_error_estimate <= 1e-10


@pytest.mark.parametrize("c, x, a", [(2.0, 0.5, 1.0), (16.0, 1.3, 1.0), (0.3, 2.0, 3.0)])
def test_improper_poly_against_quad(c, x, a):
    q = PolyDecay(c, 4.0, a)
    exact, _ = quad(lambda r: x * c / r**4 / (x * x + c / r**4), a, np.inf, epsabs=1e-13)
    assert eval_F(q, ConstantPsi(x), a).value == pytest.approx(exact, abs=1e-10)


def test_sqrt_psi_poly_closed_form_p2():
    c, a, b = 3.0, 1.0, 40.0
    q = PolyDecay(c, 2.0, a)
    expected = (math.sqrt(c) / 2 - 0.25) * math.log(b / a)
    assert eval_F(q, SqrtProfilePsi(q), a, b, 1e-12).value == pytest.approx(expected, rel=1e-10)


def test_sqrt_psi_poly_closed_form_p_below_2():
    c, p, a, b = 1.0, 1.5, 1.0, 4.0
    q = PolyDecay(c, p, a)
    expected = math.sqrt(c) / (2 - p) * (b ** (1 - p / 2) - a ** (1 - p / 2)) - p / 8 * math.log(b / a)
    assert expected == pytest.approx(0.568497, abs=1e-6)
    assert eval_F(q, SqrtProfilePsi(q), a, b, 1e-12).value == pytest.approx(expected, rel=1e-10)


def test_integrand_respects_cap():
    q, psi = PolyDecay(4, 3, 1), PowerPsi(2.0, 0.5, shift=1.0)
    r = np.linspace(0, 30, 301)
    vals = functional_integrand(q, psi)(r)
    assert np.all(vals <= np.minimum(psi(r), q(r) / psi(r)) * (1 + 1e-12))


def test_divergent_tail_rejected():
    with pytest.raises(UnboundedDomainError):
        eval_F(Constant(1.0), ConstantPsi(1.0), 0.0)
    with pytest.raises(UnboundedDomainError):
        eval_F(PolyDecay(1.0, 4, 1), PowerPsi(1.0, 0.5, shift=1.0), 0.0)


def test_interval_validation():
    with pytest.raises(DomainError):
        eval_F(Constant(1.0), ConstantPsi(1.0), 2.0, 1.0)
    with pytest.raises(DomainError):
        eval_F(Constant(1.0, domain_start=1.0), ConstantPsi(1.0), 0.5, 2.0)


def test_non_monotone_psi_rejected_on_interval():
    psi = SampledPsi((0.0, 1.0, 2.0), (1.0, 2.0, 3.0), (1.0, 1.0, 1.0), "non_decreasing")
    assert eval_F(Constant(1.0), psi, 0.0, 2.0).value > 0
    with pytest.raises(MonotonicityError):
        SampledPsi((0.0, 1.0, 2.0), (1.0, 3.0, 2.0), (1.0, 0.0, 1.0), "non_decreasing")


def test_truncation_radius_meets_tail_tolerance():
    q = PolyDecay(5.0, 3.0, 1.0)
    R = truncation_radius(q, 1.0, 1e-11)
    assert q.tail_bound(R) <= 1e-11
    assert q.tail_bound(R / 2) > 1e-11 or R == 1.0


def test_segment_criterion_sphere():
    cmp = eval_segment_criterion(Constant(1.0), ConstantPsi(1.0), math.pi)
    assert cmp.lhs == pytest.approx(math.pi / 2, rel=1e-12)
    assert cmp.rhs == 2.0
    assert cmp.margin < 0


def test_segment_criterion_log_term():
    psi = PowerPsi(1.0, 0.5, shift=1.0)
    cmp = eval_segment_criterion(Constant(1.0), psi, 3.0)
    assert cmp.rhs == pytest.approx(2 + 0.25 * math.log(2.0), rel=1e-14)


def test_mean_curvature_bound():
    psi = ConstantPsi(2.0)
    assert mean_curvature_lower_bound(0.5, psi, 0.0) == pytest.approx(2.0)
    assert mean_curvature_lower_bound(1.0, psi, 0.0) == math.inf


def test_calabi_rhs():
    cmp = calabi_bound(Constant(1.0), 1.0, 1.1)
    assert cmp.rhs == pytest.approx(math.sqrt(0.25 * math.log(1.1) ** 2 + math.log(1.1)), rel=1e-15)
    assert cmp.rhs == pytest.approx(0.31238, abs=1e-5)
    assert cmp.lhs == pytest.approx(0.1, rel=1e-12)


def test_ray_tail_check():
    cmp = ray_tail_check(PolyDecay(0.5, 2.0, 1.0), 2.0)
    assert cmp.lhs == pytest.approx(0.25, abs=1e-10)
    assert cmp.rhs == 0.5


# -- properties --------------------------------------------------------------

_profiles = st.one_of(
    st.builds(Constant, st.floats(0.05, 10)),
    st.builds(PolyDecay, st.floats(0.05, 20), st.floats(1.2, 5), st.floats(0.3, 2)),
    st.builds(ExpDecay, st.floats(0.05, 20), st.floats(0.1, 3)),
)
_psis = st.one_of(
    st.builds(ConstantPsi, st.floats(0.1, 5)),
    st.builds(lambda k, al, s: PowerPsi(k, al, shift=s), st.floats(0.2, 5), st.floats(-1, 1), st.floats(0.5, 3)),
)


@settings(max_examples=30, deadline=None)
@given(q=_profiles, psi=_psis, factor=st.floats(1.0, 5.0), a=st.floats(0, 2), span=st.floats(0.5, 10))
def test_monotone_in_q(q, psi, factor, a, span):
    if isinstance(q, Constant):
        q2 = Constant(q.c * factor)
    elif isinstance(q, PolyDecay):
        q2 = PolyDecay(q.c * factor, q.p, q.cutoff)
    else:
        q2 = ExpDecay(q.c * factor, q.p)
    f1, f2 = eval_F(q, psi, a, a + span), eval_F(q2, psi, a, a + span)
    assert f1.integral <= f2.integral + 2 * (f1.abs_error_estimate + f2.abs_error_estimate)


@settings(max_examples=30, deadline=None)
@given(q=_profiles, psi=_psis, a=st.floats(0, 2), s1=st.floats(0.1, 5), s2=st.floats(0.1, 5))
def test_additive_over_split(q, psi, a, s1, s2):
    c, b = a + s1, a + s1 + s2
    whole = eval_F(q, psi, a, b).value
    split = eval_F(q, psi, a, c).value + eval_F(q, psi, c, b).value
    assert whole == pytest.approx(split, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(c=st.floats(0.1, 20), p=st.floats(1.5, 5), cut=st.floats(0.3, 2), k=st.floats(0.2, 5),
       alpha=st.floats(-1, 1), shift=st.floats(0.5, 3), lam=st.sampled_from([0.5, 2.0, 10.0]))
def test_scaling_invariance(c, p, cut, k, alpha, shift, lam):
    q, psi = PolyDecay(c, p, cut), PowerPsi(k, alpha, shift=shift)
    q_l = PolyDecay(lam ** (2 - p) * c, p, cut / lam)
    psi_l = PowerPsi(k * lam ** (1 - alpha), alpha, shift=shift / lam)
    base = eval_F(q, psi, 0.2, 7.0).value
    assert eval_F(q_l, psi_l, 0.2 / lam, 7.0 / lam).value == pytest.approx(base, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(c=st.floats(0.1, 20), p=st.floats(1.2, 5), R=st.floats(1, 100))
def test_tail_bound_dominates_quad(c, p, R):
    q = PolyDecay(c, p, 1.0)
    numeric, _ = quad(lambda r: c / r**p, R, np.inf, epsabs=1e-14)
    assert q.tail_bound(R) >= numeric * (1 - 1e-9)
