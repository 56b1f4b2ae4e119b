"""The weighted curvature functional and classical baseline integrals.

For a profile q and a positive monotone weight psi the functional is

    F(q, psi, a, b) = int_a^b psi q / (psi^2 + q) dr  +  correction,

where the correction is ``-1/4 log(psi(a)/psi(b))`` when psi is declared
non-increasing and zero otherwise.  Along a ray F <= 1; exceeding 1 for
every direction from a point forces compactness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, UnboundedDomainError
from .profiles import NON_INCREASING, RadialProfile, TestFunction
from .quadrature import Quadrature, integrate_adaptive

DEFAULT_TOL = 1e-10
# doubling cap for the truncation radius of improper integrals
_MAX_DOUBLINGS = 200


@dataclass(frozen=True)
class FunctionalValue:
    integral: float
    correction: float
    value: float
    abs_error_estimate: float
    truncated_at: float | None = None

    def to_dict(self) -> dict:
        return {
            "integral": self.integral,
            "correction": self.correction,
            "value": self.value,
            "abs_error_estimate": self.abs_error_estimate,
            "truncated_at": self.truncated_at,
        }


class Comparison(NamedTuple):
    """Two sides of an inequality plus the quadrature error behind them."""

    lhs: float
    rhs: float
    error: float = 0.0

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs


def functional_integrand(q: RadialProfile, psi: TestFunction):
    """Return the vectorised integrand ``psi q / (psi^2 + q)``.

    Every evaluation is checked against the cap ``min(psi, q/psi)``.
    """

    def f(r):
        qv = q._eval(r)
        pv = psi._eval(r)
        out = pv * qv / (pv * pv + qv)
        cap = np.minimum(pv, qv / pv)
        assert np.all(out <= cap * (1 + 1e-12) + 1e-300), "integrand exceeds min(psi, q/psi)"
        return out

    return f


def _breaks(q: RadialProfile, psi: TestFunction | None, lo: float, hi: float) -> list[float]:
    pts = set(q.breakpoints(lo, hi))
    if psi is not None:
        pts.update(psi.breakpoints(lo, hi))
    return sorted(pts)


def _check_interval(q: RadialProfile, psi: TestFunction | None, a: float, b: float) -> None:
    if not b > a:
        raise DomainError(f"need a < b, got [{a}, {b}]")
    starts = [q.domain_start] + ([psi.domain_start] if psi is not None else [])
    if a < max(starts):
        raise DomainError(f"a={a} below domain start {max(starts)}")
    horizons = [q.horizon] + ([psi.horizon] if psi is not None else [])
    if b > min(horizons):
        if math.isinf(b):
            raise UnboundedDomainError("profile or test function has a finite horizon")
        raise DomainError(f"b={b} beyond horizon {min(horizons)}")


def truncation_radius(q: RadialProfile, a: float, tail_tol: float, psi_floor=None) -> float:
    """Smallest radius R = max(a, 1) * 2**k whose tail bound is <= tail_tol.

    ``psi_floor(R)`` gives a positive lower bound of psi on [R, inf); the
    integrand tail is bounded by ``tail_bound(R) / psi_floor(R)``.
    """
    R = max(a, 1.0)
    for _ in range(_MAX_DOUBLINGS):
        tail = q.tail_bound(R)
        if math.isinf(tail):
            raise UnboundedDomainError(f"{q.family} profile has a divergent tail")
        floor = 1.0 if psi_floor is None else psi_floor(R)
        if floor > 0 and tail / floor <= tail_tol:
            return R
        R *= 2.0
    raise UnboundedDomainError("no finite truncation radius meets the tail tolerance")


def eval_F(
    q: RadialProfile,
    psi: TestFunction,
    a: float,
    b: float = math.inf,
    tol: float = DEFAULT_TOL,
) -> FunctionalValue:
    """Evaluate the functional on [a, b]; ``b`` may be ``math.inf``.

    Infinite intervals are truncated at the first doubling radius R* where
    the tail of the integrand is certified below tol/10.
    """
    _check_interval(q, psi, a, b)
    psi.check_monotone(a, b)

    truncated_at = None
    tail = 0.0
    upper = b
    if math.isinf(b):
        if psi.inf_on_tail(max(a, 1.0) * 2.0**_MAX_DOUBLINGS) <= 0:
            raise UnboundedDomainError("test function is not bounded away from zero on a tail")
        upper = truncation_radius(q, a, tol / 10, psi.inf_on_tail)
        tail = q.tail_bound(upper) / psi.inf_on_tail(upper)
        truncated_at = upper

    if upper > a:
        quad = integrate_adaptive(functional_integrand(q, psi), a, upper, 0.9 * tol,
                                  _breaks(q, psi, a, upper))
    else:
        quad = Quadrature(0.0, 0.0)
    integral = quad.value

    correction = 0.0
    if psi.monotonicity == NON_INCREASING:
        psi_b = psi.limit_at_infinity() if math.isinf(b) else psi(b)
        correction = -0.25 * math.log(psi(a) / psi_b)
    return FunctionalValue(
        integral=integral,
        correction=correction,
        value=integral + correction,
        abs_error_estimate=quad.error + tail,
        truncated_at=truncated_at,
    )


def eval_segment_criterion(
    q: RadialProfile, psi: TestFunction, l: float, tol: float = DEFAULT_TOL
) -> Comparison:
    """Both sides of the segment criterion on [0, l].

    ``lhs >= rhs`` bounds the diameter by l; along a segment ending at its
    first conjugate point ``lhs < rhs``.
    """
    if not l > 0:
        raise DomainError(f"need l > 0, got {l}")
    _check_interval(q, psi, 0.0, l)
    psi.check_monotone(0.0, l)
    quad = integrate_adaptive(functional_integrand(q, psi), 0.0, l, tol, _breaks(q, psi, 0.0, l))
    rhs = 2.0 + 0.25 * abs(math.log(psi(l) / psi(0.0)))
    return Comparison(quad.value, rhs, quad.error)


def mean_curvature_lower_bound(F: FunctionalValue | float, psi: TestFunction, a: float) -> float:
    """Lower bound ``psi(a) F / (1 - F)`` on the mean curvature at ``a``.

    Infinite when ``F >= 1``, i.e. when no ray can realise the data.
    """
    value = F.value if isinstance(F, FunctionalValue) else float(F)
    if value >= 1.0:
        return math.inf
    return psi(a) * value / (1.0 - value)


def calabi_bound(q: RadialProfile, a: float, b: float, tol: float = DEFAULT_TOL) -> Comparison:
    """Calabi's estimate: int_a^b sqrt(q) against sqrt(log^2(b/a)/4 + log(b/a))."""
    if not 0 < a < b or math.isinf(b):
        raise DomainError(f"calabi_bound needs 0 < a < b < inf, got [{a}, {b}]")
    _check_interval(q, None, a, b)
    quad = integrate_adaptive(lambda r: np.sqrt(q._eval(r)), a, b, tol, _breaks(q, None, a, b))
    L = math.log(b / a)
    return Comparison(quad.value, math.sqrt(0.25 * L * L + L), quad.error)


def ray_tail_check(q: RadialProfile, a: float, tol: float = DEFAULT_TOL) -> Comparison:
    """Tail integral of q from a against 1/a.

    Along a ray the tail is at most 1/a, so ``lhs > rhs`` rules out rays
    from the base point.
    """
    if not a > 0:
        raise DomainError(f"ray_tail_check needs a > 0, got {a}")
    _check_interval(q, None, a, math.inf)
    R = truncation_radius(q, a, tol / 10)
    tail = q.tail_bound(R)
    if R > a:
        quad = integrate_adaptive(q._eval, a, R, 0.9 * tol, _breaks(q, None, a, R))
    else:
        quad = Quadrature(0.0, 0.0)
    return Comparison(quad.value, 1.0 / a, quad.error + tail)


__all__ = [
    "FunctionalValue", "Comparison", "integrate_adaptive", "eval_F",
    "eval_segment_criterion", "mean_curvature_lower_bound", "calabi_bound",
    "ray_tail_check", "functional_integrand", "truncation_radius",
]
