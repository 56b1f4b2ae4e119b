"""Compactness verdicts, diameter bounds and closed-form thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    DomainError,
    PositivityError,
    UnboundedDomainError,
    ValidationError,
)
from .functional import DEFAULT_TOL, _breaks, eval_F, functional_integrand
from .profiles import (
    ConstantPsi,
    ExpDecay,
    PolyDecay,
    PowerPsi,
    RadialProfile,
    SqrtProfilePsi,
    TestFunction,
)
from .quadrature import integrate_adaptive

COMPACT = "compact"
INCONCLUSIVE = "inconclusive"

RAY_ASSUMPTION = (
    "q is a lower bound for the averaged radial Ricci curvature along every "
    "geodesic from the base point"
)
DIAMETER_ASSUMPTION = (
    "q(r) bounds Ric from below at every point at distance r from the base point"
)

# strictness floor for declaring the criterion violated
MARGIN_FLOOR = 1e-9
X_MIN, X_MAX = 1e-9, 1e9
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Verdict:
    """Outcome of a compactness test.

    ``margin`` is measured against the effective threshold
    ``1 + max(1e-9, 3 * error)``, so ``kind == "compact"`` exactly when
    ``margin > 0``.
    """

    kind: str
    criterion_value: float
    margin: float
    witness: dict
    assumptions: str = RAY_ASSUMPTION
    error: float = 0.0
    threshold: float = 1.0
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "criterion_value": self.criterion_value,
            "margin": self.margin,
            "threshold": self.threshold,
            "abs_error_estimate": self.error,
            "witness": self.witness,
            "assumptions": self.assumptions,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class DiameterBound:
    l: float
    psi_used: dict
    lhs_at_l: float
    rhs_at_l: float
    assumptions: str = DIAMETER_ASSUMPTION

    def to_dict(self) -> dict:
        return {
            "l": self.l,
            "psi_used": self.psi_used,
            "lhs_at_l": self.lhs_at_l,
            "rhs_at_l": self.rhs_at_l,
            "assumptions": self.assumptions,
        }


class ConstantPsiOptimum(NamedTuple):
    x_star: float
    F_star: float
    error: float
    truncated_at: float | None
    at_boundary: bool = False


class ExpThresholds(NamedTuple):
    compact_threshold: float
    diameter: float


def _verdict(value: float, error: float, witness: dict, reason: str = "") -> Verdict:
    threshold = 1.0 + max(MARGIN_FLOOR, 3.0 * error)
    margin = value - threshold
    kind = COMPACT if margin > 0 else INCONCLUSIVE
    return Verdict(kind, value, margin, witness, error=error, threshold=threshold, reason=reason)


# ---------------------------------------------------------------------------
# Optimisation over constant test functions
# ---------------------------------------------------------------------------


def _golden_max(f, lo: float, hi: float, xtol: float):
    """Golden-section maximisation of a unimodal f on [lo, hi]."""
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > xtol:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def _edge(F, cache, logx: float) -> ConstantPsiOptimum:
    F(logx)
    fv = cache[logx]
    return ConstantPsiOptimum(math.exp(logx), fv.value, fv.abs_error_estimate, fv.truncated_at,
                              at_boundary=True)


def optimize_constant_psi(q: RadialProfile, a: float, tol: float = DEFAULT_TOL) -> ConstantPsiOptimum:
    """Maximise F(q, x, a, inf) over constants x > 0.

    The bracket is grown by doubling from x = 1 and then narrowed by
    golden-section search in log x.  Unimodality is assumed.  When F is
    still increasing at the edge of [X_MIN, X_MAX] (c/r^2 decay, where the
    supremum is approached as x -> 0) the edge point is returned with
    ``at_boundary`` set.
    """
    cache: dict[float, object] = {}

    def F(logx: float) -> float:
        if logx not in cache:
            cache[logx] = eval_F(q, ConstantPsi(math.exp(logx)), a, math.inf, tol)
        return cache[logx].value

    step = math.log(2.0)
    lo_lim, hi_lim = math.log(X_MIN), math.log(X_MAX)
    mid = 0.0
    f_mid = F(mid)
    f_up, f_down = F(mid + step), F(mid - step)
    if f_up > f_mid:
        while f_up > f_mid:
            mid, f_mid = mid + step, f_up
            if mid + step > hi_lim:
                return _edge(F, cache, hi_lim)
            f_up = F(mid + step)
    elif f_down > f_mid:
        while f_down > f_mid:
            mid, f_mid = mid - step, f_down
            if mid - step < lo_lim:
                return _edge(F, cache, lo_lim)
            f_down = F(mid - step)
    if f_mid == 0.0 and f_up == 0.0 and f_down == 0.0:
        fv = cache[mid]
        return ConstantPsiOptimum(math.exp(mid), 0.0, fv.abs_error_estimate, fv.truncated_at)

    logx, _ = _golden_max(F, mid - step, mid + step, 1e-9)
    fv = cache[logx]
    return ConstantPsiOptimum(math.exp(logx), fv.value, fv.abs_error_estimate, fv.truncated_at)


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------


def _finite_horizon_scan(q, psi, a, tol, horizon):
    """Max of F(q, psi, a, b) over a geometric grid of finite b.

    The scan stops early once psi underflows to zero (e.g. sqrt of an
    exponentially decaying profile), since F is undefined from there on.
    """
    stop = min(horizon, q.horizon, psi.horizon)
    start = max(a, 1e-3) * 1.5 if a > 0 else 1.0
    bs = np.geomspace(start, stop, 200) if stop > start else np.array([stop])
    best, best_b, best_err = -math.inf, None, 0.0
    for b in bs:
        if b <= a:
            continue
        try:
            fv = eval_F(q, psi, a, float(b), tol)
        except PositivityError:
            break
        if fv.value > best:
            best, best_b, best_err = fv.value, float(b), fv.abs_error_estimate
    return best, best_b, best_err


def compactness_verdict(
    q: RadialProfile,
    a: float,
    search: str | TestFunction = "constant",
    tol: float = DEFAULT_TOL,
    horizon: float = 1e6,
) -> Verdict:
    """Test whether the ray criterion fails for the given data.

    ``search`` is ``"constant"`` (optimise over constant psi),
    ``"sqrt_of_profile"`` (psi = sqrt(q)) or a fixed :class:`TestFunction`.
    A fixed psi whose functional cannot be taken to infinity is scanned on
    finite intervals [a, b], b <= ``horizon``; F <= 1 must hold for every b.
    """
    if a < q.domain_start:
        raise DomainError(f"a={a} below domain start {q.domain_start}")
    if isinstance(search, str) and search == "constant":
        try:
            opt = optimize_constant_psi(q, a, tol)
        except UnboundedDomainError as exc:
            return Verdict(INCONCLUSIVE, math.nan, math.nan, {"family": "constant"},
                           reason=f"divergent tail: {exc}")
        return _verdict(opt.F_star, opt.error, {"family": "constant", "x": opt.x_star,
                                                 "b": "inf", "truncated_at": opt.truncated_at,
                                                 "x_at_search_edge": opt.at_boundary})

    if isinstance(search, str) and search == "sqrt_of_profile":
        psi = SqrtProfilePsi(q)
    elif isinstance(search, TestFunction):
        psi = search
    else:
        raise ValidationError(f"unknown search space {search!r}")

    try:
        fv = eval_F(q, psi, a, math.inf, tol)
        return _verdict(fv.value, fv.abs_error_estimate, {**psi.to_dict(), "b": "inf"})
    except UnboundedDomainError as exc:
        value, b, err = _finite_horizon_scan(q, psi, a, tol, horizon)
        return _verdict(value, err, {**psi.to_dict(), "b": b},
                        reason=f"b = inf unavailable ({exc}); maximised over finite b")


# ---------------------------------------------------------------------------
# Diameter
# ---------------------------------------------------------------------------


def diameter_bound(
    q: RadialProfile,
    psi: TestFunction,
    tol: float = DEFAULT_TOL,
    L_max: float = 1e6,
    l_min: float = 1e-3,
    per_decade: int = 64,
) -> DiameterBound:
    """Smallest l <= L_max at which the segment criterion holds.

    The left side is accumulated over a geometric grid (``per_decade``
    points per decade); the first grid cell where lhs - rhs changes sign is
    refined by bisection to relative width 1e-12.
    """
    L_max = min(L_max, q.horizon, psi.horizon)
    if q.domain_start > 0 or psi.domain_start > 0:
        raise DomainError("diameter_bound needs q and psi defined from r = 0")
    psi.check_monotone(0.0, L_max)
    f = functional_integrand(q, psi)
    psi0 = psi(0.0)

    def rhs(l):
        return 2.0 + 0.25 * abs(math.log(psi(l) / psi0))

    def piece(lo, hi):
        if hi <= lo:
            return 0.0
        return integrate_adaptive(f, lo, hi, tol, _breaks(q, psi, lo, hi)).value

    n = max(2, int(round(per_decade * math.log10(L_max / l_min))) + 1)
    grid = np.concatenate([[0.0], np.geomspace(l_min, L_max, n)])
    cum = 0.0
    for lo, hi in zip(grid[:-1], grid[1:]):
        lo, hi = float(lo), float(hi)
        nxt = cum + piece(lo, hi)
        if nxt >= rhs(hi):
            base = cum
            left, right = lo, hi
            while right - left > 1e-12 * right:
                m = 0.5 * (left + right)
                if base + piece(lo, m) >= rhs(m):
                    right = m
                else:
                    left = m
            lhs_r = base + piece(lo, right)
            return DiameterBound(right, psi.to_dict(), lhs_r, rhs(right))
        cum = nxt
    return DiameterBound(math.inf, psi.to_dict(), cum, rhs(L_max))


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def poly_threshold(p: float, a: float) -> float:
    """Curvature constant above which c/r^p decay (r >= a) forces compactness."""
    if not p > 2:
        raise DomainError(f"poly_threshold needs p > 2, got {p}")
    if not a > 0:
        raise DomainError(f"poly_threshold needs a > 0, got {a}")
    return p ** (2 * p) * math.sin(math.pi / p) ** p / (4 * math.pi**p) * (a / (p - 2)) ** (p - 2)


def poly_constant_psi_bound(c: float, p: float, a: float) -> tuple[float, float]:
    """Analytic maximiser and value of the lower bound -a x + K x^(1 - 2/p).

    K = (pi/p)/sin(pi/p) * c^(1/p).  The true F(c/r^p, x, a, inf) exceeds
    this bound for every x, so value > 1 certifies compactness.
    """
    if not p > 2:
        raise DomainError(f"needs p > 2, got {p}")
    s = math.sin(math.pi / p)
    x = (c ** (1 / p) * math.pi * (p - 2) / (a * p * p * s)) ** (p / 2)
    value = 2 * math.sqrt(c) * (math.pi / s) ** (p / 2) * ((p - 2) / a) ** ((p - 2) / 2) / p**p
    return x, value


def poly_lower_bound_at(c: float, p: float, a: float, x: float) -> float:
    """The lower bound -a x + (pi/p)/sin(pi/p) c^(1/p) x^(1-2/p) at a given x."""
    return -a * x + (math.pi / p) / math.sin(math.pi / p) * c ** (1 / p) * x ** (1 - 2 / p)


def wan_threshold(p: float, r0: float) -> float:
    if not p > 2:
        raise DomainError(f"wan_threshold needs p > 2, got {p}")
    if not r0 > 0:
        raise DomainError(f"wan_threshold needs r0 > 0, got {r0}")
    return (p - 1) ** p / (p - 2) ** (p - 2) * r0 ** (p - 2)


def cgt_diameter(mu: float, r0: float) -> float:
    """Diameter bound e^mu / r0 for c = 1/4 + mu quadratic decay."""
    if not (mu > 0 and r0 > 0):
        raise DomainError("cgt_diameter needs mu > 0 and r0 > 0")
    return math.exp(mu) / r0


def exp_thresholds(c: float, p: float) -> ExpThresholds:
    """Compactness constant and diameter bound for q = c e^(-p r)."""
    if not (c > 0 and p > 0):
        raise DomainError("exp_thresholds needs c > 0 and p > 0")
    compact = 2 * p * p / math.log(3.0) ** 2
    excess = c - (math.e**2 - 1) * p * p
    diameter = math.log(math.e**2 * c / excess) / p if excess > 0 else math.inf
    return ExpThresholds(compact, diameter)


def special_psi_closed_form(q: RadialProfile, psi: TestFunction, a: float, b: float) -> float:
    """Closed-form value of the functional for the three exactly solvable pairs.

    * ``PolyDecay`` with p <= 2 and psi = sqrt(q) (``SqrtProfilePsi``, or
      ``PowerPsi(sqrt(c), p/2)``), on a >= cutoff:
      ``sqrt(c)/(2-p) (b^(1-p/2) - a^(1-p/2)) - p/8 log(b/a)``, which for
      p = 2 reads ``(sqrt(c)/2 - 1/4) log(b/a)``.
    * ``ExpDecay`` with constant psi = x:
      ``(x/p) log((x^2 + c e^(-pa)) / (x^2 + c e^(-pb)))``, b may be infinite.
    """
    if isinstance(q, PolyDecay):
        c, p = q.c, q.p
        sqrt_psi = isinstance(psi, SqrtProfilePsi) and psi.profile == q
        power_psi = (isinstance(psi, PowerPsi) and psi.shift == 0
                     and math.isclose(psi.k, math.sqrt(c), rel_tol=1e-14)
                     and math.isclose(psi.alpha, p / 2, rel_tol=1e-14))
        if not (sqrt_psi or power_psi) or p > 2:
            raise ValidationError("poly closed form needs p <= 2 and psi = sqrt(q)")
        if a < q.cutoff or math.isinf(b):
            raise DomainError("poly closed form needs cutoff <= a < b < inf")
        L = math.log(b / a)
        if p == 2:
            return (math.sqrt(c) / 2 - 0.25) * L
        e = 1 - p / 2
        return math.sqrt(c) / (2 - p) * (b**e - a**e) - p / 8 * L
    if isinstance(q, ExpDecay) and isinstance(psi, ConstantPsi):
        x, c, p = psi.x, q.c, q.p
        far = 0.0 if math.isinf(b) else c * math.exp(-p * b)
        return x / p * math.log((x * x + c * math.exp(-p * a)) / (x * x + far))
    raise ValidationError(f"no closed form for {q.family} with {psi.family} psi")


__all__ = [
    "COMPACT", "INCONCLUSIVE", "Verdict", "DiameterBound", "ConstantPsiOptimum",
    "ExpThresholds", "compactness_verdict", "optimize_constant_psi", "diameter_bound",
    "poly_threshold", "poly_constant_psi_bound", "poly_lower_bound_at", "wan_threshold",
    "cgt_diameter", "exp_thresholds", "special_psi_closed_form",
]
