"""Radial curvature profiles and positive monotone test functions.

A profile is the averaged radial Ricci lower bound ``q(r) = Ric/(n-1)``;
the dimension never appears.  A test function is the positive monotone
weight ``psi`` entering the criteria functional.

All objects are immutable and evaluate vectorised over numpy arrays.
Scalar inputs give Python floats back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import (
    DomainError,
    MonotonicityError,
    PositivityError,
    ValidationError,
)

NON_DECREASING = "non_decreasing"
NON_INCREASING = "non_increasing"
MONOTONICITIES = (NON_DECREASING, NON_INCREASING)

# span of the construction-time sample checks for unbounded families
CHECK_SPAN = 100.0
CHECK_POINTS = 1001


def _scalar_or_array(r, out):
    if np.ndim(r) == 0:
        return float(out)
    return out


def _check_grid(start: float, stop: float) -> np.ndarray:
    if stop <= start:
        return np.array([start])
    if start > 0:
        return np.geomspace(start, stop, CHECK_POINTS)
    return np.linspace(start, stop, CHECK_POINTS)


def _finite_or_inf(x) -> float:
    if isinstance(x, str):
        if x.strip().lower() in ("inf", "infinity", "+inf"):
            return math.inf
        raise ValidationError(f"expected a number or 'inf', got {x!r}")
    return float(x)


def _dump_float(x: float):
    return "inf" if math.isinf(x) else x


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------


class RadialProfile:
    """Base class for curvature profiles ``q(r) >= 0``."""

    family = "abstract"
    domain_start: float
    description: str

    def _eval(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _deriv(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def horizon(self) -> float:
        """Largest radius where the profile is defined."""
        return math.inf

    def _check_domain(self, r: np.ndarray) -> None:
        if r.size and (np.min(r) < self.domain_start or np.max(r) > self.horizon):
            raise DomainError(
                f"{self.family} profile evaluated outside "
                f"[{self.domain_start}, {self.horizon}]"
            )

    def __call__(self, r):
        arr = np.asarray(r, dtype=float)
        self._check_domain(arr)
        return _scalar_or_array(r, self._eval(arr))

    def derivative(self, r):
        arr = np.asarray(r, dtype=float)
        self._check_domain(arr)
        return _scalar_or_array(r, self._deriv(arr))

    def tail_bound(self, R: float) -> float:
        """Upper bound on the integral of q over [R, inf)."""
        return math.inf

    def sup_on(self, lo: float, hi: float) -> float:
        """Upper bound on q over [lo, hi]."""
        raise NotImplementedError

    def inf_on(self, lo: float, hi: float) -> float:
        """Lower bound on q over [lo, hi] (used for positivity checks)."""
        raise NotImplementedError

    def breakpoints(self, lo: float, hi: float) -> list[float]:
        """Radii in (lo, hi) where q or q' may be discontinuous."""
        return []

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _base_dict(self) -> dict:
        d = {"family": self.family}
        if self.domain_start:
            d["domain_start"] = self.domain_start
        if self.description:
            d["description"] = self.description
        return d

    def _validate_nonneg(self) -> None:
        hi = self.horizon
        stop = hi if math.isfinite(hi) else self.domain_start + CHECK_SPAN
        grid = _check_grid(self.domain_start, stop)
        vals = self._eval(grid)
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValidationError(f"{self.family} profile is negative or non-finite")


@dataclass(frozen=True)
class Constant(RadialProfile):
    c: float
    domain_start: float = 0.0
    description: str = ""
    family = "constant"

    def __post_init__(self):
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise ValidationError(f"constant profile needs c >= 0, got {self.c}")
        self._validate_nonneg()

    def _eval(self, r):
        return np.full_like(r, self.c)

    def _deriv(self, r):
        return np.zeros_like(r)

    def tail_bound(self, R):
        return 0.0 if self.c == 0 else math.inf

    def sup_on(self, lo, hi):
        return self.c

    def inf_on(self, lo, hi):
        return self.c

    def to_dict(self):
        return {**self._base_dict(), "c": self.c}


@dataclass(frozen=True)
class PolyDecay(RadialProfile):
    """``c / max(r, cutoff)**p``: polynomial decay, held constant below the cutoff."""

    c: float
    p: float
    cutoff: float
    domain_start: float = 0.0
    description: str = ""
    family = "poly_decay"

    def __post_init__(self):
        if not self.c >= 0:
            raise ValidationError(f"poly_decay needs c >= 0, got {self.c}")
        if not self.cutoff > 0:
            raise ValidationError(f"poly_decay needs cutoff > 0, got {self.cutoff}")
        if not self.p > 0:
            raise ValidationError(f"poly_decay needs p > 0, got {self.p}")
        self._validate_nonneg()

    def _eval(self, r):
        return self.c / np.maximum(r, self.cutoff) ** self.p

    def _deriv(self, r):
        rr = np.maximum(r, self.cutoff)
        return np.where(r > self.cutoff, -self.p * self.c / rr ** (self.p + 1), 0.0)

    def tail_bound(self, R):
        if self.c == 0:
            return 0.0
        if self.p <= 1:
            return math.inf
        if R < self.cutoff:
            head = self.c / self.cutoff**self.p * (self.cutoff - R)
            return head + self.c * self.cutoff ** (1 - self.p) / (self.p - 1)
        return self.c * R ** (1 - self.p) / (self.p - 1)

    def sup_on(self, lo, hi):
        return self.c / max(lo, self.cutoff) ** self.p

    def inf_on(self, lo, hi):
        return self.c / max(hi, self.cutoff) ** self.p

    def breakpoints(self, lo, hi):
        return [self.cutoff] if lo < self.cutoff < hi else []

    def to_dict(self):
        return {**self._base_dict(), "c": self.c, "p": self.p, "cutoff": self.cutoff}


@dataclass(frozen=True)
class ExpDecay(RadialProfile):
    """``c * exp(-p r)``."""

    c: float
    p: float
    domain_start: float = 0.0
    description: str = ""
    family = "exp_decay"

    def __post_init__(self):
        if not self.c >= 0:
            raise ValidationError(f"exp_decay needs c >= 0, got {self.c}")
        if not self.p > 0:
            raise ValidationError(f"exp_decay needs p > 0, got {self.p}")
        self._validate_nonneg()

    def _eval(self, r):
        return self.c * np.exp(-self.p * r)

    def _deriv(self, r):
        return -self.p * self.c * np.exp(-self.p * r)

    def tail_bound(self, R):
        return self.c * math.exp(-self.p * R) / self.p

    def sup_on(self, lo, hi):
        return self.c * math.exp(-self.p * lo)

    def inf_on(self, lo, hi):
        return self.c * math.exp(-self.p * hi) if math.isfinite(hi) else 0.0

    def to_dict(self):
        return {**self._base_dict(), "c": self.c, "p": self.p}


@dataclass(frozen=True)
class Sampled(RadialProfile):
    """Tabulated profile with linear interpolation.

    Held at the last sample value up to ``horizon``; undefined beyond it.
    """

    r: tuple
    q: tuple
    hold_until: float | None = None
    description: str = ""
    family = "sampled"

    def __post_init__(self):
        r = tuple(float(x) for x in self.r)
        q = tuple(float(x) for x in self.q)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "q", q)
        if len(r) < 2 or len(r) != len(q):
            raise ValidationError("sampled profile needs >= 2 matching (r, q) samples")
        if np.any(np.diff(r) <= 0):
            raise ValidationError("sampled profile radii must be strictly increasing")
        if min(q) < 0:
            raise ValidationError("sampled profile values must be nonnegative")
        h = r[-1] if self.hold_until is None else float(self.hold_until)
        if h < r[-1]:
            raise ValidationError("horizon must not precede the last sample")
        object.__setattr__(self, "hold_until", h)

    @property
    def domain_start(self):
        return self.r[0]

    @property
    def horizon(self):
        return self.hold_until

    def _eval(self, r):
        return np.interp(r, self.r, self.q)

    def _deriv(self, r):
        rs = np.asarray(self.r)
        slopes = np.diff(self.q) / np.diff(rs)
        idx = np.clip(np.searchsorted(rs, r, side="right") - 1, 0, len(slopes) - 1)
        return np.where(r >= rs[-1], 0.0, slopes[idx])

    def sup_on(self, lo, hi):
        inner = [qv for rv, qv in zip(self.r, self.q) if lo <= rv <= hi]
        return max([float(self._eval(np.array(lo))), float(self._eval(np.array(hi)))] + inner)

    def inf_on(self, lo, hi):
        inner = [qv for rv, qv in zip(self.r, self.q) if lo <= rv <= hi]
        return min([float(self._eval(np.array(lo))), float(self._eval(np.array(hi)))] + inner)

    def breakpoints(self, lo, hi):
        return [x for x in self.r if lo < x < hi]

    def to_dict(self):
        d = {"family": self.family, "r": list(self.r), "q": list(self.q),
             "horizon": self.hold_until}
        if self.description:
            d["description"] = self.description
        return d


@dataclass(frozen=True)
class Piecewise(RadialProfile):
    """Profile assembled from sub-profiles on contiguous intervals.

    ``pieces`` is a sequence of ``((lo, hi), profile)``; the last ``hi`` may be
    infinite.  Each sub-profile is evaluated at the absolute radius.
    """

    pieces: tuple
    description: str = ""
    family = "piecewise"

    def __post_init__(self):
        pieces = tuple(((float(lo), float(hi)), prof) for (lo, hi), prof in self.pieces)
        object.__setattr__(self, "pieces", pieces)
        if not pieces:
            raise ValidationError("piecewise profile needs at least one piece")
        for i, ((lo, hi), prof) in enumerate(pieces):
            if not hi > lo:
                raise ValidationError(f"piece {i} has empty interval [{lo}, {hi}]")
            if not isinstance(prof, RadialProfile):
                raise ValidationError(f"piece {i} is not a RadialProfile")
            if prof.domain_start > lo or prof.horizon < hi:
                raise ValidationError(f"piece {i} profile not defined on [{lo}, {hi}]")
            if i and pieces[i - 1][0][1] != lo:
                raise ValidationError("piecewise intervals must be contiguous")

    @property
    def domain_start(self):
        return self.pieces[0][0][0]

    @property
    def horizon(self):
        return self.pieces[-1][0][1]

    def _edges(self):
        return np.array([hi for (_, hi), _ in self.pieces[:-1]])

    def _dispatch(self, r, method):
        out = np.empty_like(r)
        idx = np.searchsorted(self._edges(), r, side="right")
        for i, (_, prof) in enumerate(self.pieces):
            mask = idx == i
            if np.any(mask):
                out[mask] = getattr(prof, method)(r[mask])
        return out

    def _eval(self, r):
        return self._dispatch(r, "_eval")

    def _deriv(self, r):
        return self._dispatch(r, "_deriv")

    def _overlapping(self, lo, hi):
        for (plo, phi), prof in self.pieces:
            s, e = max(lo, plo), min(hi, phi)
            if e > s:
                yield s, e, prof

    def tail_bound(self, R):
        if math.isfinite(self.horizon):
            return math.inf
        total = 0.0
        for s, e, prof in self._overlapping(R, math.inf):
            if math.isinf(e):
                total += prof.tail_bound(s)
            else:
                total += min(prof.tail_bound(s), prof.sup_on(s, e) * (e - s))
        return total

    def sup_on(self, lo, hi):
        return max(prof.sup_on(s, e) for s, e, prof in self._overlapping(lo, hi))

    def inf_on(self, lo, hi):
        return min(prof.inf_on(s, e) for s, e, prof in self._overlapping(lo, hi))

    def breakpoints(self, lo, hi):
        pts = set()
        for (plo, phi), prof in self.pieces:
            for x in (plo, phi):
                if lo < x < hi:
                    pts.add(x)
            pts.update(prof.breakpoints(max(lo, plo), min(hi, phi)))
        return sorted(pts)

    def to_dict(self):
        d = {
            "family": self.family,
            "pieces": [
                {"interval": [lo, _dump_float(hi)], "profile": prof.to_dict()}
                for (lo, hi), prof in self.pieces
            ],
        }
        if self.description:
            d["description"] = self.description
        return d


def eval_q(profile: RadialProfile, r):
    """Evaluate ``q(r)``; raises :class:`DomainError` outside the profile's domain."""
    return profile(r)


def tail_integral_bound(profile: RadialProfile, R: float) -> float:
    """Closed-form upper bound on the tail integral of q from R to infinity."""
    if R < profile.domain_start:
        raise DomainError(f"R={R} below domain start {profile.domain_start}")
    return profile.tail_bound(R)


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------


class TestFunction:
    """Base class for positive monotone weights ``psi``."""

    __test__ = False  # not a pytest class

    family = "abstract"
    monotonicity: str
    domain_start: float

    @property
    def horizon(self) -> float:
        return math.inf

    def _eval(self, r):
        raise NotImplementedError

    def _deriv(self, r):
        raise NotImplementedError

    def _check_domain(self, r):
        if r.size and (np.min(r) < self.domain_start or np.max(r) > self.horizon):
            raise DomainError(
                f"{self.family} test function evaluated outside "
                f"[{self.domain_start}, {self.horizon}]"
            )

    def __call__(self, r):
        arr = np.asarray(r, dtype=float)
        self._check_domain(arr)
        return _scalar_or_array(r, self._eval(arr))

    def derivative(self, r):
        arr = np.asarray(r, dtype=float)
        self._check_domain(arr)
        return _scalar_or_array(r, self._deriv(arr))

    def inf_on_tail(self, R: float) -> float:
        """Lower bound of psi on [R, inf); 0 when psi is not bounded away from 0."""
        return 0.0

    def limit_at_infinity(self) -> float:
        """Limit of psi as r grows (monotone, so it exists in [0, inf])."""
        raise NotImplementedError

    def breakpoints(self, lo, hi) -> list[float]:
        return []

    def check_monotone(self, lo: float, hi: float) -> None:
        """Sample-check the declared direction on [lo, hi]."""
        hi = min(hi, self.horizon)
        if not math.isfinite(hi):
            hi = lo + CHECK_SPAN
        grid = _check_grid(lo, hi)
        vals = self._eval(grid)
        if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
            raise PositivityError(f"{self.family} test function is not positive on [{lo}, {hi}]")
        steps = np.diff(vals)
        slack = 1e-12 * np.abs(vals[:-1])
        bad = steps > slack if self.monotonicity == NON_INCREASING else steps < -slack
        if np.any(bad):
            raise MonotonicityError(
                f"{self.family} test function is not {self.monotonicity} on [{lo}, {hi}]"
            )

    def _validate(self):
        if self.monotonicity not in MONOTONICITIES:
            raise ValidationError(f"unknown monotonicity {self.monotonicity!r}")
        self.check_monotone(self.domain_start, self.horizon)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantPsi(TestFunction):
    x: float
    monotonicity: str = NON_DECREASING
    domain_start: float = 0.0
    family = "constant"

    def __post_init__(self):
        if not (self.x > 0 and math.isfinite(self.x)):
            raise PositivityError(f"constant test function needs x > 0, got {self.x}")
        self._validate()

    def _eval(self, r):
        return np.full_like(r, self.x)

    def _deriv(self, r):
        return np.zeros_like(r)

    def inf_on_tail(self, R):
        return self.x

    def limit_at_infinity(self):
        return self.x

    def to_dict(self):
        d = {"family": self.family, "x": self.x, "monotonicity": self.monotonicity}
        if self.domain_start:
            d["domain_start"] = self.domain_start
        return d


@dataclass(frozen=True)
class PowerPsi(TestFunction):
    """``k * (r + shift)**(-alpha)``.

    ``shift = 0`` is the plain power law, which needs ``domain_start > 0``
    when ``alpha > 0``.  A positive shift makes the family usable from r = 0.
    The direction defaults to the one implied by the sign of alpha.
    """

    k: float
    alpha: float
    shift: float = 0.0
    domain_start: float = 0.0
    monotonicity: str | None = None
    family = "power"

    def __post_init__(self):
        if not self.k > 0:
            raise PositivityError(f"power test function needs k > 0, got {self.k}")
        if self.shift < 0:
            raise ValidationError("shift must be nonnegative")
        if self.domain_start + self.shift <= 0 and self.alpha != 0:
            raise DomainError("power test function needs domain_start + shift > 0")
        if self.monotonicity is None:
            mono = NON_INCREASING if self.alpha > 0 else NON_DECREASING
            object.__setattr__(self, "monotonicity", mono)
        self._validate()

    def _eval(self, r):
        return self.k * (r + self.shift) ** (-self.alpha)

    def _deriv(self, r):
        return -self.alpha * self.k * (r + self.shift) ** (-self.alpha - 1)

    def inf_on_tail(self, R):
        if self.alpha > 0:
            return 0.0
        return self.k * (R + self.shift) ** (-self.alpha)

    def limit_at_infinity(self):
        if self.alpha > 0:
            return 0.0
        return self.k if self.alpha == 0 else math.inf

    def to_dict(self):
        d = {"family": self.family, "k": self.k, "alpha": self.alpha,
             "monotonicity": self.monotonicity}
        if self.shift:
            d["shift"] = self.shift
        if self.domain_start:
            d["domain_start"] = self.domain_start
        return d


@dataclass(frozen=True)
class SqrtProfilePsi(TestFunction):
    """``psi = sqrt(q)`` for a strictly positive profile."""

    profile: RadialProfile
    monotonicity: str = NON_INCREASING
    family = "sqrt_of_profile"

    @property
    def domain_start(self):
        return self.profile.domain_start

    @property
    def horizon(self):
        return self.profile.horizon

    def __post_init__(self):
        self._validate()

    def _eval(self, r):
        q = self.profile._eval(r)
        if np.any(q <= 0):
            raise PositivityError("sqrt_of_profile evaluated where q = 0")
        return np.sqrt(q)

    def _deriv(self, r):
        return self.profile._deriv(r) / (2.0 * self._eval(r))

    def inf_on_tail(self, R):
        if math.isfinite(self.horizon):
            return 0.0
        return math.sqrt(self.profile.inf_on(R, math.inf))

    def limit_at_infinity(self):
        if math.isfinite(self.horizon):
            raise DomainError("profile has a finite horizon")
        if self.monotonicity == NON_INCREASING:
            return math.sqrt(self.profile.inf_on(self.domain_start, math.inf))
        return math.sqrt(self.profile.sup_on(self.domain_start, math.inf))

    def breakpoints(self, lo, hi):
        return self.profile.breakpoints(lo, hi)

    def to_dict(self):
        return {"family": self.family, "profile": self.profile.to_dict(),
                "monotonicity": self.monotonicity}


@dataclass(frozen=True)
class SampledPsi(TestFunction):
    """Tabulated psi with derivatives, interpolated by cubic Hermite splines."""

    r: tuple
    values: tuple
    derivatives: tuple
    monotonicity: str = NON_DECREASING
    family = "sampled"
    _spline: Any = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("r", "values", "derivatives"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        if len(self.r) < 2 or not len(self.r) == len(self.values) == len(self.derivatives):
            raise ValidationError("sampled test function needs matching tables of length >= 2")
        if np.any(np.diff(self.r) <= 0):
            raise ValidationError("sampled test function radii must be strictly increasing")
        object.__setattr__(self, "_spline", CubicHermiteSpline(self.r, self.values, self.derivatives))
        self._validate()

    @property
    def domain_start(self):
        return self.r[0]

    @property
    def horizon(self):
        return self.r[-1]

    def _eval(self, r):
        return self._spline(r)

    def _deriv(self, r):
        return self._spline(r, 1)

    def limit_at_infinity(self):
        raise DomainError("sampled test function has a finite horizon")

    def breakpoints(self, lo, hi):
        return [x for x in self.r if lo < x < hi]

    def to_dict(self):
        return {"family": self.family, "r": list(self.r), "value": list(self.values),
                "derivative": list(self.derivatives), "monotonicity": self.monotonicity}


def eval_psi(psi: TestFunction, r):
    return psi(r)


def eval_psi_prime(psi: TestFunction, r):
    return psi.derivative(r)


# ---------------------------------------------------------------------------
# JSON descriptions
# ---------------------------------------------------------------------------


def _need(d: Mapping, key: str, what: str):
    if key not in d:
        raise ValidationError(f"{what} description is missing field {key!r}")
    return d[key]


def profile_from_dict(d: Mapping) -> RadialProfile:
    """Build a profile from its JSON description."""
    if not isinstance(d, Mapping):
        raise ValidationError("profile description must be an object")
    fam = _need(d, "family", "profile")
    common = {"description": str(d.get("description", ""))}
    start = float(d.get("domain_start", 0.0))
    try:
        if fam == "constant":
            return Constant(float(_need(d, "c", fam)), domain_start=start, **common)
        if fam == "poly_decay":
            return PolyDecay(float(_need(d, "c", fam)), float(_need(d, "p", fam)),
                             float(_need(d, "cutoff", fam)), domain_start=start, **common)
        if fam == "exp_decay":
            return ExpDecay(float(_need(d, "c", fam)), float(_need(d, "p", fam)),
                            domain_start=start, **common)
        if fam == "sampled":
            h = d.get("horizon")
            return Sampled(tuple(_need(d, "r", fam)), tuple(_need(d, "q", fam)),
                           None if h is None else _finite_or_inf(h), **common)
        if fam == "piecewise":
            pieces = []
            for piece in _need(d, "pieces", fam):
                lo, hi = _need(piece, "interval", "piece")
                pieces.append(((_finite_or_inf(lo), _finite_or_inf(hi)),
                               profile_from_dict(_need(piece, "profile", "piece"))))
            return Piecewise(tuple(pieces), **common)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad {fam} profile description: {exc}") from exc
    raise ValidationError(f"unknown profile family {fam!r}")


def psi_from_dict(d: Mapping) -> TestFunction:
    """Build a test function from its JSON description."""
    if not isinstance(d, Mapping):
        raise ValidationError("psi description must be an object")
    fam = _need(d, "family", "psi")
    mono = d.get("monotonicity")
    try:
        if fam == "constant":
            return ConstantPsi(float(_need(d, "x", fam)), monotonicity=mono or NON_DECREASING,
                               domain_start=float(d.get("domain_start", 0.0)))
        if fam == "power":
            return PowerPsi(float(_need(d, "k", fam)), float(_need(d, "alpha", fam)),
                            shift=float(d.get("shift", 0.0)),
                            domain_start=float(d.get("domain_start", 0.0)), monotonicity=mono)
        if fam == "sqrt_of_profile":
            return SqrtProfilePsi(profile_from_dict(_need(d, "profile", fam)),
                                  monotonicity=mono or NON_INCREASING)
        if fam == "sampled":
            return SampledPsi(tuple(_need(d, "r", fam)), tuple(_need(d, "value", fam)),
                              tuple(_need(d, "derivative", fam)),
                              monotonicity=_need(d, "monotonicity", fam))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad {fam} psi description: {exc}") from exc
    raise ValidationError(f"unknown psi family {fam!r}")


__all__: Sequence[str] = [
    "NON_DECREASING", "NON_INCREASING", "RadialProfile", "Constant", "PolyDecay",
    "ExpDecay", "Sampled", "Piecewise", "TestFunction", "ConstantPsi", "PowerPsi",
    "SqrtProfilePsi", "SampledPsi", "eval_q", "tail_integral_bound", "eval_psi",
    "eval_psi_prime", "profile_from_dict", "psi_from_dict",
]
