"""The extremal scalar comparison model and checks of the proof machinery.

The model is the equality case of the traced Riccati inequality: the volume
factor solves ``v'' + q v = 0`` with ``v(0) = 0, v'(0) = 1`` and the mean
curvature is ``m = v'/v``.  ``zeta`` is the first zero of m (mean-convex
radius) and ``rho`` the first positive zero of v (conjugate radius).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, TextIO

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import IntegrationError, PreconditionError
from .functional import DEFAULT_TOL, Comparison, eval_F, eval_segment_criterion
from .profiles import RadialProfile, TestFunction
from .quadrature import integrate_adaptive

MODEL_TOL = 1e-12
ROOT_RTOL = 1e-12
BLOWUP = 1e8
# extra grid points placed this far from r = 0 and from rho
_REFINE = (1e-2, 3e-3, 1e-3, 3e-4)
FD_STEP = 1e-4


class _PiecewiseDense:
    """Dense output stitched from per-segment ODE solutions."""

    def __init__(self):
        self.edges: list[float] = []
        self.sols = []

    def add(self, lo: float, hi: float, sol) -> None:
        if not self.edges:
            self.edges.append(min(lo, hi))
        self.edges.append(max(lo, hi))
        self.sols.append(sol)

    def __call__(self, r) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty((self.sols[0](r[:1]).shape[0], r.size))
        idx = np.clip(np.searchsorted(self.edges, r, side="right") - 1, 0, len(self.sols) - 1)
        for i, sol in enumerate(self.sols):
            mask = idx == i
            if np.any(mask):
                out[:, mask] = sol(r[mask])
        return out


def _segments(lo: float, hi: float, breaks) -> list[tuple[float, float]]:
    pts = [lo] + sorted(x for x in set(breaks) if lo < x < hi) + [hi]
    return list(zip(pts[:-1], pts[1:]))


def _fd_steps(r: np.ndarray, walls) -> np.ndarray:
    """Central-difference steps at r that stay clear of every wall (nan if none fits)."""
    r = np.asarray(r, dtype=float)
    gap = np.min(np.abs(r[:, None] - np.asarray(walls, dtype=float)[None, :]), axis=1) if walls else np.full(r.shape, np.inf)
    scale = np.maximum(1.0, np.abs(r))
    step = np.minimum(FD_STEP * scale, 0.25 * gap)
    return np.where(step > 1e-9 * scale, step, np.nan)


def _diff5(fn, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Five-point central difference of a vectorised fn."""
    return (fn(x - 2 * h) - 8 * fn(x - h) + 8 * fn(x + h) - fn(x + 2 * h)) / (12 * h)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModelTrajectory:
    grid: np.ndarray
    v: np.ndarray
    v_prime: np.ndarray
    m: np.ndarray
    zeta: float | None
    rho: float | None
    q_ref: RadialProfile
    r_max: float
    dense: Callable = field(repr=False)

    def state(self, r):
        """(v, v') from the dense output."""
        return self.dense(r)

    def m_at(self, r) -> np.ndarray:
        v, vp = self.dense(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(v > 0, vp / v, np.where(np.asarray(r) == 0, np.inf, np.nan))

    def summary(self) -> dict:
        return {"zeta": self.zeta, "rho": self.rho, "r_max": self.r_max,
                "profile": self.q_ref.to_dict()}

    def to_csv(self, fh: TextIO) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["r", "v", "v_prime", "m"])
        for row in zip(self.grid, self.v, self.v_prime, self.m):
            writer.writerow([format(float(x), ".17g") for x in row])


def _first_root(fn, ts: np.ndarray, vals: np.ndarray) -> float | None:
    """First sign change of fn from positive to non-positive, refined by brentq."""
    neg = np.nonzero(vals <= 0)[0]
    if neg.size == 0:
        return None
    i = neg[0]
    if i == 0:
        return float(ts[0])
    lo, hi = float(ts[i - 1]), float(ts[i])
    if vals[i] == 0:
        return hi
    return brentq(fn, lo, hi, xtol=ROOT_RTOL * hi * 1e-3, rtol=4 * np.finfo(float).eps,
                  maxiter=200)


def simulate_model(
    q: RadialProfile,
    r_max: float,
    tol: float = MODEL_TOL,
    n_grid: int = 2001,
) -> ModelTrajectory:
    """Integrate ``v'' = -q v`` from r = 0 to r_max with an adaptive 8(5,3) pair.

    The conjugate radius and mean-convex radius are bracketed on the step
    points and refined on the dense output.
    """
    if q.domain_start > 0:
        raise PreconditionError("the model starts at r = 0; profile must be defined there")
    if not 0 < r_max <= q.horizon:
        raise PreconditionError(f"r_max={r_max} outside (0, {q.horizon}]")

    def rhs(r, y):
        return [y[1], -float(q._eval(np.asarray(r))) * y[0]]

    dense = _PiecewiseDense()
    y = np.array([0.0, 1.0])
    steps = [np.array([0.0])]
    for lo, hi in _segments(0.0, r_max, q.breakpoints(0.0, r_max)):
        sol = solve_ivp(rhs, (lo, hi), y, method="DOP853", rtol=tol, atol=tol * 1e-2,
                        dense_output=True)
        if not sol.success:
            raise IntegrationError(f"model integration failed: {sol.message}", radius=float(sol.t[-1]))
        dense.add(lo, hi, sol.sol)
        steps.append(sol.t[1:])
        y = sol.y[:, -1]
    ts = np.concatenate(steps)
    # subdivide each step so sign changes are not skipped between step points
    fine = np.unique(np.concatenate([ts, 0.5 * (ts[:-1] + ts[1:])]))
    probe = fine[1:]
    st = dense(probe)

    rho = _first_root(lambda r: dense(r)[0, 0], probe, st[0])
    zeta_probe = probe if rho is None else probe[probe < rho]
    zeta = _first_root(lambda r: dense(r)[1, 0], zeta_probe, st[1][: zeta_probe.size])

    pts = [np.linspace(0.0, r_max, n_grid), [d for d in _REFINE if d < r_max]]
    if zeta is not None:
        pts.append([zeta])
    if rho is not None:
        pts.append([rho - d for d in _REFINE if rho - d > 0])
        pts.append([rho])
    grid = np.unique(np.concatenate([np.asarray(p, dtype=float) for p in pts]))
    v, vp = dense(grid)
    v[0], vp[0] = 0.0, 1.0
    inside = (grid > 0) & (v > 0)
    if rho is not None:
        inside &= grid < rho
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.where(inside, vp / v, np.nan)
    m[0] = np.inf
    return ModelTrajectory(grid, v, vp, m, zeta, rho, q, r_max, dense)


def riccati_residual(traj: ModelTrajectory) -> tuple[np.ndarray, np.ndarray]:
    """Residual ``m' + m^2 + q`` at grid midpoints inside (0, rho).

    ``m'`` is the quotient-rule derivative ``v''/v - m^2`` with ``v''`` taken
    by five-point central differences of the dense ``v'``; the residual therefore
    reduces to ``(v''_fd + q v) / v``, which avoids cancelling two large
    terms near the endpoints.
    """
    g = traj.grid
    ok = np.isfinite(traj.m)
    pairs = np.nonzero(ok[:-1] & ok[1:])[0]
    walls = [0.0] + traj.q_ref.breakpoints(0.0, traj.r_max)
    if traj.rho is not None:
        walls.append(traj.rho)
    mids = 0.5 * (g[pairs] + g[pairs + 1])
    h = _fd_steps(mids, walls)
    mids, h = mids[np.isfinite(h)], h[np.isfinite(h)]
    v = traj.dense(mids)[0]
    vpp = _diff5(lambda r: traj.dense(r)[1], mids, h)
    return mids, (vpp + traj.q_ref._eval(mids) * v) / v


class SegmentCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def verify_segment_theorem(traj: ModelTrajectory, psi: TestFunction,
                           tol: float = DEFAULT_TOL) -> SegmentCheck:
    """Evaluate the segment inequality on [0, rho] of a simulated model."""
    if traj.rho is None:
        raise PreconditionError("trajectory has no conjugate radius")
    cmp = eval_segment_criterion(traj.q_ref, psi, traj.rho, tol)
    return SegmentCheck(cmp.lhs, cmp.rhs, cmp.lhs < cmp.rhs)


# ---------------------------------------------------------------------------
# Squeeze solutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SqueezeSolution:
    grid: np.ndarray
    phi: np.ndarray
    psi_ref: TestFunction
    q_ref: RadialProfile
    boundary: float
    dense: Callable = field(repr=False)

    @property
    def a(self) -> float:
        return float(self.grid[0])

    @property
    def b(self) -> float:
        return float(self.grid[-1])


def _squeeze_rhs(q: RadialProfile, psi: TestFunction):
    def rhs(r, y):
        rr = np.asarray(r)
        qv = float(q._eval(rr))
        pv = float(psi._eval(rr))
        return [qv / (pv * pv + qv) - float(psi._deriv(rr)) * y[0] ** 2]

    return rhs


def solve_squeeze(
    q: RadialProfile,
    psi: TestFunction,
    a: float,
    b: float,
    tol: float = MODEL_TOL,
    traj: ModelTrajectory | None = None,
    n_grid: int = 1001,
) -> SqueezeSolution:
    """Solve ``phi' = q/(psi^2 + q) - psi' phi^2`` leftwards from ``phi(b) = 1/psi(b)``.

    When ``traj`` is given, b must not pass its mean-convex radius.
    """
    if not b > a:
        raise PreconditionError(f"need a < b, got [{a}, {b}]")
    if traj is not None and traj.zeta is not None and b > traj.zeta * (1 + 1e-12):
        raise PreconditionError(f"b={b} beyond the mean-convex radius {traj.zeta}")
    rhs = _squeeze_rhs(q, psi)

    def blowup(r, y):
        return BLOWUP - abs(y[0])

    blowup.terminal = True

    boundary = 1.0 / float(psi(b))
    y = np.array([boundary])
    dense = _PiecewiseDense()
    breaks = set(q.breakpoints(a, b)) | set(psi.breakpoints(a, b))
    pieces = []
    for lo, hi in reversed(_segments(a, b, breaks)):
        sol = solve_ivp(rhs, (hi, lo), y, method="DOP853", rtol=tol, atol=tol * 1e-2,
                        dense_output=True, events=blowup)
        if sol.status == 1:
            raise IntegrationError("squeeze solution blew up", radius=float(sol.t_events[0][0]))
        if not sol.success:
            raise IntegrationError(f"squeeze integration failed: {sol.message}",
                                   radius=float(sol.t[-1]))
        pieces.append((lo, hi, sol.sol))
        y = sol.y[:, -1]
    for lo, hi, s in reversed(pieces):
        dense.add(lo, hi, s)
    grid = np.unique(np.concatenate([np.linspace(a, b, n_grid), sorted(breaks)]))
    phi = dense(grid)[0]
    return SqueezeSolution(grid, phi, psi, q, boundary, dense)


def squeeze_residual(sol: SqueezeSolution) -> float:
    """Largest ODE residual at grid midpoints, derivative by five-point differences."""
    g = sol.grid
    walls = [sol.a, sol.b] + sol.q_ref.breakpoints(sol.a, sol.b) + sol.psi_ref.breakpoints(sol.a, sol.b)
    mids = 0.5 * (g[:-1] + g[1:])
    h = _fd_steps(mids, walls)
    mids, h = mids[np.isfinite(h)], h[np.isfinite(h)]
    dphi = _diff5(lambda r: sol.dense(r)[0], mids, h)
    phi = sol.dense(mids)[0]
    qv, pv = sol.q_ref._eval(mids), sol.psi_ref._eval(mids)
    res = dphi + sol.psi_ref._deriv(mids) * phi * phi - qv / (pv * pv + qv)
    return float(np.max(np.abs(res), initial=0.0))


class SandwichCheck(NamedTuple):
    max_lower_violation: float
    max_upper_violation: float


def verify_sandwich(sol: SqueezeSolution, traj: ModelTrajectory) -> SandwichCheck:
    """Largest violations of ``1/(psi + m) <= phi`` and ``phi <= 1/psi``."""
    if sol.b > traj.r_max or (traj.rho is not None and sol.b >= traj.rho):
        raise PreconditionError("squeeze interval is not inside the trajectory's (0, rho)")
    if sol.q_ref != traj.q_ref:
        raise PreconditionError("squeeze solution and trajectory use different profiles")
    r = sol.grid
    m = traj.m_at(r)
    psi = sol.psi_ref(r)
    with np.errstate(divide="ignore"):
        lower = np.where(np.isinf(m), 0.0, 1.0 / (psi + m))
    low = float(np.max(lower - sol.phi, initial=0.0))
    up = float(np.max(sol.phi - 1.0 / psi, initial=0.0))
    return SandwichCheck(max(low, 0.0), max(up, 0.0))


# ---------------------------------------------------------------------------
# Second variation and ray checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SineBump:
    """``sin(pi (r - lo)/(hi - lo))``, vanishing at both ends."""

    lo: float
    hi: float

    def __call__(self, r):
        return np.sin(math.pi * (np.asarray(r) - self.lo) / (self.hi - self.lo))

    def derivative(self, r):
        w = math.pi / (self.hi - self.lo)
        return w * np.cos(w * (np.asarray(r) - self.lo))

    def vanishes_at(self, r: float) -> bool:
        return r in (self.lo, self.hi)


@dataclass(frozen=True)
class PolyBump:
    """``(4 (r - lo)(hi - r)/(hi - lo)^2)^k``, peak value 1."""

    lo: float
    hi: float
    k: int = 2

    def __call__(self, r):
        s = 4 * (np.asarray(r) - self.lo) * (self.hi - np.asarray(r)) / (self.hi - self.lo) ** 2
        return s**self.k

    def derivative(self, r):
        r = np.asarray(r)
        w2 = (self.hi - self.lo) ** 2
        s = 4 * (r - self.lo) * (self.hi - r) / w2
        ds = 4 * (self.lo + self.hi - 2 * r) / w2
        return self.k * s ** (self.k - 1) * ds

    def vanishes_at(self, r: float) -> bool:
        return r in (self.lo, self.hi)


@dataclass(frozen=True)
class ConstantU:
    value: float = 1.0

    def __call__(self, r):
        return np.full_like(np.asarray(r, dtype=float), self.value)

    def derivative(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def vanishes_at(self, r: float) -> bool:
        return self.value == 0


def second_variation_check(traj: ModelTrajectory, u, a: float, b: float,
                           tol: float = DEFAULT_TOL) -> Comparison:
    """Both sides of ``int u^2 q <= u^2(a) m(a) - u^2(b) m(b) + int u'^2``.

    The inequality follows from ``int (u' - m u)^2 >= 0`` and holds for any
    smooth u on [a, b] inside (0, rho], with equality iff u is a multiple
    of v.  Boundary terms at an endpoint where u vanishes are taken as
    their limit 0; elsewhere m must be finite there.
    """
    if not 0 <= a < b:
        raise PreconditionError(f"need 0 <= a < b, got [{a}, {b}]")
    if b > traj.r_max or (traj.rho is not None and b > traj.rho):
        raise PreconditionError(f"b={b} beyond the conjugate radius / trajectory end")

    def boundary(r):
        if u.vanishes_at(r):
            return 0.0
        m = float(traj.m_at(r)[0])
        if not math.isfinite(m):
            raise PreconditionError(f"u does not vanish where m is singular (r={r})")
        return float(u(r)) ** 2 * m

    q = traj.q_ref
    brk = q.breakpoints(a, b)
    lhs = integrate_adaptive(lambda r: u(r) ** 2 * q._eval(r), a, b, tol, brk)
    grad = integrate_adaptive(lambda r: u.derivative(r) ** 2, a, b, tol)
    rhs = boundary(a) - boundary(b) + grad.value
    return Comparison(lhs.value, rhs, lhs.error + grad.error)


class RayCheck(NamedTuple):
    F: float
    bound: float
    holds: bool


def verify_ray_criterion_on_model(
    q: RadialProfile,
    psi: TestFunction,
    a: float,
    b: float,
    tol: float = DEFAULT_TOL,
    horizon: float = 1e4,
) -> RayCheck:
    """Check F(q, psi, a, b) <= 1 on a model certified free of conjugate points."""
    traj = simulate_model(q, horizon, n_grid=101)
    if traj.rho is not None:
        raise PreconditionError(f"model has a conjugate point at r={traj.rho}")
    F = eval_F(q, psi, a, b, tol).value
    return RayCheck(F, 1.0, F <= 1.0 + 10 * tol)


__all__ = [
    "ModelTrajectory", "SqueezeSolution", "simulate_model", "riccati_residual",
    "verify_segment_theorem", "solve_squeeze", "squeeze_residual", "verify_sandwich",
    "SineBump", "PolyBump", "ConstantU", "second_variation_check",
    "verify_ray_criterion_on_model", "SegmentCheck", "SandwichCheck", "RayCheck",
]
