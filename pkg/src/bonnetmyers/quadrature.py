"""Globally adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

Panels are refined by bisection until the summed error estimate drops below
an absolute tolerance.  All panels that need refinement in a sweep are
evaluated in one vectorised call to the integrand, so ``f`` must accept a
1-D numpy array.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, NamedTuple

import numpy as np

from .errors import QuadratureError

# 15-point Kronrod abscissae (positive half, descending) and weights;
# the embedded 7-point Gauss rule uses every other node.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny

MAX_DEPTH = 60
MAX_PANELS = 200_000


class Quadrature(NamedTuple):
    value: float
    error: float


def gk15(f: Callable, lo: np.ndarray, hi: np.ndarray):
    """Apply the G7/K15 pair on each panel [lo[i], hi[i]].

    Returns (integral, error estimate) arrays using the QUADPACK error
    heuristic.
    """
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * NODES[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(fx)):
        raise QuadratureError("integrand returned a non-finite value")
    resk = fx @ KRONROD_WEIGHTS
    resg = fx @ GAUSS_WEIGHTS
    reskh = 0.5 * resk
    resabs = np.abs(fx) @ KRONROD_WEIGHTS
    resasc = np.abs(fx - reskh[:, None]) @ KRONROD_WEIGHTS
    err = np.abs((resk - resg) * half)
    resasc = resasc * np.abs(half)
    resabs = resabs * np.abs(half)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc != 0) & (err != 0), scaled, err)
    floor = 50.0 * _EPS * resabs
    err = np.where(resabs > _TINY / (50.0 * _EPS), np.maximum(floor, err), err)
    return resk * half, err


def _initial_edges(a: float, b: float, breakpoints: Iterable[float]) -> np.ndarray:
    pts = {a, b}
    pts.update(x for x in breakpoints if a < x < b)
    # long ranges get a geometric seed so decaying integrands refine cheaply
    lo = max(a, 1.0)
    if b > 16.0 * lo:
        x = 2.0 * lo
        while x < b:
            pts.add(x)
            x *= 2.0
    return np.array(sorted(pts))


def integrate_adaptive(
    f: Callable,
    a: float,
    b: float,
    tol: float = 1e-10,
    breakpoints: Iterable[float] = (),
    max_depth: int = MAX_DEPTH,
) -> Quadrature:
    """Integrate ``f`` over the finite interval [a, b] to absolute ``tol``.

    Panels never straddle a supplied breakpoint.  Raises
    :class:`QuadratureError` (carrying the best estimate) when a panel hits
    ``max_depth`` or the panel budget is exhausted before convergence.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("integrate_adaptive needs finite limits")
    if not b > a:
        raise ValueError(f"integrate_adaptive needs a < b, got [{a}, {b}]")
    edges = _initial_edges(a, b, breakpoints)
    lo, hi = edges[:-1], edges[1:]
    depth = np.zeros(lo.size, dtype=int)
    val, err = gk15(f, lo, hi)

    while True:
        total_err = math.fsum(err)
        if total_err <= tol:
            return Quadrature(math.fsum(val), total_err)
        # refine every panel whose error exceeds its fair share
        share = tol / max(val.size, 1)
        refine = err > share
        if not np.any(refine):
            refine = err >= err.max()
        stuck = refine & ((depth >= max_depth) | ((hi - lo) <= 4 * _EPS * np.maximum(np.abs(lo), np.abs(hi))))
        if np.any(stuck):
            raise QuadratureError(
                f"depth limit reached on [{lo[stuck][0]}, {hi[stuck][0]}]",
                value=math.fsum(val), error=total_err,
            )
        if val.size + refine.sum() > MAX_PANELS:
            raise QuadratureError("panel budget exhausted", value=math.fsum(val), error=total_err)
        rlo, rhi, rdepth = lo[refine], hi[refine], depth[refine] + 1
        rmid = 0.5 * (rlo + rhi)
        new_lo = np.concatenate([rlo, rmid])
        new_hi = np.concatenate([rmid, rhi])
        new_val, new_err = gk15(f, new_lo, new_hi)
        keep = ~refine
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        depth = np.concatenate([depth[keep], rdepth, rdepth])
        val = np.concatenate([val[keep], new_val])
        err = np.concatenate([err[keep], new_err])
