"""Shannon lower bound and a constructive upper bound for sources on curves.

For a source with entropy ``h`` on a support ``E`` and a distortion ``d``,

    R(D) >= R_SLB(D, s) = h - s D - log gamma(s),
    gamma(s) = sup_y int_E exp(-s d(x, y)) dH^m(x),

for every ``s >= 0``.  On the unit circle with squared error the inner
integral depends only on ``|y|``, so ``y = (y1, 0)`` with ``y1`` in [0, 1].
Its stationary points solve ``int (cos phi - y1) exp(2 s y1 cos phi) dphi = 0``,
which always has the root ``y1 = 0``; the others are bracketed on a grid.

The upper bound maps the uniform circle to ``n`` arc centroids, giving
``R(Dbar_n) <= log n`` with ``Dbar_n = 1 - ((n / pi) sin(pi / n))**2``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .csvio import write_csv
from .geometry import SupportAtlas, hausdorff_integral

__all__ = [
    "GammaPoint",
    "SlbCurve",
    "RdUpperPoint",
    "GapError",
    "circle_inner_integral",
    "gamma_of_s",
    "gamma_general",
    "gamma_curve",
    "slb",
    "slb_sweep",
    "slb_maximize",
    "slb_envelope",
    "rd_upper_bound",
    "rd_upper_curve",
    "upper_curve_at",
    "arc_quantizer_distortion",
    "gap_report",
    "log_grid",
    "write_gammas_csv",
    "write_slb_sweep_csv",
    "write_envelope_csv",
    "write_upper_csv",
    "write_gaps_csv",
]

TWO_PI = 2.0 * math.pi
INNER_ABS_TOL = 1e-10
ROOT_CELLS = 64


class GapError(AssertionError):
    """A lower bound exceeded an upper bound beyond tolerance."""


@dataclass(frozen=True)
class GammaPoint:
    s: float
    y_star: np.ndarray
    gamma: float
    d_star: float


@dataclass(frozen=True)
class SlbCurve:
    """Parametric SLB points, the zero-slope line, and their envelope on a D grid."""

    s: np.ndarray
    d_param: np.ndarray
    r_param: np.ndarray
    horizontal: float
    D: np.ndarray
    R: np.ndarray
    branch: tuple
    gammas: tuple


@dataclass(frozen=True)
class RdUpperPoint:
    n: int
    D_bar: float
    R: float


def log_grid(lo: float, hi: float, points: int) -> np.ndarray:
    if not (0 < lo < hi) or points < 2:
        raise ValueError("need 0 < lo < hi and at least two points")
    return np.logspace(math.log10(lo), math.log10(hi), points)


# ---------------------------------------------------------------------------
# gamma(s) on the unit circle


def _quad_phi(f, what):
    # integrand peaks at phi = 0, so integrate over [-pi, pi] split there
    total, err = 0.0, 0.0
    for a, b in ((-math.pi, 0.0), (0.0, math.pi)):
        val, e = integrate.quad(f, a, b, epsabs=INNER_ABS_TOL / 4, epsrel=1e-12, limit=400)
        total += val
        err += e
    if not math.isfinite(total):
        raise ArithmeticError(f"non-finite {what}")
    return total


def _f_s(y1: float, s: float) -> float:
    """``int_0^{2pi} exp(-s (1 + y1^2 - 2 y1 cos phi)) dphi``."""
    return _quad_phi(lambda p: math.exp(-s * (1.0 + y1 * y1 - 2.0 * y1 * math.cos(p))),
                     "inner integral")


def _stationarity(y1: float, s: float) -> float:
    """``int (cos phi - y1) exp(2 s y1 (cos phi - 1)) dphi`` (scaled to avoid overflow)."""
    return _quad_phi(lambda p: (math.cos(p) - y1) * math.exp(2.0 * s * y1 * (math.cos(p) - 1.0)),
                     "stationarity integral")


def _stationarity_over_y(y1: float, s: float) -> float:
    # removes the trivial root at 0; the limit at 0 is int (2 s cos^2 - 1) dphi
    if y1 == 0.0:
        return _quad_phi(lambda p: 2.0 * s * math.cos(p) ** 2 - 1.0, "stationarity slope")
    return _stationarity(y1, s) / y1


def _distortion_mean(y1: float, s: float, gamma: float) -> float:
    def f(p):
        d = 1.0 + y1 * y1 - 2.0 * y1 * math.cos(p)
        return d * math.exp(-s * d)
    return _quad_phi(f, "distortion integral") / gamma


def circle_inner_integral(y, s: float) -> float:
    """``int_{S_1} exp(-s |x - y|^2) dH^1(x)`` for any ``y`` in ``R^2``."""
    y = np.asarray(y, dtype=float).ravel()
    r = float(np.hypot(y[0], y[1]))
    return _f_s(r, s)


def gamma_of_s(s: float) -> GammaPoint:
    """``gamma(s)`` on the unit circle under squared error, with its maximizer.

    Stationary points in (0, 1] are bracketed on 64 cells and refined with
    Brent's method to 1e-12; they are compared with the endpoints 0 and 1.
    """
    s = float(s)
    if not s >= 0:
        raise ValueError("s must be nonnegative")
    if s == 0.0:
        return GammaPoint(0.0, np.zeros(2), TWO_PI, 1.0)
    candidates = [0.0, 1.0]
    grid = np.linspace(0.0, 1.0, ROOT_CELLS + 1)
    try:
        vals = [_stationarity_over_y(y, s) for y in grid]
        for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
            if fa == 0.0:
                candidates.append(float(a))
            elif fa * fb < 0:
                candidates.append(optimize.brentq(_stationarity_over_y, a, b, args=(s,),
                                                  xtol=1e-12, rtol=1e-15))
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        warnings.warn(f"root bracketing failed at s = {s}: {exc}; "
                      "falling back to bounded maximization", RuntimeWarning, stacklevel=2)
        res = optimize.minimize_scalar(lambda y: -_f_s(y, s), bounds=(0.0, 1.0),
                                       method="bounded", options={"xatol": 1e-12})
        candidates.append(float(res.x))
    values = [_f_s(y, s) for y in candidates]
    k = int(np.argmax(values))
    y1, gamma = candidates[k], values[k]
    return GammaPoint(s, np.array([y1, 0.0]), gamma, _distortion_mean(y1, s, gamma))


def gamma_curve(s_grid: Sequence[float]) -> list:
    return [gamma_of_s(s) for s in s_grid]


def gamma_general(support: SupportAtlas, s: float,
                  distortion: Optional[Callable] = None, grid: int = 21,
                  seed: int = 0) -> GammaPoint:
    """``gamma(s)`` for any chart-based support by grid search and Nelder-Mead polish.

    ``distortion(P, y)`` maps ``(n, M)`` points and one ``y`` to ``n`` values;
    squared error is the default.
    """
    if distortion is None:
        def distortion(P, y):
            return np.sum((P - y) ** 2, axis=1)

    def inner(y):
        return hausdorff_integral(support, lambda P: np.exp(-s * distortion(P, y)))

    rng = np.random.default_rng(seed)
    probe = np.concatenate([c(c.lower + (np.asarray(c.upper) - c.lower)
                              * rng.random((256, c.param_dim))) for c in support.charts])
    lo, hi = probe.min(axis=0), probe.max(axis=0)
    axes = [np.linspace(a, b, grid) for a, b in zip(lo, hi)]
    Y = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, support.ambient_dim)
    vals = np.array([inner(y) for y in Y])
    best = Y[int(np.argmax(vals))]
    res = optimize.minimize(lambda y: -inner(y), best, method="Nelder-Mead",
                            options={"xatol": 1e-9, "fatol": 1e-13, "maxiter": 4000})
    y = res.x if -res.fun >= vals.max() else best
    gamma = inner(y)
    dmean = hausdorff_integral(
        support, lambda P: distortion(P, y) * np.exp(-s * distortion(P, y))) / gamma
    return GammaPoint(float(s), np.asarray(y), float(gamma), float(dmean))


# ---------------------------------------------------------------------------
# Shannon lower bound


def slb(source_entropy: float, D, s: float, gamma: float):
    """``R_SLB(D, s) = h - s D - log gamma``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return source_entropy - s * np.asarray(D, dtype=float) - math.log(gamma)


def slb_sweep(source_entropy: float, D: float, gammas: Sequence[GammaPoint]) -> np.ndarray:
    """``R_SLB(D, s)`` for each precomputed ``gamma(s)``."""
    return np.array([float(slb(source_entropy, D, g.s, g.gamma)) for g in gammas])


def slb_maximize(source_entropy: float, D: float, s_min: float, s_max: float,
                 points: int = 94):
    """Best single-``s`` bound at distortion ``D``: grid search then Brent polish.

    Returns ``(s_best, R_best)``.
    """
    grid = np.linspace(s_min, s_max, points)
    vals = slb_sweep(source_entropy, D, gamma_curve(grid))
    k = int(np.argmax(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, points - 1)]
    res = optimize.minimize_scalar(
        lambda s: -float(slb(source_entropy, D, s, gamma_of_s(s).gamma)),
        bounds=(a, b), method="bounded", options={"xatol": 1e-8})
    if -res.fun >= vals[k]:
        return float(res.x), float(-res.fun)
    return float(grid[k]), float(vals[k])


def slb_envelope(source_entropy: float, support_measure: float, D_grid: Sequence[float],
                 s_grid: Sequence[float],
                 gammas: Optional[Sequence[GammaPoint]] = None) -> SlbCurve:
    """Envelope of the Shannon lower bounds over ``s`` on a grid of distortions.

    Every line ``D -> R_SLB(D, s)`` is a lower bound, so their pointwise
    maximum over the ``s`` grid is one too; the ``s = 0`` line
    ``h - log H^m(E)`` is always included.  The parametric points
    ``(D*(s), R_SLB(D*(s), s))`` are kept for plotting.
    """
    D_grid = np.asarray(D_grid, dtype=float)
    s_grid = np.asarray(s_grid, dtype=float)
    if gammas is None:
        gammas = gamma_curve(s_grid)
    horizontal = source_entropy - math.log(support_measure)
    s = np.array([g.s for g in gammas])
    lg = np.array([math.log(g.gamma) for g in gammas])
    d_param = np.array([g.d_star for g in gammas])
    r_param = source_entropy - s * d_param - lg
    lines = source_entropy - np.outer(D_grid, s) - lg[None, :]
    best = lines.max(axis=1)
    R = np.maximum(best, horizontal)
    # ties (D = 1 on the uniform circle, where y* = 0 lines meet the s = 0 line) count as horizontal
    slack = 1e-12 * max(1.0, abs(horizontal))
    branch = tuple("param" if b > horizontal + slack else "horizontal" for b in best)
    return SlbCurve(s, d_param, r_param, horizontal, D_grid, R, branch, tuple(gammas))


# ---------------------------------------------------------------------------
# Upper bound from arc quantizers


def rd_upper_bound(n: int) -> RdUpperPoint:
    """``(Dbar_n, log n)`` for the ``n``-arc quantizer of the uniform circle."""
    if n < 1:
        raise ValueError("n must be at least 1")
    r = (n / math.pi) * math.sin(math.pi / n)
    return RdUpperPoint(int(n), 1.0 - r * r, math.log(n))


def rd_upper_curve(n_max: int = 1024) -> list:
    return [rd_upper_bound(n) for n in range(1, n_max + 1)]


def upper_curve_at(points: Sequence[RdUpperPoint], D) -> np.ndarray:
    """Piecewise-linear interpolation of the upper-bound points in ``D``.

    Chords between achievable points are achievable by time sharing.  Beyond
    ``Dbar_1 = 1`` the rate is 0; below the smallest ``Dbar`` it is undefined
    (``nan``).
    """
    d = np.array([p.D_bar for p in points])
    r = np.array([p.R for p in points])
    order = np.argsort(d)
    d, r = d[order], r[order]
    D = np.asarray(D, dtype=float)
    out = np.interp(D, d, r, left=np.nan, right=0.0)
    return out


def arc_quantizer_distortion(n: int, seed=42, samples: int = 1_000_000):
    """Monte Carlo squared error of the ``n``-arc quantizer on the uniform circle.

    Returns ``(mean, std_error)``.
    """
    rng = np.random.default_rng(seed)
    phi = TWO_PI * rng.random(samples)
    k = np.minimum(np.floor(phi * n / TWO_PI), n - 1)
    center = (2.0 * k + 1.0) * math.pi / n
    r = (n / math.pi) * math.sin(math.pi / n)
    d = (np.cos(phi) - r * np.cos(center)) ** 2 + (np.sin(phi) - r * np.sin(center)) ** 2
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(samples))


def gap_report(curve: SlbCurve, upper: Sequence[RdUpperPoint], tol: float = 1e-9):
    """Rows ``(D, lower, upper, gap)`` on the envelope's grid.

    Raises :class:`GapError` if the lower bound exceeds the upper bound by
    more than ``tol`` anywhere.
    """
    up = upper_curve_at(upper, curve.D)
    if np.any(np.isnan(up)):
        raise ValueError("the upper curve does not cover the whole D grid; raise n_max")
    gap = up - curve.R
    if np.any(gap < -tol):
        k = int(np.argmin(gap))
        raise GapError(f"lower bound {curve.R[k]!r} exceeds upper bound {up[k]!r} "
                       f"at D = {curve.D[k]!r}")
    return [(float(D), float(lo), float(hi), float(g))
            for D, lo, hi, g in zip(curve.D, curve.R, up, gap)]


# ---------------------------------------------------------------------------
# CSV output


def write_gammas_csv(gammas: Sequence[GammaPoint], out) -> None:
    write_csv(out, ("s", "y_star", "gamma"), [(g.s, g.y_star[0], g.gamma) for g in gammas])


def write_slb_sweep_csv(s_values, r_values, out) -> None:
    write_csv(out, ("s", "R_SLB"), zip(s_values, r_values))


def write_envelope_csv(curve: SlbCurve, out) -> None:
    write_csv(out, ("D", "R", "branch"), zip(curve.D, curve.R, curve.branch))


def write_upper_csv(points: Sequence[RdUpperPoint], out) -> None:
    write_csv(out, ("D", "R"), [(p.D_bar, p.R) for p in points])


def write_gaps_csv(rows, out) -> None:
    write_csv(out, ("D", "lower", "upper", "gap"), rows)
