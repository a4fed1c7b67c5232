"""Typical sets of i.i.d. rectifiable sequences.

A block ``x_1..x_n`` is epsilon-typical when ``|-(1/n) sum log theta(x_i) - h| <= eps``.
The probability of the typical set is estimated by simulation for any ``n``;
its Hausdorff measure ``H^{nm}`` is computed by quadrature for ``n`` in {1, 2}
and compared with ``(1 - delta) e^{n(h - eps)} <= H^{nm}(A) <= e^{n(h + eps)}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .entropy import DENSITY_FLOOR, entropy_quadrature
from .geometry import DiscreteSupport, QuadratureError, chart_jacobians
from .sources import RectifiableSource, sample

__all__ = [
    "TypicalSetReport",
    "MeasureSandwich",
    "reference_entropy",
    "empirical_typicality",
    "typical_measure_estimate",
    "measure_sandwich",
]

COMPARE_SLACK = 1e-12
LEVEL_GRID = 4096
PANELS = 16
LINE_GRID = 257
LINE_PANELS = 32
LINE_BATCH = 2048
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_INNER_NODES, _INNER_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class TypicalSetReport:
    n: int
    epsilon: float
    trials: int
    empirical_prob: float
    entropy_ref: float
    measure_bounds: Optional[tuple] = None
    delta: Optional[float] = None


@dataclass(frozen=True)
class MeasureSandwich:
    """Hausdorff measure of the typical set with its lower and upper bounds."""

    n: int
    epsilon: float
    measure: float
    probability: float
    delta: float
    lower: float
    upper: float
    tol: float

    @property
    def holds(self) -> bool:
        return self.lower - self.tol <= self.measure <= self.upper + self.tol


def reference_entropy(source: RectifiableSource) -> float:
    """Closed-form entropy when known, otherwise the quadrature value."""
    if source.analytic_entropy is not None:
        return float(source.analytic_entropy)
    return entropy_quadrature(source).value


def empirical_typicality(source: RectifiableSource, n: int, epsilon: float,
                         trials: int = 10_000, seed=42,
                         entropy_ref: Optional[float] = None) -> TypicalSetReport:
    """Fraction of simulated length-``n`` blocks that are epsilon-typical.

    All ``trials * n`` draws come from one generator seeded by ``seed``, so
    the result is reproducible and monotone in ``epsilon`` for a fixed seed.
    """
    if n < 1:
        raise ValueError("block length must be at least 1")
    if trials < 1000:
        raise ValueError("use at least 1000 trials")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    h = reference_entropy(source) if entropy_ref is None else float(entropy_ref)
    rng = np.random.default_rng(seed)
    hits = 0
    per_chunk = max(1, (1 << 20) // n)
    for a in range(0, trials, per_chunk):
        k = min(per_chunk, trials - a)
        X = sample(source, rng, k * n)
        info = -np.log(np.maximum(source.density(X), DENSITY_FLOOR)).reshape(k, n)
        hits += int(np.count_nonzero(np.abs(info.mean(axis=1) - h) <= epsilon + COMPARE_SLACK))
    prob = hits / trials
    return TypicalSetReport(n, float(epsilon), trials, prob, h, None, 1.0 - prob)


# ---------------------------------------------------------------------------
# Hausdorff measure of the typical set


class _LevelSets:
    """Sublevel structure of ``a(t) = -log theta(f(t))`` along one curve chart.

    ``a`` is sampled once on a fine grid and replaced by a cubic spline, whose
    roots give the crossings of any pair of levels.  For smooth densities the
    spline error at this spacing is far below the quadrature tolerances.
    """

    def __init__(self, source, chart, grid=LEVEL_GRID):
        self.source, self.chart = source, chart
        self.t0, self.t1 = chart.lower[0], chart.upper[0]
        # cell midpoints stay clear of the half-open chart end
        h = (self.t1 - self.t0) / grid
        mids = self.t0 + h * (np.arange(grid) + 0.5)
        self.spline = CubicSpline(mids, self.info(mids))
        self.slope = self.spline.derivative()
        self.grid = np.concatenate([[self.t0], mids, [self.t1]])
        self.values = self.spline(self.grid)
        self.range = (float(self.values.min()), float(self.values.max()))
        self.panels = np.linspace(self.t0, self.t1, PANELS + 1)

    def info(self, t):
        theta = self.source.density(self.chart(np.asarray(t, dtype=float).reshape(-1, 1)))
        return -np.log(np.maximum(theta, DENSITY_FLOOR))

    def jacobian(self, t):
        return chart_jacobians(self.chart, np.asarray(t, dtype=float).reshape(-1, 1))

    def mass(self, t):
        t = np.asarray(t, dtype=float).reshape(-1, 1)
        return self.source.density(self.chart(t)) * chart_jacobians(self.chart, t)

    def crossings(self, level):
        """Parameters where the spline crosses ``level`` (one per bracketing cell)."""
        g = self.values - level
        i = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)[0]
        if i.size == 0:
            return i.astype(float)
        a, b = self.grid[i], self.grid[i + 1]
        ga, gb = g[i], g[i + 1]
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(ga == gb, a, a - ga * (b - a) / (gb - ga))
        for _ in range(8):
            d = self.slope(t)
            step = np.where(d != 0, (self.spline(t) - level) / np.where(d != 0, d, 1.0), 0.0)
            t = np.clip(t - step, a, b)
        return t

    def integral(self, lo, hi, weight):
        """``int weight(t) dt`` over ``{t : lo <= a(t) <= hi}``."""
        cuts = [self.panels]
        for level in (lo, hi):
            if math.isfinite(level):
                cuts.append(self.crossings(level))
        cuts = np.unique(np.clip(np.concatenate(cuts), self.t0, self.t1))
        u, v = cuts[:-1], cuts[1:]
        keep = v > u
        u, v = u[keep], v[keep]
        am = self.spline(0.5 * (u + v))
        member = (am >= lo - COMPARE_SLACK) & (am <= hi + COMPARE_SLACK)
        if not member.any():
            return 0.0
        u, v = u[member], v[member]
        # weights are smooth on each piece, so a fixed Gauss-Legendre rule suffices
        half = 0.5 * (v - u)
        nodes = (0.5 * (u + v))[:, None] + half[:, None] * _GL_NODES
        vals = np.asarray(weight(nodes.ravel()), dtype=float).reshape(nodes.shape)
        return float(np.sum(half * (vals @ _GL_WEIGHTS)))


def _measure_curve(source, h, n, eps):
    levels = [_LevelSets(source, c) for c in source.support.charts]
    meas = prob = 0.0
    for Li in levels:
        if n == 1:
            meas += Li.integral(h - eps, h + eps, Li.jacobian)
            prob += Li.integral(h - eps, h + eps, Li.mass)
            continue
        for Lj in levels:
            # for each first coordinate the admissible second ones form a level band
            def inner(t1, outer, inner_weight):
                a1 = float(Li.spline(t1))
                band = Lj.integral(2 * (h - eps) - a1, 2 * (h + eps) - a1, inner_weight)
                return float(outer(t1)[0]) * band

            # the band enters or leaves the range of a_j at these first coordinates
            kinks = [Li.crossings(2 * (h + sgn * eps) - v)
                     for sgn in (-1, 1) for v in Lj.range]
            kinks = np.unique(np.concatenate(kinks))
            kinks = kinks[(kinks > Li.t0) & (kinks < Li.t1)]
            for which, wo, wi in (("m", Li.jacobian, Lj.jacobian), ("p", Li.mass, Lj.mass)):
                val, _ = integrate.quad(inner, Li.t0, Li.t1, args=(wo, wi), points=kinks,
                                        epsabs=1e-9, epsrel=1e-9, limit=400)
                if which == "m":
                    meas += val
                else:
                    prob += val
    return meas, prob


def _bracketed_roots(fn, a, b, fa, fb, iters=100):
    """Vectorized Illinois regula falsi for roots of ``fn`` in ``[a, b]``."""
    a, b, fa, fb = (np.array(v, dtype=float) for v in (a, b, fa, fb))
    side = np.zeros(len(a), dtype=int)
    c = 0.5 * (a + b)
    active = np.ones(len(a), dtype=bool)
    for _ in range(iters):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        A, B, FA, FB = a[idx], b[idx], fa[idx], fb[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            C = np.where(FB != FA, (A * FB - B * FA) / (FB - FA), 0.5 * (A + B))
        C = np.clip(C, np.minimum(A, B), np.maximum(A, B))
        FC = fn(idx, C)
        left = np.sign(FC) == np.sign(FA)
        # Illinois step: halve the stale end point's value to avoid stagnation
        FB = np.where(left & (side[idx] == 1), 0.5 * FB, FB)
        FA = np.where(~left & (side[idx] == -1), 0.5 * FA, FA)
        a[idx], fa[idx] = np.where(left, C, A), np.where(left, FC, FA)
        b[idx], fb[idx] = np.where(left, B, C), np.where(left, FB, FC)
        side[idx] = np.where(left, 1, -1)
        c[idx] = C
        done = (FC == 0) | (np.abs(b[idx] - a[idx]) <= 1e-13 * (1 + np.abs(C))) \
            | (np.abs(FC) <= 1e-15 * (1 + np.abs(C)))
        active[idx[done]] = False
    return c


def _golden_extrema(fn, a, b, iters=60):
    """Vectorized golden-section minimization of ``fn(index, t)`` on ``[a, b]``."""
    r = 0.5 * (math.sqrt(5.0) - 1.0)
    a, b = np.array(a, dtype=float), np.array(b, dtype=float)
    idx = np.arange(len(a))
    x1, x2 = b - r * (b - a), a + r * (b - a)
    f1, f2 = fn(idx, x1), fn(idx, x2)
    for _ in range(iters):
        left = f1 < f2
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        nx = np.where(left, b - r * (b - a), a + r * (b - a))
        fx = fn(idx, nx)
        x2, f2, x1, f1 = (np.where(left, x1, nx), np.where(left, f1, fx),
                          np.where(left, nx, x2), np.where(left, fx, f2))
    x = np.where(f1 < f2, x1, x2)
    return x, np.minimum(f1, f2)


def _pad_rows(row, values, n_rows):
    """Scatter ``values`` grouped by sorted ``row`` into an ``(n_rows, k)`` NaN-padded array."""
    width = int(np.bincount(row, minlength=n_rows).max()) if row.size else 0
    out = np.full((n_rows, width), np.nan)
    if row.size:
        slot = np.arange(len(row)) - np.searchsorted(row, row)
        out[row, slot] = values
    return out


def _band_lines(source, chart, lo, hi, outer, line_grid=LINE_GRID, line_panels=LINE_PANELS):
    """``(measure, probability)`` of the band ``lo <= a <= hi`` along lines.

    ``outer`` holds one row of leading chart parameters per line; the line
    runs over the last parameter.  Each line ``t -> a = -log theta`` is cut
    at its interior extrema,
    so every crossing of ``lo`` or ``hi`` sits on a monotone piece and is
    bracketed; the pieces inside the band get a Gauss-Legendre rule.
    """
    outer = np.atleast_2d(np.asarray(outer, dtype=float))
    l2, u2 = chart.lower[-1], chart.upper[-1]
    # the half-open upper end lies off the chart; stop just short of it
    grid = np.linspace(l2, u2 - 1e-12 * (u2 - l2), line_grid)
    panels = grid[::(line_grid - 1) // line_panels]
    R = len(outer)

    def info(rows, t2):
        P = chart(np.column_stack([outer[rows], t2]))
        return -np.log(np.maximum(source.density(P), DENSITY_FLOOR))

    A = info(np.repeat(np.arange(R), line_grid), np.tile(grid, R)).reshape(R, line_grid)
    D = np.sign(np.diff(A, axis=1))
    er, ek = np.nonzero(D[:, :-1] * D[:, 1:] < 0)
    sgn = np.where(D[er, ek] < 0, 1.0, -1.0)
    ex, ev = _golden_extrema(lambda i, t: sgn[i] * info(er[i], t), grid[ek], grid[ek + 2])
    T = np.concatenate([np.broadcast_to(grid, (R, line_grid)), _pad_rows(er, ex, R)], axis=1)
    V = np.concatenate([A, _pad_rows(er, sgn * ev, R)], axis=1)
    order = np.argsort(T, axis=1)  # NaN padding sorts last
    T, V = np.take_along_axis(T, order, 1), np.take_along_axis(V, order, 1)

    rows, a, b, fa, fb, lev = [], [], [], [], [], []
    for level in (lo, hi):
        g = V - level
        r, k = np.nonzero(np.sign(g[:, :-1]) * np.sign(g[:, 1:]) < 0)
        rows.append(r), a.append(T[r, k]), b.append(T[r, k + 1])
        fa.append(g[r, k]), fb.append(g[r, k + 1]), lev.append(np.full(len(r), level))
    rows, a, b, fa, fb, lev = map(np.concatenate, (rows, a, b, fa, fb, lev))
    roots = _bracketed_roots(lambda i, t: info(rows[i], t) - lev[i], a, b, fa, fb)
    order = np.argsort(rows, kind="stable")
    C = np.sort(np.concatenate([np.broadcast_to(panels, (R, len(panels))),
                                _pad_rows(rows[order], roots[order], R)], axis=1), axis=1)
    u, v = C[:, :-1], C[:, 1:]
    ok = np.isfinite(v) & (v > u)
    rr = np.nonzero(ok)[0]
    u, v = u[ok], v[ok]
    half = 0.5 * (v - u)
    nodes = (0.5 * (u + v))[:, None] + half[:, None] * _INNER_NODES
    X = np.column_stack([np.repeat(outer[rr], len(_INNER_NODES), axis=0), nodes.ravel()])
    theta = source.density(chart(X))
    J = chart_jacobians(chart, X)
    am = -np.log(np.maximum(theta, DENSITY_FLOOR)).reshape(nodes.shape)
    # a piece lies wholly inside or outside the band; its middle node decides
    mid = am[:, len(_INNER_NODES) // 2]
    wts = (half[:, None] * _INNER_WEIGHTS) * ((mid >= lo) & (mid <= hi))[:, None]
    return np.column_stack([
        np.bincount(rr, (J.reshape(nodes.shape) * wts).sum(axis=1), minlength=R),
        np.bincount(rr, ((theta * J).reshape(nodes.shape) * wts).sum(axis=1), minlength=R)])


def _adaptive_cubature(f, lower, upper, tol, order, start, rel_tol=0.0, max_rounds=30):
    """Batch-adaptive tensor Gauss-Legendre integral of a vector-valued ``f`` over a box.

    Every panel is compared with the sum over its ``2^k`` halves; panels
    whose difference exceeds their share ``tol * volume / total`` are split
    again until the summed differences fall below ``max(tol, rel_tol * |I|)``
    with ``I`` the first component of the first estimate.  ``f`` receives the
    nodes of a whole round as one ``(N, k)`` array.
    """
    lower, upper = np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)
    k = len(lower)
    x, w = np.polynomial.legendre.leggauss(order)
    X = np.stack(np.meshgrid(*[x] * k, indexing="ij"), -1).reshape(-1, k)
    W = np.prod(np.stack(np.meshgrid(*[w] * k, indexing="ij"), -1).reshape(-1, k), axis=1)
    corners = np.stack(np.meshgrid(*[[0.0, 0.5]] * k, indexing="ij"), -1).reshape(-1, k)
    total_volume = float(np.prod(upper - lower))

    def rule(lo, hi):
        half = 0.5 * (hi - lo)
        nodes = (0.5 * (lo + hi))[:, None, :] + half[:, None, :] * X[None, :, :]
        vals = f(nodes.reshape(-1, k)).reshape(len(lo), len(W), -1)
        return np.einsum("pnc,n,p->pc", vals, W, np.prod(half, axis=1))

    def split(lo, hi):
        size = hi - lo
        clo = (lo[:, None, :] + corners[None, :, :] * size[:, None, :]).reshape(-1, k)
        return clo, clo + np.repeat(0.5 * size, len(corners), axis=0)

    axes = [np.linspace(a, b, start + 1) for a, b in zip(lower, upper)]
    lo = np.stack(np.meshgrid(*[a[:-1] for a in axes], indexing="ij"), -1).reshape(-1, k)
    hi = np.stack(np.meshgrid(*[a[1:] for a in axes], indexing="ij"), -1).reshape(-1, k)
    coarse = rule(lo, hi)
    tol = max(tol, rel_tol * abs(float(coarse[:, 0].sum())))
    total = np.zeros(coarse.shape[1])
    err = 0.0
    for _ in range(max_rounds):
        clo, chi = split(lo, hi)
        fine = rule(clo, chi).reshape(len(lo), len(corners), -1)
        pair = fine.sum(axis=1)
        diff = np.max(np.abs(pair - coarse), axis=1)
        done = diff <= tol * np.prod(hi - lo, axis=1) / total_volume
        if err + diff.sum() <= tol:
            # the global budget is met, including panels over tangential kinks
            done[:] = True
        total += pair[done].sum(axis=0)
        err += float(diff[done].sum())
        if done.all():
            return total, err
        keep = np.repeat(~done, len(corners))
        lo, hi = clo[keep], chi[keep]
        coarse = fine[~done].reshape(-1, fine.shape[2])
    raise QuadratureError("adaptive outer integral did not converge", float(total[0]),
                          err + float(diff[~done].sum()))


def _measure_surface(source, h, eps):
    """Typical-set measure and probability on sources with m >= 2.

    Lines along the last chart parameter are integrated exactly between
    band crossings; the leading parameters get an adaptive tensor rule.
    Planar charts are taken to an absolute 1e-9.  Beyond two parameters
    the kinks where lines graze the band make that unaffordable; the error
    budget there is 1e-2 relative (observed errors are a few 1e-3).
    """
    lo, hi = h - eps - COMPARE_SLACK, h + eps + COMPARE_SLACK
    meas = prob = 0.0
    for c in source.support.charts:
        planar = c.param_dim == 2
        grid, panels = (LINE_GRID, LINE_PANELS) if planar else (129, 16)

        def lines(t, c=c, grid=grid, panels=panels):
            return np.concatenate([_band_lines(source, c, lo, hi, t[k:k + LINE_BATCH], grid, panels)
                                   for k in range(0, len(t), LINE_BATCH)])

        if planar:
            val, _ = _adaptive_cubature(lines, c.lower[:-1], c.upper[:-1], 1e-9, order=8, start=32)
        else:
            val, _ = _adaptive_cubature(lines, c.lower[:-1], c.upper[:-1], 1e-12, order=4, start=8,
                                        rel_tol=1e-2)
        meas, prob = meas + float(val[0]), prob + float(val[1])
    return meas, prob


def _typical_measure(source, n, eps, h):
    if n not in (1, 2):
        raise ValueError("the typical-set measure is computed for n in {1, 2} only")
    if eps < 0:
        raise ValueError("epsilon must be nonnegative")
    if isinstance(source.support, DiscreteSupport):
        p = source.density(source.support.points)
        if n == 1:
            inside = np.abs(-np.log(p) - h) <= eps + COMPARE_SLACK
            return float(np.count_nonzero(inside)), float(p[inside].sum())
        info = -np.log(p)
        pair = np.abs(0.5 * (info[:, None] + info[None, :]) - h) <= eps + COMPARE_SLACK
        return float(np.count_nonzero(pair)), float((np.outer(p, p))[pair].sum())
    if source.dim == 1:
        return _measure_curve(source, h, n, eps)
    if n == 1:
        return _measure_surface(source, h, eps)
    raise NotImplementedError("pairs of blocks are measured for curves only")


def typical_measure_estimate(source: RectifiableSource, n: int, epsilon: float,
                             entropy_ref: Optional[float] = None) -> float:
    """``H^{nm}`` of the epsilon-typical set of length-``n`` blocks (``n`` in {1, 2})."""
    h = reference_entropy(source) if entropy_ref is None else float(entropy_ref)
    return _typical_measure(source, n, epsilon, h)[0]


def measure_sandwich(source: RectifiableSource, n: int, epsilon: float,
                     report: Optional[TypicalSetReport] = None, tol: float = 1e-6,
                     entropy_ref: Optional[float] = None) -> MeasureSandwich:
    """Typical-set measure together with its exponential bounds.

    ``delta`` is ``1 - empirical_prob`` of ``report`` when one is given,
    otherwise ``1 - Pr{A}`` with ``Pr{A}`` computed by the same quadrature.
    """
    h = reference_entropy(source) if entropy_ref is None else float(entropy_ref)
    meas, prob = _typical_measure(source, n, epsilon, h)
    if report is not None:
        if report.n != n or report.epsilon != epsilon:
            raise ValueError("report was produced for a different n or epsilon")
        delta = report.delta
    else:
        delta = max(0.0, 1.0 - prob)
    lower = (1.0 - delta) * math.exp(n * (h - epsilon))
    upper = math.exp(n * (h + epsilon))
    return MeasureSandwich(n, float(epsilon), meas, prob, delta, lower, upper, tol)
