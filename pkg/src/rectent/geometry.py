"""Rectifiable supports as atlases of Lipschitz charts, with Hausdorff integration.

A support of dimension ``m`` in ``R^M`` is stored as an ordered list of
one-to-one charts ``f_k: A_k -> R^M`` over axis-aligned boxes.  Integrals with
respect to ``H^m`` restricted to the support are evaluated through the area
formula, and fiber integrals of the coarea formula are evaluated by locating
the finitely many fiber points of a curve with root finding.

Conventions
-----------
* Chart maps are vectorized: ``map(x)`` takes an ``(n, m)`` array of
  parameters and returns an ``(n, M)`` array of points.
* Integrands ``g`` are vectorized over ambient points: ``g(p)`` takes an
  ``(n, M)`` array and returns ``(n,)`` values.
* Chart domains are half-open boxes ``[lower, upper)`` so that charts covering
  adjacent parameter ranges do not share points.
* Coordinate indices are zero-based.
"""
from __future__ import annotations

import warnings
import weakref
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy import integrate, optimize, spatial

__all__ = [
    "DomainError",
    "QuadratureError",
    "DegeneracyError",
    "RootFindingError",
    "LipschitzChart",
    "SupportAtlas",
    "DiscreteSupport",
    "FiberPoint",
    "chart_differential",
    "chart_jacobians",
    "jacobian_determinant",
    "hausdorff_integral",
    "integrate_chart",
    "projection_jacobians",
    "tangential_projection_jacobian",
    "locate",
    "critical_params",
    "fiber_points",
    "coarea_fiber_integral",
    "is_one_to_one",
]

# Jacobians below this are treated as zero.
DEGENERACY_TOL = 1e-12


class DomainError(ValueError):
    """A parameter lies outside a chart domain."""


class QuadratureError(ArithmeticError):
    """Quadrature did not reach the requested tolerance.

    The best available estimate and its error indicator are kept on the
    exception so callers can decide whether to use them anyway.
    """

    def __init__(self, message, estimate=float("nan"), residual=float("inf")):
        super().__init__(f"{message} (estimate={estimate!r}, residual={residual!r})")
        self.estimate = estimate
        self.residual = residual


class DegeneracyError(ArithmeticError):
    """A chart has a vanishing Jacobian where a tangent space is required."""


class RootFindingError(RuntimeError):
    """Fiber points of a chart could not be resolved."""


@dataclass(frozen=True, eq=False)
class LipschitzChart:
    """One-to-one Lipschitz map from a box in ``R^m`` into ``R^M``."""

    map: Callable[[np.ndarray], np.ndarray]
    lower: tuple
    upper: tuple
    ambient_dim: int
    analytic_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    differential: Optional[Callable[[np.ndarray], np.ndarray]] = None
    inverse: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lipschitz_bound: float = 1.0
    name: str = ""

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or len(lo) == 0:
            raise ValueError("lower and upper must have the same positive length")
        if not all(np.isfinite(lo + hi)) or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"chart domain must be a bounded nonempty box, got {lo}, {hi}")
        if self.ambient_dim < len(lo):
            raise ValueError("ambient dimension must be at least the parameter dimension")
        if self.lipschitz_bound <= 0:
            raise ValueError("lipschitz_bound must be positive")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def param_dim(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.map(_as_params(x, self.param_dim)), dtype=float)

    def contains(self, x, closed: bool = False) -> np.ndarray:
        x = _as_params(x, self.param_dim)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        if closed:
            return np.all((x >= lo) & (x <= hi), axis=1)
        return np.all((x >= lo) & (x < hi), axis=1)

    def restrict(self, lower, upper) -> "LipschitzChart":
        """Same map on a sub-box of the domain."""
        lo = np.maximum(np.atleast_1d(lower), self.lower)
        hi = np.minimum(np.atleast_1d(upper), self.upper)
        return LipschitzChart(self.map, tuple(lo), tuple(hi), self.ambient_dim,
                              self.analytic_jacobian, self.differential, self.inverse,
                              self.lipschitz_bound, self.name)

    def invert(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Parameters of ``points`` and a mask of those lying on this chart."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if self.inverse is not None:
            X = _as_params(self.inverse(P), self.param_dim)
        elif self.param_dim == 1:
            X = _numeric_inverse_1d(self, P)
        else:
            raise NotImplementedError("numeric inversion is only available for curves")
        ok = self.contains(X)
        resid = np.full(len(P), np.inf)
        if ok.any():
            resid[ok] = np.linalg.norm(self(X[ok]) - P[ok], axis=1)
        scale = 1.0 + np.linalg.norm(P, axis=1)
        return X, ok & (resid <= 1e-8 * scale)


@dataclass(frozen=True, eq=False)
class SupportAtlas:
    """Union of chart images with pairwise H^m-null overlaps."""

    charts: tuple
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        charts = tuple(self.charts)
        if not charts:
            raise ValueError("an atlas needs at least one chart")
        dims = {(c.param_dim, c.ambient_dim) for c in charts}
        if len(dims) != 1:
            raise ValueError(f"charts disagree on dimensions: {sorted(dims)}")
        object.__setattr__(self, "charts", charts)

    @property
    def dim(self) -> int:
        return self.charts[0].param_dim

    @property
    def ambient_dim(self) -> int:
        return self.charts[0].ambient_dim

    def measure(self, tol: Optional[float] = None) -> float:
        """Total Hausdorff measure ``H^m(E)``."""
        key = ("measure", tol)
        if key not in self._cache:
            self._cache[key] = hausdorff_integral(self, _ones, tol=tol)
        return self._cache[key]


@dataclass(frozen=True, eq=False)
class DiscreteSupport:
    """Finite support; ``H^0`` is the counting measure on it."""

    points: np.ndarray
    name: str = ""

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ValueError("support points must be pairwise distinct")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return 0

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    def measure(self, tol=None) -> float:
        return float(len(self.points))


@dataclass(frozen=True)
class FiberPoint:
    chart_index: int
    param: float
    point: np.ndarray
    jacobian: float


def _ones(p):
    return np.ones(len(p))


def _as_params(x, m: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1) if m == 1 else x.reshape(1, -1)
    if x.shape[1] != m:
        raise ValueError(f"expected parameters of dimension {m}, got shape {x.shape}")
    return x


def _fd_steps(x):
    return np.maximum(1e-6, 1e-6 * np.abs(x))


def chart_differential(chart: LipschitzChart, x) -> np.ndarray:
    """Differential ``D f(x)`` with shape ``(n, M, m)``.

    Central differences with step ``max(1e-6, 1e-6 |x_i|)`` unless the chart
    carries an analytic differential.
    """
    x = _as_params(x, chart.param_dim)
    if chart.differential is not None:
        return np.asarray(chart.differential(x), dtype=float).reshape(len(x), chart.ambient_dim,
                                                                      chart.param_dim)
    n, m = x.shape
    D = np.empty((n, chart.ambient_dim, m))
    h = _fd_steps(x)
    for i in range(m):
        xp, xm = x.copy(), x.copy()
        xp[:, i] += h[:, i]
        xm[:, i] -= h[:, i]
        D[:, :, i] = (chart(xp) - chart(xm)) / (2.0 * h[:, [i]])
    return D


def _gram_root(D: np.ndarray) -> np.ndarray:
    if D.shape[2] == 1:
        return np.linalg.norm(D[:, :, 0], axis=1)
    G = np.einsum("nki,nkj->nij", D, D)
    return np.sqrt(np.clip(np.linalg.det(G), 0.0, None))


def chart_jacobians(chart: LipschitzChart, x, numeric: bool = False) -> np.ndarray:
    """Vectorized ``J_f(x) = sqrt(det(D^T D))``."""
    x = _as_params(x, chart.param_dim)
    if chart.analytic_jacobian is not None and not numeric:
        return np.asarray(chart.analytic_jacobian(x), dtype=float).reshape(len(x))
    return _gram_root(chart_differential(chart, x))


def jacobian_determinant(chart: LipschitzChart, x, with_flag: bool = False, numeric: bool = False):
    """Jacobian determinant of ``chart`` at the single parameter ``x``.

    Returns the analytic value when the chart has one (unless ``numeric``),
    otherwise a central finite-difference estimate.  With ``with_flag`` a
    ``(value, degenerate)`` pair is returned; degenerate points evaluate to 0.
    """
    x = _as_params(x, chart.param_dim)
    if len(x) != 1:
        raise ValueError("jacobian_determinant takes a single point")
    if not chart.contains(x, closed=True)[0]:
        raise DomainError(f"{x[0]} is outside the chart domain {chart.lower}..{chart.upper}")
    J = float(chart_jacobians(chart, x, numeric=numeric)[0])
    degenerate = not np.isfinite(J) or J <= DEGENERACY_TOL
    if degenerate:
        J = 0.0
    return (J, degenerate) if with_flag else J


# ---------------------------------------------------------------------------
# Area formula


def _check_finite(value, what):
    if not np.isfinite(value):
        raise QuadratureError(f"non-finite partial sum in {what}", value)


def _quad_1d(fun, a, b, tol, what, points=()):
    """Adaptive Gauss-Kronrod on [a, b] split at ``points``."""
    cuts = sorted({a, b, *(p for p in points if a < p < b)})
    pieces = list(zip(cuts[:-1], cuts[1:]))
    piece_tol = tol / len(pieces)
    total, resid = 0.0, 0.0
    for lo, hi in pieces:
        out = integrate.quad(fun, lo, hi, epsabs=piece_tol, epsrel=1e-11, limit=400,
                             full_output=1)
        val, err = out[0], out[1]
        ier = 0 if len(out) == 3 else 1
        if not (np.isfinite(val) and np.isfinite(err)):
            raise QuadratureError(f"quadrature diverged on [{lo}, {hi}] in {what}", val, err)
        divergent = ier and "divergent" in out[3]
        if divergent or (ier and err > max(piece_tol, 1e-10 * abs(val))):
            raise QuadratureError(f"quadrature did not converge on [{lo}, {hi}] in {what}: "
                                  f"{out[3].splitlines()[0]}", total + val, resid + err)
        total += val
        resid += err
    return total, resid


def _gauss_legendre_axis(lo, hi, panels, order):
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _tensor_rule(f, lower, upper, panels, order, chunk=1 << 17):
    axes = [_gauss_legendre_axis(lo, hi, panels, order) for lo, hi in zip(lower, upper)]
    first_nodes, first_w = axes[0]
    if len(axes) > 1:
        rest = np.stack(np.meshgrid(*[a[0] for a in axes[1:]], indexing="ij"), -1)
        rest = rest.reshape(-1, len(axes) - 1)
        rest_w = np.prod(np.stack(np.meshgrid(*[a[1] for a in axes[1:]], indexing="ij"), -1),
                         axis=-1).ravel()
    else:
        rest = np.zeros((1, 0))
        rest_w = np.ones(1)
    rows = max(1, chunk // len(rest))
    total = 0.0
    for start in range(0, len(first_nodes), rows):
        xs = first_nodes[start:start + rows]
        X = np.concatenate([np.repeat(xs, len(rest))[:, None], np.tile(rest, (len(xs), 1))], axis=1)
        W = np.outer(first_w[start:start + rows], rest_w).ravel()
        vals = f(X)
        partial = float(np.dot(W, vals))
        _check_finite(partial, "tensor quadrature")
        total += partial
    return total


def _tensor_integral(f, lower, upper, tol, what, order=16, max_points=1 << 22):
    m = len(lower)
    panels = 2
    prev = _tensor_rule(f, lower, upper, panels, order)
    resid = float("inf")
    while True:
        panels *= 2
        if (panels * order) ** m > max_points:
            raise QuadratureError(f"tensor quadrature did not converge in {what}", prev, resid)
        cur = _tensor_rule(f, lower, upper, panels, order)
        resid = abs(cur - prev)
        if resid <= max(tol, 1e-12 * abs(cur)):
            return cur, resid
        prev = cur


def integrate_chart(chart: LipschitzChart, h: Callable[[np.ndarray], np.ndarray],
                    tol: Optional[float] = None, breakpoints: Sequence[float] = ()):
    """Integrate ``h(x)`` over the chart's parameter box with respect to Lebesgue measure.

    ``h`` is vectorized over ``(n, m)`` parameter arrays.  Returns
    ``(value, error_estimate)``.
    """
    m = chart.param_dim
    if m == 1:
        tol = 1e-8 if tol is None else tol

        def fun(t):
            return float(h(np.array([[t]]))[0])

        return _quad_1d(fun, chart.lower[0], chart.upper[0], tol, chart.name or "chart",
                        breakpoints)
    tol = 1e-6 if tol is None else tol
    return _tensor_integral(h, chart.lower, chart.upper, tol, chart.name or "chart")


def hausdorff_integral(support, g: Callable[[np.ndarray], np.ndarray], *,
                       tol: Optional[float] = None,
                       breakpoints: Optional[Mapping[int, Sequence[float]]] = None,
                       return_error: bool = False):
    """``int_E g dH^m`` by the area formula, summed over the charts of ``support``.

    Curves use adaptive Gauss-Kronrod quadrature (default absolute tolerance
    1e-8); higher-dimensional charts use refined tensor Gauss-Legendre rules
    (default 1e-6).  ``breakpoints`` maps chart indices to parameters where
    the integrand has kinks or integrable singularities.
    """
    if isinstance(support, DiscreteSupport):
        val = float(np.sum(g(support.points)))
        _check_finite(val, "counting-measure sum")
        return (val, 0.0) if return_error else val
    breakpoints = breakpoints or {}
    charts = support.charts
    chart_tol = None if tol is None else tol / len(charts)
    total, resid = 0.0, 0.0
    for k, chart in enumerate(charts):

        def h(x, chart=chart):
            return g(chart(x)) * chart_jacobians(chart, x)

        val, err = integrate_chart(chart, h, chart_tol, breakpoints.get(k, ()))
        total += val
        resid += err
    _check_finite(total, "hausdorff_integral")
    return (total, resid) if return_error else total


# ---------------------------------------------------------------------------
# Tangential Jacobians of coordinate projections


def _check_coords(coords, M):
    coords = [int(c) for c in np.atleast_1d(coords)]
    if not coords or len(set(coords)) != len(coords) or min(coords) < 0 or max(coords) >= M:
        raise ValueError(f"coords must be distinct indices in [0, {M}), got {coords}")
    return coords


def projection_jacobians(chart: LipschitzChart, x, coords, rank: Optional[int] = None) -> np.ndarray:
    """``J^E_p`` of the projection onto ``coords`` at chart parameters ``x``.

    The tangent space is spanned by an orthonormal frame ``Q`` of the chart
    differential; with ``A`` the selected rows of ``Q`` the Jacobian is
    ``sqrt(det(A A^T))`` when projecting to fewer dimensions than ``m`` and
    ``sqrt(det(A^T A))`` otherwise.

    ``rank`` is the dimension of the image set when it is smaller than both
    (a curve factor inside a plane, say); the Jacobian is then the product
    of the ``rank`` largest singular values of ``A``.
    """
    x = _as_params(x, chart.param_dim)
    coords = _check_coords(coords, chart.ambient_dim)
    D = chart_differential(chart, x)
    Q, R = np.linalg.qr(D)
    diag = np.abs(np.diagonal(R, axis1=1, axis2=2))
    A = Q[:, coords, :]
    if rank is not None and rank < min(len(coords), chart.param_dim):
        sv = np.linalg.svd(A, compute_uv=False)
        J = np.prod(sv[:, :rank], axis=1)
    elif len(coords) >= chart.param_dim:
        J = _gram_root(A)
    else:
        G = np.einsum("nim,njm->nij", A, A)
        J = np.sqrt(np.clip(np.linalg.det(G), 0.0, None))
    # undefined tangent space
    J[np.min(diag, axis=1) <= DEGENERACY_TOL] = np.nan
    return J


def locate(support: SupportAtlas, p) -> Optional[tuple[int, np.ndarray]]:
    """Chart index and parameter of the support point ``p``, or ``None``."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    for k, chart in enumerate(support.charts):
        X, ok = chart.invert(p)
        if ok[0]:
            return k, X[0]
    return None


def tangential_projection_jacobian(support: SupportAtlas, coords, p, with_flag: bool = False):
    """``J^E_{p_coords}`` at the support point ``p``.

    A vanishing value is returned as 0 (flagged degenerate); a point where the
    chart itself has no tangent space raises :class:`DegeneracyError`.
    """
    where = locate(support, p)
    if where is None:
        raise DomainError(f"{np.asarray(p).tolist()} is not on the support")
    k, x = where
    J = float(projection_jacobians(support.charts[k], x, coords)[0])
    if np.isnan(J):
        raise DegeneracyError(f"chart {k} has no tangent space at parameter {x.tolist()}")
    degenerate = J <= DEGENERACY_TOL
    if degenerate:
        J = 0.0
    return (J, degenerate) if with_flag else J


# ---------------------------------------------------------------------------
# Fibers of curve projections

_CRITICAL_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _coordinate_derivative(chart, coord):
    def d(t):
        return chart_differential(chart, np.atleast_1d(t))[:, coord, 0]
    return d


def critical_params(chart: LipschitzChart, coord: int, grid: int = 2048) -> tuple:
    """Interior parameters where ``t -> f(t)[coord]`` is stationary (curves only)."""
    if chart.param_dim != 1:
        raise NotImplementedError("critical points are computed for curves only")
    per_chart = _CRITICAL_CACHE.setdefault(chart, {})
    if coord in per_chart:
        return per_chart[coord]
    lo, hi = chart.lower[0], chart.upper[0]
    d = _coordinate_derivative(chart, coord)
    t = np.linspace(lo, hi, grid + 1)
    v = d(t)
    scale = max(1e-300, float(np.max(np.abs(v))))
    found = []
    for i in range(grid):
        a, b = v[i], v[i + 1]
        if abs(a) <= 1e-14 * scale and 0 < i:
            found.append(t[i])
        elif a * b < 0:
            r = optimize.brentq(lambda s: float(d(s)[0]), t[i], t[i + 1], xtol=1e-15,
                                rtol=4 * np.finfo(float).eps)
            found.append(r)
    crit = tuple(sorted(r for r in found if lo < r < hi))
    per_chart[coord] = crit
    return crit


def fiber_points(support: SupportAtlas, coords, y) -> list[FiberPoint]:
    """Points of the support whose ``coords`` coordinate equals ``y``.

    Only curves projected to a single coordinate are supported.  Each chart is
    split at the critical points of the projected coordinate, so every piece
    is monotone and holds at most one fiber point, located by Brent's method.
    Points with vanishing tangential Jacobian are dropped with a warning.
    """
    if support.dim != 1:
        raise NotImplementedError("fiber enumeration requires a 1-dimensional support")
    (coord,) = _check_coords(coords, support.ambient_dim)
    y = float(np.asarray(y).ravel()[0])
    out, seen = [], []
    for k, chart in enumerate(support.charts):
        lo, hi = chart.lower[0], chart.upper[0]
        cuts = [lo, *critical_params(chart, coord), hi]
        vals = chart(np.asarray(cuts))[:, coord] - y
        # rounding of closed curves at the chart ends (sin(2 pi) != 0) counts as a hit
        zero = 64 * np.finfo(float).eps * (1.0 + abs(y))
        roots = []
        for i in range(len(cuts) - 1):
            a, b = cuts[i], cuts[i + 1]
            fa, fb = vals[i], vals[i + 1]
            if abs(fa) <= zero:
                roots.append(a)
            elif abs(fb) <= zero:
                continue
            elif fa * fb < 0:
                try:
                    r = optimize.brentq(lambda s: float(chart(s)[0, coord]) - y, a, b,
                                        xtol=1e-13, rtol=4 * np.finfo(float).eps)
                except (RuntimeError, ValueError) as exc:
                    raise RootFindingError(f"root finding failed on chart {k} "
                                           f"({chart.name or 'unnamed'}): {exc}") from exc
                roots.append(r)
        uniq = []
        for r in roots:
            if r < hi and not any(abs(r - u) <= 1e-12 for u in uniq):
                uniq.append(r)
        if uniq:
            # drop parameters whose images coincide with a point already found
            imgs = chart(np.asarray(uniq))
            keep = [i for i in range(len(uniq))
                    if not any(np.linalg.norm(imgs[i] - q) <= 1e-10 for q in seen + [
                        imgs[j] for j in range(i)])]
            seen.extend(imgs[keep])
            uniq = [uniq[i] for i in keep]
        if not uniq:
            continue
        J = projection_jacobians(chart, np.asarray(uniq), [coord])
        pts = chart(np.asarray(uniq))
        for r, Jr, pt in zip(uniq, J, pts):
            if not np.isfinite(Jr) or Jr <= DEGENERACY_TOL:
                warnings.warn(f"dropping degenerate fiber point at parameter {r} of chart {k}",
                              RuntimeWarning, stacklevel=2)
                continue
            out.append(FiberPoint(k, float(r), pt, float(Jr)))
    return out


def coarea_fiber_integral(support: SupportAtlas, coords, y,
                          g: Callable[[np.ndarray], np.ndarray]) -> float:
    """Fiber integral ``int_{E^(y)} g / J^E_{p_y} dH^0`` for a curve.

    The fiber over ``y`` is a finite point set, so the integral is the sum of
    ``g / J^E`` over fiber points.  An empty fiber gives 0.
    """
    pts = fiber_points(support, coords, y)
    if not pts:
        return 0.0
    P = np.array([fp.point for fp in pts])
    J = np.array([fp.jacobian for fp in pts])
    return float(np.sum(np.asarray(g(P), dtype=float) / J))


def _numeric_inverse_1d(chart: LipschitzChart, P: np.ndarray, grid: int = 4096) -> np.ndarray:
    lo, hi = chart.lower[0], chart.upper[0]
    t = np.linspace(lo, hi, grid + 1)
    F = chart(t)
    out = np.empty((len(P), 1))
    step = (hi - lo) / grid
    for i, p in enumerate(P):
        j = int(np.argmin(np.sum((F - p) ** 2, axis=1)))
        a, b = max(lo, t[j] - step), min(hi, t[j] + step)
        res = optimize.minimize_scalar(lambda s: float(np.sum((chart(s)[0] - p) ** 2)),
                                       bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-13})
        out[i, 0] = res.x
    return out


def is_one_to_one(chart: LipschitzChart, samples: int = 20000, seed: int = 0,
                  ratio: float = 100.0) -> bool:
    """Statistical check that distinct parameters have distinct images.

    Random parameters are mapped and near-coincident images are found with a
    k-d tree.  A pair whose parameters are much farther apart than their
    images (by ``ratio``) signals a self-intersection.  Pairs touching the box
    boundary are ignored, since closed curves meet themselves there only in
    the limit.
    """
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(chart.lower), np.asarray(chart.upper)
    X = lo + (hi - lo) * rng.random((samples, chart.param_dim))
    P = chart(X)
    tree = spatial.cKDTree(P)
    nn = tree.query(P, k=2)[0][:, 1]
    r = 4.0 * float(np.median(nn))
    pairs = tree.query_pairs(r, output_type="ndarray")
    if len(pairs) == 0:
        return True
    i, j = pairs[:, 0], pairs[:, 1]
    dp = np.linalg.norm(X[i] - X[j], axis=1)
    di = np.linalg.norm(P[i] - P[j], axis=1)
    margin = np.minimum(np.min(np.minimum(X - lo, hi - X), axis=1)[i],
                        np.min(np.minimum(X - lo, hi - X), axis=1)[j])
    bad = (dp > ratio * np.maximum(di, 1e-300)) & (margin > 2.0 * ratio * r)
    return not bool(np.any(bad))
