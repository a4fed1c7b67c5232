"""m-dimensional entropy, marginals, the chain rule and mutual information.

All deterministic routes integrate over the joint support with the area
formula.  Expectations ``E[g(x)]`` therefore become parameter-space integrals
``sum_k int theta(f_k(t)) g(f_k(t)) J_{f_k}(t) dt``.  Marginal densities of
curves come from the coarea formula (sum of ``theta / J^E`` over the fiber);
marginals of independent products come from the factor densities directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .geometry import (DiscreteSupport, LipschitzChart, QuadratureError, SupportAtlas,
                       chart_jacobians, coarea_fiber_integral, critical_params,
                       hausdorff_integral, integrate_chart, projection_jacobians)
from .sources import RectifiableSource, product_source, sample

__all__ = [
    "EntropyEstimate",
    "JointDecomposition",
    "DENSITY_FLOOR",
    "entropy",
    "entropy_analytic",
    "entropy_quadrature",
    "entropy_monte_carlo",
    "entropy_transformed",
    "marginal_density",
    "marginal_source",
    "marginal_entropy",
    "marginal_entropy_direct",
    "jacobian_correction",
    "conditional_entropy",
    "joint_decomposition",
    "mutual_information",
]

DENSITY_FLOOR = 1e-300
METHODS = ("analytic", "quadrature", "monte_carlo")


@dataclass(frozen=True)
class EntropyEstimate:
    """An entropy value in nats with the route that produced it."""

    value: float
    method: str
    std_error: float = 0.0
    n_samples: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.method != "monte_carlo" and self.std_error != 0:
            raise ValueError("deterministic estimates have zero standard error")

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class JointDecomposition:
    """Terms of ``h(x, y) = h(y) + h(x | y) - E[log J^E_{p_y}]``."""

    joint: EntropyEstimate
    marginal_y: EntropyEstimate
    conditional_x_given_y: EntropyEstimate
    jacobian_correction: EntropyEstimate

    @property
    def residual(self) -> float:
        return (self.joint.value - self.marginal_y.value - self.conditional_x_given_y.value
                + self.jacobian_correction.value)


def _log_density(theta):
    return np.log(np.maximum(theta, DENSITY_FLOOR))


def _coords(coords, M):
    c = tuple(int(v) for v in np.atleast_1d(coords))
    if not c or len(set(c)) != len(c) or min(c) < 0 or max(c) >= M:
        raise ValueError(f"invalid coordinates {c} for ambient dimension {M}")
    return c


def _expectation(source: RectifiableSource, fn: Callable, coords=None,
                 tol: Optional[float] = None) -> float:
    """``E[fn(chart, t, points)]`` for ``x = chart(t)``, integrated chart by chart.

    For curves the critical parameters of the projected coordinate are passed
    to the adaptive rule as breakpoints, since log-singular integrands live
    there.
    """
    charts = source.support.charts
    chart_tol = None if tol is None else tol / len(charts)
    total = 0.0
    for chart in charts:
        breaks = ()
        if coords is not None and chart.param_dim == 1 and len(coords) == 1:
            breaks = critical_params(chart, coords[0])

        def h(t, chart=chart):
            P = chart(t)
            theta = source.density(P)
            out = np.zeros(len(t))
            pos = theta > 0
            if pos.any():
                out[pos] = (theta[pos] * fn(chart, t[pos], P[pos])
                            * chart_jacobians(chart, t[pos]))
            return out

        val, _ = integrate_chart(chart, h, chart_tol, breaks)
        total += val
    if not math.isfinite(total):
        raise QuadratureError(f"non-finite expectation over {source.name}", total)
    return total


# ---------------------------------------------------------------------------
# Entropy of a single source


def entropy_analytic(source: RectifiableSource) -> EntropyEstimate:
    if source.analytic_entropy is None:
        raise ValueError(f"{source.name} has no closed-form entropy")
    return EntropyEstimate(float(source.analytic_entropy), "analytic")


def entropy_quadrature(source: RectifiableSource, tol: Optional[float] = None) -> EntropyEstimate:
    """``-int_E theta log theta dH^m`` by area-formula quadrature.

    Discrete supports reduce to ``-sum p log p`` since ``H^0`` counts points.
    Non-convergent quadrature raises :class:`QuadratureError`, whose message
    names the offending chart.
    """

    def g(P):
        theta = source.density(P)
        return np.where(theta > 0, -theta * _log_density(theta), 0.0)

    val = hausdorff_integral(source.support, g, tol=tol)
    return EntropyEstimate(float(val), "quadrature")


def entropy_monte_carlo(source: RectifiableSource, seed, n: int,
                        chunk: int = 1 << 18) -> EntropyEstimate:
    """Sample mean of ``-log theta`` with standard error ``std / sqrt(n)``."""
    if n < 100:
        raise ValueError("Monte Carlo entropy needs at least 100 samples")
    X = sample(source, seed, n)
    vals = np.empty(n)
    for a in range(0, n, chunk):
        theta = source.density(X[a:a + chunk])
        if np.any(theta <= 0):
            bad = X[a:a + chunk][np.argmax(theta <= 0)]
            raise ArithmeticError(f"sampled point {bad.tolist()} has zero density")
        vals[a:a + chunk] = -np.log(theta)
    return EntropyEstimate(float(vals.mean()), "monte_carlo",
                           float(vals.std(ddof=1) / math.sqrt(n)), n)


def entropy_transformed(base_entropy: float, expected_log_jacobian: float) -> float:
    """Entropy of a one-to-one Lipschitz image: ``h(x) + E[log J(x)]``."""
    if not (math.isfinite(base_entropy) and math.isfinite(expected_log_jacobian)):
        raise ValueError("both terms must be finite")
    return float(base_entropy) + float(expected_log_jacobian)


def entropy(source: RectifiableSource, method: str = "quadrature", *, seed=42,
            n: int = 100_000, tol: Optional[float] = None) -> EntropyEstimate:
    if method == "analytic":
        return entropy_analytic(source)
    if method == "quadrature":
        return entropy_quadrature(source, tol)
    if method == "monte_carlo":
        return entropy_monte_carlo(source, seed, n)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


# ---------------------------------------------------------------------------
# Marginals


def _factor_block(joint: RectifiableSource, coords):
    off = 0
    for f in joint.factors:
        if coords == tuple(range(off, off + f.ambient_dim)):
            return f
        off += f.ambient_dim
    return None


def _memoized_rows(scalar_fn):
    memo = {}

    def density(y):
        Y = np.atleast_2d(np.asarray(y, dtype=float))
        out = np.empty(len(Y))
        for i, row in enumerate(Y):
            key = tuple(row.tolist())
            if key not in memo:
                memo[key] = scalar_fn(row)
            out[i] = memo[key]
        return out

    return density


def _full_dim_marginal(joint: RectifiableSource, coord: int):
    """Marginal of one coordinate of a density on a planar region (J^E = 1)."""
    (chart,) = joint.support.charts
    other = 1 - coord
    lo, hi = _coordinate_range(joint, other)

    def scalar(row):
        y = float(row[0])

        def f(t):
            p = np.empty((1, 2))
            p[0, coord], p[0, other] = y, t
            return float(joint.density(p)[0])

        val, _ = integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-11, limit=400)
        return val

    return _memoized_rows(scalar)


def _coordinate_range(source: RectifiableSource, coord: int, grid: int = 513):
    lo, hi = math.inf, -math.inf
    for chart in source.support.charts:
        axes = [np.linspace(a, b, grid if chart.param_dim == 1 else 65)
                for a, b in zip(chart.lower, chart.upper)]
        T = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, chart.param_dim)
        if chart.param_dim == 1:
            T = np.concatenate([T, np.array(critical_params(chart, coord)).reshape(-1, 1)])
        v = chart(T)[:, coord]
        lo, hi = min(lo, float(v.min())), max(hi, float(v.max()))
    return lo, hi


def marginal_density(joint: RectifiableSource, coords) -> Callable[[np.ndarray], np.ndarray]:
    """Hausdorff density of the projection of ``joint`` onto ``coords``.

    Supported cases: a factor block of an independent product, one coordinate
    of a curve (coarea sum over the fiber), and one coordinate of a planar
    full-dimensional source.  The returned callable takes ``(n, k)`` arrays.
    """
    if isinstance(joint.support, DiscreteSupport):
        raise NotImplementedError("marginals of discrete sources are not supported")
    c = _coords(coords, joint.ambient_dim)
    if len(c) > joint.dim:
        raise ValueError("cannot project onto more coordinates than the support dimension")
    factor = _factor_block(joint, c)
    if factor is not None:
        return lambda y: factor.density(np.atleast_2d(np.asarray(y, dtype=float)))
    if joint.dim == 1:
        support = joint.support
        return _memoized_rows(
            lambda row: coarea_fiber_integral(support, c, row[0], joint.density))
    if joint.dim == joint.ambient_dim == 2 and len(joint.support.charts) == 1:
        return _full_dim_marginal(joint, c[0])
    raise NotImplementedError(
        f"marginal of {joint.name} onto coordinates {c} is not supported")


def marginal_source(joint: RectifiableSource, coords) -> RectifiableSource:
    """The projected variable as a source in its own right.

    Factor blocks of products return the factor.  Otherwise the projection
    is one coordinate, and the source lives on the interval it covers.
    """
    c = _coords(coords, joint.ambient_dim)
    factor = _factor_block(joint, c)
    if factor is not None:
        return factor
    if len(c) != 1:
        raise NotImplementedError("only single-coordinate marginals are built as sources")
    lo, hi = _coordinate_range(joint, c[0])
    chart = LipschitzChart(lambda t: t, (lo,), (hi,), 1,
                           analytic_jacobian=lambda t: np.ones(len(t)),
                           differential=lambda t: np.ones((len(t), 1, 1)),
                           inverse=lambda p: p, name=f"coord{c[0]}")
    dens = marginal_density(joint, c)

    def density(points):
        P = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(P))
        inside = (P[:, 0] > lo) & (P[:, 0] < hi)
        if inside.any():
            out[inside] = dens(P[inside])
        return out

    def sampler(rng, n):
        return sample(joint, rng, n)[:, list(c)]

    return RectifiableSource(SupportAtlas((chart,), name=chart.name), density, sampler,
                             None, f"{joint.name}[{c[0]}]")


def marginal_entropy(joint: RectifiableSource, coords,
                     tol: Optional[float] = None) -> EntropyEstimate:
    """``-int_E theta(x) log theta_y(p(x)) dH^m(x)`` over the joint support."""
    c = _coords(coords, joint.ambient_dim)
    dens = marginal_density(joint, c)

    def fn(chart, t, P):
        return -_log_density(dens(P[:, list(c)]))

    return EntropyEstimate(_expectation(joint, fn, c, tol), "quadrature")


def marginal_entropy_direct(joint: RectifiableSource, coord: int) -> EntropyEstimate:
    """``-int f log f dy`` of a one-coordinate marginal, as a 1-D integral."""
    src = marginal_source(joint, [coord])
    (chart,) = src.support.charts
    lo, hi = chart.lower[0], chart.upper[0]
    dens = marginal_density(joint, [coord])

    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)

    # y = mid + half sin(u) absorbs inverse-square-root growth at the ends
    def f(u):
        c, y = math.cos(u), mid + half * math.sin(u)
        if min(y - lo, hi - y) <= 1e-13 * (1.0 + abs(y)):
            # fibers degenerate at the range ends; the dropped sliver is O(1e-6)
            return 0.0
        v = float(dens(np.array([[y]]))[0])
        return -v * math.log(v) * half * c if v > 0 else 0.0

    val, _ = integrate.quad(f, -0.5 * math.pi, 0.5 * math.pi, epsabs=1e-9, epsrel=1e-9,
                            limit=400)
    return EntropyEstimate(float(val), "quadrature")


def jacobian_correction(joint: RectifiableSource, coords,
                        tol: Optional[float] = None) -> EntropyEstimate:
    """``E[log J^E_{p_coords}]`` over the joint distribution."""
    c = _coords(coords, joint.ambient_dim)
    if c == tuple(range(joint.ambient_dim)):
        return EntropyEstimate(0.0, "quadrature")

    factor = _factor_block(joint, c)
    rank = factor.dim if factor is not None else None

    def fn(chart, t, P):
        J = projection_jacobians(chart, t, c, rank)
        return np.log(np.maximum(np.nan_to_num(J, nan=0.0), DENSITY_FLOOR))

    return EntropyEstimate(_expectation(joint, fn, c, tol), "quadrature")


def conditional_entropy(joint: RectifiableSource, coords,
                        tol: Optional[float] = None) -> EntropyEstimate:
    """``h(x | y) = -E[log(theta / theta_y)] + E[log J^E_{p_y}]``.

    Only this expectation form is used; regular conditional distributions
    are never constructed.
    """
    c = _coords(coords, joint.ambient_dim)
    dens = marginal_density(joint, c)

    def fn(chart, t, P):
        return _log_density(dens(P[:, list(c)])) - _log_density(joint.density(P))

    first = _expectation(joint, fn, c, tol)
    return EntropyEstimate(first + jacobian_correction(joint, c, tol).value, "quadrature")


def joint_decomposition(joint: RectifiableSource, coords,
                        tol: Optional[float] = None) -> JointDecomposition:
    c = _coords(coords, joint.ambient_dim)
    return JointDecomposition(entropy_quadrature(joint, tol), marginal_entropy(joint, c, tol),
                              conditional_entropy(joint, c, tol),
                              jacobian_correction(joint, c, tol))


# ---------------------------------------------------------------------------
# Mutual information


def mutual_information(s1: RectifiableSource, s2: RectifiableSource,
                       joint: Optional[RectifiableSource] = None, method: str = "quadrature",
                       **kwargs) -> float:
    """``I(x; y) = h(x) + h(y) - h(x, y)``, or ``inf`` if the joint has lower dimension.

    Without ``joint`` the pair is taken to be independent.
    """
    m1, m2 = s1.dim, s2.dim
    if joint is None:
        joint = product_source(s1, s2)
    if joint.ambient_dim != s1.ambient_dim + s2.ambient_dim:
        raise ValueError("joint ambient dimension must be the sum of the marginal ones")
    if joint.dim > m1 + m2:
        raise ValueError(f"joint dimension {joint.dim} exceeds {m1} + {m2}")
    if joint.dim < m1 + m2:
        return math.inf
    h = [entropy(s, method, **kwargs).value for s in (s1, s2, joint)]
    return h[0] + h[1] - h[2]
