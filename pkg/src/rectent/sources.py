"""Rectifiable random variables with exact Hausdorff densities.

A source couples a support atlas with its Hausdorff density ``theta^m`` and a
seeded sampler.  Sources built by pushing a parameter density through a
one-to-one chart have density ``f(phi^-1(x)) / J_phi(phi^-1(x))``; the rank-one
matrix source ``z z^T`` folds the two preimages ``+-z`` into one chart on a
half space.

Catalog strings understood by :func:`from_catalog`::

    circle:uniform
    circle:vonmises:<kappa>
    wishart1:normal:<m>              m in {1, 2, 3}
    embed:normal:<m>:<M>
    gauss:corr:<rho>                 bivariate normal, unit variances
    product:<a>x<b>                  independent pair of two catalog sources
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special
from scipy.interpolate import PchipInterpolator

from .geometry import (DiscreteSupport, LipschitzChart, SupportAtlas, _tensor_integral,
                       chart_jacobians)

__all__ = [
    "ParamDensity",
    "RectifiableSource",
    "circle_chart",
    "embedding_chart",
    "wishart_chart",
    "product_chart",
    "uniform_angle",
    "vonmises_angle",
    "normal_density",
    "pushforward_source",
    "symmetrized_pushforward",
    "product_source",
    "circle_source",
    "discrete_source",
    "embedded_normal_source",
    "correlated_gaussian_source",
    "wishart1_source",
    "orthogonal_transform",
    "sample",
    "from_catalog",
    "CatalogError",
]

TWO_PI = 2.0 * math.pi
CDF_GRID = 4096


class CatalogError(ValueError):
    """Unknown or malformed catalog string."""


def _inverse_cdf_sampler(pdf, lo, hi):
    edges = np.linspace(lo, hi, CDF_GRID + 1)
    t, w = np.polynomial.legendre.leggauss(10)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = mid[:, None] + half[:, None] * t
    mass = (pdf(nodes.reshape(-1, 1)).reshape(nodes.shape) * w).sum(axis=1) * half
    cdf = np.concatenate([[0.0], np.cumsum(mass)])
    cdf /= cdf[-1]
    cdf, idx = np.unique(cdf, return_index=True)
    inv = PchipInterpolator(cdf, edges[idx])

    def draw(rng, n):
        u = rng.random(n)
        return np.clip(inv(u), lo, np.nextafter(hi, lo)).reshape(-1, 1)

    return draw


def _rejection_sampler(pdf, lower, upper, grid=48):
    lower, upper = np.asarray(lower), np.asarray(upper)
    axes = [np.linspace(a, b, grid) for a, b in zip(lower, upper)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(lower))
    bound = 1.5 * float(np.max(pdf(mesh)))

    def draw(rng, n):
        out = []
        have = 0
        while have < n:
            batch = max(1024, 2 * (n - have))
            X = lower + (upper - lower) * rng.random((batch, len(lower)))
            keep = X[rng.random(batch) * bound < pdf(X)]
            out.append(keep)
            have += len(keep)
        return np.concatenate(out)[:n]

    return draw


@dataclass(frozen=True, eq=False)
class ParamDensity:
    """Probability density on a box in ``R^m``; zero outside the box."""

    pdf: Callable[[np.ndarray], np.ndarray]
    lower: tuple
    upper: tuple
    sampler: Optional[Callable] = None
    name: str = ""
    check: bool = True

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if self.check:
            total = self.total_mass()
            if abs(total - 1.0) > 1e-6:
                raise ValueError(f"density {self.name!r} integrates to {total}, not 1")
        if self.sampler is None:
            draw = (_inverse_cdf_sampler(self._raw, lo[0], hi[0]) if self.dim == 1
                    else _rejection_sampler(self._raw, lo, hi))
            object.__setattr__(self, "sampler", draw)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def _raw(self, x):
        return np.asarray(self.pdf(x), dtype=float).reshape(len(x))

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.all((x >= self.lower) & (x < self.upper), axis=1)
        out = np.zeros(len(x))
        if inside.any():
            out[inside] = self._raw(x[inside])
        return out

    def total_mass(self) -> float:
        if self.dim == 1:
            val, _ = integrate.quad(lambda t: float(self._raw(np.array([[t]]))[0]),
                                    self.lower[0], self.upper[0], epsabs=1e-12,
                                    epsrel=1e-12, limit=400)
            return val
        val, _ = _tensor_integral(self._raw, self.lower, self.upper, 1e-9, self.name)
        return val

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.asarray(self.sampler(rng, n), dtype=float).reshape(n, self.dim)


@dataclass(frozen=True, eq=False)
class RectifiableSource:
    """m-rectifiable random variable: support atlas, Hausdorff density, sampler."""

    support: object
    density: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    analytic_entropy: Optional[float] = None
    name: str = ""
    factors: tuple = ()

    @property
    def dim(self) -> int:
        return self.support.dim

    @property
    def ambient_dim(self) -> int:
        return self.support.ambient_dim

    def on_support(self, points, tol: float = 1e-9) -> np.ndarray:
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if isinstance(self.support, DiscreteSupport):
            d = np.linalg.norm(P[:, None, :] - self.support.points[None], axis=2)
            return np.min(d, axis=1) <= tol
        mask = np.zeros(len(P), dtype=bool)
        for chart in self.support.charts:
            X, ok = chart.invert(P)
            mask |= ok
        return mask

    def density_with_flag(self, points):
        """Density values together with the on-support mask."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        return self.density(P), self.on_support(P)

    def sample(self, seed, n: int) -> np.ndarray:
        return sample(self, seed, n)


def sample(source: RectifiableSource, seed, n: int) -> np.ndarray:
    """``n`` points drawn from ``source``; identical for identical ``seed``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return np.asarray(source.sampler(rng, n), dtype=float).reshape(n, source.ambient_dim)


# ---------------------------------------------------------------------------
# Charts


def circle_chart(lower: float = 0.0, upper: float = TWO_PI) -> LipschitzChart:
    """Arc-length chart ``z -> (cos z, sin z)`` of the unit circle."""

    def f(z):
        return np.column_stack([np.cos(z[:, 0]), np.sin(z[:, 0])])

    def df(z):
        return np.stack([-np.sin(z[:, 0]), np.cos(z[:, 0])], axis=1)[:, :, None]

    def inv(p):
        return np.mod(np.arctan2(p[:, 1], p[:, 0]), TWO_PI).reshape(-1, 1)

    return LipschitzChart(f, (lower,), (upper,), 2, analytic_jacobian=lambda z: np.ones(len(z)),
                          differential=df, inverse=inv, name="circle")


def embedding_chart(m: int, M: int, half_width: float = 10.0) -> LipschitzChart:
    """``x -> (x, 0, ..., 0)`` from the box ``[-w, w]^m`` into ``R^M``."""
    if M < m:
        raise ValueError("ambient dimension must be at least m")

    def f(x):
        return np.concatenate([x, np.zeros((len(x), M - m))], axis=1)

    eye = np.eye(M, m)
    return LipschitzChart(f, (-half_width,) * m, (half_width,) * m, M,
                          analytic_jacobian=lambda x: np.ones(len(x)),
                          differential=lambda x: np.broadcast_to(eye, (len(x), M, m)),
                          inverse=lambda p: p[:, :m], name=f"embed{m}->{M}")


def wishart_chart(m: int, half_width: float = 8.0) -> LipschitzChart:
    """``z -> vec(z z^T)`` on the half box ``z_1 >= 0``, where it is one-to-one."""

    def f(z):
        return np.einsum("ni,nj->nij", z, z).reshape(len(z), m * m)

    def df(z):
        n = len(z)
        D = np.zeros((n, m, m, m))
        idx = np.arange(m)
        # d(z z^T)_{ij} / d z_k = delta_ik z_j + z_i delta_jk
        D[:, idx, :, idx] += z[None, :, :]
        D[:, :, idx, idx] += z[:, :, None]
        return D.reshape(n, m * m, m)

    def jac(z):
        return 2.0 ** ((m + 1) / 2.0) * np.linalg.norm(z, axis=1) ** m

    def inv(p):
        X = p.reshape(len(p), m, m)
        diag = np.einsum("nii->ni", X)
        j = np.argmax(diag, axis=1)
        col = X[np.arange(len(p)), :, j]
        z = col / np.sqrt(np.maximum(diag[np.arange(len(p)), j], 1e-300))[:, None]
        z *= np.where(z[:, :1] < 0, -1.0, 1.0)
        return z

    lower = (0.0,) + (-half_width,) * (m - 1)
    upper = (half_width,) * m
    return LipschitzChart(f, lower, upper, m * m, analytic_jacobian=jac, differential=df,
                          inverse=inv, lipschitz_bound=2.0 * half_width, name=f"wishart1[{m}]")


def product_chart(c1: LipschitzChart, c2: LipschitzChart) -> LipschitzChart:
    """Chart of ``A_1 x A_2 -> R^{M_1 + M_2}``, ``(x, y) -> (f_1(x), f_2(y))``."""
    m1, m2, M1, M2 = c1.param_dim, c2.param_dim, c1.ambient_dim, c2.ambient_dim

    def f(x):
        return np.concatenate([c1(x[:, :m1]), c2(x[:, m1:])], axis=1)

    def df(x):
        from .geometry import chart_differential
        D = np.zeros((len(x), M1 + M2, m1 + m2))
        D[:, :M1, :m1] = chart_differential(c1, x[:, :m1])
        D[:, M1:, m1:] = chart_differential(c2, x[:, m1:])
        return D

    def jac(x):
        return chart_jacobians(c1, x[:, :m1]) * chart_jacobians(c2, x[:, m1:])

    inv = None
    if c1.inverse is not None and c2.inverse is not None:
        def inv(p):
            return np.concatenate([np.atleast_2d(c1.inverse(p[:, :M1])).reshape(len(p), m1),
                                   np.atleast_2d(c2.inverse(p[:, M1:])).reshape(len(p), m2)],
                                  axis=1)

    return LipschitzChart(f, c1.lower + c2.lower, c1.upper + c2.upper, M1 + M2,
                          analytic_jacobian=jac, differential=df, inverse=inv,
                          lipschitz_bound=max(c1.lipschitz_bound, c2.lipschitz_bound),
                          name=f"{c1.name}x{c2.name}")


# ---------------------------------------------------------------------------
# Parameter densities


def uniform_angle() -> ParamDensity:
    return ParamDensity(lambda z: np.full(len(z), 1.0 / TWO_PI), (0.0,), (TWO_PI,),
                        sampler=lambda rng, n: TWO_PI * rng.random((n, 1)), name="uniform")


def vonmises_angle(kappa: float) -> ParamDensity:
    """Angle density ``exp(kappa cos z) / (2 pi I_0(kappa))`` on ``[0, 2 pi)``."""
    kappa = float(kappa)
    # ive(0, k) = I_0(k) exp(-k)
    log_norm = math.log(TWO_PI * special.ive(0, kappa)) + kappa

    def pdf(z):
        return np.exp(kappa * np.cos(z[:, 0]) - log_norm)

    return ParamDensity(pdf, (0.0,), (TWO_PI,), name=f"vonmises({kappa:g})")


def vonmises_entropy(kappa: float) -> float:
    ratio = special.ive(1, kappa) / special.ive(0, kappa)
    return math.log(TWO_PI * special.ive(0, kappa)) + kappa - kappa * ratio


def normal_density(cov, half_width: float = 10.0) -> ParamDensity:
    """Zero-mean normal density truncated to ``[-w, w]^m`` (mass loss < 1e-20)."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    m = cov.shape[0]
    L = np.linalg.cholesky(cov)
    prec = np.linalg.inv(cov)
    log_norm = 0.5 * (m * math.log(TWO_PI) + math.log(np.linalg.det(cov)))

    def pdf(x):
        return np.exp(-0.5 * np.einsum("ni,ij,nj->n", x, prec, x) - log_norm)

    def draw(rng, n):
        out = np.empty((0, m))
        while len(out) < n:
            Z = rng.standard_normal((n - len(out), m)) @ L.T
            out = np.concatenate([out, Z[np.all(np.abs(Z) < half_width, axis=1)]])
        return out

    return ParamDensity(pdf, (-half_width,) * m, (half_width,) * m, sampler=draw,
                        name=f"normal{m}", check=m <= 3)


# ---------------------------------------------------------------------------
# Source constructors


def pushforward_source(base: ParamDensity, chart: LipschitzChart,
                       analytic_entropy: Optional[float] = None, name: str = "",
                       seed: int = 0) -> RectifiableSource:
    """Source ``phi(z)`` for ``z ~ base`` and a one-to-one chart ``phi``.

    The chart is restricted to the base box.  Construction fails if the
    Jacobian vanishes on a sizable fraction of random parameters.
    """
    if base.dim != chart.param_dim:
        raise ValueError("base density and chart have different parameter dimensions")
    chart = chart.restrict(base.lower, base.upper)
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(chart.lower), np.asarray(chart.upper)
    probe = lo + (hi - lo) * rng.random((256, chart.param_dim))
    if np.mean(chart_jacobians(chart, probe) <= 1e-12) > 0.01:
        raise ValueError("chart Jacobian vanishes on a positive-measure set")
    support = SupportAtlas((chart,), name=chart.name)

    def density(points):
        P = np.atleast_2d(np.asarray(points, dtype=float))
        X, ok = chart.invert(P)
        out = np.zeros(len(P))
        if ok.any():
            out[ok] = base(X[ok]) / chart_jacobians(chart, X[ok])
        return out

    def sampler(rng, n):
        return chart(base.sample(rng, n))

    return RectifiableSource(support, density, sampler, analytic_entropy,
                             name or f"{chart.name}:{base.name}")


def symmetrized_pushforward(base: ParamDensity, chart: LipschitzChart,
                            symmetry: Callable[[np.ndarray], np.ndarray] = np.negative,
                            analytic_entropy: Optional[float] = None,
                            name: str = "") -> RectifiableSource:
    """Source ``phi(z)`` for a two-to-one map with preimages ``{z, symmetry(z)}``.

    ``chart`` must be one-to-one on a fundamental domain (its box).  The
    density is ``(f(z) + f(symmetry(z))) / J(z) = 2 fbar(z) / J(z)``.
    Samples use the whole base box, mapped through the same formula.
    """
    m = chart.param_dim
    if m not in (1, 2, 3):
        raise NotImplementedError("two-to-one pushforwards are supported for m in {1, 2, 3}")
    support = SupportAtlas((chart,), name=chart.name)

    def density(points):
        P = np.atleast_2d(np.asarray(points, dtype=float))
        X, ok = chart.invert(P)
        out = np.zeros(len(P))
        if ok.any():
            Z = X[ok]
            out[ok] = (base(Z) + base(symmetry(Z))) / chart_jacobians(chart, Z)
        return out

    def sampler(rng, n):
        return chart.map(base.sample(rng, n))

    return RectifiableSource(support, density, sampler, analytic_entropy,
                             name or f"{chart.name}:{base.name}")


def product_source(s1: RectifiableSource, s2: RectifiableSource) -> RectifiableSource:
    """Independent pair ``(x, y)``; density ``theta_1(x) theta_2(y)`` on ``E_1 x E_2``."""
    if isinstance(s1.support, DiscreteSupport) or isinstance(s2.support, DiscreteSupport):
        raise NotImplementedError("products with discrete sources are not supported")
    charts = tuple(product_chart(a, b) for a in s1.support.charts for b in s2.support.charts)
    support = SupportAtlas(charts, name=f"{s1.support.name}x{s2.support.name}")
    M1 = s1.ambient_dim

    def density(points):
        P = np.atleast_2d(np.asarray(points, dtype=float))
        return s1.density(P[:, :M1]) * s2.density(P[:, M1:])

    def sampler(rng, n):
        r1, r2 = rng.spawn(2)
        return np.concatenate([sample(s1, r1, n), sample(s2, r2, n)], axis=1)

    h = None
    if s1.analytic_entropy is not None and s2.analytic_entropy is not None:
        h = s1.analytic_entropy + s2.analytic_entropy
    return RectifiableSource(support, density, sampler, h, f"product:{s1.name}x{s2.name}",
                             factors=(s1, s2))


def circle_source(angle_pdf: ParamDensity, analytic_entropy: Optional[float] = None,
                  name: str = "") -> RectifiableSource:
    """Distribution on the unit circle with angle density ``angle_pdf`` on ``[0, 2 pi)``."""
    if angle_pdf.lower != (0.0,) or abs(angle_pdf.upper[0] - TWO_PI) > 1e-15:
        raise ValueError("angle density must live on [0, 2 pi)")
    return pushforward_source(angle_pdf, circle_chart(), analytic_entropy,
                              name or f"circle:{angle_pdf.name}")


def discrete_source(points, probs, name: str = "discrete") -> RectifiableSource:
    """0-rectifiable source: finitely many atoms with probabilities ``probs``."""
    support = DiscreteSupport(points)
    p = np.asarray(probs, dtype=float)
    if p.shape != (len(support.points),) or np.any(p <= 0) or abs(p.sum() - 1) > 1e-12:
        raise ValueError("probs must be positive, one per point, and sum to 1")
    pts = support.points

    def density(points):
        P = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.linalg.norm(P[:, None, :] - pts[None], axis=2)
        j = np.argmin(d, axis=1)
        return np.where(d[np.arange(len(P)), j] <= 1e-12, p[j], 0.0)

    def sampler(rng, n):
        return pts[rng.choice(len(pts), size=n, p=p)]

    return RectifiableSource(support, density, sampler, float(-np.sum(p * np.log(p))), name)


def embedded_normal_source(m: int, M: int) -> RectifiableSource:
    """Standard normal on ``R^m`` placed in the first ``m`` coordinates of ``R^M``."""
    return pushforward_source(normal_density(np.eye(m)), embedding_chart(m, M),
                              0.5 * m * math.log(TWO_PI * math.e), f"embed:normal:{m}:{M}")


def correlated_gaussian_source(rho: float) -> RectifiableSource:
    """Bivariate normal with unit variances and correlation ``rho`` on ``R^2``."""
    if not -1.0 < rho < 1.0:
        raise ValueError("rho must lie in (-1, 1)")
    cov = np.array([[1.0, rho], [rho, 1.0]])
    h = math.log(TWO_PI * math.e) + 0.5 * math.log(1.0 - rho * rho)
    return pushforward_source(normal_density(cov), embedding_chart(2, 2), h, f"gauss:corr:{rho:g}")


def wishart1_entropy(m: int) -> float:
    """Closed form for ``z z^T`` with standard normal ``z`` in ``R^m`` (nats)."""
    e_log_norm2 = special.digamma(m / 2.0) + math.log(2.0)
    return 0.5 * m * math.log(TWO_PI * math.e) + 0.5 * (m - 1) * math.log(2.0) + 0.5 * m * e_log_norm2


def wishart1_source(m: int) -> RectifiableSource:
    """Rank-one matrix ``z z^T`` in ``R^{m x m}`` for standard normal ``z``."""
    if m not in (1, 2, 3):
        raise NotImplementedError("rank-one matrix sources are supported for m in {1, 2, 3}")
    chart = wishart_chart(m)
    base = normal_density(np.eye(m), half_width=chart.upper[0])
    return symmetrized_pushforward(base, chart, analytic_entropy=wishart1_entropy(m),
                                   name=f"wishart1:normal:{m}")


def orthogonal_transform(source: RectifiableSource, Q) -> RectifiableSource:
    """Image ``Q x`` of a chart-based source under an orthogonal matrix ``Q``."""
    Q = np.asarray(Q, dtype=float)
    M = source.ambient_dim
    if Q.shape != (M, M) or not np.allclose(Q.T @ Q, np.eye(M), atol=1e-12):
        raise ValueError("Q must be an orthogonal matrix of the ambient dimension")
    charts = []
    for c in source.support.charts:
        def f(x, c=c):
            return c(x) @ Q.T

        def df(x, c=c):
            from .geometry import chart_differential
            return np.einsum("ij,njm->nim", Q, chart_differential(c, x))

        inv = None
        if c.inverse is not None:
            def inv(p, c=c):
                return c.inverse(p @ Q)

        charts.append(LipschitzChart(f, c.lower, c.upper, M, c.analytic_jacobian, df, inv,
                                     c.lipschitz_bound, c.name))
    support = SupportAtlas(tuple(charts), name=source.support.name)

    def density(points):
        P = np.atleast_2d(np.asarray(points, dtype=float))
        return source.density(P @ Q)

    def sampler(rng, n):
        return sample(source, rng, n) @ Q.T

    return RectifiableSource(support, density, sampler, source.analytic_entropy,
                             f"rotated:{source.name}")


# ---------------------------------------------------------------------------
# Catalog


def _parse_float(text, spec):
    try:
        return float(text)
    except ValueError:
        raise CatalogError(f"bad number {text!r} in {spec!r}") from None


def _parse_int(text, spec):
    try:
        return int(text)
    except ValueError:
        raise CatalogError(f"bad integer {text!r} in {spec!r}") from None


def from_catalog(spec: str) -> RectifiableSource:
    """Build a source from its catalog string (see module docstring)."""
    spec = spec.strip()
    head, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if head == "product":
            left, sep, right = rest.partition("x")
            if not sep or not left or not right:
                raise CatalogError(f"product needs '<a>x<b>', got {spec!r}")
            return product_source(from_catalog(left), from_catalog(right))
        if head == "circle" and parts == ["uniform"]:
            return circle_source(uniform_angle(), math.log(TWO_PI), "circle:uniform")
        if head == "circle" and len(parts) == 2 and parts[0] == "vonmises":
            kappa = _parse_float(parts[1], spec)
            return circle_source(vonmises_angle(kappa), vonmises_entropy(kappa),
                                 f"circle:vonmises:{parts[1]}")
        if head == "wishart1" and len(parts) == 2 and parts[0] == "normal":
            return wishart1_source(_parse_int(parts[1], spec))
        if head == "embed" and len(parts) == 3 and parts[0] == "normal":
            m, M = _parse_int(parts[1], spec), _parse_int(parts[2], spec)
            if m < 1 or M < m:
                raise CatalogError(f"need 1 <= m <= M in {spec!r}")
            return embedded_normal_source(m, M)
        if head == "gauss" and len(parts) == 2 and parts[0] == "corr":
            return correlated_gaussian_source(_parse_float(parts[1], spec))
    except NotImplementedError as exc:
        raise CatalogError(str(exc)) from None
    except CatalogError:
        raise
    except ValueError as exc:
        raise CatalogError(f"{spec!r}: {exc}") from None
    raise CatalogError(f"unknown catalog source {spec!r}")
