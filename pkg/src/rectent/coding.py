"""Quantization of rectifiable sources by (m, delta)-partitions and prefix coding.

A partition cell is a finite union of parameter boxes on the support charts.
For curves the constructive partition splits total arclength into ``N`` equal
pieces, so every cell has ``H^1`` measure ``H^1(E) / N <= delta``.  Products of
curve partitions cover tori and other product supports.

Bounds on the minimal expected codeword length ``L*`` of ``[x]_Q`` (bits):

    h ld e - ld delta <= L* / n
    L* / n < h ld e - ld delta + (1 + eps) / n     (reported, not asserted)
"""
from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .aep import reference_entropy
from .csvio import write_csv
from .geometry import DiscreteSupport, chart_jacobians
from .sources import RectifiableSource, product_source

__all__ = [
    "Cell",
    "MeasurablePartition",
    "PrefixCode",
    "CodingReport",
    "CodingBoundError",
    "equal_measure_partition",
    "partition_from_breaks",
    "product_partition",
    "cell_probabilities",
    "quantized_entropy",
    "penalized_partition_functional",
    "huffman",
    "verify_codeword_bounds",
    "coding_rows",
    "write_coding_csv",
]

LOG2E = 1.0 / math.log(2.0)
CODING_COLUMNS = ("delta", "n_cells", "H_nats", "L_star_bits", "lower_bits", "upper_bits")


class CodingBoundError(AssertionError):
    """A proven codeword-length bound failed; indicates an implementation bug."""


@dataclass(frozen=True)
class Cell:
    id: int
    boxes: tuple          # ((chart_index, lower, upper), ...)
    hausdorff_measure: float
    probability: float


@dataclass(frozen=True)
class MeasurablePartition:
    cells: tuple
    delta: float
    total_measure: float

    def __len__(self):
        return len(self.cells)

    @property
    def measures(self) -> np.ndarray:
        return np.array([c.hausdorff_measure for c in self.cells])

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([c.probability for c in self.cells])


@dataclass(frozen=True)
class PrefixCode:
    lengths: tuple
    expected_length_bits: float

    @property
    def kraft_sum(self) -> float:
        return float(sum(2.0 ** -l for l in self.lengths))


@dataclass(frozen=True)
class CodingReport:
    delta: float
    n: int
    n_cells: int
    H_nats: float
    L_star_bits: float      # per source symbol
    lower_bits: float
    upper_bits: float
    epsilon: float
    code: PrefixCode = field(repr=False)

    @property
    def achieves_upper(self) -> bool:
        return self.L_star_bits <= self.upper_bits


# ---------------------------------------------------------------------------
# Partitions


def _curve_charts(source):
    if isinstance(source.support, DiscreteSupport):
        raise NotImplementedError("partitions of discrete supports are their atoms")
    if source.dim != 1:
        raise NotImplementedError("partitions are built on curves; use product_partition")
    return source.support.charts


def _box_integral(source, chart, lo, hi, with_density):
    def f(t):
        x = np.array([[t]])
        J = float(chart_jacobians(chart, x)[0])
        return J * float(source.density(chart(x))[0]) if with_density else J

    val, _ = integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def _arclength_point(chart, a, target):
    """Parameter ``t >= a`` with ``int_a^t J = target`` on ``chart``."""
    lo, hi = chart.lower[0], chart.upper[0]
    if chart.analytic_jacobian is not None:
        probe = chart_jacobians(chart, np.linspace(lo, hi, 17).reshape(-1, 1))
        if np.ptp(probe) <= 1e-14 * max(1.0, probe[0]):
            return min(hi, a + target / probe[0])

    def arc(t):
        val, _ = integrate.quad(lambda s: float(chart_jacobians(chart, np.array([[s]]))[0]),
                                a, t, epsabs=1e-14, epsrel=1e-13, limit=200)
        return val - target

    if arc(hi) <= 0:
        return hi
    return optimize.brentq(arc, a, hi, xtol=1e-14)


def _cells_from_boxes(source, groups, delta, total):
    cells = []
    for i, boxes in enumerate(groups):
        meas = sum(_box_integral(source, source.support.charts[k], lo[0], hi[0], False)
                   for k, lo, hi in boxes)
        prob = sum(_box_integral(source, source.support.charts[k], lo[0], hi[0], True)
                   for k, lo, hi in boxes)
        cells.append(Cell(i, tuple(boxes), meas, prob))
    return MeasurablePartition(tuple(cells), delta, total)


def equal_measure_partition(source: RectifiableSource, delta: float) -> MeasurablePartition:
    """Split the support of a curve source into ``ceil(H^1(E) / delta)`` equal-arclength cells.

    The charts are walked in order, so a cell may consist of pieces of
    several charts.  ``delta >= H^1(E)`` returns the one-cell partition.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    charts = _curve_charts(source)
    total = source.support.measure()
    if delta >= total:
        warnings.warn(f"delta = {delta} is at least the support measure {total}; "
                      "using a single cell", RuntimeWarning, stacklevel=2)
        N = 1
    else:
        N = math.ceil(total / delta - 1e-9)
    piece = total / N
    lengths = [_box_integral(source, c, c.lower[0], c.upper[0], False) for c in charts]
    groups, current, need = [], [], piece
    for k, chart in enumerate(charts):
        a, left = chart.lower[0], lengths[k]
        while left > 1e-12 * total:
            if left <= need + 1e-12 * total:
                current.append((k, (a,), (chart.upper[0],)))
                need -= left
                left = 0.0
            else:
                b = _arclength_point(chart, a, need)
                current.append((k, (a,), (b,)))
                left -= need
                a, need = b, 0.0
            if need <= 1e-12 * total:
                groups.append(current)
                current, need = [], piece
    if current:
        if len(groups) < N:
            groups.append(current)
        else:
            groups[-1].extend(current)
    return _cells_from_boxes(source, groups, delta, total)


def partition_from_breaks(source: RectifiableSource, breaks: Sequence[Sequence[float]],
                          delta: Optional[float] = None) -> MeasurablePartition:
    """Partition whose cells are the intervals between ``breaks[k]`` on chart ``k``."""
    charts = _curve_charts(source)
    if len(breaks) != len(charts):
        raise ValueError("need one list of breakpoints per chart")
    groups = []
    for k, (chart, b) in enumerate(zip(charts, breaks)):
        pts = np.unique(np.concatenate([[chart.lower[0]], np.asarray(b, dtype=float),
                                        [chart.upper[0]]]))
        pts = pts[(pts >= chart.lower[0]) & (pts <= chart.upper[0])]
        groups.extend([[(k, (u,), (v,))] for u, v in zip(pts[:-1], pts[1:])])
    part = _cells_from_boxes(source, groups, math.inf, source.support.measure())
    d = max(c.hausdorff_measure for c in part.cells) if delta is None else delta
    return MeasurablePartition(part.cells, d, part.total_measure)


def product_partition(p1: MeasurablePartition, p2: MeasurablePartition, n_charts2: int,
                      ) -> MeasurablePartition:
    """Cells ``A x B`` for an independent product; measures and probabilities multiply.

    ``n_charts2`` is the number of charts of the second factor, which fixes the
    index of product charts (``k1 * n_charts2 + k2``).
    """
    cells = []
    for c1 in p1.cells:
        for c2 in p2.cells:
            boxes = tuple((k1 * n_charts2 + k2, lo1 + lo2, hi1 + hi2)
                          for k1, lo1, hi1 in c1.boxes for k2, lo2, hi2 in c2.boxes)
            cells.append(Cell(len(cells), boxes, c1.hausdorff_measure * c2.hausdorff_measure,
                              c1.probability * c2.probability))
    return MeasurablePartition(tuple(cells), p1.delta * p2.delta,
                               p1.total_measure * p2.total_measure)


def cell_probabilities(source: RectifiableSource, partition: MeasurablePartition) -> np.ndarray:
    """``Pr{x in A}`` for every cell, recomputed from ``source``'s density.

    Curves use per-box adaptive quadrature; products of curve sources
    factor into products of one-dimensional integrals.
    """
    if source.dim == 1:
        charts = source.support.charts
        return np.array([sum(_box_integral(source, charts[k], lo[0], hi[0], True)
                             for k, lo, hi in cell.boxes) for cell in partition.cells])
    if len(source.factors) == 2 and all(f.dim == 1 for f in source.factors):
        f1, f2 = source.factors
        n2 = len(f2.support.charts)
        c1, c2 = f1.support.charts, f2.support.charts
        memo = {}

        def one(f, charts, k, lo, hi):
            key = (id(f), k, lo, hi)
            if key not in memo:
                memo[key] = _box_integral(f, charts[k], lo, hi, True)
            return memo[key]

        out = []
        for cell in partition.cells:
            p = 0.0
            for k, lo, hi in cell.boxes:
                k1, k2 = divmod(k, n2)
                p += one(f1, c1, k1, lo[0], hi[0]) * one(f2, c2, k2, lo[1], hi[1])
            out.append(p)
        return np.array(out)
    raise NotImplementedError(f"cell probabilities for {source.name} are not supported")


def quantized_entropy(source: RectifiableSource, partition: MeasurablePartition) -> float:
    """``H([x]_Q) = -sum p log p`` in nats, with ``p`` recomputed from ``source``."""
    p = cell_probabilities(source, partition)
    if abs(p.sum() - 1.0) > 1e-8:
        raise ValueError(f"cell probabilities sum to {p.sum()}, not 1")
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def penalized_partition_functional(source: RectifiableSource,
                                   partition: MeasurablePartition) -> float:
    """``H([x]_Q) + sum_A Pr{A} log H^m(A)``; never below ``h^m(x)``."""
    p = cell_probabilities(source, partition)
    meas = partition.measures
    bad = (meas <= 0) & (p > 1e-15)
    if bad.any():
        raise ValueError(f"cell {int(np.argmax(bad))} has zero measure but positive probability")
    pos = p > 0
    return float(-np.sum(p[pos] * np.log(p[pos])) + np.sum(p[pos] * np.log(meas[pos])))


# ---------------------------------------------------------------------------
# Huffman coding


def huffman(probs) -> PrefixCode:
    """Optimal binary prefix code lengths; ties broken by (probability, smallest symbol id).

    Zero probabilities are dropped.  A single symbol needs no bits (length 0).
    """
    p = [float(v) for v in probs if v > 0]
    if not p:
        raise ValueError("need at least one symbol with positive probability")
    if len(p) == 1:
        return PrefixCode((0,), 0.0)
    depth = [0] * len(p)
    heap = [(pi, i, (i,)) for i, pi in enumerate(p)]
    heapq.heapify(heap)
    while len(heap) > 1:
        pa, ia, sa = heapq.heappop(heap)
        pb, ib, sb = heapq.heappop(heap)
        for s in sa + sb:
            depth[s] += 1
        heapq.heappush(heap, (pa + pb, min(ia, ib), sa + sb))
    return PrefixCode(tuple(depth), float(sum(pi * d for pi, d in zip(p, depth))))


# ---------------------------------------------------------------------------
# Codeword-length bounds


def verify_codeword_bounds(source: RectifiableSource, delta: float, n: int = 1,
                           epsilon: float = 0.05,
                           entropy_ref: Optional[float] = None) -> CodingReport:
    """Huffman-code the equal-measure quantizer and check the length bounds.

    For ``n = 2`` the pair source is quantized by the product of the
    one-symbol partitions, whose cells have measure at most ``delta**2``.
    Lengths are reported per source symbol.  A violated lower bound raises
    :class:`CodingBoundError`; the upper bound is only reported.
    """
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    h = reference_entropy(source) if entropy_ref is None else float(entropy_ref)
    part = equal_measure_partition(source, delta)
    target = source
    if n == 2:
        part = product_partition(part, part, len(source.support.charts))
        target = product_source(source, source)
    p = cell_probabilities(target, part)
    H = float(-np.sum(p[p > 0] * np.log(p[p > 0])))
    code = huffman(p)
    per_symbol = code.expected_length_bits / n
    lower = h * LOG2E - math.log2(delta)
    upper = lower + (1.0 + epsilon) / n
    if per_symbol < lower - 1e-9:
        raise CodingBoundError(
            f"L*/n = {per_symbol!r} bits is below the lower bound {lower!r} "
            f"(source {source.name}, delta {delta!r}, n {n}, cells {len(part)}, "
            f"H {H!r} nats, max cell measure {part.measures.max()!r})")
    return CodingReport(float(delta), n, len(part), H, per_symbol, lower, upper, epsilon, code)


def coding_rows(reports):
    return [[r.delta, r.n_cells, r.H_nats, r.L_star_bits, r.lower_bits, r.upper_bits]
            for r in reports]


def write_coding_csv(reports, out) -> None:
    write_csv(out, CODING_COLUMNS, coding_rows(reports))
