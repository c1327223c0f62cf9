"""Trajectories, symbolic itineraries, cylinder sets and orbit statistics.

Monte Carlo routines use the counter-based Philox generator keyed by a
64-bit seed; the seed is echoed in every report so runs are exactly
reproducible.  Cylinder endpoints are computed by composing stored inverse
branches right to left: exact rational arithmetic through affine branches,
with bump contributions of perturbed branches evaluated to rounding
accuracy (their exact polynomial composition grows exponentially with the
word length).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .chain import transition_kernel
from .errors import ConstructionError
from .maps import MapSpec

__all__ = [
    "Itinerary",
    "Cylinder",
    "itinerary",
    "cylinder",
    "image_of_cylinder",
    "image_overlap_measure",
    "markov_property_test",
    "TransitionTestReport",
    "escape_diagnostics",
    "EscapeReport",
    "cylinder_derivative_ratio",
]


@dataclass(frozen=True)
class Itinerary:
    """Orbit points x_0..x_n and the cells j_0..j_n they visit."""

    start: float
    cells: tuple[int, ...]
    points: tuple[float, ...]


def itinerary(mp: MapSpec, x0: float, n: int) -> Itinerary:
    """Cells visited by the forward orbit of x0 over n steps."""
    pts = [float(x0)]
    cells = [mp.partition.cell_index(x0)]
    x = float(x0)
    for _ in range(n):
        x = mp.forward(x)
        pts.append(x)
        cells.append(mp.partition.cell_index(x))
    return Itinerary(start=float(x0), cells=tuple(cells), points=tuple(pts))


@dataclass(frozen=True)
class Cylinder:
    """Interval of points sharing the cell itinerary ``word``."""

    word: tuple[int, ...]
    left: Fraction
    right: Fraction

    @property
    def length(self) -> Fraction:
        return self.right - self.left

    def contains(self, x: float) -> bool:
        return float(self.left) <= x <= float(self.right)


def cylinder(mp: MapSpec, word: Sequence[int]) -> Cylinder:
    """Exact endpoints of the cylinder with the given cell word.

    The cylinder for (j_0, ..., j_{n-1}) is the set of x with T^k(x) in
    I_{j_k} for every k; its endpoints are obtained by pulling the last
    cell back through the inverse branches.  Raises for words with an
    impossible transition.
    """
    word = tuple(int(j) for j in word)
    if not word:
        raise ConstructionError("cylinder word must be nonempty")
    kernel = transition_kernel(mp)
    for j, k in zip(word, word[1:]):
        if k not in kernel.entries(j):
            raise ConstructionError(f"word is inadmissible: transition {j} -> {k} has weight 0")
    lo, hi = mp.partition.cell_bounds(word[-1])
    for pos in range(len(word) - 2, -1, -1):
        j, nxt = word[pos], word[pos + 1]
        a = mp.inverse_branch_exact(j, lo, over_cell=nxt)
        b = mp.inverse_branch_exact(j, hi, over_cell=nxt)
        lo, hi = (a, b) if a <= b else (b, a)
    return Cylinder(word=word, left=lo, right=hi)


def image_of_cylinder(mp: MapSpec, cyl: Cylinder, k: int) -> tuple[Fraction, Fraction]:
    """T^k image of the cylinder: the cylinder of the word suffix.

    For a word of length n+1 and k = n this is exactly the last cell.
    """
    if not 0 <= k <= len(cyl.word) - 1:
        raise ConstructionError(f"power {k} outside the word length {len(cyl.word)}")
    sub = cylinder(mp, cyl.word[k:])
    return sub.left, sub.right


def image_overlap_measure(mp_or_kernel, cells: Iterable[int], n: int) -> Fraction:
    """Leb(T^{n+1} A intersect T^n A) for A a union of cells.

    Forward images of cell unions are unions of cells (each branch maps a
    cell onto whole cells), so the computation lives on the transition
    graph; a positive value witnesses the image-overlap hypothesis of the
    exactness criterion, while e.g. parity obstructions give exactly 0.
    """
    if hasattr(mp_or_kernel, "entries"):
        kernel = mp_or_kernel

        def length(j: int) -> Fraction:
            return Fraction(1)

    else:
        kernel = transition_kernel(mp_or_kernel)
        length = mp_or_kernel.partition.cell_length
    current = set(int(j) for j in cells)
    if not current:
        return Fraction(0)
    for _ in range(n):
        nxt = set()
        for j in current:
            nxt.update(kernel.entries(j))
        current = nxt
    after = set()
    for j in current:
        after.update(kernel.entries(j))
    return sum((length(j) for j in current & after), Fraction(0))


@dataclass(frozen=True)
class TransitionTestReport:
    """Empirical itinerary transitions pooled over time vs kernel entries."""

    seed: int
    samples: int
    horizon: int
    start_cell: int
    rows: tuple[tuple[int, int, int, int, float, float, float], ...]
    # (from_cell, to_cell, count, visits, frequency, expected, three_sigma)
    max_deviation: float
    within_three_sigma: bool
    forbidden_transitions: int


def markov_property_test(
    mp: MapSpec,
    start_cell: int,
    samples: int,
    horizon: int,
    seed: int,
) -> TransitionTestReport:
    """Monte Carlo check that itinerary transition frequencies match the kernel.

    Draws ``samples`` uniform starts on the start cell (Philox stream keyed
    by ``seed``), iterates the map, pools (j_k -> j_{k+1}) counts over all
    times, and compares each conditional frequency against the kernel entry
    with a 3-sigma binomial band.  Exact for piecewise-affine maps, where
    the itinerary process is the random walk itself.
    """
    if samples < 1 or horizon < 1:
        raise ConstructionError("need at least one sample and one step")
    kernel = transition_kernel(mp)
    w = kernel.band
    rng = np.random.Generator(np.random.Philox(key=seed))
    lo, hi = mp.partition.cell_bounds(start_cell)
    x = rng.uniform(float(lo), float(hi), samples)
    prev = mp.partition.cell_indices(x)
    counts: dict[tuple[int, int], int] = {}
    visits: dict[int, int] = {}
    for _ in range(horizon):
        x = mp.forward_many(x)
        cur = mp.partition.cell_indices(x)
        pairs = prev * (2 * w + 3) + (cur - prev + w + 1)
        uniq, cnt = np.unique(pairs, return_counts=True)
        for code, c in zip(uniq, cnt):
            j = int(np.floor_divide(code, 2 * w + 3))
            o = int(code - j * (2 * w + 3)) - w - 1
            counts[(j, j + o)] = counts.get((j, j + o), 0) + int(c)
            visits[j] = visits.get(j, 0) + int(c)
        prev = cur
    rows = []
    max_dev = 0.0
    ok = True
    forbidden = 0
    for (j, k), c in sorted(counts.items()):
        nj = visits[j]
        p = float(kernel.entries(j).get(k, Fraction(0)))
        freq = c / nj
        sigma = math.sqrt(max(p * (1.0 - p), 0.0) / nj)
        dev = abs(freq - p)
        if p == 0.0 and c > 0:
            forbidden += 1
            ok = False
        if dev > 3.0 * sigma:
            ok = False
        max_dev = max(max_dev, dev)
        rows.append((j, k, c, nj, freq, p, 3.0 * sigma))
    return TransitionTestReport(
        seed=seed,
        samples=samples,
        horizon=horizon,
        start_cell=start_cell,
        rows=tuple(rows),
        max_deviation=max_dev,
        within_three_sigma=ok,
        forbidden_transitions=forbidden,
    )


@dataclass(frozen=True)
class EscapeReport:
    """Finite-horizon escape fractions.

    A finite-horizon proxy only: position beyond the radius at the horizon
    stands in for escape to infinity, which is an asymptotic notion.
    """

    seed: int
    samples: int
    horizon: int
    radius: float
    escaped_plus: float
    escaped_minus: float
    returned: float


def escape_diagnostics(
    mp: MapSpec,
    start_cell: int,
    samples: int,
    horizon: int,
    radius: float,
    seed: int,
) -> EscapeReport:
    """Classify orbits by their position at the horizon relative to [-R, R]."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    lo, hi = mp.partition.cell_bounds(start_cell)
    x = rng.uniform(float(lo), float(hi), samples)
    for _ in range(horizon):
        x = mp.forward_many(x)
    plus = float(np.mean(x > radius))
    minus = float(np.mean(x < -radius))
    return EscapeReport(
        seed=seed,
        samples=samples,
        horizon=horizon,
        radius=radius,
        escaped_plus=plus,
        escaped_minus=minus,
        returned=1.0 - plus - minus,
    )


def cylinder_derivative_ratio(mp: MapSpec, word: Sequence[int], points: int = 16) -> float:
    """max/min of |(T^n)'| over sample points of one cylinder (n = len(word)-1).

    Bounded by exp of the distortion log bound for maps with uniform
    expansion; equals 1 exactly for piecewise-affine maps.
    """
    cyl = cylinder(mp, word)
    n = len(word) - 1
    lo, hi = float(cyl.left), float(cyl.right)
    span = hi - lo
    xs = lo + span * (np.arange(points) + 0.5) / points
    total = np.ones_like(xs)
    for _ in range(n):
        xs, der = mp.forward_with_derivative_many(xs)
        total *= np.abs(der)
    return float(np.max(total) / np.min(total))
