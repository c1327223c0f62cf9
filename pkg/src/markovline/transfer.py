"""Transfer-operator evolution of densities and the duality pairing.

Two carriers: cellwise-constant densities (exact, driven by the chain
module) and per-cell node grids with linear interpolation (for smooth
maps).  The transfer operator acts on node values through the inverse
branches: (Pg)(x) = sum over preimages of g(y) |phi'(x)|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Union

import numpy as np

from .chain import BandedKernel, ExactEvolution, FloatEvolution, StateVector, step as chain_step
from .errors import ConstructionError
from .maps import MapSpec, RandomWalkMap

__all__ = [
    "CellwiseDensity",
    "GridDensity",
    "make_g_pi",
    "pf_step_cellwise",
    "pf_step_grid",
    "correlate",
    "exact_correlation",
    "duality_residual",
    "simpson_weights",
]


@dataclass(frozen=True)
class CellwiseDensity:
    """Density constant on cells: value weights[j] on cell I_j."""

    weights: StateVector
    cell_length: Fraction = Fraction(1)

    def integral(self) -> Fraction:
        return self.weights.mass() * self.cell_length

    def value_on_cell(self, j: int) -> Fraction:
        return self.weights.entry(j)


def make_g_pi(pi: StateVector, cell_length=Fraction(1)) -> CellwiseDensity:
    """Density with constant value pi_j on cell I_j (a probability density
    for stochastic pi on unit cells)."""
    return CellwiseDensity(weights=pi, cell_length=Fraction(cell_length))


def pf_step_cellwise(
    g: CellwiseDensity, kernel: BandedKernel, mp: RandomWalkMap | None = None
) -> CellwiseDensity:
    """One transfer-operator step of a cellwise density under a random-walk map.

    Exact: the image of the cellwise density with weights pi is the cellwise
    density with weights pi P.  When the owning map is passed, the kernel
    must be its defining kernel.
    """
    if mp is not None:
        if not isinstance(mp, RandomWalkMap):
            raise ConstructionError("cellwise transfer steps require a random-walk map")
        if mp.kernel != kernel:
            raise ConstructionError("kernel does not match the map's defining kernel")
        if mp.partition.period != g.cell_length:
            raise ConstructionError("density cell length does not match the map partition")
    return CellwiseDensity(weights=chain_step(g.weights, kernel), cell_length=g.cell_length)


def simpson_weights(m: int) -> np.ndarray:
    """Composite Simpson weights on m+1 equispaced nodes spanning one cell
    of unit length (m even); scale by the cell length for general cells."""
    if m < 2 or m % 2:
        raise ConstructionError(f"Simpson rule needs an even node count per cell, got {m}")
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / (3.0 * m)


@dataclass(frozen=True)
class GridDensity:
    """Node values on a window of cells, m+1 equispaced nodes per cell,
    linear interpolation between nodes and zero outside the window."""

    cell_lo: int
    cell_hi: int
    m: int
    values: np.ndarray
    cell_length: float = 1.0

    def __post_init__(self) -> None:
        n_nodes = (self.cell_hi - self.cell_lo + 1) * self.m + 1
        if len(self.values) != n_nodes:
            raise ConstructionError(
                f"grid window [{self.cell_lo}, {self.cell_hi}] with m={self.m} "
                f"needs {n_nodes} nodes, got {len(self.values)}"
            )

    @property
    def x_lo(self) -> float:
        return self.cell_lo * self.cell_length

    @property
    def h(self) -> float:
        return self.cell_length / self.m

    def node_xs(self) -> np.ndarray:
        return self.x_lo + self.h * np.arange(len(self.values))

    @classmethod
    def from_function(
        cls,
        fn: Callable[[np.ndarray], np.ndarray],
        cell_lo: int,
        cell_hi: int,
        m: int = 64,
        cell_length: float = 1.0,
    ) -> "GridDensity":
        xs = cell_lo * cell_length + (cell_length / m) * np.arange((cell_hi - cell_lo + 1) * m + 1)
        return cls(cell_lo=cell_lo, cell_hi=cell_hi, m=m, values=np.asarray(fn(xs)), cell_length=cell_length)

    def evaluate(self, xs: np.ndarray) -> np.ndarray:
        """Linear interpolation; exactly zero outside the tracked window."""
        xs = np.asarray(xs, dtype=float)
        pos = (xs - self.x_lo) / self.h
        n = len(self.values)
        inside = (pos >= 0.0) & (pos <= n - 1)
        idx = np.clip(np.floor(pos).astype(np.int64), 0, n - 2)
        frac = np.clip(pos - idx, 0.0, 1.0)
        vals = self.values[idx] * (1.0 - frac) + self.values[idx + 1] * frac
        return np.where(inside, vals, np.zeros_like(vals))

    def integral(self) -> complex:
        """Composite Simpson of the node values (the declared integral)."""
        w = simpson_weights(self.m) * self.cell_length
        total = 0.0 + 0.0j if np.iscomplexobj(self.values) else 0.0
        ncells = self.cell_hi - self.cell_lo + 1
        # accumulate per cell to keep weights exact at shared endpoints
        for c in range(ncells):
            seg = self.values[c * self.m : (c + 1) * self.m + 1]
            total = total + np.dot(w, seg)
        return total if np.iscomplexobj(self.values) else float(total)

    def min_value(self) -> float:
        return float(np.min(np.real(self.values)))


def pf_step_grid(g: GridDensity, mp: MapSpec) -> GridDensity:
    """One transfer-operator step on the grid carrier.

    Output window is the input window padded by the map's jump bound, so
    compactly supported densities stay exactly representable.  Repeated
    steps accumulate O(h^2) interpolation error; long horizons belong to
    the cellwise exact path.
    """
    pad = mp.jump_bound
    lo, hi = g.cell_lo - pad, g.cell_hi + pad
    a = float(mp.partition.period)
    if abs(a - g.cell_length) > 1e-15:
        raise ConstructionError("grid cell length does not match the map partition")
    xs = lo * a + (a / g.m) * np.arange((hi - lo + 1) * g.m + 1)
    out = np.zeros(len(xs), dtype=g.values.dtype)
    for ys, dphi in mp.pf_terms(xs):
        out = out + g.evaluate(ys) * np.abs(dphi)
    return GridDensity(cell_lo=lo, cell_hi=hi, m=g.m, values=out, cell_length=g.cell_length)


def _pairing_grid(F, g: GridDensity) -> complex:
    xs = g.node_xs()
    fv = np.asarray(F(xs))
    w = simpson_weights(g.m) * g.cell_length
    total = 0.0 + 0.0j
    for c in range(g.cell_hi - g.cell_lo + 1):
        seg = (fv * g.values)[c * g.m : (c + 1) * g.m + 1]
        total = total + np.dot(w, seg)
    return complex(total)


def exact_correlation(
    kernel: BandedKernel,
    pi: StateVector,
    cell_integral: Callable[[int], Fraction],
    n_max: int,
) -> list[Fraction]:
    """c_n = sum_j f_j pi_j^{(n)} for n = 0..n_max, exactly.

    ``cell_integral(j)`` must return the exact integral of the observable
    over cell I_j.  Integer accumulation over a shared denominator keeps
    long horizons affordable.
    """
    ev = ExactEvolution(kernel, pi)
    f_cache: dict[int, Fraction] = {}

    def f(j: int) -> Fraction:
        v = f_cache.get(j)
        if v is None:
            v = f_cache[j] = Fraction(cell_integral(j))
        return v

    def pair() -> Fraction:
        lo, hi = ev.window
        fden = 1
        for j in range(lo, hi + 1):
            d = f(j).denominator
            fden = fden * d // math.gcd(fden, d)
        num = 0
        nums = ev.numerators
        for j in range(lo, hi + 1):
            fj = f(j)
            if fj:
                num += int(fj * fden) * int(nums[j - lo])
        return Fraction(num, fden * ev.denominator)

    out = [pair()]
    for _ in range(n_max):
        ev.step()
        out.append(pair())
    return out


def correlate(
    mp: MapSpec,
    F,
    g: Union[CellwiseDensity, GridDensity],
    n_max: int,
) -> np.ndarray:
    """Correlation sequence c_n = Leb((F o T^n) g) = Leb(F P^n g), n = 0..n_max.

    Cellwise densities under random-walk maps evolve through the kernel
    (float accumulation of the exact chain); grid densities evolve through
    the inverse branches.  Use :func:`exact_correlation` when exact
    rationals are required.
    """
    if isinstance(g, CellwiseDensity):
        if not isinstance(mp, RandomWalkMap):
            raise ConstructionError("cellwise correlation requires a random-walk map")
        a = g.cell_length
        ev = FloatEvolution.from_state(mp.kernel, g.weights)
        fcache: dict[int, complex] = {}

        def fint(j: int) -> complex:
            v = fcache.get(j)
            if v is None:
                lo, hi = mp.partition.cell_bounds(j)
                v = fcache[j] = complex(F.cell_integral(float(lo), float(hi)))
            return v

        out = []
        for n in range(n_max + 1):
            lo, hi = ev.offset, ev.offset + len(ev.values) - 1
            fv = np.array([fint(j) for j in range(lo, hi + 1)])
            out.append(complex(np.dot(fv, ev.values)))
            if n < n_max:
                ev.step()
        return np.array(out)
    if isinstance(g, GridDensity):
        out = []
        cur = g
        for n in range(n_max + 1):
            out.append(_pairing_grid(F, cur))
            if n < n_max:
                cur = pf_step_grid(cur, mp)
        return np.array(out)
    raise ConstructionError(f"unsupported density carrier {type(g).__name__}")


def duality_residual(mp: MapSpec, F, g: GridDensity) -> float:
    """|Leb((F o T) g) - Leb(F (P g))| with the left side by direct quadrature.

    The left side composes forward orbits at the nodes of g; the right side
    applies one grid transfer step and pairs with F on the expanded window.
    """
    xs = g.node_xs()
    fv = np.asarray(F(mp.forward_many(xs)))
    w = simpson_weights(g.m) * g.cell_length
    lhs = 0.0 + 0.0j
    prod = fv * g.values
    for c in range(g.cell_hi - g.cell_lo + 1):
        lhs = lhs + np.dot(w, prod[c * g.m : (c + 1) * g.m + 1])
    rhs = _pairing_grid(F, pf_step_grid(g, mp))
    return abs(complex(lhs) - complex(rhs))


def duality_residual_cellwise(mp: RandomWalkMap, F, g: CellwiseDensity) -> Fraction:
    """Exact duality check for cellwise data under a piecewise-affine map.

    The left side integrates (F o T) g from the subinterval geometry (each
    cut piece of a cell maps affinely onto a whole cell, so its contribution
    is the piece length times the cell mean of F); the right side pairs F
    with the evolved weights.  Both sides are exact rational sums.
    """
    if not isinstance(mp, RandomWalkMap):
        raise ConstructionError("the exact duality check requires a random-walk map")
    w = mp.kernel.band
    lhs = Fraction(0)
    lo, hi = g.weights.window
    for j in range(lo, hi + 1):
        pj = g.weights.entry(j)
        if pj == 0:
            continue
        cuts = mp.cut_points(j)
        for o in range(-w, w + 1):
            seg = cuts[o + w + 1] - cuts[o + w]
            if seg == 0:
                continue
            k = j + o
            fk = F.cell_integral_exact(Fraction(k), Fraction(k + 1))
            if fk is None:
                raise ConstructionError("exact duality needs exact cell integrals of F")
            # the piece of length seg maps onto I_k; its (F o T) integral is
            # seg times the mean of F over I_k
            lhs += pj * seg * fk
    stepped = chain_step(g.weights, mp.kernel)
    rhs = Fraction(0)
    s_lo, s_hi = stepped.window
    for k in range(s_lo, s_hi + 1):
        fk = F.cell_integral_exact(Fraction(k), Fraction(k + 1))
        rhs += stepped.entry(k) * fk
    return abs(lhs - rhs)
