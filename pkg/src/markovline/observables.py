"""Global and local observables and infinite-volume averaging.

Global observables are bounded functions with (possibly) an infinite-volume
average over an exhaustive family of windows.  The closed variant set:
constants, the Heaviside step, quasiperiodic waves ``base(x mod a) e^{i b x}``,
bounded cell sequences, and finite linear combinations; composition with a
map power and translate (Cesaro) averaging produce derived observables.

Averages over explicit windows use closed forms where the variant admits
one and composite Simpson quadrature otherwise.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import ConstructionError

__all__ = [
    "Constant",
    "Heaviside",
    "Quasiperiodic",
    "CellSequence",
    "LinearCombination",
    "ComposedWithMap",
    "CesaroAveraged",
    "alternating_cells",
    "even_cell_indicator",
    "CellUnions",
    "CenteredWindows",
    "window_average",
    "ave_estimate",
    "AveEstimate",
    "cesaro_average",
    "cell_integrals",
    "cell_integrals_exact",
]


def _simpson_interval(fn, lo: float, hi: float, m: int = 64) -> complex:
    if hi <= lo:
        return 0.0 + 0.0j
    # at least m nodes per unit length, even count
    n = max(m, 2 * int(math.ceil((hi - lo) * m / 2)))
    if n % 2:
        n += 1
    xs = np.linspace(lo, hi, n + 1)
    vals = np.asarray(fn(xs), dtype=complex)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return complex(np.dot(w, vals) * (hi - lo) / (3.0 * n))


class _ObservableBase:
    sup_norm: float = 1.0
    declared_ave: complex | None = None

    def __call__(self, xs):
        raise NotImplementedError

    def interval_integral(self, lo: float, hi: float, m: int = 64) -> complex:
        return _simpson_interval(self, lo, hi, m)

    def cell_integral(self, lo: float, hi: float) -> complex:
        return self.interval_integral(lo, hi)

    def cell_integral_exact(self, lo: Fraction, hi: Fraction) -> Fraction | None:
        """Exact rational cell integral when the variant admits one."""
        return None


@dataclass(frozen=True)
class Constant(_ObservableBase):
    value: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "sup_norm", abs(self.value))
        object.__setattr__(self, "declared_ave", complex(self.value))

    def __call__(self, xs):
        return np.full_like(np.asarray(xs, dtype=float), self.value, dtype=complex)

    def interval_integral(self, lo, hi, m: int = 64):
        return self.value * (hi - lo)

    def cell_integral_exact(self, lo, hi):
        v = self.value
        if isinstance(v, complex) and v.imag != 0:
            return None
        return Fraction(v.real if isinstance(v, complex) else v) * (hi - lo)


@dataclass(frozen=True)
class Heaviside(_ObservableBase):
    """Theta(x) = 1 for x >= 0, else 0; average 1/2 over centered windows."""

    def __post_init__(self):
        object.__setattr__(self, "sup_norm", 1.0)
        object.__setattr__(self, "declared_ave", None)  # family dependent

    def __call__(self, xs):
        return (np.asarray(xs, dtype=float) >= 0.0).astype(complex)

    def interval_integral(self, lo, hi, m: int = 64):
        return max(0.0, hi - max(lo, 0.0)) + 0.0j

    def cell_integral_exact(self, lo, hi):
        return max(Fraction(0), hi - max(lo, Fraction(0)))


@dataclass(frozen=True)
class Quasiperiodic(_ObservableBase):
    """F(x) = base(x mod period) * exp(i beta x); F o tau = e^{i a beta} F.

    ``base=None`` means the plane wave E_beta.  The infinite-volume average
    is 0 unless beta is a multiple of 2 pi / period, in which case it is the
    cell mean of the (periodic) function.
    """

    beta: float
    period: float = 1.0
    base: Callable[[np.ndarray], np.ndarray] | None = None
    base_sup: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "sup_norm", self.base_sup)
        ratio = self.beta * self.period / (2.0 * math.pi)
        periodic = abs(ratio - round(ratio)) < 1e-12
        if self.base is None:
            # the plane wave averages to 0 unless beta = 0 exactly (nonzero
            # multiples of 2 pi / a integrate to zero over a period)
            ave = 1.0 + 0.0j if abs(self.beta) < 1e-15 else 0.0 + 0.0j
            object.__setattr__(self, "declared_ave", ave)
        elif periodic:
            mean = _simpson_interval(
                lambda xs: np.asarray(self.base(xs)) * np.exp(1j * self.beta * xs),
                0.0,
                self.period,
                256,
            ) / self.period
            object.__setattr__(self, "declared_ave", mean)
        else:
            object.__setattr__(self, "declared_ave", 0.0 + 0.0j)

    def __call__(self, xs):
        xs = np.asarray(xs, dtype=float)
        wave = np.exp(1j * self.beta * xs)
        if self.base is None:
            return wave
        local = xs - self.period * np.floor(xs / self.period)
        return np.asarray(self.base(local)) * wave

    def interval_integral(self, lo, hi, m: int = 64):
        if self.base is None:
            if abs(self.beta) < 1e-15:
                return (hi - lo) + 0.0j
            ib = 1j * self.beta
            return (cmath.exp(ib * hi) - cmath.exp(ib * lo)) / ib
        return _simpson_interval(self, lo, hi, m)


@dataclass(frozen=True)
class CellSequence(_ObservableBase):
    """F = sum_j b_j 1_{I_j} for a bounded sequence b over unit-length cells."""

    values: Callable[[int], complex]
    sup: float
    cell_length: float = 1.0
    exact_values: Callable[[int], Fraction] | None = None
    ave: complex | None = None

    def __post_init__(self):
        object.__setattr__(self, "sup_norm", self.sup)
        object.__setattr__(self, "declared_ave", self.ave)

    def _cell_of(self, xs: np.ndarray) -> np.ndarray:
        return np.floor(np.asarray(xs, dtype=float) / self.cell_length).astype(np.int64)

    def __call__(self, xs):
        cells = self._cell_of(xs)
        out = np.empty(cells.shape, dtype=complex)
        for j in np.unique(cells):
            out[cells == j] = self.values(int(j))
        return out

    def interval_integral(self, lo, hi, m: int = 64):
        a = self.cell_length
        j_lo = math.floor(lo / a + 1e-12)
        j_hi = math.floor((hi - 1e-12) / a)
        total = 0.0 + 0.0j
        for j in range(j_lo, j_hi + 1):
            seg = min(hi, (j + 1) * a) - max(lo, j * a)
            if seg > 0:
                total += self.values(j) * seg
        return total

    def cell_integral_exact(self, lo, hi):
        if self.exact_values is None:
            return None
        a = Fraction(self.cell_length)
        j = int(lo / a)
        if lo != j * a or hi != (j + 1) * a:
            return None
        return self.exact_values(j) * a


def alternating_cells(cell_length: float = 1.0) -> CellSequence:
    """b_j = j mod 2: alternating 0/1 cells, translate-average 1/2."""
    return CellSequence(
        values=lambda j: complex(j & 1),
        sup=1.0,
        cell_length=cell_length,
        exact_values=lambda j: Fraction(j & 1),
        ave=0.5 + 0.0j,
    )


def even_cell_indicator(cell_length: float = 1.0) -> CellSequence:
    """Indicator of the union of even-index cells."""
    return CellSequence(
        values=lambda j: complex(1 - (j & 1)),
        sup=1.0,
        cell_length=cell_length,
        exact_values=lambda j: Fraction(1 - (j & 1)),
        ave=0.5 + 0.0j,
    )


@dataclass(frozen=True)
class LinearCombination(_ObservableBase):
    terms: tuple[tuple[complex, _ObservableBase], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "sup_norm", sum(abs(c) * F.sup_norm for c, F in self.terms)
        )
        aves = [F.declared_ave for _, F in self.terms]
        ave = None
        if all(a is not None for a in aves):
            ave = sum(c * a for (c, _), a in zip(self.terms, aves))
        object.__setattr__(self, "declared_ave", ave)

    def __call__(self, xs):
        out = np.zeros(np.shape(xs), dtype=complex)
        for c, F in self.terms:
            out = out + c * np.asarray(F(xs))
        return out

    def interval_integral(self, lo, hi, m: int = 64):
        return sum(c * F.interval_integral(lo, hi, m) for c, F in self.terms)

    def cell_integral_exact(self, lo, hi):
        total = Fraction(0)
        for c, F in self.terms:
            part = F.cell_integral_exact(lo, hi)
            if part is None:
                return None
            cf = Fraction(c.real if isinstance(c, complex) else c)
            if isinstance(c, complex) and c.imag != 0:
                return None
            total += cf * part
        return total


@dataclass(frozen=True)
class ComposedWithMap(_ObservableBase):
    """F o T^n evaluated by forward orbit iteration."""

    observable: _ObservableBase
    mp: object
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ConstructionError("composition power must be >= 0")
        object.__setattr__(self, "sup_norm", self.observable.sup_norm)
        object.__setattr__(self, "declared_ave", self.observable.declared_ave)

    def __call__(self, xs):
        ys = np.asarray(xs, dtype=float)
        for _ in range(self.n):
            ys = self.mp.forward_many(ys)
        return self.observable(ys)


@dataclass(frozen=True)
class CesaroAveraged(_ObservableBase):
    """(A_k F)(x) = (1/k) sum_{j<k} F(x + j a): averaging over translates."""

    observable: _ObservableBase
    k: int
    period: float

    def __post_init__(self):
        if self.k < 1:
            raise ConstructionError("translate average needs k >= 1")
        object.__setattr__(self, "sup_norm", self.observable.sup_norm)
        object.__setattr__(self, "declared_ave", self.observable.declared_ave)

    def __call__(self, xs):
        xs = np.asarray(xs, dtype=float)
        total = np.zeros(xs.shape, dtype=complex)
        for j in range(self.k):
            total = total + np.asarray(self.observable(xs + j * self.period))
        return total / self.k

    def interval_integral(self, lo, hi, m: int = 64):
        return (
            sum(
                self.observable.interval_integral(lo + j * self.period, hi + j * self.period, m)
                for j in range(self.k)
            )
            / self.k
        )


def cesaro_average(F: _ObservableBase, k: int, period: float) -> CesaroAveraged:
    """The translate-averaging operator; commutes with translation-invariant maps."""
    return CesaroAveraged(observable=F, k=k, period=period)


@dataclass(frozen=True)
class CellUnions:
    """Exhaustive family of all finite unions of adjacent cells [k, l]."""

    cell_length: float = 1.0

    def window(self, start_cell: int, n_cells: int) -> tuple[float, float]:
        lo = start_cell * self.cell_length
        return lo, lo + n_cells * self.cell_length

    def sweep(self, n_cells: int, fine: int = 8):
        """Windows of n_cells cells at coarse cell starts and sub-cell offsets."""
        coarse = sorted(
            {-2 * n_cells, -n_cells, -n_cells // 2, -n_cells // 4, 0, n_cells // 4,
             n_cells // 2, n_cells, 2 * n_cells}
        )
        for start in coarse:
            for f in range(fine):
                lo = start * self.cell_length + f * self.cell_length / fine
                yield lo, lo + n_cells * self.cell_length


@dataclass(frozen=True)
class CenteredWindows:
    """Exhaustive family of centered intervals [-r, r] (cell aligned for
    unit cells); the smallest family that still exhausts the line."""

    cell_length: float = 1.0

    def window(self, n_cells: int) -> tuple[float, float]:
        r = n_cells * self.cell_length / 2.0
        return -r, r

    def sweep(self, n_cells: int, fine: int = 8):
        yield self.window(n_cells)


def window_average(F: _ObservableBase, lo: float, hi: float, m: int = 64) -> complex:
    """Leb_V(F) = (1/|V|) integral of F over V = [lo, hi]."""
    if hi <= lo:
        raise ConstructionError(f"window [{lo}, {hi}] has nonpositive length")
    return F.interval_integral(lo, hi, m) / (hi - lo)


@dataclass(frozen=True)
class AveEstimate:
    estimate: complex
    uniformity_residual: float
    rows: tuple[tuple[int, complex, float], ...]  # (size_cells, mean, max deviation)
    converged: bool


def ave_estimate(
    F: _ObservableBase,
    family,
    sizes: Sequence[int] = (8, 16, 32, 64, 128),
    tolerance: float = 0.02,
    m: int = 32,
) -> AveEstimate:
    """Empirical infinite-volume average over the given exhaustive family.

    For each window size the window average is computed across an offset
    sweep; the estimate is the mean at the largest size and the uniformity
    residual the worst deviation from it there.  Non-convergence (residual
    above tolerance) is a reported outcome, not an error: it witnesses that
    F has no uniform average over this family.
    """
    rows = []
    estimate = 0.0 + 0.0j
    for size in sizes:
        avgs = [window_average(F, lo, hi, m) for lo, hi in family.sweep(size)]
        mean = sum(avgs) / len(avgs)
        rows.append((size, mean, avgs))
    estimate = rows[-1][1]
    out_rows = []
    for size, mean, avgs in rows:
        dev = max(abs(a - estimate) for a in avgs)
        out_rows.append((size, mean, dev))
    residual = out_rows[-1][2]
    return AveEstimate(
        estimate=estimate,
        uniformity_residual=residual,
        rows=tuple(out_rows),
        converged=residual <= tolerance,
    )


def cell_integrals(F: _ObservableBase, lo_cell: int, hi_cell: int, cell_length: float = 1.0):
    """f_j = integral of F over cell I_j for j in [lo_cell, hi_cell]."""
    return [
        complex(F.interval_integral(j * cell_length, (j + 1) * cell_length))
        for j in range(lo_cell, hi_cell + 1)
    ]


def cell_integrals_exact(F: _ObservableBase, lo_cell: int, hi_cell: int, cell_length=1):
    """Exact rational f_j, or None if the variant admits no exact integral."""
    a = Fraction(cell_length)
    out = []
    for j in range(lo_cell, hi_cell + 1):
        v = F.cell_integral_exact(j * a, (j + 1) * a)
        if v is None:
            return None
        out.append(v)
    return out
