"""Cell partitions of the real line with uniformly bounded cell sizes.

A partition is a bi-infinite increasing sequence of breakpoints ``a_j`` with
``c1 <= a_{j+1} - a_j <= c2``; the cells are ``I_j = [a_j, a_{j+1}]``.  Only
periodic partitions are representable: a finite window of breakpoints is
stored and extended by translation.  The uniform partition with spacing ``a``
is the one-cell-per-period special case.

Boundary convention: a point sitting exactly on a breakpoint belongs to the
cell on its right.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .errors import ConstructionError

RationalLike = Union[int, float, Fraction, str]


def as_fraction(x: RationalLike, *, context: str = "value") -> Fraction:
    """Convert ints, floats, Fractions and 'p/q' strings to an exact Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise ConstructionError(f"{context} must be numeric, got bool")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ConstructionError(f"{context} must be finite, got {x!r}")
        return Fraction(x)  # exact binary expansion
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ConstructionError(f"{context} is not a valid rational: {x!r}") from exc
    raise ConstructionError(f"{context} has unsupported type {type(x).__name__}")


@dataclass(frozen=True)
class Partition:
    """Periodic cell partition given by one period of breakpoints.

    ``breakpoints`` holds one full period ``b_0 < b_1 < ... < b_m``; the
    period length is ``b_m - b_0`` and cell ``j = q*m + r`` (0 <= r < m) is
    ``[b_r, b_{r+1}] + q*(b_m - b_0)``.
    """

    breakpoints: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        bps = self.breakpoints
        if len(bps) < 2:
            raise ConstructionError("a partition needs at least two breakpoints")
        for lo, hi in zip(bps, bps[1:]):
            if not hi > lo:
                raise ConstructionError("breakpoints must be strictly increasing")

    @classmethod
    def uniform(cls, spacing: RationalLike, origin: RationalLike = 0) -> "Partition":
        a = as_fraction(spacing, context="spacing")
        if a <= 0:
            raise ConstructionError(f"spacing must be positive, got {a}")
        o = as_fraction(origin, context="origin")
        return cls(breakpoints=(o, o + a))

    @classmethod
    def periodic(cls, breakpoints: Sequence[RationalLike]) -> "Partition":
        return cls(breakpoints=tuple(as_fraction(b, context="breakpoint") for b in breakpoints))

    @property
    def cells_per_period(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def period(self) -> Fraction:
        return self.breakpoints[-1] - self.breakpoints[0]

    @property
    def is_uniform(self) -> bool:
        return self.cells_per_period == 1

    @property
    def spacing_kind(self) -> str:
        return "uniform" if self.is_uniform else "explicit"

    @property
    def c1(self) -> Fraction:
        """Minimal cell length, valid for the whole periodic extension."""
        return min(hi - lo for lo, hi in zip(self.breakpoints, self.breakpoints[1:]))

    @property
    def c2(self) -> Fraction:
        """Maximal cell length, valid for the whole periodic extension."""
        return max(hi - lo for lo, hi in zip(self.breakpoints, self.breakpoints[1:]))

    def cell_bounds(self, j: int) -> tuple[Fraction, Fraction]:
        m = self.cells_per_period
        q, r = divmod(j, m)
        shift = q * self.period
        return self.breakpoints[r] + shift, self.breakpoints[r + 1] + shift

    def cell_length(self, j: int) -> Fraction:
        lo, hi = self.cell_bounds(j)
        return hi - lo

    def cell_index(self, x: float) -> int:
        """Cell containing x; breakpoints resolve to the right cell."""
        m = self.cells_per_period
        b0 = float(self.breakpoints[0])
        period = float(self.period)
        q = math.floor((x - b0) / period)
        local = x - b0 - q * period
        # guard against rounding straddling the period boundary
        if local < 0:
            q -= 1
            local = x - b0 - q * period
        elif local >= period:
            q += 1
            local = x - b0 - q * period
        if m == 1:
            return q
        bps = [float(b - self.breakpoints[0]) for b in self.breakpoints]
        r = bisect_right(bps, local, 1, m) - 1
        return q * m + r

    def cell_indices(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`cell_index` for uniform partitions."""
        if not self.is_uniform:
            return np.array([self.cell_index(float(x)) for x in np.asarray(xs).ravel()]).reshape(
                np.shape(xs)
            )
        b0 = float(self.breakpoints[0])
        a = float(self.period)
        return np.floor((np.asarray(xs, dtype=float) - b0) / a).astype(np.int64)

    def check_spacing(self, c1: RationalLike, c2: RationalLike) -> None:
        """Verify the declared spacing bounds c1 <= |I_j| <= c2 on the period."""
        lo = as_fraction(c1, context="c1")
        hi = as_fraction(c2, context="c2")
        if not (0 < lo <= hi):
            raise ConstructionError(f"need 0 < c1 <= c2, got c1={lo}, c2={hi}")
        if not (lo <= self.c1 and self.c2 <= hi):
            raise ConstructionError(
                f"cell lengths range over [{self.c1}, {self.c2}], "
                f"violating declared bounds [{lo}, {hi}]"
            )
