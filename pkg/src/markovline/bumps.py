"""Closed-form C^2 bump profiles used to perturb inverse branches.

A bump lives on the unit interval in local coordinates; value and first
derivative vanish at both endpoints so that a perturbed inverse branch keeps
the endpoint values (and hence the cell-to-cell transition weights) of its
affine part.  Derivatives are closed-form; the extrema below are exact, so
monotonicity and distortion parameters of perturbed branches can be bounded
without any numerical search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .errors import ConstructionError

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class Bump:
    """Polynomial bump ((t(1-t))^3 family) on local coordinates [0, 1]."""

    name: str
    max_value: float
    max_abs_d1: float
    max_abs_d2: float

    def value(self, t: ArrayLike) -> ArrayLike:
        f = t * (1.0 - t)
        return f * f * f

    def d1(self, t: ArrayLike) -> ArrayLike:
        f = t * (1.0 - t)
        return 3.0 * f * f * (1.0 - 2.0 * t)

    def d2(self, t: ArrayLike) -> ArrayLike:
        f = t * (1.0 - t)
        return 6.0 * f * (1.0 - 2.0 * t) ** 2 - 6.0 * f * f

    def value_exact(self, t: Fraction) -> Fraction:
        f = t * (1 - t)
        return f * f * f

    def d1_exact(self, t: Fraction) -> Fraction:
        f = t * (1 - t)
        return 3 * f * f * (1 - 2 * t)


# (t(1-t))^3: peak 1/64 at t=1/2; |d1| peaks at t=(5∓√5)/10 where t(1-t)=1/5,
# giving 3√5/125; |d2| peaks at t=1/2 with value 3/8.
POLY3 = Bump(
    name="poly3",
    max_value=1.0 / 64.0,
    max_abs_d1=3.0 * math.sqrt(5.0) / 125.0,
    max_abs_d2=3.0 / 8.0,
)

BUMPS: dict[str, Bump] = {POLY3.name: POLY3}


def get_bump(name: str) -> Bump:
    try:
        return BUMPS[name]
    except KeyError:
        raise ConstructionError(
            f"unknown bump id {name!r}; available: {sorted(BUMPS)}"
        ) from None
