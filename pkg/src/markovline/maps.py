"""Lebesgue-preserving uniformly expanding Markov maps of the real line.

Three constructions are provided:

* translation-invariant maps (quasi-lifts of expanding circle maps), given
  by the inverse branches through the fundamental cell;
* finite modifications of quasi-lifts, obtained by adding a zero-sum family
  of bump perturbations to the inverse branches whose image contains the
  fundamental cell;
* piecewise-affine random-walk maps driven by a banded stochastic kernel.

Maps are represented by their inverse branches.  A quasi-lift with period
``a`` stores, for each cell index ``i`` in the covering set ``J``, the
restriction to the fundamental cell of the inverse branch landing in cell
``i``: an affine part plus an optional bump multiple.  Every other branch
is a translate.  Forward evaluation inverts the appropriate branch with
bracketed Newton iteration (closed form in the affine case).

Boundary convention: breakpoints and interior cut points resolve to the
branch of the interval on their right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .bumps import POLY3, Bump, get_bump
from .chain import BandedKernel
from .errors import ConstructionError
from .partition import Partition, RationalLike, as_fraction

__all__ = [
    "BranchPiece",
    "QuasiLift",
    "FiniteModification",
    "RandomWalkMap",
    "build_quasi_lift",
    "build_finite_modification",
    "build_random_walk_map",
    "evaluate_map",
    "measure_preservation_report",
    "MeasurePreservationReport",
    "distortion_log_bound",
    "axiom_report",
]

NEWTON_TOL = 1e-13
NEWTON_MAX_ITER = 200


@dataclass(frozen=True)
class BranchPiece:
    """Restriction to the fundamental cell of the inverse branch into cell ``home``.

    The map sends a subinterval of cell ``home`` onto the fundamental cell;
    this piece is the inverse of that assignment: affine ``slope*t + offset``
    plus ``delta`` times the bump profile (local coordinate t in [0, a]).
    """

    home: int
    slope: Fraction
    offset: Fraction
    delta: Fraction = Fraction(0)


def _same_sign(values: Iterable[Fraction]) -> int:
    signs = {1 if v > 0 else -1 if v < 0 else 0 for v in values}
    if 0 in signs or len(signs) != 1:
        raise ConstructionError("inverse branch slopes must be nonzero and share one sign")
    return signs.pop()


class _SmoothMapBase:
    """Shared evaluation machinery for quasi-lifts and finite modifications."""

    partition: Partition
    bump: Bump
    pieces: tuple[BranchPiece, ...]

    # ---- derived data ------------------------------------------------

    def _piece_by_home(self) -> dict[int, BranchPiece]:
        return {p.home: p for p in self.pieces}

    def _setup_selection(self) -> None:
        """Precompute the forward-selection table on the fundamental cell.

        The images of the branch pieces, shifted back by their home cells,
        tile [0, a]; picking the sub-branch of a point reduces to one
        searchsorted against the tile boundaries.
        """
        a = self.partition.period
        orient = self.orientation
        tiles = []
        for p in self.pieces:
            lo_v = p.offset - p.home * a
            hi_v = p.slope * a + p.offset - p.home * a
            lo, hi = (lo_v, hi_v) if orient > 0 else (hi_v, lo_v)
            tiles.append((lo, hi, p))
        tiles.sort(key=lambda t: t[0])
        if tiles[0][0] != 0 or tiles[-1][1] != a:
            raise ConstructionError(
                "branch images do not tile the fundamental cell "
                f"(span [{tiles[0][0]}, {tiles[-1][1]}] instead of [0, {a}])"
            )
        for (lo1, hi1, _), (lo2, hi2, _) in zip(tiles, tiles[1:]):
            if hi1 != lo2:
                raise ConstructionError(
                    f"branch images leave a gap or overlap at {hi1} vs {lo2}; "
                    "each branch must map onto whole cells"
                )
        object.__setattr__(self, "_tiles", tuple(tiles))
        object.__setattr__(
            self, "_tile_bounds", np.array([float(lo) for lo, _, _ in tiles[1:]])
        )
        object.__setattr__(self, "_tile_pieces", tuple(p for _, _, p in tiles))

    # ---- effective perturbation (overridden by FiniteModification) ----

    def _extra_delta(self, branch_cell: int) -> Fraction:
        return Fraction(0)

    def _effective_delta(self, piece: BranchPiece, branch_cell: int, over_cell: int) -> Fraction:
        if over_cell == 0:
            return piece.delta + self._extra_delta(branch_cell)
        return piece.delta

    # ---- scalar/vector evaluation -------------------------------------

    def _solve_piece(self, piece: BranchPiece, d: float, targets: np.ndarray) -> np.ndarray:
        """Solve piece(u) = target for u in [0, a]: Newton from the affine
        seed, bracketed bisection for any straggler (monotone pieces)."""
        a = float(self.partition.period)
        s = float(piece.slope)
        o = float(piece.offset)
        if d == 0.0:
            return (targets - o) / s
        bump = self.bump
        u = np.clip((targets - o) / s, 0.0, a)
        bad = np.array([True])
        for _ in range(NEWTON_MAX_ITER):
            val = s * u + o + d * bump.value(u / a)
            err = val - targets
            bad = np.abs(err) > NEWTON_TOL
            if not np.any(bad):
                return u
            der = s + d * bump.d1(u / a) / a
            u = np.clip(u - err / der, 0.0, a)
        sign = 1.0 if s > 0 else -1.0
        for i in np.nonzero(bad)[0]:
            lo, hi = 0.0, a
            mid = u[i]
            for _ in range(NEWTON_MAX_ITER):
                mid = 0.5 * (lo + hi)
                v = s * mid + o + d * bump.value(mid / a)
                if abs(v - targets[i]) <= NEWTON_TOL:
                    break
                if (v - targets[i]) * sign < 0:
                    lo = mid
                else:
                    hi = mid
            u[i] = mid
        return u

    def forward_many(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized forward image T(x)."""
        xs = np.asarray(xs, dtype=float)
        a = float(self.partition.period)
        cells = self.partition.cell_indices(xs)
        t = xs - cells * a
        slots = np.searchsorted(self._tile_bounds, t, side="right")
        out = np.empty_like(xs, dtype=float)
        for slot, piece in enumerate(self._tile_pieces):
            mask = slots == slot
            if not np.any(mask):
                continue
            i = piece.home
            targets = t[mask] + i * a
            cs = cells[mask]
            deltas = np.array(
                [float(self._effective_delta(piece, int(c), int(c) - i)) for c in cs]
            )
            u = np.empty_like(targets)
            for dv in np.unique(deltas):
                m = deltas == dv
                u[m] = self._solve_piece(piece, float(dv), targets[m])
            out[mask] = u - i * a + cs * a
        return out

    def forward(self, x: float) -> float:
        return float(self.forward_many(np.array([x]))[0])

    def forward_with_derivative_many(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Forward image and T'(x) = 1/phi'(T x) for each point."""
        xs = np.asarray(xs, dtype=float)
        a = float(self.partition.period)
        cells = self.partition.cell_indices(xs)
        t = xs - cells * a
        slots = np.searchsorted(self._tile_bounds, t, side="right")
        out = np.empty_like(xs, dtype=float)
        der = np.empty_like(xs, dtype=float)
        bump = self.bump
        for slot, piece in enumerate(self._tile_pieces):
            mask = slots == slot
            if not np.any(mask):
                continue
            i = piece.home
            targets = t[mask] + i * a
            cs = cells[mask]
            deltas = np.array(
                [float(self._effective_delta(piece, int(c), int(c) - i)) for c in cs]
            )
            u = np.empty_like(targets)
            for dv in np.unique(deltas):
                m = deltas == dv
                u[m] = self._solve_piece(piece, float(dv), targets[m])
            dphi = float(piece.slope) + deltas * bump.d1(u / float(a)) / float(a)
            out[mask] = u - i * a + cs * a
            der[mask] = 1.0 / dphi
        return out, der

    def pf_terms(self, xs: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Preimage branches for the transfer operator.

        For each branch piece returns (preimage points, inverse-branch
        derivative) evaluated at every x; the transfer operator is the sum
        of g(y) * |dphi| over the returned terms.
        """
        xs = np.asarray(xs, dtype=float)
        a = float(self.partition.period)
        cells = self.partition.cell_indices(xs)
        t = xs - cells * a
        bump = self.bump
        in_zero = cells == 0
        terms = []
        for piece in self.pieces:
            s = float(piece.slope)
            o = float(piece.offset)
            base_d = float(piece.delta)
            extra = float(self._extra_delta(piece.home))
            tt = t / a
            val = s * t + o
            dphi = np.full_like(t, s)
            d_arr = np.where(in_zero, base_d + extra, base_d)
            if np.any(d_arr != 0.0):
                val = val + d_arr * bump.value(tt)
                dphi = dphi + d_arr * bump.d1(tt) / a
            ys = val + cells * a
            terms.append((ys, dphi))
        return terms

    def inverse_branch(self, branch_cell: int, x: float) -> float:
        """phi_{branch_cell}(x): the preimage of x inside cell ``branch_cell``."""
        a = self.partition.period
        m = self.partition.cell_index(x)
        i = branch_cell - m
        piece = self._piece_by_home().get(i)
        if piece is None:
            raise ConstructionError(
                f"cell {m} is not in the image of the branch of cell {branch_cell}"
            )
        t = x - float(m * a)
        d = self._effective_delta(piece, branch_cell, m)
        val = float(piece.slope) * t + float(piece.offset)
        if d:
            val += float(d) * self.bump.value(t / float(a))
        return val + float(m * a)

    def inverse_branch_exact(self, branch_cell: int, x: Fraction, over_cell: int) -> Fraction:
        """Inverse-branch value for rational x known to lie in ``over_cell``.

        Exact rational arithmetic for affine branches; the bump contribution
        of a perturbed branch is evaluated in floating point (exact degree-6
        composition grows exponentially with the word length), which keeps
        the result a dyadic rational accurate to rounding.
        """
        a = self.partition.period
        i = branch_cell - over_cell
        piece = self._piece_by_home().get(i)
        if piece is None:
            raise ConstructionError(
                f"cell {over_cell} is not in the image of the branch of cell {branch_cell}"
            )
        t = x - over_cell * a
        base = piece.slope * t + piece.offset
        d = self._effective_delta(piece, branch_cell, over_cell)
        if d:
            base += Fraction(float(d) * self.bump.value(float(t / a)))
        return base + over_cell * a

    def branch_derivative_bounds(self, branch_cell: int) -> tuple[float, float]:
        """(inf, sup) of |phi'| over the branch of ``branch_cell``."""
        a = float(self.partition.period)
        lo = math.inf
        hi = 0.0
        for piece in self.pieces:
            over = branch_cell - piece.home
            d = self._effective_delta(piece, branch_cell, over)
            amp = abs(float(d)) * self.bump.max_abs_d1 / a
            lo = min(lo, abs(float(piece.slope)) - amp)
            hi = max(hi, abs(float(piece.slope)) + amp)
        return lo, hi

    # ---- transition structure ----------------------------------------

    def kernel_data(self):
        """Band, stencil and exceptional rows of the transition matrix.

        Entries are endpoint differences of the inverse branches divided by
        the cell length; bump perturbations vanish at cell endpoints, so the
        entries are the exact affine slopes.
        """
        homes = [p.home for p in self.pieces]
        w = max(abs(min(homes)), abs(max(homes)))
        stencil = [Fraction(0)] * (2 * w + 1)
        for p in self.pieces:
            stencil[-p.home + w] = abs(p.slope)
        return w, tuple(stencil), {}

    @property
    def covering_set(self) -> tuple[int, ...]:
        """Branch cells whose image contains the fundamental cell."""
        return tuple(p.home for p in self.pieces)


@dataclass(frozen=True)
class QuasiLift(_SmoothMapBase):
    """Translation-invariant expanding Markov map, one cell per period."""

    partition: Partition
    pieces: tuple[BranchPiece, ...]
    bump: Bump = POLY3
    orientation: int = 1
    lam: float = 0.0
    eta: float = 0.0
    j_hat: int = 0
    jump_bound: int = 0

    def __post_init__(self) -> None:
        self._setup_selection()

    @property
    def exceptional_cells(self) -> tuple[int, ...]:
        return ()

    @property
    def k_prime(self) -> int:
        return 0

    def translate_invariance_defect(self, xs: np.ndarray) -> float:
        """max |T(x + a) - T(x) - a| over the sample (identity up to rounding)."""
        a = float(self.partition.period)
        lhs = self.forward_many(np.asarray(xs) + a)
        rhs = self.forward_many(np.asarray(xs)) + a
        return float(np.max(np.abs(lhs - rhs)))


@dataclass(frozen=True)
class FiniteModification(_SmoothMapBase):
    """Map equal to a quasi-lift outside finitely many central cells."""

    base: QuasiLift
    fm_deltas: tuple[tuple[int, Fraction], ...]
    lam: float = 0.0
    eta: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "partition", self.base.partition)
        object.__setattr__(self, "bump", self.base.bump)
        object.__setattr__(self, "pieces", self.base.pieces)
        object.__setattr__(self, "orientation", self.base.orientation)
        object.__setattr__(self, "_fm_map", dict(self.fm_deltas))
        self._setup_selection()

    @property
    def j_hat(self) -> int:
        return self.base.j_hat

    @property
    def jump_bound(self) -> int:
        return self.base.jump_bound

    @property
    def k_prime(self) -> int:
        return max((abs(j) for j, d in self.fm_deltas if d != 0), default=0)

    @property
    def exceptional_cells(self) -> tuple[int, ...]:
        kp = self.k_prime
        return tuple(range(-kp, kp + 1)) if kp else ()

    def _extra_delta(self, branch_cell: int) -> Fraction:
        return self._fm_map.get(branch_cell, Fraction(0))

    def agrees_with_base_on(self, cell: int) -> bool:
        """Branch-data equality with the base map on the given cell."""
        return self._fm_map.get(cell, Fraction(0)) == 0


@dataclass(frozen=True)
class RandomWalkMap:
    """Piecewise-affine map representing a banded random walk on Z.

    Cell I_j = [j, j+1] is cut into subintervals of lengths p_{j,k}
    (degenerate ones are skipped); the subinterval for target k is mapped
    affinely onto I_k with slope 1/p_{j,k}.
    """

    kernel: BandedKernel
    lam: float = 0.0
    eta: float = 0.0
    j_hat: int = 0
    jump_bound: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "partition", Partition.uniform(1))
        # idempotent memo of per-row cut points; concurrent fills are benign
        object.__setattr__(self, "_row_cache", {})

    @property
    def orientation(self) -> int:
        return 1

    @property
    def k_prime(self) -> int:
        return self.kernel.k_prime

    @property
    def exceptional_cells(self) -> tuple[int, ...]:
        kp = self.kernel.k_prime
        return tuple(range(-kp, kp + 1)) if kp else ()

    def _row_data(self, j: int):
        """(cut points incl. 0 and 1, probabilities, targets) for row j."""
        key = j if abs(j) <= self.kernel.k_prime else None
        cached = self._row_cache.get(key)
        if cached is None:
            row = self.kernel.row(j if key is not None else self.kernel.k_prime + 1)
            cuts = [Fraction(0)]
            for p in row:
                cuts.append(cuts[-1] + p)
            cuts_f = np.array([float(c) for c in cuts])
            probs_f = np.array([float(p) for p in row])
            offsets = np.arange(-self.kernel.band, self.kernel.band + 1)
            cached = (cuts, cuts_f, probs_f, offsets)
            self._row_cache[key] = cached
        return cached

    def cut_points(self, j: int) -> list[Fraction]:
        """Exact subinterval cut points of cell j (absolute coordinates)."""
        cuts, _, _, _ = self._row_data(j)
        return [j + c for c in cuts]

    def forward_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.empty_like(xs)
        cells = np.floor(xs).astype(np.int64)
        u = xs - cells
        kp = self.kernel.k_prime
        groups = [("bulk", np.abs(cells) > kp)]
        groups += [(j, cells == j) for j in range(-kp, kp + 1)]
        for key, mask in groups:
            if not np.any(mask):
                continue
            j = self.kernel.k_prime + 1 if key == "bulk" else key
            _, cuts_f, probs_f, offsets = self._row_data(j)
            um = u[mask]
            idx = np.searchsorted(cuts_f[1:-1], um, side="right")
            p = probs_f[idx]
            out[mask] = (um - cuts_f[idx]) / p + cells[mask] + offsets[idx]
        return out

    def forward(self, x: float) -> float:
        return float(self.forward_many(np.array([x]))[0])

    def forward_with_derivative_many(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        xs = np.asarray(xs, dtype=float)
        out = np.empty_like(xs)
        der = np.empty_like(xs)
        cells = np.floor(xs).astype(np.int64)
        u = xs - cells
        kp = self.kernel.k_prime
        groups = [("bulk", np.abs(cells) > kp)]
        groups += [(j, cells == j) for j in range(-kp, kp + 1)]
        for key, mask in groups:
            if not np.any(mask):
                continue
            j = self.kernel.k_prime + 1 if key == "bulk" else key
            _, cuts_f, probs_f, offsets = self._row_data(j)
            um = u[mask]
            idx = np.searchsorted(cuts_f[1:-1], um, side="right")
            p = probs_f[idx]
            out[mask] = (um - cuts_f[idx]) / p + cells[mask] + offsets[idx]
            der[mask] = 1.0 / p
        return out, der

    def pf_terms(self, xs: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Preimage branches: for x in I_k, one branch per source row j with
        p_{jk} > 0; the inverse-branch derivative is p_{jk}."""
        xs = np.asarray(xs, dtype=float)
        cells = np.floor(xs).astype(np.int64)
        local = xs - cells
        w = self.kernel.band
        terms = []
        for o in range(-w, w + 1):
            ys = np.empty_like(xs)
            dphi = np.zeros_like(xs)
            for k in np.unique(cells):
                j = int(k) + o
                mask = cells == k
                p = self.kernel.row(j)[-o + w]
                if p == 0:
                    ys[mask] = 0.0
                    continue
                cuts, _, _, _ = self._row_data(j)
                ys[mask] = j + float(cuts[-o + w]) + float(p) * local[mask]
                dphi[mask] = float(p)
            terms.append((ys, dphi))
        return terms

    def inverse_branch(self, branch_cell: int, x: float) -> float:
        k = self.partition.cell_index(x)
        return float(self.inverse_branch_exact(branch_cell, Fraction(x), k))

    def inverse_branch_exact(self, branch_cell: int, x: Fraction, over_cell: int) -> Fraction:
        w = self.kernel.band
        o = over_cell - branch_cell
        if abs(o) > w:
            raise ConstructionError(
                f"cell {over_cell} is outside the band of the branch of cell {branch_cell}"
            )
        p = self.kernel.row(branch_cell)[o + w]
        if p == 0:
            raise ConstructionError(
                f"transition {branch_cell} -> {over_cell} has probability 0"
            )
        cuts, _, _, _ = self._row_data(branch_cell)
        return branch_cell + cuts[o + w] + p * (x - over_cell)

    def branch_derivative_bounds(self, branch_cell: int) -> tuple[float, float]:
        row = [p for p in self.kernel.row(branch_cell) if p > 0]
        return float(min(row)), float(max(row))

    def kernel_data(self):
        return self.kernel.band, self.kernel.stencil, dict(self.kernel.exceptional)

    @property
    def orientation_sign(self) -> int:
        return 1


MapSpec = Union[QuasiLift, FiniteModification, RandomWalkMap]


def _covering_checks(pieces: Sequence[BranchPiece]) -> None:
    homes = [p.home for p in pieces]
    if len(set(homes)) != len(homes):
        raise ConstructionError("duplicate branch piece for one cell")
    if 0 not in homes:
        raise ConstructionError(
            "the branch of the fundamental cell must cover the fundamental cell "
            "(its image contains its own cell)"
        )
    if sorted(homes) != list(range(min(homes), max(homes) + 1)):
        raise ConstructionError("covering branch cells must form a contiguous range")
    if len(homes) < 2:
        raise ConstructionError(
            "each branch image must consist of at least 2 cells; "
            "a single-cell image is not allowed"
        )


def _monotonicity_and_expansion(
    pieces: Sequence[BranchPiece],
    deltas_eff: Mapping[int, Fraction],
    a: Fraction,
    bump: Bump,
) -> tuple[float, float]:
    """Validate strict monotonicity, return (lambda, eta)."""
    af = float(a)
    sup_dphi = 0.0
    inf_dphi = math.inf
    sup_ratio = 0.0
    for p in pieces:
        d = abs(float(deltas_eff.get(p.home, p.delta)))
        amp1 = d * bump.max_abs_d1 / af
        amp2 = d * bump.max_abs_d2 / (af * af)
        lo = abs(float(p.slope)) - amp1
        hi = abs(float(p.slope)) + amp1
        if lo <= 1e-12:
            raise ConstructionError(
                f"perturbation of the branch into cell {p.home} destroys monotonicity "
                f"(|slope|={abs(float(p.slope)):.6g}, bump amplitude {amp1:.6g})"
            )
        sup_dphi = max(sup_dphi, hi)
        inf_dphi = min(inf_dphi, lo)
        if amp2:
            sup_ratio = max(sup_ratio, amp2 / (lo * lo))
    if sup_dphi >= 1.0 - 1e-12:
        raise ConstructionError(
            f"branches are not uniformly expanding: sup |phi'| = {sup_dphi:.12g} >= 1"
        )
    return 1.0 / sup_dphi, sup_ratio


def _leb_residual_on_grid(mp: _SmoothMapBase, points: int) -> float:
    """max over an interior grid of |sum of inverse-branch slopes - 1|."""
    a = float(mp.partition.period)
    cells = list(mp.exceptional_cells) or [0]
    lo_cell = min(cells) - mp.jump_bound
    hi_cell = max(cells) + mp.jump_bound
    worst = 0.0
    for c in range(lo_cell, hi_cell + 1):
        ts = (np.arange(points) + 0.5) / points * a + c * a
        total = np.zeros(points)
        for _, dphi in mp.pf_terms(ts):
            total += np.abs(dphi)
        worst = max(worst, float(np.max(np.abs(total - 1.0))))
    return worst


def build_quasi_lift(
    period: RationalLike,
    pieces: Sequence[tuple],
    bump: Bump | str = POLY3,
    leb_tolerance: float = 1e-10,
) -> QuasiLift:
    """Construct a quasi-lift from its inverse branches through the fundamental cell.

    ``pieces`` lists ``(cell, slope, offset[, delta])`` tuples: the inverse
    branch landing in ``cell``, restricted to the fundamental cell, is
    ``slope*t + offset + delta*bump(t/a)``.  Branch images must tile the
    fundamental cell exactly (the Markov property) and the summed slope
    moduli must equal 1 on a grid (Lebesgue preservation).
    """
    a = as_fraction(period, context="period")
    if a <= 0:
        raise ConstructionError(f"period must be positive, got {a}")
    if isinstance(bump, str):
        bump = get_bump(bump)
    parsed = []
    for spec in pieces:
        if len(spec) == 3:
            cell, slope, offset = spec
            delta: RationalLike = 0
        else:
            cell, slope, offset, delta = spec
        parsed.append(
            BranchPiece(
                home=int(cell),
                slope=as_fraction(slope, context="slope"),
                offset=as_fraction(offset, context="offset"),
                delta=as_fraction(delta, context="delta"),
            )
        )
    parsed.sort(key=lambda p: p.home)
    _covering_checks(parsed)
    orient = _same_sign(p.slope for p in parsed)
    lam, eta = _monotonicity_and_expansion(
        parsed, {p.home: p.delta for p in parsed}, a, bump
    )
    homes = [p.home for p in parsed]
    jump = max(abs(min(homes)), abs(max(homes)))
    mp = QuasiLift(
        partition=Partition.uniform(a),
        pieces=tuple(parsed),
        bump=bump,
        orientation=orient,
        lam=lam,
        eta=eta,
        j_hat=len(parsed),
        jump_bound=jump,
    )
    residual = _leb_residual_on_grid(mp, 1024)
    if residual > leb_tolerance:
        raise ConstructionError(
            f"inverse-branch slopes do not sum to 1: residual {residual:.3e} "
            f"exceeds tolerance {leb_tolerance:.1e} (Lebesgue preservation fails)"
        )
    return mp


def build_finite_modification(
    base: QuasiLift,
    deltas: Mapping[int, RationalLike],
    bump: Bump | str | None = None,
    leb_tolerance: float = 1e-10,
) -> FiniteModification:
    """Perturb the branches of ``base`` whose image contains the fundamental cell.

    ``deltas`` must assign a dyadic rational to every covering branch cell;
    the orientation-signed sum must vanish exactly, which preserves the
    Lebesgue measure without changing any transition weight.
    """
    if bump is not None:
        bump = get_bump(bump) if isinstance(bump, str) else bump
        if bump is not base.bump:
            raise ConstructionError(
                "finite modifications must reuse the base map's bump profile"
            )
    covering = set(base.covering_set)
    keys = {int(j) for j in deltas}
    if keys != covering:
        raise ConstructionError(
            f"perturbed branches {sorted(keys)} must be exactly the branches whose "
            f"image contains the fundamental cell, {sorted(covering)}"
        )
    parsed: dict[int, Fraction] = {}
    for j, d in deltas.items():
        f = as_fraction(d, context=f"delta[{j}]")
        if f.denominator & (f.denominator - 1):
            raise ConstructionError(
                f"delta[{j}] = {f} is not a dyadic rational; exact representability "
                "is required for the zero-sum precondition"
            )
        parsed[int(j)] = f
    signed = sum(
        (1 if p.slope > 0 else -1) * parsed[p.home] for p in base.pieces
    )
    if signed != 0:
        raise ConstructionError(
            f"orientation-signed perturbation sum must vanish exactly, got {signed}"
        )
    eff = {p.home: p.delta + parsed[p.home] for p in base.pieces}
    lam, eta = _monotonicity_and_expansion(base.pieces, eff, base.partition.period, base.bump)
    mp = FiniteModification(
        base=base,
        fm_deltas=tuple(sorted(parsed.items())),
        lam=min(lam, base.lam),
        eta=max(eta, base.eta),
    )
    residual = _leb_residual_on_grid(mp, 1024)
    if residual > leb_tolerance:
        raise ConstructionError(
            f"measure-preservation residual {residual:.3e} exceeds {leb_tolerance:.1e}"
        )
    return mp


def build_random_walk_map(kernel: BandedKernel) -> RandomWalkMap:
    """Interval map on unit cells realizing the given random-walk kernel."""
    spans = []
    jumps = []
    rows = [kernel.stencil] + [row for _, row in kernel.exceptional]
    for row in rows:
        support = [o for o, p in zip(range(-kernel.band, kernel.band + 1), row) if p > 0]
        if not support:
            raise ConstructionError("kernel has an empty row")
        spans.append(support[-1] - support[0] + 1)
        jumps.append(max(abs(support[0]), abs(support[-1])))
    return RandomWalkMap(
        kernel=kernel,
        lam=1.0 / float(kernel.max_entry()),
        eta=0.0,
        j_hat=max(spans),
        jump_bound=max(jumps),
    )


def evaluate_map(mp: MapSpec, x: float) -> float:
    """Forward evaluation T(x); cut points resolve to the right interval."""
    return mp.forward(x)


@dataclass(frozen=True)
class MeasurePreservationReport:
    per_cell: tuple[tuple[int, float], ...]
    max_residual: float

    def cell_residual(self, j: int) -> float:
        return dict(self.per_cell)[j]


def measure_preservation_report(
    mp: MapSpec,
    points_per_cell: int = 64,
    window: tuple[int, int] | None = None,
) -> MeasurePreservationReport:
    """Grid check of sum over preimages of 1/|T'| = 1, per cell.

    The window defaults to the exceptional cells padded by one jump bound;
    grid points sit strictly inside cells, so the right-interval convention
    never fires.
    """
    if window is None:
        kp = mp.k_prime
        pad = mp.jump_bound + 1
        window = (-kp - pad, kp + pad)
    a = float(mp.partition.period)
    rows = []
    worst = 0.0
    for c in range(window[0], window[1] + 1):
        ts = (np.arange(points_per_cell) + 0.5) / points_per_cell * a + c * a
        total = np.zeros(points_per_cell)
        for _, dphi in mp.pf_terms(ts):
            total += np.abs(dphi)
        res = float(np.max(np.abs(total - 1.0)))
        rows.append((c, res))
        worst = max(worst, res)
    return MeasurePreservationReport(per_cell=tuple(rows), max_residual=worst)


def distortion_log_bound(mp: MapSpec) -> float:
    """log D = eta * c2 * lambda / (lambda - 1).

    Bounds log of the ratio of |（T^n)'| at two points of one n-cylinder:
    the k-th orbit points are at most c2 * lambda^{-(n-1-k)} apart, and the
    summed geometric series with ratio 1/lambda gives the factor
    lambda/(lambda-1).
    """
    if mp.lam <= 1.0:
        raise ConstructionError(
            f"distortion bound needs uniform expansion lambda > 1, got {mp.lam}"
        )
    return mp.eta * float(mp.partition.c2) * mp.lam / (mp.lam - 1.0)


def axiom_report(mp: MapSpec, points_per_cell: int = 64) -> dict:
    """Numeric verification of the standing assumptions on a constructed map."""
    part = mp.partition
    report: dict = {
        "spacing_c1": float(part.c1),
        "spacing_c2": float(part.c2),
        "lambda": mp.lam,
        "eta": mp.eta,
        "j_hat": mp.j_hat,
        "jump_bound": mp.jump_bound,
    }
    report["uniformly_expanding"] = mp.lam > 1.0
    # slope bound on a grid: |T'(x)| >= lambda
    kp = mp.k_prime
    pad = mp.jump_bound + 1
    cells = range(-kp - pad, kp + pad + 1)
    a = float(part.period)
    min_slope = math.inf
    for c in cells:
        ts = (np.arange(points_per_cell) + 0.5) / points_per_cell * a + c * a
        _, der = mp.forward_with_derivative_many(ts)
        min_slope = min(min_slope, float(np.min(np.abs(der))))
    report["min_abs_slope_on_grid"] = min_slope
    report["slope_bound_holds"] = min_slope >= mp.lam * (1.0 - 1e-12)
    mpr = measure_preservation_report(mp, points_per_cell)
    report["leb_residual"] = mpr.max_residual
    return report
