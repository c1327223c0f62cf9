"""Banded, eventually-translation-invariant stochastic matrices over the integers.

A kernel consists of a bulk stencil (one row shape repeated along the
diagonal) plus finitely many exceptional rows near the origin.  Entries are
exact rationals; state evolution is carried out in integer arithmetic over a
common denominator, so mass conservation and monotonicity checks are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import ConstructionError
from .partition import RationalLike, as_fraction

__all__ = [
    "BandedKernel",
    "StateVector",
    "make_kernel",
    "step",
    "evolve",
    "ExactEvolution",
    "FloatEvolution",
    "apply_to_function",
    "is_doubly_stochastic",
    "is_irreducible",
    "is_aperiodic",
    "check_symmetric_decreasing",
    "row_support_straddles",
    "transition_kernel",
]


def _validate_row(row: Sequence[Fraction], band: int, label: str) -> tuple[Fraction, ...]:
    row = tuple(row)
    if len(row) != 2 * band + 1:
        raise ConstructionError(f"{label} must have length {2 * band + 1}, got {len(row)}")
    if any(p < 0 for p in row):
        raise ConstructionError(f"{label} has a negative entry")
    total = sum(row)
    if total != 1:
        raise ConstructionError(f"{label} sums to {total}, not 1")
    return row


@dataclass(frozen=True)
class BandedKernel:
    """Stochastic matrix p_{jk} on Z with p_{jk} = 0 for |k - j| > band.

    ``stencil`` holds the bulk row at offsets ``-band .. band``; rows listed
    in ``exceptional`` (sorted by row index) replace the shifted stencil at
    finitely many indices.
    """

    band: int
    stencil: tuple[Fraction, ...]
    exceptional: tuple[tuple[int, tuple[Fraction, ...]], ...] = ()

    def __post_init__(self) -> None:
        if self.band < 1:
            raise ConstructionError(f"band must be >= 1, got {self.band}")
        _validate_row(self.stencil, self.band, "stencil")
        seen = set()
        for j, row in self.exceptional:
            if j in seen:
                raise ConstructionError(f"duplicate exceptional row at j={j}")
            seen.add(j)
            _validate_row(row, self.band, f"exceptional row j={j}")
        js = [j for j, _ in self.exceptional]
        if js != sorted(js):
            raise ConstructionError("exceptional rows must be sorted by row index")

    @property
    def k_prime(self) -> int:
        """Radius of the exceptional block (0 when fully translation invariant)."""
        return max((abs(j) for j, _ in self.exceptional), default=0)

    @property
    def exceptional_rows(self) -> dict[int, tuple[Fraction, ...]]:
        return dict(self.exceptional)

    def row(self, j: int) -> tuple[Fraction, ...]:
        """Row j as offsets -band..band."""
        for i, r in self.exceptional:
            if i == j:
                return r
        return self.stencil

    def entries(self, j: int) -> dict[int, Fraction]:
        """Nonzero entries of row j keyed by target cell."""
        return {j + o: p for o, p in zip(range(-self.band, self.band + 1), self.row(j)) if p > 0}

    def max_entry(self) -> Fraction:
        m = max(self.stencil)
        for _, row in self.exceptional:
            m = max(m, max(row))
        return m

    def common_denominator(self) -> int:
        d = 1
        for p in self.stencil:
            d = d * p.denominator // math.gcd(d, p.denominator)
        for _, row in self.exceptional:
            for p in row:
                d = d * p.denominator // math.gcd(d, p.denominator)
        return d


def make_kernel(
    band: int,
    stencil: Sequence[RationalLike],
    exceptional: Mapping[int, Sequence[RationalLike]] | None = None,
) -> BandedKernel:
    """Build a kernel from rational-like entries (ints, floats, 'p/q' strings)."""
    st = tuple(as_fraction(p, context="stencil entry") for p in stencil)
    exc = tuple(
        (int(j), tuple(as_fraction(p, context=f"row {j} entry") for p in row))
        for j, row in sorted((exceptional or {}).items())
    )
    return BandedKernel(band=band, stencil=st, exceptional=exc)


@dataclass(frozen=True)
class StateVector:
    """Finitely supported probability vector on Z; values are exact rationals."""

    offset: int
    values: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ConstructionError("state vector must have nonempty support window")
        if any(v < 0 for v in self.values):
            raise ConstructionError("state vector entries must be nonnegative")
        total = sum(self.values)
        if total != 1:
            raise ConstructionError(f"state vector mass is {total}, not 1")

    @classmethod
    def point_mass(cls, j: int) -> "StateVector":
        return cls(offset=j, values=(Fraction(1),))

    @classmethod
    def from_weights(cls, offset: int, weights: Sequence[RationalLike]) -> "StateVector":
        return cls(offset=offset, values=tuple(as_fraction(w, context="weight") for w in weights))

    @property
    def window(self) -> tuple[int, int]:
        return (self.offset, self.offset + len(self.values) - 1)

    def entry(self, j: int) -> Fraction:
        i = j - self.offset
        if 0 <= i < len(self.values):
            return self.values[i]
        return Fraction(0)

    def mass(self) -> Fraction:
        return sum(self.values, Fraction(0))

    def as_floats(self) -> tuple[int, np.ndarray]:
        return self.offset, np.array([float(v) for v in self.values])

    def trimmed(self) -> "StateVector":
        vals = list(self.values)
        lo = 0
        while lo < len(vals) - 1 and vals[lo] == 0:
            lo += 1
        hi = len(vals)
        while hi > lo + 1 and vals[hi - 1] == 0:
            hi -= 1
        return StateVector(offset=self.offset + lo, values=tuple(vals[lo:hi]))


class ExactEvolution:
    """Iterates pi -> pi P in integer arithmetic over a common denominator.

    Numerators are Python ints held in an object array; the denominator is
    multiplied by the kernel's common denominator at every step, so every
    intermediate state is exact.
    """

    def __init__(self, kernel: BandedKernel, start: StateVector):
        self.kernel = kernel
        self._w = kernel.band
        self._kden = kernel.common_denominator()
        self._bulk = np.array([int(p * self._kden) for p in kernel.stencil], dtype=object)
        self._exc = {
            j: np.array([int(p * self._kden) for p in row], dtype=object)
            for j, row in kernel.exceptional
        }
        den = 1
        for v in start.values:
            den = den * v.denominator // math.gcd(den, v.denominator)
        self._nums = np.array([int(v * den) for v in start.values], dtype=object)
        self._den = den
        self._off = start.offset
        self.steps_taken = 0

    @property
    def window(self) -> tuple[int, int]:
        return (self._off, self._off + len(self._nums) - 1)

    @property
    def offset(self) -> int:
        return self._off

    @property
    def numerators(self) -> np.ndarray:
        return self._nums

    @property
    def denominator(self) -> int:
        return self._den

    def step(self) -> None:
        w = self._w
        out = np.convolve(self._nums, self._bulk)
        new_off = self._off - w
        for j, row in self._exc.items():
            i = j - self._off
            if 0 <= i < len(self._nums) and self._nums[i]:
                base = (j - w) - new_off
                out[base : base + 2 * w + 1] += self._nums[i] * (row - self._bulk)
        # trim exact zero margins to keep the window equal to the support
        lo = 0
        n = len(out)
        while lo < n - 1 and out[lo] == 0:
            lo += 1
        hi = n
        while hi > lo + 1 and out[hi - 1] == 0:
            hi -= 1
        self._nums = out[lo:hi]
        self._off = new_off + lo
        self._den *= self._kden
        self.steps_taken += 1

    def run(self, n: int) -> None:
        for _ in range(n):
            self.step()

    def entry(self, j: int) -> Fraction:
        i = j - self._off
        if 0 <= i < len(self._nums):
            return Fraction(int(self._nums[i]), self._den)
        return Fraction(0)

    def sum_range(self, lo: int, hi: int) -> Fraction:
        """Exact sum of entries for lo <= j <= hi."""
        i0 = max(lo - self._off, 0)
        i1 = min(hi - self._off + 1, len(self._nums))
        if i0 >= i1:
            return Fraction(0)
        total = 0
        for v in self._nums[i0:i1]:
            total += int(v)
        return Fraction(total, self._den)

    def mass(self) -> Fraction:
        return self.sum_range(*self.window)

    def weighted_sum(self, coeffs: Mapping[int, Fraction]) -> Fraction:
        """Exact sum of coeffs[j] * pi_j over the support."""
        num = Fraction(0)
        for j, c in coeffs.items():
            i = j - self._off
            if 0 <= i < len(self._nums):
                num += c * int(self._nums[i])
        return num / self._den

    def state_vector(self) -> StateVector:
        vals = tuple(Fraction(int(v), self._den) for v in self._nums)
        return StateVector(offset=self._off, values=vals)


class FloatEvolution:
    """Float64 companion of :class:`ExactEvolution` for long horizons."""

    def __init__(self, kernel: BandedKernel, offset: int, values: np.ndarray):
        self.kernel = kernel
        self._w = kernel.band
        self._bulk = np.array([float(p) for p in kernel.stencil])
        self._exc = {
            j: np.array([float(p) for p in row]) for j, row in kernel.exceptional
        }
        self.offset = offset
        self.values = np.asarray(values, dtype=float).copy()

    @classmethod
    def from_state(cls, kernel: BandedKernel, start: StateVector) -> "FloatEvolution":
        off, vals = start.as_floats()
        return cls(kernel, off, vals)

    def step(self) -> None:
        w = self._w
        out = np.convolve(self.values, self._bulk)
        new_off = self.offset - w
        for j, row in self._exc.items():
            i = j - self.offset
            if 0 <= i < len(self.values) and self.values[i] != 0.0:
                base = (j - w) - new_off
                out[base : base + 2 * w + 1] += self.values[i] * (row - self._bulk)
        self.values = out
        self.offset = new_off

    def run(self, n: int) -> None:
        for _ in range(n):
            self.step()

    def entry(self, j: int) -> float:
        i = j - self.offset
        if 0 <= i < len(self.values):
            return float(self.values[i])
        return 0.0

    def sum_range(self, lo: int, hi: int) -> float:
        i0 = max(lo - self.offset, 0)
        i1 = min(hi - self.offset + 1, len(self.values))
        if i0 >= i1:
            return 0.0
        return float(np.sum(self.values[i0:i1]))


def step(pi: StateVector, kernel: BandedKernel) -> StateVector:
    """One exact evolution step pi -> pi P."""
    ev = ExactEvolution(kernel, pi)
    ev.step()
    return ev.state_vector()


def evolve(pi: StateVector, kernel: BandedKernel, n: int) -> StateVector:
    """n exact evolution steps pi -> pi P^n."""
    if n < 0:
        raise ConstructionError(f"step count must be >= 0, got {n}")
    ev = ExactEvolution(kernel, pi)
    ev.run(n)
    return ev.state_vector()


def apply_to_function(
    kernel: BandedKernel, offset: int, values: Sequence[Fraction], outside: Fraction = Fraction(0)
) -> tuple[int, list[Fraction]]:
    """Apply the kernel to a column vector: (P f)(j) = sum_k p_{jk} f_k.

    ``values`` gives f on the window starting at ``offset``; f equals
    ``outside`` elsewhere.  The result window is widened by one band.
    """
    w = kernel.band
    lo, hi = offset, offset + len(values) - 1
    out_lo, out_hi = lo - w, hi + w

    def f(k: int) -> Fraction:
        if lo <= k <= hi:
            return values[k - lo]
        return outside

    out = []
    for j in range(out_lo, out_hi + 1):
        total = Fraction(0)
        for k, p in kernel.entries(j).items():
            total += p * f(k)
        out.append(total)
    return out_lo, out


def is_doubly_stochastic(kernel: BandedKernel) -> tuple[bool, Fraction]:
    """Check unit column sums; returns (verdict, max column-sum residual).

    Far columns see only shifted copies of the stencil, so their sum equals
    the stencil sum; only columns within one band of the exceptional block
    need explicit summation.
    """
    residual = abs(sum(kernel.stencil) - 1)
    kp = kernel.k_prime
    w = kernel.band
    for k in range(-kp - w, kp + w + 1):
        col = Fraction(0)
        for j in range(k - w, k + w + 1):
            col += kernel.row(j)[k - j + w]
        residual = max(residual, abs(col - 1))
    return residual == 0, residual


def _bulk_support_offsets(kernel: BandedKernel) -> list[int]:
    w = kernel.band
    return [o for o in range(-w, w + 1) if kernel.stencil[o + w] > 0]


def _bulk_class_gcd(kernel: BandedKernel) -> int:
    offs = [abs(o) for o in _bulk_support_offsets(kernel) if o != 0]
    g = 0
    for o in offs:
        g = math.gcd(g, o)
    return g


def _bulk_return_gcd(kernel: BandedKernel) -> int:
    """gcd of lengths of zero-sum step combinations of the bulk stencil.

    Minimal zero-sum multisets of integers bounded by the band have size at
    most 2*band (pigeonhole on partial sums), so scanning up to that length
    determines the gcd of the whole return-length semigroup.  Returns 0 when
    the bulk walk admits no return at all.
    """
    offs = _bulk_support_offsets(kernel)
    w = kernel.band
    g = 0
    sums = {0}
    for m in range(1, 2 * w + 1):
        sums = {s + o for s in sums for o in offs if abs(s + o) <= 2 * w * w + w}
        if 0 in sums:
            g = math.gcd(g, m)
    return g


def _strongly_connected(nodes: list, edges: dict) -> bool:
    """True iff the digraph is a single strongly connected component."""
    if not nodes:
        return True

    def reaches_all(adj) -> bool:
        seen = {nodes[0]}
        stack = [nodes[0]]
        while stack:
            u = stack.pop()
            for v in adj.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == len(nodes)

    radj: dict = {u: [] for u in nodes}
    for u, vs in edges.items():
        for v in vs:
            radj[v].append(u)
    return reaches_all(edges) and reaches_all(radj)


def _augmented_graph(kernel: BandedKernel):
    """Finite digraph faithful to reachability on Z.

    Window cells carry the true rows; two virtual nodes per residue class
    (mod the bulk support gcd) condense each far half-line, since the bulk
    walk preserves the class and, within a class, can move freely between
    far cells and the window margin.
    """
    w = kernel.band
    kp = kernel.k_prime
    g = _bulk_class_gcd(kernel)
    if g == 0:
        return None  # bulk cannot move; no faithful condensation needed
    L = kp + 2 * w
    nodes: list = list(range(-L, L + 1))
    for r in range(g):
        nodes.extend([("R", r), ("L", r)])
    edges: dict = {u: set() for u in nodes}
    for j in range(-L, L + 1):
        for k in kernel.entries(j):
            if -L <= k <= L:
                edges[j].add(k)
            elif k > L:
                edges[j].add(("R", k % g))
            else:
                edges[j].add(("L", k % g))
    for r in range(g):
        for c in range(L - w + 1, L + 1):
            if c % g == r:
                edges[("R", r)].add(c)
        for c in range(-L, -L + w):
            if c % g == r:
                edges[("L", r)].add(c)
    return nodes, {u: sorted(vs, key=repr) for u, vs in edges.items()}


def is_irreducible(kernel: BandedKernel) -> bool:
    """Connectivity of the transition graph on Z.

    Requires the bulk stencil to move both left and right (otherwise far
    cells cannot communicate across the exceptional block), then checks
    strong connectivity of the condensed finite graph.
    """
    w = kernel.band
    has_pos = any(kernel.stencil[o + w] > 0 for o in range(1, w + 1))
    has_neg = any(kernel.stencil[o + w] > 0 for o in range(-w, 0))
    if not (has_pos and has_neg):
        return False
    aug = _augmented_graph(kernel)
    if aug is None:
        return False
    nodes, edges = aug
    return _strongly_connected(nodes, edges)


def _scc_decomposition(nodes: list, edges: dict) -> list[set]:
    """Kosaraju strongly connected components (iterative)."""
    order: list = []
    seen: set = set()
    for start in nodes:
        if start in seen:
            continue
        stack = [(start, iter(edges.get(start, ())))]
        seen.add(start)
        while stack:
            u, it = stack[-1]
            advanced = False
            for v in it:
                if v not in seen:
                    seen.add(v)
                    stack.append((v, iter(edges.get(v, ()))))
                    advanced = True
                    break
            if not advanced:
                order.append(u)
                stack.pop()
    radj: dict = {u: [] for u in nodes}
    for u, vs in edges.items():
        for v in vs:
            radj[v].append(u)
    comps = []
    assigned: set = set()
    for start in reversed(order):
        if start in assigned:
            continue
        comp = {start}
        stack = [start]
        assigned.add(start)
        while stack:
            u = stack.pop()
            for v in radj.get(u, ()):
                if v not in assigned:
                    assigned.add(v)
                    comp.add(v)
                    stack.append(v)
        comps.append(comp)
    return comps


def _scc_period(comp: set, edges: dict) -> int:
    """gcd of cycle lengths inside one SCC (0 if the SCC has no cycle)."""
    internal = {u: [v for v in edges.get(u, ()) if v in comp] for u in comp}
    if all(not vs for vs in internal.values()):
        return 0
    root = next(iter(comp))
    dist = {root: 0}
    queue = [root]
    while queue:
        u = queue.pop(0)
        for v in internal[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    g = 0
    for u in comp:
        for v in internal[u]:
            g = math.gcd(g, dist[u] + 1 - dist[v])
    return g


def is_aperiodic(kernel: BandedKernel) -> bool:
    """Cycle-length gcd equals 1 for every state's communicating structure.

    Any positive diagonal entry inside a class gives a length-1 cycle; the
    general case combines window-graph cycles with the bulk return-length
    gcd.  Far excursions are condensed, so exotic mixed cycles may be
    missed; for eventually-translation-invariant kernels of the kind built
    here the reduction is faithful.
    """
    w = kernel.band
    kp = kernel.k_prime
    d_bulk = _bulk_return_gcd(kernel)
    aug = _augmented_graph(kernel)
    if aug is None:
        # Bulk is purely diagonal; every far state loops with period 1 iff
        # the stencil has full mass at offset 0.
        if kernel.stencil[w] != 1:
            return False
        return all(row[w] > 0 for _, row in kernel.exceptional)
    nodes, edges = aug
    comps = _scc_decomposition(nodes, edges)
    comp_of = {u: i for i, comp in enumerate(comps) for u in comp}
    periods = [_scc_period(comp, edges) for comp in comps]
    virtuals = [u for u in nodes if isinstance(u, tuple)]
    for j in range(-kp - w, kp + w + 1):
        comp = comps[comp_of[j]]
        candidates = []
        p = periods[comp_of[j]]
        if p:
            candidates.append(p)
        if d_bulk and any(v in comp for v in virtuals):
            candidates.append(d_bulk)
        if not candidates:
            return False  # no return to j at all
        g = 0
        for c in candidates:
            g = math.gcd(g, c)
        if g != 1:
            return False
    return True


def check_symmetric_decreasing(pi: StateVector) -> bool:
    """pi_j == pi_{-j} for all j and pi_k >= pi_{k+1} for k >= 0, exactly."""
    lo, hi = pi.window
    radius = max(abs(lo), abs(hi))
    for j in range(1, radius + 1):
        if pi.entry(j) != pi.entry(-j):
            return False
    for k in range(radius + 1):
        if pi.entry(k) < pi.entry(k + 1):
            return False
    return True


def row_support_straddles(kernel: BandedKernel) -> bool:
    """Sufficient irreducibility condition: every row has a contiguous
    positive block strictly straddling the diagonal (offsets -1, 0, +1 all
    positive).  Strictly stronger than the covering condition on branches."""
    w = kernel.band

    def ok(row: tuple[Fraction, ...]) -> bool:
        return row[w - 1] > 0 and row[w] > 0 and row[w + 1] > 0

    if not ok(kernel.stencil):
        return False
    return all(ok(row) for _, row in kernel.exceptional)


def transition_kernel(mp, window: tuple[int, int] | None = None) -> BandedKernel:
    """Transition matrix of a Markov map: p_{jk} = Leb(T^{-1} I_k | I_j).

    Delegates to the map's own kernel data (the defining kernel for
    random-walk maps; exact endpoint differences of the inverse branches for
    smooth maps).  ``window``, when given, must cover the exceptional block
    plus one band.
    """
    band, stencil, exceptional = mp.kernel_data()
    kernel = make_kernel(band, stencil, exceptional)
    if window is not None:
        lo, hi = window
        need = kernel.k_prime + kernel.band
        if lo > -need or hi < need:
            raise ConstructionError(
                f"window {window} does not cover the exceptional block plus one band "
                f"(need at least [-{need}, {need}])"
            )
    return kernel
