"""Infinite-mixing functionals: global-local and global-global reports.

GLM1/GLM2 pair a global observable with an integrable density and track
Leb((F o T^n) g) against 0 or ave(F) Leb(g); GGM1/GGM2 average the product
of two global observables over growing windows, jointly in window size and
time.  Also here: the preimage sandwich / symmetric-difference bound that
legitimizes ave invariance, the quasiperiodic factorization identity for
translation-invariant maps, and the horizontal-slice decomposition used as
an independent witness for global-local decay.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .chain import StateVector, apply_to_function, check_symmetric_decreasing, transition_kernel
from .errors import BudgetError, ConstructionError
from .maps import MapSpec, RandomWalkMap
from .observables import Quasiperiodic
from .transfer import CellwiseDensity, GridDensity, correlate, simpson_weights

__all__ = [
    "MixingReport",
    "glm_report",
    "ggm_window_value",
    "ggm_joint_sweep",
    "ave_invariance_report",
    "AveInvarianceReport",
    "composed_window_integral",
    "factorization_check",
    "FactorizationCheck",
    "slicing_decomposition",
    "SlicingDecomposition",
    "GGM_EVAL_BUDGET",
]

GGM_EVAL_BUDGET = 10**9


@dataclass(frozen=True)
class MixingReport:
    """Raw values plus a re-derivable verdict for one mixing functional."""

    functional: str
    rows: tuple[tuple[int | None, int, complex, float], ...]  # (M, n, value, residual)
    target: complex
    threshold: float
    verdict: str
    meta: tuple[tuple[str, str], ...] = ()

    def residuals_for_n(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for _, n, _, res in self.rows:
            out[n] = max(out.get(n, 0.0), res)
        return out

    def residuals_for_m(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for m, _, _, res in self.rows:
            if m is not None:
                out[m] = max(out.get(m, 0.0), res)
        return out


def glm_report(
    mp: MapSpec,
    F,
    g,
    n_max: int,
    target: str | complex = "ave",
    threshold: float = 0.05,
) -> MixingReport:
    """Global-local mixing report: residuals of c_n = Leb((F o T^n) g).

    ``target`` is "zero" (GLM1), "ave" (GLM2: ave(F) * Leb(g)) or an
    explicit complex value.  The verdict is "decay" when the residual stays
    at or below the threshold over the last half of the horizon, otherwise
    "no_decay"; the attained infimum ships with the rows either way.
    """
    if isinstance(g, CellwiseDensity):
        leb_g = complex(g.integral())
    elif isinstance(g, GridDensity):
        leb_g = complex(g.integral())
    else:
        raise ConstructionError(f"unsupported density carrier {type(g).__name__}")
    if target == "zero":
        functional = "GLM1"
        tval = 0.0 + 0.0j
    elif target == "ave":
        functional = "GLM2"
        if F.declared_ave is None:
            raise ConstructionError(
                "GLM2 target needs ave(F); the observable declares none "
                "(no uniform infinite-volume average over the chosen family)"
            )
        tval = complex(F.declared_ave) * leb_g
    else:
        functional = "GLM2"
        tval = complex(target)
    cs = correlate(mp, F, g, n_max)
    rows = tuple((None, n, complex(c), abs(complex(c) - tval)) for n, c in enumerate(cs))
    tail = [r[3] for r in rows[len(rows) // 2 :]]
    verdict = "decay" if max(tail) <= threshold else "no_decay"
    meta = (("attained_infimum", repr(min(r[3] for r in rows))),)
    return MixingReport(
        functional=functional,
        rows=rows,
        target=tval,
        threshold=threshold,
        verdict=verdict,
        meta=meta,
    )


def _forward_orbit(mp: MapSpec, xs: np.ndarray, n: int) -> np.ndarray:
    ys = np.asarray(xs, dtype=float)
    for _ in range(n):
        ys = mp.forward_many(ys)
    return ys


def ggm_window_value(
    mp: MapSpec,
    F,
    G,
    lo_cell: int,
    hi_cell: int,
    n: int,
    m: int = 16,
) -> complex:
    """Leb_V((F o T^n) G) over the cell-aligned window V = [lo_cell, hi_cell+1).

    Composite Simpson per cell with forward orbit iteration at the nodes;
    dyadic node offsets keep translates of a node exactly representable.
    Refuses jobs above the documented evaluation budget.
    """
    ncells = hi_cell - lo_cell + 1
    if ncells < 1:
        raise ConstructionError("window must contain at least one cell")
    evals = (ncells * m + 1) * max(n, 1)
    if evals > GGM_EVAL_BUDGET:
        raise BudgetError(
            f"{evals:.3g} forward evaluations exceed the budget {GGM_EVAL_BUDGET:.1g}"
        )
    a = float(mp.partition.period)
    xs = lo_cell * a + (a / m) * np.arange(ncells * m + 1)
    ys = _forward_orbit(mp, xs, n)
    vals = np.asarray(F(ys)) * np.asarray(G(xs))
    w = simpson_weights(m) * a
    total = 0.0 + 0.0j
    for c in range(ncells):
        total += np.dot(w, vals[c * m : (c + 1) * m + 1])
    return complex(total / (ncells * a))


def ggm_joint_sweep(
    mp: MapSpec,
    F,
    G,
    sizes: Sequence[int],
    n_list: Sequence[int],
    centered: bool = True,
    target: complex | None = None,
    m: int = 16,
    m_schedule: Callable[[int], int] | None = None,
    decay_axis: str = "joint",
    decay_ratio: float = 0.1,
) -> MixingReport:
    """Window-size by time matrix of |Leb_V((F o T^n) G) - ave(F) ave(G)|.

    ``sizes`` are window sizes in cells (windows centered at the origin when
    ``centered``).  ``m_schedule`` overrides the per-cell node count as a
    function of n; needed when F o T^n genuinely oscillates at frequency
    lambda^n (smooth observables on expanding maps), harmless to omit for
    indicator-type observables.  The verdict examines the sup of residuals
    along the requested axis ("n", "V", or "joint"): decay means the final
    sup is at most ``decay_ratio`` times the initial sup; a joint sup pinned
    above half its initial value is reported as a counterexample.
    """
    if target is None:
        if F.declared_ave is None or G.declared_ave is None:
            raise ConstructionError(
                "joint sweep target needs ave(F) and ave(G); one of them is undeclared"
            )
        target = complex(F.declared_ave) * complex(G.declared_ave)
    rows = []
    for size in sizes:
        lo = -(size // 2) if centered else 0
        hi = lo + size - 1
        for n in n_list:
            m_n = m_schedule(n) if m_schedule is not None else m
            val = ggm_window_value(mp, F, G, lo, hi, n, m_n)
            rows.append((size, n, val, abs(val - target)))
    report_rows = tuple(rows)
    by_n: dict[int, float] = {}
    by_m: dict[int, float] = {}
    for size, n, _, res in report_rows:
        by_n[n] = max(by_n.get(n, 0.0), res)
        by_m[size] = max(by_m.get(size, 0.0), res)
    if decay_axis == "n":
        series = [by_n[n] for n in sorted(by_n)]
    elif decay_axis == "V":
        series = [by_m[s] for s in sorted(by_m)]
    else:
        # joint: sup over {|V| >= M, n >= n_min} per size M
        series = []
        for size in sorted(by_m):
            sup = max(
                res
                for s2, n2, _, res in report_rows
                if s2 >= size and n2 >= min(n_list)
            )
            series.append(sup)
    if series[0] == 0.0:
        verdict = "decay" if series[-1] == 0.0 else "no_decay"
    elif series[-1] <= decay_ratio * series[0]:
        verdict = "decay"
    elif series[-1] >= 0.5 * series[0]:
        verdict = "counterexample"
    else:
        verdict = "no_decay"
    meta = (
        ("decay_axis", decay_axis),
        ("sup_series", repr(series)),
    )
    return MixingReport(
        functional="GGM2",
        rows=report_rows,
        target=target,
        threshold=decay_ratio,
        verdict=verdict,
        meta=meta,
    )


def composed_window_integral(
    mp: MapSpec, F, n: int, lo_cell: int, hi_cell: int, m: int = 64
) -> complex:
    """Integral of F o T^n over the cell-aligned window [lo_cell, hi_cell].

    Computed by duality rather than by sampling F o T^n (whose frequency
    grows like lambda^n): for piecewise-affine maps the cell integrals of
    F o T^n are the kernel power applied to the cell integrals of F, which
    is exact; otherwise the transfer operator pushes the window indicator
    forward on a grid and pairs it with F.
    """
    if mp.eta == 0.0:
        kernel = transition_kernel(mp)
        w = kernel.band
        a = float(mp.partition.period)
        lo, hi = lo_cell - n * w, hi_cell + n * w
        f = np.array(
            [complex(F.interval_integral(j * a, (j + 1) * a)) for j in range(lo, hi + 1)]
        )
        rows = {
            j: np.array([float(p) for p in kernel.row(j)])
            for j in range(lo_cell - n * w, hi_cell + n * w + 1)
        }
        for step_i in range(n):
            cur_lo = lo_cell - (n - 1 - step_i) * w
            cur_hi = hi_cell + (n - 1 - step_i) * w
            nxt = np.empty(cur_hi - cur_lo + 1, dtype=complex)
            for j in range(cur_lo, cur_hi + 1):
                row = rows.get(j)
                if row is None:
                    row = rows[j] = np.array([float(p) for p in kernel.row(j)])
                nxt[j - cur_lo] = np.dot(row, f[j - w - lo : j + w + 1 - lo])
            f = nxt
            lo, hi = cur_lo, cur_hi
        return complex(np.sum(f))
    from .transfer import GridDensity, pf_step_grid, simpson_weights as _sw

    a = float(mp.partition.period)
    ind = GridDensity.from_function(
        lambda xs: ((xs >= lo_cell * a) & (xs <= (hi_cell + 1) * a)).astype(float),
        lo_cell,
        hi_cell,
        m,
        a,
    )
    cur = ind
    for _ in range(n):
        cur = pf_step_grid(cur, mp)
    xs = cur.node_xs()
    fv = np.asarray(F(xs))
    w = _sw(cur.m) * a
    total = 0.0 + 0.0j
    vals = fv * cur.values
    for c in range(cur.cell_hi - cur.cell_lo + 1):
        total += np.dot(w, vals[c * cur.m : (c + 1) * cur.m + 1])
    return complex(total)


@dataclass(frozen=True)
class AveInvarianceRow:
    n: int
    window: tuple[int, int]
    core_ok: bool
    hull_ok: bool
    symmdiff: Fraction
    symmdiff_bound: Fraction
    ave_margin: float
    ave_deviation: float


@dataclass(frozen=True)
class AveInvarianceReport:
    rows: tuple[AveInvarianceRow, ...]
    measure_exact: bool
    passed: bool


def ave_invariance_report(
    mp: MapSpec,
    F,
    n_list: Sequence[int],
    window_cells: Sequence[tuple[int, int]],
    quad_slack: float | None = None,
    grid_m: int = 64,
) -> AveInvarianceReport:
    """Preimage sandwich, symmetric-difference bound, and ave invariance.

    For each window V and power n, the n-step preimage mass profile is
    computed on the transition graph (exact for piecewise-affine maps); V
    shrunk by n jump bounds must be fully inside T^{-n}V and V grown by n
    jump bounds must contain it.  Leb(T^{-n}V symdiff V) is checked against
    (4n(J-1)+2) c2; since the map preserves Lebesgue measure, the same
    quantity bounds |int_V F o T^n - int_V F|, so the window averages of
    F o T^n and F must agree within ||F|| (4nb+2) c2 / Leb(V) plus
    computational slack.
    """
    kernel = transition_kernel(mp)
    b = mp.jump_bound
    a = mp.partition.period
    c2 = mp.partition.c2
    if quad_slack is None:
        quad_slack = 1e-9 if mp.eta == 0.0 else 1e-3
    rows = []
    passed = True
    for k, l in window_cells:
        offset = k
        values: list[Fraction] = [Fraction(1)] * (l - k + 1)
        n_done = 0
        leb_v = float((l - k + 1) * a)
        base_integral = complex(F.interval_integral(k * float(a), (l + 1) * float(a)))
        for n in sorted(n_list):
            while n_done < n:
                offset, values = apply_to_function(kernel, offset, values)
                n_done += 1
            core = (k + n * b, l - n * b)
            hull = (k - n * b, l + n * b)
            core_ok = True
            if core[0] <= core[1]:
                for j in range(core[0], core[1] + 1):
                    i = j - offset
                    if not (0 <= i < len(values)) or values[i] != 1:
                        core_ok = False
                        break
            hull_ok = all(
                values[i] == 0
                for i, j in enumerate(range(offset, offset + len(values)))
                if j < hull[0] or j > hull[1]
            )
            symmdiff = Fraction(0)
            for i, j in enumerate(range(offset, offset + len(values))):
                inside = k <= j <= l
                mass = values[i]
                symmdiff += (1 - mass) * a if inside else mass * a
            bound = (4 * n * (mp.j_hat - 1) + 2) * c2
            margin = F.sup_norm * float((4 * n * b + 2) * c2) / leb_v + quad_slack
            integral_n = composed_window_integral(mp, F, n, k, l, grid_m)
            deviation = abs(integral_n - base_integral) / leb_v
            row = AveInvarianceRow(
                n=n,
                window=(k, l),
                core_ok=core_ok,
                hull_ok=hull_ok,
                symmdiff=symmdiff,
                symmdiff_bound=bound,
                ave_margin=margin,
                ave_deviation=deviation,
            )
            rows.append(row)
            if not (core_ok and hull_ok and symmdiff <= bound and deviation <= margin):
                passed = False
    measure_exact = isinstance(mp, RandomWalkMap) or mp.eta == 0.0
    return AveInvarianceReport(rows=tuple(rows), measure_exact=measure_exact, passed=passed)


@dataclass(frozen=True)
class FactorizationCheck:
    lhs: complex
    prefactor: complex
    correlation: complex
    residual: float


def factorization_check(
    mp,
    beta: float,
    gamma: float,
    start_cell: int,
    end_cell: int,
    n: int,
    m: int = 16,
) -> FactorizationCheck:
    """Quasiperiodic window identity for translation-invariant maps.

    With F, G quasiperiodic of exponents beta, gamma and V spanning cells
    ``start_cell .. end_cell``, the windowed product average equals the
    geometric prefactor sum_{j} e^{i a (beta+gamma) j} / N times the
    correlation Leb((F o T^n) g) with g = G/a on the fundamental cell.
    """
    a = float(mp.partition.period)
    F = Quasiperiodic(beta=beta, period=a)
    G = Quasiperiodic(beta=gamma, period=a)
    lhs = ggm_window_value(mp, F, G, start_cell, end_cell, n, m)
    ncells = end_cell - start_cell + 1
    theta = a * (beta + gamma)
    prefactor = sum(cmath.exp(1j * theta * j) for j in range(start_cell, end_cell + 1)) / ncells
    corr = ggm_window_value(mp, F, G, 0, 0, n, m)  # (1/a) integral over [0, a]
    return FactorizationCheck(
        lhs=lhs,
        prefactor=prefactor,
        correlation=corr,
        residual=abs(lhs - prefactor * corr),
    )


@dataclass(frozen=True)
class SlicingDecomposition:
    total: Fraction
    head: Fraction
    tail: Fraction
    head_bound: Fraction
    tail_bound: Fraction

    @property
    def identity_holds(self) -> bool:
        return self.head + self.tail == self.total

    @property
    def bounds_hold(self) -> bool:
        return abs(self.head) <= self.head_bound and abs(self.tail) <= self.tail_bound


def slicing_decomposition(
    cell_integral: Callable[[int], Fraction],
    pi: StateVector,
    ell: int,
    sup_norm: Fraction,
) -> SlicingDecomposition:
    """Horizontal-slice decomposition of sum_j f_j pi_j for symmetric
    decreasing pi: the sum over slices k of (pi_k - pi_{k+1}) sum_{|j|<=k} f_j,
    split at ell, with the head controlled by the central mass and the tail
    by the worst window mean beyond ell.  Exact rational arithmetic."""
    if not check_symmetric_decreasing(pi):
        raise ConstructionError("slicing decomposition requires a symmetric decreasing state")
    lo, hi = pi.window
    radius = max(abs(lo), abs(hi))
    f_cum = Fraction(0)
    head = Fraction(0)
    tail = Fraction(0)
    total = Fraction(0)
    tail_ratio = Fraction(0)
    tail_mass = Fraction(0)
    for j in range(-radius, radius + 1):
        total += cell_integral(j) * pi.entry(j)
    for k in range(0, radius + 1):
        if k == 0:
            f_cum = cell_integral(0)
        else:
            f_cum += cell_integral(k) + cell_integral(-k)
        slab = pi.entry(k) - pi.entry(k + 1)
        term = slab * f_cum
        if k < ell:
            head += term
        else:
            tail += term
            tail_mass += slab * (2 * k + 1)
            tail_ratio = max(tail_ratio, abs(f_cum) / (2 * k + 1))
    head_bound = sup_norm * sum(
        (pi.entry(j) for j in range(-ell + 1, ell)), Fraction(0)
    )
    tail_bound = tail_ratio * tail_mass
    return SlicingDecomposition(
        total=total,
        head=head,
        tail=tail,
        head_bound=head_bound,
        tail_bound=tail_bound,
    )
