"""Command-line front end: run named experiments from TOML configs.

Each subcommand loads a strict config, runs the corresponding library
routines, writes CSV artifacts plus a summary file into the output
directory, and exits 0 when every configured verdict passes, 2 on a verdict
failure, and 1 on configuration or I/O errors.  CSV bodies are byte
identical across reruns with the same config and seed.
"""

from __future__ import annotations

import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import click

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import defs
from .chain import (
    ExactEvolution,
    StateVector,
    check_symmetric_decreasing,
    is_aperiodic,
    is_doubly_stochastic,
    is_irreducible,
    row_support_straddles,
    transition_kernel,
)
from .errors import BudgetError, ConstructionError, DefinitionError
from .maps import RandomWalkMap, axiom_report, measure_preservation_report
from .mixing import ave_invariance_report, ggm_joint_sweep
from .observables import cell_integrals_exact
from .orbits import cylinder, escape_diagnostics, itinerary, markov_property_test
from .reporting import format_value, mixing_report_table, write_csv, write_summary
from .transfer import GridDensity, correlate as correlate_series, exact_correlation, make_g_pi

THREADS_ENV = "MARKOVLINE_THREADS"


class _Run:
    def __init__(self, name: str, cfg: dict, outdir: Path, seed: int, threads: int, config_path: Path):
        self.name = name
        self.cfg = cfg
        self.outdir = outdir
        self.seed = seed
        self.threads = threads
        self.config_path = config_path
        self.verdicts: list[tuple[str, bool, str]] = []

    def param(self, key, default=None):
        return self.cfg.get("params", {}).get(key, default)

    def verdict_cfg(self) -> dict:
        return self.cfg.get("verdict", {})

    def check(self, name: str, passed: bool, detail: str) -> None:
        self.verdicts.append((name, bool(passed), detail))

    def resolve(self, relname: str) -> Path:
        return Path(self.cfg["_dir"]) / relname

    def csv(self, filename: str, columns, rows, comments=()) -> None:
        base = [f"experiment = {self.name}", f"config = {self.config_path.name}",
                f"seed = {self.seed}"]
        write_csv(self.outdir / filename, columns, rows, list(base) + list(comments))

    def finish(self) -> int:
        lines = [
            f"experiment = {self.name}",
            f"config = {self.config_path.name}",
            f"seed = {self.seed}",
            f"threads = {self.threads}",
        ]
        ok = True
        for name, passed, detail in self.verdicts:
            ok = ok and passed
            lines.append(f"verdict {name} = {'PASS' if passed else 'FAIL'} ({detail})")
        lines.append(f"overall = {'PASS' if ok else 'FAIL'}")
        write_summary(self.outdir / "summary.txt", lines)
        for line in lines:
            click.echo(line)
        return 0 if ok else 2


def _load_map(run: _Run, key: str = "map"):
    if key not in run.cfg:
        raise DefinitionError(f"config must reference a {key} file")
    return defs.load_map_file(run.resolve(run.cfg[key]))


def _load_observable(run: _Run, key: str):
    if key not in run.cfg:
        raise DefinitionError(f"config must reference an observable file under {key!r}")
    return defs.load_observable_file(run.resolve(run.cfg[key]))


# ---------------------------------------------------------------- runners


def _run_build_check(run: _Run) -> None:
    mp = _load_map(run)
    ppc = int(run.param("points_per_cell", 64))
    tol = float(run.param("tolerance", 1e-10))
    window = run.param("window")
    window_t = tuple(int(v) for v in window) if window else None
    report = measure_preservation_report(mp, ppc, window_t)
    ax = axiom_report(mp, ppc)
    run.csv(
        "build_check.csv",
        ["cell", "residual"],
        [[c, r] for c, r in report.per_cell],
    )
    run.check("leb_residual", report.max_residual <= tol,
              f"max residual {report.max_residual:.3e} vs tolerance {tol:.1e}")
    if run.verdict_cfg().get("require_expanding", True):
        run.check("uniformly_expanding", ax["uniformly_expanding"], f"lambda = {ax['lambda']:.12g}")
        run.check("slope_bound", ax["slope_bound_holds"],
                  f"min |T'| on grid = {ax['min_abs_slope_on_grid']:.12g}")


def _run_chain_analyze(run: _Run) -> None:
    if "kernel" in run.cfg:
        kernel = defs.load_kernel_file(run.resolve(run.cfg["kernel"]))
    else:
        kernel = transition_kernel(_load_map(run))
    ds, residual = is_doubly_stochastic(kernel)
    irr = is_irreducible(kernel)
    aper = is_aperiodic(kernel)
    straddle = row_support_straddles(kernel)
    rows = [
        ["band", kernel.band],
        ["k_prime", kernel.k_prime],
        ["doubly_stochastic", ds],
        ["column_sum_residual", float(residual)],
        ["irreducible", irr],
        ["aperiodic", aper],
        ["row_support_straddles", straddle],
    ]
    run.csv("chain_analyze.csv", ["property", "value"], rows)
    vc = run.verdict_cfg()
    for key, actual in (
        ("expect_doubly_stochastic", ds),
        ("expect_irreducible", irr),
        ("expect_aperiodic", aper),
    ):
        if key in vc:
            want = bool(vc[key])
            run.check(key, actual == want, f"expected {want}, got {actual}")


def _run_evolve(run: _Run) -> None:
    kernel = defs.load_kernel_file(run.resolve(run.cfg["kernel"]))
    start = StateVector.point_mass(int(run.param("start_cell", 0)))
    steps = int(run.param("steps", 100))
    dump_every = int(run.param("dump_every", 1))
    ev = ExactEvolution(kernel, start)
    rows = []
    sym_ok = True
    for n in range(steps + 1):
        if n % dump_every == 0 or n == steps:
            lo, hi = ev.window
            for j in range(lo, hi + 1):
                rows.append([n, j, float(ev.entry(j))])
        if run.verdict_cfg().get("require_symmetric_decreasing", False):
            sym_ok = sym_ok and check_symmetric_decreasing(ev.state_vector())
        if n < steps:
            ev.step()
    run.csv("evolve.csv", ["n", "j", "value"], rows)
    if run.verdict_cfg().get("require_mass_exact", True):
        run.check("mass_exact", ev.mass() == 1, f"mass at n={steps} is {float(ev.mass())!r}")
    if run.verdict_cfg().get("require_symmetric_decreasing", False):
        run.check("symmetric_decreasing", sym_ok, f"checked every state up to n={steps}")


def _resolve_target(run: _Run, F, leb_g: complex) -> tuple[complex | None, str]:
    target = run.param("target")
    if target is None:
        return None, "none"
    if target == "zero":
        return 0.0 + 0.0j, "zero"
    if target == "ave":
        if F.declared_ave is None:
            raise DefinitionError(
                "target = 'ave' but the observable declares no uniform infinite-volume "
                "average; give an explicit numeric target"
            )
        return complex(F.declared_ave) * leb_g, "ave"
    return complex(float(target)), "explicit"


def _run_correlate(run: _Run) -> None:
    mp = _load_map(run)
    F = _load_observable(run, "observable")
    n_max = int(run.param("n_max", 100))
    threshold = float(run.param("threshold", 0.05))
    start_cell = int(run.param("start_cell", 0))
    mode = run.param("mode", "auto")
    if isinstance(mp, RandomWalkMap):
        g = make_g_pi(StateVector.point_mass(start_cell))
        leb_g = complex(g.integral())
        target, tname = _resolve_target(run, F, leb_g)
        exact_cells = cell_integrals_exact(F, 0, 0)
        use_exact = mode == "exact" or (mode == "auto" and exact_cells is not None)
        if use_exact:
            if cell_integrals_exact(F, 0, 0) is None:
                raise DefinitionError("mode = 'exact' needs an observable with exact cell integrals")

            def cellint(j: int) -> Fraction:
                return F.cell_integral_exact(Fraction(j), Fraction(j + 1))

            series = [complex(v) for v in exact_correlation(mp.kernel, g.weights, cellint, n_max)]
        else:
            series = [complex(v) for v in correlate_series(mp, F, g, n_max)]
    else:
        m = int(run.param("grid_m", 64))
        window = run.param("grid_window", [start_cell, start_cell])
        g = GridDensity.from_function(
            lambda xs: ((xs >= start_cell) & (xs < start_cell + 1)).astype(float),
            int(window[0]),
            int(window[1]),
            m,
            float(mp.partition.period),
        )
        leb_g = complex(g.integral())
        target, tname = _resolve_target(run, F, leb_g)
        series = [complex(v) for v in correlate_series(mp, F, g, n_max)]
    real_valued = all(abs(c.imag) < 1e-300 for c in series)
    if target is None:
        # no target supplied: emit the bare correlation sequence
        if real_valued:
            run.csv("correlate.csv", ["n", "c_n"],
                    [[n, c.real] for n, c in enumerate(series)])
        else:
            run.csv("correlate.csv", ["n", "c_n_re", "c_n_im"],
                    [[n, c.real, c.imag] for n, c in enumerate(series)])
        if run.verdict_cfg():
            raise DefinitionError("residual verdicts need a target")
        return
    residuals = [abs(c - target) for c in series]
    if real_valued:
        rows = [[n, c.real, r] for n, (c, r) in enumerate(zip(series, residuals))]
        run.csv("correlate.csv", ["n", "c_n", "residual"], rows,
                [f"target = {format_value(target.real)} ({tname})"])
    else:
        rows = [[n, c.real, c.imag, r] for n, (c, r) in enumerate(zip(series, residuals))]
        run.csv("correlate.csv", ["n", "c_n_re", "c_n_im", "residual"], rows,
                [f"target_re = {format_value(target.real)} ({tname})"])
    vc = run.verdict_cfg()
    for pair in vc.get("residual_max_at", []):
        n_at, bound = int(pair[0]), float(pair[1])
        if n_at > n_max:
            raise DefinitionError(f"verdict checkpoint n={n_at} exceeds n_max={n_max}")
        run.check(f"residual_at_{n_at}", residuals[n_at] <= bound,
                  f"residual {residuals[n_at]:.6g} vs bound {bound:.6g}")
    if "expect_verdict" in vc:
        tail = residuals[len(residuals) // 2 :]
        verdict = "decay" if max(tail) <= threshold else "no_decay"
        run.check("expect_verdict", verdict == vc["expect_verdict"],
                  f"expected {vc['expect_verdict']}, got {verdict}")


def _run_ggm_sweep(run: _Run) -> None:
    mp = _load_map(run)
    F = _load_observable(run, "observable_f")
    G = _load_observable(run, "observable_g")
    sizes = [int(v) for v in run.param("sizes", [20, 40, 80])]
    n_list = [int(v) for v in run.param("n_list", [1, 2, 5, 10])]
    m = int(run.param("nodes_per_cell", 16))
    centered = bool(run.param("centered", True))
    axis = run.param("decay_axis", "joint")
    ratio = float(run.param("decay_ratio", 0.1))
    target = run.param("target")
    if target is not None:
        target = complex(float(target), float(run.param("target_im", 0.0)))
    schedule = run.param("nodes_schedule")
    m_schedule = None
    if schedule is not None:
        table = {int(n): int(nodes) for n, nodes in schedule}
        missing = [n for n in n_list if n not in table]
        if missing:
            raise DefinitionError(f"nodes_schedule lacks entries for n = {missing}")
        m_schedule = table.__getitem__
    report = ggm_joint_sweep(
        mp, F, G, sizes, n_list, centered=centered, target=target, m=m,
        m_schedule=m_schedule, decay_axis=axis, decay_ratio=ratio,
    )
    columns, rows = mixing_report_table(report)
    run.csv("ggm_sweep.csv", columns, rows,
            [f"target_re = {report.target.real!r}", f"target_im = {report.target.imag!r}",
             f"decay_axis = {axis}"])
    vc = run.verdict_cfg()
    if "expect_verdict" in vc:
        run.check("expect_verdict", report.verdict == vc["expect_verdict"],
                  f"expected {vc['expect_verdict']}, got {report.verdict}")
    for entry in vc.get("residual_band", []):
        size, n_at, bound = int(entry[0]), int(entry[1]), float(entry[2])
        match = [r for s, n, _, r in report.rows if s == size and n == n_at]
        if not match:
            raise DefinitionError(f"residual_band refers to absent grid point ({size}, {n_at})")
        run.check(f"residual_M{size}_n{n_at}", match[0] <= bound,
                  f"residual {match[0]:.6g} vs bound {bound:.6g}")


def _run_ave_check(run: _Run) -> None:
    mp = _load_map(run)
    F = _load_observable(run, "observable")
    n_list = [int(v) for v in run.param("n_list", [1, 2, 5])]
    windows = [tuple(int(v) for v in w) for w in run.param("windows", [[-25, 24]])]
    slack = run.param("quad_slack")
    report = ave_invariance_report(
        mp, F, n_list, windows,
        quad_slack=float(slack) if slack is not None else None,
        grid_m=int(run.param("grid_m", 64)),
    )
    rows = [
        [r.n, r.window[0], r.window[1], r.core_ok, r.hull_ok, float(r.symmdiff),
         float(r.symmdiff_bound), r.ave_deviation, r.ave_margin]
        for r in report.rows
    ]
    run.csv(
        "ave_check.csv",
        ["n", "window_lo", "window_hi", "core_ok", "hull_ok", "symmdiff",
         "symmdiff_bound", "ave_deviation", "ave_margin"],
        rows,
        [f"measure_exact = {report.measure_exact}"],
    )
    if run.verdict_cfg().get("require_pass", True):
        run.check("sandwich_and_ave", report.passed,
                  f"{len(report.rows)} window/power combinations checked")


def _run_orbits(run: _Run) -> None:
    mp = _load_map(run)
    mode = run.param("mode", "markov-test")
    if mode == "markov-test":
        report = markov_property_test(
            mp,
            start_cell=int(run.param("start_cell", 0)),
            samples=int(run.param("samples", 100_000)),
            horizon=int(run.param("horizon", 20)),
            seed=run.seed,
        )
        run.csv(
            "markov_test.csv",
            ["from_cell", "to_cell", "count", "visits", "frequency", "expected", "three_sigma"],
            [list(r) for r in report.rows],
            [f"samples = {report.samples}", f"horizon = {report.horizon}"],
        )
        if run.verdict_cfg().get("require_three_sigma", True):
            run.check("three_sigma", report.within_three_sigma,
                      f"max deviation {report.max_deviation:.3e}, "
                      f"forbidden transitions {report.forbidden_transitions}")
    elif mode == "escape":
        report = escape_diagnostics(
            mp,
            start_cell=int(run.param("start_cell", 0)),
            samples=int(run.param("samples", 100_000)),
            horizon=int(run.param("horizon", 1000)),
            radius=float(run.param("radius", 50.0)),
            seed=run.seed,
        )
        run.csv(
            "escape.csv",
            ["samples", "horizon", "radius", "escaped_plus", "escaped_minus", "returned"],
            [[report.samples, report.horizon, report.radius,
              report.escaped_plus, report.escaped_minus, report.returned]],
            ["finite-horizon proxy: position at the horizon, not an asymptotic claim"],
        )
        vc = run.verdict_cfg()
        if "returned_min" in vc:
            run.check("returned_min", report.returned >= float(vc["returned_min"]),
                      f"returned fraction {report.returned:.4f}")
        if "escaped_plus_min" in vc:
            run.check("escaped_plus_min", report.escaped_plus >= float(vc["escaped_plus_min"]),
                      f"escaped(+) fraction {report.escaped_plus:.4f}")
    elif mode == "itinerary":
        x0 = float(run.param("x0", 0.5))
        steps = int(run.param("steps", 20))
        it = itinerary(mp, x0, steps)
        run.csv(
            "itinerary.csv",
            ["k", "x", "cell"],
            [[k, x, c] for k, (x, c) in enumerate(zip(it.points, it.cells))],
        )
    else:
        raise DefinitionError(f"unknown orbits mode {mode!r}")


def _run_cylinders(run: _Run) -> None:
    mp = _load_map(run)
    words = run.param("words")
    if not words:
        raise DefinitionError("cylinders experiment needs params.words")
    rows = []
    all_bounded = True
    c2 = float(mp.partition.c2)
    for word in words:
        word_t = tuple(int(j) for j in word)
        cyl = cylinder(mp, word_t)
        n = len(word_t)
        bound = c2 * mp.lam ** (-(n - 1)) if mp.lam > 1 else math.inf
        ok = float(cyl.length) <= bound * (1 + 1e-12)
        all_bounded = all_bounded and ok
        rows.append(["|".join(str(j) for j in word_t), float(cyl.left), float(cyl.right),
                     float(cyl.length), bound])
    run.csv("cylinders.csv", ["word", "left", "right", "length", "length_bound"], rows)
    if run.verdict_cfg().get("require_length_bound", True):
        run.check("length_bound", all_bounded, f"{len(rows)} cylinders checked")


_RUNNERS = {
    "build-check": _run_build_check,
    "chain-analyze": _run_chain_analyze,
    "evolve": _run_evolve,
    "correlate": _run_correlate,
    "ggm-sweep": _run_ggm_sweep,
    "ave-check": _run_ave_check,
    "orbits": _run_orbits,
    "cylinders": _run_cylinders,
}


def _apply_override(data: dict, spec: str) -> None:
    key, sep, raw = spec.partition("=")
    if not sep:
        raise DefinitionError(f"override {spec!r} is not of the form key=value")
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    node = data
    parts = key.strip().split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise DefinitionError(f"override path {key!r} crosses a non-table value")
    node[parts[-1]] = value


def _execute(name: str, config: str, out: str | None, seed: int | None,
             threads: int | None, overrides: tuple[str, ...]) -> int:
    config_path = Path(config)
    data = defs.load_toml(config_path)
    for spec in overrides:
        _apply_override(data, spec)
    # validate after overrides so unknown keys stay rejected either way
    validated = _validate(data, name, str(config_path))
    validated["_dir"] = config_path.parent
    run_seed = seed if seed is not None else int(validated.get("seed", 0))
    env_threads = os.environ.get(THREADS_ENV)
    if threads is not None:
        run_threads = threads
    elif env_threads is not None:
        try:
            run_threads = int(env_threads)
        except ValueError:
            raise DefinitionError(f"{THREADS_ENV} must be an integer, got {env_threads!r}")
    else:
        run_threads = int(validated.get("threads", 1))
    outdir = Path(out) if out else Path(validated.get("out", f"out-{name}"))
    run = _Run(name, validated, outdir, run_seed, run_threads, config_path)
    _RUNNERS[name](run)
    return run.finish()


def _validate(data: dict, expected: str, context: str) -> dict:
    # reuse the strict schema validation from defs without re-reading the file
    from .defs import _COMMON_KEYS, _EXPERIMENT_SCHEMAS, _check_keys

    schema = _EXPERIMENT_SCHEMAS[expected]
    if data.get("experiment") != expected:
        raise DefinitionError(
            f"{context}: experiment is {data.get('experiment')!r} but the subcommand "
            f"expects {expected!r}"
        )
    _check_keys(data, _COMMON_KEYS | schema["top"], {"experiment"}, context)
    _check_keys(data.get("params", {}), schema["params"], set(), f"{context}: params")
    _check_keys(data.get("verdict", {}), schema["verdict"], set(), f"{context}: verdict")
    return data


def _command(name: str):
    @click.command(name=name, help=f"Run a {name!r} experiment from a TOML config.")
    @click.option("--config", required=True, type=click.Path(), help="Experiment config file.")
    @click.option("--out", default=None, type=click.Path(), help="Output directory.")
    @click.option("--seed", default=None, type=int, help="64-bit seed (wins over config).")
    @click.option("--threads", default=None, type=int,
                  help=f"Worker thread cap (wins over ${THREADS_ENV} and config).")
    @click.option("--override", multiple=True, metavar="KEY=VALUE",
                  help="Override a config entry (dotted path, repeatable).")
    def cmd(config, out, seed, threads, override):
        try:
            code = _execute(name, config, out, seed, threads, override)
        except (DefinitionError, ConstructionError, BudgetError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except OSError as exc:
            click.echo(f"io error: {exc}", err=True)
            sys.exit(1)
        sys.exit(code)

    return cmd


@click.group()
def main() -> None:
    """Expanding Markov maps of the real line: experiments and reports."""


for _name in defs.EXPERIMENT_NAMES:
    main.add_command(_command(_name))


if __name__ == "__main__":
    main()
