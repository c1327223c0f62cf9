"""Definition and experiment files: strict TOML schemas.

Kernel, map and observable definitions live in small TOML files; experiment
configs reference them by path (relative to the config file).  Unknown keys
are rejected everywhere, so a typo fails the run instead of silently
changing it.  Probabilities and branch coefficients accept exact fraction
strings ("5/9") as well as numbers.
"""

from __future__ import annotations

import math
import re
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .bumps import get_bump
from .chain import BandedKernel, make_kernel
from .errors import DefinitionError
from .maps import MapSpec, build_finite_modification, build_quasi_lift, build_random_walk_map
from .observables import (
    Constant,
    Heaviside,
    Quasiperiodic,
    alternating_cells,
    even_cell_indicator,
)

__all__ = [
    "load_toml",
    "load_kernel_file",
    "load_map_file",
    "load_observable_file",
    "load_experiment_file",
    "parse_angle",
    "EXPERIMENT_NAMES",
]


def load_toml(path: Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise DefinitionError(f"file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise DefinitionError(f"{path}: invalid TOML: {exc}")


def _check_keys(d: Mapping[str, Any], allowed: set[str], required: set[str], context: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise DefinitionError(
            f"{context}: unknown key(s) {sorted(unknown)}; allowed: {sorted(allowed)}"
        )
    missing = required - set(d)
    if missing:
        raise DefinitionError(f"{context}: missing required key(s) {sorted(missing)}")


_PI_PATTERN = re.compile(
    r"^\s*([+-]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$", re.IGNORECASE
)


def parse_angle(value) -> float:
    """Floats pass through; strings may use a pi factor: '2pi', 'pi/40', '-0.5*pi'."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        m = _PI_PATTERN.match(value)
        if m:
            coef_s, div_s = m.groups()
            coef = float(coef_s) if coef_s not in ("", "+", "-") else float(coef_s + "1")
            out = coef * math.pi
            if div_s:
                out /= float(div_s)
            return out
        try:
            return float(value)
        except ValueError:
            pass
    raise DefinitionError(f"cannot parse angle/frequency from {value!r}")


def parse_kernel_data(data: Mapping[str, Any], context: str) -> BandedKernel:
    _check_keys(data, {"band", "stencil", "exceptional"}, {"band", "stencil"}, context)
    band = data["band"]
    if not isinstance(band, int) or band < 1:
        raise DefinitionError(f"{context}: band must be a positive integer")
    exceptional = {}
    for i, entry in enumerate(data.get("exceptional", [])):
        sub = f"{context}: exceptional[{i}]"
        _check_keys(entry, {"j", "row"}, {"j", "row"}, sub)
        j = entry["j"]
        if not isinstance(j, int):
            raise DefinitionError(f"{sub}: j must be an integer")
        if j in exceptional:
            raise DefinitionError(f"{sub}: duplicate exceptional row for j={j}")
        exceptional[j] = entry["row"]
    return make_kernel(band, data["stencil"], exceptional)


def load_kernel_file(path: Path) -> BandedKernel:
    return parse_kernel_data(load_toml(path), str(path))


def _parse_quasi_lift(data: Mapping[str, Any], context: str) -> MapSpec:
    _check_keys(data, {"variant", "period", "branch", "bump"}, {"variant", "period", "branch"}, context)
    pieces = []
    bump_name = data.get("bump", "poly3")
    for i, entry in enumerate(data["branch"]):
        sub = f"{context}: branch[{i}]"
        _check_keys(entry, {"cell", "slope", "offset", "delta"}, {"cell", "slope", "offset"}, sub)
        pieces.append(
            (entry["cell"], entry["slope"], entry["offset"], entry.get("delta", 0))
        )
    return build_quasi_lift(data["period"], pieces, bump=get_bump(bump_name))


def load_map_file(path: Path) -> MapSpec:
    path = Path(path)
    data = load_toml(path)
    context = str(path)
    variant = data.get("variant")
    if variant == "quasi_lift":
        return _parse_quasi_lift(data, context)
    if variant == "finite_modification":
        _check_keys(
            data, {"variant", "base", "modification"}, {"variant", "base", "modification"}, context
        )
        base = load_map_file(path.parent / data["base"])
        if not hasattr(base, "covering_set"):
            raise DefinitionError(f"{context}: base must be a quasi_lift map file")
        deltas = {}
        for i, entry in enumerate(data["modification"]):
            sub = f"{context}: modification[{i}]"
            _check_keys(entry, {"branch", "delta"}, {"branch", "delta"}, sub)
            deltas[entry["branch"]] = entry["delta"]
        return build_finite_modification(base, deltas)
    if variant == "random_walk":
        _check_keys(data, {"variant", "kernel"}, {"variant", "kernel"}, context)
        kernel = load_kernel_file(path.parent / data["kernel"])
        return build_random_walk_map(kernel)
    raise DefinitionError(
        f"{context}: variant must be one of quasi_lift, finite_modification, random_walk; "
        f"got {variant!r}"
    )


_SEQUENCE_RULES = {
    "alternating": alternating_cells,
    "even_indicator": even_cell_indicator,
}


def load_observable_file(path: Path):
    data = load_toml(path)
    context = str(path)
    variant = data.get("variant")
    if variant == "heaviside":
        _check_keys(data, {"variant"}, {"variant"}, context)
        return Heaviside()
    if variant == "constant":
        _check_keys(data, {"variant", "value", "value_im"}, {"variant", "value"}, context)
        return Constant(value=complex(float(data["value"]), float(data.get("value_im", 0.0))))
    if variant == "quasiperiodic":
        _check_keys(data, {"variant", "beta", "period"}, {"variant", "beta"}, context)
        return Quasiperiodic(beta=parse_angle(data["beta"]), period=float(data.get("period", 1.0)))
    if variant == "cell_sequence":
        _check_keys(data, {"variant", "rule", "cell_length"}, {"variant", "rule"}, context)
        rule = data["rule"]
        if rule not in _SEQUENCE_RULES:
            raise DefinitionError(
                f"{context}: unknown cell-sequence rule {rule!r}; "
                f"available: {sorted(_SEQUENCE_RULES)}"
            )
        return _SEQUENCE_RULES[rule](float(data.get("cell_length", 1.0)))
    raise DefinitionError(
        f"{context}: variant must be one of heaviside, constant, quasiperiodic, "
        f"cell_sequence; got {variant!r}"
    )


EXPERIMENT_NAMES = (
    "build-check",
    "chain-analyze",
    "evolve",
    "correlate",
    "ggm-sweep",
    "ave-check",
    "orbits",
    "cylinders",
)

_COMMON_KEYS = {"experiment", "out", "seed", "threads", "params", "verdict"}

_EXPERIMENT_SCHEMAS: dict[str, dict[str, set[str]]] = {
    "build-check": {
        "top": {"map"},
        "params": {"points_per_cell", "tolerance", "window"},
        "verdict": {"require_expanding", "leb_tolerance"},
    },
    "chain-analyze": {
        "top": {"kernel", "map"},
        "params": set(),
        "verdict": {"expect_doubly_stochastic", "expect_irreducible", "expect_aperiodic"},
    },
    "evolve": {
        "top": {"kernel"},
        "params": {"start_cell", "steps", "dump_every"},
        "verdict": {"require_mass_exact", "require_symmetric_decreasing"},
    },
    "correlate": {
        "top": {"map", "observable"},
        "params": {"n_max", "start_cell", "target", "threshold", "mode", "grid_m", "grid_window"},
        "verdict": {"residual_max_at", "expect_verdict"},
    },
    "ggm-sweep": {
        "top": {"map", "observable_f", "observable_g"},
        "params": {"sizes", "n_list", "nodes_per_cell", "nodes_schedule", "centered",
                   "decay_axis", "decay_ratio", "target", "target_im"},
        "verdict": {"expect_verdict", "residual_band"},
    },
    "ave-check": {
        "top": {"map", "observable"},
        "params": {"n_list", "windows", "grid_m", "quad_slack"},
        "verdict": {"require_pass"},
    },
    "orbits": {
        "top": {"map"},
        "params": {"mode", "samples", "horizon", "start_cell", "radius", "x0", "steps"},
        "verdict": {"require_three_sigma", "returned_min", "escaped_plus_min"},
    },
    "cylinders": {
        "top": {"map"},
        "params": {"words"},
        "verdict": {"require_length_bound"},
    },
}


def load_experiment_file(path: Path, expected: str) -> dict:
    """Load and validate an experiment config for the given subcommand."""
    path = Path(path)
    data = load_toml(path)
    context = str(path)
    if expected not in _EXPERIMENT_SCHEMAS:
        raise DefinitionError(f"unknown experiment {expected!r}")
    schema = _EXPERIMENT_SCHEMAS[expected]
    if data.get("experiment") != expected:
        raise DefinitionError(
            f"{context}: experiment is {data.get('experiment')!r} but the subcommand "
            f"expects {expected!r}"
        )
    _check_keys(data, _COMMON_KEYS | schema["top"], {"experiment"}, context)
    params = data.get("params", {})
    _check_keys(params, schema["params"], set(), f"{context}: params")
    verdict = data.get("verdict", {})
    _check_keys(verdict, schema["verdict"], set(), f"{context}: verdict")
    data["_dir"] = path.parent
    return data
