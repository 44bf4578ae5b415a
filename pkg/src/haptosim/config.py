"""Strict key=value configuration documents and run artifacts.

The format is deliberately flat: five known sections, known keys only,
``#`` comments, one ``key = value`` per line.  Unknown sections or
keys, duplicates, and malformed values are parse errors that cite the
offending line, so a typo can never silently change which hypotheses a
run claims to satisfy.  Semantic problems (negative coefficients,
violated regime hypotheses) surface as validation errors from the
model layer instead, with the violated requirement named.

A parsed :class:`~.harness.Scenario` keeps the exact document text, so
the ``config_echo`` artifact written next to run outputs reproduces
the input byte for byte and re-parses to an identical scenario.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .harness import (
    InitialSpec,
    RunResult,
    Scenario,
    TheoremReport,
    validate_scenario,
)
from .model import FunctionSpec, ModelParams, PRIMITIVE, SimState, build_grid
from .stepping import StepperConfig, from_weighted_form

SECTIONS = {
    "model": {"name", "regime", "mu", "gamma", "diffusion", "taxis",
              "production", "formulation"},
    "grid": {"cells", "extent", "origin"},
    "stepper": {"t_end", "dt_max", "record_every", "cfl", "flux"},
    "initial": {"u0", "v0", "m0", "seed", "jitter"},
    "output": {"dir"},
}

REQUIRED = {
    "model": ("regime", "mu", "gamma", "diffusion", "taxis", "production"),
    "grid": ("cells", "extent"),
    "stepper": ("t_end", "dt_max", "record_every"),
    "initial": ("u0", "v0", "m0"),
    "output": (),
}


class ConfigError(ValueError):
    """Malformed configuration text; carries the offending line number."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


# ---------------------------------------------------------------------------
# parsing


def _scan(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    """Split the document into sections of (value, lineno) entries."""
    out: dict[str, dict[str, tuple[str, int]]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            name = line[1:-1].strip()
            if name not in SECTIONS:
                raise ConfigError(f"unknown section [{name}]", lineno)
            if name in out:
                raise ConfigError(f"duplicate section [{name}]", lineno)
            out[name] = {}
            section = name
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {raw.strip()!r}", lineno)
        if section is None:
            raise ConfigError("key before any section header", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SECTIONS[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if key in out[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        out[section][key] = (value, lineno)
    for name in ("model", "grid", "stepper", "initial"):
        if name not in out:
            raise ConfigError(f"missing section [{name}]")
        for key in REQUIRED[name]:
            if key not in out[name]:
                raise ConfigError(f"missing required key {key!r} in [{name}]")
    return out


def _float(value: str, lineno: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"expected a number, got {value!r}", lineno) from None


def _int(value: str, lineno: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"expected an integer, got {value!r}", lineno) from None


def _floats(value: str, lineno: int) -> tuple[float, ...]:
    return tuple(_float(part.strip(), lineno) for part in value.split(","))


def _call_form(value: str, lineno: int) -> tuple[str, list[str]]:
    head, sep, rest = value.partition("(")
    if not sep or not rest.rstrip().endswith(")"):
        raise ConfigError(f"expected name(args), got {value!r}", lineno)
    args = rest.rstrip()[:-1].strip()
    return head.strip(), [a.strip() for a in args.split(",")] if args else []


def _pairs(args: list[str], lineno: int) -> tuple[list[float], list[float]]:
    xs, ys = [], []
    for item in args:
        x, sep, y = item.partition(":")
        if not sep:
            raise ConfigError(f"expected x:y pair, got {item!r}", lineno)
        xs.append(_float(x.strip(), lineno))
        ys.append(_float(y.strip(), lineno))
    return xs, ys


def _function(value: str, lineno: int) -> FunctionSpec:
    family, args = _call_form(value, lineno)
    if family == "constant" and len(args) == 1:
        return FunctionSpec.constant(_float(args[0], lineno))
    if family == "affine" and len(args) == 2:
        return FunctionSpec.affine(_float(args[0], lineno), _float(args[1], lineno))
    if family == "saturating" and len(args) == 2:
        return FunctionSpec.saturating(_float(args[0], lineno), _float(args[1], lineno))
    if family == "tabulated" and args:
        return FunctionSpec.tabulated(*_pairs(args, lineno))
    raise ConfigError(
        f"expected constant(c), affine(a, b), saturating(cap, slope) or "
        f"tabulated(x:y, ...), got {value!r}", lineno)


def _initial(value: str, lineno: int) -> InitialSpec:
    kind, args = _call_form(value, lineno)
    if kind == "constant" and len(args) == 1:
        return InitialSpec.constant(_float(args[0], lineno))
    if kind == "bump" and len(args) in (3, 4):
        nums = [_float(a, lineno) for a in args]
        return InitialSpec.bump(*nums)
    if kind == "tabulated" and args:
        return InitialSpec.tabulated(*_pairs(args, lineno))
    raise ConfigError(
        f"expected constant(c), bump(center, width, amplitude[, offset]) or "
        f"tabulated(x:y, ...), got {value!r}", lineno)


def parse_config(text: str) -> Scenario:
    """Parse and fully validate a configuration document.

    Raises :class:`ConfigError` for structural problems (with the line
    number) and the model layer's validation errors for semantic ones,
    including the regime-hypothesis checks.
    """
    data = _scan(text)

    def take(section: str, key: str, default=None):
        entry = data.get(section, {}).get(key)
        return entry if entry is not None else (default, None)

    model = data["model"]
    regime, _ = take("model", "regime")
    name, _ = take("model", "name", regime)
    mu_text, mu_line = model["mu"]
    params = ModelParams(
        growth_rate=_float(mu_text, mu_line),
        protease_decay=_float(*model["gamma"]),
        protease_diffusion=_float(*model["diffusion"]),
        taxis=_function(*model["taxis"]),
        production=_function(*model["production"]))
    formulation, _ = take("model", "formulation", PRIMITIVE)

    grid_sec = data["grid"]
    cells_text, cells_line = grid_sec["cells"]
    cells = tuple(_int(part.strip(), cells_line) for part in cells_text.split(","))
    extent = _floats(*grid_sec["extent"])
    origin_text, origin_line = take("grid", "origin")
    origin = _floats(origin_text, origin_line) if origin_text is not None else (0.0,)
    grid = build_grid(cells, extent if len(extent) > 1 else extent[0],
                      origin if len(origin) > 1 else origin[0])

    st = data["stepper"]
    cfl_text, cfl_line = take("stepper", "cfl")
    flux, _ = take("stepper", "flux", "upwind")
    stepper = StepperConfig(
        _float(*st["t_end"]), _float(*st["dt_max"]), _float(*st["record_every"]),
        _float(cfl_text, cfl_line) if cfl_text is not None else 0.5)

    init = data["initial"]
    seed_text, seed_line = take("initial", "seed")
    jitter_text, jitter_line = take("initial", "jitter")
    scenario = Scenario(
        name=name, regime=regime, params=params, grid=grid, stepper=stepper,
        initial_cells=_initial(*init["u0"]),
        initial_matrix=_initial(*init["v0"]),
        initial_protease=_initial(*init["m0"]),
        seed=_int(seed_text, seed_line) if seed_text is not None else 0,
        jitter=_float(jitter_text, jitter_line) if jitter_text is not None else 0.0,
        flux_scheme=flux, formulation=formulation, source_text=text)
    validate_scenario(scenario)
    return scenario


def output_dir(text: str) -> str | None:
    """The [output] dir entry of a document, if present."""
    entry = _scan(text).get("output", {}).get("dir")
    return entry[0] if entry else None


# ---------------------------------------------------------------------------
# rendering


def _render_function(f: FunctionSpec) -> str:
    if f.family == "tabulated":
        pairs = ", ".join(f"{x!r}:{y!r}" for x, y in zip(f.nodes, f.table))
        return f"tabulated({pairs})"
    return f"{f.family}({', '.join(repr(c) for c in f.coeffs)})"


def _render_initial(spec: InitialSpec) -> str:
    if spec.kind == "constant":
        return f"constant({spec.value!r})"
    if spec.kind == "bump":
        return (f"bump({spec.center!r}, {spec.width!r}, "
                f"{spec.amplitude!r}, {spec.offset!r})")
    pairs = ", ".join(f"{x!r}:{y!r}" for x, y in zip(spec.nodes, spec.table))
    return f"tabulated({pairs})"


def scenario_to_config(scenario: Scenario) -> str:
    """Canonical document for a scenario; re-parsing it round-trips."""
    p, g, st = scenario.params, scenario.grid, scenario.stepper
    lines = [
        "[model]",
        f"name = {scenario.name}",
        f"regime = {scenario.regime}",
        f"mu = {p.growth_rate!r}",
        f"gamma = {p.protease_decay!r}",
        f"diffusion = {p.protease_diffusion!r}",
        f"taxis = {_render_function(p.taxis)}",
        f"production = {_render_function(p.production)}",
        f"formulation = {scenario.formulation}",
        "",
        "[grid]",
        f"cells = {', '.join(str(n) for n in g.cells)}",
        f"extent = {', '.join(repr(e) for e in g.extents)}",
        f"origin = {', '.join(repr(o) for o in g.origin)}",
        "",
        "[stepper]",
        f"t_end = {st.t_end!r}",
        f"dt_max = {st.dt_max!r}",
        f"record_every = {st.record_every!r}",
        f"cfl = {st.cfl!r}",
        f"flux = {scenario.flux_scheme}",
        "",
        "[initial]",
        f"u0 = {_render_initial(scenario.initial_cells)}",
        f"v0 = {_render_initial(scenario.initial_matrix)}",
        f"m0 = {_render_initial(scenario.initial_protease)}",
        f"seed = {scenario.seed}",
        f"jitter = {scenario.jitter!r}",
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# run artifacts


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def emit_outputs(result: RunResult, report: TheoremReport | None,
                 out_dir: str | Path) -> list[Path]:
    """Write series.csv, per-record snapshots, report.txt, config_echo.

    Numbers use 17 significant digits, enough to reproduce the exact
    double-precision values on read-back.  Snapshots always contain
    the primitive cell density, whichever formulation the run used.
    Returns the paths written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    names = [n for n in result.series]
    series_path = out / "series.csv"
    with open(series_path, "w") as fh:
        fh.write(",".join(["t"] + names) + "\n")
        if names:
            columns = [result.series[n] for n in names]
            for i, t in enumerate(columns[0].t):
                row = [_fmt(t)] + [_fmt(float(s.values[i])) for s in columns]
                fh.write(",".join(row) + "\n")
    written.append(series_path)

    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    for state in result.recorded_states:
        written.append(_write_snapshot(snap_dir, state, result.scenario.params))

    if report is not None:
        report_path = out / "report.txt"
        with open(report_path, "w") as fh:
            for c in report.claims:
                line = (f"{c.claim_id:32s} {c.verdict:14s} "
                        f"measured={_fmt(c.measured)} threshold={_fmt(c.threshold)}")
                if c.fitted is not None:
                    line += (f" rate={_fmt(c.fitted.rate)}"
                             f" r_squared={_fmt(c.fitted.r_squared)}")
                fh.write(line + "\n")
        written.append(report_path)

    echo_path = out / "config_echo.ini"
    text = result.scenario.source_text
    if text is None:
        text = scenario_to_config(result.scenario)
    echo_path.write_text(text)
    written.append(echo_path)
    return written


def _write_snapshot(snap_dir: Path, state: SimState, params) -> Path:
    prim = state if state.formulation == PRIMITIVE else from_weighted_form(state, params)
    grid = prim.grid
    path = snap_dir / f"state_{state.t:.6f}.csv"
    index_names = ["i", "j", "k"][:grid.dims]
    coord_names = ["x", "y", "z"][:grid.dims]
    axes = [np.arange(n) for n in grid.shape]
    index_grids = np.meshgrid(*axes, indexing="ij")
    coord_grids = grid.centers()
    u, v, m = prim.cells.values, prim.ecm.values, prim.protease.values
    with open(path, "w") as fh:
        fh.write(",".join(index_names + coord_names + ["u", "v", "m"]) + "\n")
        for flat in range(u.size):
            idx = np.unravel_index(flat, grid.shape)
            row = [str(int(ig[idx])) for ig in index_grids]
            row += [_fmt(float(cg[idx])) for cg in coord_grids]
            row += [_fmt(float(u[idx])), _fmt(float(v[idx])), _fmt(float(m[idx]))]
            fh.write(",".join(row) + "\n")
    return path
