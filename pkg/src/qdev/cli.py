"""Command-line front end: ``qdev <subcommand> [flags]``.

Subcommands mirror the library modules:

    temporal-spectrum   temporal eigenpairs, K-orthonormality and node counts
    spatial-check       flatness validation, plane-wave and radial profiles
    quasimode           annulus quasimodes, residual decay and a Weyl family
    synthesize          separated products and their wave-equation residuals
    sweep               scaling covariance over (n, |Lambda|), run concurrently

Outputs (JSON, CSV, SVG) go to ``--out``, overridden by ``$QDEV_OUT``, which
explicit flags override in turn.  Exit codes: 0 success, 2 invalid input or
failed validation, 3 non-convergence, 4 file-system failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (ConsistencyError, DefinitenessError, MatchingError, SimplicityError,
                     TruncationError)
from .numerics import loglog_slope
from .plot import emit_plot
from .quasimodes import QuasimodeSpec, build_quasimode, quasimode_residual, weyl_family
from .records import (SpectrumRecord, build_timestamp, config_hash, export_field, export_spectrum,
                      write_csv, write_json)
from .spatial import (CONFORMING_CHARTS, VIOLATING_CHARTS, BoxGrid, SpatialChart, SpatialField,
                      chart_fixture, chart_from_dict, default_probe_radii, plane_wave_residual,
                      radial_generalized_eigenfunction, validate_asymptotic_flatness,
                      wavevector_for)
from .synthesis import WaveProduct, match_eigenvalues, refinement_study, synthesize_product, wave_residual
from .temporal import (Mesh1D, TemporalProblem, count_sign_changes, default_mesh, k_gram,
                       temporal_spectrum, truncation_error_estimate_safe)

COMMANDS = ("temporal-spectrum", "spatial-check", "quasimode", "synthesize", "sweep")
EXIT_OK, EXIT_INVALID, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4
DIRECTIONS = ((1, 1, 1), (1, 0, 0), (1, 2, 2), (0, 3, 4))
MAX_BOX_POINTS = 4_000_000

DEFAULT_TOLERANCES = {
    "orthonormality": 1e-8,
    "truncation": 1e-10,
    "scaling": 1e-5,
    "plane_wave": 1e-12,
    "consistency_slope": 0.2,
    "quasimode_slope": 0.1,
    "synthesis_slope": 0.15,
    "mismatch_ratio": 100.0,
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, source: str = "",
                 key: Optional[str] = None):
        self.line = line
        self.source = source
        self.key = key
        super().__init__(message)

    def diagnostic(self) -> str:
        if self.source and self.line is not None:
            return f"{self.source}:{self.line}: {self}"
        return str(self)


@dataclass
class RunConfig:
    """Every parameter of a run; keys match the long flag names with ``_``."""

    command: str = "temporal-spectrum"
    preset: str = "physical"
    n: int = 3
    lambda_abs: float = 1.0
    t_max: Optional[float] = None
    N: int = 2048
    m: int = 10
    richardson: bool = True
    chart: object = "flat"
    probe_radii: Optional[list] = None
    grid_size: int = 64
    mode: Optional[list] = None
    k: list = field(default_factory=lambda: [1.0])
    R: list = field(default_factory=lambda: [50.0, 100.0, 200.0, 400.0, 800.0])
    W_ratio: float = 0.5
    family_size: int = 4
    family_ratio: float = 0.3
    levels: list = field(default_factory=lambda: [256, 512, 1024, 2048])
    indices: list = field(default_factory=lambda: [0, 1, 3])
    directions: int = 1
    mismatch_factor: float = 2.0
    n_values: list = field(default_factory=lambda: [3, 4])
    lambda_values: list = field(default_factory=lambda: [0.5, 2.0, 16.0])
    jobs: int = 4
    fixtures: bool = False
    out: str = "qdev-out"
    tolerances: dict = field(default_factory=dict)

    def tol(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))

    def to_dict(self) -> dict:
        return asdict(self)


# -- validation --------------------------------------------------------------------

def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x) -> bool:
    return (isinstance(x, (int, float)) and not isinstance(x, bool)) and math.isfinite(x)


def _check(cond: bool, key: str, msg: str):
    if not cond:
        raise ConfigError(f"{key}: {msg}", key=key)


def _int_range(cfg, key, lo, hi):
    v = getattr(cfg, key)
    _check(_is_int(v) and lo <= v <= hi, key, f"expected integer in [{lo}, {hi}], got {v!r}")


def _num_range(cfg, key, lo, hi, open_lo=True):
    v = getattr(cfg, key)
    ok = _is_num(v) and (v > lo if open_lo else v >= lo) and v <= hi
    _check(ok, key, f"expected number in {'(' if open_lo else '['}{lo:g}, {hi:g}], got {v!r}")


def _list_of(cfg, key, pred, desc, min_len=1, max_len=64):
    v = getattr(cfg, key)
    ok = isinstance(v, list) and min_len <= len(v) <= max_len and all(pred(x) for x in v)
    _check(ok, key, f"expected a list of {min_len}..{max_len} {desc}, got {v!r}")


def validate_config(cfg: RunConfig) -> None:
    """Reject every out-of-range field before any computation starts."""
    _check(cfg.command in COMMANDS, "command", f"must be one of {', '.join(COMMANDS)}")
    _check(cfg.preset in ("physical", "oscillator"), "preset", "must be 'physical' or 'oscillator'")
    _int_range(cfg, "n", 3, 16)
    _num_range(cfg, "lambda_abs", 0.0, 1e6)
    if cfg.t_max is not None:
        _num_range(cfg, "t_max", 0.0, 1e4)
    _int_range(cfg, "N", 64, 1 << 16)
    _check(cfg.N % 2 == 0, "N", "element count must be even (Richardson uses every other node)")
    _int_range(cfg, "m", 0, cfg.N // 4)
    _check(isinstance(cfg.richardson, bool), "richardson", "expected true or false")
    _check(isinstance(cfg.chart, (str, dict)), "chart", "expected a fixture name, a JSON path or an object")
    if isinstance(cfg.chart, dict):
        try:
            chart_from_dict(cfg.chart)
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"chart: {exc}", key="chart") from None
    if cfg.probe_radii is not None:
        _list_of(cfg, "probe_radii", lambda x: _is_num(x) and x > 0, "positive numbers", 4)
        _check(all(b > a for a, b in zip(cfg.probe_radii, cfg.probe_radii[1:])), "probe_radii",
               "must be strictly ascending")
    _int_range(cfg, "grid_size", 8, 256)
    if cfg.mode is not None:
        _list_of(cfg, "mode", _is_int, "integers", 3, 16)
    _list_of(cfg, "k", lambda x: _is_num(x) and 0 <= x <= 100, "wavenumbers in [0, 100]")
    _list_of(cfg, "R", lambda x: _is_num(x) and 0 < x <= 1e5, "radii in (0, 1e5]", 2)
    _check(all(b > a for a, b in zip(cfg.R, cfg.R[1:])), "R", "must be strictly ascending")
    _num_range(cfg, "W_ratio", 0.0, 0.9)
    _int_range(cfg, "family_size", 1, 8)
    _num_range(cfg, "family_ratio", 0.0, 1.0 / 3.0)
    _check(cfg.family_ratio < 1.0 / 3.0 or cfg.family_size == 1, "family_ratio",
           "must stay below 1/3 so annuli are disjoint")
    _list_of(cfg, "levels", lambda x: _is_int(x) and 64 <= x <= 1 << 15 and x % 2 == 0,
             "even element counts in [64, 32768]", 2)
    _check(all(b > a for a, b in zip(cfg.levels, cfg.levels[1:])), "levels", "must be strictly ascending")
    _list_of(cfg, "indices", lambda x: _is_int(x) and 0 <= x <= 15, "mode indices in [0, 15]")
    _check(4 * (max(cfg.indices) + 1) <= cfg.levels[0], "indices", "too many modes for the coarsest level")
    _int_range(cfg, "directions", 1, len(DIRECTIONS))
    _num_range(cfg, "mismatch_factor", 0.0, 1e3)
    _check(cfg.mismatch_factor != 1.0, "mismatch_factor", "must differ from 1")
    _list_of(cfg, "n_values", lambda x: _is_int(x) and 3 <= x <= 16, "dimensions in [3, 16]")
    _list_of(cfg, "lambda_values", lambda x: _is_num(x) and 0 < x <= 1e6, "values in (0, 1e6]")
    _int_range(cfg, "jobs", 1, 64)
    _check(isinstance(cfg.fixtures, bool), "fixtures", "expected true or false")
    _check(isinstance(cfg.out, str) and cfg.out != "", "out", "expected a non-empty path")
    _check(isinstance(cfg.tolerances, dict), "tolerances", "expected an object")
    for name, val in cfg.tolerances.items():
        _check(name in DEFAULT_TOLERANCES, "tolerances", f"unknown tolerance {name!r}")
        _check(_is_num(val) and val > 0, "tolerances", f"{name} must be a positive number")


# -- config file and flags ---------------------------------------------------------

def _key_line(text: str, key: str) -> Optional[int]:
    needle = f'"{key}"'
    for no, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return no
    return None


def load_config_file(path: str) -> tuple[dict, str]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg} (column {exc.colno})", exc.lineno, path) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", 1, path)
    names = {f.name for f in fields(RunConfig)}
    out = {}
    for raw_key, val in data.items():
        key = raw_key.replace("-", "_")
        if key not in names or key == "command":
            raise ConfigError(f"unknown key {raw_key!r}", _key_line(text, raw_key) or 1, path)
        out[key] = val
    return out, text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdev", description="Separable solutions of a "
                                     "wave equation with a confining temporal potential.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(p):
        p.add_argument("--config", help="JSON file with the same keys as the flags")
        p.add_argument("--out", help="output directory")
        p.add_argument("--tolerance", action="append", default=None, metavar="NAME=VALUE",
                       help="override a tolerance, e.g. orthonormality=1e-9")

    def temporal(p):
        p.add_argument("--preset", choices=("physical", "oscillator"))
        p.add_argument("--n", type=int)
        p.add_argument("--lambda-abs", type=float)
        p.add_argument("--t-max", type=float)
        p.add_argument("--N", type=int, help="number of elements")
        p.add_argument("--m", type=int, help="number of eigenpairs")
        p.add_argument("--richardson", action=argparse.BooleanOptionalAction, default=None)

    def floats(s):
        return [float(x) for x in s.split(",") if x.strip()]

    def ints(s):
        return [int(x) for x in s.split(",") if x.strip()]

    p = sub.add_parser("temporal-spectrum", help="temporal eigenpairs")
    common(p)
    temporal(p)

    p = sub.add_parser("spatial-check", help="flatness validation and spatial eigenfunctions")
    common(p)
    p.add_argument("--chart", help="'flat', a fixture name or a JSON descriptor path")
    p.add_argument("--probe-radii", type=floats)
    p.add_argument("--grid-size", type=int)
    p.add_argument("--mode", type=ints, help="integer wavevector on the 2*pi box")
    p.add_argument("--k", type=floats, help="radial wavenumber (first entry used)")
    p.add_argument("--fixtures", action=argparse.BooleanOptionalAction, default=None)

    p = sub.add_parser("quasimode", help="annulus quasimodes and residual decay")
    common(p)
    p.add_argument("--chart")
    p.add_argument("--k", type=floats)
    p.add_argument("--R", type=floats)
    p.add_argument("--W-ratio", type=float)
    p.add_argument("--family-size", type=int)
    p.add_argument("--family-ratio", type=float)

    p = sub.add_parser("synthesize", help="separated products and wave residuals")
    common(p)
    temporal(p)
    p.add_argument("--levels", type=ints)
    p.add_argument("--indices", type=ints)
    p.add_argument("--directions", type=int)
    p.add_argument("--mismatch-factor", type=float)

    p = sub.add_parser("sweep", help="scaling covariance over dimensions and |Lambda|")
    common(p)
    temporal(p)
    p.add_argument("--n-values", type=ints)
    p.add_argument("--lambda-values", type=floats)
    p.add_argument("--jobs", type=int)
    return parser


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then ``$QDEV_OUT``, then explicit flags."""
    values: dict = {"command": ns.command}
    file_values: dict = {}
    source, text = "", ""
    if getattr(ns, "config", None):
        source = ns.config
        file_values, text = load_config_file(ns.config)
        values.update(file_values)
    env_out = os.environ.get("QDEV_OUT")
    if env_out:
        values["out"] = env_out
    names = {f.name for f in fields(RunConfig)}
    for key, val in vars(ns).items():
        if key in names and key != "command" and val is not None:
            values[key] = val
    if getattr(ns, "tolerance", None):
        tols = dict(values.get("tolerances") or {})
        for item in ns.tolerance:
            name, _, val = item.partition("=")
            try:
                tols[name.strip()] = float(val)
            except ValueError:
                raise ConfigError(f"tolerances: cannot parse {item!r}") from None
        values["tolerances"] = tols
    cfg = RunConfig(**values)
    try:
        validate_config(cfg)
    except ConfigError as exc:
        key = exc.key
        from_flag = vars(ns).get(key) is not None
        if source and key in file_values and not from_flag:
            exc.line, exc.source = _key_line(text, key) or 1, source
        raise
    return cfg


# -- pipelines ---------------------------------------------------------------------

def make_problem(cfg: RunConfig, lambda_abs: Optional[float] = None, n: Optional[int] = None):
    if cfg.preset == "oscillator":
        return TemporalProblem.oscillator()
    return TemporalProblem.physical(n or cfg.n, cfg.lambda_abs if lambda_abs is None else lambda_abs)


def resolve_chart(cfg: RunConfig) -> SpatialChart:
    spec = cfg.chart
    if isinstance(spec, dict):
        return chart_from_dict(spec)
    if spec == "flat":
        return SpatialChart.flat(cfg.n)
    path = Path(spec)
    if spec.endswith(".json") or path.is_file():
        data = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ConfigError(f"chart descriptor {spec} must hold an object")
        return chart_from_dict(data)
    try:
        return chart_fixture(spec)
    except KeyError:
        raise ConfigError(f"chart: no fixture named {spec!r}") from None


def _base_record(cfg: RunConfig) -> dict:
    return {"config": cfg.to_dict(), "config_hash": config_hash(cfg.to_dict()),
            "timestamp": build_timestamp()}


def _problem_dict(problem: TemporalProblem) -> dict:
    return {"label": problem.label(), "a": problem.stiffness, "c": problem.potential,
            "p": problem.weight_exponent, "n": problem.n, "lambda_abs": problem.lambda_abs}


def spectrum_record(cfg: RunConfig, problem: TemporalProblem, pairs) -> SpectrumRecord:
    tol = cfg.tol("orthonormality")
    if pairs:
        gram = k_gram(pairs, problem.weight_exponent)
        defect = float(np.max(np.abs(gram - np.eye(len(pairs)))))
        mesh = pairs[0].mesh
        est = truncation_error_estimate_safe(problem, mesh.t_max, pairs[-1].raw_eigenvalue)
        mesh_info = {"t_max": mesh.t_max, "elements": mesh.n_elements, "graded": mesh.graded,
                     "ratio": mesh.ratio}
    else:
        defect, est, mesh_info = 0.0, 0.0, {}
    return SpectrumRecord(
        config_hash=config_hash(cfg.to_dict()),
        eigenvalues=[p.eigenvalue for p in pairs],
        orthonormality_defect=defect,
        sign_changes=[count_sign_changes(p) for p in pairs],
        truncation_estimate=est,
        timestamp=build_timestamp(),
        problem=_problem_dict(problem),
        mesh=mesh_info,
        raw_eigenvalues=[p.raw_eigenvalue for p in pairs],
        tolerance=tol,
        config=cfg.to_dict(),
    )


def cmd_temporal_spectrum(cfg: RunConfig, out: Path) -> int:
    problem = make_problem(cfg)
    pairs = temporal_spectrum(problem, cfg.t_max, cfg.N, cfg.m, richardson=cfg.richardson,
                              truncation_tol=cfg.tol("truncation"))
    record = spectrum_record(cfg, problem, pairs)
    export_spectrum(record, out / "spectrum.json")
    if pairs:
        t = pairs[0].mesh.nodes
        rows = zip(t, *(p.coefficients for p in pairs))
        write_csv(out / "eigenfunctions.csv", ["t"] + [f"w{p.index}" for p in pairs], rows)
        emit_plot([[(p.index, p.eigenvalue) for p in pairs]],
                  {"title": f"temporal spectrum, {problem.label()}", "xlabel": "index i",
                   "ylabel": "eigenvalue"}, out / "spectrum.svg")
    return EXIT_OK if record.converged else EXIT_DIVERGED


def _box_mode(cfg: RunConfig, n: int) -> list:
    if cfg.mode is None:
        return [(1, 2, 3)[d % 3] for d in range(n)]
    if len(cfg.mode) != n:
        raise ConfigError(f"mode: expected {n} integers, got {len(cfg.mode)}")
    return list(cfg.mode)


def plane_wave_study(cfg: RunConfig, chart: SpatialChart) -> dict:
    """Discrete identity on the configured grid and the continuum consistency slope."""
    n = chart.n
    if cfg.grid_size**n > MAX_BOX_POINTS:
        raise ConfigError(f"grid_size: {cfg.grid_size}^{n} nodes exceed {MAX_BOX_POINTS}")
    k = np.array(_box_mode(cfg, n), dtype=float)
    main = plane_wave_residual(chart, k, BoxGrid((cfg.grid_size,) * n, 2 * math.pi / cfg.grid_size))
    # kh must stay well below pi for the h^2 term to dominate
    sizes = [s for s in (cfg.grid_size // 4, cfg.grid_size // 2, cfg.grid_size)
             if 2 * math.pi / s * float(np.max(np.abs(k))) < 1.5]
    errs, hs = [], []
    for s in sizes:
        res = plane_wave_residual(chart, k, BoxGrid((s,) * n, 2 * math.pi / s))
        errs.append(abs(res.lambda_h - res.continuum))
        hs.append(2 * math.pi / s)
    slope = loglog_slope(hs, errs) if len(hs) >= 2 and min(errs) > 0 else math.nan
    ok_res = main.residual < cfg.tol("plane_wave")
    ok_slope = abs(slope - 2.0) <= cfg.tol("consistency_slope")
    return {"wavevector": k.tolist(), "grid_size": cfg.grid_size, "lambda_h": main.lambda_h,
            "continuum": main.continuum, "residual": main.residual,
            "refinement": {"spacing": hs, "error": errs, "slope": slope},
            "residual_ok": bool(ok_res), "slope_ok": bool(ok_slope)}


def fixture_suite() -> dict:
    rows = []
    for chart in CONFORMING_CHARTS:
        rep = validate_asymptotic_flatness(chart, default_probe_radii(chart))
        rows.append({"name": chart.name, "expected_pass": True, "expected_violated": [],
                     "report": rep.to_dict(), "correct": bool(rep.passed)})
    for chart, expected in VIOLATING_CHARTS:
        rep = validate_asymptotic_flatness(chart, default_probe_radii(chart))
        rows.append({"name": chart.name, "expected_pass": False, "expected_violated": list(expected),
                     "report": rep.to_dict(),
                     "correct": bool(not rep.passed and tuple(rep.violated) == tuple(expected))})
    return {"charts": rows, "all_correct": all(r["correct"] for r in rows)}


def cmd_spatial_check(cfg: RunConfig, out: Path) -> int:
    chart = resolve_chart(cfg)
    radii = cfg.probe_radii if cfg.probe_radii is not None else default_probe_radii(chart)
    report = validate_asymptotic_flatness(chart, radii)
    result = {**_base_record(cfg), "chart": chart.to_dict(), "flatness": report.to_dict()}
    code = EXIT_OK
    if chart.is_flat and chart.potential.is_zero:
        pw = plane_wave_study(cfg, chart)
        result["plane_wave"] = pw
        if not (pw["residual_ok"] and pw["slope_ok"]):
            code = EXIT_DIVERGED
    if report.passed and chart.is_flat and cfg.k[0] > 0:
        k = cfg.k[0]
        fld, _, growth = radial_generalized_eigenfunction(chart, k, 200.0 / k, samples=4001)
        result["radial_profile"] = {"k": k, "eigenvalue": fld.eigenvalue, "growth": growth.to_dict()}
        export_field(fld, out / "radial_profile.csv")
    if cfg.fixtures:
        suite = fixture_suite()
        result["fixtures"] = suite
        if not suite["all_correct"]:
            code = EXIT_INVALID
    write_json(result, out / "spatial_check.json")
    if not report.passed:
        code = EXIT_INVALID
    return code


def cmd_quasimode(cfg: RunConfig, out: Path) -> int:
    chart = resolve_chart(cfg)
    rep = validate_asymptotic_flatness(chart, default_probe_radii(chart))
    if not rep.passed:
        write_json({**_base_record(cfg), "chart": chart.to_dict(), "flatness": rep.to_dict()},
                   out / "quasimode.json")
        return EXIT_INVALID
    rows, series, per_k = [], [], []
    comp_names: list = []
    code = EXIT_OK
    band = cfg.tol("quasimode_slope")
    for k in cfg.k:
        eps = []
        certs = []
        for R in cfg.R:
            spec = QuasimodeSpec(k, R, cfg.W_ratio * R)
            cert = quasimode_residual(build_quasimode(spec, chart, validate=False), spec, chart)
            certs.append(cert.to_dict())
            eps.append(cert.epsilon)
            comps = cert.components
            comp_names = comp_names or sorted(comps)
            rows.append([k, R, spec.W, cert.epsilon] + [comps[c] for c in sorted(comps)])
        slope = loglog_slope(cfg.R, eps)
        ok = None
        if k > 0:
            ok = bool(abs(slope + 1.0) <= band)
            if not ok:
                code = EXIT_DIVERGED
        per_k.append({"k": k, "slope": slope, "slope_ok": ok, "certificates": certs})
        series.append(list(zip(cfg.R, eps)))
    write_csv(out / "quasimode.csv", ["k", "R", "W", "epsilon"] + comp_names, rows)

    fam = weyl_family(cfg.k[0], cfg.family_size, chart, width_ratio=cfg.family_ratio)
    off = fam.gram - np.diag(np.diag(fam.gram))
    family = {"k": cfg.k[0], "members": [s.to_dict() for s in fam.specs],
              "epsilon": [c.epsilon for c in fam.certificates],
              "gram_diagonal": [float(x) for x in np.real(np.diag(fam.gram))],
              "gram_offdiagonal_max": float(np.max(np.abs(off))) if off.size else 0.0,
              "diagonal": bool(np.all(off == 0))}
    write_json({**_base_record(cfg), "chart": chart.to_dict(), "sweeps": per_k, "weyl_family": family},
               out / "quasimode.json")
    emit_plot(series, {"xlog": True, "ylog": True, "guide": True, "title": "quasimode residual",
                       "xlabel": "R", "ylabel": "epsilon", "labels": [f"k={k:g}" for k in cfg.k]},
              out / "quasimode.svg")
    if not family["diagonal"]:
        code = EXIT_DIVERGED
    return code


def cmd_synthesize(cfg: RunConfig, out: Path) -> int:
    chart = resolve_chart(cfg)
    if not (chart.is_flat and chart.potential.is_zero):
        raise ConfigError("chart: synthesis pairs temporal modes with plane waves on a flat chart with V = 0")
    problem = make_problem(cfg)
    m = max(cfg.indices) + 1
    t_max = cfg.t_max
    if t_max is None:
        t_max = temporal_spectrum(problem, None, 256, m, truncation_tol=cfg.tol("truncation"))[0].mesh.t_max
    # Uniform meshes: on graded ones the three-point w'' drowns in round-off
    # inside the tiny first elements.
    spectra = {N: temporal_spectrum(problem, mesh=Mesh1D.uniform(t_max, N), m=m,
                                    truncation_tol=cfg.tol("truncation"))
               for N in cfg.levels}
    finest = spectra[cfg.levels[-1]]
    match_eigenvalues(finest, chart.n)
    # t^p can cap the pointwise order at 1 + p unless p is an integer
    p = problem.weight_exponent
    order = 2.0 if float(p).is_integer() else min(2.0, 1.0 + p)

    rows, series, labels = [], [], []
    code = EXIT_OK
    for i in cfg.indices:
        for j in range(cfg.directions):
            direction = DIRECTIONS[j][: chart.n] + (1,) * max(0, chart.n - 3)
            matched, mismatched = [], []
            for N in cfg.levels:
                pair = spectra[N][i]
                grid = BoxGrid((6,) * chart.n, pair.mesh.max_step)
                pw = plane_wave_residual(chart, wavevector_for(pair.eigenvalue, chart.n, direction), grid)
                matched.append(synthesize_product(pair, pw.field))
                lam_bad = cfg.mismatch_factor * pair.eigenvalue
                bad = plane_wave_residual(chart, wavevector_for(lam_bad, chart.n, direction), grid)
                mismatched.append(WaveProduct(pair.mesh, np.array(pair.coefficients), bad.field,
                                              pair.eigenvalue, lam_bad, i))
            res, slope = refinement_study(matched, problem, chart)
            bad_res = wave_residual(mismatched[-1], problem, chart).relative
            ratio = bad_res / res[-1] if res[-1] > 0 else math.inf
            band = cfg.tol("synthesis_slope")
            ok = (order - band <= slope <= 2.0 + band) and ratio >= cfg.tol("mismatch_ratio")
            if not ok:
                code = EXIT_DIVERGED
            rows.append({"i": i, "j": j, "lambda": spectra[cfg.levels[-1]][i].eigenvalue,
                         "residual": res[-1], "residuals": res,
                         "max_step": [u.mesh.max_step for u in matched], "slope": slope,
                         "expected_order": order,
                         "mismatched_residual": bad_res, "mismatch_ratio": ratio, "certified": bool(ok)})
            series.append([(u.mesh.max_step, r) for u, r in zip(matched, res)])
            labels.append(f"i={i}, j={j}")
    write_json({**_base_record(cfg), "problem": _problem_dict(problem), "products": rows},
               out / "synthesis.json")
    write_csv(out / "synthesis.csv", ["i", "j", "lambda", "residual", "slope", "mismatched_residual"],
              [[r["i"], r["j"], r["lambda"], r["residual"], r["slope"], r["mismatched_residual"]]
               for r in rows])
    emit_plot(series, {"xlog": True, "ylog": True, "guide": True, "labels": labels,
                       "title": "wave-equation residual", "xlabel": "h", "ylabel": "relative residual"},
              out / "synthesis.svg")
    return code


def _sweep_task(cfg: RunConfig, n: int, lam: float, mesh: Mesh1D):
    problem = TemporalProblem.physical(n, lam)
    pairs = temporal_spectrum(problem, m=cfg.m, mesh=mesh.scaled(lam ** -0.25),
                              richardson=cfg.richardson, truncation_tol=cfg.tol("truncation"))
    return [p.eigenvalue for p in pairs]


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    if cfg.preset != "physical":
        raise ConfigError("preset: the scaling sweep needs the physical problem")
    if cfg.m < 1:
        raise ConfigError("m: the sweep needs at least one eigenvalue")
    meshes = {}
    for n in cfg.n_values:
        unit = TemporalProblem.physical(n, 1.0)
        if cfg.t_max is None:
            t_max = temporal_spectrum(unit, None, 256, cfg.m, truncation_tol=cfg.tol("truncation"))[0].mesh.t_max
        else:
            t_max = cfg.t_max
        meshes[n] = default_mesh(unit, t_max, cfg.N)
    keys = [(n, lam) for n in cfg.n_values for lam in [1.0] + [x for x in cfg.lambda_values if x != 1.0]]
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        futures = {key: pool.submit(_sweep_task, cfg, key[0], key[1], meshes[key[0]]) for key in keys}
        results = {key: fut.result() for key, fut in futures.items()}

    tol = cfg.tol("scaling")
    entries, series, labels = [], [], []
    worst = 0.0
    for n in cfg.n_values:
        unit = results[(n, 1.0)]
        for lam in cfg.lambda_values:
            vals = results[(n, lam)]
            pred = [lam ** (1.0 - 1.0 / n) * u for u in unit]
            dev = [abs(v - p) / v for v, p in zip(vals, pred)]
            worst = max(worst, max(dev))
            entries.append({"n": n, "lambda_abs": lam, "eigenvalues": vals, "predicted": pred,
                            "relative_deviation": dev, "covariant": bool(max(dev) < tol)})
        series.append([(lam, results[(n, lam)][0]) for lam in sorted(set([1.0] + list(cfg.lambda_values)))])
        labels.append(f"n={n}")
    write_json({**_base_record(cfg),
                "unit": {str(n): results[(n, 1.0)] for n in cfg.n_values},
                "meshes": {str(n): {"t_max": meshes[n].t_max, "elements": meshes[n].n_elements}
                           for n in cfg.n_values},
                "entries": entries, "max_relative_deviation": worst, "covariant": bool(worst < tol)},
               out / "sweep.json")
    emit_plot(series, {"xlog": True, "ylog": True, "guide": True, "labels": labels,
                       "title": "lowest eigenvalue vs |Lambda|", "xlabel": "|Lambda|",
                       "ylabel": "lambda_0"}, out / "sweep.svg")
    return EXIT_OK if worst < tol else EXIT_DIVERGED


HANDLERS = {
    "temporal-spectrum": cmd_temporal_spectrum,
    "spatial-check": cmd_spatial_check,
    "quasimode": cmd_quasimode,
    "synthesize": cmd_synthesize,
    "sweep": cmd_sweep,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_INVALID
    try:
        cfg = resolve_config(ns)
        out = Path(cfg.out)
        return HANDLERS[cfg.command](cfg, out)
    except ConfigError as exc:
        print(f"qdev: {exc.diagnostic()}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"qdev: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TruncationError, SimplicityError, ConsistencyError, DefinitenessError, MatchingError) as exc:
        print(f"qdev: did not converge: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ValueError, TypeError) as exc:
        print(f"qdev: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())
