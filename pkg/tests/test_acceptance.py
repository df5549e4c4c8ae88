"""Acceptance criteria 1-8, driven end to end through the command line.

Each criterion runs the ``qdev`` commands into a session directory, checks the
written artifacts against independent references and records a verdict that
the terminal summary prints as one PASS/FAIL line.
"""
import csv
import json
import math
import time

import numpy as np
import pytest
from scipy.special import roots_jacobi, roots_legendre

from qdev.cli import run
from qdev.spatial import BoxGrid, SpatialChart, plane_wave_residual

from oracles import shooting_eigenvalue

# tolerances as stated by the acceptance criteria
CALIBRATION_RTOL = 1e-6
CALIBRATION_SECONDS = 30.0
GAP_RTOL = 1e-6
GRAM_TOL = 1e-8
SHOOTING_RTOL = 1e-7
SCALING_RTOL = 1e-5
PLANE_WAVE_TOL = 1e-12
CONSISTENCY_BAND = 0.2
QUASIMODE_BAND = 0.1
QUASIMODE_SECONDS = 60.0
SYNTHESIS_BAND = 0.15
MISMATCH_RATIO = 100.0

DECAYING_V = {"n": 3, "metric": {"family": "flat"}, "potential": {"family": "rational", "amplitude": 1.0}}

RUNS = {
    1: [["temporal-spectrum", "--preset", "oscillator", "--t-max", "12", "--N", "2048", "--m", "4",
         "--richardson"]],
    2: [["temporal-spectrum", "--n", "3", "--lambda-abs", "1", "--m", "10"]],
    3: [["sweep", "--n-values", "3,4", "--lambda-values", "0.5,2,16", "--m", "6"]],
    4: [["spatial-check", "--chart", "flat", "--grid-size", "64", "--mode", "3,-5,7"]],
    5: [["quasimode", "--k", "1", "--R", "50,100,200,400,800", "--W-ratio", "0.5", "--family-size", "4"],
        ["quasimode", "--chart", "@decaying", "--k", "1", "--R", "50,100,200,400,800", "--W-ratio", "0.5",
         "--family-size", "4"]],
    6: [["synthesize", "--preset", "oscillator", "--t-max", "12", "--levels", "256,512,1024,2048",
         "--indices", "0,1,3"]],
    7: [["spatial-check", "--fixtures"]],
}


class Runner:
    def __init__(self, root):
        self.root = root
        (root / "decaying.json").write_text(json.dumps(DECAYING_V))
        self.results = {}

    def argv(self, criterion, j):
        out = self.root / f"c{criterion}-{j}"
        args = [str(self.root / "decaying.json") if a == "@decaying" else a for a in RUNS[criterion][j]]
        return args + ["--out", str(out)], out

    def execute(self, criterion, j):
        argv, out = self.argv(criterion, j)
        start = time.perf_counter()
        code = run(argv)
        return code, time.perf_counter() - start, out

    def get(self, criterion):
        if criterion not in self.results:
            self.results[criterion] = [self.execute(criterion, j) for j in range(len(RUNS[criterion]))]
        return self.results[criterion]


@pytest.fixture(scope="module")
def runner(tmp_path_factory):
    return Runner(tmp_path_factory.mktemp("acceptance"))


def load(out, name):
    return json.loads((out / name).read_text())


def read_eigenfunctions(path):
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array(rows[1:], dtype=float)
    return data[:, 0], data[:, 1:]


def requadrature_gram(t, w, p):
    """K-Gram of piecewise-linear nodal functions by Gauss-Jacobi / Gauss-Legendre per element."""
    xj, wj = roots_jacobi(12, 0.0, p)      # weight (1 + x)^p on the element touching t = 0
    xl, wl = roots_legendre(16)
    gram = np.zeros((w.shape[1], w.shape[1]))
    for e in range(t.size - 1):
        t0, t1 = t[e], t[e + 1]
        h = t1 - t0
        if t0 == 0.0:
            s = 0.5 * (xj + 1.0)
            weights = wj * (h / 2.0) ** (p + 1)
        else:
            s = 0.5 * (xl + 1.0)
            weights = wl * (h / 2.0) * (t0 + s * h) ** p
        vals = np.outer(1.0 - s, w[e]) + np.outer(s, w[e + 1])
        gram += vals.T @ (weights[:, None] * vals)
    return gram


def test_criterion_1_oscillator_calibration(runner, verdicts):
    ((code, seconds, out),) = runner.get(1)
    ev = load(out, "spectrum.json")["eigenvalues"]
    rel = [abs(v - e) / e for v, e in zip(ev, (3.0, 7.0, 11.0, 15.0))]
    ok = code == 0 and len(ev) == 4 and max(rel) < CALIBRATION_RTOL and seconds < CALIBRATION_SECONDS
    verdicts.record(1, ok, f"max rel err {max(rel):.2e} (< {CALIBRATION_RTOL:g}), {seconds:.2f} s (< 30 s)")
    assert ok


def test_criterion_2_temporal_properties(runner, verdicts):
    ((code, _, out),) = runner.get(2)
    rec = load(out, "spectrum.json")
    ev = np.array(rec["eigenvalues"])
    p = rec["problem"]["p"]
    t, w = read_eigenfunctions(out / "eigenfunctions.csv")

    positive = bool(np.all(ev > 0))
    gaps = float(np.min(np.diff(ev) / ev[1:]))
    gram_defect = float(np.max(np.abs(requadrature_gram(t, w, p) - np.eye(ev.size))))
    signs = [int(np.count_nonzero(np.diff(np.sign(col[1:-1])) != 0)) for col in w.T]
    ref = shooting_eigenvalue(rec["problem"]["a"], rec["problem"]["c"], p, 0, rec["mesh"]["t_max"])
    shoot_rel = abs(ev[0] - ref) / ref

    ok = (code == 0 and ev.size == 10 and positive and gaps > GAP_RTOL and gram_defect < GRAM_TOL
          and signs == list(range(10)) and shoot_rel < SHOOTING_RTOL)
    verdicts.record(2, ok, f"min gap {gaps:.2e}, Gram defect {gram_defect:.1e}, signs {signs == list(range(10))}, "
                           f"shooting rel err {shoot_rel:.1e}")
    assert ok


def test_criterion_3_scaling_covariance(runner, verdicts):
    ((code, _, out),) = runner.get(3)
    rec = load(out, "sweep.json")
    worst, checked = 0.0, set()
    for e in rec["entries"]:
        n, lam = e["n"], e["lambda_abs"]
        unit = rec["unit"][str(n)]
        for i in range(6):
            v = e["eigenvalues"][i]
            worst = max(worst, abs(v - lam ** (1.0 - 1.0 / n) * unit[i]) / v)
        checked.add((n, lam))
    complete = checked == {(n, lam) for n in (3, 4) for lam in (0.5, 2.0, 16.0)}
    ok = code == 0 and complete and worst < SCALING_RTOL
    verdicts.record(3, ok, f"max rel deviation {worst:.2e} (< {SCALING_RTOL:g}) over 6 (n, |Lambda|) pairs, i <= 5")
    assert ok


def test_criterion_4_plane_wave(runner, verdicts):
    ((code, _, out),) = runner.get(4)
    pw = load(out, "spatial_check.json")["plane_wave"]
    flat = SpatialChart.flat(3)
    grid = BoxGrid((64,) * 3, 2 * math.pi / 64)
    extra = [plane_wave_residual(flat, np.array(k, float), grid).residual
             for k in ((1, 0, 0), (0, 0, 31), (-12, 20, 5), (31, 31, -31), (32, 1, 2))]
    worst = max([pw["residual"]] + extra)
    slope = pw["refinement"]["slope"]
    ok = code == 0 and worst < PLANE_WAVE_TOL and abs(slope - 2.0) <= CONSISTENCY_BAND
    verdicts.record(4, ok, f"max residual {worst:.1e} on 64^3 (< 1e-12), consistency slope {slope:.4f} (2 +- 0.2)")
    assert ok


def test_criterion_5_quasimode_decay(runner, verdicts):
    results = runner.get(5)
    seconds = sum(r[1] for r in results)
    slopes, diagonal = [], True
    for code, _, out in results:
        assert code == 0
        rec = load(out, "quasimode.json")
        sweep = rec["sweeps"][0]
        eps = [c["epsilon"] for c in sweep["certificates"]]
        slopes.append(float(np.polyfit(np.log([50, 100, 200, 400, 800]), np.log(eps), 1)[0]))
        fam = rec["weyl_family"]
        diagonal &= len(fam["members"]) == 4 and fam["gram_offdiagonal_max"] == 0.0
    ok = all(abs(s + 1.0) <= QUASIMODE_BAND for s in slopes) and diagonal and seconds < QUASIMODE_SECONDS
    verdicts.record(5, ok, f"slopes V=0 {slopes[0]:.4f}, V=(1+r^2)^-1 {slopes[1]:.4f} (-1 +- 0.1), "
                           f"Gram diagonal {diagonal}, {seconds:.2f} s (< 60 s)")
    assert ok


def test_criterion_6_synthesis(runner, verdicts):
    ((code, _, out),) = runner.get(6)
    rows = load(out, "synthesis.json")["products"]
    slopes = [float(np.polyfit(np.log(r["max_step"]), np.log(r["residuals"]), 1)[0]) for r in rows]
    ratios = [r["mismatched_residual"] / r["residual"] for r in rows]
    ok = (code == 0 and len(rows) == 3 and all(abs(s - 2.0) <= SYNTHESIS_BAND for s in slopes)
          and min(ratios) >= MISMATCH_RATIO)
    verdicts.record(6, ok, f"slopes {', '.join(f'{s:.4f}' for s in slopes)} (2 +- 0.15), "
                           f"min mismatch ratio {min(ratios):.2e} (>= 100)")
    assert ok


EXPECTED_FIXTURES = {
    "flat": [], "inverse-r": [], "slow-conformal": [], "rational": [], "schwarzschild": [], "projector": [],
    "power-growth": ["3.6", "3.8"], "scaled": ["3.6"], "anisotropic": ["3.6"], "oscillating": ["3.7"],
    "constant-potential": ["3.9"], "log-potential": ["3.9"],
}


def test_criterion_7_fixture_suite(runner, verdicts):
    ((code, _, out),) = runner.get(7)
    charts = load(out, "spatial_check.json")["fixtures"]["charts"]
    got = {c["name"]: (c["report"]["pass"], c["report"]["violated"]) for c in charts}
    wrong = [name for name, viol in EXPECTED_FIXTURES.items()
             if got.get(name) != (not viol, viol)]
    passing = sum(1 for v in got.values() if v[0])
    ok = code == 0 and not wrong and passing == 6 and len(got) == 12
    verdicts.record(7, ok, f"{passing} conforming pass, {len(got) - passing} violating fail, "
                           f"misreported {wrong or 'none'}")
    assert ok


def test_criterion_8_determinism(runner, verdicts):
    differing = []
    for criterion in sorted(RUNS):
        first = runner.get(criterion)
        for j, (_, _, out) in enumerate(first):
            before = {p.name: p.read_bytes() for p in sorted(out.glob("*.json"))}
            runner.execute(criterion, j)
            after = {p.name: p.read_bytes() for p in sorted(out.glob("*.json"))}
            if not before or before != after:
                differing.append(f"{criterion}-{j}")
    ok = not differing
    verdicts.record(8, ok, f"reran {sum(len(v) for v in RUNS.values())} runs of criteria 1-7, "
                           f"byte-identical JSON: {'all' if ok else differing}")
    assert ok
