import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from qdev.errors import PreconditionError, UnsupportedChartError
from qdev.spatial import (CONFORMING_CHARTS, VIOLATING_CHARTS, BoxGrid, MetricFamily, Potential, RadialGrid,
                          SpatialChart, SpatialField, apply_A, chart_fixture, chart_from_dict,
                          default_probe_radii, discrete_symbol, first_zero, metric_derivatives,
                          plane_wave, plane_wave_residual, probe_directions,
                          radial_generalized_eigenfunction, validate_asymptotic_flatness, wavevector_for)

FLAT = SpatialChart.flat(3)
RADII = [10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0]


def box(size=16, h=0.1, n=3):
    return BoxGrid((size,) * n, h)


class TestChart:
    def test_descriptor_round_trip(self):
        for chart in CONFORMING_CHARTS:
            again = chart_from_dict(chart.to_dict())
            assert again == chart

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            chart_from_dict({"n": 3, "colour": "blue"})

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            MetricFamily("wormhole")
        with pytest.raises(ValueError):
            Potential("yukawa")

    def test_rates_positive(self):
        with pytest.raises(ValueError):
            MetricFamily("conformal", {}, 0.0)

    def test_dimension(self):
        with pytest.raises(ValueError):
            SpatialChart(n=2)

    def test_fixture_lookup(self):
        assert chart_fixture("inverse-r").metric.family == "conformal"
        with pytest.raises(KeyError):
            chart_fixture("nope")

    def test_metric_symmetric_positive(self):
        x = 50.0 * probe_directions(3)
        for chart in CONFORMING_CHARTS:
            g = chart.metric.matrix(x)
            assert np.allclose(g, np.swapaxes(g, -1, -2))
            assert np.min(np.linalg.eigvalsh(g)) > 0


class TestApplyA:
    def test_constant(self):
        v = SpatialField(box(), np.ones((16, 16, 16), dtype=complex))
        assert np.all(apply_A(FLAT, v).values == 0)

    def test_radial_quadratic(self):
        grid = RadialGrid(1.0, 0.01, 200)
        v = SpatialField(grid, grid.nodes**2 + 0j)
        np.testing.assert_allclose(apply_A(FLAT, v).values, -12.0, rtol=1e-10)

    @pytest.mark.parametrize("k", [(0.3, 0.0, 0.0), (1.0, -2.0, 0.5), (3.0, 3.0, 3.0)])
    def test_plane_wave_symbol(self, k):
        grid = box()
        v = plane_wave(grid, k)
        av = apply_A(FLAT, v)
        lam = discrete_symbol(k, grid.spacing, 3)
        np.testing.assert_allclose(av.values, lam * v.interior_values(), rtol=0, atol=1e-11 * lam)

    def test_incompatible_grid(self):
        with pytest.raises(ValueError):
            apply_A(FLAT, SpatialField(BoxGrid((8, 8), 0.1), np.zeros((8, 8))))

    def test_curved_box_unsupported(self):
        chart = chart_fixture("inverse-r")
        with pytest.raises(UnsupportedChartError):
            apply_A(chart, SpatialField(box(8), np.zeros((8, 8, 8))))

    def test_non_radial_metric_on_radial_grid(self):
        chart = chart_fixture("anisotropic")
        with pytest.raises(UnsupportedChartError):
            apply_A(chart, SpatialField(RadialGrid(2.0, 0.1, 10), np.zeros(10)))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        grid = BoxGrid((12, 12, 12), 0.2)
        vals = []
        for _ in range(2):
            u = np.zeros(grid.shape)
            u[2:-2, 2:-2, 2:-2] = rng.standard_normal((8, 8, 8))
            vals.append(SpatialField(grid, u))
        chart = SpatialChart.flat(3, Potential("rational"))
        au, av = apply_A(chart, vals[0]).values, apply_A(chart, vals[1]).values
        lhs = np.sum(au * vals[1].interior_values())
        rhs = np.sum(vals[0].interior_values() * av)
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), np.sum(np.abs(au * vals[1].interior_values())))

    def test_conformal_laplace_beltrami_oracle(self):
        # -Laplace_g v for g = f delta from det/inverse metric, computed symbolically
        r = sp.symbols("r", positive=True)
        n = 3
        f = 1 + 1 / r
        v = sp.exp(-((r - 5) ** 2))
        sqrtg = f ** sp.Rational(n, 2)
        lap = sp.diff(sqrtg / f * r ** (n - 1) * sp.diff(v, r), r) / (sqrtg * r ** (n - 1))
        exact = sp.lambdify(r, (n - 1) * (-lap), "numpy")
        chart = chart_fixture("inverse-r")
        chart = SpatialChart(3, chart.metric, Potential(), 1.0, "no-V")
        errs = []
        for h in (0.02, 0.01, 0.005):
            grid = RadialGrid.covering(1.5, 9.0, h)
            out = apply_A(chart, SpatialField(grid, sp.lambdify(r, v, "numpy")(grid.nodes) + 0j))
            errs.append(np.max(np.abs(out.values - exact(out.grid.nodes))))
        assert errs[-1] < 1e-3
        assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.1)
        assert math.log2(errs[1] / errs[2]) == pytest.approx(2.0, abs=0.1)


class TestPlaneWave:
    def test_zero_mode(self):
        res = plane_wave_residual(FLAT, np.zeros(3), box())
        assert res.lambda_h == 0.0 and res.residual == 0.0

    def test_continuum_and_taylor_bound(self):
        k = np.array([1.0, 1.0, 0.0])
        grid = box(16, 0.05)
        res = plane_wave_residual(FLAT, k, grid)
        assert res.continuum == pytest.approx(4.0)
        assert abs(res.lambda_h - 4.0) <= 4.0 * (1.0 * grid.spacing) ** 2 / 12
        assert res.field.eigenvalue == pytest.approx(4.0)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(-31, 31), min_size=3, max_size=3).filter(any))
    def test_grid_aligned_identity(self, mode):
        n = 32
        grid = BoxGrid((n, n, n), 2 * math.pi / n)
        res = plane_wave_residual(FLAT, np.array(mode, float), grid)
        assert res.residual < 1e-12

    def test_64_cubed(self):
        grid = BoxGrid((64,) * 3, 2 * math.pi / 64)
        assert plane_wave_residual(FLAT, np.array([1.0, 2.0, 3.0]), grid).residual < 1e-12

    def test_consistency_order(self):
        k = np.array([1.0, 2.0, 3.0])
        hs = [2 * math.pi / s for s in (16, 32, 64, 128)]
        errs = [abs(discrete_symbol(k, h, 3) - 2 * 14.0) for h in hs]
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert abs(slope - 2.0) < 0.2

    def test_nonflat(self):
        with pytest.raises(UnsupportedChartError):
            plane_wave_residual(chart_fixture("inverse-r"), np.ones(3), box(8))
        with pytest.raises(UnsupportedChartError):
            plane_wave_residual(SpatialChart.flat(3, Potential("rational")), np.ones(3), box(8))

    def test_wavevector_for(self):
        k = wavevector_for(4.0, 3, (1, 1, 0))
        assert 2 * np.sum(k * k) == pytest.approx(4.0)
        with pytest.raises(ValueError):
            wavevector_for(-1.0, 3)


class TestFlatness:
    def test_flat_exact_zero(self):
        rep = validate_asymptotic_flatness(FLAT, RADII)
        assert rep.passed
        assert max(rep.metric_deviation) == 0 and max(rep.metric_derivative) == 0 and max(rep.potential) == 0

    def test_inverse_r(self):
        chart = chart_fixture("inverse-r")
        assert chart.potential(np.array([3.0]))[0] == pytest.approx(0.1)
        assert validate_asymptotic_flatness(chart, RADII).passed

    def test_power_growth(self):
        rep = validate_asymptotic_flatness(chart_fixture("power-growth"), RADII)
        assert not rep.passed and "3.6" in rep.violated

    @pytest.mark.parametrize("chart", CONFORMING_CHARTS, ids=lambda c: c.name)
    def test_conforming_fixtures(self, chart):
        rep = validate_asymptotic_flatness(chart, default_probe_radii(chart))
        assert rep.passed, rep.violated

    @pytest.mark.parametrize("chart,expected", VIOLATING_CHARTS, ids=lambda c: getattr(c, "name", ""))
    def test_violating_fixtures(self, chart, expected):
        rep = validate_asymptotic_flatness(chart, default_probe_radii(chart))
        assert not rep.passed
        assert rep.violated == expected

    def test_radius_inside(self):
        with pytest.raises(ValueError):
            validate_asymptotic_flatness(chart_fixture("schwarzschild"), [1.0, 10.0, 100.0, 1000.0])

    def test_too_few_radii(self):
        with pytest.raises(ValueError):
            validate_asymptotic_flatness(FLAT, [10.0, 100.0, 1000.0])

    def test_to_dict(self):
        d = validate_asymptotic_flatness(FLAT, RADII).to_dict()
        assert d["pass"] is True and d["violated"] == []

    @pytest.mark.parametrize("family,params,rate", [
        ("conformal", {"amplitude": 1.0}, 1.0),
        ("conformal", {"amplitude": 2.0}, 0.5),
        ("rational", {"amplitude": 5.0}, 2.0),
        ("schwarzschild", {"mass": 2.0}, 1.0),
    ])
    def test_metric_derivatives_symbolic(self, family, params, rate):
        xs = sp.symbols("x0:3", real=True)
        r = sp.sqrt(sum(x * x for x in xs))
        exprs = {
            "conformal": 1 + params.get("amplitude", 1) * r ** (-sp.nsimplify(rate)),
            "rational": 1 + params.get("amplitude", 1) / (1 + r * r),
            "schwarzschild": (1 + params.get("mass", 1) / (2 * r)) ** 4,
        }
        f = exprs[family]
        grads = [sp.lambdify(xs, sp.diff(f, x), "numpy") for x in xs]
        metric = MetricFamily(family, params, rate)
        pts = 7.0 * probe_directions(3)[:5] + np.array([0.3, -0.2, 0.1])
        dg = metric_derivatives(metric, pts)
        for p, d in zip(pts, dg):
            for k in range(3):
                expect = float(grads[k](*p)) * np.eye(3)
                np.testing.assert_allclose(d[:, :, k], expect, rtol=1e-12, atol=1e-15)

    def test_projector_derivative_symbolic(self):
        xs = sp.symbols("x0:3", real=True)
        r = sp.sqrt(sum(x * x for x in xs))
        g = sp.Matrix(3, 3, lambda i, j: (1 if i == j else 0) + 2 * r ** -3 * xs[i] * xs[j])
        metric = MetricFamily("projector", {"amplitude": 2.0}, 1.0)
        p = np.array([3.0, -4.0, 1.5])
        dg = metric_derivatives(metric, p[None])[0]
        for k in range(3):
            expect = np.array(sp.diff(g, xs[k]).subs(dict(zip(xs, p))), dtype=float)
            np.testing.assert_allclose(dg[:, :, k], expect, rtol=1e-12, atol=1e-15)


class TestRadialProfile:
    def test_free_s_wave(self):
        fld, sol, report = radial_generalized_eigenfunction(FLAT, 1.0, 50.0)
        r = np.linspace(1e-3, 50.0, 2001)
        np.testing.assert_allclose(sol.sol(r)[0] * r, np.sin(r), atol=1e-8)
        assert fld.eigenvalue == 2.0
        assert report.bounded

    def test_bounded_with_potential(self):
        chart = SpatialChart.flat(3, Potential("rational"))
        _, _, report = radial_generalized_eigenfunction(chart, 1.0, 1000.0)
        assert report.bounded
        assert report.sup_abs < 10.0

    def test_tightened_tolerance_oracle(self):
        chart = SpatialChart.flat(3, Potential("rational"))
        _, sol, _ = radial_generalized_eigenfunction(chart, 1.0, 200.0)
        _, ref, _ = radial_generalized_eigenfunction(chart, 1.0, 200.0, rtol=1e-13, method="RK45")
        r = np.linspace(1.0, 200.0, 500)
        np.testing.assert_allclose(sol.sol(r)[0], ref.sol(r)[0], atol=1e-7)

    def test_zero_scaling(self):
        _, s1, _ = radial_generalized_eigenfunction(FLAT, 1.0, 10.0)
        _, s2, _ = radial_generalized_eigenfunction(FLAT, 2.0, 10.0)
        z1 = first_zero(s1, 0.5, 5.0)
        z2 = first_zero(s2, 0.5, 5.0)
        assert z1 == pytest.approx(math.pi, rel=1e-8)
        assert z2 == pytest.approx(z1 / 2, rel=1e-8)

    def test_growing_potential(self):
        chart = SpatialChart.flat(3, Potential("log"))
        with pytest.raises(PreconditionError):
            radial_generalized_eigenfunction(chart, 1.0, 100.0)

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            radial_generalized_eigenfunction(FLAT, 0.0, 10.0)
