"""The spatial operator ``A = (n-1)(-Laplace + V)`` on asymptotically Euclidean charts.

Charts are described by closed-form metric and potential families (JSON
descriptors, see :func:`chart_from_dict`).  The module validates the decay
conditions at infinity, applies ``A`` by second-order central differences on
flat box grids and radial grids, and produces the two kinds of generalized
eigenfunctions used downstream: discrete plane waves and s-wave scattering
profiles.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import PreconditionError, UnsupportedChartError
from .numerics import _legendre, loglog_slope

CONDITIONS = ("3.6", "3.7", "3.8", "3.9")
RADIAL_METRICS = ("flat", "conformal", "rational", "power", "scaled", "schwarzschild")


# -- metric and potential families -------------------------------------------------

@dataclass(frozen=True)
class MetricFamily:
    """Closed-form metric ``g_ij(x)`` with a declared decay rate ``rate``.

    family            g_ij
    ----------------  ------------------------------------------------------
    flat              delta_ij
    conformal         (1 + amplitude r^-rate) delta_ij
    rational          (1 + amplitude / (1 + r^2)) delta_ij
    schwarzschild     (1 + mass / (2r))^4 delta_ij
    power             r^exponent delta_ij
    scaled            factor delta_ij
    oscillating       (1 + amplitude sin(omega x_1 r) / r) delta_ij
    projector         delta_ij + amplitude r^-rate x_i x_j / r^2
    anisotropic       delta_ij + amplitude (x_1 / r)^2 e_n e_n
    """

    family: str = "flat"
    params: dict = field(default_factory=dict)
    rate: float = 1.0

    def __post_init__(self):
        if self.family not in _METRIC_FACTORS and self.family not in ("projector", "anisotropic"):
            raise ValueError(f"unknown metric family {self.family!r}")
        if not self.rate > 0:
            raise ValueError("declared metric decay rate must be positive")

    @property
    def is_flat(self) -> bool:
        return self.family == "flat"

    @property
    def is_radial_conformal(self) -> bool:
        return self.family in RADIAL_METRICS

    def conformal_factor(self, r):
        """``f(r)`` with ``g = f delta`` (radial conformal families only)."""
        if not self.is_radial_conformal:
            raise UnsupportedChartError(f"metric family {self.family!r} is not radially conformal")
        return _METRIC_FACTORS[self.family](r, self._params())

    def _params(self) -> dict:
        return {"rate": self.rate, **self.params}

    def matrix(self, x):
        """Metric components at points ``x`` of shape (..., n); complex-step safe."""
        x = np.asarray(x)
        n = x.shape[-1]
        r = np.sqrt(np.sum(x * x, axis=-1))
        eye = np.eye(n)
        if self.family in _METRIC_FACTORS and self.family != "oscillating":
            f = _METRIC_FACTORS[self.family](r, self._params())
            return f[..., None, None] * eye
        if self.family == "oscillating":
            amp = self.params.get("amplitude", 1.0)
            om = self.params.get("omega", 1.0)
            f = 1.0 + amp * np.sin(om * x[..., 0] * r) / r
            return f[..., None, None] * eye
        if self.family == "projector":
            amp = self.params.get("amplitude", 1.0)
            xx = x[..., :, None] * x[..., None, :]
            return eye + (amp * r ** (-self.rate - 2.0))[..., None, None] * xx
        amp = self.params.get("amplitude", 0.5)
        g = np.broadcast_to(eye, x.shape[:-1] + (n, n)).astype(x.dtype)
        g[..., n - 1, n - 1] = 1.0 + amp * (x[..., 0] / r) ** 2
        return g

    def to_dict(self) -> dict:
        return {"family": self.family, "rate": self.rate, **self.params}


def _conformal(r, p):
    return 1.0 + p.get("amplitude", 1.0) * r ** (-p.get("rate", 1.0))


_METRIC_FACTORS = {
    "flat": lambda r, p: np.ones_like(r),
    "conformal": _conformal,
    "rational": lambda r, p: 1.0 + p.get("amplitude", 1.0) / (1.0 + r * r),
    "schwarzschild": lambda r, p: (1.0 + p.get("mass", 1.0) / (2.0 * r)) ** 4,
    "power": lambda r, p: r ** p.get("exponent", 0.1),
    "scaled": lambda r, p: p.get("factor", 2.0) * np.ones_like(r),
    "oscillating": None,
}


@dataclass(frozen=True)
class Potential:
    """Radial lumped potential ``V(r)`` with a declared decay rate.

    family        V(r)
    ------------  ----------------------------
    zero          0
    rational      amplitude / (1 + r^2)
    power         amplitude r^-rate
    exponential   amplitude exp(-r)
    constant      value
    log           amplitude log(1 + r)
    """

    family: str = "zero"
    params: dict = field(default_factory=dict)
    rate: float = 2.0

    def __post_init__(self):
        if self.family not in _POTENTIALS:
            raise ValueError(f"unknown potential family {self.family!r}")
        if not self.rate > 0:
            raise ValueError("declared potential decay rate must be positive")

    @property
    def is_zero(self) -> bool:
        return self.family == "zero"

    def __call__(self, r):
        return _POTENTIALS[self.family](np.asarray(r, dtype=float), self.params, self.rate)

    def to_dict(self) -> dict:
        return {"family": self.family, "rate": self.rate, **self.params}


_POTENTIALS = {
    "zero": lambda r, p, q: np.zeros_like(r),
    "rational": lambda r, p, q: p.get("amplitude", 1.0) / (1.0 + r * r),
    "power": lambda r, p, q: p.get("amplitude", 1.0) * r ** (-q),
    "exponential": lambda r, p, q: p.get("amplitude", 1.0) * np.exp(-r),
    "constant": lambda r, p, q: np.full_like(r, p.get("value", 1.0)),
    "log": lambda r, p, q: p.get("amplitude", 1.0) * np.log1p(r),
}


@dataclass(frozen=True)
class SpatialChart:
    n: int = 3
    metric: MetricFamily = field(default_factory=MetricFamily)
    potential: Potential = field(default_factory=Potential)
    inner_radius: float = 1.0
    name: str = ""

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("spatial dimension must be >= 3")
        if not self.inner_radius >= 0:
            raise ValueError("inner radius must be non-negative")

    @classmethod
    def flat(cls, n: int = 3, potential: Optional[Potential] = None, inner_radius: float = 1.0) -> "SpatialChart":
        return cls(n, MetricFamily(), potential or Potential(), inner_radius, "flat")

    @property
    def is_flat(self) -> bool:
        return self.metric.is_flat

    def to_dict(self) -> dict:
        return {"n": self.n, "metric": self.metric.to_dict(), "potential": self.potential.to_dict(),
                "inner_radius": self.inner_radius, "name": self.name}


def chart_from_dict(d: dict) -> SpatialChart:
    """Build a chart from a JSON descriptor.

    ``{"n": 3, "metric": {"family": "conformal", "amplitude": 1, "rate": 1},
    "potential": {"family": "rational", "amplitude": 1, "rate": 2},
    "inner_radius": 1}``
    """
    allowed = {"n", "metric", "potential", "inner_radius", "name"}
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown chart keys: {sorted(unknown)}")

    def split(spec, default_rate):
        spec = dict(spec or {})
        family = spec.pop("family", None) or ("flat" if default_rate == 1.0 else "zero")
        rate = float(spec.pop("rate", default_rate))
        return family, spec, rate

    mf, mp, mr = split(d.get("metric"), 1.0)
    pf, pp, pr = split(d.get("potential"), 2.0)
    return SpatialChart(int(d.get("n", 3)), MetricFamily(mf, mp, mr), Potential(pf, pp, pr),
                        float(d.get("inner_radius", 1.0)), str(d.get("name", "")))


# -- grids and fields --------------------------------------------------------------

@dataclass(frozen=True)
class BoxGrid:
    """Uniform box grid ``origin + spacing * index``."""

    shape: tuple
    spacing: float
    origin: tuple = ()

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError("grid spacing must be positive")
        if any(s < 1 for s in self.shape):
            raise ValueError("grid shape must be positive")
        if not self.origin:
            object.__setattr__(self, "origin", (0.0,) * len(self.shape))
        if len(self.origin) != len(self.shape):
            raise ValueError("origin and shape dimensions differ")

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def axes(self):
        return [o + self.spacing * np.arange(s) for o, s in zip(self.origin, self.shape)]

    def interior(self) -> "BoxGrid":
        return BoxGrid(tuple(s - 2 for s in self.shape), self.spacing,
                       tuple(o + self.spacing for o in self.origin))

    def coarsen(self) -> "BoxGrid":
        return BoxGrid(tuple((s + 1) // 2 for s in self.shape), 2 * self.spacing, self.origin)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial nodes ``r0 + spacing * j``."""

    r0: float
    spacing: float
    size: int

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError("grid spacing must be positive")
        if self.r0 < 0 or self.size < 1:
            raise ValueError("radial grid needs r0 >= 0 and at least one node")

    @classmethod
    def covering(cls, lo: float, hi: float, spacing: float) -> "RadialGrid":
        size = int(math.ceil((hi - lo) / spacing)) + 1
        return cls(lo, spacing, size)

    @property
    def nodes(self) -> np.ndarray:
        return self.r0 + self.spacing * np.arange(self.size)

    def interior(self) -> "RadialGrid":
        return RadialGrid(self.r0 + self.spacing, self.spacing, self.size - 2)


@dataclass(frozen=True)
class SpatialField:
    """Complex samples on a box or radial grid.

    ``eigenvalue`` is the certified A-eigenvalue when the field is a
    (discrete) generalized eigenfunction, with its relative ``residual``.
    """

    grid: object
    values: np.ndarray
    eigenvalue: Optional[float] = None
    residual: Optional[float] = None

    def __post_init__(self):
        v = np.asarray(self.values)
        expected = self.grid.shape if isinstance(self.grid, BoxGrid) else (self.grid.size,)
        if v.shape != tuple(expected):
            raise ValueError(f"field shape {v.shape} does not match grid {tuple(expected)}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")

    def scaled(self, factor) -> "SpatialField":
        return SpatialField(self.grid, self.values * factor, self.eigenvalue, self.residual)

    def interior_values(self) -> np.ndarray:
        sl = tuple(slice(1, -1) for _ in range(np.ndim(self.values)))
        return self.values[sl]


def _radii(grid: BoxGrid):
    axes = grid.axes()
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.sqrt(sum(m * m for m in mesh))


def apply_A(chart: SpatialChart, fld: SpatialField) -> SpatialField:
    """``(n-1)(-Laplace_g v + V v)`` on the interior nodes of ``fld.grid``.

    Box grids need a flat chart whose dimension matches the grid.  Radial
    grids treat ``v`` as spherically symmetric and support radially conformal
    metrics ``g = f(r) delta``, for which
    ``Laplace_g v = f^-1 (v'' + (n-1)/r v' + (n-2) f'/(2f) v')``.
    """
    n = chart.n
    grid = fld.grid
    v = np.asarray(fld.values)
    if isinstance(grid, BoxGrid):
        if grid.ndim != n:
            raise ValueError(f"box grid has dimension {grid.ndim}, chart has n={n}")
        if not chart.is_flat:
            raise UnsupportedChartError("box grids need a flat chart")
        if min(grid.shape) < 3:
            raise ValueError("box grid needs at least 3 nodes per axis")
        h2 = grid.spacing**2
        core = tuple(slice(1, -1) for _ in range(n))
        lap = np.zeros(tuple(s - 2 for s in grid.shape), dtype=np.result_type(v, float))
        for d in range(n):
            lo = list(core)
            hi = list(core)
            lo[d] = slice(0, -2)
            hi[d] = slice(2, None)
            lap += (v[tuple(lo)] - 2.0 * v[core] + v[tuple(hi)]) / h2
        out = -lap
        if not chart.potential.is_zero:
            out = out + chart.potential(_radii(grid.interior())) * v[core]
        return SpatialField(grid.interior(), (n - 1) * out)
    if isinstance(grid, RadialGrid):
        if not chart.metric.is_radial_conformal:
            raise UnsupportedChartError(f"metric family {chart.metric.family!r} has no radial reduction")
        if grid.size < 3:
            raise ValueError("radial grid needs at least 3 nodes")
        r = grid.interior().nodes
        if np.any(r <= 0):
            raise ValueError("radial operator needs r > 0 on interior nodes")
        h = grid.spacing
        d1 = (v[2:] - v[:-2]) / (2 * h)
        d2 = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h)
        if chart.is_flat:
            lap = d2 + (n - 1) / r * d1
        else:
            f, df = _factor_and_derivative(chart.metric, r)
            lap = (d2 + ((n - 1) / r + 0.5 * (n - 2) * df / f) * d1) / f
        out = -lap + chart.potential(r) * v[1:-1]
        return SpatialField(grid.interior(), (n - 1) * out)
    raise ValueError(f"unsupported grid type {type(grid).__name__}")


def _factor_and_derivative(metric: MetricFamily, r):
    step = 1e-20 * np.maximum(1.0, np.abs(r))
    fz = metric.conformal_factor(r + 1j * step)
    return np.real(fz), np.imag(fz) / step


# -- plane waves -------------------------------------------------------------------

@dataclass(frozen=True)
class PlaneWaveResult:
    lambda_h: float
    residual: float
    continuum: float
    field: SpatialField


def discrete_symbol(k, spacing: float, n: int) -> float:
    """Eigenvalue of the central-difference ``A`` on ``exp(i k.x)``."""
    k = np.asarray(k, dtype=float)
    return float((n - 1) * np.sum(4.0 / spacing**2 * np.sin(0.5 * k * spacing) ** 2))


def plane_wave(grid: BoxGrid, k) -> SpatialField:
    k = np.asarray(k, dtype=float)
    if k.size != grid.ndim:
        raise ValueError("wavevector dimension does not match grid")
    phase = 0.0
    for kd, ax, d in zip(k, grid.axes(), range(grid.ndim)):
        shape = [1] * grid.ndim
        shape[d] = -1
        phase = phase + (kd * ax).reshape(shape)
    return SpatialField(grid, np.exp(1j * np.broadcast_to(phase, grid.shape)))


def plane_wave_residual(chart: SpatialChart, k, grid: BoxGrid) -> PlaneWaveResult:
    """Certify ``exp(i k.x)`` as a discrete generalized eigenfunction of ``A``.

    ``residual`` is ``max|A_h v - lambda_h v|`` on interior nodes divided by
    ``(n-1)|k|^2`` (left absolute for ``k = 0``).  The returned field carries
    the continuum value ``(n-1)|k|^2``, the spectral value it represents.
    """
    if not chart.is_flat or not chart.potential.is_zero:
        raise UnsupportedChartError("plane waves need a flat chart with V = 0")
    n = chart.n
    k = np.asarray(k, dtype=float)
    v = plane_wave(grid, k)
    lam = discrete_symbol(k, grid.spacing, n)
    av = apply_A(chart, v)
    err = float(np.max(np.abs(av.values - lam * v.interior_values())))
    cont = float((n - 1) * np.sum(k * k))
    rel = err / cont if cont > 0 else err
    return PlaneWaveResult(lam, rel, cont, SpatialField(grid, v.values, cont, rel))


def wavevector_for(lambda_a: float, n: int, direction=None) -> np.ndarray:
    """Wavevector with continuum A-eigenvalue ``(n-1)|k|^2 = lambda_a``."""
    if lambda_a < 0:
        raise ValueError("spectral value must be non-negative")
    d = np.ones(n) if direction is None else np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    return math.sqrt(lambda_a / (n - 1)) * d


# -- flatness validation -----------------------------------------------------------

@dataclass(frozen=True)
class FlatnessReport:
    passed: bool
    radii: tuple
    metric_deviation: tuple
    metric_derivative: tuple
    potential: tuple
    distance_ratio: tuple
    violated: tuple

    def to_dict(self) -> dict:
        return {"pass": self.passed, "radii": list(self.radii),
                "metric_deviation": list(self.metric_deviation),
                "metric_derivative": list(self.metric_derivative),
                "potential": list(self.potential),
                "distance_ratio": list(self.distance_ratio),
                "violated": list(self.violated)}


def probe_directions(n: int) -> np.ndarray:
    """The 26 unit directions of the 3x3x3 stencil, padded with zeros to ``n``."""
    dirs = [d for d in itertools.product((-1, 0, 1), repeat=3) if any(d)]
    out = np.zeros((len(dirs), n))
    out[:, :3] = np.array(dirs, dtype=float)
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def metric_derivatives(metric: MetricFamily, x) -> np.ndarray:
    """``g_ij,k`` at points ``x`` (..., n) by complex-step differentiation."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    step = 1e-20 * np.maximum(1.0, np.linalg.norm(x, axis=-1))[..., None]
    out = []
    for k in range(n):
        xz = x.astype(complex)
        xz[..., k] += 1j * step[..., 0]
        out.append(np.imag(metric.matrix(xz)) / step[..., None])
    return np.stack(out, axis=-1)


def radial_distance(metric: MetricFamily, direction, radius: float, inner_radius: float,
                    panels_per_decade: int = 64) -> float:
    """Length of the radial segment from the inner sphere to ``radius``, plus ``inner_radius``.

    Stands in for the geodesic distance to a base point in the compact core.
    """
    lo = max(inner_radius, 1e-12)
    if radius <= lo:
        return radius
    npan = max(1, int(math.ceil(panels_per_decade * math.log10(radius / lo))))
    edges = np.geomspace(lo, radius, npan + 1)
    x, w = _legendre(8)
    a, b = edges[:-1, None], edges[1:, None]
    s = (0.5 * (b - a) * x + 0.5 * (b + a)).ravel()
    ws = (0.5 * (b - a) * w).ravel()
    d = np.asarray(direction, dtype=float)
    g = metric.matrix(s[:, None] * d)
    speed = np.sqrt(np.einsum("i,sij,j->s", d, g, d).real)
    return inner_radius + float(np.sum(ws * speed))


def _envelope_ok(seq, radii, rate, rtol=1e-9, atol=1e-14) -> bool:
    s = np.asarray(seq, dtype=float)
    r = np.asarray(radii, dtype=float)
    if not np.all(np.isfinite(s)):
        return False
    if np.all(s <= atol):
        return True
    slack = rtol * np.abs(s[:-1]) + atol
    if np.any(s[1:] > s[:-1] + slack):
        return False
    c = max(s[0] * r[0] ** (rate / 2), s[1] * r[1] ** (rate / 2))
    return bool(np.all(s <= c * r ** (-rate / 2) * (1 + rtol) + atol))


def validate_asymptotic_flatness(chart: SpatialChart, probe_radii) -> FlatnessReport:
    """Probe the decay conditions on metric, its derivatives, distances and V.

    Every monitored sequence (max over 26 directions per radius) has to be
    non-increasing and stay below ``C r^(-q/2)``, ``C`` fitted on the first two
    radii, with ``q`` the declared rate.  The distance condition is checked on
    the increments of ``geodesic distance / |x|`` between consecutive radii.
    """
    radii = np.asarray(probe_radii, dtype=float)
    if radii.ndim != 1 or radii.size < 4:
        raise ValueError("need at least 4 probe radii")
    if np.any(np.diff(radii) <= 0):
        raise ValueError("probe radii must be strictly ascending")
    if np.any(radii <= chart.inner_radius):
        raise ValueError(f"probe radii must lie beyond inner_radius={chart.inner_radius}")

    n = chart.n
    dirs = probe_directions(n)
    eye = np.eye(n)
    dev, der, pot, ratio = [], [], [], []
    for rad in radii:
        x = rad * dirs
        g = chart.metric.matrix(x)
        if not np.allclose(g, np.swapaxes(g, -1, -2)):
            raise PreconditionError(f"metric not symmetric at r={rad}")
        if np.min(np.linalg.eigvalsh(g)) <= 0:
            raise PreconditionError(f"metric not positive definite at r={rad}")
        dev.append(float(np.max(np.abs(g - eye))))
        dg = metric_derivatives(chart.metric, x)
        der.append(float(np.max(np.sqrt(np.sum(dg * dg, axis=(-3, -2, -1))))))
        pot.append(float(np.max(np.abs(chart.potential(np.full(len(dirs), rad))))))
        ratio.append([radial_distance(chart.metric, d, rad, chart.inner_radius) / rad for d in dirs])
    ratio = np.array(ratio)
    incr = np.max(np.abs(np.diff(ratio, axis=0)), axis=1)

    q = chart.metric.rate
    violated = []
    if not _envelope_ok(dev, radii, q):
        violated.append("3.6")
    if not _envelope_ok(der, radii, q):
        violated.append("3.7")
    # a bounded core offset makes distance/|x| converge like 1/r at best
    if not _envelope_ok(incr, radii[1:], min(q, 1.0)):
        violated.append("3.8")
    if not _envelope_ok(pot, radii, chart.potential.rate):
        violated.append("3.9")
    return FlatnessReport(not violated, tuple(float(r) for r in radii), tuple(dev), tuple(der),
                          tuple(pot), tuple(float(x) for x in np.max(ratio, axis=1)), tuple(violated))


def default_probe_radii(chart: SpatialChart, count: int = 6) -> np.ndarray:
    base = max(chart.inner_radius, 1.0)
    return base * 10.0 ** np.arange(1, count + 1)


# -- radial scattering profiles ----------------------------------------------------

@dataclass(frozen=True)
class GrowthReport:
    sup_abs: float
    growth_exponent: float
    tail_amplitude: float
    amplitude_variation: float
    bounded: bool

    def to_dict(self) -> dict:
        return {"sup_abs": self.sup_abs, "growth_exponent": self.growth_exponent,
                "tail_amplitude": self.tail_amplitude,
                "amplitude_variation": self.amplitude_variation, "bounded": self.bounded}


def radial_generalized_eigenfunction(chart: SpatialChart, k: float, r_max: float, *,
                                     samples: int = 20001, rtol: float = 1e-11,
                                     method: str = "DOP853"):
    """s-wave solution of ``-v'' - (n-1)/r v' + V v = k^2 v`` with ``v(0) = 1``.

    The regular solution is started at a small radius from its Taylor
    expansion and integrated outward with an adaptive explicit Runge-Kutta
    method.  Its A-eigenvalue is ``(n-1) k^2``.  Returns the sampled field,
    the dense solution object and a growth report on
    ``r^((n-1)/2) sqrt(v^2 + (v'/k)^2)``.
    """
    if not k > 0:
        raise ValueError("wavenumber must be positive")
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    if not chart.is_flat:
        raise UnsupportedChartError("radial scattering profiles need a flat metric")
    V = chart.potential
    v0 = float(V(0.0))
    if not math.isfinite(v0):
        raise PreconditionError("potential must be finite at the origin")
    tail = np.abs(V(np.array([r_max / 4, r_max / 2, r_max])))
    if not V.is_zero and (np.any(np.diff(tail) > 1e-12 * tail[:-1]) or not np.all(np.isfinite(tail))):
        raise PreconditionError("potential grows at infinity")

    n = chart.n
    k2 = k * k
    r0 = min(1e-4 / k, 1e-4 * r_max)
    c2 = (v0 - k2) / (2 * n)
    y0 = [1.0 + c2 * r0 * r0, 2 * c2 * r0]

    def rhs(r, y):
        return [y[1], -(n - 1) / r * y[1] + (float(V(r)) - k2) * y[0]]

    sol = solve_ivp(rhs, (r0, r_max), y0, method=method, rtol=rtol, atol=1e-14 * 1e-3,
                    dense_output=True)
    if not sol.success:
        raise PreconditionError(f"radial integration failed: {sol.message}")
    grid = RadialGrid(0.0, r_max / (samples - 1), samples)
    r = grid.nodes
    vals = np.empty(samples)
    dv = np.empty(samples)
    vals[0], dv[0] = 1.0, 0.0
    y = sol.sol(np.maximum(r[1:], r0))
    vals[1:], dv[1:] = y
    fld = SpatialField(grid, vals.astype(complex), (n - 1) * k2, None)
    return fld, sol, growth_report(r, vals, dv, k, n)


def growth_report(r, v, dv, k, n) -> GrowthReport:
    amp = r ** ((n - 1) / 2) * np.sqrt(v * v + (dv / k) ** 2)
    half = r >= 0.5 * r[-1]
    quarter = r >= 0.75 * r[-1]
    running = np.maximum.accumulate(np.abs(v)[::-1])[::-1]
    sel = half & (running > 0)
    slope = loglog_slope(r[sel], running[sel]) if np.count_nonzero(sel) > 2 else 0.0
    tail = amp[quarter]
    variation = float((tail.max() - tail.min()) / tail.mean())
    sup = float(np.max(np.abs(v)))
    bounded = math.isfinite(sup) and slope <= 0.05 and variation < 0.1
    return GrowthReport(sup, float(slope), float(tail.mean()), variation, bool(bounded))


def first_zero(sol, r_lo: float, r_hi: float, scale_by_r: bool = True, samples: int = 20001) -> float:
    """First sign change of ``r v(r)`` (or ``v``) on ``[r_lo, r_hi]``, Brent-refined."""
    from scipy.optimize import brentq

    lo = max(r_lo, sol.t[0])
    r = np.linspace(lo, r_hi, samples)
    f = sol.sol(r)[0] * (r if scale_by_r else 1.0)
    idx = np.flatnonzero(np.sign(f[1:]) != np.sign(f[:-1]))
    if not idx.size:
        raise ValueError("no zero in range")
    i = idx[0]
    g = (lambda x: sol.sol(x)[0] * x) if scale_by_r else (lambda x: sol.sol(x)[0])
    return float(brentq(g, r[i], r[i + 1], xtol=1e-14))


# -- chart fixture library ---------------------------------------------------------

def _chart(name, metric, potential=None, inner=1.0):
    return SpatialChart(3, metric, potential or Potential(), inner, name)


CONFORMING_CHARTS = (
    _chart("flat", MetricFamily()),
    _chart("inverse-r", MetricFamily("conformal", {"amplitude": 1.0}, 1.0),
           Potential("rational", {"amplitude": 1.0}, 2.0)),
    _chart("slow-conformal", MetricFamily("conformal", {"amplitude": 2.0}, 0.5)),
    _chart("rational", MetricFamily("rational", {"amplitude": 5.0}, 2.0),
           Potential("exponential", {"amplitude": 3.0}, 4.0)),
    _chart("schwarzschild", MetricFamily("schwarzschild", {"mass": 2.0}, 1.0),
           Potential("power", {"amplitude": 1.0}, 3.0), 2.0),
    _chart("projector", MetricFamily("projector", {"amplitude": 2.0}, 1.0),
           Potential("power", {"amplitude": -0.5}, 1.0)),
)

VIOLATING_CHARTS = (
    (_chart("power-growth", MetricFamily("power", {"exponent": 0.1}, 1.0)), ("3.6", "3.8")),
    (_chart("scaled", MetricFamily("scaled", {"factor": 2.0}, 1.0)), ("3.6",)),
    (_chart("anisotropic", MetricFamily("anisotropic", {"amplitude": 0.5}, 1.0)), ("3.6",)),
    (_chart("oscillating", MetricFamily("oscillating", {"amplitude": 2.0, "omega": 1.0}, 1.0),
            inner=5.0), ("3.7",)),
    (_chart("constant-potential", MetricFamily(), Potential("constant", {"value": 1.0}, 2.0)), ("3.9",)),
    (_chart("log-potential", MetricFamily(), Potential("log", {"amplitude": 1.0}, 1.0)), ("3.9",)),
)


def chart_fixture(name: str) -> SpatialChart:
    for c in CONFORMING_CHARTS:
        if c.name == name:
            return c
    for c, _ in VIOLATING_CHARTS:
        if c.name == name:
            return c
    raise KeyError(f"no chart fixture named {name!r}")
