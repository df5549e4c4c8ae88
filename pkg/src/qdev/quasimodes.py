"""Compactly supported quasimodes of ``-Laplace + V - k^2`` on the exterior chart.

A quasimode is the radial annulus function ``bump((r - R)/W) exp(i k r)``.
Its relative residual decays like ``1/R`` when ``W`` grows with ``R``, and
annuli with disjoint supports are exactly orthogonal, so finite families of
any size span an almost-kernel of ``-Laplace + V - k^2``: every ``k^2 >= 0``
belongs to the essential spectrum.  The certificate for
``A = (n-1)(-Laplace + V)`` at ``(n-1) k^2`` is ``(n-1)`` times the one
measured here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import simpson

from .errors import CapacityError, PreconditionError, ResolutionError
from .spatial import (RadialGrid, SpatialChart, SpatialField, default_probe_radii,
                      validate_asymptotic_flatness, _factor_and_derivative)

MIN_POINTS_PER_WAVELENGTH = 32
PAD = 4


def _poly_bump(power):
    def f(s, deriv=0):
        s = np.asarray(s, dtype=float)
        u = 1.0 - s * s
        inside = np.abs(s) < 1.0
        if deriv == 0:
            out = u**power
        elif deriv == 1:
            out = -2.0 * power * s * u ** (power - 1)
        elif deriv == 2:
            out = -2.0 * power * u ** (power - 1) + 4.0 * power * (power - 1) * s * s * u ** (power - 2)
        else:
            raise ValueError("only derivatives up to order 2 are available")
        return np.where(inside, out, 0.0)

    return f


BUMPS = {"poly4": _poly_bump(4), "poly3": _poly_bump(3)}


@dataclass(frozen=True)
class QuasimodeSpec:
    k: float
    R: float
    W: float
    bump: str = "poly4"

    def __post_init__(self):
        if not self.k >= 0:
            raise ValueError("wavenumber must be non-negative")
        if not self.W > 0:
            raise ValueError("annulus half-width must be positive")
        if not self.R - self.W > 0:
            raise ValueError("annulus must stay away from the origin")
        if self.bump not in BUMPS:
            raise ValueError(f"unknown bump profile {self.bump!r}")

    def profile(self, r, deriv=0):
        """Derivative of the envelope ``bump((r-R)/W)`` with respect to ``r``."""
        s = (np.asarray(r, dtype=float) - self.R) / self.W
        return BUMPS[self.bump](s, deriv) / self.W**deriv

    def to_dict(self) -> dict:
        return {"k": self.k, "R": self.R, "W": self.W, "bump": self.bump}


@dataclass(frozen=True)
class ResidualCertificate:
    """``epsilon = ||(-Laplace + V - k^2) v|| / ||v||`` with its parts.

    ``components`` are the relative norms of the envelope curvature, the
    envelope-phase cross term, the geometric ``(n-1)/r`` term, the potential
    term and (for curved charts) the metric correction.
    """

    spec: QuasimodeSpec
    n: int
    epsilon: float
    components: dict = field(default_factory=dict)

    @property
    def quadrature_sum(self) -> float:
        return math.sqrt(sum(c * c for c in self.components.values()))

    def for_operator_A(self) -> float:
        """Certificate for ``A = (n-1)(-Laplace + V)`` at ``(n-1) k^2``."""
        return (self.n - 1) * self.epsilon

    def to_dict(self) -> dict:
        return {**self.spec.to_dict(), "n": self.n, "epsilon": self.epsilon,
                "breakdown": dict(self.components)}


def quasimode_grid(spec: QuasimodeSpec, points_per_wavelength: int = 64,
                   min_points: int = 4096) -> RadialGrid:
    h = 2.0 * spec.W / min_points
    if spec.k > 0:
        h = min(h, 2.0 * math.pi / (spec.k * points_per_wavelength))
    lo = spec.R - spec.W - PAD * h
    return RadialGrid.covering(lo, spec.R + spec.W + PAD * h, h)


def _require_valid_chart(chart: SpatialChart):
    report = validate_asymptotic_flatness(chart, default_probe_radii(chart))
    if not report.passed:
        raise PreconditionError(f"chart fails asymptotic flatness: violates {report.violated}")


def build_quasimode(spec: QuasimodeSpec, chart: SpatialChart, grid: Optional[RadialGrid] = None, *,
                    validate: bool = True) -> SpatialField:
    """Sample ``bump((r-R)/W) exp(ikr)`` on a radial grid; exactly zero off the annulus."""
    if spec.R - spec.W <= chart.inner_radius:
        raise ValueError(f"annulus [{spec.R - spec.W}, {spec.R + spec.W}] meets the compact "
                         f"region r <= {chart.inner_radius}")
    if validate:
        _require_valid_chart(chart)
    if grid is None:
        grid = quasimode_grid(spec)
    r = grid.nodes
    inside = np.abs(r - spec.R) < spec.W
    vals = np.zeros(r.size, dtype=complex)
    vals[inside] = spec.profile(r[inside]) * np.exp(1j * spec.k * r[inside])
    return SpatialField(grid, vals)


_D1 = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
_D2 = np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / 180.0


def _derivs(v, h):
    """Sixth-order central first and second differences (zero padding outside)."""
    vp = np.concatenate((np.zeros(3, dtype=v.dtype), v, np.zeros(3, dtype=v.dtype)))
    d1 = np.zeros_like(v)
    d2 = np.zeros_like(v)
    for j in range(7):
        seg = vp[j: j + v.size]
        d1 = d1 + _D1[j] * seg
        d2 = d2 + _D2[j] * seg
    return d1 / h, d2 / (h * h)


def quasimode_residual(v: SpatialField, spec: QuasimodeSpec, chart: SpatialChart, *,
                       dimension: Optional[int] = None) -> ResidualCertificate:
    """Measure the relative residual of a sampled quasimode.

    Derivatives come from sixth-order differences of the samples; norms use
    Simpson's rule with the volume element ``f^(n/2) r^(n-1) dr``.
    ``dimension=1`` gives the one-dimensional analogue (no geometric term,
    volume element ``dr``).
    """
    grid = v.grid
    if not isinstance(grid, RadialGrid):
        raise ValueError("quasimodes live on radial grids")
    n = chart.n if dimension is None else dimension
    h = grid.spacing
    if spec.k > 0 and 2.0 * math.pi / (spec.k * h) < MIN_POINTS_PER_WAVELENGTH:
        raise ResolutionError(f"{2.0 * math.pi / (spec.k * h):.1f} points per wavelength, "
                              f"need {MIN_POINTS_PER_WAVELENGTH}")
    if 2.0 * spec.W / h < MIN_POINTS_PER_WAVELENGTH:
        raise ResolutionError("annulus is resolved by fewer than 32 nodes")
    r = grid.nodes
    if r[0] > spec.R - spec.W or r[-1] < spec.R + spec.W:
        raise ValueError("grid does not cover the annulus")

    vals = np.asarray(v.values, dtype=complex)
    k = spec.k
    phase = np.exp(1j * k * r)
    env = vals * np.conj(phase)
    V = chart.potential(r)
    if chart.is_flat:
        f, df = np.ones_like(r), np.zeros_like(r)
    else:
        f, df = _factor_and_derivative(chart.metric, r)
    coef = (n - 1) / r + 0.5 * (n - 2) * df / f

    d1, d2 = _derivs(vals, h)
    total = -(d2 + coef * d1) / f + (V - k * k) * vals

    e1, e2 = _derivs(env, h)
    parts = {
        "curvature": -e2 / f,
        "cross": -2j * k * e1 / f,
        "geometric": -coef * (e1 + 1j * k * env) / f,
        "potential": V * env,
    }
    if not chart.is_flat:
        parts["metric"] = k * k * (1.0 / f - 1.0) * env

    vol = f ** (n / 2) * r ** (n - 1)

    def norm(x):
        return math.sqrt(max(simpson(np.abs(x) ** 2 * vol, x=r), 0.0))

    vnorm = norm(vals)
    if vnorm == 0.0:
        raise ValueError("quasimode vanishes identically")
    comps = {name: norm(p) / vnorm for name, p in parts.items()}
    return ResidualCertificate(spec, n, norm(total) / vnorm, comps)


@dataclass(frozen=True)
class WeylFamily:
    specs: tuple
    fields: tuple
    certificates: tuple
    gram: np.ndarray

    @property
    def max_epsilon(self) -> float:
        return max(c.epsilon for c in self.certificates)


def gram_matrix(fields, n: int) -> np.ndarray:
    """``int v_i conj(v_j) r^(n-1) dr`` for fields on one common radial grid."""
    grid = fields[0].grid
    r = grid.nodes
    m = len(fields)
    g = np.zeros((m, m), dtype=complex)
    for i in range(m):
        for j in range(m):
            g[i, j] = simpson(fields[i].values * np.conj(fields[j].values) * r ** (n - 1), x=r)
    return g


def weyl_family(k: float, m: int, chart: SpatialChart, *, R0: Optional[float] = None,
                width_ratio: float = 0.3, r_max: float = 1e6, max_nodes: int = 4_000_000,
                points_per_wavelength: int = 64) -> WeylFamily:
    """``m`` quasimodes on the disjoint annuli ``R_j = R0 2^j``, ``W_j = width_ratio R_j``.

    Half-widths ``R_j/2`` would overlap for doubling centres, so the default
    shrinks them to ``0.3 R_j``; any ratio below 1/3 keeps supports disjoint.
    All members share one radial grid, so the Gram matrix is diagonal exactly.
    """
    if m < 1:
        raise ValueError("family needs at least one member")
    if not 0 < width_ratio < 1.0 / 3.0 and m > 1:
        raise ValueError("width ratio must lie in (0, 1/3) for disjoint annuli")
    if R0 is None:
        R0 = max(50.0, 2.0 * chart.inner_radius / (1.0 - width_ratio))
    specs = tuple(QuasimodeSpec(k, R0 * 2.0**j, width_ratio * R0 * 2.0**j) for j in range(m))
    outer = specs[-1].R + specs[-1].W
    if outer > r_max:
        raise CapacityError(f"family reaches r={outer:g} beyond r_max={r_max:g}")
    h = 2.0 * specs[0].W / 4096
    if k > 0:
        h = min(h, 2.0 * math.pi / (k * points_per_wavelength))
    lo = specs[0].R - specs[0].W - PAD * h
    grid = RadialGrid.covering(lo, outer + PAD * h, h)
    if grid.size > max_nodes:
        raise CapacityError(f"family needs {grid.size} nodes, limit {max_nodes}")
    _require_valid_chart(chart)
    fields = tuple(build_quasimode(s, chart, grid, validate=False) for s in specs)
    certs = tuple(quasimode_residual(f, s, chart) for f, s in zip(fields, specs))
    return WeylFamily(specs, fields, certs, gram_matrix(fields, chart.n))
