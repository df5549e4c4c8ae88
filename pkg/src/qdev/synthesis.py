"""Separated solutions ``u(t, x) = w(t) v(x)`` of the separable wave equation.

With the lower-order terms lumped into ``V`` and ``A = (n-1)(-Laplace + V)``
the wave equation reads

    a u_tt + t^p A u + n t^2 Lambda u = 0,    Lambda = -|Lambda| < 0,

on ``(0, inf) x S_0``.  If ``A v = lam v`` and ``w`` solves the temporal
problem with the same ``lam``, the product solves it; the residual measured
here certifies that numerically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConsistencyError, MatchingError
from .numerics import loglog_slope
from .spatial import SpatialChart, SpatialField, apply_A
from .temporal import GeneralizedEigenpair, Mesh1D, TemporalProblem


@dataclass(frozen=True)
class MatchedValue:
    index: int
    eigenvalue: float
    admissible: bool
    wavenumber: float


def match_eigenvalues(temporal: Sequence, n: int, tolerance: float = 0.0) -> list[MatchedValue]:
    """Mark temporal eigenvalues as spatial spectral values of ``A``.

    ``[0, inf)`` lies in the essential spectrum of ``A`` on an
    asymptotically Euclidean slice, so every non-negative value is
    admissible; the wavenumber of the matching s-wave or plane wave is
    ``sqrt(lam / (n-1))``.  Values below ``-tolerance`` mean the temporal
    solver failed.
    """
    out = []
    for i, item in enumerate(temporal):
        lam = float(getattr(item, "eigenvalue", item))
        idx = getattr(item, "index", i)
        if lam < -tolerance:
            raise ConsistencyError(f"temporal eigenvalue {idx} is negative: {lam!r}")
        lam = max(lam, 0.0)
        out.append(MatchedValue(idx, lam, True, math.sqrt(lam / (n - 1))))
    return out


@dataclass(frozen=True)
class WaveProduct:
    """Separable samples ``w(t_a) v(x_b)``; the tensor product is never stored."""

    mesh: Mesh1D
    w: np.ndarray
    field: SpatialField
    temporal_eigenvalue: float
    spatial_eigenvalue: Optional[float]
    index: int = 0

    def values(self) -> np.ndarray:
        return np.multiply.outer(self.w, self.field.values)

    def at(self, a, b):
        return self.w[a] * self.field.values[b]

    def scaled(self, temporal: float = 1.0, spatial: float = 1.0) -> "WaveProduct":
        return WaveProduct(self.mesh, self.w * temporal, self.field.scaled(spatial),
                           self.temporal_eigenvalue, self.spatial_eigenvalue, self.index)


def synthesize_product(w: GeneralizedEigenpair, v: SpatialField, *, tolerance: float = 1e-8) -> WaveProduct:
    """Pair a temporal eigenpair with a spatial eigenfunction of the same value.

    ``tolerance`` is relative to the temporal eigenvalue.
    """
    lam_a = v.eigenvalue
    if lam_a is None:
        raise MatchingError("spatial field carries no certified eigenvalue")
    if abs(w.eigenvalue - lam_a) > tolerance * abs(w.eigenvalue):
        raise MatchingError(f"temporal {w.eigenvalue!r} and spatial {lam_a!r} spectral values differ")
    return WaveProduct(w.mesh, np.array(w.coefficients, dtype=float), v, w.eigenvalue, lam_a, w.index)


def second_difference(t: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Three-point ``w''`` on interior nodes of a (possibly graded) mesh."""
    hm = t[1:-1] - t[:-2]
    hp = t[2:] - t[1:-1]
    return 2.0 * ((w[2:] - w[1:-1]) / hp - (w[1:-1] - w[:-2]) / hm) / (hp + hm)


@dataclass(frozen=True)
class WaveResidual:
    relative: float
    absolute: float
    scale: float


def wave_residual(u: WaveProduct, problem: TemporalProblem, chart: SpatialChart) -> WaveResidual:
    """Max of ``|a u_tt + t^p A u - c t^2 u|`` over interior nodes, relative to the largest term.

    ``c`` is ``n|Lambda|`` for the physical problem.  ``t = 0`` and
    ``t = T_max`` are excluded; ``u_tt`` uses central differences on the
    temporal mesh and ``A`` acts through :func:`apply_A`.
    """
    t = u.mesh.nodes
    w = u.w
    ti, wi = t[1:-1], w[1:-1]
    wtt = problem.stiffness * second_difference(t, w)
    pot = problem.potential * ti * ti * wi
    beta = ti**problem.weight_exponent * wi
    alpha = wtt - pot

    av = apply_A(chart, u.field).values.ravel()
    vi = u.field.interior_values().ravel()

    best = 0.0
    for start in range(0, ti.size, 256):
        sl = slice(start, start + 256)
        r = alpha[sl, None] * vi[None, :] + beta[sl, None] * av[None, :]
        best = max(best, float(np.max(np.abs(r))) if r.size else 0.0)
    vmax = float(np.max(np.abs(vi))) if vi.size else 0.0
    amax = float(np.max(np.abs(av))) if av.size else 0.0
    scale = max(float(np.max(np.abs(wtt))) * vmax, float(np.max(np.abs(beta))) * amax,
                float(np.max(np.abs(pot))) * vmax)
    rel = best / scale if scale > 0 else 0.0
    return WaveResidual(rel, best, scale)


def separated_residual(u: WaveProduct, problem: TemporalProblem, lam: float) -> np.ndarray:
    """``v(x) [a w'' + lam t^p w - c t^2 w]``: the residual when ``A v = lam v`` exactly."""
    t = u.mesh.nodes
    ti, wi = t[1:-1], u.w[1:-1]
    bracket = (problem.stiffness * second_difference(t, u.w) + lam * ti**problem.weight_exponent * wi
               - problem.potential * ti * ti * wi)
    return np.multiply.outer(bracket, u.field.interior_values())


def refinement_study(products: Sequence[WaveProduct], problem: TemporalProblem,
                     chart: SpatialChart) -> tuple[list[float], float]:
    """Relative residuals along a joint refinement and their observed order."""
    res = [wave_residual(p, problem, chart).relative for p in products]
    hs = [p.mesh.max_step for p in products]
    if len(products) < 2 or min(res) <= 0:
        return res, math.nan
    return res, loglog_slope(hs, res)
