"""Temporal eigenproblem ``-a w'' + c t^2 w = lam t^p w`` on the half-line.

For the physical problem ``a = n^2/(32(n-1))``, ``c = n|Lambda|`` and
``p = 2 - 4/n``.  With ``Lambda < 0`` the implicit temporal equation of the
separated wave equation, ``-a w'' - mu t^p w - n t^2 Lambda w = 0``, is the
same equation with ``mu = lam``; both readings are handled by this module.

The half-line is truncated to ``(0, T_max]`` with Dirichlet conditions at
both ends and discretized by conforming piecewise-linear elements.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EstimateInvalidError, SimplicityError, TruncationError
from .numerics import SymMatrix, _legendre, gauss_rule, solve_sym_generalized_eig

MIN_ELEMENTS = 16
DEFAULT_ELEMENTS = 2048
QUAD_ORDER = 8


@dataclass(frozen=True)
class TemporalProblem:
    """Coefficients of ``-a w'' + c t^2 w = lam t^p w``.

    Use :meth:`physical` for the physical problem of dimension ``n`` and
    :meth:`oscillator` for the calibration preset (``a = c = 1, p = 0``,
    whose Dirichlet half-line spectrum is 3, 7, 11, ...).
    """

    stiffness: float
    potential: float
    weight_exponent: float
    n: Optional[int] = None
    lambda_abs: Optional[float] = None

    def __post_init__(self):
        if not (self.stiffness > 0 and self.potential > 0):
            raise ValueError("stiffness and potential coefficients must be positive")
        if not 0 <= self.weight_exponent < 2:
            raise ValueError("weight exponent must lie in [0, 2)")
        if self.n is not None:
            if self.n < 3:
                raise ValueError("spatial dimension n must be >= 3")
            if not (self.lambda_abs is not None and self.lambda_abs > 0):
                raise ValueError("|Lambda| must be positive")

    @classmethod
    def physical(cls, n: int, lambda_abs: float) -> "TemporalProblem":
        if n < 3:
            raise ValueError("spatial dimension n must be >= 3")
        if not lambda_abs > 0:
            raise ValueError("|Lambda| must be positive")
        return cls(n * n / (32.0 * (n - 1)), n * lambda_abs, 2.0 - 4.0 / n, n, float(lambda_abs))

    @classmethod
    def oscillator(cls) -> "TemporalProblem":
        return cls(1.0, 1.0, 0.0)

    @property
    def a(self) -> float:
        return self.stiffness

    @property
    def p(self) -> float:
        return self.weight_exponent

    @property
    def is_physical(self) -> bool:
        return self.n is not None

    def label(self) -> str:
        if self.is_physical:
            return f"n={self.n}, |Lambda|={self.lambda_abs!r}"
        return "oscillator"

    def needs_grading(self) -> bool:
        p = self.weight_exponent
        return p != int(p)


@dataclass(frozen=True)
class Mesh1D:
    """Nodes ``0 = t_0 < ... < t_N = T_max``.

    ``graded`` records how many leading elements form the geometric layer
    (``ratio`` between neighbours); the rest is uniform.
    """

    nodes: np.ndarray
    graded: int = 0
    ratio: float = 1.0

    def __post_init__(self):
        t = np.array(self.nodes, dtype=float)
        if t.ndim != 1 or t.size < MIN_ELEMENTS + 1:
            raise ValueError(f"mesh needs at least {MIN_ELEMENTS} elements")
        if t[0] != 0.0:
            raise ValueError("first node must be exactly 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("mesh nodes must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "nodes", t)

    @classmethod
    def uniform(cls, t_max: float, n_elements: int) -> "Mesh1D":
        if n_elements < MIN_ELEMENTS:
            raise ValueError(f"mesh needs at least {MIN_ELEMENTS} elements")
        t = np.linspace(0.0, t_max, n_elements + 1)
        return cls(t)

    @classmethod
    def geometric(cls, t_max: float, n_elements: int, ratio: float = 1.1,
                  graded_fraction: float = 0.1) -> "Mesh1D":
        """Uniform tail with a geometric layer of ``graded_fraction * N`` elements at 0."""
        if n_elements < MIN_ELEMENTS:
            raise ValueError(f"mesh needs at least {MIN_ELEMENTS} elements")
        ng = int(round(graded_fraction * n_elements))
        if ng == 0 or ratio == 1.0:
            return cls.uniform(t_max, n_elements)
        rel = ratio ** -np.arange(ng, 0, -1, dtype=float)
        h = t_max / (n_elements - ng + rel.sum())
        sizes = np.concatenate((h * rel, np.full(n_elements - ng, h)))
        t = np.concatenate(([0.0], np.cumsum(sizes)))
        t[-1] = t_max
        return cls(t, ng, ratio)

    @property
    def t_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def max_step(self) -> float:
        return float(np.max(np.diff(self.nodes)))

    def refine(self) -> "Mesh1D":
        """Bisect every element (nested refinement)."""
        t = self.nodes
        fine = np.empty(2 * t.size - 1)
        fine[::2] = t
        fine[1::2] = 0.5 * (t[:-1] + t[1:])
        return Mesh1D(fine, 2 * self.graded, self.ratio)

    def coarsen(self) -> "Mesh1D":
        """Inverse of :meth:`refine`; requires an even element count."""
        if self.n_elements % 2:
            raise ValueError("cannot coarsen an odd number of elements")
        return Mesh1D(self.nodes[::2], self.graded // 2, self.ratio)

    def scaled(self, factor: float) -> "Mesh1D":
        return Mesh1D(self.nodes * factor, self.graded, self.ratio)


def default_mesh(problem: TemporalProblem, t_max: float, n_elements: int = DEFAULT_ELEMENTS) -> Mesh1D:
    if problem.needs_grading():
        return Mesh1D.geometric(t_max, n_elements)
    return Mesh1D.uniform(t_max, n_elements)


@dataclass(frozen=True)
class GeneralizedEigenpair:
    """One temporal eigenpair on a mesh.

    ``coefficients`` holds nodal values on all mesh nodes, including the two
    Dirichlet zeros.  ``eigenvalue`` may be a Richardson-extrapolated value, in
    which case ``raw_eigenvalue`` is the plain Galerkin value on ``mesh``.
    """

    index: int
    eigenvalue: float
    coefficients: np.ndarray
    mesh: Mesh1D
    k_norm: float
    raw_eigenvalue: float = field(default=math.nan)

    def __post_init__(self):
        if not self.eigenvalue > 0:
            raise ValueError("temporal eigenvalues are positive")
        if self.coefficients[0] != 0.0:
            raise ValueError("w(0) must vanish")
        if math.isnan(self.raw_eigenvalue):
            object.__setattr__(self, "raw_eigenvalue", self.eigenvalue)

    def __call__(self, t):
        return np.interp(t, self.mesh.nodes, self.coefficients)


def element_forms(problem: TemporalProblem, t0: float, t1: float, order: int = QUAD_ORDER):
    """Local 2x2 matrices of B and K for the hat functions on ``[t0, t1]``."""
    h = t1 - t0
    nodes, weights = gauss_rule(t0, t1, problem.p, order, graded=(t0 == 0 and problem.needs_grading()))
    _, w_plain = gauss_rule(t0, t1, 0.0, order, graded=(t0 == 0 and problem.needs_grading()))
    phi = np.stack(((t1 - nodes) / h, (nodes - t0) / h))
    kmat = (phi * weights) @ phi.T
    pot = (phi * (w_plain * problem.potential * nodes**2)) @ phi.T
    stiff = problem.stiffness / h * np.array([[1.0, -1.0], [-1.0, 1.0]])
    return stiff + pot, kmat


def assemble_forms(problem: TemporalProblem, mesh: Mesh1D, order: int = QUAD_ORDER):
    """Tridiagonal B and K on the interior nodes (Dirichlet at both ends)."""
    if mesh.n_elements < MIN_ELEMENTS:
        raise ValueError(f"mesh needs at least {MIN_ELEMENTS} elements")
    t = mesh.nodes
    ne = mesh.n_elements
    t0, t1 = t[:-1], t[1:]
    h = t1 - t0

    x, w = _legendre(order)
    q = 0.5 * h[:, None] * x + 0.5 * (t0 + t1)[:, None]
    wq = 0.5 * h[:, None] * w
    phi0 = (t1[:, None] - q) / h[:, None]
    phi1 = (q - t0[:, None]) / h[:, None]
    wk = wq * q**problem.p if problem.p else wq
    wb = wq * problem.potential * q**2

    def local(weight):
        return (np.sum(weight * phi0 * phi0, axis=1), np.sum(weight * phi0 * phi1, axis=1),
                np.sum(weight * phi1 * phi1, axis=1))

    k00, k01, k11 = local(wk)
    b00, b01, b11 = local(wb)
    s = problem.stiffness / h
    b00, b01, b11 = b00 + s, b01 - s, b11 + s

    if problem.needs_grading():
        bl, kl = element_forms(problem, t[0], t[1], order)
        b00[0], b01[0], b11[0] = bl[0, 0], bl[0, 1], bl[1, 1]
        k00[0], k01[0], k11[0] = kl[0, 0], kl[0, 1], kl[1, 1]

    def glue(m00, m01, m11):
        diag = np.zeros(ne + 1)
        diag[:-1] += m00
        diag[1:] += m11
        return SymMatrix.tridiagonal(diag[1:-1], m01[1:-1])

    return glue(b00, b01, b11), glue(k00, k01, k11)


def turning_point(problem: TemporalProblem, lambda_target: float) -> float:
    """Point where ``c t^2 = lam t^p``; beyond it the mode is evanescent."""
    if not lambda_target > 0:
        raise ValueError("lambda_target must be positive")
    return (lambda_target / problem.potential) ** (1.0 / (2.0 - problem.p))


def truncation_error_estimate(problem: TemporalProblem, t_max: float, lambda_target: float) -> float:
    """Gaussian tail bound for the effect of cutting the half-line at ``t_max``."""
    ts = turning_point(problem, lambda_target)
    if not t_max > ts:
        raise EstimateInvalidError(
            f"T_max={t_max} lies inside the allowed region (turning point {ts:.6g})")
    rate = math.sqrt(problem.potential / problem.stiffness)
    return math.exp(-0.5 * rate * (t_max * t_max - ts * ts))


def required_t_max(problem: TemporalProblem, lambda_target: float, tol: float = 1e-10) -> float:
    """Smallest ``T_max`` whose truncation estimate equals ``tol``."""
    ts = turning_point(problem, lambda_target)
    rate = math.sqrt(problem.potential / problem.stiffness)
    return math.sqrt(ts * ts + 2.0 * math.log(1.0 / tol) / rate)


def scaled_eigenvalue(lambda_unit: float, lambda_abs: float, n: int) -> float:
    """Eigenvalue at ``|Lambda|`` from the ``|Lambda| = 1`` value.

    The substitution ``t = |Lambda|^(-1/4) tau`` maps the problem at
    ``|Lambda|`` onto the unit problem and multiplies eigenvalues by
    ``|Lambda|^(1 - 1/n)``.
    """
    if not lambda_abs > 0:
        raise ValueError("lambda_abs must be positive")
    return lambda_abs ** (1.0 - 1.0 / n) * lambda_unit


def length_scale(problem: TemporalProblem) -> float:
    """``|Lambda|^(-1/4)``: factor mapping unit-problem meshes to this problem."""
    if not problem.is_physical:
        return 1.0
    return problem.lambda_abs ** -0.25


def count_sign_changes(pair_or_values, rel_tol: float = 1e-10) -> int:
    """Strict sign changes of a nodal sequence.

    Entries with magnitude at most ``rel_tol * max|w|`` count as zero; this
    drops the boundary zeros and round-off noise in the evanescent tail.
    """
    values = getattr(pair_or_values, "coefficients", pair_or_values)
    v = np.asarray(values, dtype=float)
    vmax = np.max(np.abs(v)) if v.size else 0.0
    if vmax == 0.0:
        raise ValueError("all-zero coefficient vector")
    s = np.sign(v[np.abs(v) > rel_tol * vmax])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _solve_on_mesh(problem: TemporalProblem, mesh: Mesh1D, m: int):
    B, K = assemble_forms(problem, mesh)
    sol = solve_sym_generalized_eig(B, K, m)
    return sol, K


def _check_gaps(values, rel_gap: float = 1e-9):
    for i in range(1, values.size):
        if values[i] - values[i - 1] <= rel_gap * values[i]:
            raise SimplicityError(
                f"eigenvalues {i - 1} and {i} coincide to {rel_gap:g}: "
                f"{values[i - 1]!r}, {values[i]!r}")


def temporal_spectrum(problem: TemporalProblem, t_max: Optional[float] = None,
                      n_elements: int = DEFAULT_ELEMENTS, m: int = 10, *,
                      mesh: Optional[Mesh1D] = None, richardson: bool = False,
                      truncation_tol: float = 1e-10) -> list[GeneralizedEigenpair]:
    """The ``m`` lowest temporal eigenpairs.

    ``t_max=None`` picks the cut so that the truncation estimate of the
    largest requested eigenvalue is below ``truncation_tol``.  With
    ``richardson=True`` the eigenvalues are extrapolated from the mesh and its
    parent (every other node), removing the ``h^2`` term; the eigenvectors
    always come from the finest mesh.
    """
    if mesh is not None:
        t_max, n_elements = mesh.t_max, mesh.n_elements
    if m < 0 or 4 * m > n_elements:
        raise ValueError(f"m={m} must satisfy 0 <= m <= N/4 = {n_elements // 4}")
    if m == 0:
        return []
    if t_max is None:
        t_max = _auto_t_max(problem, m, truncation_tol)
    if mesh is None:
        mesh = default_mesh(problem, t_max, n_elements)

    sol, K = _solve_on_mesh(problem, mesh, m)
    raw = sol.values
    if np.any(raw <= 0):
        raise SimplicityError("non-positive eigenvalue from a positive definite pencil")
    _check_gaps(raw)
    est = truncation_error_estimate_safe(problem, t_max, raw[-1])
    if est > truncation_tol:
        raise TruncationError(
            f"T_max={t_max} too short for lambda={raw[-1]:.6g}: estimate {est:.3g} > {truncation_tol:g}")

    values = raw
    if richardson:
        coarse, _ = _solve_on_mesh(problem, mesh.coarsen(), m)
        values = (4.0 * raw - coarse.values) / 3.0
        _check_gaps(values)

    pairs = []
    for i in range(m):
        coeffs = np.zeros(mesh.nodes.size)
        coeffs[1:-1] = sol.vectors[:, i]
        knorm = float(sol.vectors[:, i] @ K.matvec(sol.vectors[:, i]))
        pairs.append(GeneralizedEigenpair(i, float(values[i]), coeffs, mesh, knorm, float(raw[i])))
    return pairs


def truncation_error_estimate_safe(problem: TemporalProblem, t_max: float, lambda_target: float) -> float:
    try:
        return truncation_error_estimate(problem, t_max, lambda_target)
    except EstimateInvalidError:
        return math.inf


def _auto_t_max(problem: TemporalProblem, m: int, tol: float) -> float:
    # coarse probe of the top eigenvalue, then a 10% margin on it
    lam = 4.0 * m
    t_max = required_t_max(problem, lam, tol)
    for _ in range(6):
        probe = temporal_spectrum(problem, t_max, 256, m, truncation_tol=math.inf)
        lam_new = 1.1 * probe[-1].eigenvalue
        t_new = required_t_max(problem, lam_new, tol)
        if abs(t_new - t_max) <= 1e-3 * t_max:
            break
        t_max = t_new
    return required_t_max(problem, lam_new, tol)


def k_gram(pairs: list[GeneralizedEigenpair], weight_exponent: float) -> np.ndarray:
    """K-Gram matrix of piecewise-linear functions by exact power integrals.

    On each element the product of two linear functions is expanded in powers
    of ``t`` and ``int t^(p+j)`` is taken in closed form; this route shares no
    code with the Gauss-based assembly.
    """
    if not pairs:
        return np.zeros((0, 0))
    mesh = pairs[0].mesh
    t = mesh.nodes
    t0, t1 = t[:-1], t[1:]
    h = t1 - t0
    w = np.stack([p.coefficients for p in pairs])
    slope = (w[:, 1:] - w[:, :-1]) / h
    icpt = w[:, :-1] - slope * t0
    p = weight_exponent
    mom = [(t1 ** (p + j + 1) - t0 ** (p + j + 1)) / (p + j + 1) for j in range(3)]
    g = (np.einsum("ie,je,e->ij", icpt, icpt, mom[0])
         + np.einsum("ie,je,e->ij", icpt, slope, mom[1])
         + np.einsum("ie,je,e->ij", slope, icpt, mom[1])
         + np.einsum("ie,je,e->ij", slope, slope, mom[2]))
    return g
