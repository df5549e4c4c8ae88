"""Symmetric linear algebra and weighted quadrature used by the solvers."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

from .errors import DefinitenessError

GRADED_LEVELS = 20
GRADED_RATIO = 0.5


@dataclass(frozen=True)
class SymMatrix:
    """Real symmetric matrix stored by its lower triangle.

    With ``bandwidth`` set, ``storage`` is in LAPACK lower-banded layout
    (``storage[d, j] == a[j + d, j]``); otherwise it is a dense square array of
    which only the lower triangle is read.
    """

    storage: np.ndarray
    bandwidth: Optional[int] = None

    def __post_init__(self):
        s = np.array(self.storage, dtype=float)
        if self.bandwidth is None:
            if s.ndim != 2 or s.shape[0] != s.shape[1]:
                raise ValueError("dense storage must be square")
            s = np.tril(s)
        else:
            if self.bandwidth < 0 or s.ndim != 2 or s.shape[0] != self.bandwidth + 1:
                raise ValueError("banded storage must have bandwidth + 1 rows")
        if s.shape[-1] < 1:
            raise ValueError("matrix order must be positive")
        if not np.all(np.isfinite(s)):
            raise ValueError("matrix entries must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "storage", s)

    @classmethod
    def from_dense(cls, a, bandwidth: Optional[int] = None) -> "SymMatrix":
        a = np.asarray(a, dtype=float)
        if bandwidth is None:
            return cls(a)
        n = a.shape[0]
        ab = np.zeros((bandwidth + 1, n))
        for d in range(bandwidth + 1):
            ab[d, : n - d] = np.diagonal(a, -d)
        return cls(ab, bandwidth)

    @classmethod
    def tridiagonal(cls, diag, offdiag) -> "SymMatrix":
        diag = np.asarray(diag, dtype=float)
        ab = np.zeros((2, diag.size))
        ab[0] = diag
        ab[1, :-1] = offdiag
        return cls(ab, 1)

    @property
    def order(self) -> int:
        return self.storage.shape[1]

    def diagonal(self) -> np.ndarray:
        return self.storage[0].copy() if self.bandwidth is not None else np.diag(self.storage).copy()

    def to_dense(self) -> np.ndarray:
        if self.bandwidth is None:
            low = self.storage
        else:
            n = self.order
            low = np.zeros((n, n))
            for d in range(self.bandwidth + 1):
                idx = np.arange(n - d)
                low[idx + d, idx] = self.storage[d, : n - d]
        return low + np.tril(low, -1).T

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x)
        if self.bandwidth is None:
            return self.to_dense() @ x
        n = self.order
        y = self.storage[0].reshape((n,) + (1,) * (x.ndim - 1)) * x
        for d in range(1, self.bandwidth + 1):
            band = self.storage[d, : n - d].reshape((n - d,) + (1,) * (x.ndim - 1))
            y[d:] += band * x[:-d]
            y[:-d] += band * x[d:]
        return y

    def cholesky(self) -> np.ndarray:
        """Lower Cholesky factor; raises DefinitenessError on failure."""
        try:
            if self.bandwidth is None:
                return sla.cholesky(self.to_dense(), lower=True)
            return sla.cholesky_banded(self.storage, lower=True)
        except sla.LinAlgError as exc:
            raise DefinitenessError(f"matrix is not positive definite: {exc}") from None


@dataclass(frozen=True)
class EigSolution:
    values: np.ndarray
    vectors: np.ndarray
    b_norm_check: float

    def __len__(self):
        return self.values.size


def _k_orthonormalize(vectors, kd, values, rel_gap=1e-8):
    """Cholesky-QR in the K inner product within clusters of close eigenvalues."""
    start = 0
    m = values.size
    while start < m:
        stop = start + 1
        while stop < m and values[stop] - values[stop - 1] <= rel_gap * max(abs(values[stop]), 1.0):
            stop += 1
        block = vectors[:, start:stop]
        gram = block.T @ (kd @ block)
        lg = np.linalg.cholesky(gram)
        vectors[:, start:stop] = sla.solve_triangular(lg, block.T, lower=True).T
        start = stop
    return vectors


def _fix_sign(vectors, rel=1e-8):
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        big = np.flatnonzero(np.abs(col) > rel * np.max(np.abs(col)))
        if big.size and col[big[0]] < 0:
            vectors[:, j] = -col
    return vectors


def solve_sym_generalized_eig(B: SymMatrix, K: SymMatrix, m: int) -> EigSolution:
    """The ``m`` smallest eigenpairs of ``B v = lam K v``, K-orthonormal.

    The pencil is solved in its inverted form ``K v = mu B v`` with a Cholesky
    factor of the energy matrix ``B``, so that the small eigenvalues keep full
    relative accuracy even when ``K`` is badly conditioned (graded meshes).
    Each vector is sign-fixed so its first non-negligible component is positive.
    """
    if B.order != K.order:
        raise ValueError(f"order mismatch: B is {B.order}, K is {K.order}")
    n = B.order
    if not 0 <= m <= n:
        raise ValueError(f"m={m} must lie in [0, {n}]")
    B.cholesky()
    if np.any(K.diagonal() <= 0):
        raise DefinitenessError("K must have positive diagonal entries")
    if m == 0:
        return EigSolution(np.empty(0), np.empty((n, 0)), 0.0)
    bd, kd = B.to_dense(), K.to_dense()
    mu, vecs = sla.eigh(kd, bd, subset_by_index=[n - m, n - 1], driver="gvx")
    if np.any(mu <= 0):
        raise DefinitenessError("K is singular on the requested eigenspace")
    values = 1.0 / mu[::-1]
    vecs = np.ascontiguousarray(vecs[:, ::-1])
    vecs = _k_orthonormalize(vecs, kd, values)
    vecs = _fix_sign(vecs)

    bv, kv = bd @ vecs, kd @ vecs
    res = np.linalg.norm(bv - kv * values, axis=0)
    scale = np.linalg.norm(bv, axis=0) + np.abs(values) * np.linalg.norm(kv, axis=0)
    return EigSolution(values, vecs, float(np.max(res / scale)))


@lru_cache(maxsize=32)
def _legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_rule(lo: float, hi: float, weight_exponent: float = 0.0, order: int = 8,
               graded: Optional[bool] = None):
    """Nodes and weights for ``int_lo^hi t**p f(t) dt``, the weight folded in.

    When ``lo == 0`` and ``p`` is not a non-negative integer, the interval is
    split geometrically toward 0 (ratio 1/2, 20 levels) so the Hölder
    singularity of ``t**p`` is confined to a negligible innermost piece.
    """
    if lo < 0:
        raise ValueError("lower limit must be non-negative")
    if not hi > lo:
        raise ValueError(f"reversed or empty interval ({lo}, {hi})")
    if order < 2:
        raise ValueError("quadrature order must be at least 2")
    p = float(weight_exponent)
    if graded is None:
        graded = lo == 0 and not (p >= 0 and p == int(p))
    if graded:
        cuts = hi * GRADED_RATIO ** np.arange(GRADED_LEVELS + 1)
        edges = np.concatenate(([lo], cuts[::-1]))
    else:
        edges = np.array([lo, hi])
    x, w = _legendre(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x + 0.5 * (b + a)
    weights = 0.5 * (b - a) * w
    nodes, weights = nodes.ravel(), weights.ravel()
    if p != 0.0:
        weights = weights * nodes**p
    return nodes, weights


def integrate_weighted(f: Callable[[np.ndarray], np.ndarray], interval, weight_exponent: float = 0.0,
                       order: int = 8) -> float:
    """Approximate ``int t**weight_exponent * f(t) dt`` over ``interval``."""
    lo, hi = interval
    nodes, weights = gauss_rule(lo, hi, weight_exponent, order)
    return float(np.sum(weights * f(nodes)))


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(lx, ly, 1)[0])
