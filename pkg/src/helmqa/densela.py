"""Dense real linear algebra used as the classical reference.

Cholesky factorisation, cyclic Jacobi for the symmetric eigenproblem and the
reduction of ``H x = lam M x`` to standard form. Sized for the problems in
this package (a few hundred unknowns at most); no sparse storage.
"""
from dataclasses import dataclass

import numpy as np

from ._accel import USE_NUMBA, njit
from .errors import NoConvergence, NotPositiveDefinite, SingularMatrix

DEFAULT_MAX_SWEEPS = 100
JACOBI_TOL = 1e-12


@dataclass(frozen=True)
class EigenPair:
    value: float
    vector: np.ndarray


def is_symmetric(a, rtol=1e-12):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = np.max(np.abs(a)) if a.size else 0.0
    return bool(np.all(np.abs(a - a.T) <= rtol * scale))


def _as_square(a, name="matrix"):
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def cholesky_factor(m):
    """Lower-triangular ``L`` with ``m = L @ L.T``.

    Raises ``NotPositiveDefinite`` as soon as a pivot is not strictly
    positive.
    """
    m = _as_square(m, "M")
    n = m.shape[0]
    low = np.zeros_like(m)
    for j in range(n):
        pivot = m[j, j] - low[j, :j] @ low[j, :j]
        if not pivot > 0.0:
            raise NotPositiveDefinite(f"pivot {j} is {pivot:.3e}")
        d = np.sqrt(pivot)
        low[j, j] = d
        if j + 1 < n:
            low[j + 1:, j] = (m[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / d
    return low


def forward_substitute(low, b):
    """Solve ``low @ x = b`` for lower-triangular ``low`` (b may be 2-D)."""
    b = np.array(b, dtype=np.float64)
    x = np.zeros_like(b)
    for i in range(low.shape[0]):
        x[i] = (b[i] - low[i, :i] @ x[:i]) / low[i, i]
    return x


def back_substitute(up, b):
    """Solve ``up @ x = b`` for upper-triangular ``up``."""
    b = np.array(b, dtype=np.float64)
    x = np.zeros_like(b)
    for i in range(up.shape[0] - 1, -1, -1):
        x[i] = (b[i] - up[i, i + 1:] @ x[i + 1:]) / up[i, i]
    return x


@njit
def _jacobi_numba(a, v, tol, max_sweeps):
    n = a.shape[0]
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += a[i, j] * a[i, j]
        if np.sqrt(off) <= tol:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(1.0 + theta * theta))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return -1


def _jacobi_numpy(a, v, tol, max_sweeps):
    n = a.shape[0]
    mask = ~np.eye(n, dtype=bool)
    for sweep in range(max_sweeps):
        if np.sqrt(np.sum(a[mask] ** 2)) <= tol:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(1.0 + theta * theta))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for m in (a, v):
                    colp = m[:, p].copy()
                    colq = m[:, q].copy()
                    m[:, p] = c * colp - s * colq
                    m[:, q] = s * colp + c * colq
                rowp = a[p, :].copy()
                rowq = a[q, :].copy()
                a[p, :] = c * rowp - s * rowq
                a[q, :] = s * rowp + c * rowq
    return -1


def _fix_sign(vec):
    k = int(np.argmax(np.abs(vec)))
    return -vec if vec[k] < 0 else vec


def symmetric_eigen(a, max_sweeps=DEFAULT_MAX_SWEEPS):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(values, vectors)`` with ascending values and orthonormal
    columns, each column's largest-magnitude entry made positive.
    """
    a = _as_square(a)
    n = a.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    a = 0.5 * (a + a.T)
    tol = JACOBI_TOL * np.linalg.norm(a)
    v = np.eye(n)
    kernel = _jacobi_numba if USE_NUMBA else _jacobi_numpy
    if kernel(a, v, tol, max_sweeps) < 0:
        raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
    vals = np.diag(a).copy()
    order = np.argsort(vals, kind="stable")
    vecs = v[:, order]
    for j in range(n):
        vecs[:, j] = _fix_sign(vecs[:, j])
    return vals[order], vecs


def generalized_eigen(h, m, max_sweeps=DEFAULT_MAX_SWEEPS):
    """All eigenpairs of ``h x = lam m x`` for symmetric ``h`` and SPD ``m``.

    The pencil is reduced to ``L^-1 h L^-T`` with ``m = L L^T``, solved by
    Jacobi, and back-transformed. Vectors come out m-orthonormal and sorted
    by increasing eigenvalue.
    """
    h = _as_square(h, "H")
    m = _as_square(m, "M")
    if h.shape != m.shape:
        raise ValueError(f"shape mismatch {h.shape} vs {m.shape}")
    low = cholesky_factor(m)
    tmp = forward_substitute(low, h)            # L^-1 H
    reduced = forward_substitute(low, tmp.T)    # L^-1 H^T L^-T
    vals, ys = symmetric_eigen(reduced, max_sweeps=max_sweeps)
    phis = back_substitute(low.T, ys)
    pairs = []
    for j in range(len(vals)):
        pairs.append(EigenPair(float(vals[j]), _fix_sign(phis[:, j])))
    return pairs


def condition_number(a):
    """Ratio of extreme eigenvalues of a symmetric positive matrix."""
    a = _as_square(a)
    vals = [p.value for p in generalized_eigen(a, np.eye(a.shape[0]))]
    lo, hi = vals[0], vals[-1]
    if lo <= 1e-14 * hi:
        raise SingularMatrix(f"smallest eigenvalue {lo:.3e} vs largest {hi:.3e}")
    return hi / lo


def solve_spd(a, b):
    low = cholesky_factor(a)
    return back_substitute(low.T, forward_substitute(low, b))
