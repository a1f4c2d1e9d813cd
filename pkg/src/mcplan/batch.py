"""Structure-of-arrays blocks and fixed-size lane-parallel linear algebra.

Layout conventions (lanes always on the last axis, C order):

* configuration block ``Q``: ``(d, n)`` -- joint ``j`` of every lane is the
  contiguous row ``Q[j]``;
* batch matrix: ``(rows, cols, n)`` -- entry ``(i, j)`` of every lane is
  contiguous;
* lane mask: ``(n,)`` bool.

The Cholesky kernels walk a fixed number of columns with no data-dependent
control flow: a bad pivot is replaced by 1.0 and reported through the
returned mask, so every lane executes the same instruction stream.
"""

from __future__ import annotations

import math
import os

import numpy as np

LANE_WIDTHS = (4, 8, 16)
DEFAULT_LANES = 8
PIVOT_TOLERANCE = 1e-12


def lanes_from_env(default: int = DEFAULT_LANES) -> int:
    """Lane count, overridable through ``MCPLAN_LANES``."""
    raw = os.environ.get("MCPLAN_LANES")
    if not raw:
        return default
    n = int(raw)
    if n != 1 and n not in LANE_WIDTHS:
        raise ValueError(f"MCPLAN_LANES must be 1 or one of {LANE_WIDTHS}, got {n}")
    return n


def make_block(configs) -> np.ndarray:
    """Stack configurations (one per lane) into a ``(d, n)`` SoA block."""
    arr = np.asarray(configs, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    return np.ascontiguousarray(arr.T)


def broadcast_block(q: np.ndarray, n: int) -> np.ndarray:
    return np.ascontiguousarray(np.repeat(np.asarray(q, dtype=float)[:, None], n, axis=1))


def block_lanes(Q: np.ndarray) -> list[np.ndarray]:
    return [Q[:, i].copy() for i in range(Q.shape[1])]


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Sum of ``a[m] * b[m]`` over the leading axis, accumulated in order.

    Lane results never depend on neighbouring lanes (no pairwise or blocked
    reductions across lanes), so permuting lanes permutes outputs bitwise.
    """
    acc = np.zeros(a.shape[1:])
    for m in range(a.shape[0]):
        acc = acc + a[m] * b[m]
    return acc


def cholesky_factor(A: np.ndarray, tol: float = PIVOT_TOLERANCE) -> tuple[np.ndarray, np.ndarray]:
    """Per-lane lower Cholesky factor of ``(k, k, n)`` SPD matrices.

    Returns ``(L, singular)`` where ``singular[i]`` flags a lane whose pivot
    fell below ``tol``; such lanes get a unit pivot so the arithmetic stays
    finite, and their factor is meaningless.
    """
    k = A.shape[0]
    n = A.shape[2]
    L = np.zeros_like(A)
    singular = np.zeros(n, dtype=bool)
    for j in range(k):
        piv = A[j, j] - _dot(L[j, :j], L[j, :j])
        bad = piv < tol
        singular |= bad
        ljj = np.sqrt(np.where(bad, 1.0, piv))
        L[j, j] = ljj
        for i in range(j + 1, k):
            L[i, j] = (A[i, j] - _dot(L[i, :j], L[j, :j])) / ljj
    return L, singular


def cholesky_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``L L^T x = b`` per lane; ``b`` is ``(k, n)``."""
    k = L.shape[0]
    y = np.empty_like(b)
    for i in range(k):
        y[i] = (b[i] - _dot(L[i, :i], y[:i])) / L[i, i]
    x = np.empty_like(b)
    for i in range(k - 1, -1, -1):
        x[i] = (y[i] - _dot(L[i + 1 :, i], x[i + 1 :])) / L[i, i]
    return x


def select_mode(k: int, d: int, mode: str = "auto") -> str:
    if mode == "auto":
        return "inner" if k < d else "outer"
    if mode not in ("inner", "outer"):
        raise ValueError(f"unknown pseudoinverse mode {mode!r}")
    return mode


def damped_step(
    J: np.ndarray,
    residual: np.ndarray,
    lam: float = 1e-8,
    alpha: float = 1.0,
    mode: str = "auto",
) -> tuple[np.ndarray, np.ndarray]:
    """One Levenberg-Marquardt correction per lane.

    ``J`` is ``(k, d, n)``, ``residual`` is ``(k, n)``.  Returns ``(dq, singular)``
    with ``dq`` of shape ``(d, n)``; the caller subtracts ``dq``.

    ``inner`` solves the ``k x k`` system ``(J J^T + lam I) y = r`` and maps
    back with ``J^T``; ``outer`` solves ``(J^T J + lam I) x = J^T r``.
    """
    k, d, _ = J.shape
    mode = select_mode(k, d, mode)
    if mode == "inner":
        A = np.empty((k, k) + J.shape[2:])
        for i in range(k):
            for j in range(i + 1):
                A[i, j] = A[j, i] = _dot(J[i], J[j])
            A[i, i] = A[i, i] + lam
        L, singular = cholesky_factor(A)
        y = cholesky_solve(L, residual)
        dq = _dot(J, y[:, None, :])
    else:
        Jt = J.transpose(1, 0, 2)
        A = np.empty((d, d) + J.shape[2:])
        for i in range(d):
            for j in range(i + 1):
                A[i, j] = A[j, i] = _dot(Jt[i], Jt[j])
            A[i, i] = A[i, i] + lam
        L, singular = cholesky_factor(A)
        g = _dot(J, residual[:, None, :])
        dq = cholesky_solve(L, g)
    if alpha != 1.0:
        dq = alpha * dq
    return dq, singular


# Scalar references: same arithmetic, one system at a time.


def cholesky_factor_scalar(A: np.ndarray, tol: float = PIVOT_TOLERANCE) -> tuple[np.ndarray, bool]:
    k = A.shape[0]
    L = np.zeros((k, k))
    singular = False
    for j in range(k):
        piv = A[j, j] - sum(L[j, m] * L[j, m] for m in range(j))
        if piv < tol:
            singular = True
            piv = 1.0
        L[j, j] = math.sqrt(piv)
        for i in range(j + 1, k):
            L[i, j] = (A[i, j] - sum(L[i, m] * L[j, m] for m in range(j))) / L[j, j]
    return L, singular


def cholesky_solve_scalar(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    k = L.shape[0]
    y = np.zeros(k)
    for i in range(k):
        y[i] = (b[i] - sum(L[i, m] * y[m] for m in range(i))) / L[i, i]
    x = np.zeros(k)
    for i in range(k - 1, -1, -1):
        x[i] = (y[i] - sum(L[m, i] * x[m] for m in range(i + 1, k))) / L[i, i]
    return x


def damped_step_scalar(
    J: np.ndarray, residual: np.ndarray, lam: float = 1e-8, alpha: float = 1.0, mode: str = "auto"
) -> tuple[np.ndarray, bool]:
    k, d = J.shape
    mode = select_mode(k, d, mode)
    if mode == "inner":
        L, singular = cholesky_factor_scalar(J @ J.T + lam * np.eye(k))
        dq = J.T @ cholesky_solve_scalar(L, residual)
    else:
        L, singular = cholesky_factor_scalar(J.T @ J + lam * np.eye(d))
        dq = cholesky_solve_scalar(L, J.T @ residual)
    return alpha * dq, singular
