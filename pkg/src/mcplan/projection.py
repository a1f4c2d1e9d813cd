"""Lane-parallel projection onto the intersection of constraint manifolds.

One descent step is a full cycle of damped least-squares corrections, one per
constraint in declaration order.  The projection loop retires lanes
individually: *converged* once every constraint residual is within tolerance
(infinity norm), *diverged* when a step exceeds ``max_step_distance`` or the
damped system is singular, *capped* after ``max_iterations`` steps.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as K
from .batch import damped_step, select_mode
from .collision import packed_model
from .constraints import (
    AffineConstraint,
    ClosedLinkConstraint,
    ComPolygonConstraint,
    ConstraintSet,
    RelativePoseConstraint,
    TSRConstraint,
)

CONVERGED, DIVERGED, CAPPED = K.CONVERGED, K.DIVERGED, K.CAPPED
STATUS_NAMES = {K.ACTIVE: "active", CONVERGED: "converged", DIVERGED: "diverged", CAPPED: "iteration-capped"}
_MODES = {"auto": 0, "inner": 1, "outer": 2}
_COMPILED_KINDS = (AffineConstraint, TSRConstraint, RelativePoseConstraint, ClosedLinkConstraint, ComPolygonConstraint)


@dataclass(frozen=True)
class ProjectionParams:
    epsilon: float = 1e-4
    max_iterations: int = 64
    max_step_distance: float | None = None  # None: unbounded
    lam: float = 1e-8
    alpha: float = 1.0
    mode: str = "auto"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.max_step_distance is not None and not self.max_step_distance > 0:
            raise ValueError("max_step_distance must be positive")
        if self.mode not in _MODES:
            raise ValueError(f"unknown mode {self.mode!r}")

    def with_step_limit(self, limit: float) -> ProjectionParams:
        return self if self.max_step_distance is not None else replace(self, max_step_distance=limit)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "max_iterations": self.max_iterations,
            "max_step_distance": self.max_step_distance,
            "lam": self.lam,
            "alpha": self.alpha,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, data: dict | None) -> ProjectionParams:
        return cls(**(data or {}))


@dataclass
class ProjectionOutcome:
    block: np.ndarray
    status: np.ndarray
    iterations: np.ndarray

    @property
    def converged(self) -> np.ndarray:
        return self.status == CONVERGED

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.status == CONVERGED))

    def status_names(self) -> list[str]:
        return [STATUS_NAMES[int(s)] for s in self.status]


class Projector:
    """Projection engine bound to one constraint set.

    Sets made only of built-in constraint kinds run through the compiled
    per-lane kernel; anything else uses the numpy batch path, which has the
    same loop structure.
    """

    def __init__(self, cset: ConstraintSet, model=None, params: ProjectionParams | None = None,
                 compiled: bool | None = None):
        self.cset = cset
        self.model = model
        self.params = params or ProjectionParams()
        self.tolerances = np.array(
            [c.tolerance if c.tolerance is not None else self.params.epsilon for c in cset.constraints], dtype=float
        )
        can_compile = all(type(c) in _COMPILED_KINDS for c in cset.constraints) and (
            model is not None or all(type(c) is AffineConstraint for c in cset.constraints)
        )
        self.compiled = can_compile if compiled is None else (compiled and can_compile)
        if compiled and not can_compile:
            raise ValueError("constraint set has kinds without a compiled kernel")
        self.dof = cset.dof if cset.dof is not None else (model.dof if model is not None else None)
        if self.compiled:
            self._mp = packed_model(model) if model is not None else _free_model_pack(self.dof)
            cp = K.pack_constraints(cset, self.dof)
            if len(cset):
                cp = cp[:9] + (self.tolerances.copy(),) + cp[10:]
            self._cp = cp
        p = self.params
        self._max_step = np.inf if p.max_step_distance is None else float(p.max_step_distance)

    # -- compiled ------------------------------------------------------

    def _run(self, Q, stop_first):
        Q = np.array(Q, dtype=float, order="C", copy=True)
        n = Q.shape[1]
        status = np.empty(n, dtype=np.int64)
        iters = np.empty(n, dtype=np.int64)
        p = self.params
        if self.compiled:
            first = K.project_kernel(Q, self._mp, self._cp, p.epsilon, p.lam, p.alpha, self._max_step,
                                     p.max_iterations, _MODES[p.mode], stop_first, status, iters)
        else:
            first = self._run_numpy(Q, stop_first, status, iters)
        return Q, status, iters, first

    # -- numpy reference ---------------------------------------------------

    def _converged_numpy(self, Q):
        ok = np.ones(Q.shape[1], dtype=bool)
        for c, tol in zip(self.cset.constraints, self.tolerances):
            if c.dim:
                ok &= np.abs(c.residual(Q)).max(axis=0) <= tol
        return ok

    def _cycle_numpy(self, Q):
        p = self.params
        W = Q.copy()
        singular = np.zeros(Q.shape[1], dtype=bool)
        for c in self.cset.constraints:
            if not c.dim:
                continue
            r, J = c.residual_and_jacobian(W)
            dq, bad = damped_step(J, r, p.lam, 1.0, select_mode(c.dim, Q.shape[0], p.mode))
            singular |= bad
            W = W - p.alpha * dq
        return W - Q, singular

    def _run_numpy(self, Q, stop_first, status, iters):
        status[:] = K.ACTIVE
        iters[:] = 0
        p = self.params
        for it in range(p.max_iterations + 1):
            lanes = np.flatnonzero(status == K.ACTIVE)
            if lanes.size == 0:
                break
            ok = self._converged_numpy(Q[:, lanes])
            if ok.any():
                done = lanes[ok]
                status[done] = CONVERGED
                iters[done] = it
                if stop_first:
                    return int(done[0])
            lanes = lanes[~ok]
            if it == p.max_iterations:
                status[lanes] = CAPPED
                iters[lanes] = it
                break
            if lanes.size == 0:
                break
            delta, singular = self._cycle_numpy(Q[:, lanes])
            step = np.sqrt(np.sum(delta * delta, axis=0))
            iters[lanes] = it + 1
            bad = singular | ~(step <= self._max_step)
            status[lanes[bad]] = DIVERGED
            good = lanes[~bad]
            Q[:, good] += delta[:, ~bad]
        return -1

    # -- public API ----------------------------------------------------------

    def descent_step(self, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """One cyclic sweep; returns ``(delta, singular)`` with ``delta = working - Q``."""
        Q = np.ascontiguousarray(Q, dtype=float)
        if not self.compiled:
            return self._cycle_numpy(Q)
        p = self.params
        delta = np.empty_like(Q)
        singular = np.empty(Q.shape[1], dtype=np.bool_)
        K.descent_step_kernel(Q, self._mp, self._cp, p.lam, p.alpha, _MODES[p.mode], delta, singular)
        return delta, singular

    def project_all(self, Q: np.ndarray) -> ProjectionOutcome:
        Qp, status, iters, _ = self._run(Q, False)
        return ProjectionOutcome(Qp, status, iters)

    def project_any(self, Q: np.ndarray):
        """First lane to converge (earliest iteration, then lowest index).

        Returns ``(lane, configuration, iterations)`` or ``None`` when no lane
        converges; ``iterations`` counts descent steps across all lanes.
        """
        Qp, status, iters, first = self._run(Q, True)
        if first < 0:
            return None
        return first, Qp[:, first].copy(), int(iters.sum())

    def evaluate(self, Q: np.ndarray, jacobian: bool = False):
        """Stacked residual ``(k, n)`` (and Jacobian ``(k, d, n)``) from the
        same evaluator the projection loop uses."""
        Q = np.ascontiguousarray(Q, dtype=float)
        if not self.compiled:
            return (self.cset.residual(Q), self.cset.jacobian(Q)) if jacobian else self.cset.residual(Q)
        k, n = self.cset.dim, Q.shape[1]
        R = np.zeros((k, n))
        J = np.zeros((k, Q.shape[0], n) if jacobian else (1, 1, 1))
        K.residual_kernel(Q, self._mp, self._cp, R, J, jacobian)
        return (R, J) if jacobian else R

    def residual(self, Q: np.ndarray) -> np.ndarray:
        return self.cset.residual(np.asarray(Q, dtype=float))

    def satisfied(self, Q: np.ndarray) -> np.ndarray:
        return self._converged_numpy(np.asarray(Q, dtype=float))


def _free_model_pack(dof: int) -> tuple:
    """Kernel model tuple for sets that never touch kinematics (affine only)."""
    z = np.zeros(0, dtype=np.int64)
    return (z, z, z, z, np.zeros((0, 3, 3, 4)), np.zeros((0, 3)), np.full((1, 1), -1, dtype=np.int64),
            np.zeros(1, dtype=np.int64), np.zeros(1), np.zeros((1, 3)), z, np.zeros((0, 3)), np.zeros(0),
            np.zeros((0, 2), dtype=np.int64), np.full(dof, -np.inf), np.full(dof, np.inf), np.array([0.0]),
            np.array([0, dof, 1], dtype=np.int64))


def get_descent_step(cset: ConstraintSet, Q: np.ndarray, params: ProjectionParams | None = None, model=None):
    return Projector(cset, model, params).descent_step(Q)


def project_all(cset: ConstraintSet, Q: np.ndarray, params: ProjectionParams | None = None, model=None):
    return Projector(cset, model, params).project_all(Q)


def project_any(cset: ConstraintSet, Q: np.ndarray, params: ProjectionParams | None = None, model=None):
    return Projector(cset, model, params).project_any(Q)
