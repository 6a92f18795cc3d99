"""Exact equilibrium reached from the all-(-1) start, and the success indicator phi.

Starting from ``A = CX`` the procedure repeatedly (1) builds the candidate
action vector (+1 on ``A``, -1 elsewhere), (2) solves for the unique opinion
profile consistent with it, with ``CY`` pinned at +1, and (3) adds every node
whose delta at that candidate is positive.  It stops when no node is added.
Success (``phi = 1``) means the final set is every node.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .dynamics import TIE_BAND, delta_vector
from .network import LayeredNetwork, ModelParams, as_index_set, require_valid

RESIDUAL_TOL = 1e-10


class SingularSystemError(ArithmeticError):
    pass


class OpinionSolver:
    """Factorization of the free-node opinion system for a fixed pinned set ``CY``.

    For free nodes ``F`` the equilibrium opinions solve
    ``(I - M_FF) y_F = lam_F * x_F + M_F,CY @ 1`` with ``M = diag(1 - lam) W``.
    """

    def __init__(self, net: LayeredNetwork, params: ModelParams, CY=()):
        params.check_size(net)
        n = net.n
        self.n = n
        self.CY = as_index_set(CY, n)
        pinned = np.zeros(n, dtype=bool)
        pinned[list(self.CY)] = True
        self.free = np.flatnonzero(~pinned)
        self.pinned = np.flatnonzero(pinned)
        self.lam_free = params.lam[self.free]
        if self.free.size:
            M = (1.0 - params.lam)[:, None] * net.W
            B = np.eye(self.free.size) - M[np.ix_(self.free, self.free)]
            with warnings.catch_warnings():
                warnings.simplefilter("error", LinAlgWarning)
                try:
                    self._lu = lu_factor(B, check_finite=False)
                except LinAlgWarning:
                    raise SingularSystemError("free-node opinion system is singular") from None
            if not np.all(np.isfinite(self._lu[0])) or np.min(np.abs(np.diag(self._lu[0]))) < 1e-14:
                raise SingularSystemError("free-node opinion system is numerically singular")
            self._const = M[np.ix_(self.free, self.pinned)].sum(axis=1)

    def solve(self, x_hat) -> np.ndarray:
        x_hat = np.asarray(x_hat, dtype=float)
        y = np.ones(self.n)
        if self.free.size:
            rhs = self.lam_free * x_hat[self.free] + self._const
            y[self.free] = lu_solve(self._lu, rhs, check_finite=False)
        return y


def precompute_opinion_solver(net: LayeredNetwork, params: ModelParams, CY=()) -> OpinionSolver:
    return OpinionSolver(net, params, CY)


def solve_opinion_equilibrium(x_hat, CY, net: LayeredNetwork, params: ModelParams,
                              solver: OpinionSolver | None = None) -> np.ndarray:
    x_hat = np.asarray(x_hat)
    if x_hat.shape != (net.n,) or not np.all(np.abs(x_hat) == 1):
        raise ValueError("x_hat must be a length-n vector over {-1, +1}")
    if solver is None:
        solver = OpinionSolver(net, params, CY)
    elif solver.CY != as_index_set(CY, net.n):
        raise ValueError("solver was factorized for a different CY")
    return solver.solve(x_hat)


def opinion_residual(x_hat, y_hat, CY, net: LayeredNetwork, params: ModelParams) -> float:
    """Largest violation of the free-row fixed point or of the pins on ``CY``."""
    lam = params.lam
    r = y_hat - ((1 - lam) * (net.W @ y_hat) + lam * np.asarray(x_hat, float))
    pinned = np.zeros(net.n, dtype=bool)
    pinned[list(as_index_set(CY, net.n))] = True
    r[pinned] = y_hat[pinned] - 1.0
    return float(np.max(np.abs(r))) if r.size else 0.0


@dataclass(frozen=True)
class CandidateEquilibrium:
    x_hat: np.ndarray
    y_hat: np.ndarray
    CY: frozenset = frozenset()

    @classmethod
    def from_plus_set(cls, plus, CY, net: LayeredNetwork, params: ModelParams,
                      solver: OpinionSolver | None = None) -> "CandidateEquilibrium":
        x = -np.ones(net.n)
        x[list(as_index_set(plus, net.n))] = 1.0
        return cls(x, solve_opinion_equilibrium(x, CY, net, params, solver), frozenset(CY))


@dataclass(frozen=True)
class EquilibriumCheck:
    is_equilibrium: bool
    violators: frozenset
    switchers: frozenset


def is_equilibrium(candidate: CandidateEquilibrium, CX, net: LayeredNetwork,
                   params: ModelParams) -> EquilibriumCheck:
    n = net.n
    cx = as_index_set(CX, n)
    d = delta_vector(candidate.x_hat, candidate.y_hat, net, params)
    free = np.ones(n, dtype=bool)
    free[list(cx)] = False
    viol = free & (candidate.x_hat * d < -TIE_BAND)
    switch = (candidate.x_hat < 0) & (d > TIE_BAND)
    return EquilibriumCheck(
        not viol.any(),
        frozenset(np.flatnonzero(viol).tolist()),
        frozenset(np.flatnonzero(switch).tolist()),
    )


@dataclass(frozen=True)
class EquilibriumReport:
    A_f: frozenset
    x_star: np.ndarray
    y_star: np.ndarray
    phi: int
    iterations: int
    sizes: tuple
    CX: frozenset = frozenset()
    CY: frozenset = frozenset()
    early_exit: bool = False
    labels: tuple = field(default=(), compare=False)

    def to_dict(self) -> dict:
        d = {
            "phi": self.phi,
            "A_f": sorted(self.A_f),
            "x_star": [int(v) for v in self.x_star],
            "y_star": [float(format(v, ".17g")) for v in self.y_star],
            "iterations": self.iterations,
            "sizes": list(self.sizes),
            "CX": sorted(self.CX),
            "CY": sorted(self.CY),
        }
        if self.early_exit:
            d["early_exit"] = True
        if self.labels:
            d["A_f_labels"] = [self.labels[i] for i in sorted(self.A_f)]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def run_algorithm1(net: LayeredNetwork, params: ModelParams, CX=(), CY=(), *,
                   solver: OpinionSolver | None = None, validate: bool = True,
                   allow_reducible: bool = False, stop_if_superset=None) -> EquilibriumReport:
    """Compute the final +1-action set and the equilibrium it determines.

    ``solver`` may carry a factorization for this ``CY`` from a previous call.
    ``stop_if_superset``: a set ``S`` known to be a successful action-control set
    under the same ``CY``; once the +1-set contains ``S`` the outcome is success
    by monotonicity and the loop exits early (``early_exit=True``; the returned
    vectors are then the last candidate, not the final equilibrium).
    """
    n = net.n
    params.check_size(net)
    if validate:
        require_valid(net, allow_reducible=allow_reducible)
    cx = as_index_set(CX, n)
    cy = as_index_set(CY, n)
    if solver is None:
        solver = OpinionSolver(net, params, cy)
    elif solver.CY != cy:
        raise ValueError("solver was factorized for a different CY")
    target = None if stop_if_superset is None else np.array(sorted(as_index_set(stop_if_superset, n)), dtype=int)

    plus = np.zeros(n, dtype=bool)
    plus[list(cx)] = True
    sizes = [int(plus.sum())]
    lam, beta = params.lam, params.beta
    cw = 2 * beta * (1 - lam)
    ca = 1 - beta
    iterations = 0
    while True:
        iterations += 1
        x_hat = np.where(plus, 1.0, -1.0)
        y_hat = solver.solve(x_hat)
        if target is not None and plus[target].all():
            return EquilibriumReport(frozenset(np.flatnonzero(plus).tolist()), x_hat.astype(int),
                                     y_hat, 1, iterations, tuple(sizes), cx, cy, True, net.labels)
        if plus.all():
            break
        d = cw * (net.W @ y_hat) + ca * (net.A @ x_hat)
        new = ~plus & (d > TIE_BAND)
        if not new.any():
            break
        plus |= new
        sizes.append(int(plus.sum()))
    A_f = frozenset(np.flatnonzero(plus).tolist())
    return EquilibriumReport(A_f, x_hat.astype(int), y_hat, int(plus.all()), iterations,
                             tuple(sizes), cx, cy, False, net.labels)


def phi(net: LayeredNetwork, params: ModelParams, CX=(), CY=(), **kwargs) -> int:
    return run_algorithm1(net, params, CX, CY, **kwargs).phi
