"""Closed-form success conditions on the homogeneous complete graph.

With ``n`` nodes, weights ``1/(n-1)`` off the diagonal, common ``lam`` and
``beta`` and a control set of size ``|C| = gamma (n-1)``:

* opinion control succeeds iff
  ``beta [3(1-lam) gamma + 2 lam gamma (1-lam) + lam (2 lam - 1)] / D > 1``
* action control succeeds iff ``gamma > 1/2``
* joint control succeeds iff
  ``2 beta (1-lam) (gamma - lam + lam gamma) / D + (1-beta)(2 gamma - 1) > 0``

where ``D = gamma + lam - lam gamma``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SCENARIOS = ("opinion", "action", "joint")
STRICT_TOL = 1e-12


def _check(lam, beta, scenario):
    if scenario not in SCENARIOS:
        raise ValueError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
    if not (0 < lam <= 1 and 0 < beta <= 1):
        raise ValueError("lambda and beta must lie in (0, 1]")


def condition_margin(lam: float, beta: float, gamma: float, scenario: str) -> float:
    """Signed slack of the scenario's strict inequality (success iff > 0)."""
    _check(lam, beta, scenario)
    if scenario == "action":
        return gamma - 0.5
    D = gamma + lam - lam * gamma
    if scenario == "opinion":
        num = 3 * (1 - lam) * gamma + 2 * lam * gamma * (1 - lam) + lam * (2 * lam - 1)
        return beta * num / D - 1.0
    return 2 * beta * (1 - lam) * (gamma - lam + lam * gamma) / D + (1 - beta) * (2 * gamma - 1)


def boundary_gammas(lam: float, beta: float, scenario: str) -> list[float]:
    """Real ``gamma`` in [0, 1] where the scenario's margin is exactly zero."""
    _check(lam, beta, scenario)
    if scenario == "action":
        return [0.5]
    # multiply through by D > 0 to get a polynomial in gamma
    if scenario == "opinion":
        a = beta * (3 * (1 - lam) + 2 * lam * (1 - lam)) - (1 - lam)
        b = beta * lam * (2 * lam - 1) - lam
        coeffs = [a, b]
    else:
        # 2 beta (1-lam)((1+lam) g - lam) + (1-beta)(2g - 1)((1-lam) g + lam)
        k = 2 * beta * (1 - lam)
        m = 1 - beta
        coeffs = [2 * m * (1 - lam),
                  k * (1 + lam) + m * (2 * lam - (1 - lam)),
                  -k * lam - m * lam]
    coeffs = np.trim_zeros(np.asarray(coeffs, float), "f")
    if coeffs.size <= 1:
        return []
    roots = np.roots(coeffs)
    return sorted(float(r.real) for r in roots
                  if abs(r.imag) < 1e-12 and -1e-12 <= r.real <= 1 + 1e-12)


@dataclass(frozen=True)
class CompleteGraphVerdict:
    scenario: str
    n: int
    lam: float
    beta: float
    min_size: int | None
    min_gamma: float
    feasible: bool
    boundaries: tuple

    def admits(self, size: int) -> bool:
        return self.feasible and size >= self.min_size


def complete_graph_thresholds(lam: float, beta: float, n: int, scenario: str) -> CompleteGraphVerdict:
    """Smallest control-set size that succeeds, scanning gamma = 0, 1/(n-1), ..., 1."""
    _check(lam, beta, scenario)
    if n < 2:
        raise ValueError("complete graph needs n >= 2")
    size = None
    for k in range(n):
        if condition_margin(lam, beta, k / (n - 1), scenario) > STRICT_TOL:
            size = k
            break
    return CompleteGraphVerdict(
        scenario, n, float(lam), float(beta), size,
        size / (n - 1) if size is not None else math.inf,
        size is not None, tuple(boundary_gammas(lam, beta, scenario)),
    )


def sweep_complete(lambda_grid, beta_grid, n: int, scenario: str) -> list[tuple[float, float, float]]:
    """``(lam, beta, minimal gamma)`` per grid cell; ``inf`` where no gamma <= 1 works."""
    return [(float(l), float(b), complete_graph_thresholds(l, b, n, scenario).min_gamma)
            for l in lambda_grid for b in beta_grid]


def sweep_csv(rows) -> str:
    lines = ["lambda,beta,min_gamma"]
    lines += [f"{l:.17g},{b:.17g},{g:.17g}" for l, b, g in rows]
    return "\n".join(lines) + "\n"
