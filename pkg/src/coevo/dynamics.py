"""Coevolutionary action/opinion best-response dynamics with a committed minority.

Each node holds an action ``x_i`` in {-1, +1} and an opinion ``y_i`` in
[-1, 1].  An activated node maximizes

    u_i = lam_i (1 - beta_i) / 2 * sum_j a_ij [(1 - x_j)(1 - x_i) + (1 + x_j)(1 + x_i)]
          - beta_i (1 - lam_i) * sum_j w_ij (y_i - y_j)^2
          - lam_i beta_i (x_i - y_i)^2

whose maximizer is: action ``sign(delta_i)`` (ties keep the current action)
and opinion ``(1 - lam_i) * sum_j w_ij y_j + lam_i * action``, with

    delta_i = 2 beta_i (1 - lam_i) sum_j w_ij y_j + (1 - beta_i) sum_j a_ij x_j.

Controlled nodes hold ``x_i = +1`` (``i`` in CX) and/or ``y_i = +1`` (``i`` in
CY) for all ``t >= 1``; every other node starts at ``(-1, -1)``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _backend
from .network import LayeredNetwork, ModelParams, as_index_set
from .seeding import rng_for

TIE_BAND = 1e-12
OPINION_TOL = 1e-10


@dataclass(frozen=True)
class PopulationState:
    x: np.ndarray
    y: np.ndarray
    t: int = 0

    def __post_init__(self):
        x = np.array(self.x, dtype=np.int64)
        y = np.array(self.y, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y must be vectors of equal length")
        if not np.all(np.abs(x) == 1):
            raise ValueError("actions must be -1 or +1")
        if np.any(np.abs(y) > 1.0 + 1e-12):
            raise ValueError("opinions must lie in [-1, 1]")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def consensus(cls, n: int, value: int = -1) -> "PopulationState":
        return cls(np.full(n, value), np.full(n, float(value)))

    @property
    def n(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class ControlSets:
    """Nodes whose action (``CX``) or opinion (``CY``) is pinned at +1.

    ``VX``/``VY`` optionally restrict which nodes may be controlled.
    """

    CX: frozenset = frozenset()
    CY: frozenset = frozenset()
    VX: frozenset | None = None
    VY: frozenset | None = None

    def __post_init__(self):
        for name in ("CX", "CY", "VX", "VY"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, frozenset(int(i) for i in v))
        if self.VX is not None and not self.CX <= self.VX:
            raise ValueError(f"CX not within VX: {sorted(self.CX - self.VX)}")
        if self.VY is not None and not self.CY <= self.VY:
            raise ValueError(f"CY not within VY: {sorted(self.CY - self.VY)}")

    def masks(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        cx = np.zeros(n, dtype=np.uint8)
        cy = np.zeros(n, dtype=np.uint8)
        cx[list(as_index_set(self.CX, n))] = 1
        cy[list(as_index_set(self.CY, n))] = 1
        return cx, cy


SCHEDULE_KINDS = ("synchronous", "round_robin", "uniform_random_single",
                  "uniform_random_subset", "explicit")


@dataclass(frozen=True)
class ActivationSchedule:
    """Which nodes revise at each step.

    ``window`` is the guaranteed coverage window: every node activates at least
    once in any ``window`` consecutive steps.  For the random kinds it defaults
    to ``2n`` (single) or ``ceil(2n/k)`` (subset) and is enforced by forcing
    in any node that has sat out the previous ``window - 1`` steps.  Explicit
    sequences are cycled and their window is computed.
    """

    kind: str = "synchronous"
    window: int | None = None
    k: int = 1
    sequence: tuple = ()

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}; choose from {SCHEDULE_KINDS}")
        if self.window is not None and self.window < 1:
            raise ValueError("window must be a positive integer")
        if self.kind == "explicit":
            if not self.sequence:
                raise ValueError("explicit schedule needs a non-empty sequence")
            object.__setattr__(self, "sequence", tuple(tuple(sorted(set(map(int, s)))) for s in self.sequence))

    def window_for(self, n: int) -> int:
        if self.kind == "synchronous":
            return 1
        if self.kind == "round_robin":
            return n
        if self.kind == "explicit":
            return _cyclic_window(self.sequence, n)
        if self.window is not None:
            if self.kind == "uniform_random_single" and self.window < n:
                raise ValueError(f"single-node schedule window {self.window} < n={n}")
            return self.window
        if self.kind == "uniform_random_single":
            return 2 * n
        return -(-2 * n // max(1, self.k))

    def stream(self, n: int, seed: int | None = None) -> "_ScheduleStream":
        return _ScheduleStream(self, n, seed)

    def describe(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "uniform_random_subset":
            d["k"] = self.k
        if self.window is not None:
            d["window"] = self.window
        if self.kind == "explicit":
            d["sequence"] = [list(s) for s in self.sequence]
        return d


def _cyclic_window(seq: Sequence[tuple], n: int) -> int:
    L = len(seq)
    worst = 0
    for i in range(n):
        hits = [s for s, act in enumerate(seq) if i in act]
        if not hits:
            raise ValueError(f"explicit schedule never activates node {i}")
        gaps = [(hits[(h + 1) % len(hits)] - hits[h]) % L or L for h in range(len(hits))]
        # first activation must also come within the window from t=0
        worst = max(worst, max(gaps), hits[0] + 1)
    return worst


class _ScheduleStream:
    """Produces activation sets block by block as CSR arrays."""

    def __init__(self, schedule: ActivationSchedule, n: int, seed):
        self.schedule = schedule
        self.n = n
        self.T = schedule.window_for(n)
        self.t = 0
        self.rng = rng_for(seed, "schedule")
        self.last = np.full(n, -1, dtype=np.int64)
        self._all = np.arange(n, dtype=np.int64)
        if schedule.kind == "uniform_random_subset" and not 1 <= schedule.k <= n:
            raise ValueError(f"subset size k={schedule.k} outside 1..{n}")

    def _one(self, t: int) -> np.ndarray:
        kind = self.schedule.kind
        if kind == "synchronous":
            return self._all
        if kind == "round_robin":
            return self._all[t % self.n: t % self.n + 1]
        if kind == "explicit":
            seq = self.schedule.sequence
            return np.asarray(seq[t % len(seq)], dtype=np.int64)
        if kind == "uniform_random_single":
            drawn = self.rng.integers(self.n, size=1)
        else:
            drawn = self.rng.choice(self.n, size=self.schedule.k, replace=False)
        due = np.flatnonzero(t - self.last >= self.T)
        act = np.union1d(drawn, due).astype(np.int64)
        self.last[act] = t
        return act

    def block(self, length: int) -> tuple[np.ndarray, np.ndarray]:
        sets = [self._one(self.t + s) for s in range(length)]
        self.t += length
        indptr = np.zeros(length + 1, dtype=np.int64)
        np.cumsum([len(a) for a in sets], out=indptr[1:])
        indices = np.concatenate(sets).astype(np.int64) if sets else np.zeros(0, dtype=np.int64)
        return indptr, indices


def _check_node(i: int, n: int) -> int:
    i = int(i)
    if not 0 <= i < n:
        raise IndexError(f"node {i} out of range 0..{n - 1}")
    return i


def utility(i: int, zi: tuple, state: PopulationState, net: LayeredNetwork,
            params: ModelParams) -> float:
    """Utility of node ``i`` choosing ``zi = (action, opinion)``.

    Everyone else's entries come from ``state``; a self-loop weight
    ``a_ii``/``w_ii`` pairs the choice with ``i``'s current state.
    """
    i = _check_node(i, net.n)
    xi, yi = zi
    if xi not in (-1, 1) or not -1.0 <= yi <= 1.0:
        raise ValueError(f"invalid action/opinion pair {zi!r}")
    lam, beta = params.lam[i], params.beta[i]
    xj, yj = state.x, state.y
    coord = lam * (1 - beta) / 2 * np.dot(net.A[i], (1 - xj) * (1 - xi) + (1 + xj) * (1 + xi))
    disagree = beta * (1 - lam) * np.dot(net.W[i], (yi - yj) ** 2)
    inconsist = lam * beta * (xi - yi) ** 2
    return float(coord - disagree - inconsist)


def delta(i: int, state: PopulationState, net: LayeredNetwork, params: ModelParams) -> float:
    i = _check_node(i, net.n)
    lam, beta = params.lam[i], params.beta[i]
    return float(2 * beta * (1 - lam) * np.dot(net.W[i], state.y)
                 + (1 - beta) * np.dot(net.A[i], state.x))


def delta_vector(x, y, net: LayeredNetwork, params: ModelParams) -> np.ndarray:
    lam, beta = params.lam, params.beta
    return 2 * beta * (1 - lam) * (net.W @ y) + (1 - beta) * (net.A @ x)


def best_response(i: int, state: PopulationState, control: ControlSets,
                  net: LayeredNetwork, params: ModelParams) -> tuple[int, float]:
    i = _check_node(i, net.n)
    if i in control.CX:
        action = 1
    else:
        d = delta(i, state, net, params)
        action = 1 if d > TIE_BAND else -1 if d < -TIE_BAND else int(state.x[i])
    if i in control.CY:
        return action, 1.0
    lam = params.lam[i]
    opinion = (1 - lam) * float(np.dot(net.W[i], state.y)) + lam * action
    return action, float(min(1.0, max(-1.0, opinion)))


def apply_control(state: PopulationState, control: ControlSets) -> PopulationState:
    x = state.x.copy()
    y = state.y.copy()
    x[list(as_index_set(control.CX, state.n))] = 1
    y[list(as_index_set(control.CY, state.n))] = 1.0
    return PopulationState(x, y, state.t)


def initial_state(n: int, control: ControlSets) -> PopulationState:
    """All uncontrolled entries at -1, controlled entries at +1."""
    return apply_control(PopulationState.consensus(n, -1), control)


def step(state: PopulationState, active: Iterable[int], control: ControlSets,
         net: LayeredNetwork, params: ModelParams) -> PopulationState:
    """One synchronous revision of the ``active`` nodes against the pre-step state."""
    x = state.x.copy()
    y = state.y.copy()
    for i in sorted(set(int(a) for a in active)):
        x[i], y[i] = best_response(i, state, control, net, params)
    return apply_control(PopulationState(x, y, state.t + 1), control)


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    final: PopulationState
    steps: int
    stop_reason: str
    window: int
    schedule: dict
    seed: int | None
    backend: str
    min_dy: float = 0.0
    x_decreases: int = 0
    x_increases: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def monotone(self) -> bool:
        return self.x_decreases == 0 and self.min_dy >= -1e-12

    def to_csv(self, dest=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "node", "x", "y"])
        for k in range(len(self.t)):
            for i in range(self.x.shape[1]):
                w.writerow([int(self.t[k]), i, int(self.x[k, i]), format(self.y[k, i], ".17g")])
        text = buf.getvalue()
        if dest is not None:
            dest.write(text)
        return text

    def metadata(self) -> dict:
        return {
            "schedule": self.schedule,
            "window": self.window,
            "seed": self.seed,
            "steps": self.steps,
            "stop_reason": self.stop_reason,
            "backend": self.backend,
            "min_dy": self.min_dy,
            "x_decreases": self.x_decreases,
            "x_increases": self.x_increases,
            **self.meta,
        }

    def metadata_json(self) -> str:
        return json.dumps(self.metadata(), indent=2, sort_keys=True)


def simulate(net: LayeredNetwork, params: ModelParams, control: ControlSets,
             schedule: ActivationSchedule, horizon: int, rng_seed: int | None = None, *,
             stride: int = 1, opinion_tol: float = OPINION_TOL,
             initial: PopulationState | None = None, backend: str | None = None,
             block: int | None = None) -> Trajectory:
    """Run the controlled dynamics for at most ``horizon`` steps.

    Snapshots are kept at ``t = 0`` and every ``stride`` steps, plus the final
    state.  The run stops early once a full window saw no action change and
    every opinion moved by less than ``opinion_tol``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    params.check_size(net)
    n = net.n
    kern, bname = _backend.load(backend) if backend else (_backend.kernels, _backend.BACKEND)
    stream = schedule.stream(n, rng_seed)
    T = stream.T
    state0 = initial_state(n, control) if initial is None else apply_control(initial, control)

    x = state0.x.astype(float)
    y = state0.y.astype(float).copy()
    A = np.ascontiguousarray(net.A)
    W = np.ascontiguousarray(net.W)
    lam = np.ascontiguousarray(params.lam)
    cw = 2 * params.beta * (1 - lam)
    ca = 1 - params.beta
    cx, cy = control.masks(n)

    L = block or max(T, min(4096, max(64, 20000 // max(1, n))))
    L = -(-L // T) * T
    cap = L // stride + 2
    snaps_t, snaps_x, snaps_y = [np.array([0])], [x[None].copy()], [y[None].copy()]
    win = np.zeros(3)
    stats = np.array([np.inf, 0.0, 0.0])
    t = 0
    stopped = 0
    while t < horizon and not stopped:
        length = min(L, horizon - t)
        indptr, indices = stream.block(length)
        st = np.zeros(cap, dtype=np.int64)
        sx = np.zeros((cap, n))
        sy = np.zeros((cap, n))
        done, stopped, ns = kern.run_steps(x, y, A, W, cw, ca, lam, cx, cy, indptr, indices,
                                           T, win, opinion_tol, TIE_BAND, stride, t,
                                           st, sx, sy, 0, stats)
        t += done
        if ns:
            snaps_t.append(st[:ns])
            snaps_x.append(sx[:ns])
            snaps_y.append(sy[:ns])
    tt = np.concatenate(snaps_t)
    if tt[-1] != t:
        snaps_t.append(np.array([t]))
        snaps_x.append(x[None].copy())
        snaps_y.append(y[None].copy())
        tt = np.concatenate(snaps_t)
    X = np.concatenate(snaps_x).astype(np.int8)
    Y = np.concatenate(snaps_y)
    final = PopulationState(x.astype(np.int64), np.clip(y, -1.0, 1.0), t)
    return Trajectory(
        t=tt, x=X, y=Y, final=final, steps=t,
        stop_reason="converged" if stopped else "horizon",
        window=T, schedule=schedule.describe(), seed=rng_seed, backend=bname,
        min_dy=0.0 if not np.isfinite(stats[0]) else min(0.0, float(stats[0])),
        x_decreases=int(stats[1]), x_increases=int(stats[2]),
    )


def increasing_differences_gap(i: int, zi_hi: tuple, zi_lo: tuple,
                               others_hi: PopulationState, others_lo: PopulationState,
                               net: LayeredNetwork, params: ModelParams) -> float:
    """Delta_i(hi, lo | others_hi) - Delta_i(hi, lo | others_lo) with Delta_i a utility gain.

    Nonnegative for every ordered input when the game is supermodular.
    """
    if zi_hi[0] < zi_lo[0] or zi_hi[1] < zi_lo[1]:
        raise ValueError("own choices must satisfy zi_hi >= zi_lo componentwise")
    if np.any(others_hi.x < others_lo.x) or np.any(others_hi.y < others_lo.y):
        raise ValueError("others must satisfy others_hi >= others_lo componentwise")
    gain_hi = utility(i, zi_hi, others_hi, net, params) - utility(i, zi_lo, others_hi, net, params)
    gain_lo = utility(i, zi_hi, others_lo, net, params) - utility(i, zi_lo, others_lo, net, params)
    return gain_hi - gain_lo
