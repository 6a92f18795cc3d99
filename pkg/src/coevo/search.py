"""Minimal control-set search.

A control set ``C`` over the controllable nodes ``V* = VX | VY`` acts on
actions through ``C & VX`` and on opinions through ``C & VY``; it is
*admissible* when that split drives everyone to +1.  The search is a Markov
chain on admissible sets started from ``V*``: each iteration picks a node of
``V*`` uniformly; a member is dropped if the reduced set stays admissible,
a non-member is added with probability ``epsilon``.  Its stationary law is
proportional to ``epsilon ** |C|``, so small ``epsilon`` concentrates it on
minimum-cardinality sets.  The smallest set visited is reported.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .equilibrium import OpinionSolver, run_algorithm1
from .network import LayeredNetwork, ModelParams, as_index_set, make_complete, require_valid
from .seeding import rng_for

HOLD, REMOVE, INSERT = 0, 1, 2
MOVE_NAMES = ("hold", "remove", "insert")
_BATCH = 1 << 16


def _mask(nodes) -> int:
    m = 0
    for i in nodes:
        m |= 1 << int(i)
    return m


def _members(mask: int) -> frozenset:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return frozenset(out)


def split_control(C, VX, VY) -> tuple[frozenset, frozenset]:
    C, VX, VY = frozenset(C), frozenset(VX), frozenset(VY)
    extra = C - (VX | VY)
    if extra:
        raise ValueError(f"nodes {sorted(extra)} are not controllable (outside VX | VY)")
    return C & VX, C & VY


class AdmissibilityOracle:
    """Memoized admissibility checks for one network, parameter set and (VX, VY).

    Opinion-system factorizations are cached per opinion-pinned set, so action
    control (``VY`` empty) factorizes exactly once.
    """

    def __init__(self, net: LayeredNetwork, params: ModelParams, VX, VY, *,
                 validate: bool = True, allow_reducible: bool = False, solver_cache: int = 64):
        params.check_size(net)
        if validate:
            require_valid(net, allow_reducible=allow_reducible)
        self.net = net
        self.params = params
        self.VX = as_index_set(VX, net.n)
        self.VY = as_index_set(VY, net.n)
        self.vstar = tuple(sorted(self.VX | self.VY))
        if not self.vstar:
            raise ValueError("no controllable nodes: VX | VY is empty")
        self.vx_mask = _mask(self.VX)
        self.vy_mask = _mask(self.VY)
        self.full_mask = self.vx_mask | self.vy_mask
        self.memo: dict[int, bool] = {}
        self._solvers: dict[int, OpinionSolver] = {}
        self._solver_cache = solver_cache
        self.evaluations = 0
        self.early_exits = 0

    @property
    def n_star(self) -> int:
        return len(self.vstar)

    def _solver(self, cy_mask: int) -> OpinionSolver:
        s = self._solvers.get(cy_mask)
        if s is None:
            s = OpinionSolver(self.net, self.params, _members(cy_mask))
            if len(self._solvers) >= self._solver_cache:
                self._solvers.pop(next(iter(self._solvers)))
            self._solvers[cy_mask] = s
        return s

    def check_mask(self, mask: int, known_superset: int | None = None) -> bool:
        """Admissibility of the set encoded by ``mask``.

        ``known_superset``: an admissible mask differing from ``mask`` only by
        action-only nodes; the check then stops as soon as those nodes switch.
        """
        hit = self.memo.get(mask)
        if hit is not None:
            return hit
        cx = mask & self.vx_mask
        cy = mask & self.vy_mask
        stop = None
        if known_superset is not None and (known_superset & self.vy_mask) == cy:
            stop = _members(known_superset & self.vx_mask)
        rep = run_algorithm1(self.net, self.params, _members(cx), _members(cy),
                             solver=self._solver(cy), validate=False, stop_if_superset=stop)
        self.evaluations += 1
        self.early_exits += rep.early_exit
        ok = bool(rep.phi)
        self.memo[mask] = ok
        return ok

    def __call__(self, C) -> bool:
        C = frozenset(C)
        split_control(C, self.VX, self.VY)
        return self.check_mask(_mask(C))


def is_admissible(C, VX, VY, net: LayeredNetwork, params: ModelParams) -> bool:
    CX, CY = split_control(C, VX, VY)
    return bool(run_algorithm1(net, params, CX, CY).phi)


@dataclass(frozen=True)
class SearchConfig:
    epsilon: float = 0.1
    max_iters: int = 10_000
    seed: int | None = 0
    decay: float | None = None
    record_trace: bool = True

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.decay is not None and not 0 < self.decay <= 1:
            raise ValueError("decay factor must lie in (0, 1]")

    def epsilon_at(self, k: int) -> float:
        """Insertion probability at iteration ``k``; geometric decay is an annealing option."""
        return self.epsilon if self.decay is None else self.epsilon * self.decay ** k


def chain_step(C, oracle: AdmissibilityOracle, epsilon: float, rng: np.random.Generator):
    """One transition from the admissible set ``C``; returns ``(C', move_name)``."""
    r = oracle.vstar[int(rng.integers(oracle.n_star))]
    u = rng.random()
    C = frozenset(C)
    if r in C:
        D = C - {r}
        if oracle.check_mask(_mask(D), known_superset=_mask(C)):
            return D, "remove"
        return C, "hold"
    if u < epsilon:
        return C | {r}, "insert"
    return C, "hold"


@dataclass
class SearchTrace:
    current_size: np.ndarray
    best_size: np.ndarray
    move: np.ndarray

    def counts(self) -> dict:
        return {name: int(np.count_nonzero(self.move == code)) for code, name in enumerate(MOVE_NAMES)}

    def to_csv(self, dest=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "current_size", "best_size", "move"])
        for k in range(len(self.move)):
            w.writerow([k + 1, int(self.current_size[k]), int(self.best_size[k]), MOVE_NAMES[self.move[k]]])
        text = buf.getvalue()
        if dest is not None:
            dest.write(text)
        return text


@dataclass
class SearchResult:
    feasible: bool
    best: frozenset | None
    CX: frozenset | None
    CY: frozenset | None
    best_iter: int
    final: frozenset | None
    trace: SearchTrace | None
    config: SearchConfig
    n: int
    wall_time: float
    evaluations: int = 0
    chain: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def size(self) -> int | None:
        return None if self.best is None else len(self.best)

    def to_dict(self, labels=None) -> dict:
        d = {
            "feasible": self.feasible,
            "result": "ok" if self.feasible else "infeasible",
            "best": sorted(self.best) if self.best is not None else None,
            "size": self.size,
            "fraction": self.size / self.n if self.best is not None else None,
            "CX": sorted(self.CX) if self.CX is not None else None,
            "CY": sorted(self.CY) if self.CY is not None else None,
            "best_iter": self.best_iter,
            "seed": self.config.seed,
            "epsilon": self.config.epsilon,
            "decay": self.config.decay,
            "iterations": self.config.max_iters,
            "wall_time": self.wall_time,
            "evaluations": self.evaluations,
            "chain": self.chain,
        }
        if labels and self.best is not None:
            d["best_labels"] = [labels[i] for i in sorted(self.best)]
        d.update(self.extra)
        return d


def _draws(rng: np.random.Generator, n_star: int, total: int):
    """Shared draw layout: blocks of node picks followed by uniforms."""
    done = 0
    while done < total:
        b = min(_BATCH, total - done)
        yield rng.integers(n_star, size=b), rng.random(b)
        done += b


def minimize_control_set(net: LayeredNetwork, params: ModelParams, VX, VY,
                         config: SearchConfig = SearchConfig(), *,
                         oracle: AdmissibilityOracle | None = None, chain: int = 0) -> SearchResult:
    t0 = time.perf_counter()
    oracle = oracle or AdmissibilityOracle(net, params, VX, VY)
    full = oracle.full_mask
    if not oracle.check_mask(full):
        return SearchResult(False, None, None, None, 0, None, None, config, net.n,
                            time.perf_counter() - t0, oracle.evaluations, chain)
    rng = rng_for(config.seed, "search", chain)
    bits = [1 << v for v in oracle.vstar]
    K = config.max_iters
    rec = config.record_trace
    cur_sizes = np.empty(K, dtype=np.int32) if rec else None
    best_sizes = np.empty(K, dtype=np.int32) if rec else None
    moves = np.empty(K, dtype=np.int8) if rec else None
    C = full
    size = len(oracle.vstar)
    best, best_size, best_iter = C, size, 0
    memo = oracle.memo
    decay = config.decay
    eps = config.epsilon
    k = 0
    for r_block, u_block in _draws(rng, len(bits), K):
        for r, u in zip(r_block.tolist(), u_block.tolist()):
            bit = bits[r]
            move = HOLD
            if C & bit:
                D = C ^ bit
                ok = memo.get(D)
                if ok is None:
                    ok = oracle.check_mask(D, known_superset=C)
                if ok:
                    C = D
                    size -= 1
                    move = REMOVE
                    if size < best_size:
                        best, best_size, best_iter = C, size, k + 1
            elif u < (eps if decay is None else eps * decay ** k):
                C |= bit
                size += 1
                move = INSERT
            if rec:
                cur_sizes[k] = size
                best_sizes[k] = best_size
                moves[k] = move
            k += 1
    best_set = _members(best)
    CX, CY = split_control(best_set, oracle.VX, oracle.VY)
    trace = SearchTrace(cur_sizes, best_sizes, moves) if rec else None
    return SearchResult(True, best_set, CX, CY, best_iter, _members(C), trace, config, net.n,
                        time.perf_counter() - t0, oracle.evaluations, chain)


def merge_results(results: list[SearchResult]) -> SearchResult:
    """Smallest best set across independent chains; ties go to the lexicographically smallest."""
    ok = [r for r in results if r.feasible]
    if not ok:
        return results[0]
    return min(ok, key=lambda r: (len(r.best), sorted(r.best)))


def brute_force_minimum(net: LayeredNetwork, params: ModelParams, VX, VY,
                        cardinality_cap: int | None = None, *, max_nodes: int = 20,
                        oracle: AdmissibilityOracle | None = None) -> list[frozenset]:
    """All admissible sets of the smallest admissible cardinality (exhaustive).

    Returns ``[]`` when nothing up to ``cardinality_cap`` (default ``|V*|``)
    is admissible.
    """
    oracle = oracle or AdmissibilityOracle(net, params, VX, VY)
    vstar = oracle.vstar
    if cardinality_cap is None:
        if len(vstar) > max_nodes:
            raise ValueError(f"{len(vstar)} controllable nodes exceeds the exhaustive-search cap "
                             f"of {max_nodes}; pass cardinality_cap")
        cardinality_cap = len(vstar)
    for k in range(min(cardinality_cap, len(vstar)) + 1):
        found = [frozenset(c) for c in itertools.combinations(vstar, k) if oracle.check_mask(_mask(c))]
        if found:
            return found
    return []


def admissibility_table(oracle: AdmissibilityOracle, max_nodes: int = 20) -> np.ndarray:
    """``table[m]`` for every mask ``m`` over the ``n*`` controllable positions."""
    ns = oracle.n_star
    if ns > max_nodes:
        raise ValueError(f"table over {ns} controllable nodes is too large")
    table = np.zeros(1 << ns, dtype=np.uint8)
    for m in range(1 << ns):
        nodes = [oracle.vstar[b] for b in range(ns) if m >> b & 1]
        table[m] = oracle.check_mask(_mask(nodes))
    return table


@dataclass
class Occupancy:
    visits: np.ndarray
    min_size: int
    fraction_at_min: float
    final: frozenset


def chain_occupancy(oracle: AdmissibilityOracle, epsilon: float, iterations: int,
                    seed: int | None, *, chain: int = 0, table: np.ndarray | None = None,
                    backend: str | None = None) -> Occupancy:
    """Long-run state occupancy of the chain, via the compiled table walk.

    Uses the same draw stream as :func:`minimize_control_set` with the same
    seed and chain index, so both visit the same states.
    """
    kern = _backend.load(backend)[0] if backend else _backend.kernels
    table = admissibility_table(oracle) if table is None else table
    ns = oracle.n_star
    if not table[(1 << ns) - 1]:
        raise ValueError("problem is infeasible: V* itself is not admissible")
    visits = np.zeros(1 << ns, dtype=np.int64)
    c = (1 << ns) - 1
    rng = rng_for(seed, "search", chain)
    for r_block, u_block in _draws(rng, ns, iterations):
        c = kern.walk_table(table, c, r_block.astype(np.int64), u_block, float(epsilon), visits)
    sizes = np.array([bin(m).count("1") for m in range(1 << ns)])
    min_size = int(sizes[table.astype(bool)].min())
    at_min = visits[(sizes == min_size) & table.astype(bool)].sum()
    final = frozenset(oracle.vstar[b] for b in range(ns) if c >> b & 1)
    return Occupancy(visits, min_size, float(at_min / max(1, iterations)), final)


def spectral_radius(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def bonacich_centrality(M: np.ndarray, alpha: float) -> np.ndarray:
    """Walk-counting influence centrality ``c = 1 + alpha M^T c``.

    ``M[i, j]`` is the weight node ``i`` puts on ``j``, so ``j`` scores highly
    when it influences nodes that are themselves influential.
    """
    rho = spectral_radius(M)
    if rho > 0 and alpha >= 1.0 / rho:
        raise ValueError(f"attenuation {alpha} must be below 1/spectral radius = {1.0 / rho}")
    n = M.shape[0]
    return np.linalg.solve(np.eye(n) - alpha * M.T, np.ones(n))


@dataclass
class GreedyResult:
    feasible: bool
    ranking: tuple
    centrality: np.ndarray
    prefix: frozenset | None
    alpha: float
    layer: str

    @property
    def size(self) -> int | None:
        return None if self.prefix is None else len(self.prefix)

    def to_dict(self, labels=None) -> dict:
        d = {
            "feasible": self.feasible,
            "result": "ok" if self.feasible else "infeasible",
            "ranking": list(self.ranking),
            "prefix": sorted(self.prefix) if self.prefix is not None else None,
            "size": self.size,
            "alpha": self.alpha,
            "layer": self.layer,
        }
        if labels:
            d["ranking_labels"] = [labels[i] for i in self.ranking]
        return d


def greedy_centrality_baseline(net: LayeredNetwork, params: ModelParams, VX, VY, *,
                               layer: str = "A", alpha: float | None = None,
                               alpha_scale: float = 0.85,
                               oracle: AdmissibilityOracle | None = None) -> GreedyResult:
    """Add controllable nodes by decreasing centrality until the prefix is admissible."""
    M = {"A": net.A, "W": net.W}.get(layer)
    if M is None:
        raise ValueError("layer must be 'A' or 'W'")
    if alpha is None:
        alpha = alpha_scale / spectral_radius(M)
    c = bonacich_centrality(M, alpha)
    oracle = oracle or AdmissibilityOracle(net, params, VX, VY)
    key = np.round(c, 12)
    ranking = tuple(sorted(oracle.vstar, key=lambda i: (-key[i], i)))
    for k in range(1, len(ranking) + 1):
        prefix = frozenset(ranking[:k])
        if oracle.check_mask(_mask(prefix)):
            return GreedyResult(True, ranking, c, prefix, float(alpha), layer)
    return GreedyResult(False, ranking, c, None, float(alpha), layer)


@dataclass(frozen=True)
class SubmodularityViolation:
    variable: str
    self_weight: float
    lam: float
    beta: float
    fixed: frozenset
    S: frozenset
    T: frozenset
    phis: tuple  # phi(S), phi(T), phi(S | T), phi(S & T)


def find_submodularity_violation(variable: str = "x", self_weights=(0.0, 1 / 3, 2 / 3),
                                 grid=tuple(np.round(np.arange(0.1, 1.0, 0.1), 10))):
    """Search two-node networks for ``phi(S) + phi(T) < phi(S|T) + phi(S&T)``.

    ``variable`` picks which argument of phi varies; the other one ranges over
    all subsets of the two nodes.  Returns the first violation found, or None.
    """
    if variable not in ("x", "y"):
        raise ValueError("variable must be 'x' or 'y'")
    subsets = [frozenset(s) for k in range(3) for s in itertools.combinations(range(2), k)]
    for s in self_weights:
        M = np.array([[s, 1 - s], [1 - s, s]])
        net = LayeredNetwork(M, M)
        for lam in grid:
            for beta in grid:
                params = ModelParams.homogeneous(2, lam, beta)
                for fixed in subsets:
                    def f(Z):
                        CX, CY = (Z, fixed) if variable == "x" else (fixed, Z)
                        return run_algorithm1(net, params, CX, CY).phi
                    vals = {Z: f(Z) for Z in subsets}
                    for S, T in itertools.combinations(subsets, 2):
                        if vals[S] + vals[T] < vals[S | T] + vals[S & T]:
                            return SubmodularityViolation(variable, float(s), float(lam), float(beta),
                                                          fixed, S, T,
                                                          (vals[S], vals[T], vals[S | T], vals[S & T]))
    return None


def result_json(result: SearchResult, labels=None, **extra) -> str:
    d = result.to_dict(labels)
    d.update(extra)
    return json.dumps(d, indent=2, sort_keys=True)


def complete_graph_check_sizes(n: int, lam: float, beta: float, scenario: str) -> int | None:
    """Minimal control size on the complete graph found by exact phi evaluation."""
    net = make_complete(n)
    params = ModelParams.homogeneous(n, lam, beta)
    for k in range(n + 1):
        C = range(k)
        CX = C if scenario in ("action", "joint") else ()
        CY = C if scenario in ("opinion", "joint") else ()
        if run_algorithm1(net, params, CX, CY).phi:
            return k
    return None


__all__ = [
    "split_control", "AdmissibilityOracle", "is_admissible", "SearchConfig", "chain_step",
    "SearchTrace", "SearchResult", "minimize_control_set", "merge_results",
    "brute_force_minimum", "admissibility_table", "chain_occupancy", "bonacich_centrality",
    "greedy_centrality_baseline", "find_submodularity_violation", "spectral_radius",
    "complete_graph_check_sizes",
]
