"""Two-layer influence networks and per-node model parameters.

A :class:`LayeredNetwork` holds two row-stochastic matrices over the same
node set: ``A`` (how much node *i* weighs the *action* of node *j*) and ``W``
(how much node *i* weighs the *opinion* of node *j*).  Row ``i`` therefore
lists the in-neighbours of ``i``; the directed edge ``j -> i`` exists when
``A[i, j] > 0`` (resp. ``W[i, j] > 0``).

Raw contact counts become weights by per-row normalization: each node's
incoming weights are scaled to sum to one.  This is a modelling choice, not
something the data dictates.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

ROW_SUM_TOL = 1e-9


class NetworkError(ValueError):
    """Malformed network input (shapes, parse errors, negative weights)."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LayeredNetwork:
    A: np.ndarray
    W: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        A = _frozen(self.A)
        W = _frozen(self.W)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise NetworkError(f"A must be a non-empty square matrix, got shape {A.shape}")
        if W.shape != A.shape:
            raise NetworkError(f"layer shapes differ: A {A.shape} vs W {W.shape}")
        labels = tuple(str(l) for l in self.labels) or tuple(str(i) for i in range(A.shape[0]))
        if len(labels) != A.shape[0]:
            raise NetworkError(f"{len(labels)} labels for {A.shape[0]} nodes")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def index_of(self, label) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise KeyError(f"unknown node {label!r}") from None

    def edge_count(self, layer: str = "A", undirected: bool = True) -> int:
        """Number of distinct off-diagonal edges with positive weight."""
        M = self.A if layer == "A" else self.W
        mask = M > 0
        np.fill_diagonal(mask, False)
        if undirected:
            return int(np.count_nonzero(np.triu(mask | mask.T, k=1)))
        return int(np.count_nonzero(mask))


@dataclass(frozen=True)
class ModelParams:
    """Per-node weights ``lam`` (actions) and ``beta`` (opinions), each in (0, 1]."""

    lam: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        lam = _frozen(np.atleast_1d(self.lam))
        beta = _frozen(np.atleast_1d(self.beta))
        if lam.ndim != 1 or lam.shape != beta.shape:
            raise ValueError(f"lam and beta must be equal-length vectors, got {lam.shape} and {beta.shape}")
        for name, v in (("lambda", lam), ("beta", beta)):
            bad = np.flatnonzero(~((v > 0) & (v <= 1)))
            if bad.size:
                raise ValueError(f"{name} must lie in (0, 1]; offending nodes {bad.tolist()}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def homogeneous(cls, n: int, lam: float, beta: float) -> "ModelParams":
        return cls(np.full(n, float(lam)), np.full(n, float(beta)))

    @property
    def n(self) -> int:
        return self.lam.shape[0]

    def check_size(self, net: LayeredNetwork) -> None:
        if self.n != net.n:
            raise ValueError(f"parameters cover {self.n} nodes, network has {net.n}")


@dataclass(frozen=True)
class LayerReport:
    row_deviation: np.ndarray
    bad_rows: tuple[int, ...]
    negative_entries: tuple[tuple[int, int], ...]
    entries_above_one: tuple[tuple[int, int], ...]
    strongly_connected: bool
    components: tuple[tuple[int, ...], ...]

    @property
    def stochastic(self) -> bool:
        return not (self.bad_rows or self.negative_entries or self.entries_above_one)


@dataclass(frozen=True)
class ValidationReport:
    layers: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(r.stochastic and r.strongly_connected for r in self.layers.values())

    @property
    def stochastic(self) -> bool:
        return all(r.stochastic for r in self.layers.values())

    def to_dict(self) -> dict:
        out = {"ok": self.ok, "layers": {}}
        for name, r in self.layers.items():
            out["layers"][name] = {
                "stochastic": r.stochastic,
                "strongly_connected": r.strongly_connected,
                "bad_rows": list(r.bad_rows),
                "max_row_deviation": float(np.max(r.row_deviation)) if r.row_deviation.size else 0.0,
                "row_deviations": {str(i): float(r.row_deviation[i]) for i in r.bad_rows},
                "negative_entries": [list(e) for e in r.negative_entries],
                "entries_above_one": [list(e) for e in r.entries_above_one],
                "components": [list(c) for c in r.components] if not r.strongly_connected else [],
            }
        return out


def strong_components(M: np.ndarray) -> list[list[int]]:
    """Strongly connected components of the graph with an edge j -> i when M[i, j] > 0."""
    ncomp, lab = connected_components(csr_matrix(M > 0), directed=True, connection="strong")
    comps = [np.flatnonzero(lab == c).tolist() for c in range(ncomp)]
    comps.sort(key=lambda c: (-len(c), c[0]))
    return comps


def _layer_report(M: np.ndarray) -> LayerReport:
    dev = np.abs(M.sum(axis=1) - 1.0)
    comps = strong_components(M)
    return LayerReport(
        row_deviation=dev,
        bad_rows=tuple(np.flatnonzero(dev > ROW_SUM_TOL).tolist()),
        negative_entries=tuple(map(tuple, np.argwhere(M < 0).tolist())),
        entries_above_one=tuple(map(tuple, np.argwhere(M > 1 + ROW_SUM_TOL).tolist())),
        strongly_connected=len(comps) == 1,
        components=tuple(tuple(c) for c in comps),
    )


def validate_network(net: LayeredNetwork) -> ValidationReport:
    return ValidationReport({"A": _layer_report(net.A), "W": _layer_report(net.W)})


def require_valid(net: LayeredNetwork, allow_reducible: bool = False) -> None:
    """Raise :class:`NetworkError` unless both layers are stochastic (and irreducible)."""
    rep = validate_network(net)
    for name, r in rep.layers.items():
        if not r.stochastic:
            raise NetworkError(
                f"layer {name} is not row-stochastic: rows {list(r.bad_rows)[:10]}, "
                f"negative entries {list(r.negative_entries)[:5]}"
            )
        if not allow_reducible and not r.strongly_connected:
            raise NetworkError(
                f"layer {name} is not strongly connected ({len(r.components)} components); "
                "control each component separately or pass allow_reducible=True"
            )


def normalize_rows(raw, zero_row_policy: str = "reject") -> np.ndarray:
    """Scale each row of a nonnegative matrix to sum to one.

    ``zero_row_policy`` is ``"reject"`` (raise) or ``"self_loop"`` (replace the
    row with a unit self-loop).
    """
    M = np.array(raw, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NetworkError(f"expected a square matrix, got shape {M.shape}")
    if np.any(M < 0):
        raise NetworkError("negative weights cannot be normalized")
    if zero_row_policy not in ("reject", "self_loop"):
        raise ValueError(f"unknown zero_row_policy {zero_row_policy!r}")
    s = M.sum(axis=1)
    zero = np.flatnonzero(s == 0)
    if zero.size:
        if zero_row_policy == "reject":
            raise NetworkError(f"rows with zero total weight: {zero.tolist()}")
        M[zero, :] = 0.0
        M[zero, zero] = 1.0
        s[zero] = 1.0
    # rows that already sum to one are left bit-for-bit untouched
    exact = s == 1.0
    M[~exact] /= s[~exact, None]
    return M


def make_complete(n: int) -> LayeredNetwork:
    """Homogeneous complete graph without self-loops: off-diagonal weights 1/(n-1)."""
    if n < 2:
        raise ValueError("complete graph needs n >= 2")
    M = np.full((n, n), 1.0 / (n - 1))
    np.fill_diagonal(M, 0.0)
    return LayeredNetwork(M, M)


def _ring_adjacency(n: int) -> np.ndarray:
    R = np.zeros((n, n))
    idx = np.arange(n)
    R[idx, (idx + 1) % n] = 1.0
    R[idx, (idx - 1) % n] = 1.0
    return R


def make_family(kind: str, n: int, seed: int | None = None, *, density: float = 0.3,
                edges: int | None = None, groups: int | None = None,
                within: float = 0.8) -> LayeredNetwork:
    """Small test networks.

    ``star``: node 0 is the hub; leaves put all weight on it.
    ``ring``: each node splits its weight between its two ring neighbours.
    ``random_regularized``: random directed edges (probability ``density``)
    with random weights on both layers, superimposed on a bidirectional ring so
    that both layers are strongly connected.
    ``contact``: a connected undirected weighted graph with exactly ``edges``
    edges, clustered into ``groups`` households (default ``n // 7``); a
    fraction ``within`` of the extra edges stays inside a household and those
    carry larger contact counts.  Shared by both layers.
    """
    if n < 2:
        raise ValueError("network families need n >= 2")
    if kind == "star":
        M = np.zeros((n, n))
        M[1:, 0] = 1.0
        M[0, 1:] = 1.0
        return LayeredNetwork(normalize_rows(M), normalize_rows(M))
    if kind == "ring":
        M = normalize_rows(_ring_adjacency(n))
        return LayeredNetwork(M, M)
    if kind in ("random_regularized", "contact") and seed is None:
        raise ValueError(f"{kind} networks require a seed")
    rng = np.random.default_rng(seed)
    if kind == "random_regularized":
        layers = []
        for _ in range(2):
            mask = rng.random((n, n)) < density
            np.fill_diagonal(mask, False)
            mask |= _ring_adjacency(n) > 0
            layers.append(normalize_rows(np.where(mask, rng.uniform(0.1, 1.0, (n, n)), 0.0)))
        return LayeredNetwork(*layers)
    if kind == "contact":
        return _contact_network(n, edges if edges is not None else 4 * n, rng, groups, within)
    raise ValueError(f"unknown network family {kind!r}")


def _contact_network(n, m, rng, groups, within):
    if not n - 1 <= m <= n * (n - 1) // 2:
        raise ValueError(f"cannot build a connected simple graph with n={n}, edges={m}")
    k = groups or max(1, n // 7)
    members = np.array_split(rng.permutation(n), k)
    gid = np.empty(n, dtype=int)
    for g, ms in enumerate(members):
        gid[ms] = g
    adj = np.zeros((n, n), dtype=bool)
    order = rng.permutation(n)
    # random spanning tree, attaching preferably inside the household
    for a in range(1, n):
        v = order[a]
        earlier = order[:a]
        same = earlier[gid[earlier] == gid[v]]
        u = rng.choice(same) if same.size and rng.random() < within else rng.choice(earlier)
        adj[u, v] = adj[v, u] = True
    while np.count_nonzero(np.triu(adj, 1)) < m:
        u = rng.integers(n)
        v = rng.choice(members[gid[u]]) if rng.random() < within else rng.integers(n)
        if u != v:
            adj[u, v] = adj[v, u] = True
    same = gid[:, None] == gid[None, :]
    counts = np.where(same, rng.geometric(0.1, (n, n)), rng.geometric(0.5, (n, n))).astype(float)
    counts = np.triu(np.where(adj, counts, 0.0), 1)
    M = normalize_rows(counts + counts.T)
    return LayeredNetwork(M, M)


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, encoding="utf-8"), True
    return source, False


def read_edge_records(source) -> list[tuple[str, str, float]]:
    """Parse ``src,dst,weight`` lines; ``#`` lines and blank lines are skipped."""
    fh, close = _open_text(source)
    try:
        out = []
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = [p.strip() for p in s.split(",")]
            if len(parts) not in (2, 3):
                raise NetworkError(f"line {lineno}: expected 'src,dst,weight', got {s!r}")
            try:
                src, dst = str(int(parts[0])), str(int(parts[1]))
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError:
                raise NetworkError(f"line {lineno}: cannot parse {s!r}") from None
            if not np.isfinite(w) or w < 0:
                raise NetworkError(f"line {lineno}: weight must be a nonnegative number, got {parts[2]}")
            out.append((src, dst, w))
        return out
    finally:
        if close:
            fh.close()


def _records_to_matrix(records, index, undirected, weight_mode):
    n = len(index)
    M = np.zeros((n, n))
    for src, dst, w in records:
        if src not in index or dst not in index:
            continue
        if weight_mode == "binary":
            w = 1.0 if w > 0 else 0.0
        i, j = index[src], index[dst]
        # the record src,dst means src influences dst: weight lands in row dst
        M[j, i] += w
        if undirected and i != j:
            M[i, j] += w
    return M


def load_edge_list(source, layer_mode: str = "shared", weight_mode: str = "raw", *,
                   opinion_source=None, undirected: bool = True,
                   largest_component: bool = False,
                   zero_row_policy: str = "reject") -> LayeredNetwork:
    """Build a network from one (``shared``) or two (``split``) edge lists.

    Duplicate records accumulate.  Node ids are remapped to ``0..n-1`` in
    ascending numeric order; the original ids become the labels.  With
    ``largest_component`` the graph is first restricted to the largest
    strongly connected component of the union of both layers.
    """
    if layer_mode not in ("shared", "split"):
        raise ValueError(f"layer_mode must be 'shared' or 'split', got {layer_mode!r}")
    if weight_mode not in ("raw", "binary"):
        raise ValueError(f"weight_mode must be 'raw' or 'binary', got {weight_mode!r}")
    rec_a = read_edge_records(source)
    if layer_mode == "split":
        if opinion_source is None:
            raise ValueError("split layer mode needs opinion_source")
        rec_w = read_edge_records(opinion_source)
    else:
        rec_w = rec_a
    ids = sorted({r[0] for r in rec_a + rec_w} | {r[1] for r in rec_a + rec_w}, key=int)
    if not ids:
        raise NetworkError("edge list is empty")
    index = {lab: k for k, lab in enumerate(ids)}
    RA = _records_to_matrix(rec_a, index, undirected, weight_mode)
    RW = RA if layer_mode == "shared" else _records_to_matrix(rec_w, index, undirected, weight_mode)
    if largest_component:
        keep = strong_components(RA + RW)[0]
        if len(keep) == 1 and (RA + RW)[keep[0], keep[0]] == 0:
            raise NetworkError("graph is empty after restricting to the largest component")
        ids = [ids[k] for k in keep]
        RA = RA[np.ix_(keep, keep)]
        RW = RW[np.ix_(keep, keep)] if layer_mode == "split" else RA
    A = normalize_rows(RA, zero_row_policy)
    W = A if layer_mode == "shared" else normalize_rows(RW, zero_row_policy)
    return LayeredNetwork(A, W, tuple(ids))


def dump_network(net: LayeredNetwork, dest: TextIO | None = None) -> str:
    """Row-major text dump with 17 significant digits; exact round-trip."""
    buf = io.StringIO()
    buf.write("# coevo layered network v1\n")
    buf.write(f"n,{net.n}\n")
    buf.write("labels," + ",".join(net.labels) + "\n")
    for name, M in (("A", net.A), ("W", net.W)):
        buf.write(f"layer,{name}\n")
        for row in M:
            buf.write(",".join(format(v, ".17g") for v in row) + "\n")
    text = buf.getvalue()
    if dest is not None:
        dest.write(text)
    return text


def load_network_dump(source) -> LayeredNetwork:
    fh, close = _open_text(source)
    try:
        lines = [l.rstrip("\n") for l in fh if l.strip() and not l.startswith("#")]
    finally:
        if close:
            fh.close()
    try:
        n = int(lines[0].split(",")[1])
        labels = tuple(lines[1].split(",")[1:])
        if lines[2] != "layer,A" or lines[3 + n] != "layer,W":
            raise NetworkError("missing layer headers")
        A = np.array([[float(v) for v in l.split(",")] for l in lines[3:3 + n]])
        W = np.array([[float(v) for v in l.split(",")] for l in lines[4 + n:4 + 2 * n]])
    except (IndexError, ValueError) as exc:
        raise NetworkError(f"malformed network dump: {exc}") from None
    return LayeredNetwork(A, W, labels)


def node_indices(net: LayeredNetwork, nodes: Iterable) -> frozenset[int]:
    return frozenset(net.index_of(v) for v in nodes)


def as_index_set(nodes: Iterable[int] | None, n: int) -> frozenset[int]:
    s = frozenset(int(v) for v in (nodes or ()))
    bad = [v for v in s if not 0 <= v < n]
    if bad:
        raise ValueError(f"node indices out of range 0..{n - 1}: {sorted(bad)}")
    return s


__all__ = (
    "ROW_SUM_TOL", "NetworkError", "LayeredNetwork", "ModelParams", "LayerReport",
    "ValidationReport", "validate_network", "require_valid", "normalize_rows",
    "make_complete", "make_family", "load_edge_list", "read_edge_records",
    "dump_network", "load_network_dump", "strong_components", "as_index_set",
)
