"""Block-structured interaction graphs.

A graph is r blocks; every block is a clique over its own nodes. Each
block splits into central nodes (no links outside the block) and
peripheral nodes (additionally linked to peripheral nodes of other
blocks). Central adjacency is implicit; only the peripheral edge set is
materialized (intra-block peripheral pairs are required to be present —
the block is a clique — and cross-block pairs are whatever the design
says).

Node ids are global, contiguous, 0-based: block 0 centrals, block 0
peripherals, block 1 centrals, ... Class and block of a node are O(1)
lookups.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidArgumentError,
    InvalidConfigurationError,
    WrongClassError,
)

CENTRAL, PERIPHERAL = 0, 1

__all__ = [
    "CENTRAL",
    "PERIPHERAL",
    "BlockGraph",
    "ProportionTargets",
    "RegularityReport",
    "build_complete_peripheral",
    "build_regular_peripheral",
    "neighborhood_proportions",
    "check_regularity",
]


class BlockGraph:
    """Immutable block graph; see module docstring for the node layout.

    peripheral_edges: iterable of (a, b) global node id pairs. Must
    contain every intra-block peripheral pair (clique property) and no
    self-loops or central endpoints.
    """

    def __init__(self, block_sizes, peripheral_edges):
        sizes = [(int(nc), int(npp)) for nc, npp in block_sizes]
        if not sizes:
            raise InvalidConfigurationError("need at least one block")
        for j, (nc, npp) in enumerate(sizes):
            if nc < 1 or npp < 1:
                raise InvalidConfigurationError(
                    f"block {j}: every block needs >=1 central and >=1 "
                    f"peripheral node, got ({nc},{npp})"
                )
        self.r = len(sizes)
        self.block_sizes = tuple(sizes)
        self.n_total = sum(nc + npp for nc, npp in sizes)

        # node -> (block, class) tables and per-block id ranges
        self._block_of = np.empty(self.n_total, dtype=np.int64)
        self._class_of = np.empty(self.n_total, dtype=np.int64)
        self._central_range = []
        self._peripheral_range = []
        pos = 0
        for j, (nc, npp) in enumerate(sizes):
            self._central_range.append((pos, pos + nc))
            self._peripheral_range.append((pos + nc, pos + nc + npp))
            self._block_of[pos : pos + nc + npp] = j
            self._class_of[pos : pos + nc] = CENTRAL
            self._class_of[pos + nc : pos + nc + npp] = PERIPHERAL
            pos += nc + npp

        edges = set()
        for a, b in peripheral_edges:
            a, b = int(a), int(b)
            if a == b:
                raise InvalidConfigurationError(f"self-loop at node {a}")
            if not (0 <= a < self.n_total and 0 <= b < self.n_total):
                raise InvalidConfigurationError(f"edge ({a},{b}) out of range")
            if self._class_of[a] != PERIPHERAL or self._class_of[b] != PERIPHERAL:
                raise InvalidConfigurationError(
                    f"edge ({a},{b}) touches a central node"
                )
            edges.add((min(a, b), max(a, b)))
        self.peripheral_edges = tuple(sorted(edges))

        self._nbrs = {n: [] for n in self.peripheral_nodes_all()}
        for a, b in self.peripheral_edges:
            self._nbrs[a].append(b)
            self._nbrs[b].append(a)
        for n in self._nbrs:
            self._nbrs[n].sort()

        # clique property: all intra-block peripheral pairs present
        for j in range(self.r):
            lo, hi = self._peripheral_range[j]
            for a in range(lo, hi):
                for b in range(a + 1, hi):
                    if (a, b) not in edges:
                        raise InvalidConfigurationError(
                            f"block {j} peripherals {a},{b} not adjacent; "
                            "intra-block peripheral pairs are mandatory"
                        )

        # M_i^n table: peripheral node -> neighbor count in each block,
        # own block counted as N_j^p (self included, clique).
        self._cross = {}
        for n in self.peripheral_nodes_all():
            j = int(self._block_of[n])
            counts = [0] * self.r
            for m in self._nbrs[n]:
                counts[int(self._block_of[m])] += 1
            counts[j] += 1  # self
            if counts[j] != sizes[j][1]:
                raise InvalidConfigurationError("clique accounting broken")
            self._cross[n] = tuple(counts)

        n_perip = sum(npp for _, npp in sizes)
        self.is_complete_peripheral = (
            len(self.peripheral_edges) == n_perip * (n_perip - 1) // 2
        )
        # realized cross-degree matrix when the design is regular, else None
        self.cross_degree_matrix = self._regular_cross_matrix()

    def _regular_cross_matrix(self):
        mat = []
        for j in range(self.r):
            rows = {self._cross[n] for n in self.peripheral_nodes(j)}
            if len(rows) != 1:
                return None
            mat.append(rows.pop())
        return tuple(mat)

    # --- queries -----------------------------------------------------

    def block_of(self, n) -> int:
        return int(self._block_of[n])

    def class_of(self, n) -> int:
        return int(self._class_of[n])

    def is_peripheral(self, n) -> bool:
        return self._class_of[n] == PERIPHERAL

    def central_nodes(self, j) -> range:
        lo, hi = self._central_range[j]
        return range(lo, hi)

    def peripheral_nodes(self, j) -> range:
        lo, hi = self._peripheral_range[j]
        return range(lo, hi)

    def peripheral_nodes_all(self):
        return [n for j in range(self.r) for n in self.peripheral_nodes(j)]

    def peripheral_neighbors(self, n):
        return self._nbrs[n]

    def block_size(self, j) -> int:
        nc, npp = self.block_sizes[j]
        return nc + npp

    def cross_counts(self, n):
        """Per-block peripheral neighbor counts of peripheral node n, own
        block counted with self (so entry j equals N_j^p)."""
        if not self.is_peripheral(n):
            raise WrongClassError(f"node {n} is central")
        return self._cross[n]

    def degree(self, n) -> int:
        """Graph degree: block clique plus cross-block peripheral links."""
        j = self.block_of(n)
        if not self.is_peripheral(n):
            return self.block_size(j) - 1
        cross = sum(
            c for i, c in enumerate(self._cross[n]) if i != j
        )
        return self.block_size(j) - 1 + cross

    def __eq__(self, other):
        return (
            isinstance(other, BlockGraph)
            and self.block_sizes == other.block_sizes
            and self.peripheral_edges == other.peripheral_edges
        )

    def __hash__(self):
        return hash((self.block_sizes, self.peripheral_edges))

    def __repr__(self):
        return (
            f"BlockGraph(r={self.r}, sizes={list(self.block_sizes)}, "
            f"edges={len(self.peripheral_edges)})"
        )

    # --- serialization ------------------------------------------------

    def to_json_obj(self):
        return {
            "blocks": [
                {"central": nc, "peripheral": npp}
                for nc, npp in self.block_sizes
            ],
            "peripheral_edges": [[a, b] for a, b in self.peripheral_edges],
        }

    @classmethod
    def from_json_obj(cls, obj):
        if not isinstance(obj, dict):
            raise InvalidConfigurationError("graph object must be a JSON dict")
        unknown = set(obj) - {"blocks", "peripheral_edges"}
        if unknown:
            raise InvalidConfigurationError(
                f"unknown graph fields: {sorted(unknown)}"
            )
        try:
            blocks = [(b["central"], b["peripheral"]) for b in obj["blocks"]]
        except (KeyError, TypeError) as exc:
            raise InvalidConfigurationError(f"malformed blocks field: {exc}")
        return cls(blocks, obj.get("peripheral_edges", []))

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str):
        return cls.from_json_obj(json.loads(text))


def build_complete_peripheral(block_sizes) -> BlockGraph:
    """All pairs of peripheral nodes (any blocks) adjacent."""
    perips = []
    pos = 0
    for nc, npp in block_sizes:
        perips.extend(range(pos + nc, pos + nc + npp))
        pos += nc + npp
    edges = [
        (perips[a], perips[b])
        for a in range(len(perips))
        for b in range(a + 1, len(perips))
    ]
    return BlockGraph(block_sizes, edges)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def build_regular_peripheral(block_sizes, cross_degree_fractions) -> BlockGraph:
    """Regular cross-block design: every peripheral of block j links to the
    same number M_i = round(f_ji * N_i^p) of peripherals in each foreign
    block i. Fractions: scalar in (0,1] applied to every ordered pair, or an
    r x r symmetric matrix (diagonal ignored).

    Feasibility needs N_j^p * M_i == N_i^p * M_j for every pair (the two
    sides count the same bipartite edge set); violations raise. Realized
    counts end up in graph.cross_degree_matrix.
    """
    sizes = [(int(nc), int(npp)) for nc, npp in block_sizes]
    r = len(sizes)
    f = np.asarray(cross_degree_fractions, dtype=float)
    if f.ndim == 0:
        f = np.full((r, r), float(f))
    if f.shape != (r, r):
        raise InvalidConfigurationError(
            f"cross_degree_fractions must be scalar or {r}x{r}"
        )
    for j in range(r):
        for i in range(j + 1, r):
            if abs(f[j, i] - f[i, j]) > 1e-12:
                raise InvalidConfigurationError(
                    f"fractions not symmetric at ({j},{i})"
                )
            if not (0.0 < f[j, i] <= 1.0):
                raise InvalidConfigurationError(
                    f"fraction for pair ({j},{i}) must be in (0,1], "
                    f"got {f[j, i]}"
                )

    offsets = []
    pos = 0
    for nc, npp in sizes:
        offsets.append(pos + nc)
        pos += nc + npp

    def perip(j, a):
        return offsets[j] + a

    edges = []
    # own-block cliques
    for j, (_, npp) in enumerate(sizes):
        edges.extend(
            (perip(j, a), perip(j, b))
            for a in range(npp)
            for b in range(a + 1, npp)
        )
    for j in range(r):
        for i in range(j + 1, r):
            u, v = sizes[j][1], sizes[i][1]
            mu = _round_half_up(f[j, i] * v)  # block-j node's degree into i
            mv = _round_half_up(f[i, j] * u)
            if mu < 1 or mv < 1:
                raise InvalidConfigurationError(
                    f"blocks ({j},{i}): rounded cross degree is 0; "
                    "fraction too small for the block size"
                )
            if u * mu != v * mv:
                raise InvalidConfigurationError(
                    f"blocks ({j},{i}): degrees ({mu},{mv}) infeasible: "
                    f"{u}*{mu} != {v}*{mv}"
                )
            # consecutive-runs biregular bipartite construction: rows take
            # columns (a*mu .. a*mu+mu-1) mod v; columns receive u*mu/v = mv
            # each since the run ends tile 0..u*mu-1.
            for a in range(u):
                for t in range(mu):
                    b = (a * mu + t) % v
                    edges.append((perip(j, a), perip(i, b)))
    return BlockGraph(sizes, edges)


def neighborhood_proportions(graph: BlockGraph, node: int) -> np.ndarray:
    """Weight of each node group in a peripheral node's neighborhood
    (self included): [central share, block-1 peripheral share, ...,
    block-r peripheral share]. Sums to 1 exactly: the last entry is
    computed as one minus the rest.
    """
    if not graph.is_peripheral(node):
        raise WrongClassError(
            f"node {node} is central; proportions are a peripheral-node notion"
        )
    j = graph.block_of(node)
    counts = graph.cross_counts(node)
    denom = graph.degree(node) + 1
    out = np.empty(graph.r + 1)
    out[0] = graph.block_sizes[j][0] / denom
    for i in range(graph.r - 1):
        out[1 + i] = counts[i] / denom
    out[graph.r] = 1.0 - out[: graph.r].sum()
    return out


@dataclass(frozen=True)
class ProportionTargets:
    """Limiting proportions the finite graphs are tending to.

    p_c[j]: central fraction of block j; alpha_c[j] and q[j][i]: weight of
    own-block centrals resp. block-i peripherals in a block-j peripheral
    node's neighborhood; alpha[j]: block j's share of all nodes.
    """

    p_c: tuple
    alpha_c: tuple
    q: tuple  # r rows of r entries
    alpha: tuple

    def __post_init__(self):
        r = len(self.p_c)
        object.__setattr__(self, "p_c", tuple(float(x) for x in self.p_c))
        object.__setattr__(
            self, "alpha_c", tuple(float(x) for x in self.alpha_c)
        )
        object.__setattr__(
            self, "q", tuple(tuple(float(x) for x in row) for row in self.q)
        )
        object.__setattr__(self, "alpha", tuple(float(x) for x in self.alpha))
        if not (len(self.alpha_c) == len(self.alpha) == len(self.q) == r):
            raise InvalidArgumentError("target arrays disagree on block count")
        for j in range(r):
            if len(self.q[j]) != r:
                raise InvalidArgumentError("q must be r x r")
            if not (0.0 < self.p_c[j] < 1.0):
                raise InvalidArgumentError(
                    f"p_c[{j}]={self.p_c[j]} outside (0,1)"
                )
            if not (0.0 < self.alpha_c[j] < 1.0):
                raise InvalidArgumentError(
                    f"alpha_c[{j}]={self.alpha_c[j]} outside (0,1)"
                )
            if any(not (0.0 < x < 1.0) for x in self.q[j]):
                raise InvalidArgumentError(f"q[{j}] entries must be in (0,1)")
            if not (0.0 < self.alpha[j] <= 1.0):
                raise InvalidArgumentError(
                    f"alpha[{j}]={self.alpha[j]} outside (0,1]"
                )
            s = self.alpha_c[j] + sum(self.q[j])
            if abs(s - 1.0) > 1e-9:
                raise InvalidArgumentError(
                    f"alpha_c[{j}] + sum(q[{j}]) = {s}, expected 1"
                )
        if abs(sum(self.alpha) - 1.0) > 1e-9:
            raise InvalidArgumentError("alpha must sum to 1")

    @property
    def r(self) -> int:
        return len(self.p_c)

    @property
    def p_p(self) -> tuple:
        return tuple(1.0 - x for x in self.p_c)

    @classmethod
    def from_graph(cls, graph: BlockGraph) -> "ProportionTargets":
        """Exact finite-N ratios of a regular-design graph."""
        if graph.cross_degree_matrix is None:
            raise InvalidConfigurationError(
                "graph is not a regular design; per-node proportions differ"
            )
        p_c, alpha_c, q, alpha = [], [], [], []
        n_tot = graph.n_total
        for j in range(graph.r):
            nc, npp = graph.block_sizes[j]
            counts = graph.cross_degree_matrix[j]
            denom = nc + sum(counts)  # deg+1 of a block-j peripheral
            p_c.append(nc / (nc + npp))
            alpha_c.append(nc / denom)
            q.append(tuple(c / denom for c in counts))
            alpha.append((nc + npp) / n_tot)
        return cls(tuple(p_c), tuple(alpha_c), tuple(q), tuple(alpha))

    def to_json_obj(self):
        return {
            "p_c": list(self.p_c),
            "alpha_c": list(self.alpha_c),
            "q": [list(row) for row in self.q],
            "alpha": list(self.alpha),
        }

    @classmethod
    def from_json_obj(cls, obj):
        unknown = set(obj) - {"p_c", "alpha_c", "q", "alpha"}
        if unknown:
            raise InvalidArgumentError(
                f"unknown target fields: {sorted(unknown)}"
            )
        try:
            return cls(obj["p_c"], obj["alpha_c"], obj["q"], obj["alpha"])
        except KeyError as exc:
            raise InvalidArgumentError(f"targets missing field {exc}")


@dataclass(frozen=True)
class RegularityReport:
    """Max deviations of finite-N neighborhood ratios from the targets."""

    q_resid: float        # |M_i^n/(deg+1) - q_ji| incl. own block
    alpha_c_resid: float  # |N_j^c/(deg+1) - alpha_c_j|
    p_c_resid: float      # |N_j^c/N_j - p_c_j|
    block_share_resid: float  # |N_j/N - alpha_j|

    @property
    def max_resid(self) -> float:
        return max(
            self.q_resid, self.alpha_c_resid, self.p_c_resid,
            self.block_share_resid,
        )


def check_regularity(graph: BlockGraph, targets: ProportionTargets):
    if targets.r != graph.r:
        raise InvalidArgumentError(
            f"targets have r={targets.r}, graph has r={graph.r}"
        )
    q_res = alpha_c_res = p_res = share_res = 0.0
    for j in range(graph.r):
        nc, npp = graph.block_sizes[j]
        p_res = max(p_res, abs(nc / (nc + npp) - targets.p_c[j]))
        share_res = max(
            share_res, abs((nc + npp) / graph.n_total - targets.alpha[j])
        )
        for n in graph.peripheral_nodes(j):
            denom = graph.degree(n) + 1
            alpha_c_res = max(alpha_c_res, abs(nc / denom - targets.alpha_c[j]))
            counts = graph.cross_counts(n)
            for i in range(graph.r):
                q_res = max(q_res, abs(counts[i] / denom - targets.q[j][i]))
    return RegularityReport(q_res, alpha_c_res, p_res, share_res)
