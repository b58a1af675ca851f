"""Event-driven simulation of the interacting particle system.

Every node carries a color in 0..K-1 and jumps along allowed color
edges at rates driven by its neighborhood's empirical color measure
(gamma_c-weighted over central neighbors, gamma_p-weighted over
peripheral ones, self included, everything divided by deg+1 — the
normalized block structure makes all weights equal to table value over
neighborhood size).

The sampler is the direct method: exponential waiting time at the total
rate, then category sampling. Nodes sharing an identical neighborhood
(all centrals of a block; all peripherals of a block when the
peripheral graph is complete) are aggregated into one group, so the
per-event work is O(groups * K * edges) instead of O(N). Non-complete
peripheral designs fall back to one group per peripheral node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .errors import (
    InternalConsistencyError,
    InvalidArgumentError,
)
from .graph import CENTRAL, PERIPHERAL, BlockGraph, neighborhood_proportions
from .rates import as_block_rates

__all__ = [
    "SystemState",
    "Trajectory",
    "LocalMeasure",
    "EmpiricalSeries",
    "local_empirical",
    "simulate",
    "empirical_process",
]

FULL_REFRESH_EVERY = 10_000  # guard against float drift in running sums


@dataclass
class SystemState:
    """Node colors plus the per-(block, class) color count table."""

    colors: np.ndarray
    counts: tuple  # counts[j][cls][z], ints

    @classmethod
    def from_colors(cls, graph: BlockGraph, colors, K: int) -> "SystemState":
        colors = np.asarray(colors, dtype=np.int64)
        if colors.shape != (graph.n_total,):
            raise InvalidArgumentError(
                f"need {graph.n_total} colors, got shape {colors.shape}"
            )
        if colors.min() < 0 or colors.max() >= K:
            raise InvalidArgumentError(f"colors must lie in 0..{K - 1}")
        return cls(colors, recount(graph, colors, K))

    @property
    def K(self) -> int:
        return len(self.counts[0][0])

    def class_size(self, j: int, cls: int) -> int:
        return sum(self.counts[j][cls])


def recount(graph: BlockGraph, colors, K: int):
    counts = []
    for j in range(graph.r):
        row_c = [0] * K
        row_p = [0] * K
        for n in graph.central_nodes(j):
            row_c[colors[n]] += 1
        for n in graph.peripheral_nodes(j):
            row_p[colors[n]] += 1
        counts.append((tuple(row_c), tuple(row_p)))
    return tuple(counts)


@dataclass
class Trajectory:
    initial: SystemState
    events: list  # (t, node, from_color, to_color), strictly increasing t
    horizon: float

    @property
    def final_colors(self) -> np.ndarray:
        colors = self.initial.colors.copy()
        for _, node, _, zp in self.events:
            colors[node] = zp
        return colors

    def to_csv(self, fp):
        fp.write("t,node,from,to\n")
        for t, node, z, zp in self.events:
            fp.write(f"{t:.17g},{node},{z},{zp}\n")


@dataclass
class LocalMeasure:
    """A node's neighborhood measure, decomposed by node group."""

    parts: tuple       # group measures, np arrays
    proportions: np.ndarray
    labels: tuple

    def combined(self) -> np.ndarray:
        out = np.zeros_like(self.parts[0])
        for w, part in zip(self.proportions, self.parts):
            if w != 0.0:
                out += w * part
        return out


def local_empirical(state: SystemState, graph: BlockGraph, node: int,
                    ) -> LocalMeasure:
    """Decomposed neighborhood measure of `node` (self included).

    Central node: (own-block central measure, own-block peripheral
    measure) with block-share proportions. Peripheral node: (own-block
    central measure, per-block peripheral neighbor measures) with
    deg+1-normalized proportions; a block contributing no neighbors gets
    a zero part with proportion 0.
    """
    K = state.K
    j = graph.block_of(node)
    nc, npp = graph.block_sizes[j]
    mu_c = np.asarray(state.counts[j][CENTRAL], dtype=float) / nc
    if not graph.is_peripheral(node):
        mu_p = np.asarray(state.counts[j][PERIPHERAL], dtype=float) / npp
        nj = nc + npp
        return LocalMeasure(
            (mu_c, mu_p),
            np.array([nc / nj, npp / nj]),
            ("central", "peripheral"),
        )
    # peripheral: per-block neighbor scans (self counts for its own block)
    nbr_counts = [np.zeros(K) for _ in range(graph.r)]
    for m in graph.peripheral_neighbors(node):
        nbr_counts[graph.block_of(m)][state.colors[m]] += 1.0
    nbr_counts[j][state.colors[node]] += 1.0
    cross = graph.cross_counts(node)
    parts = [mu_c]
    for i in range(graph.r):
        parts.append(nbr_counts[i] / cross[i] if cross[i] else nbr_counts[i])
    props = neighborhood_proportions(graph, node)
    labels = ("central",) + tuple(f"peripheral_{i}" for i in range(graph.r))
    return LocalMeasure(tuple(parts), props, labels)


# --------------------------------------------------------------------------
# kernel


class _Kernel:
    """Aggregated-group Gillespie state machine.

    Groups: (block, CENTRAL) aggregates always; (block, PERIPHERAL)
    aggregates when the peripheral graph is complete, else one singleton
    group per peripheral node. Each group's per-edge rate is a clamped
    affine function of the flat count vector; the coefficient lists are
    precomputed so a group refresh is a few multiply-adds.
    """

    def __init__(self, graph: BlockGraph, family):
        family = as_block_rates(family, graph.r)
        cg = family.colors
        self.graph = graph
        self.family = family
        self.K = K = cg.K
        self.edges = cg.edges
        self.n_edges = len(cg.edges)

        complete = graph.is_complete_peripheral
        # group tables
        self.members = []    # node id list per group
        self.meta = []       # (block, cls) per group
        self.group_of_node = {}
        for j in range(graph.r):
            self._add_group(j, CENTRAL, list(graph.central_nodes(j)))
        if complete:
            for j in range(graph.r):
                self._add_group(j, PERIPHERAL, list(graph.peripheral_nodes(j)))
        else:
            for j in range(graph.r):
                for n in graph.peripheral_nodes(j):
                    self._add_group(j, PERIPHERAL, [n])
        self.n_groups = len(self.members)

        # coefficient lists: coef[g][e] = [(flat_count_index, weight), ...]
        self.coef = []
        self.beta = []
        for g in range(self.n_groups):
            j, cls = self.meta[g]
            spec = family.spec_for(j, cls)
            if cls == CENTRAL:
                denom = graph.block_size(j)
                central_w = {j: 1.0 / denom}
                perip_nodes = list(graph.peripheral_nodes(j))
                perip_w = {n: 1.0 / denom for n in perip_nodes}
            else:
                node = self.members[g][0]
                denom = graph.degree(node) + 1
                central_w = {j: 1.0 / denom}
                if complete:
                    perip_w = {
                        n: 1.0 / denom
                        for i in range(graph.r)
                        for n in graph.peripheral_nodes(i)
                    }
                else:
                    perip_w = {n: 1.0 / denom
                               for n in graph.peripheral_neighbors(node)}
                    perip_w[node] = 1.0 / denom
            # collapse per-node weights to per-group weights: an aggregated
            # group's count vector already sums over its members, and the
            # members of one group always share one weight here, so the
            # weight enters once per group, not once per node
            perip_gw = {}
            for n, w in perip_w.items():
                perip_gw[self._peripheral_group(n, complete)] = w
            rows = []
            for e in range(self.n_edges):
                gc, gp = spec.gamma_c[e], spec.gamma_p[e]
                acc = {}
                for jj, w in central_w.items():
                    gi = self._central_group(jj)
                    for z in range(K):
                        if gc[z]:
                            idx = gi * K + z
                            acc[idx] = acc.get(idx, 0.0) + w * gc[z]
                for gi, w in perip_gw.items():
                    for z in range(K):
                        if gp[z]:
                            idx = gi * K + z
                            acc[idx] = acc.get(idx, 0.0) + w * gp[z]
                rows.append(sorted(acc.items()))
            self.coef.append(rows)
            self.beta.append([spec.beta[e] for e in range(self.n_edges)])

        # reverse dependencies: jump in g0 dirties every group reading g0
        deps = [set() for _ in range(self.n_groups)]
        for g in range(self.n_groups):
            reads = {idx // K for row in self.coef[g] for idx, _ in row}
            for g0 in reads:
                deps[g0].add(g)
        for g0 in range(self.n_groups):
            deps[g0].add(g0)
        self.deps = [sorted(s) for s in deps]

        self.out_of = [cg.out_edges(z) for z in range(K)]
        self.edge_src = [e[0] for e in cg.edges]
        self.edge_dst = [e[1] for e in cg.edges]

    def _add_group(self, j, cls, members):
        g = len(self.members)
        self.members.append(members)
        self.meta.append((j, cls))
        for n in members:
            self.group_of_node[n] = g
        return g

    def _central_group(self, j):
        return j

    def _peripheral_group(self, n, complete):
        if complete:
            return self.graph.r + self.graph.block_of(n)
        return self.group_of_node[n]

    # -- per-run state -------------------------------------------------

    def load(self, colors):
        K = self.K
        self.colors = [int(c) for c in colors]
        self.cnt = [0] * (self.n_groups * K)
        self.buckets = [
            [[] for _ in range(K)] for _ in range(self.n_groups)
        ]
        self.pos = [0] * self.graph.n_total
        for g, members in enumerate(self.members):
            for n in members:
                z = self.colors[n]
                self.cnt[g * K + z] += 1
                b = self.buckets[g][z]
                self.pos[n] = len(b)
                b.append(n)
        self.rate = [[0.0] * self.n_edges for _ in range(self.n_groups)]
        self.group_total = [0.0] * self.n_groups
        for g in range(self.n_groups):
            self._refresh(g)

    def _refresh(self, g):
        cnt = self.cnt
        rate = self.rate[g]
        beta = self.beta[g]
        K = self.K
        base = 0.0
        for e, row in enumerate(self.coef[g]):
            v = beta[e]
            for idx, w in row:
                v += w * cnt[idx]
            if v < 0.0:
                v = 0.0
            if v != v or v == float("inf"):  # non-finite guard
                raise InternalConsistencyError(
                    f"non-finite rate in group {g} edge {e}"
                )
            rate[e] = v
        gK = g * K
        for z in range(K):
            c = cnt[gK + z]
            if c:
                s = 0.0
                for e in self.out_of[z]:
                    s += rate[e]
                base += c * s
        self.group_total[g] = base

    def run(self, T: float, gen: np.random.Generator, collect=True):
        """Advance to horizon T; returns the event list."""
        draws = _rng.BatchedDraws(gen)
        events = [] if collect else None
        t = 0.0
        n_events = 0
        K = self.K
        cnt = self.cnt
        while True:
            total = 0.0
            for g in range(self.n_groups):
                total += self.group_total[g]
            if total <= 0.0:
                break
            t += draws.exponential() / total
            if t > T:
                break
            # category: group, then (color, edge) inside the group
            target = draws.uniform() * total
            acc = 0.0
            g_pick = -1
            last_pos = -1
            for g in range(self.n_groups):
                gt = self.group_total[g]
                if gt > 0.0:
                    last_pos = g
                acc += gt
                if target < acc:
                    g_pick = g
                    break
            if g_pick < 0:  # float slack at the very top of the walk
                g_pick = last_pos
            acc -= self.group_total[g_pick]
            e_pick = -1
            gK = g_pick * K
            rate = self.rate[g_pick]
            for z in range(K):
                c = cnt[gK + z]
                if not c:
                    continue
                for e in self.out_of[z]:
                    acc += c * rate[e]
                    if target < acc:
                        e_pick = e
                        break
                if e_pick >= 0:
                    break
            if e_pick < 0:
                # numerical slack at the top edge of the walk: retake the
                # last positive-rate category
                for z in range(K - 1, -1, -1):
                    if cnt[gK + z]:
                        for e in reversed(self.out_of[z]):
                            if rate[e] > 0.0:
                                e_pick = e
                                break
                        if e_pick >= 0:
                            break
                if e_pick < 0:
                    raise InternalConsistencyError("category walk fell off")
            z, zp = self.edge_src[e_pick], self.edge_dst[e_pick]
            bucket = self.buckets[g_pick][z]
            i = 0
            if len(bucket) > 1:
                i = int(draws.uniform() * len(bucket))
                if i >= len(bucket):
                    i = len(bucket) - 1
            node = bucket[i]
            last = bucket[-1]
            bucket[i] = last
            self.pos[last] = i
            bucket.pop()
            dest = self.buckets[g_pick][zp]
            self.pos[node] = len(dest)
            dest.append(node)
            cnt[gK + z] -= 1
            cnt[gK + zp] += 1
            self.colors[node] = zp
            if collect:
                events.append((t, node, z, zp))
            for g in self.deps[g_pick]:
                self._refresh(g)
            n_events += 1
            if n_events % FULL_REFRESH_EVERY == 0:
                for g in range(self.n_groups):
                    self._refresh(g)
        return events

    def check_counts(self):
        for g, members in enumerate(self.members):
            expect = [0] * self.K
            for n in members:
                expect[self.colors[n]] += 1
            for z in range(self.K):
                if self.cnt[g * self.K + z] != expect[z]:
                    raise InternalConsistencyError(
                        f"count table drifted at group {g}, color {z}"
                    )


def simulate(graph: BlockGraph, spec, targets, init, T: float, seed,
             debug: bool = False) -> Trajectory:
    """Exact sample of the N-particle jump process up to time T.

    init: SystemState or a length-N color vector. targets is accepted for
    signature compatibility and not used — the dynamics always run on the
    graph's own finite-N neighborhood proportions. seed: integer or a
    numpy Generator (farms pass per-replica substreams).
    """
    family = as_block_rates(spec, graph.r)
    if T < 0:
        raise InvalidArgumentError("T must be >= 0")
    if isinstance(init, SystemState):
        state = init
    else:
        state = SystemState.from_colors(graph, init, family.colors.K)
    if state.K != family.colors.K:
        raise InvalidArgumentError("init state K does not match rate spec")
    gen = seed if isinstance(seed, np.random.Generator) else _rng.substream(seed)
    kern = _Kernel(graph, family)
    kern.load(state.colors)
    events = kern.run(float(T), gen)
    traj = Trajectory(state, events, float(T))
    if debug:
        kern.check_counts()
        if not np.array_equal(traj.final_colors,
                              np.asarray(kern.colors, dtype=np.int64)):
            raise InternalConsistencyError("replay does not match kernel state")
    return traj


@dataclass
class EmpiricalSeries:
    """Per-grid-point empirical measure vector, component g = 2*block+class
    (class 0 central, 1 peripheral), values[t, g, z]."""

    times: np.ndarray
    values: np.ndarray  # (n_times, 2r, K)
    r: int

    def component(self, j: int, cls: int) -> np.ndarray:
        return self.values[:, 2 * j + cls, :]

    def to_csv(self, fp):
        write_component_series(fp, self.times, self.values, self.r)


def write_component_series(fp, times, values, r):
    """Shared "t,block,class,color,mass" writer (empirical and flow
    series use the same schema so files diff column-aligned)."""
    fp.write("t,block,class,color,mass\n")
    K = values.shape[2]
    for it, t in enumerate(times):
        for j in range(r):
            for cls, label in ((0, "c"), (1, "p")):
                row = values[it, 2 * j + cls]
                for z in range(K):
                    fp.write(f"{t:.17g},{j},{label},{z},{row[z]:.17g}\n")


def empirical_process(trajectory: Trajectory, graph: BlockGraph,
                      time_grid) -> EmpiricalSeries:
    """Empirical measure vector along the grid, right-continuous in time
    (a grid point lying exactly on a jump time sees the post-jump state)."""
    grid = np.asarray(time_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidArgumentError("grid must be a nonempty 1-d array")
    if np.any(np.diff(grid) < 0):
        raise InvalidArgumentError("grid must be nondecreasing")
    if grid[0] < 0 or grid[-1] > trajectory.horizon:
        raise InvalidArgumentError(
            f"grid must lie within [0, {trajectory.horizon}]"
        )
    K = trajectory.initial.K
    counts = [
        [list(trajectory.initial.counts[j][cls]) for cls in (0, 1)]
        for j in range(graph.r)
    ]
    sizes = [
        [graph.block_sizes[j][0], graph.block_sizes[j][1]]
        for j in range(graph.r)
    ]
    out = np.empty((grid.size, 2 * graph.r, K))
    ev = trajectory.events
    ie = 0
    for it, t in enumerate(grid):
        while ie < len(ev) and ev[ie][0] <= t:
            _, node, z, zp = ev[ie]
            j = graph.block_of(node)
            cls = graph.class_of(node)
            counts[j][cls][z] -= 1
            counts[j][cls][zp] += 1
            ie += 1
        for j in range(graph.r):
            for cls in (0, 1):
                out[it, 2 * j + cls] = np.asarray(
                    counts[j][cls], dtype=float
                ) / sizes[j][cls]
    return EmpiricalSeries(grid, out, graph.r)
