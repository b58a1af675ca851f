"""Statistical experiments: empirical-measure convergence to the
mean-field flow, and factorization of tagged-node joint laws.

Replica randomness is keyed by (master seed, N index, replica index),
so results are independent of execution order and worker count;
aggregation always runs in replica order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .graph import CENTRAL, BlockGraph, ProportionTargets, \
    build_complete_peripheral
from .meanfield import solve_mckean_vlasov
from .metrics import d_bl
from .rng import substream
from .simulate import empirical_process, simulate

__all__ = [
    "ConvergenceReport",
    "proportional_family",
    "sample_block_colors",
    "lln_experiment",
    "multichaos_test",
]


@dataclass(frozen=True)
class ConvergenceReport:
    """Mean sup-grid distance to the limiting flow per system size."""

    n_values: tuple
    replicas: int
    means: np.ndarray            # (n_N,)
    stderrs: np.ndarray          # (n_N,)
    component_means: np.ndarray  # (n_N, 2r)
    distances: np.ndarray        # (n_N, replicas) raw per-replica sups

    def __post_init__(self):
        if list(self.n_values) != sorted(set(self.n_values)):
            raise InvalidArgumentError("N values must be strictly increasing")
        if np.any(self.stderrs < 0):
            raise InvalidArgumentError("standard errors must be >= 0")

    def to_csv(self, fp) -> None:
        fp.write("N,replicas,mean_dist,stderr\n")
        for i, n in enumerate(self.n_values):
            fp.write(f"{n},{self.replicas},{self.means[i]:.17g},"
                     f"{self.stderrs[i]:.17g}\n")

    def to_svg(self, fp) -> None:
        """Log-log plot of mean distance vs N with a slope -1/2 guide."""
        _svg_loglog(fp, np.asarray(self.n_values, dtype=float), self.means,
                    self.stderrs)


def _svg_loglog(fp, xs, ys, errs, slope=-0.5):
    if np.any(ys <= 0) or np.any(xs <= 0):
        raise InvalidArgumentError("log-log plot needs positive data")
    W, H = 640.0, 480.0
    ml, mr, mt, mb = 80.0, 24.0, 24.0, 56.0
    lx, ly = np.log10(xs), np.log10(ys)
    ref = ly[0] + slope * (lx - lx[0])
    # error bars clamp at 30% of the mean so a wide bar cannot wreck the scale
    bar_lo = np.log10(np.maximum(ys - errs, 0.3 * ys))
    bar_hi = np.log10(ys + errs)
    lo = np.concatenate((ly, ref, bar_lo))
    xmin, xmax = lx.min() - 0.08, lx.max() + 0.08
    ymin = lo.min() - 0.15
    ymax = max(ly.max(), ref.max(), bar_hi.max()) + 0.15

    def X(u):
        return ml + (u - xmin) / (xmax - xmin) * (W - ml - mr)

    def Y(v):
        return H - mb - (v - ymin) / (ymax - ymin) * (H - mt - mb)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" '
        f'height="{H:.0f}" viewBox="0 0 {W:.0f} {H:.0f}">',
        f'<rect x="{ml:.2f}" y="{mt:.2f}" width="{W - ml - mr:.2f}" '
        f'height="{H - mt - mb:.2f}" fill="none" stroke="black"/>',
    ]
    for x, v in zip(xs, lx):
        out.append(f'<line x1="{X(v):.2f}" y1="{H - mb:.2f}" x2="{X(v):.2f}" '
                   f'y2="{H - mb + 6:.2f}" stroke="black"/>')
        out.append(f'<text x="{X(v):.2f}" y="{H - mb + 22:.2f}" '
                   f'font-size="13" text-anchor="middle">{x:g}</text>')
    dec0, dec1 = int(math.floor(ymin)), int(math.ceil(ymax))
    for d in range(dec0, dec1 + 1):
        if not ymin <= d <= ymax:
            continue
        out.append(f'<line x1="{ml - 6:.2f}" y1="{Y(d):.2f}" x2="{ml:.2f}" '
                   f'y2="{Y(d):.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 10:.2f}" y="{Y(d) + 4:.2f}" '
                   f'font-size="13" text-anchor="end">1e{d}</text>')
    pts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(lx, ly))
    rpts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(lx, ref))
    out.append(f'<polyline points="{rpts}" fill="none" stroke="gray" '
               f'stroke-dasharray="6 4"/>')
    out.append(f'<polyline points="{pts}" fill="none" stroke="black"/>')
    for a, b, blo, bhi in zip(lx, ly, bar_lo, bar_hi):
        out.append(f'<line x1="{X(a):.2f}" y1="{Y(blo):.2f}" x2="{X(a):.2f}" '
                   f'y2="{Y(bhi):.2f}" stroke="black"/>')
        out.append(f'<circle cx="{X(a):.2f}" cy="{Y(b):.2f}" r="3.5" '
                   f'fill="black"/>')
    out.append(f'<text x="{(ml + W - mr) / 2:.2f}" y="{H - 12:.2f}" '
               f'font-size="14" text-anchor="middle">N</text>')
    out.append(f'<text x="18" y="{(mt + H - mb) / 2:.2f}" font-size="14" '
               f'text-anchor="middle" transform="rotate(-90 18 '
               f'{(mt + H - mb) / 2:.2f})">mean distance</text>')
    out.append(f'<text x="{X(lx[-1]) - 8:.2f}" y="{Y(ref[-1]) - 8:.2f}" '
               f'font-size="12" text-anchor="end" fill="gray">slope -1/2'
               f'</text>')
    out.append("</svg>")
    fp.write("\n".join(out) + "\n")


def proportional_family(targets: ProportionTargets):
    """Callable N -> complete-peripheral graph with block and class sizes
    exactly proportional to the targets; N values that do not split into
    integers are rejected."""

    def build(N: int) -> BlockGraph:
        sizes = []
        for j in range(targets.r):
            nj = targets.alpha[j] * N
            ncj = targets.p_c[j] * nj
            if abs(nj - round(nj)) > 1e-9 or abs(ncj - round(ncj)) > 1e-9:
                raise InvalidArgumentError(
                    f"N={N} does not realize the target proportions"
                )
            nj, ncj = int(round(nj)), int(round(ncj))
            sizes.append((ncj, nj - ncj))
        return build_complete_peripheral(sizes)

    return build


def sample_block_colors(graph: BlockGraph, inits, gen) -> np.ndarray:
    """iid initial colors, one distribution per (block, class)."""
    inits = [np.asarray(m, dtype=float) for m in inits]
    if len(inits) != 2 * graph.r:
        raise InvalidArgumentError(f"need 2r={2 * graph.r} initial measures")
    K = inits[0].size
    colors = np.empty(graph.n_total, dtype=np.int64)
    for j in range(graph.r):
        for cls in (0, 1):
            nodes = (graph.central_nodes(j) if cls == CENTRAL
                     else graph.peripheral_nodes(j))
            cdf = np.cumsum(inits[2 * j + cls])
            u = gen.random(len(nodes))
            colors[list(nodes)] = np.minimum(
                np.searchsorted(cdf, u, side="right"), K - 1
            )
    return colors


def _seed_path(seed):
    if isinstance(seed, (tuple, list)):
        return tuple(int(s) for s in seed)
    return (int(seed),)


def _lln_replica(args):
    (graph, spec, targets, inits, T, grid_times, flow_grid, seed_path,
     n_idx, rep) = args
    gen = substream(*seed_path, n_idx, rep)
    colors = sample_block_colors(graph, inits, gen)
    traj = simulate(graph, spec, targets, colors, T, gen)
    emp = empirical_process(traj, graph, grid_times).values
    per_comp = np.array([
        max(d_bl(emp[i, g], flow_grid[i, g]) for i in range(len(grid_times)))
        for g in range(2 * graph.r)
    ])
    return float(per_comp.max()), per_comp


def _run_ordered(worker, arg_list, threads):
    if threads <= 1:
        return [worker(a) for a in arg_list]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        chunk = max(1, len(arg_list) // (4 * threads))
        return list(pool.map(worker, arg_list, chunksize=chunk))


def lln_experiment(graph_family, spec, targets: ProportionTargets, inits,
                   T, grid, N_list, replicas, seed, *, dt=0.01,
                   threads=1) -> ConvergenceReport:
    """For each N: sample iid initial colors, simulate, and take the sup
    over the grid of the max-component BL distance between the empirical
    measures and the limiting flow. Reports mean and standard error over
    replicas per N."""
    N_list = [int(n) for n in N_list]
    if N_list != sorted(set(N_list)):
        raise InvalidArgumentError("N_list must be strictly increasing")
    if replicas < 2:
        raise InvalidArgumentError("need at least 2 replicas")
    T = float(T)
    grid_times = (np.linspace(0.0, T, int(grid)) if np.ndim(grid) == 0
                  else np.asarray(grid, dtype=float))
    flow = solve_mckean_vlasov(spec, targets, inits, T, dt)
    flow_grid = np.stack([flow.at(t) for t in grid_times])
    seed_path = _seed_path(seed)

    r = targets.r
    means = np.empty(len(N_list))
    stderrs = np.empty(len(N_list))
    comp_means = np.empty((len(N_list), 2 * r))
    dists = np.empty((len(N_list), replicas))
    for n_idx, N in enumerate(N_list):
        graph = graph_family(N)
        if graph.r != r:
            raise InvalidArgumentError("graph family disagrees with targets")
        args = [(graph, spec, targets, inits, T, grid_times, flow_grid,
                 seed_path, n_idx, rep) for rep in range(replicas)]
        results = _run_ordered(_lln_replica, args, threads)
        dists[n_idx] = [s for s, _ in results]
        comp_means[n_idx] = np.mean([c for _, c in results], axis=0)
        means[n_idx] = dists[n_idx].mean()
        stderrs[n_idx] = dists[n_idx].std(ddof=1) / math.sqrt(replicas)
    return ConvergenceReport(tuple(N_list), replicas, means, stderrs,
                             comp_means, dists)


def _resolve_tagged(graph: BlockGraph, tagged_nodes):
    """Accept raw node ids or (block, class) requests; a request picks the
    first node of that class (exchangeability makes the choice neutral)."""
    out = []
    for spec_ in tagged_nodes:
        if isinstance(spec_, (int, np.integer)):
            n = int(spec_)
            if not 0 <= n < graph.n_total:
                raise InvalidArgumentError(f"node {n} out of range")
            out.append(n)
        else:
            j, cls = spec_
            if isinstance(cls, str):
                cls = {"c": 0, "p": 1}[cls]
            nodes = (graph.central_nodes(j) if cls == CENTRAL
                     else graph.peripheral_nodes(j))
            out.append(nodes[0])
    if len(out) != len(set(out)):
        raise InvalidArgumentError("tagged nodes must be distinct")
    return out


def _chaos_replica(args):
    graph, spec, targets, inits, tagged, T, seed_path, rep = args
    gen = substream(*seed_path, rep)
    colors = sample_block_colors(graph, inits, gen)
    traj = simulate(graph, spec, targets, colors, T, gen)
    final = traj.final_colors
    return tuple(int(final[n]) for n in tagged)


def multichaos_test(graph: BlockGraph, spec, targets, tagged_nodes, T,
                    replicas, seed, *, inits, threads=1):
    """Estimate the joint law of the tagged nodes' colors at time T, the
    product of its marginals, and the total-variation distance between
    the two. tagged_nodes entries are node ids or (block, class) pairs
    (resolved to the first node of the class)."""
    tagged = _resolve_tagged(graph, tagged_nodes)
    if not 1 <= len(tagged) <= 3:
        raise InvalidArgumentError("need 1 to 3 tagged nodes")
    if replicas < 1:
        raise InvalidArgumentError("need at least 1 replica")
    seed_path = _seed_path(seed)
    args = [(graph, spec, targets, inits, tagged, float(T), seed_path, rep)
            for rep in range(replicas)]
    results = _run_ordered(_chaos_replica, args, threads)
    K = len(inits[0])
    m = len(tagged)
    joint = np.zeros((K,) * m)
    for cell in results:
        joint[cell] += 1.0
    joint /= replicas
    product = np.ones(())
    for axis in range(m):
        marg = joint.sum(axis=tuple(a for a in range(m) if a != axis))
        shape = [1] * m
        shape[axis] = K
        product = product * marg.reshape(shape)
    tv = 0.5 * float(np.abs(joint - product).sum())
    return joint, product, tv
