"""Pathwise deviation costs for the block mean-field dynamics.

The convex pair tau / tau_star (log-Laplace transform of the centered
unit Poisson and its conjugate), the weighted variational norm of a
flux residual, the deviation cost of a flow in both its Legendre form
(explicit perturbed rate family) and variational form (residual of the
flow's own drift), and log densities of tagged-particle paths against
the unit-rate-per-edge reference walk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AssumptionViolationError,
    InvalidArgumentError,
    NonConvergenceError,
    UnknownEdgeError,
)
from .meanfield import ColorPath, MeanFieldFlow, flow_drift, flow_rates
from .rates import ColorGraph, as_block_rates

__all__ = [
    "tau",
    "tau_star",
    "RateFamily",
    "DeviationCost",
    "legendre_cost",
    "variational_norm",
    "variational_cost",
    "girsanov_log_density",
    "girsanov_log_densities",
    "h_functional",
    "sample_reference_path",
]

PHI_CAP = 500.0  # potential spread beyond this means an unbounded ascent
GRAD_TOL = 1e-10
MAX_NEWTON = 200


def tau(u):
    """e^u - u - 1, elementwise; scalar in, scalar out."""
    u = np.asarray(u, dtype=float)
    out = np.expm1(u) - u
    return float(out) if out.ndim == 0 else out


def tau_star(v):
    """Convex conjugate of tau: (1+v)log(1+v) - v for v > -1, exactly 1
    at v = -1, +inf below."""
    v = np.asarray(v, dtype=float)
    out = np.full(v.shape, np.nan)
    out[v < -1.0] = np.inf
    out[v == -1.0] = 1.0
    above = v > -1.0
    w = v[above]
    out[above] = (1.0 + w) * np.log1p(w) - w
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RateFamily:
    """Perturbed jump rates on the flow grid: values[i, g, e] is the rate
    of edge e for component g (= 2*block + class) at times[i]."""

    times: np.ndarray
    values: np.ndarray
    r: int

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or values.ndim != 3:
            raise InvalidArgumentError("times must be 1-d, values 3-d")
        if values.shape[0] != times.size or values.shape[1] != 2 * self.r:
            raise InvalidArgumentError(
                f"values shape {values.shape} does not match "
                f"{times.size} grid points and {2 * self.r} components"
            )
        if not np.all(np.isfinite(values)) or values.min() < 0.0:
            raise InvalidArgumentError("rates must be finite and >= 0")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def n_edges(self) -> int:
        return self.values.shape[2]

    @classmethod
    def from_model(cls, flow: MeanFieldFlow, spec, targets) -> "RateFamily":
        """The model's own rates along the flow (the zero-cost family)."""
        return cls(flow.times.copy(), flow_rates(flow, spec, targets), flow.r)

    def scaled(self, factor) -> "RateFamily":
        return RateFamily(self.times, self.values * factor, self.r)


@dataclass(frozen=True)
class DeviationCost:
    """Cost of a flow: per-grid-point integrand per component, the time
    integrals per component, the class weights used, and the weighted
    total."""

    times: np.ndarray
    integrand: np.ndarray        # (n, 2r)
    class_integrals: np.ndarray  # (2r,)
    weights: np.ndarray          # (2r,)
    total: float
    r: int

    def to_csv(self, fp) -> None:
        fp.write("t,block,class,integrand\n")
        for i, t in enumerate(self.times):
            for g in range(2 * self.r):
                cls = "c" if g % 2 == 0 else "p"
                fp.write(
                    f"{t:.17g},{g // 2},{cls},{self.integrand[i, g]:.17g}\n"
                )
        fp.write(f"S_total,{self.total:.17g}\n")


def _class_weights(targets, r: int) -> np.ndarray:
    w = np.empty(2 * r)
    for j in range(r):
        w[2 * j] = targets.alpha[j] * targets.p_c[j]
        w[2 * j + 1] = targets.alpha[j] * targets.p_p[j]
    return w


def _package_cost(times, integrand, targets, r) -> DeviationCost:
    weights = _class_weights(targets, r)
    class_integrals = np.trapezoid(integrand, times, axis=0)
    total = float(weights @ class_integrals)
    return DeviationCost(times, integrand, class_integrals, weights,
                         total, r)


def legendre_cost(flow: MeanFieldFlow, targets, spec,
                  rate_family: RateFamily, rate_floor: float = 1e-10
                  ) -> DeviationCost:
    """Cost of running the flow with rates l instead of the model's lam:
    integrate sum_e mu(src)·lam·tau*(l/lam - 1) per component, weight by
    the limiting class proportions.

    The model rates along the flow must stay above rate_floor on every
    edge (the dynamics are assumed uniformly elliptic); anything lower
    raises AssumptionViolationError.
    """
    family = as_block_rates(spec, flow.r)
    if rate_family.r != flow.r:
        raise InvalidArgumentError("rate family and flow disagree on r")
    if rate_family.times.size != flow.times.size or not np.allclose(
            rate_family.times, flow.times, rtol=0.0, atol=1e-12):
        raise InvalidArgumentError("rate family and flow grids differ")
    lam = flow_rates(flow, spec, targets)  # (n, 2r, E)
    if rate_family.values.shape != lam.shape:
        raise InvalidArgumentError(
            f"rate family has {rate_family.n_edges} edges, "
            f"model has {lam.shape[2]}"
        )
    if lam.min() < rate_floor:
        i, g, e = np.unravel_index(int(lam.argmin()), lam.shape)
        raise AssumptionViolationError(
            f"model rate {lam[i, g, e]:.3g} on edge {e} of component {g} "
            f"at t={flow.times[i]:.6g} is below the floor {rate_floor:.3g}"
        )
    src = np.fromiter((z for z, _ in family.colors.edges), dtype=int)
    mu = np.clip(flow.values, 0.0, None)       # (n, 2r, K)
    mu_src = mu[:, :, src]                     # (n, 2r, E)
    integrand = np.sum(mu_src * lam * tau_star(rate_family.values / lam - 1.0),
                       axis=2)
    return _package_cost(flow.times, integrand, targets, flow.r)


def _active_components(K, src, dst):
    """Connected components of the undirected support graph; colors with
    no incident edge come back as singletons."""
    adj = [set() for _ in range(K)]
    for a, b in zip(src, dst):
        adj[a].add(b)
        adj[b].add(a)
    seen = [False] * K
    comps = []
    for start in range(K):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            z = stack.pop()
            comp.append(z)
            for nb in adj[z]:
                if not seen[nb]:
                    seen[nb] = True
                    stack.append(nb)
        comps.append(comp)
    return comps


def variational_norm(theta, mu_point, lambda_table, colors: ColorGraph, *,
                     grad_tol: float = GRAD_TOL,
                     max_iter: int = MAX_NEWTON) -> float:
    """sup over potentials Phi of theta·Phi - sum_e tau(dPhi_e)·mu(src)·lam_e.

    Returns +inf when the flux theta is not realizable on the weighted
    support (in particular whenever sum(theta) exceeds 1e-10, the
    unbounded constant-shift direction). The smooth concave problem is
    solved by damped Newton with one potential pinned per support
    component; stops at gradient norm below grad_tol.
    """
    theta = np.asarray(theta, dtype=float)
    mu_point = np.asarray(mu_point, dtype=float)
    lam = np.asarray(lambda_table, dtype=float)
    K = colors.K
    if theta.shape != (K,) or mu_point.shape != (K,):
        raise InvalidArgumentError("theta and mu_point must have length K")
    if lam.shape != (colors.n_edges,):
        raise InvalidArgumentError("lambda_table must have one entry per edge")
    if abs(float(theta.sum())) > 1e-10:
        return math.inf

    src_all = np.fromiter((z for z, _ in colors.edges), dtype=int)
    dst_all = np.fromiter((zp for _, zp in colors.edges), dtype=int)
    w_all = mu_point[src_all] * lam
    act = w_all > 0.0
    src, dst, w = src_all[act], dst_all[act], w_all[act]
    if src.size == 0:
        return 0.0 if float(np.max(np.abs(theta), initial=0.0)) <= grad_tol \
            else math.inf

    # a direction constant on a support component costs nothing, so any
    # component carrying net theta mass makes the sup infinite; colors
    # outside the support with negligible theta are frozen at zero
    comps = _active_components(K, src, dst)
    free = []
    for comp in comps:
        mass = float(theta[comp].sum())
        if len(comp) == 1:
            if abs(mass) > grad_tol:
                return math.inf
            continue
        if abs(mass) > grad_tol:
            return math.inf
        free.extend(sorted(comp)[1:])  # pin the lowest color of each comp
    if not free:
        return 0.0
    free = np.array(sorted(free), dtype=int)

    phi = np.zeros(K)

    def objective(p):
        with np.errstate(over="ignore"):
            d = p[dst] - p[src]
            t = np.expm1(d) - d
        if not np.all(np.isfinite(t)):
            return -math.inf
        return float(theta @ p - w @ t)

    F = objective(phi)
    grad_norms = []
    for _ in range(max_iter):
        d = phi[dst] - phi[src]
        ed = np.exp(d)
        flow_e = w * (ed - 1.0)  # tau'(d) weighted
        g = theta.copy()
        np.subtract.at(g, dst, flow_e)
        np.add.at(g, src, flow_e)
        gn = float(np.max(np.abs(g[free])))
        grad_norms.append(gn)
        if gn < grad_tol:
            return max(float(F), 0.0)
        H = np.zeros((K, K))
        h = w * ed
        np.add.at(H, (dst, dst), h)
        np.add.at(H, (src, src), h)
        np.subtract.at(H, (dst, src), h)
        np.subtract.at(H, (src, dst), h)
        Hr = H[np.ix_(free, free)]
        gr = g[free]
        reg = 1e-12 * max(1.0, float(Hr.diagonal().max()))
        try:
            step = np.linalg.solve(Hr + reg * np.eye(free.size), gr)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(Hr + reg * np.eye(free.size), gr,
                                       rcond=None)
        direction = np.zeros(K)
        direction[free] = step
        slope = float(g @ direction)
        # Newton decrement: slope/2 bounds the remaining gain to first
        # order (concave objective), so once it is below the resolution
        # of F itself no double-precision step can improve the value.
        # The raw gradient may still sit above grad_tol here.
        stall = 100.0 * np.finfo(float).eps * max(1.0, abs(F))
        if abs(slope) <= stall:
            return max(float(F), 0.0)
        if slope < 0.0:
            direction = np.zeros(K)
            direction[free] = gr
            slope = float(gr @ gr)
            if slope <= stall:
                return max(float(F), 0.0)
        alpha = 1.0
        accepted = False
        while alpha > 1e-14:
            Fn = objective(phi + alpha * direction)
            if Fn >= F + 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        phi = phi + alpha * direction
        F = Fn
        if float(np.max(np.abs(phi))) > PHI_CAP:
            # ascent ran away: theta pushes some edge beyond its reverse
            # capacity, the sup is infinite
            return math.inf
    raise NonConvergenceError(
        "variational norm ascent did not reach the gradient tolerance",
        residuals=grad_norms,
    )


def variational_cost(flow: MeanFieldFlow, targets, spec) -> DeviationCost:
    """Cost of a flow from its own drift residual: at each grid point and
    component, the variational norm of theta = dmu/dt - A*mu, with dmu/dt
    by central differences (second-order one-sided at the ends)."""
    family = as_block_rates(spec, flow.r)
    times = flow.times
    n = times.size
    if n < 3:
        raise InvalidArgumentError("flow needs at least 3 grid points")
    dt = flow.dt
    vals = flow.values  # (n, 2r, K), raw
    dmu = np.empty_like(vals)
    dmu[1:-1] = (vals[2:] - vals[:-2]) / (2.0 * dt)
    dmu[0] = (-3.0 * vals[0] + 4.0 * vals[1] - vals[2]) / (2.0 * dt)
    dmu[-1] = (3.0 * vals[-1] - 4.0 * vals[-2] + vals[-3]) / (2.0 * dt)
    theta = dmu - flow_drift(flow, spec, targets)
    lam = flow_rates(flow, spec, targets)
    mu = np.clip(vals, 0.0, None)
    integrand = np.empty((n, 2 * flow.r))
    for i in range(n):
        for g in range(2 * flow.r):
            integrand[i, g] = variational_norm(
                theta[i, g], mu[i, g], lam[i, g], family.colors
            )
    return _package_cost(times, integrand, targets, flow.r)


def _pl_integral(times, vals, a, b) -> float:
    """Exact integral of the piecewise-linear interpolant of vals over
    [a, b]."""
    if b <= a:
        return 0.0
    ia = int(np.searchsorted(times, a, side="right"))
    ib = int(np.searchsorted(times, b, side="left"))
    pts = np.concatenate(([a], times[ia:ib], [b]))
    fv = np.interp(pts, times, vals)
    return float(np.trapezoid(fv, pts))


def girsanov_log_densities(paths, flow: MeanFieldFlow, targets, spec,
                           which) -> np.ndarray:
    """Vector of log densities of the supplied single-particle paths
    against the unit-rate-per-edge reference walk, with particle rates
    read off the flow. which = (block, class) picks the rate role; class
    may be 0/1 or "c"/"p".

    h = sum over jumps of log lambda(t-) minus int_0^T sum over the out
    edges of the current color of (lambda(t) - 1) dt. Jump-time rates
    interpolate the grid linearly; the time integral is exact for the
    interpolated rates. A jump along an edge the model gives rate 0 (or
    that is not an edge at all) sends the density to -inf.
    """
    j, cls = which
    if isinstance(cls, str):
        cls = {"c": 0, "p": 1}[cls]
    family = as_block_rates(spec, flow.r)
    if not 0 <= j < flow.r or cls not in (0, 1):
        raise InvalidArgumentError(f"no component (block={j}, class={cls})")
    g = 2 * j + cls
    colors = family.colors
    K = colors.K
    times = flow.times
    lam_grid = flow_rates(flow, spec, targets)[:, g, :]  # (n, E)
    excess = np.zeros((times.size, K))  # sum of (lam - 1) over out-edges
    for e, (z, _) in enumerate(colors.edges):
        excess[:, z] += lam_grid[:, e] - 1.0

    out = np.empty(len(paths))
    for ip, path in enumerate(paths):
        if path.horizon > flow.T + 1e-9:
            raise InvalidArgumentError("path horizon exceeds the flow's")
        jump_sum = 0.0
        for k, t_k in enumerate(path.jump_times):
            z_prev = int(path.colors[k])
            z_new = int(path.colors[k + 1])
            try:
                e = colors.edge_index(z_prev, z_new)
            except UnknownEdgeError:
                jump_sum = -math.inf
                break
            lam_k = float(np.interp(t_k, times, lam_grid[:, e]))
            if lam_k <= 0.0:
                jump_sum = -math.inf
                break
            jump_sum += math.log(lam_k)
        if jump_sum == -math.inf:
            out[ip] = -math.inf
            continue
        comp = 0.0
        seg_starts = np.concatenate(([0.0], path.jump_times))
        seg_ends = np.concatenate((path.jump_times, [path.horizon]))
        for k in range(seg_starts.size):
            z = int(path.colors[k])
            comp += _pl_integral(times, excess[:, z],
                                 float(seg_starts[k]), float(seg_ends[k]))
        out[ip] = jump_sum - comp
    return out


def girsanov_log_density(path, flow: MeanFieldFlow, targets, spec,
                         which) -> float:
    """Log density of one tagged-particle path; see
    girsanov_log_densities."""
    return float(girsanov_log_densities([path], flow, targets, spec, which)[0])


def h_functional(path_sets, flow: MeanFieldFlow, targets, spec,
                 class_sizes) -> float:
    """Size-weighted empirical average of the per-class log densities:
    sum_g (n_g / N) * mean over the class's sampled paths.

    path_sets and class_sizes are indexed by component g = 2*block +
    class. Components with no sampled paths contribute zero (their
    empirical average is taken as empty); at least one component must
    have paths.
    """
    sizes = np.asarray(class_sizes, dtype=float)
    if sizes.shape != (2 * flow.r,) or np.any(sizes < 0):
        raise InvalidArgumentError(
            f"class_sizes must be {2 * flow.r} nonnegative counts"
        )
    if len(path_sets) != 2 * flow.r:
        raise InvalidArgumentError("path_sets must have one entry per "
                                   "(block, class)")
    total = float(sizes.sum())
    if total == 0.0:
        raise InvalidArgumentError("all class sizes are zero")
    if all(len(p) == 0 for p in path_sets):
        raise InvalidArgumentError("no paths supplied")
    h = 0.0
    for g, paths in enumerate(path_sets):
        if len(paths) == 0 or sizes[g] == 0.0:
            continue
        vals = girsanov_log_densities(paths, flow, targets, spec,
                                      (g // 2, g % 2))
        h += sizes[g] / total * float(np.mean(vals))
    return h


def sample_reference_path(colors: ColorGraph, z0: int, T: float,
                          seed) -> ColorPath:
    """One path of the reference walk: every edge of the color graph
    fires at rate 1, independently of everything else."""
    if not 0 <= z0 < colors.K:
        raise InvalidArgumentError(f"initial color {z0} out of range")
    if T < 0:
        raise InvalidArgumentError("T must be >= 0")
    gen = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    t = 0.0
    z = z0
    jump_times = []
    cols = [z0]
    while True:
        outs = colors.out_edges(z)
        if not outs:
            break
        t += gen.exponential(1.0 / len(outs))
        if t >= T:
            break
        e = outs[int(gen.integers(len(outs)))]
        z = colors.edges[e][1]
        jump_times.append(t)
        cols.append(z)
    return ColorPath(np.asarray(jump_times, dtype=float),
                     np.asarray(cols, dtype=int), T)
