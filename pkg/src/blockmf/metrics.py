"""Distances between distributions on the ordered color set 0..K-1."""

import math

import numpy as np

from .errors import InvalidArgumentError
from .rates import validate_probability

__all__ = ["w1_discrete", "d_bl", "relative_entropy"]


def _check_pair(mu, nu):
    mu = validate_probability(mu)
    nu = validate_probability(nu)
    if mu.shape != nu.shape:
        raise InvalidArgumentError(
            f"length mismatch: {mu.shape[0]} vs {nu.shape[0]}"
        )
    return mu, nu


def w1_discrete(mu, nu) -> float:
    """Order-1 transport distance for ground metric |z - z'|: the L1
    distance of the CDFs."""
    mu, nu = _check_pair(mu, nu)
    diff = np.cumsum(mu - nu)[:-1]
    return float(np.abs(diff).sum())


# profiles for the exact small-K solver, cached per K
_BL_PROFILES = {}


def _bl_profiles(K: int) -> np.ndarray:
    """All vertices of {|g|<=1, |g[k+1]-g[k]|<=1} have integer coordinates
    (box + path-difference constraints form a network matrix with unit
    right-hand side), so enumerating chain-feasible {-1,0,1}^K profiles
    covers every LP vertex exactly."""
    cached = _BL_PROFILES.get(K)
    if cached is not None:
        return cached
    profiles = [(v,) for v in (-1, 0, 1)]
    for _ in range(K - 1):
        profiles = [
            p + (v,)
            for p in profiles
            for v in (-1, 0, 1)
            if abs(v - p[-1]) <= 1
        ]
    arr = np.array(profiles, dtype=float)
    _BL_PROFILES[K] = arr
    return arr


def d_bl(mu, nu) -> float:
    """Bounded-Lipschitz distance: sup of <g, mu-nu> over |g| <= 1,
    |g(z)-g(z')| <= |z-z'|. Exact enumeration up to K=8, LP beyond."""
    mu, nu = _check_pair(mu, nu)
    theta = mu - nu
    K = theta.shape[0]
    if K == 1:
        return 0.0
    if K <= 8:
        return float(np.max(_bl_profiles(K) @ theta))
    from scipy.optimize import linprog

    rows = []
    for k in range(K - 1):
        row = np.zeros(K)
        row[k + 1], row[k] = 1.0, -1.0
        rows.append(row)
        rows.append(-row)
    res = linprog(
        -theta,
        A_ub=np.array(rows),
        b_ub=np.ones(2 * (K - 1)),
        bounds=[(-1.0, 1.0)] * K,
        method="highs",
    )
    if not res.success:
        raise InvalidArgumentError(f"BL linear program failed: {res.message}")
    return float(-res.fun)


def relative_entropy(p, q) -> float:
    """sum p*log(p/q) with 0*log 0 = 0; +inf when p charges a q-null set."""
    p = validate_probability(p)
    q = validate_probability(q)
    if p.shape != q.shape:
        raise InvalidArgumentError(
            f"length mismatch: {p.shape[0]} vs {q.shape[0]}"
        )
    if np.any((p > 0) & (q == 0)):
        return math.inf
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))
