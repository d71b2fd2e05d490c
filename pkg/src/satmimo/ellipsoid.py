"""Central-cut ellipsoid search for nonnegative Lagrange multipliers.

Given oracles mapping a multiplier vector to the closed-form precoders and
to the power-constraint residuals, finds mu >= 0 making the precoders
feasible: mu = 0 when already feasible, otherwise a geometric expansion
brackets a feasible upper bound and the ellipsoid shrinks around the
boundary. The one-dimensional case degenerates in the central-cut formulas
(d^2 - 1 = 0) and is replaced by bisection on the bracket.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError


@dataclass
class EllipsoidParams:
    alpha: float = 2.0          # geometric expansion factor (> 1)
    tol: float = 1e-8           # residual tolerance and ellipsoid-size stop
    max_iters: int = 300
    max_doublings: int = 60
    most_violated_cut: bool = False  # documented alternative: cut along the
                                     # single most-violated constraint


@dataclass
class EllipsoidState:
    center: np.ndarray
    shape: np.ndarray
    iteration: int


def solve_multipliers(precoder_oracle, residual_oracle, dim: int,
                      params: EllipsoidParams) -> np.ndarray:
    """Multiplier vector with residual_oracle(mu) <= params.tol elementwise.

    precoder_oracle(mu) yields the closed-form precoders for a candidate mu;
    callers evaluate it at the returned mu* to materialize the solution.
    residual_oracle(mu) returns the length-dim residual vector, negative
    entries meaning slack. Residuals must tend to negative values as mu
    grows (guaranteed for power constraints, where large mu shrinks the
    precoders toward zero).
    """
    if params.alpha <= 1:
        raise ValueError("ellipsoid expansion factor must exceed 1")
    g0 = np.asarray(residual_oracle(np.zeros(dim)), float)
    if g0.shape != (dim,):
        raise ValueError(f"residual oracle must return {dim} entries")
    if np.all(g0 <= 0):
        return np.zeros(dim)

    mu_bar = _expand_feasible(residual_oracle, dim, params)
    if dim == 1:
        return _bisect_scalar(residual_oracle, float(mu_bar[0]), params.tol)
    return _ellipsoid_search(residual_oracle, mu_bar, params)


def _expand_feasible(residual_oracle, dim, params) -> np.ndarray:
    """Scale an all-ones vector by alpha until every residual is met."""
    mu = np.ones(dim)
    for _ in range(params.max_doublings + 1):
        if np.all(np.asarray(residual_oracle(mu)) <= 0):
            return mu
        mu = params.alpha * mu
    raise InfeasibleError(
        "geometric expansion found no feasible multiplier; constraint set "
        "appears ill-posed")


def _bisect_scalar(residual_oracle, hi: float, tol: float) -> np.ndarray:
    """Scalar bisection on [0, hi]; hi is feasible, 0 is not."""
    lo = 0.0
    for _ in range(200):
        if hi - lo <= 1e-15 * hi:
            break
        mid = 0.5 * (lo + hi)
        if np.max(residual_oracle(np.array([mid]))) > 0:
            lo = mid
        else:
            hi = mid
    assert np.max(residual_oracle(np.array([hi]))) <= tol
    return np.array([hi])


def _ellipsoid_search(residual_oracle, mu_bar, params) -> np.ndarray:
    d = mu_bar.size
    # starting ellipsoid contains the box [0, mu_bar]
    state = EllipsoidState(center=mu_bar / 2.0,
                           shape=(d / 4.0) * np.diag(mu_bar * mu_bar),
                           iteration=0)
    best = mu_bar.copy()                          # feasible by construction
    best_max = float(np.max(residual_oracle(mu_bar)))

    while state.iteration < params.max_iters:
        state.iteration += 1
        g = np.asarray(residual_oracle(state.center), float)
        gmax = float(g.max())
        if gmax <= params.tol:
            # prefer feasible centers near the boundary (least over-damped)
            if gmax > best_max:
                best, best_max = state.center.copy(), gmax
            # the diagonal can round slightly negative once the ellipsoid
            # degenerates; treat that as fully collapsed
            size = np.sqrt(np.clip(np.diag(state.shape), 0.0, None)).max()
            if size <= params.tol:
                return state.center
        # The residual vector is a supergradient of the concave dual, so the
        # kept halfspace is {mu: g^T (mu - c) >= 0}: cut normal -g. (At an
        # infeasible center this raises the multipliers of the violated
        # constraints; at a feasible one it lowers the slack ones.)
        cut = -g
        if params.most_violated_cut:
            cut = np.zeros(d)
            cut[int(np.argmax(g))] = -g.max()
        denom = cut @ state.shape @ cut
        if denom <= 0:  # ellipsoid numerically collapsed
            break
        step = (state.shape @ cut) / np.sqrt(denom)
        state.center = np.maximum(state.center - step / (d + 1.0), 0.0)
        shape = (d * d / (d * d - 1.0)) * (
            state.shape - (2.0 / (d + 1.0)) * np.outer(step, step))
        state.shape = 0.5 * (shape + shape.T)

    if float(np.max(residual_oracle(state.center))) <= params.tol:
        return state.center
    return best
