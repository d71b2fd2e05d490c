"""Maximum-weight bipartite matching of streams to satellites.

Rectangular problems (S streams, L >= S satellites) are padded to square
with zero-weight dummy streams and solved by the Hungarian algorithm in its
O(n^3) potential/augmenting-path form. A brute-force enumerator serves as
the test oracle.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import InfeasibleError

_BRUTE_FORCE_LIMIT = 8


def _hungarian_min(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost perfect matching on a square matrix.

    Returns row -> column. Classic dual-potential shortest augmenting path;
    1-based internal indexing with column 0 as the virtual root.
    """
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=int)   # match[j] = row assigned to column j
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = np.inf
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    rows = np.empty(n, dtype=int)
    for j in range(1, n + 1):
        rows[match[j] - 1] = j - 1
    return rows


def _check_weights(weights: np.ndarray) -> np.ndarray:
    w = np.asarray(weights, float)
    if w.ndim != 2:
        raise ValueError("weights must be a 2-D stream-by-satellite matrix")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if w.shape[0] > w.shape[1]:
        raise InfeasibleError(
            f"cannot place {w.shape[0]} streams on {w.shape[1]} satellites")
    return w


def _optimal_value(w: np.ndarray) -> float:
    """Optimal assignment value of a (possibly rectangular) weight matrix."""
    s, l = w.shape
    if s == 0:
        return 0.0
    padded = np.zeros((l, l))
    padded[:s] = w
    cost = padded.max() - padded
    cols = _hungarian_min(cost)
    return float(sum(w[i, cols[i]] for i in range(s)))


def max_weight_assignment(weights) -> np.ndarray:
    """Injective stream -> satellite map maximizing the summed weight.

    Among optimal assignments, returns the lexicographically smallest
    mapping by stream index. Raises InfeasibleError when S > L.
    """
    w = _check_weights(weights)
    s_count, l_count = w.shape
    scale = max(1.0, np.abs(w).max())
    tol = 1e-9 * scale

    target = _optimal_value(w)
    mapping = np.empty(s_count, dtype=int)
    avail = list(range(l_count))
    sub = w
    for s in range(s_count):
        for pos, l in enumerate(avail):
            rest = np.delete(sub[1:], pos, axis=1)
            if sub[0, pos] + _optimal_value(rest) >= target - tol:
                mapping[s] = l
                target -= sub[0, pos]
                avail.pop(pos)
                sub = rest
                break
        else:  # numerically unreachable; fall back to the largest remainder
            pos = int(np.argmax(sub[0]))
            mapping[s] = avail.pop(pos)
            target -= sub[0, pos]
            sub = np.delete(sub[1:], pos, axis=1)
    return mapping


def brute_force_assignment(weights) -> np.ndarray:
    """Exhaustive-search oracle over all injections (S <= L <= 8 only)."""
    w = _check_weights(weights)
    s_count, l_count = w.shape
    if l_count > _BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"brute force limited to {_BRUTE_FORCE_LIMIT} satellites, got {l_count}")
    best_val = -np.inf
    best = None
    for perm in itertools.permutations(range(l_count), s_count):
        val = sum(w[s, perm[s]] for s in range(s_count))
        if val > best_val:
            best_val = val
            best = perm
    return np.asarray(best, dtype=int)


def assignment_value(weights, mapping) -> float:
    """Summed weight of a given stream -> satellite mapping."""
    w = np.asarray(weights, float)
    return float(sum(w[s, l] for s, l in enumerate(mapping)))
