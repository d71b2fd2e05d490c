"""General convex per-satellite power constraints.

Each satellite carries a list of (weight matrix A, cap rho) pairs bounding
sum_k Tr(W^H A W) <= rho over its precoders. Per-satellite-total and
per-antenna limits are the two standard special cases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

PSD_TOL = 1e-10  # relative floor on the smallest eigenvalue of a weight matrix


@dataclass(frozen=True)
class PowerConstraintSet:
    """Immutable family of convex power constraints.

    weights[l][x] is a Hermitian PSD (N, N) matrix, caps[l][x] the positive
    cap in watts. identity[l] is True when satellite l has the single
    constraint A = I (enables the closed-form multiplier search).
    """

    weights: tuple
    caps: tuple
    identity: tuple

    @property
    def num_sats(self) -> int:
        return len(self.weights)

    def num_constraints(self, l: int) -> int:
        return len(self.weights[l])

    def scaled(self, factor: float) -> "PowerConstraintSet":
        """Same subspace weights with every cap multiplied by factor."""
        caps = tuple(c * factor for c in self.caps)
        return PowerConstraintSet(self.weights, caps, self.identity)


def make_constraint_set(per_sat_pairs) -> PowerConstraintSet:
    """Validate and freeze a list (over satellites) of [(A, rho), ...]."""
    weights, caps, ident = [], [], []
    for l, pairs in enumerate(per_sat_pairs):
        if len(pairs) == 0:
            raise ValidationError(f"satellite {l}: needs at least one constraint")
        mats, rhos = [], []
        for x, (A, rho) in enumerate(pairs):
            A = np.asarray(A, complex)
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise ValidationError(f"satellite {l} constraint {x}: A must be square")
            if not np.allclose(A, A.conj().T, atol=1e-12 * max(1.0, np.abs(A).max())):
                raise ValidationError(f"satellite {l} constraint {x}: A must be Hermitian")
            eigs = np.linalg.eigvalsh(A)
            norm = max(eigs.max(), -eigs.min(), 1e-300)
            if eigs.min() < -PSD_TOL * norm:
                raise ValidationError(
                    f"satellite {l} constraint {x}: A must be positive semidefinite")
            if not rho > 0:
                raise ValidationError(f"satellite {l} constraint {x}: rho must be positive")
            mats.append(A)
            rhos.append(float(rho))
        weights.append(tuple(mats))
        caps.append(np.asarray(rhos))
        n = mats[0].shape[0]
        ident.append(len(mats) == 1 and np.array_equal(mats[0], np.eye(n)))
    return PowerConstraintSet(tuple(weights), tuple(caps), tuple(ident))


def per_sat_total(rho_per_sat, num_antennas: int) -> PowerConstraintSet:
    """One total-power constraint per satellite: A = I_N, cap rho_l."""
    rho_per_sat = np.atleast_1d(np.asarray(rho_per_sat, float))
    eye = np.eye(num_antennas, dtype=complex)
    return make_constraint_set([[(eye, rho)] for rho in rho_per_sat])


def per_antenna(rho_per_antenna) -> PowerConstraintSet:
    """N single-entry diagonal constraints per satellite.

    rho_per_antenna: array (L, N) or list of per-satellite cap vectors.
    """
    pairs = []
    for caps in rho_per_antenna:
        caps = np.asarray(caps, float)
        n = caps.size
        sat = []
        for i, rho in enumerate(caps):
            E = np.zeros((n, n), complex)
            E[i, i] = 1.0
            sat.append((E, rho))
        pairs.append(sat)
    return make_constraint_set(pairs)


def residuals(precoders_for_sat: np.ndarray, constraints: PowerConstraintSet,
              l: int) -> np.ndarray:
    """Constraint residuals g_{l,x} = sum_k Tr(W^H A_x W) - rho_x for one
    satellite; feasible iff all entries <= 0.

    precoders_for_sat: (K, N, S) precoders of satellite l.
    """
    W = np.asarray(precoders_for_sat)
    n = constraints.weights[l][0].shape[0]
    if W.ndim != 3 or W.shape[1] != n:
        raise ValidationError(
            f"satellite {l}: precoders must have shape (K, {n}, S), got {W.shape}")
    g = np.empty(constraints.num_constraints(l))
    for x, (A, rho) in enumerate(zip(constraints.weights[l], constraints.caps[l])):
        g[x] = sum(np.trace(Wk.conj().T @ A @ Wk).real for Wk in W) - rho
    return g


def max_violation(precoders: np.ndarray, constraints: PowerConstraintSet) -> float:
    """Largest residual across all satellites (negative when feasible)."""
    return max(residuals(precoders[l], constraints, l).max()
               for l in range(constraints.num_sats))
