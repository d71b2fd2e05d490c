"""Reference precoders: MMSE, ZF, orthogonal TDMA-MRT and random association.

Each baseline is defined per satellite on the effective channels and uses
the same sqrt(beta)-proportional per-user power sharing as the WMMSE
initializer, so comparisons isolate the precoding strategy rather than the
power policy.
"""

from __future__ import annotations

import warnings

import numpy as np

from .channel import EffectiveChannel
from .joint_wmmse import init_precoders
from .power import PowerConstraintSet, per_sat_total
from .se_eval import SEReport, approx_se, exact_se_mc
from .streamwise import StreamAssignment

_RIDGE = 1e-8


def _as_constraints(effective, rho) -> PowerConstraintSet:
    L, K, M, N = effective.shape
    rho = np.broadcast_to(np.asarray(rho, float), (L,))
    return per_sat_total(rho, N)


def mmse_baseline(effective: EffectiveChannel, rho,
                  num_streams: int | None = None) -> np.ndarray:
    """Regularized-MMSE precoders; identical to the WMMSE initialization."""
    return init_precoders(effective, _as_constraints(effective, rho), num_streams)


def zf_baseline(effective: EffectiveChannel, rho,
                num_streams: int | None = None) -> np.ndarray:
    """Zero-forcing: per satellite, directions that null the other users'
    effective rows, mapped to the dominant user directions and power-shared
    like the initializer. Rank-deficient user geometries fall back to a
    small ridge."""
    L, K, M, N = effective.shape
    S = M if num_streams is None else num_streams
    constraints = _as_constraints(effective, rho)
    out = np.empty((L, K, N, S), complex)
    for l in range(L):
        gram = np.zeros((N, N), complex)
        for i in range(K):
            gram += effective.hbar[l, i].conj().T @ effective.hbar[l, i]
        # gram has rank K; invert it on its row space only
        eigval = np.linalg.eigvalsh(gram)
        rank_ok = eigval[-K] > 1e-10 * eigval[-1] if K <= N else False
        if not rank_ok:
            warnings.warn(f"satellite {l}: user directions nearly collinear, "
                          "using ridge-regularized zero forcing")
            gram = gram + _RIDGE * (np.trace(gram).real / N) * np.eye(N)
            inv = np.linalg.inv(gram)
        else:
            inv = np.linalg.pinv(gram, hermitian=True,
                                 rcond=1e-10)
        rho_bar = float(constraints.caps[l].min())
        root_beta = np.sqrt(effective.beta[l])
        shares = rho_bar * root_beta / root_beta.sum()
        for k in range(K):
            left = np.linalg.svd(effective.hbar[l, k], full_matrices=True)[0]
            raw = inv @ (effective.hbar[l, k].conj().T @ left[:, :S])
            norm = np.linalg.norm(raw)
            if norm < 1e-300:
                raw = np.zeros((N, S), complex)
                raw[:, 0] = effective.a[l, k].conj() / np.sqrt(N)
                norm = 1.0
            out[l, k] = np.sqrt(shares[k]) * raw / norm
    return out


def tdma_mrt_precoders(effective: EffectiveChannel, link_stats, rho) -> list:
    """One single-user precoder set per user: only the strongest-gain
    satellite transmits, matched-filter direction, full power."""
    L, K, M, N = effective.shape
    rho = np.broadcast_to(np.asarray(rho, float), (L,))
    sets = []
    for k in range(K):
        l = int(np.argmax(link_stats.beta[:, k]))
        W = np.zeros((L, K, N, 1), complex)
        # matched filter to the rank-one link: Hb^H (dominant left vector)
        # is proportional to the conjugate satellite-side response
        direction = effective.a[l, k].conj()
        W[l, k, :, 0] = np.sqrt(rho[l]) * direction / np.linalg.norm(direction)
        sets.append((l, W))
    return sets


def tdma_mrt_baseline(effective: EffectiveChannel, link_stats, rho,
                      estimator: str = "approx", trials: int = 0,
                      rng=None) -> SEReport:
    """Orthogonal scheduling: each user is served alone by its nearest
    satellite with MRT, and the time sharing divides each SE by K."""
    L, K, M, N = effective.shape
    noise = effective.noise_power_w
    per_user = np.empty(K)
    for k, (_, W) in enumerate(tdma_mrt_precoders(effective, link_stats, rho)):
        if estimator == "approx":
            rep = approx_se(W, effective, noise)
        else:
            rep = exact_se_mc(W, link_stats, effective, noise, trials, rng)
        per_user[k] = rep.per_user_se[k] / K
    return SEReport(per_user_se=per_user, sum_se=float(per_user.sum()),
                    trials_used=trials if estimator != "approx" else 0,
                    estimator_kind=estimator)


def random_association(rng: np.random.Generator, num_streams: int,
                       num_sats: int, num_users: int) -> StreamAssignment:
    """Uniformly random injective stream -> satellite map per user."""
    if num_streams > num_sats:
        raise ValueError("cannot assign more streams than satellites")
    pi = np.stack([rng.permutation(num_sats)[:num_streams]
                   for _ in range(num_users)])
    return StreamAssignment.from_pi(pi, num_sats)
