"""Independent brute-force references used across the test suite."""

from itertools import chain, combinations

import numpy as np


def simplex_ls_active_set(atoms: np.ndarray, target: np.ndarray):
    """Exact simplex least squares by exhaustive active-set enumeration.

    Solves the equality-constrained least squares on every face of the
    simplex (every nonempty support set) via the KKT system and returns the
    best feasible candidate. Only usable for small atom counts.
    """
    m, n = atoms.shape
    gram = atoms.T @ atoms / m
    cross = atoms.T @ target / m
    const = float(np.mean(target**2))

    best_w, best_f = None, np.inf
    supports = chain.from_iterable(
        combinations(range(n), r) for r in range(1, n + 1)
    )
    for support in supports:
        s = list(support)
        k = len(s)
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = 2.0 * gram[np.ix_(s, s)]
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.concatenate([2.0 * cross[s], [1.0]])
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        w_s = sol[:k]
        if np.any(w_s < -1e-10):
            continue
        w = np.zeros(n)
        w[s] = np.clip(w_s, 0.0, None)
        w /= w.sum()
        f = float(w @ gram @ w - 2.0 * cross @ w + const)
        if f < best_f:
            best_f, best_w = f, w
    return best_w, best_f


def project_simplex_kkt_enumeration(v: np.ndarray):
    """Euclidean simplex projection by brute force over active sets."""
    v = np.asarray(v, dtype=float)
    n = v.size
    best_w, best_d = None, np.inf
    for r in range(1, n + 1):
        for support in combinations(range(n), r):
            s = list(support)
            # on the face, minimizing ||w - v||^2 with sum w = 1 shifts every
            # free coordinate by the same tau
            tau = (v[s].sum() - 1.0) / len(s)
            w = np.zeros(n)
            w[s] = v[s] - tau
            if np.any(w[s] < -1e-12):
                continue
            d = float(np.sum((w - v) ** 2))
            if d < best_d:
                best_d, best_w = d, np.maximum(w, 0.0)
    return best_w
