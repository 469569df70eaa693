"""POD baseline: snapshot-method modes, projection and modes-to-tolerance.

Snapshots enter as the columns of an N x K matrix, uncentered. Modes come
from the symmetric eigen-decomposition of the K x K Gram (method of
snapshots); a QR polish restores orthonormality that the Gram route loses
for the small singular values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

# relative cutoff below which Gram eigenvalues are numerical noise
SIGMA_CUTOFF = 1e-7


@dataclass(frozen=True)
class PodBasis:
    modes: np.ndarray  # (N, r), orthonormal columns
    singular_values: np.ndarray  # (r,), nonincreasing

    @property
    def rank(self) -> int:
        return self.modes.shape[1]


def compute(snapshots: np.ndarray) -> PodBasis:
    """Left singular basis of the raw snapshot matrix via the K x K Gram."""
    snaps = np.asarray(snapshots, dtype=float)
    if snaps.ndim != 2 or snaps.shape[1] < 1:
        raise ValueError("need an N x K snapshot matrix with K >= 1")
    gram = snaps.T @ snaps
    eigvals, eigvecs = eigh(gram)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]
    sigma = np.sqrt(eigvals)
    if sigma[0] == 0.0:
        raise ValueError("snapshot matrix is identically zero")
    keep = sigma > sigma[0] * SIGMA_CUTOFF
    sigma = sigma[keep]
    modes = snaps @ (eigvecs[:, keep] / sigma[None, :])
    # Gram-route modes drift from orthonormality as sigma shrinks; QR with a
    # sign fix restores it without changing any leading span
    q, r = np.linalg.qr(modes)
    q = q * np.sign(np.diag(r))[None, :]
    return PodBasis(modes=q, singular_values=sigma)


def reconstruct(basis: PodBasis, s: np.ndarray, n: int) -> np.ndarray:
    """Orthogonal projection of a snapshot onto the span of the first n modes."""
    if not 1 <= n <= basis.rank:
        raise ValueError(f"mode count {n} outside [1, {basis.rank}]")
    psi = basis.modes[:, :n]
    return psi @ (psi.T @ np.asarray(s, dtype=float))


def relative_l1_errors(basis: PodBasis, snapshots: np.ndarray) -> np.ndarray:
    """Relative L1 reconstruction error for every mode count and snapshot.

    Returns an (r, K) array; row n-1 holds the errors using the first n
    modes. Built by peeling one rank-1 contribution at a time.
    """
    snaps = np.asarray(snapshots, dtype=float)
    coeffs = basis.modes.T @ snaps  # (r, K)
    norms = np.sum(np.abs(snaps), axis=0)
    norms = np.where(norms > 0.0, norms, 1.0)
    resid = snaps.copy()
    out = np.empty((basis.rank, snaps.shape[1]))
    for n in range(basis.rank):
        resid -= np.outer(basis.modes[:, n], coeffs[n])
        out[n] = np.sum(np.abs(resid), axis=0) / norms
    return out


def modes_for_tolerance(basis: PodBasis, snapshots: np.ndarray, eps: float) -> int | None:
    """Smallest mode count whose mean relative L1 error over the set is
    below eps; None when even the full basis cannot reach it."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    means = relative_l1_errors(basis, snapshots).mean(axis=1)
    hits = np.flatnonzero(means < eps)
    if hits.size == 0:
        return None
    return int(hits[0]) + 1
