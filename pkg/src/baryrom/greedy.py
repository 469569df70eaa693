"""Greedy selection of icdf atoms for the barycentric dictionary.

Worst-case driven: each iteration solves one simplex least-squares problem
per training snapshot against the current atoms and promotes the snapshot
with the largest residual W2 error to the dictionary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import simplexqp

TERM_ABSOLUTE = "absolute"
TERM_RELATIVE = "relative"
TERM_MAX_ATOMS = "max_atoms"
TERM_EXHAUSTED = "exhausted"  # every training point is already an atom


@dataclass(frozen=True)
class Dictionary:
    """Selected atoms (columns), their parameter points and cached Gram."""

    atoms: np.ndarray  # (M, n)
    atom_params: np.ndarray  # (n, d)
    atom_indices: np.ndarray  # (n,) indices into the training set
    gram: np.ndarray  # (n, n) unweighted A^T A

    @property
    def size(self) -> int:
        return self.atoms.shape[1]


@dataclass
class GreedyReport:
    """Per-iteration diagnostics; entry k describes the dictionary of size sizes[k]."""

    sizes: list[int] = field(default_factory=list)
    delta: list[float] = field(default_factory=list)
    avg_error: list[float] = field(default_factory=list)
    condition: list[float] = field(default_factory=list)
    simplex_volume: list[float] = field(default_factory=list)
    termination: str = ""
    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class StepResult:
    next_index: int
    delta: float
    errors: np.ndarray  # (K,) per-snapshot W2 error
    weights: np.ndarray  # (n, K) optimal weights of this sweep
    converged: np.ndarray  # (K,) bool


def init_pair(train: np.ndarray) -> tuple[int, int]:
    """Indices of the pair of training icdfs at maximal L2(0,1) distance.

    Ties break to the lexicographically smallest (i, j).
    """
    train = np.asarray(train, dtype=float)
    k = train.shape[1]
    if k < 2:
        raise ValueError("need at least 2 training snapshots")
    sq = np.sum(train**2, axis=0) / train.shape[0]
    gram = train.T @ train / train.shape[0]
    d2 = sq[:, None] + sq[None, :] - 2.0 * gram
    d2[np.tril_indices(k)] = -np.inf
    flat = int(np.argmax(d2))
    return flat // k, flat % k


def _selected_mask(params: np.ndarray, atom_params: np.ndarray) -> np.ndarray:
    """True for training rows whose parameter point is already an atom."""
    mask = np.zeros(params.shape[0], dtype=bool)
    for row in atom_params:
        mask |= np.all(params == row[None, :], axis=1)
    return mask


def make_dictionary(train: np.ndarray, params: np.ndarray, indices) -> Dictionary:
    indices = np.asarray(indices, dtype=int)
    atoms = train[:, indices]
    return Dictionary(
        atoms=atoms,
        atom_params=np.asarray(params, dtype=float)[indices],
        atom_indices=indices,
        gram=atoms.T @ atoms,
    )


def greedy_step(
    dictionary: Dictionary,
    train: np.ndarray,
    params: np.ndarray,
    warm: np.ndarray | None = None,
    tol: float = simplexqp.DEFAULT_TOL,
    max_iter: int = simplexqp.DEFAULT_MAX_ITER,
) -> StepResult:
    """One residual sweep: solve all per-snapshot QPs, pick the worst snapshot.

    Snapshots whose parameter point is already in the dictionary are excluded
    from the argmax. Warm starts are guarded against stalls by letting each
    column fall back to the inverse-distance start when that one scores
    better.
    """
    if dictionary.size < 2:
        raise ValueError("dictionary must hold at least 2 atoms")
    res = simplexqp.solve_batch(
        dictionary.atoms, train, warm, tol, max_iter, also_try_default=warm is not None
    )
    errors = np.sqrt(np.maximum(res.objective, 0.0))
    masked = errors.copy()
    masked[_selected_mask(params, dictionary.atom_params)] = -np.inf
    next_index = int(np.argmax(masked)) if np.isfinite(masked.max()) else -1
    return StepResult(
        next_index=next_index,
        delta=float(errors.max()),
        errors=errors,
        weights=res.weights,
        converged=res.converged,
    )


def cayley_menger_volume(atoms: np.ndarray) -> float:
    """Volume of the simplex spanned by the atom icdfs, normalized by the
    regular unit-edge simplex of the same dimension.

    Built from the squared pairwise L2(0,1) distances; the bordered
    determinant reduces the normalized value to sqrt(|det|/n). Degenerate
    (affinely dependent) atom sets give 0.
    """
    atoms = np.asarray(atoms, dtype=float)
    n = atoms.shape[1]
    if n < 2:
        raise ValueError("need at least 2 atoms")
    sq = np.sum(atoms**2, axis=0) / atoms.shape[0]
    gram = atoms.T @ atoms / atoms.shape[0]
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * gram, 0.0)
    cm = np.empty((n + 1, n + 1))
    cm[0, 0] = 0.0
    cm[0, 1:] = 1.0
    cm[1:, 0] = 1.0
    cm[1:, 1:] = d2
    sign, logabs = np.linalg.slogdet(cm)
    required = 1.0 if n % 2 == 0 else -1.0
    if sign != required or not math.isfinite(logabs):
        return 0.0
    return math.exp(0.5 * (logabs - math.log(n)))


def run(
    train: np.ndarray,
    params: np.ndarray,
    eps_abs: float = 0.0,
    eps_rel: float = 0.0,
    n_max: int = 2,
    tol: float = simplexqp.DEFAULT_TOL,
    max_iter: int = simplexqp.DEFAULT_MAX_ITER,
    on_iteration=None,
) -> tuple[Dictionary, GreedyReport, np.ndarray]:
    """Full greedy loop with the three termination criteria.

    eps_rel = 0 disables the relative criterion: with it enabled at zero the
    loop would stop at the first solver-noise increase of the worst-case
    error, which the reference experiments are expected to ride through.

    Returns the dictionary, the per-iteration report, and the (n, K) weight
    matrix of the final sweep. on_iteration(size, indices, weights, errors)
    is called once per completed sweep.
    """
    train = np.asarray(train, dtype=float)
    params = np.asarray(params, dtype=float)
    if not 0.0 <= eps_rel < 1.0:
        raise ValueError("eps_rel must lie in [0, 1)")
    if eps_abs < 0.0:
        raise ValueError("eps_abs must be nonnegative")
    if n_max < 2:
        raise ValueError("n_max must be at least 2")

    i0, j0 = init_pair(train)
    selected = [i0, j0]
    report = GreedyReport()
    warm = None
    prev_delta = None

    while True:
        dictionary = make_dictionary(train, params, selected)
        step = greedy_step(dictionary, train, params, warm, tol, max_iter)
        n = dictionary.size
        report.sizes.append(n)
        report.delta.append(step.delta)
        report.avg_error.append(float(step.errors.mean()))
        report.condition.append(simplexqp.condition_of_gram(dictionary.gram))
        report.simplex_volume.append(cayley_menger_volume(dictionary.atoms))
        bad = int(np.count_nonzero(~step.converged))
        if bad:
            report.warnings.append(
                f"n={n}: {bad} of {train.shape[1]} weight solves did not converge"
            )
        if on_iteration is not None:
            on_iteration(n, list(selected), step.weights, step.errors)

        if step.delta < eps_abs:
            report.termination = TERM_ABSOLUTE
            break
        if (
            prev_delta is not None
            and eps_rel > 0.0
            and (prev_delta - step.delta) < eps_rel * prev_delta
        ):
            report.termination = TERM_RELATIVE
            break
        if n >= n_max:
            report.termination = TERM_MAX_ATOMS
            break
        if step.next_index < 0:
            report.termination = TERM_EXHAUSTED
            break

        selected.append(step.next_index)
        warm = np.vstack([step.weights, np.zeros((1, train.shape[1]))])
        prev_delta = step.delta

    return dictionary, report, step.weights
