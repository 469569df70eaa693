"""Least squares over the probability simplex.

Finds the barycentric weights min_{L in simplex} ||A L - f||^2 where the
columns of A are discrete icdf atoms and the norm carries the same 1/M
rectangle-rule weight as the W2 distance, so the optimal objective is
exactly the squared W2 error of the best barycenter.

The solver is projected gradient descent with Nesterov acceleration,
function-value adaptive restart and a fixed step 1/L. Many targets against
one atom matrix are solved in a single batched run; the greedy sweep relies
on this.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 50_000

ZERO_DISTANCE_EPS = 1e-12


@dataclass(frozen=True)
class QpProblem:
    """Atom matrix (M x n, columns = icdfs) and one target icdf (M,)."""

    atoms: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        target = np.asarray(self.target, dtype=float)
        if atoms.ndim != 2:
            raise ValueError("atoms must be an M x n matrix")
        if target.shape != (atoms.shape[0],):
            raise ValueError(
                f"target length {target.shape} does not match atom rows {atoms.shape[0]}"
            )
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "target", target)


@dataclass(frozen=True)
class QpResult:
    weights: np.ndarray
    objective: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class BatchResult:
    """Per-column results of a batched simplex solve."""

    weights: np.ndarray  # (n, T)
    objective: np.ndarray  # (T,)
    iterations: np.ndarray  # (T,)
    converged: np.ndarray  # (T,) bool


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a vector onto the probability simplex.

    Sort-based thresholding: with the entries sorted in decreasing order,
    rho = max{k : v_(k) - (sum_{j<=k} v_(j) - 1)/k > 0} and the projection is
    max(v - tau, 0) with tau = (sum_{j<=rho} v_(j) - 1)/rho.
    """
    v = np.asarray(v, dtype=float)
    return project_columns_to_simplex(v[:, None])[:, 0]


def project_columns_to_simplex(v: np.ndarray) -> np.ndarray:
    """Column-wise simplex projection of an (n, T) array."""
    v = np.asarray(v, dtype=float)
    n = v.shape[0]
    u = -np.sort(-v, axis=0)
    css = np.cumsum(u, axis=0)
    k = np.arange(1, n + 1, dtype=float)[:, None]
    # the positivity set is always {1..rho}, so counting works
    rho = np.count_nonzero(u - (css - 1.0) / k > 0.0, axis=0)
    tau = (css[rho - 1, np.arange(v.shape[1])] - 1.0) / rho
    return np.maximum(v - tau[None, :], 0.0)


def init_weights(distances: np.ndarray) -> np.ndarray:
    """Weights inversely proportional to the W2 distance from each atom.

    Atoms at exactly zero distance take all the weight (uniformly among
    themselves if there are several).
    """
    d = np.asarray(distances, dtype=float)
    if np.any(d < 0.0):
        raise ValueError("distances must be nonnegative")
    zero = d == 0.0
    if zero.any():
        w = zero.astype(float)
    else:
        w = 1.0 / (d + ZERO_DISTANCE_EPS)
    return w / w.sum()


def condition_of_gram(gram: np.ndarray) -> float:
    """Eigenvalue ratio of a symmetric PSD Gram matrix.

    Returns +inf when the Gram is rank deficient at double-precision
    resolution (smallest eigenvalue below 1e-15 of the largest, or below
    the 1e-300 underflow floor).
    """
    eigs = np.linalg.eigvalsh(np.asarray(gram, dtype=float))
    lo, hi = eigs[0], eigs[-1]
    if hi <= 0.0:
        return float("inf")
    if lo <= max(1e-300, hi * 1e-15):
        return float("inf")
    return float(hi / lo)


def gram_condition(problem: QpProblem) -> float:
    """Condition number of A^T A via full symmetric eigen-decomposition."""
    return condition_of_gram(problem.atoms.T @ problem.atoms)


def _largest_eigenvalue(gram: np.ndarray) -> float:
    """Power iteration for the top eigenvalue of a PSD Gram matrix.

    The Gram of nonnegative atoms is entrywise nonnegative, so the all-ones
    start has a component on the Perron eigenvector.
    """
    n = gram.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n))
    lam = 0.0
    for _ in range(10_000):
        w = gram @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam_new = float(v @ (gram @ v))
        if abs(lam_new - lam) <= 1e-14 * max(1.0, lam_new):
            return lam_new
        lam = lam_new
    return lam


def _gram_objective(gram, cross, const, w):
    # ||A w - f||^2 in quadratic form; may dip epsilon-negative near zero
    quad = np.einsum("it,ij,jt->t", w, gram, w)
    return quad - 2.0 * np.sum(cross * w, axis=0) + const


def default_init(gram, cross, const) -> np.ndarray:
    """Column-wise inverse-distance initial weights in Gram form."""
    dist = np.sqrt(
        np.maximum(np.diag(gram)[:, None] + const[None, :] - 2.0 * cross, 0.0)
    )
    w = 1.0 / (dist + ZERO_DISTANCE_EPS)
    exact = dist == 0.0
    hit = exact.any(axis=0)
    w[:, hit] = exact[:, hit].astype(float)
    return w / w.sum(axis=0, keepdims=True)


def solve_batch(
    atoms: np.ndarray,
    targets: np.ndarray,
    init: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    also_try_default: bool = False,
) -> BatchResult:
    """Solve the simplex least-squares problem for many targets at once.

    atoms is (M, n), targets (M, T), init (n, T) or None for the
    inverse-distance default. A column converges when the gradient-mapping
    norm L * ||prox_step - point|| falls below tol; an objective-decrease
    test alone turns out to fire far from the optimum on ill-conditioned
    Grams (momentum rebuilds make per-iteration decrease arbitrarily small),
    so it is not used. Non-converged columns keep their best iterate and
    report converged=False.
    """
    atoms = np.asarray(atoms, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if targets.ndim == 1:
        targets = targets[:, None]
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    m, n = atoms.shape
    if targets.shape[0] != m:
        raise ValueError(f"targets have {targets.shape[0]} rows, atoms have {m}")
    t_count = targets.shape[1]

    gram = atoms.T @ atoms / m
    cross = atoms.T @ targets / m
    const = np.mean(targets**2, axis=0)

    if init is None:
        init = project_columns_to_simplex(default_init(gram, cross, const))
    else:
        init = np.asarray(init, dtype=float)
        if init.shape != (n, t_count):
            raise ValueError(f"init shape {init.shape} != {(n, t_count)}")
        init = project_columns_to_simplex(init)
        if also_try_default:
            # per-column better of the provided start and the
            # inverse-distance start (cheap stall insurance for warm starts)
            alt = project_columns_to_simplex(default_init(gram, cross, const))
            f_init = _gram_objective(gram, cross, const, init)
            f_alt = _gram_objective(gram, cross, const, alt)
            take = f_alt < f_init
            init[:, take] = alt[:, take]

    lam_max = _largest_eigenvalue(gram)
    if lam_max <= 0.0:
        # zero atom matrix: objective constant, any feasible point optimal
        w = project_columns_to_simplex(init)
        return BatchResult(
            weights=w,
            objective=_data_objective(atoms, targets, w),
            iterations=np.zeros(t_count, dtype=int),
            converged=np.ones(t_count, dtype=bool),
        )
    lip = 2.0 * lam_max * (1.0 + 1e-6)

    x = init
    x_prev = x.copy()
    y = x.copy()
    tmom = np.ones(t_count)
    fx = _gram_objective(gram, cross, const, x)
    iters = np.zeros(t_count, dtype=int)
    converged = np.zeros(t_count, dtype=bool)
    active = np.ones(t_count, dtype=bool)
    # stagnation window: freeze columns whose objective stops improving at
    # machine level so hopeless ill-conditioned columns do not burn the
    # full iteration budget
    window = 512
    f_ckpt = fx.copy()

    for k in range(1, max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        ya = y[:, idx]
        grad = 2.0 * (gram @ ya - cross[:, idx])
        xn = project_columns_to_simplex(ya - grad / lip)
        # gradient mapping at the momentum point: near-stationarity there
        # bounds the optimality gap of the accepted iterate
        gm = lip * np.linalg.norm(xn - ya, axis=0)
        fn = _gram_objective(gram, cross[:, idx], const[idx], xn)

        stalled = np.zeros(idx.size, dtype=bool)
        worse = fn > fx[idx]
        if worse.any():
            # function-value restart: plain projected-gradient step from the
            # best accepted point, which is a guaranteed-descent step
            ridx = idx[worse]
            grad_x = 2.0 * (gram @ x[:, ridx] - cross[:, ridx])
            xr = project_columns_to_simplex(x[:, ridx] - grad_x / lip)
            fr = _gram_objective(gram, cross[:, ridx], const[ridx], xr)
            gm[worse] = lip * np.linalg.norm(xr - x[:, ridx], axis=0)
            still = fr > fx[ridx]
            if still.any():
                # only possible if the Lipschitz estimate was low; keep the
                # previous iterate for those columns and freeze them
                xr[:, still] = x[:, ridx[still]]
                fr[still] = fx[ridx[still]]
                stalled[worse] |= still
            xn[:, worse] = xr
            fn[worse] = fr
            tmom[ridx] = 1.0

        done = gm < tol

        x_prev[:, idx] = x[:, idx]
        x[:, idx] = xn
        fx[idx] = fn
        iters[idx] = k

        tmom_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tmom[idx] ** 2))
        beta = (tmom[idx] - 1.0) / tmom_new
        y[:, idx] = xn + beta[None, :] * (xn - x_prev[:, idx])
        tmom[idx] = tmom_new

        if done.any():
            converged[idx[done & ~stalled]] = True
            active[idx[done]] = False
        if stalled.any():
            active[idx[stalled]] = False
        if k % window == 0:
            stale = (f_ckpt[idx] - fx[idx]) < 1e-12 * np.maximum(fx[idx], 1e-20)
            if stale.any():
                active[idx[stale & ~done]] = False
            f_ckpt[idx] = fx[idx]

    objective = _data_objective(atoms, targets, x)
    return BatchResult(weights=x, objective=objective, iterations=iters, converged=converged)


def _data_objective(atoms, targets, w):
    resid = atoms @ w - targets
    return np.mean(resid**2, axis=0)


def solve(
    problem: QpProblem,
    init: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> QpResult:
    """Optimal barycentric weights for a single target icdf."""
    init_mat = None if init is None else np.asarray(init, dtype=float)[:, None]
    res = solve_batch(problem.atoms, problem.target[:, None], init_mat, tol, max_iter)
    return QpResult(
        weights=res.weights[:, 0],
        objective=float(res.objective[0]),
        iterations=int(res.iterations[0]),
        converged=bool(res.converged[0]),
    )
