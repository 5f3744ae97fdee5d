"""Sparse systems, constraint elimination and the linear solvers.

Matrices are stored as ``scipy.sparse.csr_matrix``.  Conjugate gradients and
restarted GMRES are implemented here; the sparse LU path uses SuperLU.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)

DEFAULT_RTOL = 1e-12
DENSE_LIMIT = 2000
# accepted componentwise backward error once refinement can no longer reduce
# the residual: the double-precision floor of b - A x is eps * |A| |x|
FLOOR_BACKWARD_ERROR = 64 * np.finfo(float).eps


class SolverError(RuntimeError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass(eq=False)
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    constrained_dofs: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    constrained_values: np.ndarray = field(default_factory=lambda: np.empty(0))
    symmetric: bool = False

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def to_csr(A) -> sp.csr_matrix:
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


def check_symmetry(A) -> float:
    """max |A - A^T| / max |A| (0 for the zero matrix)."""
    A = sp.csr_matrix(A)
    amax = abs(A).max() if A.nnz else 0.0
    if amax == 0:
        return 0.0
    D = (A - A.T).tocsr()
    return float(abs(D).max() / amax) if D.nnz else 0.0


def apply_constraints(A, b, dofs, values, symmetric: bool = True):
    """Replace constrained rows by identity rows and move known values to the rhs.

    With ``symmetric=True`` the constrained columns are eliminated as well,
    so a symmetric matrix stays symmetric.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    dofs = np.asarray(dofs, dtype=np.int64)
    values = np.broadcast_to(np.asarray(values, dtype=float), dofs.shape)
    b = np.array(b, dtype=float)
    if len(dofs) == 0:
        return A, b
    x0 = np.zeros(n)
    x0[dofs] = values
    free = np.ones(n)
    free[dofs] = 0.0
    F = sp.diags(free)
    if symmetric:
        b = b - A @ x0
        A = F @ A @ F
    else:
        A = F @ A
    A = (A + sp.diags(1.0 - free)).tocsr()
    b[dofs] = values
    return to_csr(A), b


def _rel_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return r / nb if nb > 0 else r


def backward_error(A, x, b) -> float:
    """Componentwise backward error max_i |b - A x|_i / (|A| |x| + |b|)_i."""
    A = sp.csr_matrix(A)
    r = np.abs(b - A @ x)
    scale = abs(A) @ np.abs(x) + np.abs(b)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(scale > 0, r / scale, np.where(r > 0, np.inf, 0.0))
    return float(w.max()) if len(w) else 0.0


def solve_spd(A, b, rel_tol: float = DEFAULT_RTOL, maxiter: int | None = None,
              x0=None) -> tuple[np.ndarray, int]:
    """Jacobi-preconditioned conjugate gradients; returns (x, iterations)."""
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = len(b)
    maxiter = 20 * n if maxiter is None else maxiter
    d = A.diagonal()
    if np.any(d <= 0):
        raise SolverError("Jacobi preconditioner needs a positive diagonal")
    dinv = 1.0 / d
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    nb = np.linalg.norm(b)
    if nb == 0:
        return np.zeros(n), 0
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise SolverError("matrix is not positive definite", np.linalg.norm(r) / nb)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= rel_tol * nb:
            # guard against drift of the recursive residual
            if _rel_residual(A, x, b) <= rel_tol:
                return x, it
            r = b - A @ x
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG did not converge in {maxiter} iterations", _rel_residual(A, x, b))


def solve_gmres(A, b, rel_tol: float = DEFAULT_RTOL, restart: int = 200,
                maxiter: int | None = None) -> tuple[np.ndarray, int]:
    """Right Jacobi-preconditioned restarted GMRES(m); returns (x, iterations)."""
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = len(b)
    maxiter = 20 * n if maxiter is None else maxiter
    d = A.diagonal()
    dinv = np.where(d != 0, 1.0 / np.where(d != 0, d, 1.0), 1.0)
    nb = np.linalg.norm(b)
    if nb == 0:
        return np.zeros(n), 0
    x = np.zeros(n)
    total = 0
    m = min(restart, n)
    while total < maxiter:
        r = b - A @ x
        beta = np.linalg.norm(r)
        if beta <= rel_tol * nb:
            return x, total
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        j_done = 0
        for j in range(m):
            w = A @ (dinv * V[j])
            for i in range(j + 1):
                H[i, j] = w @ V[i]
                w -= H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            if H[j + 1, j] > 0:
                V[j + 1] = w / H[j + 1, j]
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0:
                raise SolverError("GMRES breakdown", beta / nb)
            cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            j_done = j + 1
            if abs(g[j + 1]) <= rel_tol * nb:
                break
        y = scipy.linalg.solve_triangular(H[:j_done, :j_done], g[:j_done])
        x += dinv * (V[:j_done].T @ y)
    res = _rel_residual(A, x, b)
    if res <= rel_tol:
        return x, total
    raise SolverError(f"GMRES did not converge in {maxiter} iterations", res)


def solve_dense(A, b) -> np.ndarray:
    A = A.toarray() if sp.issparse(A) else np.asarray(A)
    return scipy.linalg.lu_solve(scipy.linalg.lu_factor(A), b)


def solve_direct(A, b) -> np.ndarray:
    A = sp.csc_matrix(A)
    return spla.splu(A, permc_spec="MMD_AT_PLUS_A").solve(np.asarray(b, dtype=float))


def solve_general(A, b, rel_tol: float = DEFAULT_RTOL, restart: int = 200) -> np.ndarray:
    """Nonsymmetric solve: dense LU up to ``DENSE_LIMIT`` unknowns, GMRES beyond."""
    if A.shape[0] <= DENSE_LIMIT:
        return solve_dense(A, b)
    return solve_gmres(A, b, rel_tol, restart)[0]


def solve(system: LinearSystem, solver: str = "auto", rel_tol: float = DEFAULT_RTOL,
          refine_steps: int = 3):
    """Solve a linear system and check the residual contract.

    ``solver`` is one of ``auto`` (dense LU when small, sparse LU otherwise),
    ``direct``, ``dense``, ``cg`` or ``gmres``.  Direct solves get up to
    ``refine_steps`` steps of iterative refinement.  Returns ``(x, info)``.

    A direct solve whose relative residual stays above ``rel_tol`` after
    refinement is still accepted when its componentwise backward error is at
    the rounding floor (``info["residual_floor"]`` is then True): for large
    high-order systems ``eps * |A||x|`` alone can exceed ``rel_tol * |b|``.
    """
    A, b = system.matrix, system.rhs
    n = system.n
    kind = "symmetric" if system.symmetric else "nonsymmetric"
    if solver == "auto":
        solver = "dense" if n <= DENSE_LIMIT else "direct"
    logger.info("solving %s system of size %d with %s", kind, n, solver)
    iterations = 0
    floor = False
    if solver == "cg":
        x, iterations = solve_spd(A, b, rel_tol)
    elif solver == "gmres":
        x, iterations = solve_gmres(A, b, rel_tol)
    elif solver in ("direct", "dense"):
        if solver == "dense":
            lu = scipy.linalg.lu_factor(A.toarray())
            step = lambda r: scipy.linalg.lu_solve(lu, r)  # noqa: E731
        else:
            lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A")
            step = lu.solve
        x = step(np.asarray(b, dtype=float))
        for _ in range(refine_steps):
            r = b - A @ x
            if np.linalg.norm(r) <= rel_tol * np.linalg.norm(b):
                break
            x = x + step(r)
        res = _rel_residual(A, x, b)
        if np.isfinite(res) and res > rel_tol:
            floor = backward_error(A, x, b) <= FLOOR_BACKWARD_ERROR
            if floor:
                logger.warning("relative residual %.3e is at the rounding floor; accepted", res)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    res = _rel_residual(A, x, b)
    if not np.isfinite(res) or (res > rel_tol and not floor):
        raise SolverError(f"{solver} solve missed tolerance {rel_tol:g}", res)
    return x, {"solver": solver, "symmetric": system.symmetric, "residual": res,
               "residual_floor": floor, "iterations": iterations, "n": n,
               "preconditioner": "jacobi" if solver in ("cg", "gmres") else None}


def write_coo(A, path) -> None:
    """Dump a matrix as ``i j value`` lines."""
    C = sp.coo_matrix(A)
    with open(path, "w") as fh:
        for i, j, v in zip(C.row.tolist(), C.col.tolist(), C.data.tolist()):
            fh.write(f"{i} {j} {v:.17g}\n")
