"""Matrix-free SPD operators M + h*S and a deterministic preconditioned CG solver.

M is a positive diagonal (vertex weights), S the conductance Laplacian of an edge
list: (S u)_i = sum_{j ~ i} c_ij (u_i - u_j).  Constants are in the kernel of S,
so A applied to a constant vector returns M times it.

The solver is conjugate gradients with Jacobi (diagonal) preconditioning, written
out by hand so the iteration order is fixed and runs are bit-reproducible; library
solvers do not pin down either.  A dense direct path is provided as an internal
oracle for small systems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SpdOperator", "SolverError", "stiffness_apply", "cg_solve", "dense_solve"]


class SolverError(RuntimeError):
    """Iteration budget exhausted without meeting the residual tolerance."""

    def __init__(self, message: str, relative_residual: float):
        super().__init__(message)
        self.relative_residual = relative_residual


def stiffness_apply(edges: np.ndarray, coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply the conductance Laplacian of (edges, coeffs) to x."""
    n = len(x)
    if len(edges) == 0:
        return np.zeros(n)
    d = coeffs * (x[edges[:, 0]] - x[edges[:, 1]])
    return (np.bincount(edges[:, 0], weights=d, minlength=n)
            - np.bincount(edges[:, 1], weights=d, minlength=n))


@dataclass(frozen=True)
class SpdOperator:
    """A = diag(mass) + h * S with S the Laplacian of (edges, coeffs).

    mass must be entrywise positive, coeffs entrywise nonnegative and h >= 0,
    which makes A symmetric positive definite.
    """

    mass: np.ndarray
    edges: np.ndarray
    coeffs: np.ndarray
    h: float

    @property
    def n(self) -> int:
        return len(self.mass)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"x has shape {x.shape}, expected ({self.n},)")
        return self.mass * x + self.h * stiffness_apply(self.edges, self.coeffs, x)

    def diagonal(self) -> np.ndarray:
        d = self.mass.astype(float).copy()
        if len(self.edges):
            d += self.h * (np.bincount(self.edges[:, 0], weights=self.coeffs, minlength=self.n)
                           + np.bincount(self.edges[:, 1], weights=self.coeffs, minlength=self.n))
        return d

    def dense(self) -> np.ndarray:
        """Assemble A as a dense array (oracle path; meant for small n)."""
        A = np.diag(self.mass.astype(float))
        for (i, j), c in zip(self.edges, self.coeffs):
            A[i, i] += self.h * c
            A[j, j] += self.h * c
            A[i, j] -= self.h * c
            A[j, i] -= self.h * c
        return A


def cg_solve(A: SpdOperator, b: np.ndarray, rel_tol: float = 1e-10,
             max_iter: int | None = None) -> np.ndarray:
    """Solve A x = b to ||A x - b||_2 <= rel_tol * ||b||_2.

    Jacobi-preconditioned CG from x = 0 with a fixed iteration order.  When the
    recurrence residual meets the target, the true residual is recomputed; if
    drift has spoiled it the iteration restarts from the current iterate.  Raises
    SolverError (reporting the relative residual achieved) if max_iter (default
    50 n) is exhausted.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (A.n,):
        raise ValueError(f"b has shape {b.shape}, expected ({A.n},)")
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(A.n)
    if max_iter is None:
        max_iter = 50 * A.n
    target = rel_tol * b_norm

    inv_diag = 1.0 / A.diagonal()
    x = np.zeros(A.n)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(np.dot(r, z))
    r_norm = float(np.linalg.norm(r))

    for _ in range(max_iter):
        if r_norm <= target:
            true_r = b - A.apply(x)
            true_norm = float(np.linalg.norm(true_r))
            if true_norm <= target:
                return x
            # recurrence drifted: restart from the true residual
            r = true_r
            z = inv_diag * r
            p = z.copy()
            rz = float(np.dot(r, z))
            r_norm = true_norm
        Ap = A.apply(p)
        pAp = float(np.dot(p, Ap))
        if pAp <= 0.0:
            raise SolverError(
                f"cg_solve: breakdown (p.Ap = {pAp:.3e}); operator not positive definite?",
                r_norm / b_norm)
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        r_norm = float(np.linalg.norm(r))
        z = inv_diag * r
        rz_next = float(np.dot(r, z))
        p = z + (rz_next / rz) * p
        rz = rz_next

    if r_norm <= target:
        true_r = b - A.apply(x)
        if float(np.linalg.norm(true_r)) <= target:
            return x
    raise SolverError(
        f"cg_solve: no convergence in {max_iter} iterations "
        f"(relative residual {r_norm / b_norm:.3e}, target {rel_tol:.3e})",
        r_norm / b_norm)


def dense_solve(A: SpdOperator, b: np.ndarray) -> np.ndarray:
    """Direct solve through the dense assembly (the small-system oracle)."""
    return np.linalg.solve(A.dense(), np.asarray(b, dtype=float))
