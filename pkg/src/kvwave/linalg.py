"""Symmetric tridiagonal operators and linear solvers for the schemes.

The three scheme matrices are assembled here:

* mass      -- diagonal of cell widths,
* damping   -- half the graph Laplacian of the damped-zone path, zero outside,
* stiffness -- flux-divergence operator, negative diagonal, coupling across
               the interfaces through the interface flux coefficients.

Systems are solved by a tridiagonal LU factorization computed once and reused
for every right-hand side (LAPACK gttrf/gttrs).  A hand-rolled dense
partial-pivot elimination is provided as an independent oracle for testing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import get_lapack_funcs

from .mesh import FluxCoefficients, Mesh

__all__ = [
    "SingularMatrixError",
    "TriDiagMatrix",
    "TriDiagFactorization",
    "assemble_mass",
    "assemble_damping",
    "assemble_stiffness",
    "factor",
    "solve",
    "dense_solve_oracle",
]

_gttrf, _gttrs = get_lapack_funcs(("gttrf", "gttrs"), (np.array([1.0]),))


class SingularMatrixError(ValueError):
    """Raised when a factorization or elimination meets an exactly zero pivot."""


@dataclass(frozen=True)
class TriDiagMatrix:
    """Symmetric tridiagonal matrix stored as main diagonal and one off-diagonal."""

    dim: int
    diag: np.ndarray
    off: np.ndarray

    def __post_init__(self) -> None:
        if self.diag.shape != (self.dim,) or self.off.shape != (max(self.dim - 1, 0),):
            raise ValueError("inconsistent tridiagonal storage shapes")
        if not (np.all(np.isfinite(self.diag)) and np.all(np.isfinite(self.off))):
            raise ValueError("matrix entries must be finite")
        self.diag.setflags(write=False)
        self.off.setflags(write=False)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        if self.dim > 1:
            y[:-1] += self.off * x[1:]
            y[1:] += self.off * x[:-1]
        return y

    def to_dense(self) -> np.ndarray:
        dense = np.diag(self.diag)
        if self.dim > 1:
            dense += np.diag(self.off, 1) + np.diag(self.off, -1)
        return dense

    def quadratic_form(self, x: np.ndarray) -> float:
        return float(x @ self.matvec(x))

    def inf_norm(self) -> float:
        return float(np.max(np.abs(self.to_dense()).sum(axis=1))) if self.dim else 0.0

    def dominance_margin(self) -> float:
        """Smallest row margin |diag| - sum|off|; positive means strictly
        diagonally dominant."""
        off_abs = np.abs(self.off)
        row_off = np.zeros(self.dim)
        if self.dim > 1:
            row_off[:-1] += off_abs
            row_off[1:] += off_abs
        return float(np.min(np.abs(self.diag) - row_off))

    def __add__(self, other: "TriDiagMatrix") -> "TriDiagMatrix":
        self._check_same_dim(other)
        return TriDiagMatrix(self.dim, self.diag + other.diag, self.off + other.off)

    def __sub__(self, other: "TriDiagMatrix") -> "TriDiagMatrix":
        self._check_same_dim(other)
        return TriDiagMatrix(self.dim, self.diag - other.diag, self.off - other.off)

    def scaled(self, c: float) -> "TriDiagMatrix":
        return TriDiagMatrix(self.dim, c * self.diag, c * self.off)

    def __rmul__(self, c: float) -> "TriDiagMatrix":
        return self.scaled(float(c))

    def _check_same_dim(self, other: "TriDiagMatrix") -> None:
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")


@dataclass(frozen=True)
class TriDiagFactorization:
    """Reusable LU factors of a tridiagonal matrix (partial pivoting)."""

    dim: int
    dl: np.ndarray
    d: np.ndarray
    du: np.ndarray
    du2: np.ndarray
    ipiv: np.ndarray


def assemble_mass(mesh: Mesh) -> TriDiagMatrix:
    """Diagonal mass matrix of cell widths."""
    n = mesh.n_max
    return TriDiagMatrix(n, mesh.cell_widths.copy(), np.zeros(max(n - 1, 0)))


def assemble_damping(mesh: Mesh) -> TriDiagMatrix:
    """Damped-zone coupling matrix: half the path-graph Laplacian.

    Nonzero only on the damped-zone block; its quadratic form is half the sum
    of squared jumps across the interior faces of that zone.
    """
    n = mesh.n_max
    first = mesh.n_alpha
    last = first + mesh.n_damp - 1
    diag = np.zeros(n)
    off = np.zeros(max(n - 1, 0))
    diag[first : last + 1] = 1.0
    diag[first] = 0.5
    diag[last] = 0.5
    off[first:last] = -0.5
    return TriDiagMatrix(n, diag, off)


def assemble_stiffness(mesh: Mesh, ell: FluxCoefficients) -> TriDiagMatrix:
    """Flux-divergence operator with negative diagonal.

    Row i carries -(ell[i] + ell[i+1]) on the diagonal and ell at the
    couplings, with the zero-ghost boundary convention folded into the first
    and last rows.
    """
    values = ell.ell
    n = mesh.n_max
    if values.shape != (n + 1,):
        raise ValueError("flux coefficient vector does not match the mesh")
    diag = -(values[:-1] + values[1:])
    off = values[1:n].copy()
    return TriDiagMatrix(n, diag, off)


def factor(m: TriDiagMatrix) -> TriDiagFactorization:
    """Tridiagonal LU factorization, computed once and reused across solves."""
    if m.dim == 0:
        raise ValueError("cannot factor an empty matrix")
    if m.dim == 1:
        if m.diag[0] == 0.0:
            raise SingularMatrixError("zero pivot in 1x1 system")
        return TriDiagFactorization(
            1, np.empty(0), m.diag.copy(), np.empty(0), np.empty(0), np.zeros(0, np.int32)
        )
    if m.dim == 2:
        # the LAPACK wrapper rejects n = 2; pad with a decoupled unit row
        off = np.array([m.off[0], 0.0])
        diag = np.array([m.diag[0], m.diag[1], 1.0])
    else:
        off = m.off.copy()
        diag = m.diag.copy()
    dl, d, du, du2, ipiv, info = _gttrf(off.copy(), diag, off.copy())
    if info > 0:
        raise SingularMatrixError(f"zero pivot at row {info}")
    if info < 0:
        raise ValueError(f"invalid argument {-info} to tridiagonal factorization")
    return TriDiagFactorization(m.dim, dl, d, du, du2, ipiv)


def solve(f: TriDiagFactorization, rhs: np.ndarray) -> np.ndarray:
    """Solve with previously computed factors."""
    if rhs.shape != (f.dim,):
        raise ValueError("right-hand side length does not match the factorization")
    if f.dim == 1:
        return rhs / f.d
    if len(f.d) != f.dim:  # padded 2x2 system
        rhs = np.append(rhs, 0.0)
    x, info = _gttrs(f.dl, f.d, f.du, f.du2, f.ipiv, rhs)
    if info != 0:
        raise SingularMatrixError("tridiagonal solve failed")
    return x[: f.dim]


def dense_solve_oracle(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting on a dense copy.

    Intentionally independent of the tridiagonal path; used as a test oracle.
    """
    a = np.array(matrix, dtype=float)
    b = np.array(rhs, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or b.shape != (n,):
        raise ValueError("need a square matrix and a matching right-hand side")
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if a[p, k] == 0.0:
            raise SingularMatrixError(f"singular matrix (column {k})")
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
        factors = a[k + 1 :, k] / a[k, k]
        a[k + 1 :, k:] -= np.outer(factors, a[k, k:])
        b[k + 1 :] -= factors * b[k]
    x = np.empty(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1 :] @ x[k + 1 :]) / a[k, k]
    return x
