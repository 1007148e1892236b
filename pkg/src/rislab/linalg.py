"""Dense complex linear algebra helpers for small matrices.

Conventions used throughout the package:

* operators are plain ``numpy`` arrays of complex dtype;
* superoperators act on operators through the *column-stacking*
  vectorization ``vec(X)[i + d*j] = X[i, j]``, under which the map
  ``X -> A X B`` has matrix ``B.T kron A`` and a Kraus map
  ``X -> sum_i K_i X K_i*`` has matrix ``sum_i conj(K_i) kron K_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

HERM_TOL = 1e-12
EIG_RESIDUAL_TOL = 1e-8
KRAUS_MATRIX_TOL = 1e-10
EIG_CLUSTER_TOL = 1e-8
EIGENVALUE_FLOOR = 1e-14


class LinalgError(ValueError):
    """Raised on contract violations (non-Hermitian input, domain errors...)."""


def as_complex(M) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if not np.all(np.isfinite(M.real)) or not np.all(np.isfinite(M.imag)):
        raise LinalgError("non-finite entries")
    return M


def assert_hermitian(M: np.ndarray, tol: float = HERM_TOL) -> np.ndarray:
    M = as_complex(M)
    scale = max(np.abs(M).max(), 1.0)
    if np.abs(M - M.conj().T).max() > tol * scale:
        raise LinalgError("matrix is not Hermitian within tolerance")
    return 0.5 * (M + M.conj().T)


def tensor_product(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Kronecker product with (A kron B)[(i*rB+k),(j*cB+l)] = A[i,j] B[k,l]."""
    return np.kron(as_complex(A), as_complex(B))


def partial_trace_env(M: np.ndarray, dS: int, dE: int) -> np.ndarray:
    """Trace out the second (environment) factor of an operator on H_S ⊗ H_E."""
    M = as_complex(M)
    if M.shape != (dS * dE, dS * dE):
        raise LinalgError(f"expected shape {(dS * dE,) * 2}, got {M.shape}")
    return np.einsum("ikjk->ij", M.reshape(dS, dE, dS, dE))


def partial_trace_sys(M: np.ndarray, dS: int, dE: int) -> np.ndarray:
    """Trace out the first (system) factor of an operator on H_S ⊗ H_E."""
    M = as_complex(M)
    if M.shape != (dS * dE, dS * dE):
        raise LinalgError(f"expected shape {(dS * dE,) * 2}, got {M.shape}")
    return np.einsum("kikj->ij", M.reshape(dS, dE, dS, dE))


def vec(X: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(X, dtype=complex).reshape(-1, order="F")


def unvec(x: np.ndarray, d: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if d is None:
        d = round(np.sqrt(x.size))
    return x.reshape(d, d, order="F")


def hermitian_eig(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues ascending, unitary eigenvector matrix V) with
    H V = V diag(w); the residual is verified.
    """
    H = assert_hermitian(H)
    w, V = np.linalg.eigh(H)
    scale = max(np.abs(H).max(), 1.0)
    if np.abs(H @ V - V @ np.diag(w)).max() > 1e-10 * scale:
        raise LinalgError("hermitian_eig residual exceeds tolerance")
    return w, V


def matrix_function_hermitian(H: np.ndarray, f) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its spectrum."""
    w, V = hermitian_eig(H)
    fw = np.asarray([f(x) for x in w], dtype=complex)
    if not np.all(np.isfinite(fw)):
        raise LinalgError("function not finite on the spectrum")
    return (V * fw) @ V.conj().T


def herm_exp(H: np.ndarray, scale: complex = 1.0) -> np.ndarray:
    """exp(scale * H) for Hermitian H (exact through the eigendecomposition)."""
    w, V = hermitian_eig(H)
    return (V * np.exp(scale * w)) @ V.conj().T


def herm_power(H: np.ndarray, p: float, floor: float = EIGENVALUE_FLOOR) -> np.ndarray:
    """H**p for positive-semidefinite Hermitian H.

    Negative or fractional powers require eigenvalues above ``floor``;
    smaller eigenvalues raise rather than being clipped.
    """
    w, V = hermitian_eig(H)
    needs_positive = (p < 0) or (p != int(p))
    if needs_positive and w.min() < floor:
        raise LinalgError(f"eigenvalue {w.min():.3e} below floor for power {p}")
    return (V * np.power(w.astype(complex), p)) @ V.conj().T


def herm_log(H: np.ndarray, floor: float = EIGENVALUE_FLOOR) -> np.ndarray:
    w, V = hermitian_eig(H)
    if w.min() < floor:
        raise LinalgError(f"eigenvalue {w.min():.3e} below floor for log")
    return (V * np.log(w)) @ V.conj().T


def project_to_faithful(rho: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Mix a state with eps*Id and renormalize (opt-in faithfulness repair)."""
    rho = assert_hermitian(rho)
    d = rho.shape[0]
    out = rho + eps * np.eye(d)
    return out / np.trace(out).real


def general_eig(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigenvalues with right and left eigenvectors of a general square matrix.

    Left eigenvectors are returned as columns ``l`` with ``l* M = w l*``,
    i.e. ``M* l = conj(w) l``.
    """
    M = as_complex(M)
    if M.shape[0] != M.shape[1]:
        raise LinalgError("general_eig requires a square matrix")
    w, Vl, Vr = scipy.linalg.eig(M, left=True, right=True)
    return w, Vr, Vl


def spectral_radius(M) -> float:
    """Largest eigenvalue modulus (accepts a matrix or a SuperOperator)."""
    if isinstance(M, SuperOperator):
        M = M.matrix
    M = as_complex(M)
    if M.shape[0] != M.shape[1]:
        raise LinalgError("spectral_radius requires a square matrix")
    return float(np.abs(np.linalg.eigvals(M)).max())


def trace_norm(M: np.ndarray) -> float:
    """Sum of singular values."""
    M = as_complex(M)
    if M.shape[0] != M.shape[1]:
        raise LinalgError("trace_norm requires a square matrix")
    return float(np.linalg.svd(M, compute_uv=False).sum())


def cluster_eigenvalues(w: np.ndarray, tol: float | None = None) -> list[list[int]]:
    """Group eigenvalues that coincide within the clustering tolerance.

    Two eigenvalues are considered equal when |w_i - w_j| <= tol with the
    default tol = EIG_CLUSTER_TOL * (1 + max|w|).
    """
    w = np.asarray(w)
    if tol is None:
        tol = EIG_CLUSTER_TOL * (1.0 + (np.abs(w).max() if w.size else 0.0))
    groups: list[list[int]] = []
    for i in np.argsort(-np.abs(w)):
        for g in groups:
            if abs(w[g[0]] - w[i]) <= tol:
                g.append(int(i))
                break
        else:
            groups.append([int(i)])
    return groups


@dataclass(frozen=True)
class SuperOperator:
    """A linear map on d x d matrices.

    Stored as a d^2 x d^2 matrix acting on column-stacked operators, with an
    optional Kraus family and completely-positive / trace-preserving flags.
    """

    dim: int
    matrix: np.ndarray
    kraus: tuple[np.ndarray, ...] | None = None
    completely_positive: bool = False
    trace_preserving: bool = False

    def __post_init__(self):
        d = self.dim
        object.__setattr__(self, "matrix", as_complex(self.matrix))
        if self.matrix.shape != (d * d, d * d):
            raise LinalgError("superoperator matrix has wrong shape")
        if self.kraus is not None:
            object.__setattr__(
                self, "kraus", tuple(as_complex(K) for K in self.kraus)
            )
            rebuilt = kraus_to_matrix(self.kraus)
            scale = max(np.abs(self.matrix).max(), 1.0)
            if np.abs(rebuilt - self.matrix).max() > KRAUS_MATRIX_TOL * scale:
                raise LinalgError("Kraus family does not match stored matrix")
        if self.trace_preserving:
            if self.kraus is not None:
                acc = sum(K.conj().T @ K for K in self.kraus)
            else:
                acc = self.adjoint_apply(np.eye(d))
            if np.abs(acc - np.eye(d)).max() > KRAUS_MATRIX_TOL:
                raise LinalgError("trace-preserving flag violated")

    @classmethod
    def from_kraus(
        cls, kraus, *, trace_preserving: bool | None = None
    ) -> "SuperOperator":
        kraus = tuple(as_complex(K) for K in kraus)
        d = kraus[0].shape[0]
        mat = kraus_to_matrix(kraus)
        if trace_preserving is None:
            acc = sum(K.conj().T @ K for K in kraus)
            trace_preserving = np.abs(acc - np.eye(d)).max() <= KRAUS_MATRIX_TOL
        return cls(
            dim=d,
            matrix=mat,
            kraus=kraus,
            completely_positive=True,
            trace_preserving=trace_preserving,
        )

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "SuperOperator":
        matrix = as_complex(matrix)
        d = round(np.sqrt(matrix.shape[0]))
        return cls(dim=d, matrix=matrix)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(X), self.dim)

    def adjoint_apply(self, X: np.ndarray) -> np.ndarray:
        """Apply the Hilbert-Schmidt adjoint."""
        return unvec(self.matrix.conj().T @ vec(X), self.dim)

    def adjoint(self) -> "SuperOperator":
        kraus = None
        if self.kraus is not None:
            kraus = tuple(K.conj().T for K in self.kraus)
        return SuperOperator(
            dim=self.dim,
            matrix=self.matrix.conj().T,
            kraus=kraus,
            completely_positive=self.completely_positive,
            trace_preserving=False,
        )

    def compose(self, other: "SuperOperator") -> "SuperOperator":
        """self after other."""
        return SuperOperator(dim=self.dim, matrix=self.matrix @ other.matrix)

    def __matmul__(self, other: "SuperOperator") -> "SuperOperator":
        return self.compose(other)


def kraus_to_matrix(kraus) -> np.ndarray:
    d = kraus[0].shape[0]
    mat = np.zeros((d * d, d * d), dtype=complex)
    for K in kraus:
        mat += np.kron(K.conj(), K)
    return mat
