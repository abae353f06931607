"""Dense complex linear algebra over operator spaces.

Operators are plain complex numpy arrays of shape (n, n).  Superoperators are
(n**2, n**2) arrays acting on column-stacked vectorisations.  The column
stacking convention is fixed here, repo-wide: ``vec(X)[j*n + i] = X[i, j]``,
so ``vec(A X B) = kron(B.T, A) @ vec(X)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .config import DEFAULTS, Numerics

Array = np.ndarray


# ---------------------------------------------------------------------------
# Hilbert-Schmidt geometry and vectorisation
# ---------------------------------------------------------------------------

def hs_inner(a: Array, b: Array) -> complex:
    """Hilbert-Schmidt inner product tr(a^dag b)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def hs_norm(a: Array) -> float:
    return float(np.linalg.norm(a))


def vectorize(x: Array) -> Array:
    """Column-stack an n x n operator into a length n**2 vector."""
    x = np.asarray(x)
    return x.reshape(-1, order="F")


def unvectorize(v: Array) -> Array:
    """Inverse of :func:`vectorize`; the length must be a perfect square."""
    v = np.asarray(v).ravel()
    n = int(round(np.sqrt(v.size)))
    if n * n != v.size:
        raise ValueError(f"vector of length {v.size} is not a squared dimension")
    return v.reshape((n, n), order="F")


def stack_vectorized(ops: Sequence[Array]) -> Array:
    """Stack vectorised operators as the columns of an (n**2, k) matrix."""
    return np.column_stack([vectorize(op) for op in ops])


def require_hermitian(x: Array, tol: float | None = None, what: str = "operator") -> Array:
    tol = DEFAULTS.hermitian_tol if tol is None else tol
    defect = float(np.max(np.abs(x - x.conj().T))) if x.size else 0.0
    if defect > tol:
        raise ValueError(f"{what} is not Hermitian: max deviation {defect:.3e} > {tol:.3e}")
    return 0.5 * (x + x.conj().T)


def dagger(x: Array) -> Array:
    return x.conj().T


# ---------------------------------------------------------------------------
# Superoperator building blocks (column-stacking Kronecker calculus)
# ---------------------------------------------------------------------------

def left_super(a: Array) -> Array:
    """Superoperator of X -> a X."""
    n = a.shape[0]
    return np.kron(np.eye(n), a)


def right_super(b: Array) -> Array:
    """Superoperator of X -> X b."""
    n = b.shape[0]
    return np.kron(b.T, np.eye(n))


def sandwich_super(a: Array, b: Array) -> Array:
    """Superoperator of X -> a X b^dag."""
    return np.kron(b.conj(), a)


def apply_super(s: Array, x: Array) -> Array:
    return unvectorize(s @ vectorize(x))


def adjoint_super(s: Array) -> Array:
    """Hilbert-Schmidt adjoint of a superoperator (conjugate transpose in vec basis)."""
    return s.conj().T


def expm_super(s: Array, t: float = 1.0) -> Array:
    """Matrix exponential e^{s t} via scaling-and-squaring (scipy Pade)."""
    return scipy.linalg.expm(s * t)


def eig_h(x: Array, tol: float | None = None) -> tuple[Array, Array]:
    """Eigendecomposition of a Hermitian operator, eigenvalues ascending."""
    x = require_hermitian(x, tol)
    vals, vecs = np.linalg.eigh(x)
    return vals, vecs


def svd(matrix: Array) -> tuple[Array, Array, Array]:
    return np.linalg.svd(matrix, full_matrices=False)


def spectral_norm(m: Array) -> float:
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def random_hermitian(rng: np.random.Generator, n: int) -> Array:
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (g + g.conj().T) / 2.0


def random_state(rng: np.random.Generator, n: int) -> Array:
    """Random full-rank density operator (Wishart-normalised)."""
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = g @ g.conj().T + 1e-3 * np.eye(n)
    return rho / np.trace(rho).real


# ---------------------------------------------------------------------------
# Operator subspaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorSubspace:
    """A Hilbert-Schmidt orthonormal operator basis of a subspace of B(H).

    ``vecs`` holds the vectorised basis as columns of an (n**2, k) matrix with
    orthonormal columns; ``tol`` records the rank threshold used to build it.
    """

    n: int
    vecs: Array
    tol: float = DEFAULTS.rank_tol
    _ops: tuple = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.vecs.shape[1]

    def basis_ops(self) -> list[Array]:
        return [unvectorize(self.vecs[:, i]) for i in range(self.dim)]

    def project_vec(self, v: Array) -> Array:
        return self.vecs @ (self.vecs.conj().T @ v)

    def project(self, x: Array) -> Array:
        return unvectorize(self.project_vec(vectorize(x)))

    def residual(self, x: Array) -> float:
        """Norm of the component of x outside the subspace."""
        v = vectorize(x)
        return float(np.linalg.norm(v - self.project_vec(v)))

    def contains(self, x: Array, tol: float | None = None) -> bool:
        tol = (10 * self.tol) if tol is None else tol
        scale = max(hs_norm(x), 1.0)
        return self.residual(x) <= tol * scale

    def projector_matrix(self) -> Array:
        """Dense n**2 x n**2 orthogonal projector onto the subspace."""
        return self.vecs @ self.vecs.conj().T

    def adjoint_closed(self, tol: float | None = None) -> bool:
        return all(self.contains(dagger(b), tol) for b in self.basis_ops())

    def union(self, other: "OperatorSubspace") -> "OperatorSubspace":
        return orthonormalize(self.basis_ops() + other.basis_ops(), tol=min(self.tol, other.tol))


def orthonormalize(ops: Sequence[Array], tol: float | None = None) -> OperatorSubspace:
    """Rank-revealing orthonormalisation of a family of operators.

    SVD of the stacked vectorised matrix; directions with singular value at
    most ``tol`` times the largest are discarded.  An all-zero input yields an
    empty (dimension 0) subspace.
    """
    ops = list(ops)
    if not ops:
        raise ValueError("empty operator list")
    tol = DEFAULTS.rank_tol if tol is None else tol
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = ops[0].shape[0]
    for op in ops:
        if op.shape != (n, n):
            raise ValueError("operators of mixed dimension")
    m = stack_vectorized(ops)
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return OperatorSubspace(n=n, vecs=np.zeros((n * n, 0), dtype=complex), tol=tol)
    rank = int(np.sum(s > tol * s[0]))
    return OperatorSubspace(n=n, vecs=u[:, :rank].astype(complex), tol=tol)


def subspace_from_vecs(n: int, vecs: Array, tol: float | None = None) -> OperatorSubspace:
    """Wrap pre-computed vectorised columns, re-orthonormalising defensively."""
    tol = DEFAULTS.rank_tol if tol is None else tol
    if vecs.shape[1] == 0:
        return OperatorSubspace(n=n, vecs=vecs.astype(complex), tol=tol)
    u, s, _ = np.linalg.svd(vecs, full_matrices=False)
    rank = int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
    return OperatorSubspace(n=n, vecs=u[:, :rank].astype(complex), tol=tol)


def full_space(n: int, tol: float | None = None) -> OperatorSubspace:
    tol = DEFAULTS.rank_tol if tol is None else tol
    return OperatorSubspace(n=n, vecs=np.eye(n * n, dtype=complex), tol=tol)


def subspace_intersection(a: OperatorSubspace, b: OperatorSubspace,
                          tol: float | None = None) -> OperatorSubspace:
    """Intersection of two operator subspaces via the projector-product spectrum."""
    tol = DEFAULTS.rank_tol if tol is None else tol
    if a.dim == 0 or b.dim == 0:
        return OperatorSubspace(n=a.n, vecs=np.zeros((a.n * a.n, 0), dtype=complex), tol=tol)
    # Columns of a.vecs whose image under Pi_b has unit norm span the intersection.
    m = b.vecs.conj().T @ a.vecs                       # (kb, ka)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    keep = s > 1.0 - 1e-8
    vecs = a.vecs @ vh.conj().T[:, keep]
    return subspace_from_vecs(a.n, vecs, tol)


def subspace_complement_within(a: OperatorSubspace, sub: OperatorSubspace,
                               tol: float | None = None) -> OperatorSubspace:
    """Orthogonal complement of ``sub`` inside ``a`` (assumes sub within a)."""
    tol = DEFAULTS.rank_tol if tol is None else tol
    if sub.dim == 0:
        return a
    res = a.vecs - sub.vecs @ (sub.vecs.conj().T @ a.vecs)
    u, s, _ = np.linalg.svd(res, full_matrices=False)
    keep = s > 1e-8
    return subspace_from_vecs(a.n, u[:, keep], tol)


def projector_distance(a: OperatorSubspace, b: OperatorSubspace) -> float:
    """Frobenius distance between the orthogonal projectors of two subspaces."""
    res_a = a.vecs - b.vecs @ (b.vecs.conj().T @ a.vecs)
    res_b = b.vecs - a.vecs @ (a.vecs.conj().T @ b.vecs)
    return float(np.sqrt(np.linalg.norm(res_a) ** 2 + np.linalg.norm(res_b) ** 2))


def containment_defect(inner: OperatorSubspace, outer: OperatorSubspace) -> float:
    """How far ``inner`` sticks out of ``outer`` (0 when contained)."""
    if inner.dim == 0:
        return 0.0
    res = inner.vecs - outer.vecs @ (outer.vecs.conj().T @ inner.vecs)
    return float(np.linalg.norm(res, 2))
