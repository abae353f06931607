"""Numerical associative *-algebra machinery.

Generated algebras, commutants, centers, block (Wedderburn-type)
decompositions, distorted algebras and support restriction.  The block
decomposition is computed from the commutant: random Hermitian elements of
the center split the space into isotypic blocks, random commutant elements
split each block into factor times multiplicity virtual subsystems, and a
second random element supplies the intertwiners that align the multiplicity
copies.  All randomness is seeded; genericity failures trigger a retry with
fresh draws.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import DEFAULTS
from .opalg import (
    Array,
    OperatorSubspace,
    dagger,
    hs_norm,
    orthonormalize,
    require_hermitian,
    spectral_norm,
    stack_vectorized,
    subspace_from_vecs,
    vectorize,
    unvectorize,
)

MAX_RETRIES = 5


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StarAlgebra:
    """Operator subspace closed under the matrix product and adjoint."""

    subspace: OperatorSubspace
    unital: bool
    support_projector: Array

    @property
    def n(self) -> int:
        return self.subspace.n

    @property
    def dim(self) -> int:
        return self.subspace.dim

    def basis_ops(self) -> list[Array]:
        return self.subspace.basis_ops()


@dataclass(frozen=True)
class WedderburnData:
    """Adapted unitary and virtual-subsystem block data of a *-algebra.

    ``blocks[k] = (n_k, d_k)`` holds the factor dimension and multiplicity of
    block k; ``isometries[k]`` maps the full space onto the k-th block with
    factor-major index ordering, so algebra elements compress to
    ``kron(A_k, eye(d_k))`` and commutant elements to ``kron(eye(n_k), B_k)``.
    """

    unitary: Array
    blocks: tuple[tuple[int, int], ...]
    isometries: tuple[Array, ...]
    residual_dim: int = 0

    @property
    def n(self) -> int:
        return self.unitary.shape[0]

    @property
    def compressed_dim(self) -> int:
        return int(sum(nk for nk, _ in self.blocks))

    @property
    def algebra_dim(self) -> int:
        return int(sum(nk * nk for nk, _ in self.blocks))

    def block_of(self, x: Array, k: int) -> Array:
        w = self.isometries[k]
        return w @ x @ w.conj().T


@dataclass(frozen=True)
class DistortedAlgebra:
    """Wedderburn data plus one full-rank distortion state per block.

    With maximally mixed distortion states this is an ordinary *-algebra; a
    nontrivial distortion makes it the image of a state extension, closed
    under the modified product A tau^{-1} B.
    """

    wedderburn: WedderburnData
    taus: tuple[Array, ...]

    def __post_init__(self):
        if len(self.taus) != len(self.wedderburn.blocks):
            raise ValueError("one distortion state per block required")
        for (nk, dk), tau in zip(self.wedderburn.blocks, self.taus):
            if tau.shape != (dk, dk):
                raise ValueError("distortion state dimension mismatch")
            vals = np.linalg.eigvalsh(0.5 * (tau + tau.conj().T))
            if vals.min() <= DEFAULTS.psd_tol:
                raise ValueError(
                    f"distortion state must be positive definite (min eig {vals.min():.3e})")
            if abs(np.trace(tau) - 1.0) > 1e-8:
                raise ValueError("distortion state must have unit trace")

    @property
    def compressed_dim(self) -> int:
        return self.wedderburn.compressed_dim

    @property
    def algebra_dim(self) -> int:
        return self.wedderburn.algebra_dim

    def span(self) -> OperatorSubspace:
        """Orthonormal basis of the distorted algebra as an operator subspace."""
        w = self.wedderburn
        ops = []
        for k, (nk, dk) in enumerate(w.blocks):
            iso = w.isometries[k]
            for f in range(nk):
                for g in range(nk):
                    e = np.zeros((nk, nk), dtype=complex)
                    e[f, g] = 1.0
                    ops.append(iso.conj().T @ np.kron(e, self.taus[k]) @ iso)
        return orthonormalize(ops)


def orthogonal_distortion(w: WedderburnData) -> DistortedAlgebra:
    """Distorted algebra with maximally mixed states (the orthogonal choice)."""
    taus = tuple(np.eye(dk, dtype=complex) / dk for _, dk in w.blocks)
    return DistortedAlgebra(wedderburn=w, taus=taus)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _hermitian_generators(ops: Sequence[Array]) -> list[Array]:
    """Hermitian and anti-Hermitian parts of a family, nonzero ones only."""
    gens = []
    for b in ops:
        for h in ((b + dagger(b)) / 2.0, (b - dagger(b)) / 2.0j):
            if hs_norm(h) > 1e-14 * max(hs_norm(b), 1.0):
                gens.append(0.5 * (h + dagger(h)))
    return gens


def _commutator_batch(g: Array, cols: Array) -> Array:
    """Columns vec([g, unvec(c)]) for every column c of ``cols``."""
    n = g.shape[0]
    r = cols.shape[1]
    t = np.moveaxis(cols.reshape(n, n, r, order="F"), 2, 0)  # (r, n, n)
    imgs = g[None, :, :] @ t - t @ g[None, :, :]
    return np.moveaxis(imgs, 0, 2).reshape(n * n, r, order="F")


def _cluster(vals: Array, gap: float | None = None) -> list[np.ndarray]:
    """Split sorted eigenvalues into clusters at relative gaps."""
    gap = DEFAULTS.cluster_gap if gap is None else gap
    vals = np.asarray(vals, dtype=float)
    if vals.size == 0:
        return []
    scale = max(float(vals[-1] - vals[0]), float(np.max(np.abs(vals))), 1e-300)
    clusters = [[0]]
    for i in range(1, vals.size):
        if vals[i] - vals[i - 1] > gap * scale:
            clusters.append([i])
        else:
            clusters[-1].append(i)
    return [np.asarray(c, dtype=int) for c in clusters]


def _nullspace_refine(basis: Array, gens: Sequence[Array], tol: float) -> Array:
    """Intersect ``span(basis)`` with the commutation kernel of each generator."""
    cur = basis
    for g in gens:
        if cur.shape[1] == 0:
            break
        imgs = _commutator_batch(g, cur)
        gscale = max(spectral_norm(g), 1.0)
        if float(np.max(np.linalg.norm(imgs, axis=0))) <= 0.5 * tol * gscale:
            continue  # current space already commutes with this generator
        u, sig, vh = np.linalg.svd(imgs, full_matrices=False)
        scale = max(float(sig[0]) if sig.size else 0.0, gscale)
        rank = int(np.sum(sig > tol * scale))
        cur = cur @ vh.conj().T[:, rank:]
    return cur


# ---------------------------------------------------------------------------
# Commutant, generated algebra, center, support
# ---------------------------------------------------------------------------

def commutant(v: OperatorSubspace | Sequence[Array], tol: float | None = None) -> StarAlgebra:
    """All operators commuting with every element of the (symmetrised) set.

    The first Hermitian generator is handled by exact eigen-decomposition
    (its commutation kernel is spanned by same-cluster dyads), the remaining
    generators by SVD nullspace refinement on the shrinking candidate space.
    """
    tol = DEFAULTS.rank_tol if tol is None else tol
    ops = v.basis_ops() if isinstance(v, OperatorSubspace) else list(v)
    if not ops:
        raise ValueError("empty generating set")
    n = ops[0].shape[0]
    gens = _hermitian_generators(ops)
    if not gens:
        basis = np.eye(n * n, dtype=complex)
    else:
        # Seed the candidate space from the exact commutation kernel of a
        # generic Hermitian combination: its eigen-clusters give the kernel
        # directly (same-cluster dyads), and a generic combination splits the
        # spectrum as finely as the whole family allows.
        rng = np.random.default_rng(DEFAULTS.seed)
        g0 = _random_hermitian_element(rng, gens)
        vals, vecs = np.linalg.eigh(g0)
        cols = []
        for cl in _cluster(vals):
            u = vecs[:, cl]
            for i in range(u.shape[1]):
                for j in range(u.shape[1]):
                    cols.append(np.kron(u[:, j].conj(), u[:, i]))
        basis = np.column_stack(cols)
        basis = _nullspace_refine(basis, gens, tol)
    sub = subspace_from_vecs(n, basis, tol)
    defect = max(
        (np.linalg.norm(g @ b - b @ g) / max(spectral_norm(g), 1.0)
         for g in gens for b in sub.basis_ops()),
        default=0.0,
    )
    if defect > 100 * tol:
        raise RuntimeError(f"commutant verification failed (defect {defect:.3e})")
    return StarAlgebra(subspace=sub, unital=True, support_projector=np.eye(n, dtype=complex))


def generated_algebra(v: OperatorSubspace | Sequence[Array],
                      tol: float | None = None) -> StarAlgebra:
    """Smallest *-closed, product-closed span containing the given family."""
    tol = DEFAULTS.rank_tol if tol is None else tol
    ops = v.basis_ops() if isinstance(v, OperatorSubspace) else list(v)
    if not ops:
        raise ValueError("empty generating set")
    n = ops[0].shape[0]
    seed = orthonormalize(ops + [dagger(b) for b in ops], tol)
    basis = seed.vecs
    scale = 1.0
    new = basis
    while new.shape[1] and basis.shape[1] < n * n:
        all_ops = [unvectorize(basis[:, i]) for i in range(basis.shape[1])]
        new_ops = [unvectorize(new[:, i]) for i in range(new.shape[1])]
        added = []
        chunk: list[Array] = []

        def flush():
            nonlocal basis, scale
            if not chunk:
                return
            cand = stack_vectorized(chunk)
            chunk.clear()
            top = float(np.max(np.linalg.norm(cand, axis=0))) if cand.size else 0.0
            scale = max(scale, top)
            for _ in range(2):
                cand = cand - basis @ (basis.conj().T @ cand)
            u, sig, _ = np.linalg.svd(cand, full_matrices=False)
            fresh = u[:, sig > tol * scale]
            if fresh.shape[1]:
                basis = np.column_stack([basis, fresh])
                added.append(fresh)

        for a in new_ops:
            if basis.shape[1] >= n * n:
                break
            for b in all_ops:
                chunk.append(a @ b)
                chunk.append(b @ a)
                if len(chunk) >= 2048:
                    flush()
        flush()
        new = np.column_stack(added) if added else np.zeros((n * n, 0), dtype=complex)
    sub = subspace_from_vecs(n, basis, tol)
    eye = np.eye(n, dtype=complex)
    supp = support_restrict(sub, tol)
    return StarAlgebra(subspace=sub, unital=sub.contains(eye, 1e-8),
                       support_projector=supp.projector)


def center(a: StarAlgebra, tol: float | None = None) -> StarAlgebra:
    """Intersection of an algebra with its commutant, computed in the
    algebra's own coefficient space."""
    tol = DEFAULTS.rank_tol if tol is None else tol
    sub = _center_subspace(a.subspace, tol)
    return StarAlgebra(subspace=sub, unital=a.unital, support_projector=a.support_projector)


def _center_subspace(sub: OperatorSubspace, tol: float) -> OperatorSubspace:
    ops = sub.basis_ops()
    gens = _hermitian_generators(ops)
    k = sub.dim
    blocks = []
    for g in gens:
        blocks.append(_commutator_batch(g, sub.vecs))
    if not blocks:
        return sub
    m = np.vstack(blocks)
    u, sig, vh = np.linalg.svd(m, full_matrices=False)
    scale = max(float(sig[0]) if sig.size else 0.0,
                max(spectral_norm(g) for g in gens), 1.0)
    rank = int(np.sum(sig > tol * scale))
    coeffs = vh.conj().T[:, rank:]
    return subspace_from_vecs(sub.n, sub.vecs @ coeffs, tol)


@dataclass(frozen=True)
class SupportRestriction:
    projector: Array        # n x n orthogonal projector onto the support
    isometry: Array         # n x s, columns spanning the support
    compressed: OperatorSubspace

    @property
    def rank(self) -> int:
        return self.isometry.shape[1]

    def compress_op(self, x: Array) -> Array:
        return self.isometry.conj().T @ x @ self.isometry

    def embed_op(self, x: Array) -> Array:
        return self.isometry @ x @ self.isometry.conj().T


def support_restrict(v: OperatorSubspace | Sequence[Array],
                     tol: float | None = None) -> SupportRestriction:
    """Range projector of sum_i b_i b_i^dag and the compressed restriction.

    Accepts either an orthonormal subspace or a raw operator family (the
    latter weights each operator by its natural size).
    """
    tol = DEFAULTS.rank_tol if tol is None else tol
    ops = v.basis_ops() if isinstance(v, OperatorSubspace) else list(v)
    if not ops:
        raise ValueError("empty family")
    n = ops[0].shape[0]
    m = np.zeros((n, n), dtype=complex)
    for b in ops:
        m += b @ b.conj().T
    vals, vecs = np.linalg.eigh(m)
    top = float(vals[-1]) if vals.size else 0.0
    if top <= 0:
        iso = np.zeros((n, 0), dtype=complex)
    else:
        keep = vals > tol * top
        # identity isometry when the support is full, to keep coordinates fixed
        iso = np.eye(n, dtype=complex) if int(keep.sum()) == n else vecs[:, keep]
    comp_ops = [iso.conj().T @ b @ iso for b in ops] if iso.shape[1] else []
    compressed = (orthonormalize(comp_ops, tol) if comp_ops
                  else OperatorSubspace(n=0, vecs=np.zeros((0, 0), dtype=complex), tol=tol))
    return SupportRestriction(projector=iso @ iso.conj().T, isometry=iso, compressed=compressed)


def is_product_closed(v: OperatorSubspace, tol: float = 1e-8) -> bool:
    ops = v.basis_ops()
    for a in ops:
        if not v.contains(dagger(a), tol):
            return False
        for b in ops:
            if not v.contains(a @ b, tol):
                return False
    return True


# ---------------------------------------------------------------------------
# Block decomposition
# ---------------------------------------------------------------------------

def _random_hermitian_element(rng: np.random.Generator, herm_basis: Sequence[Array]) -> Array:
    if not herm_basis:
        raise _GenericityError("no Hermitian elements to sample from")
    coeffs = rng.standard_normal(len(herm_basis))
    out = sum(c * h for c, h in zip(coeffs, herm_basis))
    return 0.5 * (out + dagger(out))


def _polar_unitary(m: Array, floor: float) -> Array:
    u, sig, vh = np.linalg.svd(m)
    if sig.size == 0 or sig[-1] <= floor * sig[0] or sig[0] == 0.0:
        raise _GenericityError("intertwiner sample was singular")
    return u @ vh


class _GenericityError(RuntimeError):
    pass


def _decompose_block(comm_ops: list[Array], rng: np.random.Generator) -> tuple[int, int, Array]:
    """Adapted basis of one isotypic block from its compressed commutant.

    Returns (n_k, d_k, columns) where the columns are ordered factor-major so
    commutant elements become kron(eye(n_k), B).
    """
    dk_total = comm_ops[0].shape[0]
    herm = _hermitian_generators(comm_ops)
    c1 = _random_hermitian_element(rng, herm)
    vals, vecs = np.linalg.eigh(c1)
    clusters = _cluster(vals)
    sizes = {len(c) for c in clusters}
    if len(sizes) != 1:
        raise _GenericityError("unequal eigenspace sizes in block sample")
    n_k = sizes.pop()
    d_k = len(clusters)
    if n_k * d_k != dk_total:
        raise _GenericityError("block dimension bookkeeping failed")
    groups = [vecs[:, c] for c in clusters]
    if d_k == 1:
        return n_k, 1, groups[0]
    c2 = _random_hermitian_element(rng, herm)
    aligned = [groups[0]]
    for g in range(1, d_k):
        m = groups[g].conj().T @ c2 @ groups[0]
        q = _polar_unitary(m, floor=1e-8)
        aligned.append(groups[g] @ q)
    cols = np.zeros((dk_total, dk_total), dtype=complex)
    for f in range(n_k):
        for g in range(d_k):
            cols[:, f * d_k + g] = aligned[g][:, f]
    return n_k, d_k, cols


def _verify_block_form(w: WedderburnData, algebra_ops: Sequence[Array],
                       commutant_ops: Sequence[Array]) -> float:
    """Largest relative deviation from the A_k x 1 / 1 x B_k block forms."""
    worst = 0.0
    u = w.unitary
    m_tot = sum(nk * dk for nk, dk in w.blocks)
    for ops, factor_side in ((algebra_ops, "F"), (commutant_ops, "G")):
        for x in ops:
            scale = max(hs_norm(x), 1.0)
            t = u.conj().T @ x @ u
            if factor_side == "F":
                # algebra elements vanish on the residual summand
                off = np.linalg.norm(t[m_tot:, :]) + np.linalg.norm(t[:, m_tot:])
                worst = max(worst, float(off) / scale)
            else:
                off = np.linalg.norm(t[m_tot:, :m_tot]) + np.linalg.norm(t[:m_tot, m_tot:])
                worst = max(worst, float(off) / scale)
            pos = 0
            for (nk, dk) in w.blocks:
                dim = nk * dk
                row = t[pos:pos + dim, :m_tot].copy()
                row[:, pos:pos + dim] = 0.0
                worst = max(worst, float(np.linalg.norm(row)) / scale)
                blk = t[pos:pos + dim, pos:pos + dim].reshape(nk, dk, nk, dk)
                if factor_side == "F":
                    a = np.einsum("fghg->fh", blk) / dk
                    model = np.einsum("fh,ga->fgha", a, np.eye(dk))
                else:
                    b = np.einsum("fgfh->gh", blk) / nk
                    model = np.einsum("fh,ga->fgha", np.eye(nk), b)
                worst = max(worst, float(np.linalg.norm(blk - model)) / scale)
                pos += dim
    return worst


def wedderburn_from_commutant(comm: OperatorSubspace,
                              algebra_gens: Sequence[Array] = (),
                              seed: int | None = None,
                              tol: float | None = None) -> WedderburnData:
    """Block decomposition of the (unital, full-support) algebra whose
    commutant is spanned by ``comm``.

    The algebra itself is never closed explicitly: the center of the
    commutant yields the isotypic projectors and random commutant elements
    resolve each block into factor and multiplicity subsystems.  When
    generators of the algebra are supplied they are used in the
    post-verification.
    """
    tol = DEFAULTS.rank_tol if tol is None else tol
    seed = DEFAULTS.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    n = comm.n
    zsub = _center_subspace(comm, tol)
    zherm = _hermitian_generators(zsub.basis_ops())
    comm_ops = comm.basis_ops()
    last_err: Exception | None = None
    for _ in range(MAX_RETRIES):
        try:
            z = _random_hermitian_element(rng, zherm)
            vals, vecs = np.linalg.eigh(z)
            clusters = _cluster(vals)
            if len(clusters) != zsub.dim:
                raise _GenericityError(
                    f"central sample produced {len(clusters)} clusters, "
                    f"expected {zsub.dim}")
            blocks: list[tuple[int, int]] = []
            cols: list[Array] = []
            for cl in clusters:
                iso = vecs[:, cl]
                comp = [iso.conj().T @ c @ iso for c in comm_ops]
                nk, dk, bcols = _decompose_block(comp, rng)
                blocks.append((nk, dk))
                cols.append(iso @ bcols)
            u = np.column_stack(cols)
            w = WedderburnData(unitary=u, blocks=tuple(blocks),
                               isometries=tuple(_selectors(u, blocks)),
                               residual_dim=n - sum(nk * dk for nk, dk in blocks))
            defect = _verify_block_form(w, list(algebra_gens), comm_ops)
            if defect > 100 * tol:
                raise _GenericityError(f"block-form defect {defect:.3e}")
            return w
        except _GenericityError as err:  # resample and retry
            last_err = err
    raise RuntimeError(f"block decomposition failed after {MAX_RETRIES} retries: {last_err}")


def _selectors(u: Array, blocks: Sequence[tuple[int, int]]) -> list[Array]:
    out = []
    pos = 0
    for nk, dk in blocks:
        dim = nk * dk
        out.append(u[:, pos:pos + dim].conj().T)
        pos += dim
    return out


def wedderburn(a: StarAlgebra, seed: int | None = None,
               tol: float | None = None) -> WedderburnData:
    """Block decomposition of a *-algebra, support-restricting first when the
    algebra is not unital."""
    tol = DEFAULTS.rank_tol if tol is None else tol
    n = a.n
    sr = support_restrict(a.subspace, tol)
    if sr.rank == n:
        comm = commutant(a.subspace, tol)
        return wedderburn_from_commutant(comm.subspace, a.basis_ops(), seed, tol)
    comp_ops = sr.compressed.basis_ops()
    comm_c = commutant(sr.compressed, tol)
    w_c = wedderburn_from_commutant(comm_c.subspace, comp_ops, seed, tol)
    return _lift_wedderburn(w_c, sr, n)


def _lift_wedderburn(w_c: WedderburnData, sr: SupportRestriction, n: int) -> WedderburnData:
    """Embed compressed-space block data back into the original space."""
    iso = sr.isometry                      # n x s
    s = iso.shape[1]
    lifted_cols = iso @ w_c.unitary        # n x s
    # complete to a unitary with a basis of the kernel of the support projector
    kernel = _orthonormal_complement(iso, n)
    u = np.column_stack([lifted_cols, kernel]) if kernel.shape[1] else lifted_cols
    isos = [wk @ iso.conj().T for wk in w_c.isometries]
    return WedderburnData(unitary=u, blocks=w_c.blocks, isometries=tuple(isos),
                          residual_dim=n - sum(nk * dk for nk, dk in w_c.blocks))


def _orthonormal_complement(iso: Array, n: int) -> Array:
    if iso.shape[1] == n:
        return np.zeros((n, 0), dtype=complex)
    proj = np.eye(n) - iso @ iso.conj().T
    vals, vecs = np.linalg.eigh(proj)
    return vecs[:, vals > 0.5]


# ---------------------------------------------------------------------------
# Distorted closure
# ---------------------------------------------------------------------------

def distorted_closure(v: OperatorSubspace, positive_element: Array,
                      tol: float | None = None,
                      seed: int | None = None,
                      gen_ops: Sequence[Array] | None = None) -> DistortedAlgebra:
    """Minimal distorted algebra containing ``v`` that admits a state extension.

    The central projection of the positive element is obtained by orthogonal
    projection onto the commutant of ``v`` (the part of the algebra outside
    the center is orthogonal to the commutant, so this lands in the center).
    The distortion states are read off that projection in the adapted basis
    of the algebra generated by the rescaled family.  When ``v`` already
    contains the identity or is product-closed the plain algebra closure with
    maximally mixed distortions is returned.

    ``gen_ops`` optionally supplies a naturally-weighted generating family of
    ``v`` (e.g. raw Krylov iterates) used for commutants and closures in
    place of the orthonormal basis.
    """
    tol = DEFAULTS.rank_tol if tol is None else tol
    n = v.n
    sr = support_restrict(v, tol)
    vc = sr.compressed
    s_dim = sr.rank
    eye_c = np.eye(s_dim, dtype=complex)
    gens_c = ([sr.compress_op(g) for g in gen_ops] if gen_ops is not None
              else vc.basis_ops())

    if vc.contains(eye_c, 1e-8) or is_product_closed(vc):
        alg = generated_algebra(gens_c, tol)
        w_c = wedderburn(alg, seed, tol)
        dist_c = orthogonal_distortion(w_c)
        return _lift_distorted(dist_c, sr, n, v, tol)

    pe = sr.compress_op(positive_element)
    pe = require_hermitian(pe, 1e-8, what="positive element")
    comm_c = commutant(gens_c, tol)
    sigma = comm_c.subspace.project(pe)
    sigma = 0.5 * (sigma + dagger(sigma))
    svals = np.linalg.eigvalsh(sigma)
    if svals.min() < DEFAULTS.psd_tol:
        raise ValueError(
            f"central projection of the positive element is not positive "
            f"definite on the support (min eig {svals.min():.3e})")
    vals, vecs = np.linalg.eigh(sigma)
    inv_sqrt = (vecs * (np.maximum(vals, DEFAULTS.psd_tol) ** -0.5)) @ vecs.conj().T
    rescaled = [inv_sqrt @ b @ inv_sqrt for b in gens_c]
    alg = generated_algebra(rescaled, tol)
    w_c = wedderburn(alg, seed, tol)
    taus = []
    for k, (nk, dk) in enumerate(w_c.blocks):
        blk = w_c.block_of(sigma, k).reshape(nk, dk, nk, dk)
        b = np.einsum("fgfh->gh", blk) / nk
        model = np.einsum("fh,ga->fgha", np.eye(nk), b)
        if np.linalg.norm(blk - model) > 1e-6 * max(hs_norm(sigma), 1.0):
            raise RuntimeError("positive element failed to commute with the closure")
        b = 0.5 * (b + dagger(b))
        taus.append(b / np.trace(b).real)
    dist_c = DistortedAlgebra(wedderburn=w_c, taus=tuple(taus))
    return _lift_distorted(dist_c, sr, n, v, tol)


def _lift_distorted(dist_c: DistortedAlgebra, sr: SupportRestriction, n: int,
                    v: OperatorSubspace, tol: float) -> DistortedAlgebra:
    w = _lift_wedderburn(dist_c.wedderburn, sr, n)
    out = DistortedAlgebra(wedderburn=w, taus=dist_c.taus)
    span = out.span()
    worst = max((span.residual(b) / max(hs_norm(b), 1.0) for b in v.basis_ops()),
                default=0.0)
    if worst > 1e-8:
        raise RuntimeError(
            f"distorted closure does not contain its generating family "
            f"(residual {worst:.3e})")
    return out
