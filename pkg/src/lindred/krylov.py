"""Reachable and observable Krylov operator subspaces.

Both spaces are built incrementally: at each depth the generator is applied
to the current frontier only, new directions are orthogonalised against the
accumulated basis, and the iteration stops once the dimension stalls (with a
one-depth stall margin against borderline-rank false stops).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import DEFAULTS
from .generator import OutputMap, adjoint
from .opalg import (Array, OperatorSubspace, spectral_norm, stack_vectorized,
                    subspace_from_vecs, vectorize)

STALL_MARGIN = 1


@dataclass(frozen=True)
class KrylovResult:
    """Invariant subspace, the depth at which growth stopped, and whether the
    chain terminated before the Cayley-Hamilton bound n**2.

    ``leak`` is the weighted invariance defect: the norm of the component of
    the post-stall chain iterates outside the subspace, relative to the chain
    scale.  This is the quantity that bounds trajectory errors of reductions
    built on the subspace.  (The unweighted operator norm of (1-Pi) s Pi is
    not a usable criterion: Krylov weight spectra of generic many-body
    generators decay smoothly over many orders, so any finite-tolerance
    truncation has order-one unweighted leak while reproducing trajectories
    to the tolerance.)
    """

    subspace: OperatorSubspace
    depth_reached: int
    stopped_early: bool
    leak: float = 0.0
    chain: tuple = ()

    @property
    def dim(self) -> int:
        return self.subspace.dim

    def chain_ops(self) -> list[Array]:
        """Raw chain iterates as operators (batch-rescaled, machine-precision
        pure).  Downstream algebraic computations should consume these rather
        than the orthonormal basis: unit-normalising a direction whose weight
        sits near the rank threshold divides its noise content by that tiny
        weight, while the raw iterates carry sub-tolerance content at its
        natural (ignorable) size."""
        from .opalg import unvectorize
        out = []
        for batch in self.chain:
            for i in range(batch.shape[1]):
                out.append(unvectorize(batch[:, i]))
        return out


def _orthogonalize_against(basis: Array, cand: Array) -> Array:
    """Project candidate columns out of the basis span, twice for stability."""
    for _ in range(2):
        if basis.shape[1]:
            cand = cand - basis @ (basis.conj().T @ cand)
    return cand


def _expand(s: Array, seed_vecs: Array, tol: float) -> tuple[Array, int, bool]:
    """Incremental Krylov loop on vectorised operators.

    The frontier carries the raw iterates s^k(seeds) (rescaled per depth),
    never re-orthonormalised directions: promoting a borderline direction to
    unit norm and applying the generator again would amplify rank-decision
    noise exponentially, whereas the raw chain leaves invariant subspaces of
    the exact generator to machine precision.  New directions are detected by
    orthogonalising each raw batch against the accumulated basis, with the
    relative threshold anchored to the largest batch scale seen so far.

    Returns (orthonormal basis columns, stall depth, stopped_early).
    """
    max_depth = s.shape[0]
    u, sig, _ = np.linalg.svd(seed_vecs, full_matrices=False)
    if sig.size == 0 or sig[0] == 0.0:
        raise ValueError("seed operators are all zero")
    scale = float(sig[0])  # anchors the relative rank threshold across batches
    basis = u[:, sig > tol * scale]
    top = float(np.max(np.linalg.norm(seed_vecs, axis=0)))
    frontier = seed_vecs / top
    chain = [frontier]
    if basis.shape[1] >= max_depth:
        return basis, 0, True, chain
    depth = 0
    stall_depth = None
    while depth < max_depth:
        cand = s @ frontier
        depth += 1
        top = float(np.max(np.linalg.norm(cand, axis=0)))
        if top == 0.0:
            return basis, (stall_depth if stall_depth is not None else depth), True, chain
        frontier = cand / top
        chain.append(frontier)
        sig = np.linalg.svd(frontier, compute_uv=False)
        scale = max(scale, float(sig[0]))
        resid = _orthogonalize_against(basis, frontier)
        u, sig, _ = np.linalg.svd(resid, full_matrices=False)
        new = u[:, sig > tol * scale]
        if new.shape[1] == 0:
            if stall_depth is None:
                stall_depth = depth
            if depth - stall_depth >= STALL_MARGIN:
                return basis, stall_depth, True, chain
            continue  # probe the stall margin before declaring convergence
        stall_depth = None
        basis = np.column_stack([basis, new])
        if basis.shape[1] >= max_depth:
            return basis, depth, depth < max_depth, chain
    return basis, depth, False, chain


def invariance_defect(s: Array, sub: OperatorSubspace) -> float:
    """Relative operator norm of (1 - Pi) s Pi, zero when the subspace is
    exactly s-invariant.  Diagnostic only; see :class:`KrylovResult.leak`."""
    if sub.dim == 0:
        return 0.0
    img = s @ sub.vecs
    resid = img - sub.vecs @ (sub.vecs.conj().T @ img)
    denom = max(spectral_norm(s), 1.0)
    return float(np.linalg.norm(resid, 2)) / denom


def _weighted_leak(s: Array, sub: OperatorSubspace, seed_vecs: Array,
                   depth: int) -> float:
    """Chain-weighted invariance defect of the computed subspace."""
    top = float(np.max(np.linalg.norm(seed_vecs, axis=0)))
    cur = seed_vecs / top if top else seed_vecs
    worst = 0.0
    for _ in range(depth + STALL_MARGIN + 1):
        cur = s @ cur
        top = float(np.max(np.linalg.norm(cur, axis=0)))
        if top == 0.0:
            break
        cur = cur / top
        resid = cur - sub.vecs @ (sub.vecs.conj().T @ cur)
        worst = max(worst, float(np.linalg.norm(resid, 2)))
    return worst


def _finish(s: Array, basis: Array, depth: int, early: bool, tol: float,
            seed_vecs: Array, chain: list) -> KrylovResult:
    n = int(round(np.sqrt(s.shape[0])))
    sub = subspace_from_vecs(n, basis, tol)
    leak = 0.0 if sub.dim >= s.shape[0] else _weighted_leak(s, sub, seed_vecs, depth)
    if leak > 100 * tol:
        raise RuntimeError(f"Krylov chain failed the invariance check (leak {leak:.3e})")
    return KrylovResult(subspace=sub, depth_reached=depth, stopped_early=early, leak=leak,
                        chain=tuple(chain))


def reachable_space(s: Array, seeds: Sequence[Array], tol: float | None = None) -> KrylovResult:
    """Smallest s-invariant operator subspace containing the seed span."""
    if not len(seeds):
        raise ValueError("seeds must be nonempty")
    tol = DEFAULTS.rank_tol if tol is None else tol
    vecs = stack_vectorized(seeds)
    basis, depth, early, chain = _expand(s, vecs, tol)
    return _finish(s, basis, depth, early, tol, vecs, chain)


def observable_space(s: Array, outputs: OutputMap | Sequence[Array],
                     tol: float | None = None) -> KrylovResult:
    """Krylov span of the Heisenberg-evolved outputs (orthocomplement of the
    non-observable subspace)."""
    ops = outputs.ops if isinstance(outputs, OutputMap) else list(outputs)
    if not len(ops):
        raise ValueError("outputs must be nonempty")
    return reachable_space(adjoint(s), ops, tol)


def brute_force_rank(s: Array, seeds: Sequence[Array], dps: int = 50,
                     cutoff: float = 1e-30) -> int:
    """Non-incremental oracle: rank of the fully stacked Krylov chain.

    Computed by pivoted Gaussian elimination in ``dps``-digit arithmetic on
    the per-batch-rescaled chain, so the notorious conditioning of stacked
    Krylov matrices cannot mask genuine directions.  Intended for small test
    instances; cost grows steeply with dimension.
    """
    import mpmath as mp

    with mp.workdps(dps):
        n2 = s.shape[0]
        smp = [[mp.mpc(s[i, j]) for j in range(n2)] for i in range(n2)]
        rows = []
        cur = [[mp.mpc(z) for z in vectorize(seed)] for seed in seeds]
        for _ in range(n2):
            top = max(max(abs(z) for z in v) for v in cur)
            if top == 0:
                break
            rows.extend([z / top for z in v] for v in cur)
            cur = [[sum(smp[i][j] * v[j] for j in range(n2)) for i in range(n2)]
                   for v in cur]
        eps = mp.mpf(cutoff)
        rank = 0
        lead = 0
        for col in range(n2):
            piv, pval = None, eps
            for r in range(lead, len(rows)):
                a = abs(rows[r][col])
                if a > pval:
                    piv, pval = r, a
            if piv is None:
                continue
            rows[lead], rows[piv] = rows[piv], rows[lead]
            prow = rows[lead]
            inv = 1 / prow[col]
            for r in range(lead + 1, len(rows)):
                f = rows[r][col] * inv
                if f != 0:
                    arr = rows[r]
                    for c in range(col, n2):
                        arr[c] -= f * prow[c]
            lead += 1
            rank += 1
        return rank
