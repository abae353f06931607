"""Weak, strong, and observable-dependent symmetry verification.

All defects are measured in the induced 2-norm (largest singular value);
superoperator norms are estimated by power iteration on the Gram matrix to a
relative accuracy of 1e-6, which is ample for thresholding against the much
smaller defect tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import DEFAULTS
from .generator import LindbladGenerator, OutputMap, adjoint, assemble
from .krylov import observable_space
from .opalg import Array, apply_super, dagger, spectral_norm, vectorize, unvectorize
from .starstruct import StarAlgebra, commutant


def conjugation_super(s_op: Array) -> Array:
    """Superoperator of X -> S X S^dag."""
    return np.kron(s_op.conj(), s_op)


def unitary_defect(s_op: Array) -> float:
    n = s_op.shape[0]
    return float(np.linalg.norm(s_op.conj().T @ s_op - np.eye(n), 2))


def _power_norm(m: Array, tol: float = 1e-6, seed: int = 0) -> float:
    """Largest singular value by power iteration on m^dag m."""
    if m.shape[1] == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(m.shape[1]) + 1j * rng.standard_normal(m.shape[1])
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(500):
        w = m.conj().T @ (m @ v)
        cur = float(np.linalg.norm(w))
        if cur == 0.0:
            return 0.0
        v = w / cur
        if abs(cur - prev) <= tol * cur:
            break
        prev = cur
    return float(np.sqrt(cur))


@dataclass(frozen=True)
class SymmetryReport:
    """Defect record for one symmetry candidate.

    ``classification`` is "strong" when every operator-level commutator
    vanishes, "weak-only" when only the superoperator commutes, "ods-only"
    when the candidate merely fixes the Heisenberg chain of the outputs, and
    "none" otherwise.
    """

    unitary_defect: float
    weak_defect: float
    strong_hamiltonian_defect: float
    strong_noise_defects: tuple[float, ...]
    ods_defect: float | None
    tol: float

    @property
    def is_weak(self) -> bool:
        return self.weak_defect <= self.tol

    @property
    def is_strong(self) -> bool:
        return (self.strong_hamiltonian_defect <= self.tol
                and all(d <= self.tol for d in self.strong_noise_defects))

    @property
    def is_ods(self) -> bool:
        return self.ods_defect is not None and self.ods_defect <= self.tol

    @property
    def classification(self) -> str:
        if self.is_strong:
            return "strong"
        if self.is_weak:
            return "weak-only"
        if self.is_ods:
            return "ods-only"
        return "none"


def check_weak(s_op: Array, gen: LindbladGenerator | Array, tol: float = 1e-10) -> float:
    """Norm of the commutator between the conjugation map and the generator."""
    if unitary_defect(s_op) > 1e-10:
        raise ValueError("weak-symmetry check requires a unitary candidate")
    lind = assemble(gen) if isinstance(gen, LindbladGenerator) else gen
    ssup = conjugation_super(s_op)
    return _power_norm(ssup @ lind - lind @ ssup)


def check_strong(s_op: Array, gen: LindbladGenerator) -> tuple[float, tuple[float, ...]]:
    """Spectral norms of [H, S] and of every [L_u, S]."""
    h = gen.hamiltonian
    hd = float(np.linalg.norm(h @ s_op - s_op @ h, 2))
    nd = tuple(float(np.linalg.norm(L @ s_op - s_op @ L, 2)) for L in gen.noise_ops)
    return hd, nd


def check_ods(s_op: Array, gen: LindbladGenerator | Array,
              outputs: OutputMap | Sequence[Array], tol: float = 1e-10,
              depth: int | None = None) -> float:
    """Largest deviation of S (L^dag)^k (O_i) S^dag from (L^dag)^k (O_i).

    The chain is scanned up to ``depth`` (default: the stall depth of the
    observable space), with each iterate rescaled to unit norm so deviations
    are relative.
    """
    lind = assemble(gen) if isinstance(gen, LindbladGenerator) else gen
    dual = adjoint(lind)
    ops = outputs.ops if isinstance(outputs, OutputMap) else list(outputs)
    if depth is None:
        depth = observable_space(lind, list(ops)).depth_reached
    worst = 0.0
    for o in ops:
        x = o.astype(complex)
        for _ in range(depth + 1):
            nrm = np.linalg.norm(x)
            if nrm == 0.0:
                break
            xn = x / nrm
            worst = max(worst, float(np.linalg.norm(
                s_op @ xn @ s_op.conj().T - xn, 2)))
            x = apply_super(dual, x)
    return worst


def classify(s_op: Array, gen: LindbladGenerator | Array,
             outputs: OutputMap | Sequence[Array] | None = None,
             tol: float = 1e-8, depth: int | None = None) -> SymmetryReport:
    """Full symmetry report for one candidate operator."""
    lind = assemble(gen) if isinstance(gen, LindbladGenerator) else gen
    ssup = conjugation_super(s_op)
    weak = _power_norm(ssup @ lind - lind @ ssup)
    if isinstance(gen, LindbladGenerator):
        hd, nd = check_strong(s_op, gen)
    else:
        hd, nd = float("inf"), ()
    ods = None
    if outputs is not None:
        ods = check_ods(s_op, gen, outputs, tol, depth)
    return SymmetryReport(unitary_defect=unitary_defect(s_op), weak_defect=weak,
                          strong_hamiltonian_defect=hd, strong_noise_defects=nd,
                          ods_defect=ods, tol=tol)


def group_commutant(group_gens: Sequence[Array], tol: float | None = None) -> StarAlgebra:
    """Commutant of the *-closed span of the given group generators.

    Continuous one-parameter groups should be passed as their Hermitian
    generator: the commutant of the generator equals the commutant of the
    group it exponentiates.
    """
    gens = list(group_gens)
    if not gens:
        raise ValueError("need at least one group generator")
    return commutant(gens + [dagger(g) for g in gens], tol)
