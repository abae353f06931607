"""Lindblad generators, quantum-semigroup-with-output models, and propagation.

A generator is assembled into a dense superoperator acting on column-stacked
vectorised operators.  Propagation uses dense matrix exponentials (Pade
scaling-and-squaring); at the dimensions this package targets exactness beats
ODE stepping, and full-versus-reduced comparisons are then limited only by
expm accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .config import DEFAULTS, Numerics, check_cap
from .opalg import (
    Array,
    adjoint_super,
    apply_super,
    dagger,
    expm_super,
    hs_inner,
    hs_norm,
    orthonormalize,
    require_hermitian,
    stack_vectorized,
    unvectorize,
    vectorize,
)


# ---------------------------------------------------------------------------
# Model types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LindbladGenerator:
    """Hamiltonian plus noise operators defining a Markovian generator."""

    hamiltonian: Array
    noise_ops: tuple[Array, ...] = ()

    def __post_init__(self):
        h = np.asarray(self.hamiltonian, dtype=complex)
        require_hermitian(h, what="hamiltonian")
        object.__setattr__(self, "hamiltonian", h)
        ops = tuple(np.asarray(L, dtype=complex) for L in self.noise_ops)
        for L in ops:
            if L.shape != h.shape:
                raise ValueError("noise operator dimension mismatch")
        object.__setattr__(self, "noise_ops", ops)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


@dataclass(frozen=True)
class OutputMap:
    """Linear output map: label i reads out tr(O_i^dag rho)."""

    ops: tuple[Array, ...]
    labels: tuple[str, ...]
    physical: bool = False

    def __post_init__(self):
        ops = tuple(np.asarray(o, dtype=complex) for o in self.ops)
        if not ops:
            raise ValueError("output map needs at least one operator")
        n = ops[0].shape[0]
        for o in ops:
            if o.shape != (n, n):
                raise ValueError("output operators of mixed dimension")
        if len(self.labels) != len(ops):
            raise ValueError("one label per output operator required")
        if self.physical:
            for o in ops:
                require_hermitian(o, what="physical output operator")
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]

    def apply(self, rho: Array) -> dict[str, complex]:
        return {lab: hs_inner(o, rho) for lab, o in zip(self.labels, self.ops)}


@dataclass(frozen=True)
class QSOModel:
    """Lindblad dynamics paired with an output map and a set of initial conditions.

    ``generator`` may be a :class:`LindbladGenerator` or a raw superoperator
    matrix (for already-reduced models whose GKS form has not been extracted).
    Initial elements tagged ``"state"`` must be valid density operators.
    """

    generator: LindbladGenerator | Array
    output: OutputMap
    initial_set: tuple[Array, ...] = ()
    initial_tags: tuple[str, ...] = ()
    algebra_note: object = None

    def __post_init__(self):
        init = tuple(np.asarray(x, dtype=complex) for x in self.initial_set)
        tags = tuple(self.initial_tags) if self.initial_tags else tuple("state" for _ in init)
        if len(tags) != len(init):
            raise ValueError("one tag per initial element required")
        for x, tag in zip(init, tags):
            if tag == "state":
                require_hermitian(x, what="initial state")
                vals = np.linalg.eigvalsh(0.5 * (x + x.conj().T))
                if vals.min() < -DEFAULTS.psd_tol:
                    raise ValueError(f"initial state not PSD (min eig {vals.min():.3e})")
                if abs(np.trace(x) - 1.0) > 1e-10:
                    raise ValueError("initial state trace deviates from 1")
        object.__setattr__(self, "initial_set", init)
        object.__setattr__(self, "initial_tags", tags)

    @property
    def dim(self) -> int:
        if isinstance(self.generator, LindbladGenerator):
            return self.generator.dim
        return int(round(np.sqrt(self.generator.shape[0])))

    def superoperator(self) -> Array:
        if isinstance(self.generator, LindbladGenerator):
            return assemble(self.generator)
        return self.generator

    def initial_span(self):
        return orthonormalize(list(self.initial_set)) if self.initial_set else None


# ---------------------------------------------------------------------------
# Assembly and duality
# ---------------------------------------------------------------------------

def dissipator_super(L: Array) -> Array:
    """Superoperator of rho -> L rho L^dag - (1/2){L^dag L, rho}."""
    n = L.shape[0]
    eye = np.eye(n)
    LdL = L.conj().T @ L
    return (np.kron(L.conj(), L)
            - 0.5 * (np.kron(eye, LdL) + np.kron(LdL.T, eye)))


def hamiltonian_super(h: Array) -> Array:
    """Superoperator of rho -> -i [h, rho]."""
    n = h.shape[0]
    eye = np.eye(n)
    return -1j * (np.kron(eye, h) - np.kron(h.T, eye))


def assemble(gen: LindbladGenerator, numerics: Numerics = DEFAULTS) -> Array:
    """Dense superoperator of the canonical Lindblad generator."""
    check_cap(gen.dim, numerics)
    s = hamiltonian_super(gen.hamiltonian)
    for L in gen.noise_ops:
        s = s + dissipator_super(L)
    return s


def apply_generator(gen: LindbladGenerator, rho: Array) -> Array:
    """Direct evaluation of the master-equation right-hand side."""
    h = gen.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for L in gen.noise_ops:
        LdL = L.conj().T @ L
        out = out + L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)
    return out


def adjoint(s: Array) -> Array:
    """Dual (Heisenberg-picture) generator: the HS adjoint superoperator."""
    return adjoint_super(s)


# ---------------------------------------------------------------------------
# Propagation
# ---------------------------------------------------------------------------

def evolve(s: Array, x0: Array, times: Sequence[float]) -> list[Array]:
    """Propagate x0 through e^{s t} at each grid time.

    Steps between consecutive grid points reuse a cached exponential per
    distinct step size, so uniform grids cost a single expm.
    """
    times = np.asarray(times, dtype=float)
    if times.size and (np.any(np.diff(times) < 0) or times[0] < 0):
        raise ValueError("times must be sorted and nonnegative")
    out: list[Array] = []
    cache: dict[float, Array] = {}
    v = vectorize(x0)
    prev = 0.0
    for t in times:
        dt = t - prev
        if dt > 0:
            key = round(dt, 15)
            if key not in cache:
                cache[key] = expm_super(s, dt)
            v = cache[key] @ v
        prev = t
        out.append(unvectorize(v))
    return out


def output_trajectory(model: QSOModel, rho0: Array, times: Sequence[float],
                      allow_outside_span: bool = False) -> list[dict[str, complex]]:
    """Output rows Y(t) = {label: tr(O_i^dag rho(t))} along the grid."""
    span = model.initial_span()
    if span is not None and not allow_outside_span:
        if span.residual(rho0) > 1e-9 * max(hs_norm(rho0), 1.0):
            raise ValueError(
                "rho0 lies outside the span of the declared initial set; "
                "pass allow_outside_span=True to override")
    traj = evolve(model.superoperator(), rho0, times)
    return [model.output.apply(rho) for rho in traj]


# ---------------------------------------------------------------------------
# Choi calculus and the semigroup-generator test
# ---------------------------------------------------------------------------

def choi_from_super(s: Array) -> Array:
    """Choi matrix of a superoperator on the same space (column-stacking pairing)."""
    m = s.shape[0]
    n = int(round(np.sqrt(m)))
    s4 = s.reshape(n, n, n, n)
    # S[(j,i),(b,a)] -> C[(a,i),(b,j)]
    return s4.transpose(3, 1, 2, 0).reshape(m, m)


def super_from_choi(c: Array) -> Array:
    m = c.shape[0]
    n = int(round(np.sqrt(m)))
    c4 = c.reshape(n, n, n, n)
    return c4.transpose(3, 1, 2, 0).reshape(m, m)


def choi_of_map(mat: Array, n_in: int, n_out: int) -> Array:
    """Choi matrix of a possibly rectangular map given as an (n_out^2, n_in^2) matrix."""
    c = np.zeros((n_in * n_out, n_in * n_out), dtype=complex)
    for a in range(n_in):
        for b in range(n_in):
            e = np.zeros((n_in, n_in), dtype=complex)
            e[a, b] = 1.0
            img = unvectorize(mat @ vectorize(e))
            c[a * n_out:(a + 1) * n_out, b * n_out:(b + 1) * n_out] = img
    return c


@dataclass(frozen=True)
class LindbladReport:
    """Defect record of the three semigroup-generator conditions."""

    herm_defect: float
    trace_defect: float
    ccp_min_eig: float
    tol: float

    @property
    def passed(self) -> bool:
        return (self.herm_defect <= self.tol and self.trace_defect <= self.tol
                and self.ccp_min_eig >= -self.tol)


def is_lindblad(s: Array, tol: float = 1e-8) -> LindbladReport:
    """Check Hermiticity preservation, trace annihilation and conditional CP.

    The conditional-CP criterion compresses the Choi matrix with the projector
    complementary to the maximally entangled vector and requires the result to
    be PSD.
    """
    m = s.shape[0]
    n = int(round(np.sqrt(m)))
    # (a) hermiticity preservation over the matrix-unit basis, batched:
    # columns of s are s(E_ab) vectorised; compare s(E_ab)^dag with s(E_ba).
    imgs = s.reshape(n, n, n, n)          # [j, i, b, a] = s(E_ab)[i, j] ... vec index (j,i)
    # s(E_ab) as matrix M_ab[i,j] = imgs[j,i,b,a]
    mats = imgs.transpose(3, 2, 1, 0)      # [a, b, i, j]
    herm = float(np.max(np.abs(np.conj(mats.transpose(1, 0, 3, 2)) - mats)))
    # (b) trace annihilation of the dual on the identity
    trace_defect = float(hs_norm(apply_super(adjoint_super(s), np.eye(n))))
    # (c) conditional complete positivity
    c = choi_from_super(s)
    omega = vectorize(np.eye(n)) / np.sqrt(n)
    q = np.eye(m) - np.outer(omega, omega.conj())
    cc = q @ c @ q
    cc = 0.5 * (cc + cc.conj().T)
    min_eig = float(np.linalg.eigvalsh(cc)[0])
    return LindbladReport(herm_defect=herm, trace_defect=trace_defect,
                          ccp_min_eig=min_eig, tol=tol)


def extract_gks(s: Array, tol: float = 1e-8) -> LindbladGenerator:
    """Recover a canonical (traceless, HS-orthogonal) GKS form from a superoperator.

    The compressed Choi matrix equals sum_u vec(L_u) vec(L_u)^dag exactly for
    traceless noise operators, so its eigendecomposition is the canonical
    diagonal GKS representation; the Hamiltonian is read off the remainder by
    a partial-trace identity and gauge-fixed traceless.
    """
    report = is_lindblad(s, tol)
    if not report.passed:
        raise ValueError(f"not a Lindblad generator within {tol:.1e}: {report}")
    m = s.shape[0]
    n = int(round(np.sqrt(m)))
    c = choi_from_super(s)
    omega = vectorize(np.eye(n)) / np.sqrt(n)
    q = np.eye(m) - np.outer(omega, omega.conj())
    cc = q @ c @ q
    cc = 0.5 * (cc + cc.conj().T)
    vals, vecs = np.linalg.eigh(cc)
    noise = []
    scale = max(float(vals[-1]), 0.0)
    for lam, v in zip(vals, vecs.T):
        if lam > max(1e-12 * scale, 1e-14):
            L = np.sqrt(lam) * unvectorize(v)
            L = L - (np.trace(L) / n) * np.eye(n)
            # deterministic phase: largest entry real positive
            idx = np.unravel_index(np.argmax(np.abs(L)), L.shape)
            phase = L[idx] / abs(L[idx])
            noise.append(L / phase)
    noise.sort(key=lambda L: -hs_norm(L))
    diss = np.zeros_like(s)
    for L in noise:
        diss = diss + dissipator_super(L)
    g = 1j * (s - diss)                     # should equal the superoperator of [H, .]
    g4 = g.reshape(n, n, n, n)              # [j, i, b, a]; g = kron(I,H) - kron(H.T, I)
    h = np.einsum("jija->ia", g4) / n       # partial trace over the column factor
    h = require_hermitian(h - (np.trace(h) / n) * np.eye(n), tol=1e-7, what="extracted hamiltonian")
    gen = LindbladGenerator(hamiltonian=h, noise_ops=tuple(noise))
    defect = float(np.max(np.abs(assemble(gen) - s)))
    if defect > 1e-9 * max(1.0, float(np.max(np.abs(s)))):
        raise ValueError(f"GKS extraction failed to reproduce the generator (defect {defect:.3e})")
    return gen


# ---------------------------------------------------------------------------
# State functionals
# ---------------------------------------------------------------------------

def _checked_state(rho: Array) -> Array:
    rho = require_hermitian(rho, what="state")
    if abs(np.trace(rho).real - 1.0) > 1e-8:
        raise ValueError(f"state trace {np.trace(rho).real} deviates from 1 beyond 1e-8")
    return rho


def entropy(rho: Array) -> float:
    """Von Neumann entropy -tr(rho ln rho), eigenvalues clipped to [0, 1]."""
    rho = _checked_state(rho)
    vals = np.clip(np.linalg.eigvalsh(rho), 0.0, 1.0)
    nz = vals[vals > 0]
    return float(-np.sum(nz * np.log(nz)))


def purity(rho: Array) -> float:
    rho = _checked_state(rho)
    vals = np.clip(np.linalg.eigvalsh(rho), 0.0, 1.0)
    return float(np.sum(vals ** 2))
