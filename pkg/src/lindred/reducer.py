"""Conditional expectations, CPTP factorizations and the model-reduction
procedures.

``factorize`` turns block data plus distortion states into an explicit
reduction/injection pair of rectangular superoperator matrices; the three
procedures (reachable, observable, iterative) wire those pairs together with
Krylov spaces and support restrictions, composing all intermediate maps
eagerly so the final pair always connects the original space to the final
compressed space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import DEFAULTS
from .generator import (
    LindbladGenerator,
    OutputMap,
    QSOModel,
    adjoint,
    assemble,
    choi_of_map,
    evolve,
    hamiltonian_super,
)
from .krylov import _expand, observable_space, reachable_space
from .opalg import (
    Array,
    OperatorSubspace,
    dagger,
    expm_super,
    hs_norm,
    require_hermitian,
    stack_vectorized,
    unvectorize,
    vectorize,
)
from .starstruct import (
    DistortedAlgebra,
    SupportRestriction,
    distorted_closure,
    orthogonal_distortion,
    support_restrict,
    wedderburn_from_commutant,
    commutant,
)

VERIFY_TIMES = tuple(np.linspace(0.0, 10.0, 21))
EXACTNESS_TOL = 1e-8


# ---------------------------------------------------------------------------
# Reduction pairs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReductionPair:
    """Reduction map R and injection map J as rectangular vec-basis matrices.

    ``r_mat`` maps the n-dim operator space to the m-dim compressed space and
    ``j_mat`` maps back; ``R J = I`` on the compressed space and ``J R``
    equals the state extension onto the algebra the pair factors through.
    """

    r_mat: Array
    j_mat: Array
    n: int
    m: int
    algebra: DistortedAlgebra | None = None

    def reduce(self, x: Array) -> Array:
        return unvectorize(self.r_mat @ vectorize(x))

    def inject(self, x: Array) -> Array:
        return unvectorize(self.j_mat @ vectorize(x))

    def reduce_dual(self, x: Array) -> Array:
        """Adjoint of the injection: carries observables to the compressed space."""
        return unvectorize(self.j_mat.conj().T @ vectorize(x))

    def reduce_super(self, s: Array) -> Array:
        return self.r_mat @ s @ self.j_mat

    def state_extension(self) -> Array:
        return self.j_mat @ self.r_mat

    def conditional_expectation(self) -> Array:
        return self.state_extension().conj().T

    def block_projector(self) -> Array:
        """Projector onto the compressed algebra (block-diagonal sector of B(C^m))."""
        m = self.m
        if self.algebra is None:
            return np.eye(m * m, dtype=complex)
        mask = np.zeros((m, m))
        off = 0
        for nk, _ in self.algebra.wedderburn.blocks:
            mask[off:off + nk, off:off + nk] = 1.0
            off += nk
        return np.diag(vectorize(mask)).astype(complex)

    def verify(self) -> dict[str, float]:
        """Factor identities, complete positivity and trace preservation defects.

        ``R J`` equals the identity on the compressed algebra and annihilates
        the cross-block sector, i.e. it is the block-diagonal projector.
        """
        rj = self.r_mat @ self.j_mat
        out = {"rj_identity": float(np.max(np.abs(rj - self.block_projector())))}
        if self.algebra is not None:
            out["jr_state_extension"] = float(
                np.max(np.abs(self.state_extension() - state_extension_map(self.algebra))))
        out["r_choi_min_eig"] = _choi_min_eig(self.r_mat, self.n, self.m)
        out["j_choi_min_eig"] = _choi_min_eig(self.j_mat, self.m, self.n)
        # R is trace preserving on the support, J everywhere
        eye_m = np.eye(self.m, dtype=complex)
        rd = self.r_mat.conj().T @ vectorize(eye_m)   # R^dag(1) = support projector
        rd_op = unvectorize(rd)
        out["r_trace_defect"] = float(np.max(np.abs(rd_op @ rd_op - rd_op)))
        js = self.j_mat.conj().T                       # J^dag(1) = 1
        out["j_unital_defect"] = float(
            np.max(np.abs(unvectorize(js @ vectorize(np.eye(self.n, dtype=complex))) - eye_m)))
        return out


def _choi_min_eig(mat: Array, n_in: int, n_out: int) -> float:
    c = choi_of_map(mat, n_in, n_out)
    c = 0.5 * (c + c.conj().T)
    return float(np.linalg.eigvalsh(c)[0])


def conditional_expectation(d: DistortedAlgebra) -> Array:
    """Positive unital projector onto the (distorted) algebra, as a superoperator."""
    return state_extension_map(d).conj().T


def state_extension_map(d: DistortedAlgebra) -> Array:
    """Trace-dual projector whose image is the distorted algebra."""
    w = d.wedderburn
    n = w.n
    out = np.zeros((n * n, n * n), dtype=complex)
    for k, (nk, dk) in enumerate(w.blocks):
        iso = w.isometries[k]                           # (nk dk) x n
        for a in range(n):
            for b in range(n):
                blk = np.outer(iso[:, a], iso[:, b].conj()).reshape(nk, dk, nk, dk)
                xf = np.einsum("fgug->fu", blk)
                img = iso.conj().T @ np.kron(xf, d.taus[k]) @ iso
                out[:, b * n + a] += vectorize(img)
    return out


def factorize(d: DistortedAlgebra, tol: float = 1e-9) -> ReductionPair:
    """CPTP factorization of the state extension through the compressed space.

    The compressed space carries the direct sum of the factor subsystems; the
    reduction partial-traces each block over its multiplicity factor and the
    injection re-inflates with the block's distortion state.
    """
    w = d.wedderburn
    n, m = w.n, w.compressed_dim
    offs = np.cumsum([0] + [nk for nk, _ in w.blocks])
    r_mat = np.zeros((m * m, n * n), dtype=complex)
    j_mat = np.zeros((n * n, m * m), dtype=complex)
    for k, (nk, dk) in enumerate(w.blocks):
        iso = w.isometries[k]
        o = offs[k]
        for a in range(n):
            for b in range(n):
                blk = np.outer(iso[:, a], iso[:, b].conj()).reshape(nk, dk, nk, dk)
                xf = np.einsum("fgug->fu", blk)
                img = np.zeros((m, m), dtype=complex)
                img[o:o + nk, o:o + nk] = xf
                r_mat[:, b * n + a] += vectorize(img)
        cols = iso.conj().T.reshape(n, nk, dk)          # A_f = cols[:, f, :]
        for f in range(nk):
            for fp in range(nk):
                img = cols[:, f, :] @ d.taus[k] @ cols[:, fp, :].conj().T
                j_mat[:, (o + fp) * m + (o + f)] += vectorize(img)
    pair = ReductionPair(r_mat=r_mat, j_mat=j_mat, n=n, m=m, algebra=d)
    defects = pair.verify()
    if defects["rj_identity"] > tol or defects["jr_state_extension"] > tol:
        raise RuntimeError(f"factorization failed the factor identities: {defects}")
    return pair


def support_pair(sr: SupportRestriction) -> ReductionPair:
    """Isometry conjugation onto the support as a reduction pair."""
    iso = sr.isometry
    n, s = iso.shape
    r_mat = np.kron(iso.T, iso.conj().T)
    j_mat = np.kron(iso.conj(), iso)
    return ReductionPair(r_mat=r_mat, j_mat=j_mat, n=n, m=s, algebra=None)


def compose(first: ReductionPair, second: ReductionPair) -> ReductionPair:
    """Pair applying ``first`` then ``second`` (second acts on first's image)."""
    if second.n != first.m:
        raise ValueError("pair dimensions do not chain")
    return ReductionPair(r_mat=second.r_mat @ first.r_mat,
                         j_mat=first.j_mat @ second.j_mat,
                         n=first.n, m=second.m, algebra=second.algebra)


def identity_pair(n: int) -> ReductionPair:
    eye = np.eye(n * n, dtype=complex)
    return ReductionPair(r_mat=eye, j_mat=eye.copy(), n=n, m=n, algebra=None)


# ---------------------------------------------------------------------------
# Generator reduction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorSplit:
    """Lindblad generator split as a CP part plus a no-jump part.

    ``s = phi - K(.) - (.)K^dag`` with ``phi`` completely positive and
    ``phi^dag(1) = K + K^dag``.  The split is closed under reduction pairs:
    the CP part conjugates to R phi J and the no-jump operator to J^dag(K),
    which keeps the reduced generator in manifestly Lindblad-compatible form
    (the reduction-of-products identity makes the two agree on the algebra).
    """

    phi: Array
    k_op: Array

    @property
    def dim(self) -> int:
        return self.k_op.shape[0]

    def superoperator(self) -> Array:
        from .opalg import left_super, right_super
        return self.phi - left_super(self.k_op) - right_super(self.k_op.conj().T)

    def reduce(self, pair: ReductionPair) -> "GeneratorSplit":
        return GeneratorSplit(phi=pair.r_mat @ self.phi @ pair.j_mat,
                              k_op=pair.reduce_dual(self.k_op))


def split_from_gks(gen: LindbladGenerator) -> GeneratorSplit:
    from .opalg import sandwich_super
    n = gen.dim
    phi = np.zeros((n * n, n * n), dtype=complex)
    k = 1j * gen.hamiltonian.astype(complex)
    for L in gen.noise_ops:
        phi += sandwich_super(L, L)
        k = k + 0.5 * (L.conj().T @ L)
    return GeneratorSplit(phi=phi, k_op=k)


def split_of(model: QSOModel) -> GeneratorSplit:
    """Split form of a model's generator, extracting a GKS form if needed."""
    from .generator import extract_gks
    if isinstance(model.generator, LindbladGenerator):
        return split_from_gks(model.generator)
    return split_from_gks(extract_gks(model.generator))


def reduce_generator(s: Array, pair: ReductionPair,
                     gks: LindbladGenerator | None = None,
                     mode: str = "lindblad") -> Array:
    """Compressed generator.

    Mode ``lindblad`` (default) reduces the CP/no-jump split, producing a
    matrix that agrees with R s J on the compressed algebra and extends it in
    Lindblad form on the rest of the compressed operator space.  Mode
    ``literal`` returns the plain composition R s J, which annihilates the
    cross-block sector and is generally not a semigroup generator there.
    """
    if mode == "literal":
        return pair.reduce_super(s)
    if mode != "lindblad":
        raise ValueError("mode must be 'lindblad' or 'literal'")
    from .generator import extract_gks
    split = split_from_gks(gks if gks is not None else extract_gks(s))
    return split.reduce(pair).superoperator()


# ---------------------------------------------------------------------------
# Positive element of the reachable space
# ---------------------------------------------------------------------------

def build_positive_element(s: Array, seeds: Sequence[Array], epsilon: float | None = None,
                           quad_order: int | None = None,
                           expected_rank: int | None = None,
                           tol: float | None = None) -> Array:
    """Short-time trajectory integral summed over seed states.

    Gauss-Legendre quadrature of the integral of e^{s t}(rho_0) over [0,
    epsilon]; the result is Hermitian PSD with support saturating the
    reachable space.  On a support-deficient result the quadrature order is
    doubled once before giving up.
    """
    if not len(seeds):
        raise ValueError("seeds must be nonempty")
    epsilon = DEFAULTS.epsilon if epsilon is None else epsilon
    quad_order = DEFAULTS.quad_order if quad_order is None else quad_order
    tol = DEFAULTS.rank_tol if tol is None else tol
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    seed_vecs = stack_vectorized(seeds)
    for order in (quad_order, 2 * quad_order):
        nodes, weights = np.polynomial.legendre.leggauss(order)
        ts = 0.5 * epsilon * (nodes + 1.0)
        ws = 0.5 * epsilon * weights
        acc = np.zeros(seed_vecs.shape[0], dtype=complex)
        prev_t = None
        cur = None
        for t, wgt in sorted(zip(ts, ws)):
            if cur is None:
                cur = expm_super(s, t) @ seed_vecs
            else:
                cur = expm_super(s, t - prev_t) @ cur
            prev_t = t
            acc += wgt * cur.sum(axis=1)
        v = unvectorize(acc)
        v = 0.5 * (v + dagger(v))
        if expected_rank is None:
            return v
        vals = np.linalg.eigvalsh(v)
        rank = int(np.sum(vals > tol * max(float(vals[-1]), 1e-300)))
        if rank >= expected_rank:
            return v
    raise RuntimeError(
        f"positive element is support deficient (rank {rank} < {expected_rank}) "
        f"even after doubling the quadrature order")


# ---------------------------------------------------------------------------
# Reduced models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedQSO:
    model: QSOModel
    pair: ReductionPair
    split: GeneratorSplit | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.model.dim


def _reduced_qso(s_red: Array, outputs: OutputMap, pair: ReductionPair,
                 initial: Sequence[Array]) -> QSOModel:
    red_out = OutputMap(
        ops=tuple(pair.reduce_dual(o) for o in outputs.ops),
        labels=outputs.labels,
    )
    red_init = [pair.reduce(x) for x in initial]
    tags = tuple("state" if abs(np.trace(x) - 1.0) < 1e-8 and
                 _is_psd(x) else "generic" for x in red_init)
    return QSOModel(generator=s_red, output=red_out,
                    initial_set=tuple(red_init), initial_tags=tags)


def _is_psd(x: Array) -> bool:
    h = 0.5 * (x + dagger(x))
    if np.max(np.abs(x - h)) > 1e-8:
        return False
    return float(np.linalg.eigvalsh(h)[0]) >= -DEFAULTS.psd_tol


def output_deviation(model: QSOModel, reduced: QSOModel, pair: ReductionPair,
                     states: Sequence[Array], times: Sequence[float] = VERIFY_TIMES) -> float:
    """Max over outputs, states and grid times of |full output - reduced output|."""
    s_full = model.superoperator()
    s_red = reduced.superoperator()
    worst = 0.0
    for rho0 in states:
        full_traj = evolve(s_full, rho0, times)
        red_traj = evolve(s_red, pair.reduce(rho0), times)
        for rho_f, rho_r in zip(full_traj, red_traj):
            yf = model.output.apply(rho_f)
            yr = reduced.output.apply(rho_r)
            worst = max(worst, max(abs(yf[k] - yr[k]) for k in yf))
    return worst


def state_deviation(s_full: Array, s_red: Array, pair: ReductionPair,
                    states: Sequence[Array], times: Sequence[float] = VERIFY_TIMES) -> float:
    """Max entrywise deviation of J e^{Lred t} R rho0 from e^{L t} rho0."""
    worst = 0.0
    for rho0 in states:
        full_traj = evolve(s_full, rho0, times)
        red_traj = evolve(s_red, pair.reduce(rho0), times)
        for rho_f, rho_r in zip(full_traj, red_traj):
            worst = max(worst, float(np.max(np.abs(rho_f - pair.inject(rho_r)))))
    return worst


def reachable_reduction(model: QSOModel, tol: float | None = None,
                        seed: int | None = None, epsilon: float | None = None,
                        quad_order: int | None = None,
                        verify_times: Sequence[float] = VERIFY_TIMES,
                        split: GeneratorSplit | None = None) -> ReducedQSO:
    """Exact CPTP reduction onto the minimal distorted algebra holding every
    trajectory from the declared initial set."""
    tol = DEFAULTS.rank_tol if tol is None else tol
    if not model.initial_set:
        raise ValueError("reachable reduction needs a nonempty initial set")
    split = split_of(model) if split is None else split
    s = model.superoperator()
    n = model.dim
    kr = reachable_space(s, list(model.initial_set), tol)
    chain_ops = kr.chain_ops()
    sr = support_restrict(chain_ops, tol)
    sup = support_pair(sr)
    s_c = sup.reduce_super(s)
    seeds_c = [sup.reduce(x) for x in model.initial_set]
    states_c = [x for x, tag in zip(seeds_c, model.initial_tags) if tag == "state"]
    if not states_c:
        states_c = [x / np.trace(x) for x in seeds_c if abs(np.trace(x)) > 1e-12]
    pe = build_positive_element(s_c, states_c, epsilon, quad_order,
                                expected_rank=sr.rank, tol=tol)
    reach_c = sr.compressed
    proj_defect = reach_c.residual(pe)
    pe = reach_c.project(pe)
    pe = 0.5 * (pe + dagger(pe))
    chain_c = [sr.compress_op(x) for x in chain_ops]
    dist = distorted_closure(reach_c, pe, tol, seed, gen_ops=chain_c)
    pair_c = factorize(dist)
    pair = compose(sup, pair_c)
    red_split = split.reduce(pair)
    s_red = red_split.superoperator()
    reduced = _reduced_qso(s_red, model.output, pair, model.initial_set)
    check_states = [x for x, t in zip(model.initial_set, model.initial_tags) if t == "state"]
    dev = state_deviation(s, s_red, pair, check_states or list(model.initial_set), verify_times)
    if dev > EXACTNESS_TOL:
        raise RuntimeError(f"reachable reduction failed exactness (deviation {dev:.3e})")
    prov = {
        "procedure": "reachable",
        "reachable_dim": kr.dim,
        "krylov_depth": kr.depth_reached,
        "support_rank": sr.rank,
        "residual_dim": n - sr.rank,
        "algebra_dim": dist.algebra_dim,
        "compressed_dim": dist.compressed_dim,
        "blocks": dist.wedderburn.blocks,
        "positive_element_projection_defect": proj_defect,
        "state_deviation": dev,
        "output_deviation": output_deviation(model, reduced, pair,
                                             check_states or list(model.initial_set),
                                             verify_times),
    }
    return ReducedQSO(model=reduced, pair=pair, split=red_split, provenance=prov)


def observable_reduction(model: QSOModel, tol: float | None = None,
                         seed: int | None = None, n_verify_states: int = 3,
                         verify_times: Sequence[float] = VERIFY_TIMES,
                         split: GeneratorSplit | None = None) -> ReducedQSO:
    """Exact CPTP reduction onto the output algebra generated by the
    Heisenberg-evolved observables, with the orthogonal state extension."""
    tol = DEFAULTS.rank_tol if tol is None else tol
    split = split_of(model) if split is None else split
    s = model.superoperator()
    n = model.dim
    kr = observable_space(s, model.output, tol)
    chain_ops = kr.chain_ops()
    sr = support_restrict(chain_ops, tol)
    sup = support_pair(sr)
    chain_c = [sr.compress_op(x) for x in chain_ops]
    comm_c = commutant(chain_c, tol)
    w = wedderburn_from_commutant(comm_c.subspace, chain_c, seed, tol)
    dist = orthogonal_distortion(w)
    pair_c = factorize(dist)
    pair = compose(sup, pair_c)
    red_split = split.reduce(pair)
    s_red = red_split.superoperator()
    reduced = _reduced_qso(s_red, model.output, pair, model.initial_set)
    rng = np.random.default_rng(DEFAULTS.seed if seed is None else seed)
    probes = [_random_density(rng, n) for _ in range(n_verify_states)]
    dev = output_deviation(model, reduced, pair, probes, verify_times)
    if dev > EXACTNESS_TOL:
        raise RuntimeError(f"observable reduction failed exactness (deviation {dev:.3e})")
    prov = {
        "procedure": "observable",
        "observable_dim": kr.dim,
        "krylov_depth": kr.depth_reached,
        "support_rank": sr.rank,
        "residual_dim": n - sr.rank,
        "algebra_dim": w.algebra_dim,
        "compressed_dim": w.compressed_dim,
        "blocks": w.blocks,
        "commutant_dim": comm_c.dim,
        "output_deviation": dev,
    }
    return ReducedQSO(model=reduced, pair=pair, split=red_split, provenance=prov)


def _random_density(rng: np.random.Generator, n: int) -> Array:
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = g @ g.conj().T + 1e-3 * np.eye(n)
    return rho / np.trace(rho).real


def iterative_reduction(model: QSOModel, tol: float | None = None,
                        seed: int | None = None, order: str = "reachable_first",
                        cap: int | None = None,
                        verify_times: Sequence[float] = VERIFY_TIMES) -> ReducedQSO:
    """Alternate reachable and observable reductions until the output algebra
    stops shrinking; all pairs are composed into one original-to-final pair."""
    tol = DEFAULTS.rank_tol if tol is None else tol
    cap = DEFAULTS.iteration_cap if cap is None else cap
    if order not in ("reachable_first", "observable_first"):
        raise ValueError("order must be 'reachable_first' or 'observable_first'")
    n = model.dim
    dim_a0 = model.algebra_note.dim if model.algebra_note is not None else n * n
    cur = model
    split = split_of(model)
    pair = identity_pair(n)
    dims_trace: list[tuple[int, int]] = []
    iterations = 0
    while True:
        if iterations >= cap:
            raise RuntimeError(
                f"iterative reduction did not settle within {cap} passes; "
                f"dimension trace: {dims_trace}")
        passes = ("reachable", "observable") if order == "reachable_first" else (
            "observable", "reachable")
        dim_obs = None
        for kind in passes:
            if kind == "reachable":
                step = reachable_reduction(cur, tol, seed, verify_times=verify_times,
                                           split=split)
            else:
                step = observable_reduction(cur, tol, seed, verify_times=verify_times,
                                            split=split)
                dim_obs = step.provenance["algebra_dim"]
            cur = step.model
            split = step.split
            pair = compose(pair, step.pair)
        iterations += 1
        dims_trace.append((dim_a0, dim_obs))
        if dim_obs == dim_a0:
            break
        dim_a0 = dim_obs
    check_states = [x for x, t in zip(model.initial_set, model.initial_tags) if t == "state"]
    dev = output_deviation(model, cur, pair, check_states, verify_times) if check_states else 0.0
    if dev > EXACTNESS_TOL:
        raise RuntimeError(f"iterative reduction failed exactness (deviation {dev:.3e})")
    prov = {
        "procedure": "iterative",
        "iterations": iterations,
        "dims_trace": dims_trace,
        "final_dim": cur.dim,
        "output_deviation": dev,
    }
    return ReducedQSO(model=cur, pair=pair, split=split, provenance=prov)


# ---------------------------------------------------------------------------
# Linear (non-CPTP) reduction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearReducedModel:
    """Plain linear realization: coordinates x with xdot = F x, Y = C x."""

    f_mat: Array
    c_mat: Array
    labels: tuple[str, ...]
    to_coords: Array       # (d, n^2): x0 = to_coords @ vec(rho0)
    from_coords: Array     # (n^2, d)
    mode: str

    @property
    def dim(self) -> int:
        return self.f_mat.shape[0]

    def outputs(self, rho0: Array, times: Sequence[float]) -> list[dict[str, complex]]:
        x = self.to_coords @ vectorize(rho0)
        out = []
        prev = 0.0
        cache: dict[float, Array] = {}
        for t in times:
            dt = t - prev
            if dt > 0:
                key = round(dt, 15)
                if key not in cache:
                    cache[key] = expm_super(self.f_mat, dt)
                x = cache[key] @ x
            prev = t
            y = self.c_mat @ x
            out.append({lab: complex(v) for lab, v in zip(self.labels, y)})
        return out


def linear_reduction(model: QSOModel, mode: str = "observable",
                     tol: float | None = None) -> LinearReducedModel:
    """Project the dynamics onto the reachable space, the observable space, or
    their effective intersection (mode ``joint``), with orthogonal factors."""
    tol = DEFAULTS.rank_tol if tol is None else tol
    s = model.superoperator()
    out_vecs = stack_vectorized(model.output.ops)
    if mode == "reachable":
        sub = reachable_space(s, list(model.initial_set), tol).subspace
        basis = sub.vecs
    elif mode == "observable":
        sub = observable_space(s, model.output, tol).subspace
        basis = sub.vecs
    elif mode == "joint":
        rsub = reachable_space(s, list(model.initial_set), tol).subspace
        f1 = rsub.vecs.conj().T @ s @ rsub.vecs
        c1 = out_vecs.conj().T @ rsub.vecs
        seeds = c1.conj().T                       # columns: observables in coords
        q, _, _, _ = _expand(f1.conj().T, seeds, tol)
        basis = rsub.vecs @ q
    else:
        raise ValueError("mode must be reachable|observable|joint")
    f_mat = basis.conj().T @ s @ basis
    c_mat = out_vecs.conj().T @ basis
    return LinearReducedModel(f_mat=f_mat, c_mat=c_mat, labels=model.output.labels,
                              to_coords=basis.conj().T, from_coords=basis, mode=mode)
