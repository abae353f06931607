import numpy as np
import pytest

from lindred.generator import (
    LindbladGenerator,
    OutputMap,
    QSOModel,
    apply_super,
    assemble,
    extract_gks,
    is_lindblad,
)
from lindred.opalg import hs_norm, random_hermitian, random_state, unvectorize, vectorize
from lindred.reducer import (
    build_positive_element,
    compose,
    conditional_expectation,
    factorize,
    identity_pair,
    iterative_reduction,
    linear_reduction,
    observable_reduction,
    output_deviation,
    reachable_reduction,
    reduce_generator,
    state_extension_map,
    support_pair,
)
from lindred.starstruct import (
    DistortedAlgebra,
    WedderburnData,
    generated_algebra,
    orthogonal_distortion,
    wedderburn,
)
from lindred.zoo import (
    CentralSpinParams,
    NSCodeParams,
    XXZParams,
    build_central_spin,
    build_ns_code,
    build_xxz,
    central_spin_jstar_block,
    reduced_block_model,
    wstate_expected_reduced,
)

from conftest import EYE2, SX, SZ, random_lindblad, random_qso


def random_distorted(rng, blocks, orthogonal=False) -> DistortedAlgebra:
    n = sum(nk * dk for nk, dk in blocks)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, _ = np.linalg.qr(g)
    isos, pos = [], 0
    for nk, dk in blocks:
        isos.append(q[:, pos:pos + nk * dk].conj().T)
        pos += nk * dk
    taus = []
    for nk, dk in blocks:
        if orthogonal:
            taus.append(np.eye(dk, dtype=complex) / dk)
        else:
            t = rng.standard_normal((dk, dk)) + 1j * rng.standard_normal((dk, dk))
            t = t @ t.conj().T + 0.1 * np.eye(dk)
            taus.append(t / np.trace(t).real)
    w = WedderburnData(unitary=q, blocks=tuple(blocks), isometries=tuple(isos),
                      residual_dim=0)
    return DistortedAlgebra(wedderburn=w, taus=tuple(taus))


class TestConditionalExpectation:
    def test_full_algebra_identity(self, rng):
        alg = generated_algebra([SX, SZ])
        e_map = conditional_expectation(orthogonal_distortion(wedderburn(alg)))
        assert np.max(np.abs(e_map - np.eye(4))) < 1e-9

    def test_diagonal_algebra_dephasing(self, rng):
        alg = generated_algebra([np.diag([1.0, 2.0]).astype(complex)])
        e_map = conditional_expectation(orthogonal_distortion(wedderburn(alg)))
        x = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        ex = apply_super(e_map, x)
        assert abs(ex[0, 1]) < 1e-12 and abs(ex[1, 0]) < 1e-12
        assert ex[0, 0] == pytest.approx(x[0, 0]) and ex[1, 1] == pytest.approx(x[1, 1])

    def test_projector_properties_random(self, rng):
        # idempotent, unital, completely positive, fixes the algebra
        from lindred.generator import choi_from_super
        for blocks in ([(2, 2), (1, 1)], [(1, 2), (2, 1)], [(3, 1)]):
            d = random_distorted(rng, blocks)
            e_map = conditional_expectation(d)
            n = d.wedderburn.n
            assert np.max(np.abs(e_map @ e_map - e_map)) < 1e-10
            eye = np.eye(n, dtype=complex)
            assert np.max(np.abs(apply_super(e_map, eye) - eye)) < 1e-10
            choi = choi_from_super(e_map)
            choi = 0.5 * (choi + choi.conj().T)
            assert np.linalg.eigvalsh(choi)[0] > -1e-9
            # fixes every element of the (undistorted) algebra
            for k, (nk, dk) in enumerate(d.wedderburn.blocks):
                iso = d.wedderburn.isometries[k]
                for f in range(nk):
                    for fp in range(nk):
                        e = np.zeros((nk, nk), dtype=complex)
                        e[f, fp] = 1.0
                        b = iso.conj().T @ np.kron(e, np.eye(dk)) @ iso
                        assert np.max(np.abs(apply_super(e_map, b) - b)) < 1e-9


class TestFactorize:
    def test_single_block_identity(self, rng):
        alg = generated_algebra([SX, SZ])
        pair = factorize(orthogonal_distortion(wedderburn(alg)))
        assert pair.m == 2
        x = random_hermitian(rng, 2)
        # reduction and injection are a basis change and its inverse
        assert np.max(np.abs(pair.inject(pair.reduce(x)) - x)) < 1e-10

    def test_factor_identities(self, rng):
        for blocks in ([(2, 2), (1, 1)], [(1, 3)], [(2, 1), (1, 2)]):
            pair = factorize(random_distorted(rng, blocks))
            defects = pair.verify()
            assert defects["rj_identity"] < 1e-9
            assert defects["jr_state_extension"] < 1e-9
            assert defects["r_choi_min_eig"] > -1e-9
            assert defects["j_choi_min_eig"] > -1e-9

    def test_duality_identity(self, rng):
        # tr[E(X) rho] == tr[R0(X) R(rho)] == tr[X J(rho)]
        d = random_distorted(rng, [(2, 2), (1, 1)])
        pair = factorize(d)
        e_map = conditional_expectation(d)
        for _ in range(10):
            x = random_hermitian(rng, 5)
            rho = random_state(rng, 5)
            lhs = np.vdot(apply_super(e_map, x).conj().T, rho.T).conj()
            lhs = np.trace(apply_super(e_map, x) @ rho)
            mid = np.trace(pair.reduce_dual(x) @ pair.reduce(rho))
            rhs = np.trace(x @ pair.inject(pair.reduce(rho)))
            assert abs(lhs - mid) < 1e-10 and abs(lhs - rhs) < 1e-10

    def test_products_identity(self, rng):
        # R[X J(A)] == J^dag(X) A and its mirror, on 100 random instances
        worst = 0.0
        for trial in range(100):
            blocks = [[(2, 2), (1, 1)], [(1, 2), (2, 1)], [(3, 1)], [(1, 3)]][trial % 4]
            d = random_distorted(rng, blocks)
            pair = factorize(d)
            n, m = pair.n, pair.m
            x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            a = np.zeros((m, m), dtype=complex)
            off = 0
            for nk, _ in blocks:
                a[off:off + nk, off:off + nk] = (rng.standard_normal((nk, nk))
                                                 + 1j * rng.standard_normal((nk, nk)))
                off += nk
            lhs = pair.reduce(x @ pair.inject(a))
            rhs = pair.reduce_dual(x) @ a
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
            lhs = pair.reduce(pair.inject(a) @ x)
            rhs = a @ pair.reduce_dual(x)
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        assert worst < 1e-10

    def test_state_extension_is_dual_of_expectation(self, rng):
        d = random_distorted(rng, [(2, 1), (1, 2)])
        assert np.max(np.abs(state_extension_map(d)
                             - conditional_expectation(d).conj().T)) < 1e-12


class TestReduceGenerator:
    def test_identity_pair_unchanged(self, rng):
        gen = random_lindblad(rng, 3)
        s = assemble(gen)
        out = reduce_generator(s, identity_pair(3), gks=gen)
        assert np.max(np.abs(out - s)) < 1e-10

    def test_pure_hamiltonian_closure(self, rng):
        # reduced generator of -i ad_H is exactly -i ad of the dual-injected H
        from lindred.generator import hamiltonian_super
        d = random_distorted(rng, [(2, 2), (1, 1)])
        pair = factorize(d)
        h = random_hermitian(rng, 5)
        gen = LindbladGenerator(h)
        red = reduce_generator(assemble(gen), pair, gks=gen)
        h_red = pair.reduce_dual(h)
        assert np.max(np.abs(red - hamiltonian_super(h_red))) < 1e-9

    def test_lindblad_form_of_extension(self, rng):
        d = random_distorted(rng, [(2, 2), (1, 1)])
        pair = factorize(d)
        gen = random_lindblad(rng, 5, 2)
        red = reduce_generator(assemble(gen), pair, gks=gen)
        assert is_lindblad(red, 1e-8).passed
        # literal composition agrees on the block-diagonal sector
        lit = reduce_generator(assemble(gen), pair, gks=gen, mode="literal")
        bd = pair.block_projector()
        assert np.max(np.abs((red - lit) @ bd)) < 1e-9

    def test_heisenberg_bath_term_generates_no_dynamics(self):
        # a permutation-group-algebra bath Hamiltonian reduces to block scalars
        p = CentralSpinParams(n_spins=4, omega1=1.0, ax=0.7, ay=1.3, az=-0.2,
                              intra_bath=("heisenberg", [[0, 0.7, 1.1],
                                                         [0.7, 0, 0.4],
                                                         [1.1, 0.4, 0]]))
        base = CentralSpinParams(n_spins=4, omega1=1.0, ax=0.7, ay=1.3, az=-0.2)
        model = build_central_spin(base)
        red = observable_reduction(model)
        from lindred.zoo import _central_spin_hamiltonian
        h_int_only = (_central_spin_hamiltonian(p)
                      - _central_spin_hamiltonian(base))
        gen_b = LindbladGenerator(h_int_only)
        red_b = reduce_generator(assemble(gen_b), red.pair, gks=gen_b)
        # the dual-injected bath term is a scalar per block, so it generates
        # no dynamics on the compressed algebra (the block-diagonal sector)
        assert np.max(np.abs(red_b @ red.pair.block_projector())) < 1e-9
        h_red = red.pair.reduce_dual(h_int_only)
        off = 0
        for nk, _ in red.pair.algebra.wedderburn.blocks:
            blk = h_red[off:off + nk, off:off + nk]
            scalar = np.trace(blk) / nk
            assert np.max(np.abs(blk - scalar * np.eye(nk))) < 1e-9
            off += nk


class TestBuildPositiveElement:
    def test_fixed_point_gives_scaled_state(self):
        rho = np.diag([0.25, 0.75]).astype(complex)
        s = assemble(LindbladGenerator(SZ, (SZ,)))
        v = build_positive_element(s, [rho], epsilon=0.8, quad_order=10)
        assert np.max(np.abs(v - 0.8 * rho)) < 1e-12

    def test_zero_generator_two_seeds(self):
        s = np.zeros((9, 9), dtype=complex)
        r1 = np.diag([1.0, 0, 0]).astype(complex)
        r2 = np.diag([0, 1.0, 0]).astype(complex)
        v = build_positive_element(s, [r1, r2], epsilon=1.0)
        assert np.max(np.abs(v - (r1 + r2))) < 1e-12
        assert np.linalg.matrix_rank(v) == 2

    def test_support_matches_reachable(self, rng):
        p = CentralSpinParams(n_spins=4, omega1=1.0, ax=1.0, ay=1.0, az=2.0,
                              dissipation=("collective", 1.0))
        model = central_spin_jstar_block(p)
        from lindred.krylov import reachable_space
        from lindred.starstruct import support_restrict
        s = model.superoperator()
        kr = reachable_space(s, list(model.initial_set))
        rank = support_restrict(kr.chain_ops()).rank
        v = build_positive_element(s, list(model.initial_set), expected_rank=rank)
        vals = np.linalg.eigvalsh(v)
        assert int(np.sum(vals > 1e-10 * vals[-1])) == rank == 3


class TestReachableReduction:
    def test_single_fixed_state(self):
        rho = np.diag([0.5, 0.3, 0.2]).astype(complex)
        h = np.diag([1.0, 2.0, 3.0]).astype(complex)
        gen = LindbladGenerator(h, (np.diag([1.0, 2.0, -1.0]).astype(complex),))
        model = QSOModel(generator=gen,
                         output=OutputMap(ops=(np.eye(3, dtype=complex),),
                                          labels=("one",)),
                         initial_set=(rho,))
        red = reachable_reduction(model)
        assert red.dim == 1
        assert red.provenance["algebra_dim"] == 1
        assert red.provenance["output_deviation"] < 1e-10

    def test_full_span_seeds_trivial(self, rng):
        gen = random_lindblad(rng, 2)
        seeds = [random_state(rng, 2) for _ in range(6)]
        model = QSOModel(generator=gen,
                         output=OutputMap(ops=(SZ,), labels=("z",)),
                         initial_set=tuple(seeds))
        red = reachable_reduction(model)
        assert red.dim == 2
        assert red.provenance["reachable_dim"] == 4

    def test_wstate_block_model(self):
        p = CentralSpinParams(n_spins=5, omega1=1.0, ax=1.0, ay=1.0, az=2.0,
                              dissipation=("collective", 1.0))
        model = central_spin_jstar_block(p)
        red = reachable_reduction(model)
        prov = red.provenance
        assert prov["reachable_dim"] == 5
        assert prov["support_rank"] == 3
        assert prov["residual_dim"] == 2 * 5 - 3
        assert sorted(prov["blocks"]) == [(1, 1), (2, 1)]
        assert prov["state_deviation"] < 1e-10
        assert is_lindblad(red.model.superoperator(), 1e-8).passed


class TestObservableReduction:
    def test_xxz_three_sites(self):
        model = build_xxz(XXZParams(n_spins=3))
        red = observable_reduction(model)
        prov = red.provenance
        assert prov["observable_dim"] == 18
        assert prov["algebra_dim"] == 20
        assert sorted(prov["blocks"]) == [(1, 1), (1, 1), (3, 1), (3, 1)]
        assert prov["output_deviation"] < 1e-10
        assert is_lindblad(red.model.superoperator(), 1e-8).passed

    def test_full_output_basis_no_reduction(self, rng):
        gen = random_lindblad(rng, 2)
        basis = [EYE2, SX, np.array([[0, -1j], [1j, 0]]), SZ]
        model = QSOModel(generator=gen,
                         output=OutputMap(ops=tuple(basis),
                                          labels=("a", "b", "c", "d")))
        red = observable_reduction(model)
        assert red.dim == 2
        assert red.provenance["algebra_dim"] == 4

    def test_ns_code_qutrit(self):
        model = build_ns_code(NSCodeParams(delta=10.0, kappa_z=1.0))
        red = observable_reduction(model)
        assert red.provenance["algebra_dim"] == 9
        assert red.dim == 3
        # reduced code observables square to the reduced unit observable
        red_ops = dict(zip(red.model.output.labels, red.model.output.ops))
        for q in ("Cx", "Cy", "Cz"):
            assert np.max(np.abs(red_ops[q] @ red_ops[q] - red_ops["C0"])) < 1e-9


class TestIterative:
    def test_already_minimal_single_pass(self, rng):
        gen = random_lindblad(rng, 2, 2)
        model = QSOModel(generator=gen,
                         output=OutputMap(ops=(EYE2, SX, np.array([[0, -1j], [1j, 0]]), SZ),
                                          labels=("i", "x", "y", "z")),
                         initial_set=(random_state(rng, 2),))
        red = iterative_reduction(model)
        assert red.provenance["iterations"] == 1
        assert red.dim == 2

    def test_wstate_full_pipeline(self):
        # observable pass confines to the top angular-momentum block, the
        # reachable pass lands on the five-dimensional algebra
        p = CentralSpinParams(n_spins=4, omega1=1.0, ax=1.0, ay=1.0, az=2.0,
                              dissipation=("collective", 1.0))
        model = build_central_spin(p, initial="w_state")
        red = iterative_reduction(model)
        assert red.dim == 3
        assert red.provenance["output_deviation"] < 1e-8
        assert red.provenance["iterations"] <= 3

    def test_random_two_qubit_terminates(self, rng):
        for trial in range(10):
            model = random_qso(rng, 4, n_noise=1 + trial % 2, n_out=2, n_init=1)
            red = iterative_reduction(model)
            assert red.provenance["iterations"] <= 3
            assert red.provenance["output_deviation"] < 1e-8


class TestLinearReduction:
    def test_observable_dimension(self):
        model = build_xxz(XXZParams(n_spins=3))
        lin = linear_reduction(model, mode="observable")
        assert lin.dim == 18

    def test_reachable_fixed_state(self):
        rho = np.diag([0.5, 0.3, 0.2]).astype(complex)
        h = np.diag([1.0, 2.0, 3.0]).astype(complex)
        gen = LindbladGenerator(h, (np.diag([1.0, 2.0, -1.0]).astype(complex),))
        model = QSOModel(generator=gen,
                         output=OutputMap(ops=(np.eye(3, dtype=complex),),
                                          labels=("one",)),
                         initial_set=(rho,))
        lin = linear_reduction(model, mode="reachable")
        assert lin.dim == 1

    def test_joint_dimension_and_equivalence(self, rng):
        model = random_qso(rng, 3, n_out=1, n_init=1)
        lin = linear_reduction(model, mode="joint")
        rsub = linear_reduction(model, mode="reachable")
        assert lin.dim <= rsub.dim
        # output equivalence on the declared initial state
        times = np.linspace(0, 5, 11)
        from lindred.generator import evolve
        s = model.superoperator()
        rho0 = model.initial_set[0]
        full = [model.output.apply(r) for r in evolve(s, rho0, times)]
        red = lin.outputs(rho0, times)
        worst = max(abs(f[k] - r[k]) for f, r in zip(full, red) for k in f)
        assert worst < 1e-8

    def test_observable_equivalence_random_state(self, rng):
        model = build_xxz(XXZParams(n_spins=2))
        lin = linear_reduction(model, mode="observable")
        rho0 = random_state(rng, 4)
        times = np.linspace(0, 8, 17)
        from lindred.generator import evolve
        full = [model.output.apply(r) for r in evolve(model.superoperator(), rho0, times)]
        red = lin.outputs(rho0, times)
        worst = max(abs(f[k] - r[k]) for f, r in zip(full, red) for k in f)
        assert worst < 1e-8


def test_compose_support_pair(rng):
    from lindred.starstruct import support_restrict
    from lindred.opalg import orthonormalize
    p0 = np.diag([1.0, 0, 0]).astype(complex)
    p1 = np.diag([0, 1.0, 0]).astype(complex)
    sr = support_restrict(orthonormalize([p0, p1]))
    pair = support_pair(sr)
    assert pair.m == 2
    x = random_hermitian(rng, 3)
    proj = sr.projector
    assert np.max(np.abs(pair.inject(pair.reduce(x)) - proj @ x @ proj)) < 1e-12
