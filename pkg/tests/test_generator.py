import numpy as np
import pytest

from lindred.generator import (
    LindbladGenerator,
    OutputMap,
    QSOModel,
    adjoint,
    apply_generator,
    apply_super,
    assemble,
    choi_from_super,
    dissipator_super,
    entropy,
    evolve,
    extract_gks,
    is_lindblad,
    output_trajectory,
    purity,
    super_from_choi,
)
from lindred.opalg import hs_inner, hs_norm, random_hermitian, random_state, vectorize

from conftest import EYE2, LOWER, SX, SY, SZ, random_lindblad


class TestAssemble:
    def test_commutator_action(self):
        s = assemble(LindbladGenerator(SZ / 2))
        assert np.max(np.abs(apply_super(s, SX) - SY)) < 1e-14

    def test_amplitude_damping_by_hand(self):
        # decay operator |ground><excited| applied to the excited population
        excited = np.diag([0.0, 1.0]).astype(complex)
        ground = np.diag([1.0, 0.0]).astype(complex)
        s = assemble(LindbladGenerator(np.zeros((2, 2)), (LOWER,)))
        assert np.max(np.abs(apply_super(s, excited) - (ground - excited))) < 1e-14

    def test_zero_generator(self):
        s = assemble(LindbladGenerator(np.zeros((2, 2))))
        assert np.max(np.abs(s)) == 0.0

    def test_matches_direct_evaluation(self, rng):
        gen = random_lindblad(rng, 3, n_noise=2)
        s = assemble(gen)
        for _ in range(5):
            rho = random_state(rng, 3)
            direct = apply_generator(gen, rho)
            via = apply_super(s, rho)
            assert np.max(np.abs(via - direct)) <= 1e-12 * max(np.max(np.abs(direct)), 1)

    def test_rejects_non_hermitian_hamiltonian(self):
        with pytest.raises(ValueError):
            LindbladGenerator(LOWER)

    def test_trace_and_hermiticity_preservation(self, rng):
        gen = random_lindblad(rng, 3, n_noise=2)
        s = assemble(gen)
        # dual annihilates the identity
        assert hs_norm(apply_super(adjoint(s), np.eye(3))) < 1e-11
        # hermiticity preservation over a basis
        for _ in range(6):
            x = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
            lhs = apply_super(s, x.conj().T)
            rhs = apply_super(s, x).conj().T
            assert np.max(np.abs(lhs - rhs)) < 1e-11 * max(hs_norm(x), 1)


class TestAdjoint:
    def test_hamiltonian_sign_flip(self):
        s = assemble(LindbladGenerator(SZ))
        assert np.max(np.abs(adjoint(s) + s)) < 1e-14   # -i ad_H dual is +i ad_H

    def test_involution(self, rng):
        s = assemble(random_lindblad(rng, 2))
        assert np.array_equal(adjoint(adjoint(s)), s)

    def test_duality_identity(self, rng):
        gen = random_lindblad(rng, 3)
        s = assemble(gen)
        sd = adjoint(s)
        for _ in range(10):
            x = random_hermitian(rng, 3)
            rho = random_state(rng, 3)
            lhs = hs_inner(x, apply_super(s, rho))
            rhs = hs_inner(apply_super(sd, x), rho)
            assert abs(lhs - rhs) < 1e-11 * max(abs(lhs), 1)

    def test_dissipator_dual_kills_identity(self):
        s = dissipator_super(LOWER)
        assert hs_norm(apply_super(adjoint(s), EYE2)) < 1e-14


class TestEvolve:
    def test_zero_generator_constant(self):
        s = np.zeros((4, 4), dtype=complex)
        rho = np.diag([0.3, 0.7]).astype(complex)
        traj = evolve(s, rho, [0.0, 1.0, 2.0])
        for r in traj:
            assert np.array_equal(r, rho)

    def test_fixed_point_constant(self):
        rho = np.diag([0.25, 0.75]).astype(complex)
        s = assemble(LindbladGenerator(SZ, (SZ,)))
        traj = evolve(s, rho, np.linspace(0, 4, 9))
        for r in traj:
            assert np.max(np.abs(r - rho)) < 1e-12

    def test_dephasing_closed_form(self):
        gamma = 0.8
        s = assemble(LindbladGenerator(np.zeros((2, 2)), (np.sqrt(gamma) * SZ,)))
        rho0 = 0.5 * (EYE2 + SX)
        times = np.linspace(0, 2, 11)
        traj = evolve(s, rho0, times)
        for t, r in zip(times, traj):
            assert r[0, 1] == pytest.approx(0.5 * np.exp(-2 * gamma * t), abs=1e-10)

    def test_semigroup_composition(self, rng):
        s = assemble(random_lindblad(rng, 2))
        rho = random_state(rng, 2)
        one_shot = evolve(s, rho, [2.3])[-1]
        stepped = evolve(s, rho, [0.9, 2.3])[-1]
        assert np.max(np.abs(one_shot - stepped)) < 1e-9

    def test_trace_preserved(self, rng):
        s = assemble(random_lindblad(rng, 3, 2))
        rho = random_state(rng, 3)
        for r in evolve(s, rho, np.linspace(0, 5, 11)):
            assert abs(np.trace(r) - 1.0) < 1e-9

    def test_rejects_unsorted_times(self):
        with pytest.raises(ValueError):
            evolve(np.zeros((4, 4)), EYE2 / 2, [1.0, 0.5])


class TestOutputTrajectory:
    def test_identity_output_constant_one(self, rng):
        gen = random_lindblad(rng, 2)
        rho = random_state(rng, 2)
        model = QSOModel(generator=gen,
                         output=OutputMap(ops=(EYE2,), labels=("one",)),
                         initial_set=(rho,))
        rows = output_trajectory(model, rho, np.linspace(0, 3, 7))
        for row in rows:
            assert row["one"] == pytest.approx(1.0, abs=1e-9)

    def test_heisenberg_duality(self, rng):
        gen = random_lindblad(rng, 2)
        obs = random_hermitian(rng, 2)
        rho = random_state(rng, 2)
        model = QSOModel(generator=gen, output=OutputMap(ops=(obs,), labels=("x",)),
                         initial_set=(rho,))
        rows = output_trajectory(model, rho, [1.7])
        from lindred.opalg import expm_super
        x_t = apply_super(expm_super(adjoint(assemble(gen)), 1.7), obs)
        assert rows[0]["x"] == pytest.approx(hs_inner(x_t, rho), abs=1e-10)

    def test_outside_span_rejected(self, rng):
        gen = random_lindblad(rng, 2)
        rho = random_state(rng, 2)
        other = random_state(rng, 2)
        model = QSOModel(generator=gen,
                         output=OutputMap(ops=(EYE2,), labels=("one",)),
                         initial_set=(rho,))
        with pytest.raises(ValueError):
            output_trajectory(model, other, [0.0, 1.0])
        rows = output_trajectory(model, other, [0.0], allow_outside_span=True)
        assert rows[0]["one"] == pytest.approx(1.0)


class TestChoi:
    def test_round_trip(self, rng):
        s = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
        assert np.max(np.abs(super_from_choi(choi_from_super(s)) - s)) < 1e-14

    def test_kraus_choi_is_projector_like(self):
        L = LOWER
        c = choi_from_super(np.kron(L.conj(), L))
        expected = np.outer(vectorize(L), vectorize(L).conj())
        assert np.max(np.abs(c - expected)) < 1e-14


class TestIsLindblad:
    def test_assembled_generator_passes(self, rng):
        rep = is_lindblad(assemble(random_lindblad(rng, 3, 2)))
        assert rep.passed

    def test_transpose_map_fails_ccp(self):
        n = 2
        t = np.zeros((4, 4), dtype=complex)
        for a in range(n):
            for b in range(n):
                e = np.zeros((n, n), dtype=complex)
                e[a, b] = 1.0
                t[:, b * n + a] = vectorize(e.T)
        rep = is_lindblad(t - np.eye(4))
        assert not rep.passed
        assert rep.ccp_min_eig < -0.1

    def test_hermiticity_breaking_flagged(self):
        s = np.zeros((4, 4), dtype=complex)
        s[0, 1] = 1.0   # maps a coherence to a population, asymmetrically
        rep = is_lindblad(s)
        assert rep.herm_defect > 0.1


class TestExtractGKS:
    def test_round_trip_two_qubits(self, rng):
        gen = random_lindblad(rng, 4, 2)
        s = assemble(gen)
        back = extract_gks(s)
        assert np.max(np.abs(assemble(back) - s)) < 1e-9 * max(np.max(np.abs(s)), 1)

    def test_canonical_gauge(self, rng):
        gen = random_lindblad(rng, 3, 2)
        back = extract_gks(assemble(gen))
        assert abs(np.trace(back.hamiltonian)) < 1e-9
        for i, li in enumerate(back.noise_ops):
            assert abs(np.trace(li)) < 1e-8
            for j, lj in enumerate(back.noise_ops):
                if i != j:
                    assert abs(hs_inner(li, lj)) < 1e-8 * hs_norm(li) * hs_norm(lj)

    def test_pure_hamiltonian(self, rng):
        h = random_hermitian(rng, 3)
        back = extract_gks(assemble(LindbladGenerator(h)))
        assert len(back.noise_ops) == 0
        shifted = h - np.trace(h) / 3 * np.eye(3)
        assert np.max(np.abs(back.hamiltonian - shifted)) < 1e-9

    def test_rejects_non_lindblad(self):
        with pytest.raises(ValueError):
            extract_gks(np.eye(4, dtype=complex))


class TestStateFunctionals:
    def test_pure_state(self):
        rho = np.diag([1.0, 0.0]).astype(complex)
        assert entropy(rho) == pytest.approx(0.0, abs=1e-12)
        assert purity(rho) == pytest.approx(1.0)

    def test_maximally_mixed(self):
        assert entropy(EYE2 / 2) == pytest.approx(np.log(2))
        assert purity(EYE2 / 2) == pytest.approx(0.5)

    def test_trace_check(self):
        with pytest.raises(ValueError):
            entropy(EYE2)


def test_qso_rejects_bad_initial_state():
    with pytest.raises(ValueError):
        QSOModel(generator=LindbladGenerator(SZ),
                 output=OutputMap(ops=(SZ,), labels=("z",)),
                 initial_set=(SX,))   # traceless, not a state
    # same operator tagged generic is fine
    QSOModel(generator=LindbladGenerator(SZ),
             output=OutputMap(ops=(SZ,), labels=("z",)),
             initial_set=(SX,), initial_tags=("generic",))
