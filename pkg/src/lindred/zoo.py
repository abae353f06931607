"""Parameterized builders for the benchmark open-spin systems.

Spin operators are assembled by Kronecker products with identity padding and
1-based site indexing.  Builders refuse to materialise a dense superoperator
beyond the configured dimension cap; the angular-momentum block constructions
are exempt since they never touch the full tensor-product space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .config import DEFAULTS, check_cap
from .generator import LindbladGenerator, OutputMap, QSOModel
from .opalg import Array, expm_super, vectorize, unvectorize

SIGMA = {
    "0": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
}


def site_op(op: Array, site: int, n_sites: int) -> Array:
    """Embed a single-spin operator at a 1-based site of an n_sites register."""
    if not 1 <= site <= n_sites:
        raise ValueError(f"site {site} out of range 1..{n_sites}")
    out = np.array([[1.0 + 0j]])
    for k in range(1, n_sites + 1):
        out = np.kron(out, op if k == site else SIGMA["0"])
    return out


def pauli_at(axis: str, site: int, n_sites: int) -> Array:
    return site_op(SIGMA[axis], site, n_sites)


def collective_j(axis: str, n_sites: int, sites: Sequence[int]) -> Array:
    """Collective angular momentum (1/2) sum of sigma_axis over the given sites."""
    dim = 2 ** n_sites
    out = np.zeros((dim, dim), dtype=complex)
    for k in sites:
        out += pauli_at(axis, k, n_sites)
    return 0.5 * out


def basis_state(bits: str) -> Array:
    """Computational basis ket |b1 b2 ...> with 0 = spin up."""
    vec = np.array([1.0 + 0j])
    for b in bits:
        vec = np.kron(vec, np.array([1.0, 0.0]) if b == "0" else np.array([0.0, 1.0]))
    return vec.astype(complex)


def projector(vec: Array) -> Array:
    v = np.asarray(vec, dtype=complex)
    return np.outer(v, v.conj()) / np.vdot(v, v).real


# ---------------------------------------------------------------------------
# Angular momentum blocks (bath permutation structure)
# ---------------------------------------------------------------------------

def spin_matrices(two_j: int) -> dict[str, Array]:
    """Spin-j operators on the (2j+1)-dim irrep, m ascending."""
    dim = two_j + 1
    j = Fraction(two_j, 2)
    ms = [Fraction(-two_j, 2) + k for k in range(dim)]
    jz = np.diag([float(m) for m in ms]).astype(complex)
    jp = np.zeros((dim, dim), dtype=complex)
    for k in range(dim - 1):
        m = ms[k]
        jp[k + 1, k] = math.sqrt(float((j - m) * (j + m + 1)))
    jm = jp.conj().T
    return {"z": jz, "+": jp, "-": jm,
            "x": 0.5 * (jp + jm), "y": -0.5j * (jp - jm)}


def bath_two_j_values(n_bath: int) -> list[int]:
    """Allowed 2j for a bath of n_bath spin-1/2, largest first."""
    return list(range(n_bath, -1 if n_bath % 2 == 0 else 0, -2))


def multiplicity(n_bath: int, two_j: int) -> int:
    """Number of copies of the spin-j irrep in (C^2)^{n_bath}."""
    half = Fraction(n_bath, 2)
    j = Fraction(two_j, 2)
    a = half - j
    b = half + j + 1
    return (two_j + 1) * math.factorial(n_bath) // (
        math.factorial(int(a)) * math.factorial(int(b)))


# ---------------------------------------------------------------------------
# Central spin family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CentralSpinParams:
    """Central spin 1 coupled collectively to a bath of N-1 spins.

    ``intra_bath`` is None, ("heisenberg", strength-or-matrix) or
    ("ising", strength); ``dissipation`` is None, ("collective", rate) for
    collective raising, or ("local", rate) for uniform local raising on every
    bath spin.
    """

    n_spins: int
    omega1: float = 0.0
    eta: float = 0.0
    ax: float = 0.0
    ay: float = 0.0
    az: float = 0.0
    bath_omega: float = 0.0
    bath_mu: float = 0.0
    intra_bath: tuple | None = None
    dissipation: tuple | None = None

    def __post_init__(self):
        if self.n_spins < 2:
            raise ValueError("need at least one bath spin")

    @property
    def n_bath(self) -> int:
        return self.n_spins - 1


def _central_spin_hamiltonian(p: CentralSpinParams) -> Array:
    n = p.n_spins
    bath = range(2, n + 1)
    jx = collective_j("x", n, bath)
    jy = collective_j("y", n, bath)
    jz = collective_j("z", n, bath)
    h = 0.5 * (p.omega1 * pauli_at("z", 1, n) + p.eta * pauli_at("x", 1, n))
    h = h + 0.5 * (p.ax * pauli_at("x", 1, n) @ jx
                   + p.ay * pauli_at("y", 1, n) @ jy
                   + p.az * pauli_at("z", 1, n) @ jz)
    h = h + 0.5 * (p.bath_omega * jz + p.bath_mu * jx)
    if p.intra_bath is not None:
        kind, strength = p.intra_bath
        if kind == "ising":
            acc = np.zeros_like(h)
            for i in bath:
                for k in bath:
                    if i < k:
                        acc += pauli_at("x", i, n) @ pauli_at("x", k, n)
            h = h + (strength / 4.0) * acc
        elif kind == "heisenberg":
            mat = strength
            acc = np.zeros_like(h)
            for i in bath:
                for k in bath:
                    if i < k:
                        b = mat[i - 2][k - 2] if not np.isscalar(mat) else mat
                        for u in "xyz":
                            acc += b * (pauli_at(u, i, n) @ pauli_at(u, k, n))
            h = h + acc
        else:
            raise ValueError(f"unknown intra-bath kind {kind!r}")
    return h


def _central_spin_noise(p: CentralSpinParams) -> tuple[Array, ...]:
    n = p.n_spins
    bath = range(2, n + 1)
    if p.dissipation is None:
        return ()
    kind, rate = p.dissipation
    if kind == "collective":
        jp = collective_j("x", n, bath) + 1j * collective_j("y", n, bath)
        return (rate * jp,)
    if kind == "local":
        return tuple(rate * site_op(SIGMA["+"], k, n) for k in bath)
    raise ValueError(f"unknown dissipation kind {kind!r}")


def w_state_ket(n_bath: int) -> Array:
    dim = 2 ** n_bath
    vec = np.zeros(dim, dtype=complex)
    for k in range(n_bath):
        vec[2 ** (n_bath - 1 - k)] = 1.0
    return vec / math.sqrt(n_bath)


def build_central_spin(p: CentralSpinParams, initial: str = "none",
                       beta: float | None = None) -> QSOModel:
    """Full tensor-product model with central-spin Pauli outputs.

    ``initial``: "none" (unrestricted), "up_ground" (|0><0| times all bath
    spins up), "excited_ground" (|1><1| times bath up), "w_state"
    (|0><0| times the single-flip entangled bath state), or "thermal"
    (|0><0| times the bath Gibbs state at inverse temperature ``beta``).
    """
    n = p.n_spins
    check_cap(2 ** n)
    gen = LindbladGenerator(_central_spin_hamiltonian(p), _central_spin_noise(p))
    out = OutputMap(ops=tuple(pauli_at(u, 1, n) for u in "xyz"),
                    labels=("sx1", "sy1", "sz1"), physical=True)
    initial_set: tuple = ()
    if initial == "up_ground" or initial == "excited_ground":
        sys_bit = "0" if initial == "up_ground" else "1"
        initial_set = (projector(basis_state(sys_bit + "0" * p.n_bath)),)
    elif initial == "w_state":
        up = np.array([1.0, 0.0], dtype=complex)
        vec = np.kron(up, w_state_ket(p.n_bath))
        initial_set = (projector(vec),)
    elif initial == "thermal":
        if beta is None:
            raise ValueError("thermal initial condition needs beta")
        hb = _bath_only_hamiltonian(p)
        w = expm_hermitian(-beta * hb)
        rho_b = w / np.trace(w).real
        rho_s = projector(np.array([1.0, 0.0], dtype=complex))
        initial_set = (np.kron(rho_s, rho_b),)
    elif initial != "none":
        raise ValueError(f"unknown initial condition {initial!r}")
    return QSOModel(generator=gen, output=out, initial_set=initial_set)


def _bath_only_hamiltonian(p: CentralSpinParams) -> Array:
    """Bath Hamiltonian on the bath register alone (no central spin factor)."""
    nb = p.n_bath
    sites = range(1, nb + 1)
    jx = collective_j("x", nb, sites)
    jz = collective_j("z", nb, sites)
    h = 0.5 * (p.bath_omega * jz + p.bath_mu * jx)
    if p.intra_bath is not None:
        kind, strength = p.intra_bath
        if kind == "ising":
            acc = np.zeros_like(h)
            for i in sites:
                for k in sites:
                    if i < k:
                        acc += pauli_at("x", i, nb) @ pauli_at("x", k, nb)
            h = h + (strength / 4.0) * acc
        elif kind == "heisenberg":
            acc = np.zeros_like(h)
            for i in sites:
                for k in sites:
                    if i < k:
                        b = strength[i - 1][k - 1] if not np.isscalar(strength) else strength
                        for u in "xyz":
                            acc += b * (pauli_at(u, i, nb) @ pauli_at(u, k, nb))
            h = h + acc
    return h


def expm_hermitian(h: Array) -> Array:
    vals, vecs = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (vecs * np.exp(vals - vals.max())) @ vecs.conj().T


# ---------------------------------------------------------------------------
# Reduced angular-momentum block models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpinBlock:
    """One fixed-total-angular-momentum block of the reduced central spin."""

    two_j: int
    multiplicity: int
    hamiltonian: Array            # on C^2 (x) C^(2j+1)
    noise_ops: tuple[Array, ...]
    outputs: tuple[Array, ...]    # central-spin Paulis on the block

    @property
    def dim(self) -> int:
        return 2 * (self.two_j + 1)


def reduced_block_model(p: CentralSpinParams) -> list[SpinBlock]:
    """Per-block reduced model for permutation-invariant central-spin dynamics.

    Valid when the intra-bath couplings are uniform and the dissipation (if
    any) is collective, so that each block evolves independently.
    """
    if p.dissipation is not None and p.dissipation[0] != "collective":
        raise ValueError("per-block model requires collective (or no) dissipation")
    if p.intra_bath is not None and not np.isscalar(p.intra_bath[1]):
        raise ValueError("per-block model requires uniform intra-bath couplings")
    blocks = []
    for two_j in bath_two_j_values(p.n_bath):
        jm = spin_matrices(two_j)
        dim_b = two_j + 1
        eye_b = np.eye(dim_b)
        h = 0.5 * (p.omega1 * np.kron(SIGMA["z"], eye_b) + p.eta * np.kron(SIGMA["x"], eye_b))
        h = h + 0.5 * (p.ax * np.kron(SIGMA["x"], jm["x"])
                       + p.ay * np.kron(SIGMA["y"], jm["y"])
                       + p.az * np.kron(SIGMA["z"], jm["z"]))
        h = h + np.kron(SIGMA["0"], _bath_block_hamiltonian(p, jm, two_j))
        noise = ()
        if p.dissipation is not None:
            noise = (p.dissipation[1] * np.kron(SIGMA["0"], jm["+"]),)
        outs = tuple(np.kron(SIGMA[u], eye_b) for u in "xyz")
        blocks.append(SpinBlock(two_j=two_j, multiplicity=multiplicity(p.n_bath, two_j),
                                hamiltonian=h, noise_ops=noise, outputs=outs))
    return blocks


def _bath_block_hamiltonian(p: CentralSpinParams, jm: dict[str, Array], two_j: int) -> Array:
    dim_b = two_j + 1
    j = two_j / 2.0
    h = 0.5 * (p.bath_omega * jm["z"] + p.bath_mu * jm["x"])
    if p.intra_bath is not None:
        kind, strength = p.intra_bath
        if kind == "ising":
            h = h + (strength / 4.0) * (2.0 * jm["x"] @ jm["x"]
                                        - (p.n_bath / 2.0) * np.eye(dim_b))
        elif kind == "heisenberg":
            h = h + strength * (2.0 * j * (j + 1) - 1.5 * p.n_bath) * np.eye(dim_b)
    return h


def reduced_thermal_state(p: CentralSpinParams, beta: float) -> list[tuple[int, Array]]:
    """Block-reduced bath Gibbs state without touching the 2**n_bath space.

    Returns (two_j, rho_block) pairs with the multiplicity weights folded in;
    the traces sum to one.  Requires permutation-invariant bath couplings.
    """
    if p.intra_bath is not None and not np.isscalar(p.intra_bath[1]):
        raise ValueError("reduced thermal state requires uniform intra-bath couplings")
    raw = []
    emin = None
    for two_j in bath_two_j_values(p.n_bath):
        jm = spin_matrices(two_j)
        hb = _bath_block_hamiltonian(p, jm, two_j)
        vals, vecs = np.linalg.eigh(0.5 * (hb + hb.conj().T))
        emin = float(vals[0]) if emin is None else min(emin, float(vals[0]))
        raw.append((two_j, vals, vecs))
    blocks = []
    z = 0.0
    for two_j, vals, vecs in raw:
        w = (vecs * np.exp(-beta * (vals - emin))) @ vecs.conj().T
        w = w * float(multiplicity(p.n_bath, two_j))
        z += float(np.trace(w).real)
        blocks.append((two_j, w))
    return [(two_j, w / z) for two_j, w in blocks]


def central_spin_jstar_block(p: CentralSpinParams) -> QSOModel:
    """Reduced model on the maximal angular-momentum block with the bath
    started one flip below the top ladder state (entangled single-excitation
    initialisation)."""
    blocks = reduced_block_model(p)
    top = blocks[0]
    assert top.two_j == p.n_bath
    dim_b = top.two_j + 1
    ket_sys = np.array([1.0, 0.0], dtype=complex)
    ket_bath = np.zeros(dim_b, dtype=complex)
    ket_bath[dim_b - 2] = 1.0          # m = j* - 1
    rho0 = projector(np.kron(ket_sys, ket_bath))
    gen = LindbladGenerator(top.hamiltonian, top.noise_ops)
    out = OutputMap(ops=top.outputs, labels=("sx1", "sy1", "sz1"), physical=True)
    return QSOModel(generator=gen, output=out, initial_set=(rho0,))


def wstate_expected_reduced(p: CentralSpinParams) -> tuple[Array, Array]:
    """Closed-form three-level reduced model for the single-excitation
    initialisation: basis (absorbing state; |0, j*-1>, |1, j*>).

    Returns (hamiltonian, noise operator) on C^3.
    """
    if p.ax != p.ay:
        raise ValueError("closed form needs ax == ay")
    if p.dissipation is None or p.dissipation[0] != "collective":
        raise ValueError("closed form needs collective dissipation")
    nb = p.n_bath
    a = p.ax
    lam = p.dissipation[1]
    jstar = nb / 2.0
    mstar = jstar - 1.0
    h = np.zeros((3, 3), dtype=complex)
    h[1, 1] = 0.5 * p.omega1 + 0.5 * p.az * mstar
    h[2, 2] = -0.5 * p.omega1 - 0.5 * p.az * jstar
    h[1, 2] = h[2, 1] = 0.5 * a * math.sqrt(nb)
    l_op = np.zeros((3, 3), dtype=complex)
    l_op[0, 1] = lam * math.sqrt(nb)
    return h, l_op


# ---------------------------------------------------------------------------
# Single-axis central spin (coupling and bath field along z)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SingleAxisParams:
    """Single-axis central-spin model: the system couples to the bath along
    one axis only (taken as z) and the bath field is along the same axis.

    ``omega1`` is the transverse system field, ``eta`` the field along the
    coupling axis.  ``dissipation`` is None, ("local_z", rate) or
    ("collective_z", rate); dephasing along the coupling axis leaves the
    observable space untouched.
    """

    n_spins: int
    omega1: float = 0.0
    eta: float = 0.0
    coupling: float = 1.0
    bath_mu: float = 0.0
    dissipation: tuple | None = None

    @property
    def n_bath(self) -> int:
        return self.n_spins - 1


def build_single_axis(p: SingleAxisParams) -> QSOModel:
    n = p.n_spins
    check_cap(2 ** n)
    bath = range(2, n + 1)
    jz = collective_j("z", n, bath)
    h = 0.5 * (p.omega1 * pauli_at("x", 1, n) + p.eta * pauli_at("z", 1, n))
    h = h + 0.5 * p.bath_mu * jz + 0.5 * p.coupling * pauli_at("z", 1, n) @ jz
    noise: tuple = ()
    if p.dissipation is not None:
        kind, rate = p.dissipation
        if kind == "collective_z":
            noise = (rate * jz,)
        elif kind == "local_z":
            noise = tuple(rate * pauli_at("z", k, n) for k in bath)
        else:
            raise ValueError(f"unknown dissipation kind {kind!r}")
    gen = LindbladGenerator(h, noise)
    out = OutputMap(
        ops=(np.eye(2 ** n, dtype=complex),) + tuple(pauli_at(u, 1, n) for u in "xyz"),
        labels=("one", "sx1", "sy1", "sz1"), physical=True)
    return QSOModel(generator=gen, output=out)


# ---------------------------------------------------------------------------
# Boundary-driven XXZ chain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class XXZParams:
    n_spins: int
    gamma: float = 1.0
    delta: float = 0.5
    kappa: float = 1.2
    mu_drive: float = 0.1

    def __post_init__(self):
        if self.n_spins < 2:
            raise ValueError("chain needs at least two spins")
        if self.kappa <= 0 or not 0 <= self.mu_drive <= 1:
            raise ValueError("need kappa > 0 and 0 <= mu_drive <= 1")

    @property
    def alpha(self) -> float:
        return self.kappa * (1.0 - self.mu_drive)

    @property
    def beta(self) -> float:
        return self.kappa * (1.0 + self.mu_drive)


def build_xxz(p: XXZParams) -> QSOModel:
    """Open-boundary XXZ chain with boundary gain/loss driving; outputs are
    the local magnetisations and the bond spin currents."""
    n = p.n_spins
    check_cap(2 ** n)
    h = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for j in range(1, n):
        h += p.gamma * (pauli_at("x", j, n) @ pauli_at("x", j + 1, n)
                        + pauli_at("y", j, n) @ pauli_at("y", j + 1, n)
                        + p.delta * pauli_at("z", j, n) @ pauli_at("z", j + 1, n))
    noise = (
        math.sqrt(p.alpha) * site_op(SIGMA["+"], 1, n),
        math.sqrt(p.beta) * site_op(SIGMA["-"], 1, n),
        math.sqrt(p.beta) * site_op(SIGMA["+"], n, n),
        math.sqrt(p.alpha) * site_op(SIGMA["-"], n, n),
    )
    ops = [pauli_at("z", j, n) for j in range(1, n + 1)]
    labels = [f"sz{j}" for j in range(1, n + 1)]
    for j in range(1, n):
        ops.append(pauli_at("x", j, n) @ pauli_at("y", j + 1, n)
                   - pauli_at("y", j, n) @ pauli_at("x", j + 1, n))
        labels.append(f"J{j}")
    gen = LindbladGenerator(h, noise)
    return QSOModel(generator=gen, output=OutputMap(ops=tuple(ops), labels=tuple(labels),
                                                    physical=True))


def total_magnetization(n: int) -> Array:
    return collective_j("z", n, range(1, n + 1))


# ---------------------------------------------------------------------------
# Three-qubit noiseless-subsystem code
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NSCodeParams:
    """Exchange Hamiltonian with anisotropy plus collective and local dephasing."""

    gamma_12: float = 1.0
    gamma_23: float = 1.0
    gamma_13: float = 0.0
    delta: float = 1.0
    kappa_x: float = 0.0
    kappa_y: float = 0.0
    kappa_z: float = 0.0
    gamma_local: tuple[float, float, float] = (0.0, 0.0, 0.0)


def _exchange(j: int, k: int) -> Array:
    acc = np.zeros((8, 8), dtype=complex)
    for u in "xyz":
        acc += pauli_at(u, j, 3) @ pauli_at(u, k, 3)
    return acc


def ns_code_observables() -> tuple[Array, Array, Array, Array]:
    s12, s23, s31 = _exchange(1, 2), _exchange(2, 3), _exchange(3, 1)
    p_half = 0.5 * (np.eye(8, dtype=complex) - (s12 + s23 + s31) / 3.0)
    c0 = p_half
    cx = 0.5 * (np.eye(8) + s12) @ p_half
    cy = (math.sqrt(3) / 6.0) * (s23 - s31) @ p_half
    cz = -1j * cx @ cy
    return c0, cx, cy, cz


def ns_logical_kets() -> tuple[Array, Array]:
    """Logical |0> and |1> in the m = +1/2 multiplicity sector."""
    w = np.exp(2j * math.pi / 3.0)
    k001, k010, k100 = basis_state("001"), basis_state("010"), basis_state("100")
    zero = (k001 + w * k010 + w ** 2 * k100) / math.sqrt(3)
    one = (k001 + w ** 2 * k010 + w * k100) / math.sqrt(3)
    return zero, one


def build_ns_code(p: NSCodeParams) -> QSOModel:
    pairs = {(1, 2): p.gamma_12, (2, 3): p.gamma_23, (1, 3): p.gamma_13}
    h = np.zeros((8, 8), dtype=complex)
    for (j, k), g in pairs.items():
        h += g * (_exchange(j, k)
                  + (p.delta - 1.0) * pauli_at("z", j, 3) @ pauli_at("z", k, 3))
    noise = []
    for u, rate in zip("xyz", (p.kappa_x, p.kappa_y, p.kappa_z)):
        if rate:
            noise.append(rate * collective_j(u, 3, (1, 2, 3)))
    for j, rate in enumerate(p.gamma_local, start=1):
        if rate:
            noise.append(rate * pauli_at("z", j, 3))
    c0, cx, cy, cz = ns_code_observables()
    out = OutputMap(ops=(c0, cx, cy, cz), labels=("C0", "Cx", "Cy", "Cz"), physical=True)
    zero, _ = ns_logical_kets()
    gen = LindbladGenerator(h, tuple(noise))
    return QSOModel(generator=gen, output=out, initial_set=(projector(zero),))


def logical_bloch(y: dict[str, complex]) -> Array:
    """Reconstruct the 2x2 logical state from the four code-observable outputs."""
    tau = np.zeros((2, 2), dtype=complex)
    for q, lab in zip("0xyz", ("C0", "Cx", "Cy", "Cz")):
        tau += 0.5 * y[lab] * SIGMA[q if q != "0" else "0"]
    return tau


# ---------------------------------------------------------------------------
# Reference dimensions
# ---------------------------------------------------------------------------

def analytic_dims(kind: str, n: int) -> dict:
    """Closed-form reference dimensions for the benchmark families."""
    if kind == "central_spin":
        nb = n - 1
        return {
            "commutant_dim": 2 * n * (n + 1) * (n + 2) // 3,
            "largest_block": 4 * n * n,
            "block_dims": [2 * (two_j + 1) for two_j in bath_two_j_values(nb)],
            "multiplicities": {two_j: multiplicity(nb, two_j)
                               for two_j in bath_two_j_values(nb)},
        }
    if kind == "xxz":
        blocks = [math.comb(n, k) for k in range(n + 1)]
        return {
            "output_algebra_dim": math.comb(2 * n, n),
            "commutant_dim": math.comb(2 * n, n),
            "blocks": blocks,
            "largest_block": max(blocks) ** 2,
        }
    if kind == "single_axis":
        return {"observable_dim": 2 * n + 2, "output_algebra_dim": 4 * n}
    if kind == "ns_code":
        return {"case_i": 4, "case_ii": 9, "case_iii": 9, "case_iv": 16}
    raise ValueError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# Block-parallel propagation
# ---------------------------------------------------------------------------

class BlockCouplingError(RuntimeError):
    """Raised when a generator couples blocks that were declared independent."""


def block_structure_defect(s: Array, block_dims: Sequence[int]) -> float:
    """Relative norm of the generator component mapping the block-diagonal
    sector outside itself."""
    m = int(round(math.sqrt(s.shape[0])))
    if sum(block_dims) != m:
        raise ValueError("block dimensions do not sum to the space dimension")
    mask = np.zeros((m, m))
    off = 0
    for d in block_dims:
        mask[off:off + d, off:off + d] = 1.0
        off += d
    inside = vectorize(mask) > 0.5
    sub = s[np.ix_(~inside, inside)]
    denom = max(float(np.linalg.norm(s, 2)), 1e-300)
    return float(np.linalg.norm(sub, 2)) / denom


def split_block_generators(s: Array, block_dims: Sequence[int],
                           tol: float = 1e-10) -> list[Array]:
    """Per-block superoperators of a verified block-diagonal generator."""
    defect = block_structure_defect(s, block_dims)
    if defect > tol:
        raise BlockCouplingError(
            f"cross-block coupling {defect:.3e} exceeds {tol:.1e}; "
            f"use the monolithic propagator")
    m = int(round(math.sqrt(s.shape[0])))
    out = []
    off = 0
    for d in block_dims:
        idx = []
        for col in range(off, off + d):
            for row in range(off, off + d):
                idx.append(col * m + row)
        idx = np.asarray(idx)
        out.append(s[np.ix_(idx, idx)])
        off += d
    return out


def block_parallel_evolve(block_hams: Sequence[Array],
                          block_noises: Sequence[Sequence[Array]],
                          rho_blocks: Sequence[Array],
                          out_blocks: Sequence[Sequence[Array]],
                          labels: Sequence[str],
                          times: Sequence[float]) -> list[dict[str, complex]]:
    """Propagate independent blocks and sum their output contributions.

    Hamiltonian-only blocks use eigendecomposition (no superoperator is ever
    formed, so very large single blocks remain cheap); dissipative blocks use
    the dense block superoperator.
    """
    times = np.asarray(times, dtype=float)
    results = [dict((lab, 0.0 + 0j) for lab in labels) for _ in times]
    for h, noises, rho0, outs in zip(block_hams, block_noises, rho_blocks, out_blocks):
        if len(noises) == 0:
            vals, vecs = np.linalg.eigh(0.5 * (h + h.conj().T))
            rho_v = vecs.conj().T @ rho0 @ vecs
            for it, t in enumerate(times):
                phase = np.exp(-1j * vals * t)
                rho_t = vecs @ (np.outer(phase, phase.conj()) * rho_v) @ vecs.conj().T
                for lab, o in zip(labels, outs):
                    results[it][lab] += np.vdot(o, rho_t)
        else:
            from .generator import assemble
            gen = LindbladGenerator(h, tuple(noises))
            s = assemble(gen)
            v = vectorize(rho0)
            prev = 0.0
            cache: dict[float, Array] = {}
            for it, t in enumerate(times):
                dt = t - prev
                if dt > 0:
                    key = round(dt, 15)
                    if key not in cache:
                        cache[key] = expm_super(s, dt)
                    v = cache[key] @ v
                prev = t
                rho_t = unvectorize(v)
                for lab, o in zip(labels, outs):
                    results[it][lab] += np.vdot(o, rho_t)
    return results
