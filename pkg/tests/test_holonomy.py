import math

import numpy as np
import pytest

from geomode import coupledmode as cm
from geomode import fock
from geomode import holonomy as hol
from geomode.fock import OccupationState, ParticleType, enumerate_basis, vacuum_expectation

BOSON = ParticleType.boson()
FERMION = ParticleType.fermion()
DIST_AB = ParticleType.distinguishable("a", "b")


@pytest.fixture(scope="module")
def system():
    return cm.jx4_structure(cm.IDEAL_LENGTH_MM)


@pytest.fixture(scope="module")
def boson_basis():
    return enumerate_basis(4, 2, BOSON)


@pytest.fixture(scope="module")
def dist_basis():
    return enumerate_basis(4, 2, DIST_AB)


def sub_boson(basis, *occs):
    return hol.subspace_from_states(basis, occs)


def random_hermitian(n, rng):
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (m + m.conj().T) / 2


def oracle_k_element(bra, ket, h, particle):
    """<bra|H|ket> through the vacuum-expectation reduction."""
    modes = h.shape[0]
    e = np.eye(modes)
    norm = math.sqrt(bra.norm_factorial() * ket.norm_factorial())
    if particle.kind == "distinguishable":
        labels = particle.labels
        bra_ops = [(e[m], False, lab) for lab, m in zip(labels[::-1], bra.occupations[::-1])]
        ket_ops = [(e[m], True, lab) for lab, m in zip(labels, ket.occupations)]
        total = 0.0
        for lab in labels:
            for j in range(modes):
                for k in range(modes):
                    if h[j, k] == 0:
                        continue
                    seq = bra_ops + [(e[j], True, lab), (e[k], False, lab)] + ket_ops
                    total += h[j, k] * vacuum_expectation(seq, particle)
        return total / norm
    bra_ops = [(e[m], False) for m in reversed(bra.mode_list())]
    ket_ops = [(e[m], True) for m in ket.mode_list()]
    total = 0.0
    for j in range(modes):
        for k in range(modes):
            if h[j, k] == 0:
                continue
            seq = bra_ops + [(e[j], True), (e[k], False)] + ket_ops
            total += h[j, k] * vacuum_expectation(seq, particle)
    return total / norm


# --------------------------------------------------------- mode coupling


def test_mode_coupling_commuting_system_is_envelope_times_pattern(system):
    for z in (0.0, 20.0, 45.0, 84.0):
        j = hol.mode_coupling(system, z, hol.HEISENBERG)
        expected = system.envelope.value(z) * system.pattern.matrix
        assert np.max(np.abs(j - expected)) < 1e-10


def test_mode_coupling_zero_where_envelope_vanishes():
    sys_ = cm.CoupledModeSystem(
        cm.jx_pattern(4),
        cm.Envelope((cm.CosineRampSegment(0.0, 0.1, 10.0),)),
    )
    j = hol.mode_coupling(sys_, 0.0, hol.HEISENBERG)
    assert np.max(np.abs(j)) < 1e-12


def test_mode_coupling_zero_detuning_diagonal(system):
    j = hol.mode_coupling(system, 40.0, hol.HEISENBERG)
    assert np.max(np.abs(np.diag(j))) < 1e-10


def test_mode_coupling_family_independent(system):
    j1 = hol.mode_coupling(system, 37.0, hol.HEISENBERG)
    j2 = hol.mode_coupling(system, 37.0, hol.PHASE_ADJUSTED)
    assert np.max(np.abs(j1 - j2)) < 1e-12


# -------------------------------------------------- K closed forms/oracle


def _random_states(rng, modes, particle, count):
    basis = enumerate_basis(modes, 2, particle)
    idx = rng.integers(0, basis.size, size=(count, 2))
    return [(basis.states[i], basis.states[j]) for i, j in idx]


@pytest.mark.parametrize("particle", [BOSON, FERMION, DIST_AB])
def test_k_two_particle_matches_oracle(particle):
    rng = np.random.default_rng(101)
    pairs = _random_states(rng, 4, particle, 200)
    for bra, ket in pairs:
        h = random_hermitian(4, rng)
        got = hol.k_two_particle(bra, ket, h, particle)
        want = oracle_k_element(bra, ket, h, particle)
        assert abs(got - want) <= 1e-9 * max(1.0, abs(want))


def test_k_two_particle_rejects_fermion_double_occupation():
    st = OccupationState(BOSON, 4, (2, 0, 0, 0))
    with pytest.raises(ValueError):
        hol.k_two_particle(st, st, np.eye(4), FERMION)


def test_k_two_particle_examples(boson_basis):
    # zero-detuning J supported on nearest neighbours only
    j = cm.jx_pattern(4).matrix
    s0200 = boson_basis.state((0, 2, 0, 0))
    s0020 = boson_basis.state((0, 0, 2, 0))
    s0110 = boson_basis.state((0, 1, 1, 0))
    # (2,2) vs (2,3): proportional to J_23
    v = hol.k_two_particle(s0200, s0110, j, BOSON)
    assert abs(v) > 0.5  # inner-mode coupling shows up
    assert v == pytest.approx(math.sqrt(2) * j[1, 2])
    # (2,2) vs (3,3) with zero detunings -> 0
    assert hol.k_two_particle(s0200, s0020, j, BOSON) == 0
    # all four modes distinct, J has no coupling between untouched pairs
    s1010 = boson_basis.state((1, 0, 1, 0))
    s0101 = boson_basis.state((0, 1, 0, 1))
    jd = np.zeros((4, 4))
    jd[0, 2] = jd[2, 0] = 0.7  # couples modes sharing no state pair
    assert hol.k_two_particle(s1010, s0101, jd, BOSON) == 0


def test_k_two_particle_distinguishable_all_modes_differ(dist_basis):
    j = cm.jx_pattern(4).matrix
    bra = dist_basis.state((0, 2))  # a1 b3
    ket = dist_basis.state((1, 0))  # a2 b1
    assert hol.k_two_particle(bra, ket, j, DIST_AB) == 0


def test_k_n_boson_reduces_to_single_particle():
    rng = np.random.default_rng(5)
    j = random_hermitian(4, rng)
    for k in range(4):
        for l in range(4):
            assert hol.k_n_boson([k], [l], j) == pytest.approx(j[k, l])


def test_k_n_boson_matches_two_particle_form(boson_basis):
    rng = np.random.default_rng(7)
    for _ in range(200):
        j = random_hermitian(4, rng)
        bra = boson_basis.states[rng.integers(0, 10)]
        ket = boson_basis.states[rng.integers(0, 10)]
        a = hol.k_n_boson(bra.mode_list(), ket.mode_list(), j)
        b = hol.k_two_particle(bra, ket, j, BOSON)
        assert abs(a - b) <= 1e-12 * max(1.0, abs(b))


def test_k_n_boson_three_particles_matches_lifted_oracle():
    rng = np.random.default_rng(11)
    basis = enumerate_basis(4, 3, BOSON)
    for _ in range(200):
        j = random_hermitian(4, rng)
        lifted = fock.lift_hamiltonian(j, basis)
        bi, ki = rng.integers(0, basis.size, size=2)
        bra, ket = basis.states[bi], basis.states[ki]
        got = hol.k_n_boson(bra.mode_list(), ket.mode_list(), j)
        want = lifted[bi, ki]
        assert abs(got - want) <= 1e-9 * max(1.0, abs(want))


def test_k_n_boson_vacuum_energy_term():
    # nonzero <H> enters through -(N-1)<H> on permutation-matched states
    j = np.diag([0.0, 0.0, 0.0, 0.0])
    got = hol.k_n_boson([0, 1], [0, 1], j, h_vac=0.25)
    assert got == pytest.approx(-0.25)


def test_k_n_boson_length_mismatch():
    with pytest.raises(ValueError):
        hol.k_n_boson([0, 1], [0], np.eye(4))


# ------------------------------------------------------------- K matrices


def test_k_matrix_outer_pair_vanishes(system):
    b1 = enumerate_basis(4, 1, BOSON)
    sub = hol.subspace_from_states(b1, [(1, 0, 0, 0), (0, 0, 0, 1)])
    k = hol.k_matrix(sub, system)
    assert k.max_abs < hol.holonomic_tolerance(system)


def test_k_matrix_inner_pair_is_coupling(system):
    b1 = enumerate_basis(4, 1, BOSON)
    sub = hol.subspace_from_states(b1, [(0, 1, 0, 0), (0, 0, 1, 0)])
    k = hol.k_matrix(sub, system)
    # off-diagonal element is Omega(z) * kappa_23 = Omega(z)
    mid = len(k.grid) // 2
    omega = system.envelope.value(k.grid[mid])
    assert abs(k.matrices[mid][0, 1]) == pytest.approx(omega, rel=1e-9)


def test_k_matrix_bunched_inner_pair_vanishes(system, boson_basis):
    sub = sub_boson(boson_basis, (0, 2, 0, 0), (0, 0, 2, 0))
    k = hol.k_matrix(sub, system)
    assert k.max_abs < hol.holonomic_tolerance(system)


@pytest.mark.parametrize("members", [
    [(0, 2, 0, 0), (0, 0, 2, 0), (0, 1, 1, 0)],
    [(2, 0, 0, 0), (0, 0, 0, 2), (1, 0, 0, 1)],
    [(1, 1, 0, 0), (0, 0, 1, 1)],
])
def test_k_matrix_closed_form_matches_lifted(system, boson_basis, members):
    sub = sub_boson(boson_basis, *members)
    grid = np.linspace(0.0, system.length, 41)
    k1 = hol.k_matrix(sub, system, grid, method="closed_form")
    k2 = hol.k_matrix(sub, system, grid, method="lifted")
    assert np.max(np.abs(k1.matrices - k2.matrices)) < 1e-8


def test_k_matrix_hermitian(system, boson_basis):
    sub = sub_boson(boson_basis, (0, 2, 0, 0), (0, 0, 2, 0), (0, 1, 1, 0))
    k = hol.k_matrix(sub, system)
    assert k.max_hermiticity_residual < 1e-10


def test_k_matrix_distinguishable_matches_lifted(system, dist_basis):
    sub = hol.subspace_from_states(dist_basis, [(0, 2), (1, 0), (2, 3), (3, 1)])
    grid = np.linspace(0.0, system.length, 21)
    k1 = hol.k_matrix(sub, system, grid, method="closed_form")
    k2 = hol.k_matrix(sub, system, grid, method="lifted")
    assert np.max(np.abs(k1.matrices - k2.matrices)) < 1e-8
    assert k1.max_abs < hol.holonomic_tolerance(system)


# -------------------------------------------------------------- cyclicity


def test_single_photon_cyclic_subspaces(system):
    b1 = enumerate_basis(4, 1, BOSON)
    outer = hol.subspace_from_states(b1, [(1, 0, 0, 0), (0, 0, 0, 1)])
    res = hol.is_cyclic(outer, system)
    assert res.cyclic
    assert res.permutation == ((1, pytest.approx(1j, abs=1e-8)),
                               (0, pytest.approx(1j, abs=1e-8)))
    mixed = hol.subspace_from_states(b1, [(1, 0, 0, 0), (0, 1, 0, 0)])
    assert not hol.is_cyclic(mixed, system)


def test_full_basis_is_cyclic(system, boson_basis):
    sub = hol.subspace_from_states(boson_basis, [s.occupations for s in boson_basis.states])
    assert hol.is_cyclic(sub, system).cyclic


# -------------------------------------------------------------- holonomies


def test_single_photon_holonomy(system):
    b1 = enumerate_basis(4, 1, BOSON)
    sub = hol.subspace_from_states(b1, [(1, 0, 0, 0), (0, 0, 0, 1)])
    h = hol.extract_holonomy(sub, system)
    expected = np.array([[0, 1j], [1j, 0]])
    assert np.max(np.abs(h.matrix - expected)) < 1e-8
    assert h.classification == hol.NON_SCALAR


def test_three_state_bunched_holonomy(system, boson_basis):
    sub = sub_boson(boson_basis, (2, 0, 0, 0), (1, 0, 0, 1), (0, 0, 0, 2))
    h = hol.extract_holonomy(sub, system)
    expected = -np.fliplr(np.eye(3))
    assert np.max(np.abs(h.matrix - expected)) < 1e-8
    assert h.classification == hol.NON_SCALAR


@pytest.mark.parametrize("members", [
    [(2, 0, 0, 0), (0, 0, 0, 2)],
    [(0, 2, 0, 0), (0, 0, 2, 0)],
])
def test_bunched_pair_holonomies(system, boson_basis, members):
    sub = sub_boson(boson_basis, *members)
    h = hol.extract_holonomy(sub, system)
    assert np.max(np.abs(h.matrix + np.fliplr(np.eye(2)))) < 1e-8


def test_distinguishable_four_state_holonomy(system, dist_basis):
    sub = hol.subspace_from_states(dist_basis, [(0, 2), (1, 0), (2, 3), (3, 1)])
    h = hol.extract_holonomy(sub, system)
    assert np.max(np.abs(h.matrix + np.fliplr(np.eye(4)))) < 1e-8
    assert h.classification == hol.NON_SCALAR


def test_swap_pair_holonomy_is_scalar(system, boson_basis):
    sub = sub_boson(boson_basis, (1, 0, 0, 1), (0, 1, 1, 0))
    h = hol.extract_holonomy(sub, system)
    assert np.max(np.abs(h.matrix + np.eye(2))) < 1e-8
    assert h.classification == hol.SCALAR


def test_extract_rejects_non_cyclic(system, boson_basis):
    sub = sub_boson(boson_basis, (2, 0, 0, 0), (0, 2, 0, 0))
    with pytest.raises(hol.NotCyclicError):
        hol.extract_holonomy(sub, system)


def test_extract_rejects_non_holonomic(system, boson_basis):
    sub = sub_boson(boson_basis, (0, 2, 0, 0), (0, 0, 2, 0), (0, 1, 1, 0))
    with pytest.raises(hol.NotHolonomicError) as err:
        hol.extract_holonomy(sub, system)
    assert err.value.max_k > 1e-3


def test_classification_invariances(system, boson_basis):
    sub = sub_boson(boson_basis, (1, 0, 0, 1), (0, 1, 1, 0))
    h = hol.extract_holonomy(sub, system)
    # invariant under global phase and under member reordering
    assert hol.classify_unitary(np.exp(0.7j) * h.matrix) == hol.SCALAR
    sub_r = sub_boson(boson_basis, (0, 1, 1, 0), (1, 0, 0, 1))
    assert hol.extract_holonomy(sub_r, system).classification == hol.SCALAR


# ------------------------------------------------------------ gauge field


def test_gauge_field_outer_pair_phase_adjusted(system):
    b1 = enumerate_basis(4, 1, BOSON)
    sub = hol.subspace_from_states(b1, [(1, 0, 0, 0), (0, 0, 0, 1)])
    grid = np.linspace(5.0, system.length - 5.0, 41)
    a = hol.gauge_field(sub, system, grid, hol.PHASE_ADJUSTED)
    omegas = np.array([system.envelope.value(z) for z in grid])
    expected = 0.5 * omegas[:, None, None] * np.eye(2)
    scale = max(float(np.max(omegas)), 1e-12)
    assert np.max(np.abs(a.matrices - expected)) < 1e-5 * scale


@pytest.mark.parametrize("members,factor", [
    ([(2, 0, 0, 0), (1, 0, 0, 1), (0, 0, 0, 2)], 1.0),
    ([(2, 0, 0, 0), (0, 0, 0, 2)], 1.0),
    ([(0, 2, 0, 0), (0, 0, 2, 0)], 1.0),
])
def test_gauge_field_two_particle_identity(system, boson_basis, members, factor):
    sub = sub_boson(boson_basis, *members)
    grid = np.linspace(5.0, system.length - 5.0, 21)
    a = hol.gauge_field(sub, system, grid, hol.PHASE_ADJUSTED)
    omegas = np.array([system.envelope.value(z) for z in grid])
    expected = factor * omegas[:, None, None] * np.eye(sub.dimension)
    assert np.max(np.abs(a.matrices - expected)) < 1e-5 * float(np.max(omegas))


def test_gauge_field_distinguishable_identity(system, dist_basis):
    sub = hol.subspace_from_states(dist_basis, [(0, 2), (1, 0), (2, 3), (3, 1)])
    grid = np.linspace(5.0, system.length - 5.0, 21)
    a = hol.gauge_field(sub, system, grid, hol.PHASE_ADJUSTED)
    omegas = np.array([system.envelope.value(z) for z in grid])
    expected = omegas[:, None, None] * np.eye(4)
    assert np.max(np.abs(a.matrices - expected)) < 1e-5 * float(np.max(omegas))


def test_gauge_field_heisenberg_hermitian(system, boson_basis):
    sub = sub_boson(boson_basis, (2, 0, 0, 0), (0, 0, 0, 2))
    grid = np.linspace(5.0, system.length - 5.0, 21)
    a = hol.gauge_field(sub, system, grid, hol.HEISENBERG)
    assert a.max_hermiticity_residual < 1e-6


# --------------------------------------------- two-particle gauge relation


def _smooth_family(rng, modes):
    g1 = random_hermitian(modes, rng)
    g2 = random_hermitian(modes, rng)

    def phi(t):
        lam, v = np.linalg.eigh(g1 + t * g2)
        w = (v * np.exp(-1j * t * lam)) @ v.conj().T
        return w

    return phi


@pytest.mark.parametrize("particle", [BOSON, FERMION, DIST_AB])
def test_gauge_relation_matches_finite_difference(particle):
    rng = np.random.default_rng(211)
    basis = enumerate_basis(4, 2, particle)
    h_fd = 1e-5
    checks = 0
    for trial in range(50):
        phi = _smooth_family(rng, 4)
        t0 = float(rng.uniform(0.2, 1.2))
        f0, fp, fm = phi(t0), phi(t0 + h_fd), phi(t0 - h_fd)
        a_single = 1j * f0.conj().T @ ((fp - fm) / (2 * h_fd))
        lift0 = fock.lift_unitary(f0, basis)
        liftp = fock.lift_unitary_batch(np.stack([fp, fm]), basis)
        a_two = 1j * lift0.conj().T @ ((liftp[0] - liftp[1]) / (2 * h_fd))
        bi, ki = rng.integers(0, basis.size, size=2)
        bra, ket = basis.states[bi], basis.states[ki]
        got = hol.gauge_relation_two_particle(a_single, bra, ket, particle)
        want = a_two[bi, ki]
        assert abs(got - want) < 1e-6 * max(1.0, abs(want))
        checks += 1
    assert checks == 50


def test_gauge_relation_all_modes_distinct_is_zero():
    basis = enumerate_basis(4, 2, BOSON)
    a = np.ones((4, 4))
    bra = basis.state((1, 1, 0, 0))
    ket = basis.state((0, 0, 1, 1))
    assert hol.gauge_relation_two_particle(a, bra, ket, BOSON) == 0


def test_gauge_relation_bunched_element():
    basis = enumerate_basis(4, 2, BOSON)
    a = 0.5 * np.eye(4)  # single-particle gauge field Omega/2 with Omega=1
    bra = ket = basis.state((2, 0, 0, 0))
    assert hol.gauge_relation_two_particle(a, bra, ket, BOSON) == pytest.approx(1.0)


# --------------------------------------------------- Eq.-style reconstruction


@pytest.mark.parametrize("members", [
    [(1, 0, 0, 0), (0, 0, 0, 1)],
    [(2, 0, 0, 0), (1, 0, 0, 1), (0, 0, 0, 2)],
    [(0, 2, 0, 0), (0, 0, 2, 0)],
    [(1, 0, 0, 1), (0, 1, 1, 0)],
])
def test_gauge_reconstruction_matches_holonomy(system, members):
    n = sum(members[0])
    basis = enumerate_basis(4, n, BOSON)
    sub = hol.subspace_from_states(basis, members)
    direct = hol.extract_holonomy(sub, system).matrix
    rebuilt = hol.holonomy_from_gauge_field(sub, system, steps=2000)
    assert np.max(np.abs(rebuilt - direct)) < 1e-5


# --------------------------------------------- Heisenberg-picture condition


def test_heisenberg_condition_examples():
    pattern = cm.jx_pattern(4)
    e = np.eye(4)
    assert hol.heisenberg_condition([e[0], e[3]], pattern)
    assert not hol.heisenberg_condition([e[1], e[2]], pattern)
    assert hol.heisenberg_condition([e[2]], pattern)  # zero detuning


def test_heisenberg_condition_matches_double_commutator_oracle():
    # scalar reduction equals <0| phi_c [H, phi_b^dag] |0> from ladder algebra
    rng = np.random.default_rng(31)
    pattern = cm.CouplingPattern(random_hermitian(4, rng))
    q, _ = np.linalg.qr(rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2)))
    vecs = [q[:, 0], q[:, 1]]
    h = pattern.matrix
    e = np.eye(4)
    for c in vecs:
        for b in vecs:
            scalar = np.vdot(c, h @ b)
            total = 0.0
            for j in range(4):
                for k in range(4):
                    seq = [(c.conj(), False), (e[j], True), (e[k], False), (b, True)]
                    total += h[j, k] * vacuum_expectation(seq, BOSON)
            assert abs(scalar - total) < 1e-10


def test_heisenberg_condition_agrees_with_j_nullity():
    rng = np.random.default_rng(37)
    pattern = cm.jx_pattern(4)
    hits = 0
    for _ in range(100):
        k = int(rng.integers(1, 4))
        q, _ = np.linalg.qr(rng.normal(size=(4, k)) + 1j * rng.normal(size=(4, k)))
        vecs = [q[:, i] for i in range(k)]
        j = np.array([[np.vdot(a, pattern.matrix @ b) for b in vecs] for a in vecs])
        null = bool(np.max(np.abs(j)) < 1e-10)
        assert hol.heisenberg_condition(vecs, pattern) == null
        hits += 1
    assert hits == 100


def test_heisenberg_condition_implies_vanishing_k(system):
    # the {1,4} mode pair passes, so every subspace built from those
    # modes has K = 0, for one and two particles
    e = np.eye(4)
    assert hol.heisenberg_condition([e[0], e[3]], system.pattern)
    b1 = enumerate_basis(4, 1, BOSON)
    b2 = enumerate_basis(4, 2, BOSON)
    subs = [
        hol.subspace_from_states(b1, [(1, 0, 0, 0), (0, 0, 0, 1)]),
        hol.subspace_from_states(b2, [(2, 0, 0, 0), (1, 0, 0, 1), (0, 0, 0, 2)]),
    ]
    for sub in subs:
        assert hol.k_matrix(sub, system).max_abs < hol.holonomic_tolerance(system)


# ------------------------------------------------------------------- JSON


def test_subspace_json_round_trip(boson_basis):
    doc = {"particle": "boson", "states": [[2, 0, 0, 0], [0, 0, 0, 2]]}
    sub = hol.subspace_from_json(doc)
    assert sub.dimension == 2
    assert sub.basis.modes == 4
    back = hol.subspace_to_json(sub)
    assert back["states"] == [[2, 0, 0, 0], [0, 0, 0, 2]]


def test_subspace_json_distinguishable():
    doc = {"particle": "distinguishable", "modes": 4,
           "states": [{"a": 1, "b": 3}, {"a": 2, "b": 1}]}
    sub = hol.subspace_from_json(doc)
    assert sub.members[0].occupations == (0, 2)
    assert hol.subspace_to_json(sub)["states"][0] == {"a": 1, "b": 3}


def test_subspace_rejects_duplicates(boson_basis):
    with pytest.raises(ValueError):
        sub_boson(boson_basis, (2, 0, 0, 0), (2, 0, 0, 0))
