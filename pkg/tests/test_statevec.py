"""State-vector core: construction, gates, projection, measurement, partial trace.

Oracles here are deliberately naive (explicit index loops over bit strings)
so they share no code path with the reshaped-tensor implementation.
"""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghz_teleport.bases import basis_ghz_triplet, basis_pi1_23_s4
from ghz_teleport.protocols import bell_basis, epr_initial_state, UnknownCoeffs
from ghz_teleport.statevec import (
    CNOT,
    H,
    I,
    X,
    Y,
    Z,
    DensityMatrix,
    Gate,
    Residual,
    StateVector,
    ZeroProbabilityOutcome,
    apply_controlled,
    apply_gate,
    basis_state,
    fidelity,
    inner,
    make_state,
    measure,
    phase_aligned_distance,
    phase_gate,
    project_all,
    project_residual,
    reduce,
    sample_outcome,
    tensor,
)

S = 1 / math.sqrt(2)


# -- brute-force oracles -----------------------------------------------------

def bits_of(index, n):
    return [(index >> (n - 1 - j)) & 1 for j in range(n)]


def index_of(bits):
    return int("".join(map(str, bits)), 2) if bits else 0


def oracle_apply(amps, n, matrix, targets):
    out = np.zeros_like(amps, dtype=complex)
    k = len(targets)
    for i in range(2 ** n):
        b = bits_of(i, n)
        col = index_of([b[t - 1] for t in targets])
        for row in range(2 ** k):
            nb = list(b)
            for pos, t in enumerate(targets):
                nb[t - 1] = (row >> (k - 1 - pos)) & 1
            out[index_of(nb)] += matrix[row, col] * amps[i]
    return out


def oracle_residual(amps, n, vec, measured):
    rest = [q for q in range(1, n + 1) if q not in measured]
    out = np.zeros(2 ** len(rest), dtype=complex)
    for i in range(2 ** n):
        b = bits_of(i, n)
        m = index_of([b[q - 1] for q in measured])
        r = index_of([b[q - 1] for q in rest])
        out[r] += np.conj(vec[m]) * amps[i]
    return out


def oracle_partial_trace(amps, n, keep):
    d = 2 ** len(keep)
    rho = np.zeros((d, d), dtype=complex)
    traced = [q for q in range(1, n + 1) if q not in keep]
    for i, j in itertools.product(range(2 ** n), repeat=2):
        bi, bj = bits_of(i, n), bits_of(j, n)
        if all(bi[q - 1] == bj[q - 1] for q in traced):
            rho[index_of([bi[q - 1] for q in keep]), index_of([bj[q - 1] for q in keep])] += amps[i] * np.conj(amps[j])
    return rho


def random_state(rng, n):
    z = rng.standard_normal(2 ** n) + 1j * rng.standard_normal(2 ** n)
    return StateVector(n, z / np.linalg.norm(z))


def random_unitary(rng, k):
    z = rng.standard_normal((2 ** k, 2 ** k)) + 1j * rng.standard_normal((2 ** k, 2 ** k))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / abs(np.diag(r)))


seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


# -- tests -----------------------------------------------------------------

class TestMakeState:
    def test_basis_state_zero(self):
        s = make_state(1, [1, 0])
        np.testing.assert_allclose(s.amps, [1, 0])

    def test_normalization_is_forced(self):
        s = make_state(2, [0, 1, 1, 0])
        np.testing.assert_allclose(s.amps, [0, S, S, 0], atol=1e-15)

    def test_ghz_literal(self):
        s = make_state(3, [1, 0, 0, 0, 0, 0, 0, 1])
        assert s.amps[0] == pytest.approx(S) and s.amps[7] == pytest.approx(S)

    def test_rejects_wrong_length(self):
        with pytest.raises(ValueError):
            make_state(2, [1, 0, 0])

    def test_rejects_zero_vector(self):
        with pytest.raises(ValueError):
            make_state(2, [0, 0, 0, 0])

    def test_state_vector_enforces_norm(self):
        with pytest.raises(ValueError):
            StateVector(1, np.array([1.0, 1.0]))

    @given(st.integers(1, 6), st.data())
    def test_bit_pattern_round_trip(self, n, data):
        i = data.draw(st.integers(0, 2 ** n - 1))
        bits = format(i, f"0{n}b")
        s = basis_state(bits)
        assert s.amplitude(bits) == 1
        assert int(np.argmax(abs(s.amps))) == index_of([int(b) for b in bits])

    def test_qubit_one_is_most_significant(self):
        assert basis_state("10000").amps[16] == 1


class TestTensor:
    def test_product_of_basis_states(self):
        assert fidelity(tensor(basis_state("0"), basis_state("1")), basis_state("01")) == pytest.approx(1)

    def test_psi_plus_with_ghz(self):
        psi = make_state(2, [0, 1, 1, 0])
        ghz = make_state(3, [1, 0, 0, 0, 0, 0, 0, 1])
        s = tensor(psi, ghz)
        nz = {format(i, "05b"): a for i, a in enumerate(s.amps) if abs(a) > 1e-12}
        assert set(nz) == {"01000", "01111", "10000", "10111"}
        np.testing.assert_allclose(list(nz.values()), [0.5] * 4)

    def test_basis_input_with_ghz(self):
        s = tensor(make_state(2, [0, 1, 0, 0]), make_state(3, [1, 0, 0, 0, 0, 0, 0, 1]))
        nz = s.amps[abs(s.amps) > 1e-12]
        np.testing.assert_allclose(nz, [S, S])

    def test_matches_explicit_index_loop(self):
        rng = np.random.default_rng(3)
        a, b = random_state(rng, 2), random_state(rng, 3)
        expect = np.array([a.amps[i >> 3] * b.amps[i & 7] for i in range(32)])
        np.testing.assert_allclose(tensor(a, b).amps, expect, atol=1e-14)


class TestApplyGate:
    def test_x_flips(self):
        assert apply_gate(basis_state("0"), X, [1]).amplitude("1") == pytest.approx(1)

    def test_hadamard_on_zero(self):
        np.testing.assert_allclose(apply_gate(basis_state("0"), H, [1]).amps, [S, S])

    def test_cnot_prepares_bell(self):
        s = apply_gate(basis_state("00"), H, [1])
        s = apply_gate(s, CNOT, [1, 2])
        np.testing.assert_allclose(s.amps, [S, 0, 0, S], atol=1e-15)

    def test_cnot_with_reversed_targets(self):
        s = apply_gate(basis_state("01"), CNOT, [2, 1])
        assert s.amplitude("11") == pytest.approx(1)

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(2, 5))
    def test_matches_index_oracle(self, seed, n):
        rng = np.random.default_rng(seed)
        state = random_state(rng, n)
        k = int(rng.integers(1, 3))
        targets = [int(t) + 1 for t in rng.permutation(n)[:k]]
        u = random_unitary(rng, k)
        got = apply_gate(state, Gate(u, "U"), targets).amps
        np.testing.assert_allclose(got, oracle_apply(state.amps, n, u, targets), atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(1, 5))
    def test_norm_preserved_and_dagger_inverts(self, seed, n):
        rng = np.random.default_rng(seed)
        state = random_state(rng, n)
        q = int(rng.integers(1, n + 1))
        g = Gate(random_unitary(rng, 1), "U")
        out = apply_gate(state, g, [q])
        assert np.linalg.norm(out.amps) == pytest.approx(1, abs=1e-10)
        np.testing.assert_allclose(apply_gate(out, g.dagger(), [q]).amps, state.amps, atol=1e-10)

    def test_rejects_bad_targets(self):
        with pytest.raises(ValueError):
            apply_gate(basis_state("00"), X, [3])
        with pytest.raises(ValueError):
            apply_gate(basis_state("00"), CNOT, [1, 1])
        with pytest.raises(ValueError):
            apply_gate(basis_state("00"), CNOT, [1])

    def test_gate_rejects_non_unitary(self):
        with pytest.raises(ValueError):
            Gate(np.array([[1, 1], [0, 1]]), "bad")

    def test_pauli_identities(self):
        for g in (X, Y, Z):
            np.testing.assert_allclose(g.matrix @ g.matrix, I.matrix, atol=1e-15)
        np.testing.assert_allclose(X.matrix @ Y.matrix, 1j * Z.matrix, atol=1e-15)
        np.testing.assert_allclose(phase_gate(math.pi).matrix, Z.matrix, atol=1e-15)


class TestApplyControlled:
    def test_matches_cnot(self):
        rng = np.random.default_rng(1)
        s = random_state(rng, 3)
        a = apply_controlled(s, X, [3], [1], "1")
        b = apply_gate(s, CNOT, [1, 3])
        np.testing.assert_allclose(a.amps, b.amps, atol=1e-14)

    def test_zero_pattern_control(self):
        s = apply_controlled(basis_state("001"), X, [1], [2, 3], "01")
        assert s.amplitude("101") == pytest.approx(1)
        s = apply_controlled(basis_state("011"), X, [1], [2, 3], "01")
        assert s.amplitude("011") == pytest.approx(1)

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            apply_controlled(basis_state("00"), X, [1], [1], "1")


class TestInner:
    def test_examples(self):
        zero, one = basis_state("0"), basis_state("1")
        plus = make_state(1, [1, 1])
        assert inner(zero, zero) == 1
        assert inner(zero, one) == 0
        assert inner(plus, one) == pytest.approx(S)

    def test_conjugate_linear_in_first_argument(self):
        a = make_state(1, [1, 1j])
        b = basis_state("1")
        assert inner(a, b) == pytest.approx(-1j * S)


class TestProjection:
    def test_project_single_qubit(self):
        r = project_residual(basis_state("01"), basis_state("0"), [1])
        np.testing.assert_allclose(r.amps, [0, 1])
        assert r.prob == pytest.approx(1)
        assert r.qubits == (2,)

    def test_pi_phi_outcome_on_epr_state(self):
        c = UnknownCoeffs(0.6, 0.8j)
        r = project_residual(epr_initial_state(c), basis_pi1_23_s4(0).vector(1), [1, 2, 3])
        assert r.prob == pytest.approx(1 / 8, abs=1e-12)
        # beta|00> + alpha|11>
        assert fidelity(r.normalized(), make_state(2, [c.beta, 0, 0, c.alpha])) == pytest.approx(1)

    def test_ghz_family_has_four_vanishing_projections(self):
        c = UnknownCoeffs(0.6, 0.8j)
        state = epr_initial_state(c)
        basis = basis_ghz_triplet()
        probs = []
        for k in range(1, 9):
            vec = basis.vector(k).amps
            probs.append(np.linalg.norm(oracle_residual(state.amps, 5, vec, [1, 2, 3])) ** 2)
        assert sum(p < 1e-12 for p in probs) == 4
        assert sum(probs) == pytest.approx(1)
        # the vanishing ones are the first two pairs of the family
        assert [p < 1e-12 for p in probs] == [True] * 4 + [False] * 4

    @settings(max_examples=25, deadline=None)
    @given(seeds)
    def test_project_all_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        state = random_state(rng, 4)
        measured = [int(q) + 1 for q in rng.permutation(4)[:2]]
        u = random_unitary(rng, 2)
        res, rest = project_all(state, u, measured)
        assert rest == tuple(q for q in range(1, 5) if q not in measured)
        for k in range(4):
            np.testing.assert_allclose(res[k], oracle_residual(state.amps, 4, u[k], measured), atol=1e-12)
        assert np.sum(abs(res) ** 2) == pytest.approx(1, abs=1e-10)

    def test_sparse_path_matches_dense(self):
        c = UnknownCoeffs(0.6, 0.8)
        state = epr_initial_state(c)
        basis = basis_pi1_23_s4(0.3)
        res, _ = project_all(state, basis, [1, 2, 3])
        for k in range(8):
            np.testing.assert_allclose(res[k], oracle_residual(state.amps, 5, basis.matrix[k], [1, 2, 3]), atol=1e-14)

    def test_residual_normalize_zero_raises(self):
        with pytest.raises(ZeroProbabilityOutcome):
            Residual(1, np.zeros(2), (2,)).normalized()


class TestMeasure:
    def test_bell_measurement_forced(self):
        m = measure(make_state(2, [1, 0, 0, 1]), bell_basis(), [1, 2], outcome=1)
        assert m.probability == pytest.approx(1)
        assert m.post_state.n_qubits == 0

    def test_uniform_on_epr_protocol(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            state = epr_initial_state(UnknownCoeffs.haar(rng))
            for k in range(1, 9):
                m = measure(state, basis_pi1_23_s4(0), [1, 2, 3], outcome=k)
                assert m.probability == pytest.approx(1 / 8, abs=1e-12)

    def test_zero_probability_branch_raises(self):
        with pytest.raises(ZeroProbabilityOutcome):
            measure(basis_state("00"), bell_basis(), [1, 2], outcome=3)

    def test_seed_is_reproducible(self):
        s = make_state(2, [1, 1, 1, 1])
        runs = [measure(s, np.eye(2), [1], seed=11).outcome for _ in range(3)]
        assert len(set(runs)) == 1

    def test_requires_selector(self):
        with pytest.raises(ValueError):
            measure(basis_state("0"), np.eye(2), [1])

    def test_incomplete_basis_rejected(self):
        with pytest.raises(ValueError):
            measure(make_state(1, [1, 1]), np.array([[1, 0], [0, 0]]), [1], outcome=1)

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_probabilities_sum_to_one(self, seed):
        rng = np.random.default_rng(seed)
        state = random_state(rng, 3)
        res, _ = project_all(state, random_unitary(rng, 2), [3, 1])
        assert np.sum(abs(res) ** 2) == pytest.approx(1, abs=1e-10)

    def test_sample_outcome_honors_probabilities(self):
        rng = np.random.default_rng(5)
        p = np.array([0.1, 0.0, 0.6, 0.3])
        draws = np.bincount([sample_outcome(p, rng) for _ in range(20000)], minlength=5)[1:]
        assert draws[1] == 0
        sigma = np.sqrt(20000 * p * (1 - p))
        assert np.all(abs(draws - 20000 * p) <= 5 * sigma + 1e-9)


class TestReduce:
    def test_product_state(self):
        rho = reduce(basis_state("01"), [1])
        np.testing.assert_allclose(rho.entries, [[1, 0], [0, 0]])

    def test_bell_is_maximally_mixed(self):
        rho = reduce(make_state(2, [1, 0, 0, 1]), [1])
        np.testing.assert_allclose(rho.entries, np.eye(2) / 2, atol=1e-15)

    def test_ghz_two_qubit_marginal(self):
        rho = reduce(make_state(3, [1, 0, 0, 0, 0, 0, 0, 1]), [1, 2])
        np.testing.assert_allclose(rho.entries, np.diag([0.5, 0, 0, 0.5]), atol=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(seeds)
    def test_matches_hand_partial_trace(self, seed):
        rng = np.random.default_rng(seed)
        s = random_state(rng, 4)
        keep = sorted(int(q) + 1 for q in rng.permutation(4)[:2])
        np.testing.assert_allclose(reduce(s, keep).entries, oracle_partial_trace(s.amps, 4, keep), atol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(seeds)
    def test_product_factorization(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_state(rng, 2), random_state(rng, 2)
        rho = reduce(tensor(a, b), [1, 2])
        assert rho.distance(DensityMatrix.pure(a)) < 1e-10

    def test_density_matrix_validation(self):
        with pytest.raises(ValueError):
            DensityMatrix(1, np.array([[1, 1], [0, 0]]))
        with pytest.raises(ValueError):
            DensityMatrix(1, np.eye(2))


class TestFidelity:
    def test_self(self):
        s = make_state(2, [1, 2j, 3, 0])
        assert fidelity(s, s) == pytest.approx(1)

    def test_orthogonal(self):
        assert fidelity(basis_state("0"), basis_state("1")) == 0

    @given(st.floats(0, 2 * math.pi))
    def test_global_phase_blind(self, theta):
        s = make_state(2, [1, 2j, 3, 0])
        t = StateVector(2, np.exp(1j * theta) * s.amps)
        assert fidelity(s, t) == pytest.approx(1, abs=1e-12)
        assert phase_aligned_distance(s.amps, t.amps) < 1e-12
