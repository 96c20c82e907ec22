"""Measurement bases, their classification and the adequacy checker."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghz_teleport.bases import (
    BASIS_FAMILIES,
    MeasurementBasis,
    NonOrthonormalBasis,
    Nplet,
    VerdictKind,
    adequacy,
    basis_general,
    basis_ghz_triplet,
    basis_pi123,
    basis_pi13_2_s4,
    basis_pi1_23_s2,
    basis_pi1_23_s4,
    canonical_phase,
    classify,
    compute_pq,
    equal_up_to_phase,
    gate_label,
    outcome_maps,
    pi_prefix,
)
from ghz_teleport.protocols import epr_correction_table
from ghz_teleport.states import (
    GENUINE_TRIPARTITE,
    PRODUCT,
    BellKind,
    EprForm,
    bell,
    epr_input,
    ghz_triplet,
    pair_entangled,
    triplet_mes_family,
)
from ghz_teleport.statevec import StateVector, basis_state, fidelity, tensor

S = 1 / math.sqrt(2)


def brute_maps(basis, alpha_beta_points=((1, 0), (0, 1))):
    """M_k columns from explicit loops over the 5-qubit index space."""
    out = np.zeros((8, 4, 2), dtype=complex)
    for col, (a, b) in enumerate(alpha_beta_points):
        state = tensor(epr_input(a, b), ghz_triplet()).amps
        for k in range(8):
            vec = basis.matrix[k]
            for i in range(32):
                out[k, i & 3, col] += np.conj(vec[i >> 2]) * state[i]
    return out


class TestConstruction:
    def test_pi123_is_computational(self):
        b = basis_pi123()
        assert fidelity(b.vector(1), basis_state("000")) == pytest.approx(1)
        np.testing.assert_allclose(b.matrix, np.eye(8))

    def test_pi1_23_s2_first_element(self):
        expect = np.zeros(8)
        expect[0b000] = expect[0b011] = S
        np.testing.assert_allclose(basis_pi1_23_s2().vector(1).amps, expect)

    def test_pi1_23_s4_first_element(self):
        expect = np.zeros(8)
        for i in (0b000, 0b011, 0b100, 0b111):
            expect[i] = 0.5
        np.testing.assert_allclose(basis_pi1_23_s4(0).vector(1).amps, expect, atol=1e-15)

    def test_pi13_2_first_element(self):
        expect = np.zeros(8)
        for i in (0b000, 0b010, 0b101, 0b111):
            expect[i] = 0.5
        np.testing.assert_allclose(basis_pi13_2_s4(0).vector(1).amps, expect, atol=1e-15)

    @pytest.mark.parametrize("phi", [0, math.pi / 7, math.pi / 3, 1.0])
    def test_pi1_23_s4_orthonormal(self, phi):
        np.testing.assert_allclose(basis_pi1_23_s4(phi).gram(), np.eye(8), atol=1e-10)

    @pytest.mark.parametrize("name", sorted(BASIS_FAMILIES))
    def test_every_family_orthonormal(self, name):
        np.testing.assert_allclose(BASIS_FAMILIES[name](0.4).gram(), np.eye(8), atol=1e-10)

    def test_general_two_equals_pi1_23_s4(self):
        for phi in (0.0, 0.9):
            np.testing.assert_allclose(basis_general(2, phi).matrix, basis_pi1_23_s4(phi).matrix, atol=1e-15)

    def test_general_three_element(self):
        v = basis_general(3, 0).vector(1).amps
        nz = v[abs(v) > 1e-12]
        assert nz.size == 8
        np.testing.assert_allclose(nz, 1 / (2 * math.sqrt(2)))

    @pytest.mark.parametrize("n", range(2, 8))
    def test_general_complete(self, n):
        b = basis_general(n, 0.3)
        assert len(b) == 2 ** (n + 1)
        np.testing.assert_allclose(b.gram(), np.eye(2 ** (n + 1)), atol=1e-10)

    def test_non_orthonormal_rejected(self):
        with pytest.raises(NonOrthonormalBasis):
            MeasurementBasis.from_states([basis_state("0"), StateVector(1, np.array([S, S]))])

    def test_ordering_pi_fastest_within_bell(self):
        labels = basis_pi1_23_s4(0).labels
        assert labels[:4] == ("π+Φ+", "π+Φ-", "π-Φ+", "π-Φ-")
        assert labels[4:] == ("π+Ψ+", "π+Ψ-", "π-Ψ+", "π-Ψ-")


class TestClassify:
    def test_pi123(self):
        c = classify(basis_pi123())
        assert c.s == 1
        assert set(c.per_vector_class) == {PRODUCT}

    def test_triplet_family(self):
        c = classify(MeasurementBasis.from_states(triplet_mes_family()))
        assert c.s == 2
        assert set(c.per_vector_class) == {GENUINE_TRIPARTITE}

    def test_pi1_23_s4(self):
        c = classify(basis_pi1_23_s4(0))
        assert c.s == 4
        assert set(c.per_vector_class) == {pair_entangled(2, 3)}
        assert c.entangled_pair_count == 1

    def test_pi1_23_s2(self):
        c = classify(basis_pi1_23_s2())
        assert c.s == 2
        assert set(c.per_vector_class) == {pair_entangled(2, 3)}

    def test_pi13_2(self):
        c = classify(basis_pi13_2_s4(0))
        assert c.s == 4
        assert set(c.per_vector_class) == {pair_entangled(1, 3)}

    def test_general_s_is_two_to_n(self):
        for n in (2, 3, 4):
            assert classify(basis_general(n)).s == 2 ** n


class TestOutcomeMaps:
    @pytest.mark.parametrize("name", sorted(BASIS_FAMILIES))
    def test_match_brute_force(self, name):
        basis = BASIS_FAMILIES[name](0.5)
        maps, rest = outcome_maps(basis)
        assert rest == (4, 5)
        np.testing.assert_allclose(maps, brute_maps(basis), atol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_independent_of_sampling_points(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        basis = basis_pi1_23_s2()
        ref, _ = outcome_maps(basis)
        alt, _ = outcome_maps(basis, points=[tuple(p) for p in pts])
        np.testing.assert_allclose(alt, ref, atol=1e-10)

    def test_collinear_points_rejected(self):
        with pytest.raises(ValueError):
            outcome_maps(basis_pi123(), points=[(1, 0), (2, 0)])


class TestAdequacy:
    def test_pi1_23_s4_adequate(self):
        rep = adequacy(basis_pi1_23_s4(0))
        assert rep.verdict.kind is VerdictKind.ADEQUATE
        np.testing.assert_allclose(rep.probs, [1 / 8] * 8, atol=1e-12)
        assert not rep.zero_outcomes

    def test_corrections_match_reference_table(self):
        rep = adequacy(basis_pi1_23_s4(0))
        for rule in epr_correction_table():
            assert equal_up_to_phase(rep.correction(rule.outcome).matrix, rule.matrix()), rule.outcome
            # receiver-local form as well
            for derived, ref in zip(rep.local_corrections[rule.outcome], rule.ops):
                assert equal_up_to_phase(derived.matrix, ref.matrix)

    def test_pi1_23_s2_state_dependent(self):
        rep = adequacy(basis_pi1_23_s2())
        assert rep.verdict.kind is VerdictKind.INADEQUATE
        assert rep.verdict.reason == "state-dependent"
        g = rep.maps[0].conj().T @ rep.maps[0]
        # |0>Φ+ on (1,2,3) keeps only the alpha branch
        np.testing.assert_allclose(g, np.diag([0.25, 0]), atol=1e-12)
        assert rep.probs[0] is None

    def test_pi123_inadequate_with_zeros(self):
        rep = adequacy(basis_pi123())
        assert rep.verdict.kind is VerdictKind.INADEQUATE
        assert rep.zero_outcomes == {1, 2, 7, 8}

    def test_pi13_2_adequate(self):
        rep = adequacy(basis_pi13_2_s4(0))
        assert rep.adequate
        np.testing.assert_allclose(rep.probs, [1 / 8] * 8, atol=1e-12)

    def test_ghz_triplet_partially_usable(self):
        rep = adequacy(basis_ghz_triplet())
        assert rep.verdict.kind is VerdictKind.PARTIALLY_USABLE
        assert len(rep.zero_outcomes) == 4
        assert rep.zero_outcomes == {1, 2, 3, 4}
        assert set(rep.verdict.usable) == {5, 6, 7, 8}
        np.testing.assert_allclose([rep.probs[k - 1] for k in (5, 6, 7, 8)], [0.25] * 4, atol=1e-12)

    @pytest.mark.parametrize("phi", [2 * math.pi * j / 16 for j in range(16)])
    def test_phi_sweep(self, phi):
        rep = adequacy(basis_pi1_23_s4(phi))
        assert rep.adequate
        np.testing.assert_allclose(rep.probs, [1 / 8] * 8, atol=1e-10)

    @pytest.mark.parametrize("n", range(2, 9))
    def test_general_adequate(self, n):
        rep = adequacy(basis_general(n, 0), Nplet(n))
        assert rep.adequate
        np.testing.assert_allclose(rep.probs, 2.0 ** -(n + 1), atol=1e-10)

    def test_diagonal_input_also_adequate(self):
        rep = adequacy(basis_pi1_23_s4(0), EprForm.DIAGONAL)
        assert rep.adequate

    @pytest.mark.parametrize("basis_fn", [lambda: basis_pi1_23_s4(0), lambda: basis_pi1_23_s4(1.3),
                                          lambda: basis_pi13_2_s4(0.2)])
    def test_derived_corrections_recover_input(self, basis_fn):
        basis = basis_fn()
        rep = adequacy(basis)
        rng = np.random.default_rng(17)
        for _ in range(100):
            z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            a, b = z / np.linalg.norm(z)
            target = epr_input(a, b)
            for k in range(1, 9):
                r = rep.maps[k - 1] @ np.array([a, b])
                res = StateVector(2, r / np.linalg.norm(r))
                u = rep.correction(k).matrix
                assert fidelity(StateVector(2, u.conj().T @ res.amps), target) == pytest.approx(1, abs=1e-10)

    def test_wrong_register_size_rejected(self):
        with pytest.raises(ValueError):
            adequacy(basis_pi1_23_s4(0), EprForm.ANTI_DIAGONAL, carrier=4)


class TestPQ:
    def test_plus_plus(self):
        p, q, ok = compute_pq(pi_prefix(3, "++"))
        assert p == pytest.approx(0.5) and q == pytest.approx(0.5) and ok

    def test_computational(self):
        p, q, ok = compute_pq(basis_state("00"))
        assert p == 1 and q == 0 and not ok

    def test_bell_prefix(self):
        p, q, ok = compute_pq(bell(BellKind.PHI_PLUS))
        assert p == pytest.approx(S) and q == pytest.approx(S) and ok

    @pytest.mark.parametrize("n", range(2, 11))
    def test_magnitude_for_every_sign_pattern(self, n):
        import itertools
        for signs in itertools.product("+-", repeat=n - 1):
            p, q, ok = compute_pq(pi_prefix(n, "".join(signs), 0.6))
            assert ok
            assert abs(p) == pytest.approx(2 ** (-(n - 1) / 2), abs=1e-10)
            assert abs(q) == pytest.approx(2 ** (-(n - 1) / 2), abs=1e-10)


class TestHelpers:
    def test_canonical_phase_first_entry(self):
        m = 1j * np.array([[1, 0], [0, -1]])
        np.testing.assert_allclose(canonical_phase(m), [[1, 0], [0, -1]])

    def test_canonical_phase_skips_zero_corner(self):
        m = -1j * np.array([[0, 1], [1, 0]])
        np.testing.assert_allclose(canonical_phase(m), [[0, 1], [1, 0]])

    def test_gate_labels(self):
        assert gate_label(np.array([[0, 1], [1, 0]])) == "X"
        assert gate_label(np.array([[0, 1], [-1, 0]]), up_to_phase=False) == "iY"
        assert gate_label(np.diag([1, np.exp(0.5j)])) == "P(0.5)"
