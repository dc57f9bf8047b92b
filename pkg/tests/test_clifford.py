import itertools
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from randbench import clifford as cl
from randbench.clifford import (
    CNOT,
    H,
    PHPgate,
    WAIT,
    MultiGateLabel,
    PauliLabel,
    SignedPauli,
    SPGate,
    SymplecticLabel,
)
from randbench.liouville import depolarize, depolarizing_parameter, kraus_to_superop, twirl, unitary_to_superop

from conftest import SIGMA, kron_all, pauli_string_matrix, random_kraus, sp_unitaries_oracle

S_GATE = np.diag([1, 1j])
H_MAT = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def dense_gate(g: MultiGateLabel, n: int) -> np.ndarray:
    """Independent dense construction (qubit 0 most significant)."""
    if g.kind == "CNOT":
        c, t = g.qubits
        d = 2**n
        u = np.zeros((d, d))
        for b in range(d):
            bits = [(b >> (n - 1 - q)) & 1 for q in range(n)]
            if bits[c]:
                bits[t] ^= 1
            u[sum(v << (n - 1 - q) for q, v in enumerate(bits)), b] = 1
        return u.astype(complex)
    local = {"H": H_MAT, "PHP": S_GATE @ H_MAT @ S_GATE.conj().T, "WAIT": np.eye(2)}[g.kind]
    return kron_all([local if q == g.qubits[0] else np.eye(2) for q in range(n)])


def dense_decompose(op: np.ndarray, n: int) -> SignedPauli:
    for letters in itertools.product("IXYZ", repeat=n):
        ref = pauli_string_matrix("".join(letters))
        ov = np.trace(ref @ op) / 2**n
        if abs(abs(ov) - 1) < 1e-9:
            return SignedPauli(int(np.sign(ov.real)), "".join(letters))
    raise AssertionError("not a Pauli")


def random_signed_pauli(rng, n):
    while True:
        ops = "".join(rng.choice(list("IXYZ"), size=n))
        if set(ops) != {"I"}:
            return SignedPauli(int(rng.choice([1, -1])), ops)


class TestLabels:
    def test_counts(self):
        assert len(set(cl.all_pauli_labels())) == 8
        assert len(set(cl.all_symplectic_labels())) == 6
        assert len(cl.enumerate_single_qubit_cliffords()) == 48

    def test_invalid_labels(self):
        with pytest.raises(ValueError):
            SymplecticLabel("I", 1)
        with pytest.raises(ValueError):
            PauliLabel("X", 0)
        with pytest.raises(ValueError):
            CNOT(1, 1)
        with pytest.raises(ValueError):
            MultiGateLabel("T", (0,))

    def test_validate_topology(self):
        CNOT(0, 1).validate(3)
        with pytest.raises(ValueError, match="nearest"):
            CNOT(0, 2).validate(3)
        CNOT(0, 2).validate(3, linear_chain=False)
        with pytest.raises(ValueError, match="outside"):
            H(3).validate(3)

    def test_unitaries_match_exponentials(self):
        ours = [u for _, u in cl.enumerate_single_qubit_cliffords()]
        for a, b in zip(ours, sp_unitaries_oracle()):
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_identity_pauli_z_symplectic_keeps_populations(self):
        g = SPGate(PauliLabel("I", 1), SymplecticLabel("Z", 1))
        rho = g.unitary() @ np.diag([1, 0]) @ g.unitary().conj().T
        np.testing.assert_allclose(np.diag(rho).real, [1, 0], atol=1e-15)

    def test_set_twirls_to_depolarizing(self, rng):
        gates = [unitary_to_superop(u) for _, u in cl.enumerate_single_qubit_cliffords()]
        raw = kraus_to_superop(random_kraus(rng))
        np.testing.assert_allclose(twirl(raw, gates).mat,
                                   depolarize(depolarizing_parameter(raw), 1).mat, atol=1e-10)

    def test_index_round_trip(self):
        for i in range(48):
            assert cl.sp_gate_index(cl.sp_gate_from_index(i)) == i


class TestSampling:
    def test_sp_uniformity(self):
        rng = np.random.default_rng(0)
        counts = np.zeros(48)
        for _ in range(100_000):
            counts[cl.sp_gate_index(cl.sample_sp_gate(rng))] += 1
        assert chisquare(counts).pvalue > 0.001

    def test_sp_determinism(self):
        r1, r2 = np.random.default_rng(5), np.random.default_rng(5)
        assert [cl.sample_sp_gate(r1) for _ in range(20)] == [cl.sample_sp_gate(r2) for _ in range(20)]
        r3 = np.random.default_rng(6)
        r1 = np.random.default_rng(5)
        assert [cl.sample_sp_gate(r1) for _ in range(10)] != [cl.sample_sp_gate(r3) for _ in range(10)]

    def test_nearest_neighbour_candidates(self):
        assert set(cl.nearest_neighbor_pairs(3)) == {(0, 1), (1, 0), (1, 2), (2, 1)}

    def test_cnot_fraction(self):
        rng = np.random.default_rng(1)
        draws = [cl.sample_multi_gate(rng, 3) for _ in range(100_000)]
        frac = np.mean([g.kind == "CNOT" for g in draws])
        assert abs(frac - 1 / 3) < 0.01
        assert {g.qubits for g in draws if g.kind == "CNOT"} == {(0, 1), (1, 0), (1, 2), (2, 1)}
        assert {g.kind for g in draws} == {"H", "PHP", "CNOT"}

    def test_single_qubit_register_never_cnot(self):
        rng = np.random.default_rng(2)
        with pytest.warns(RuntimeWarning):
            draws = [cl.sample_multi_gate(rng, 1) for _ in range(200)]
        assert all(g.kind != "CNOT" for g in draws)


class TestPropagate:
    def test_hadamard_on_readout(self):
        assert cl.propagate(H(0), SignedPauli.parse("+ZII")) == SignedPauli.parse("+XII")

    def test_cnot_spreads_target_z(self):
        assert cl.propagate(CNOT(0, 1), SignedPauli.parse("+IZI")) == SignedPauli.parse("+ZZI")
        u = dense_gate(CNOT(0, 1), 3)
        dense = dense_decompose(u @ pauli_string_matrix("IZI") @ u.conj().T, 3)
        assert dense == SignedPauli.parse("+ZZI")

    def test_dense_consistency_multi(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            g = cl.sample_multi_gate(rng, 3)
            s = random_signed_pauli(rng, 3)
            u = dense_gate(g, 3)
            expected = dense_decompose(u @ s.matrix() @ u.conj().T, 3)
            assert cl.propagate(g, s) == expected

    def test_dense_consistency_single(self):
        for g, u in zip(cl._sp_gates(), sp_unitaries_oracle()):
            for ax, sg in itertools.product("XYZ", (1, -1)):
                s = SignedPauli(sg, ax)
                assert cl.propagate(g, s) == dense_decompose(u @ s.matrix() @ u.conj().T, 1)

    def test_inverse_returns_input_two_qubits(self):
        # H, PHP and CNOT are all self-inverse
        gates = [H(0), H(1), PHPgate(0), PHPgate(1), CNOT(0, 1), CNOT(1, 0), WAIT(0)]
        for g in gates:
            for ops in itertools.product("IXYZ", repeat=2):
                for sign in (1, -1):
                    s = SignedPauli(sign, "".join(ops))
                    assert cl.propagate(g, cl.propagate(g, s)) == s

    def test_pulse_inverse(self):
        for ax in "XYZ":
            for sign in (1, -1):
                fwd, back = SymplecticLabel(ax, sign), SymplecticLabel(ax, -sign)
                for p in ("+X", "-Y", "+Z"):
                    s = SignedPauli.parse(p)
                    assert cl.propagate(back, cl.propagate(fwd, s)) == s

    def test_register_bounds(self):
        with pytest.raises(ValueError):
            cl.propagate(CNOT(2, 3), SignedPauli.parse("+ZII"))


class TestRecoverySingle:
    def test_z_target_plus_is_z_rotation_class(self):
        g = cl.recovery_gate_for(SignedPauli.parse("+Z"), 1)
        u = g.unitary()
        assert abs(u[0, 1]) < 1e-12 and abs(u[1, 0]) < 1e-12

    def test_x_to_z(self):
        g = cl.recovery_gate_for(SignedPauli.parse("+X"), 1)
        assert cl.propagate(g, SignedPauli.parse("+X")) == SignedPauli.parse("+Z")
        # one valid choice is a quarter turn about Y alone (negative sense
        # under the exp(-i theta sigma / 2) convention)
        assert cl.propagate(SymplecticLabel("Y", -1), SignedPauli.parse("+X")) == SignedPauli.parse("+Z")

    def test_every_tracked_state(self):
        rng = np.random.default_rng(4)
        for ax, sg in itertools.product("XYZ", (1, -1)):
            s = SignedPauli(sg, ax)
            for _ in range(4):
                g, sign = cl.recovery_single(s, rng)
                assert cl.propagate(g, s) == SignedPauli(sign, "Z")

    def test_sign_balance(self):
        rng = np.random.default_rng(7)
        signs = [cl.recovery_single(SignedPauli.parse("-Y"), rng)[1] for _ in range(10_000)]
        assert abs(np.mean(np.array(signs) > 0) - 0.5) < 0.02

    def test_identity_rejected(self):
        with pytest.raises(RuntimeError):
            cl.recovery_single(SignedPauli.parse("+I"), np.random.default_rng(0))


def _min_cnots_bruteforce(start: SignedPauli, n: int, max_len: int = 4):
    """Shortest NN-CNOT word taking a Z-type Pauli to +-Z on qubit 0 only."""
    pairs = cl.nearest_neighbor_pairs(n)
    goal = "Z" + "I" * (n - 1)
    for length in range(max_len + 1):
        for word in itertools.product(pairs, repeat=length):
            s = cl.propagate_sequence([CNOT(*p) for p in word], start)
            if s.ops == goal:
                return length
    return None


class TestRecoveryMulti:
    def test_examples(self):
        assert cl.recovery_multi(SignedPauli.parse("+ZII")) == []
        assert cl.recovery_multi(SignedPauli.parse("+XII")) == [H(0)]
        assert cl.recovery_multi(SignedPauli.parse("+IZI")) == [CNOT(0, 1), CNOT(1, 0)]

    def test_identity_rejected(self):
        with pytest.raises(ValueError):
            cl.recovery_multi(SignedPauli.parse("+III"))

    def test_minimal_cnot_count_all_z_patterns(self):
        for bits in itertools.product("IZ", repeat=3):
            ops = "".join(bits)
            if ops == "III":
                continue
            rec = cl.recovery_multi(SignedPauli(1, ops))
            n_cnot = sum(g.kind == "CNOT" for g in rec)
            assert n_cnot == _min_cnots_bruteforce(SignedPauli(1, ops), 3)

    def test_every_pauli_and_length_bound(self):
        for ops in itertools.product("IXYZ", repeat=3):
            ops = "".join(ops)
            if ops == "III":
                continue
            for sign in (1, -1):
                s = SignedPauli(sign, ops)
                rec = cl.recovery_multi(s)
                assert cl.propagate_sequence(rec, s).ops == "ZII"
                local = [g for g in rec if g.kind != "CNOT"]
                assert len(local) <= 3
                assert len(rec) - len(local) <= 2 * 2 + 0  # (n-1)*2 for n=3
                for g in rec:
                    g.validate(3)

    def test_totality_random_sequences(self):
        rng = np.random.default_rng(9)
        for _ in range(1000):
            seq = [cl.sample_multi_gate(rng, 3) for _ in range(int(rng.integers(1, 40)))]
            tracked = cl.propagate_sequence(seq, SignedPauli.parse("+ZII"))
            final = cl.propagate_sequence(cl.recovery_multi(tracked), tracked)
            assert final.ops == "ZII"

    def test_dense_recovery_small(self):
        rng = np.random.default_rng(10)
        z0 = pauli_string_matrix("ZII")
        for _ in range(30):
            seq = [cl.sample_multi_gate(rng, 3) for _ in range(15)]
            tracked = cl.propagate_sequence(seq, SignedPauli.parse("+ZII"))
            rec = cl.recovery_multi(tracked)
            u = np.eye(8)
            for g in seq + rec:
                u = dense_gate(g, 3) @ u
            final = cl.propagate_sequence(rec, tracked)
            np.testing.assert_allclose(u @ z0 @ u.conj().T, final.sign * z0, atol=1e-12)

    def test_larger_register(self):
        s = SignedPauli.parse("+IIIYX")
        rec = cl.recovery_multi(s)
        assert cl.propagate_sequence(rec, s).ops == "ZIIII"


class TestParallelize:
    def test_examples(self):
        assert cl.parallelize([CNOT(1, 2), H(0)]) == [(CNOT(1, 2), H(0))]
        assert cl.parallelize([H(0), PHPgate(0)]) == [(H(0),), (PHPgate(0),)]

    def test_disjoint_supports_and_order(self):
        rng = np.random.default_rng(11)
        seq = [cl.sample_multi_gate(rng, 3) for _ in range(100)]
        steps = cl.parallelize(seq)
        flat = [g for s in steps for g in s]
        assert len(flat) == len(seq)
        for s in steps:
            qs = [q for g in s for q in g.qubits]
            assert len(qs) == len(set(qs))
        for q in range(3):
            assert [g for g in flat if q in g.qubits] == [g for g in seq if q in g.qubits]

    def test_dense_equivalence(self):
        rng = np.random.default_rng(12)
        seq = [cl.sample_multi_gate(rng, 3) for _ in range(100)]
        flat = [g for s in cl.parallelize(seq) for g in s]
        a = cl.sequence_unitary(seq, 3)
        b = cl.sequence_unitary(flat, 3)
        ov = np.trace(a.conj().T @ b) / 8
        assert abs(abs(ov) - 1) < 1e-10

    def test_gate_unitary_matches_dense(self):
        for g in [H(1), PHPgate(2), CNOT(1, 0), CNOT(1, 2), WAIT(0)]:
            np.testing.assert_allclose(cl.gate_unitary(g, 3), dense_gate(g, 3), atol=1e-12)


class TestSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(13)
        seq = [cl.sample_multi_gate(rng, 3) for _ in range(20)]
        seq += [PauliLabel("Y", -1), SymplecticLabel("X", 1)]
        assert cl.parse_sequence(cl.format_sequence(seq)) == seq

    def test_sp_gate_expands_to_two_lines(self):
        text = cl.format_sequence([SPGate(PauliLabel("X", 1), SymplecticLabel("Y", -1))])
        assert text == "P +X\nS -Y\n"

    def test_comments_and_errors(self):
        assert cl.parse_sequence("# header\nH 0  # readout\n\nCNOT 0 1\n") == [H(0), CNOT(0, 1)]
        with pytest.raises(ValueError, match="line 2"):
            cl.parse_sequence("H 0\nS X\n")

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.sampled_from([H(0), H(1), PHPgate(1), CNOT(0, 1), CNOT(1, 0), WAIT(1)]),
                    max_size=12))
    def test_round_trip_property(self, seq):
        assert cl.parse_sequence(cl.format_sequence(seq)) == seq
