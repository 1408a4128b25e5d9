from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_state, random_unitary
from digsta.circuits import (
    PRESETS,
    Circuit,
    Gate,
    circuit_unitary,
    cnot,
    decompose_two_qubit_rotation,
    expand_rotation,
    gate_matrix,
    prepare_state,
    preset,
    rot,
    rotation_matrix,
    step_blocks,
    trotter_circuit,
    zyz_angles,
)
from digsta.qcore import PAULI_LABELS, basis_state, fidelity, pauli_matrix
from digsta.sim import run_ideal, sequence_unitary
from digsta.sta import AngleSequence, TermSlot

TWO_BODY = [p for p in PAULI_LABELS if "I" not in p]
angles = st.floats(min_value=-4 * math.pi, max_value=4 * math.pi, allow_nan=False)


def phase_distance(u: np.ndarray, v: np.ndarray) -> float:
    """min over global phase of max |u - e^{i phi} v|."""
    k = np.unravel_index(np.argmax(abs(v)), v.shape)
    phase = u[k] / v[k]
    return float(np.max(np.abs(u - phase / abs(phase) * v)))


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(len(u))))) < tol


class TestGates:
    def test_rotation_matrix_is_exponential(self):
        for label in PAULI_LABELS:
            assert np.allclose(rotation_matrix(label, 0.7), scipy.linalg.expm(-0.35j * pauli_matrix(label)))

    def test_cnot_truth_table(self):
        assert np.allclose(gate_matrix(cnot("A", "B")) @ basis_state("10"), basis_state("11"))
        assert np.allclose(gate_matrix(cnot("B", "A")) @ basis_state("01"), basis_state("11"))

    @pytest.mark.parametrize("bad", [dict(kind="rot", pauli="Q"), dict(kind="cnot", control="A", target="A"),
                                     dict(kind="swap"), dict(kind="rot", pauli="XI", angle=math.inf)])
    def test_invalid_gates(self, bad):
        with pytest.raises(ValueError):
            Gate(**bad)

    def test_text_round_trip(self):
        c = Circuit((rot("XI", 0.1234567890123), cnot("B", "A"), Gate("cz"), rot("ZZ", -2.5)))
        assert Circuit.loads("# comment\n" + c.dumps()) == c

    def test_loads_reports_line(self):
        with pytest.raises(ValueError, match="line 2"):
            Circuit.loads("ROT XI 1\nFOO\n")


class TestDecomposition:
    def test_yy_structure(self):
        gates = decompose_two_qubit_rotation("YY", 0.3)
        assert [g.kind for g in gates] == ["rot", "rot", "cnot", "rot", "cnot", "rot", "rot"]
        assert len(gates) == 7
        assert [g.pauli for g in gates if g.kind == "rot"] == ["XI", "IX", "IZ", "XI", "IX"]
        assert [g.angle for g in gates if g.kind == "rot"] == pytest.approx(
            [-math.pi / 2, -math.pi / 2, 0.3, math.pi / 2, math.pi / 2])

    @settings(max_examples=150, deadline=None)
    @given(st.sampled_from(TWO_BODY), angles)
    def test_identity_up_to_phase(self, pauli, theta):
        c = Circuit(tuple(decompose_two_qubit_rotation(pauli, theta)))
        assert c.cnot_count == 2
        assert phase_distance(circuit_unitary(c), rotation_matrix(pauli, theta)) < 1e-10

    def test_single_qubit_terms_are_not_decomposed(self):
        assert expand_rotation("IZ", 0.2) == [rot("IZ", 0.2)]
        with pytest.raises(ValueError):
            decompose_two_qubit_rotation("XI", 0.2)


class TestTrotterCircuits:
    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_compiled_equals_logical(self, name, rng):
        terms = preset(name)
        seq = AngleSequence(rng.uniform(-2, 2, size=(3, len(terms))), terms)
        u = circuit_unitary(trotter_circuit(seq, name))
        assert is_unitary(u)
        assert phase_distance(u, sequence_unitary(seq)) < 1e-10

    def test_blocks_concatenate(self, rng):
        terms = preset("bhz")
        seq = AngleSequence(rng.uniform(-1, 1, size=(4, 3)), terms)
        joined = Circuit()
        for b in step_blocks(seq):
            joined = joined + b
        assert joined == trotter_circuit(seq)

    def test_cnot_budget(self):
        seq = AngleSequence(np.ones((1, 4)), preset("h2-ground"))
        assert trotter_circuit(seq).cnot_count == 2

    def test_preset_mismatch(self):
        seq = AngleSequence(np.ones((1, 3)), preset("bhz"))
        with pytest.raises(ValueError):
            trotter_circuit(seq, "h2-excited")
        with pytest.raises(KeyError):
            preset("nope")

    def test_one_step_bhz_is_symmetric(self):
        terms = preset("bhz-one-step")
        assert terms[0] == terms[2] == TermSlot(("IZ",), 0.5)


class TestStatePreparation:
    def test_zyz_reconstructs(self, rng):
        for _ in range(20):
            u = random_unitary(rng)
            b, g, d = zyz_angles(u)
            rz = lambda a: np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])  # noqa: E731
            ry = np.array([[math.cos(g / 2), -math.sin(g / 2)], [math.sin(g / 2), math.cos(g / 2)]])
            assert phase_distance(u, rz(b) @ ry @ rz(d)) < 1e-10

    @settings(max_examples=100, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_random_states(self, seed):
        target = random_state(np.random.default_rng(seed))
        c = prepare_state(target)
        assert c.cnot_count <= 1
        assert fidelity(run_ideal(c, basis_state("00")), target) > 1 - 1e-12

    @pytest.mark.parametrize("bits", ["00", "01", "10", "11"])
    def test_product_states_need_no_cnot(self, bits):
        c = prepare_state(basis_state(bits))
        assert c.cnot_count == 0
        assert fidelity(run_ideal(c, basis_state("00")), basis_state(bits)) == pytest.approx(1.0)

    def test_bell_state(self):
        bell = np.array([0, 1, -1, 0]) / math.sqrt(2)
        c = prepare_state(bell)
        assert c.cnot_count == 1
        assert fidelity(run_ideal(c, basis_state("00")), bell) == pytest.approx(1.0)

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            prepare_state(np.ones(4))
