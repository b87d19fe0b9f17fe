import numpy as np
import pytest

from postselect.blockenc import kraus_chain, random_hybrid_circuit
from postselect.circuit_io import circuit_from_text, circuit_to_text, read_circuit, write_circuit
from postselect.errors import DomainError

SAMPLE = '''
# one Hadamard then a forced measurement
QUBITS 2
GATE 0 0.70710678118654757+0j 0.70710678118654757+0j 0.70710678118654757+0j -0.70710678118654757+0j
MEAS 1 0 1   # after the Hadamard
'''


class TestCircuitText:
    def test_parses_sample(self):
        circuit = circuit_from_text(SAMPLE)
        assert circuit.n_qubits == 2
        assert len(circuit.gates) == 1
        assert circuit.gates[0].qubits == (0,)
        assert circuit.measurements[0].outcome == 1
        chain = kraus_chain(circuit)
        assert np.isclose(abs(chain[2, 0]), 1 / np.sqrt(2))

    def test_file_preserves_kraus_chain(self, rng, tmp_path):
        circuit = random_hybrid_circuit(3, 3, seed=rng)
        path = tmp_path / 'circuit.txt'
        write_circuit(circuit, path)
        loaded = read_circuit(path)
        assert loaded.n_meas == circuit.n_meas
        assert np.max(np.abs(kraus_chain(loaded) - kraus_chain(circuit))) < 1e-12

    def test_text_is_stable(self, rng):
        circuit = random_hybrid_circuit(2, 1, seed=rng)
        text = circuit_to_text(circuit)
        assert circuit_to_text(circuit_from_text(text)) == text

    def test_missing_qubits_line(self):
        with pytest.raises(DomainError):
            circuit_from_text("MEAS 0 0 0\n")

    def test_wrong_entry_count_reports_line(self):
        with pytest.raises(DomainError, match="Line 2"):
            circuit_from_text("QUBITS 1\nGATE 0 1 0 0\n")

    def test_unknown_keyword(self):
        with pytest.raises(DomainError):
            circuit_from_text("QUBITS 1\nRESET 0\n")
