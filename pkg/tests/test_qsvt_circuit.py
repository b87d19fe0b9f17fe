import math

import numpy as np
import pytest
from scipy.linalg import expm

from postselect.blockenc import BlockEncoding, postselect_encoding
from postselect.errors import ConfigurationError, DomainError
from postselect.linalg_core import (
    Operator,
    Projector,
    StateVector,
    haar_random_unitary,
    random_state,
    state_preparation_unitary,
)
from postselect.phase_solver import PhaseSequence, grover_phases, solve_phases
from postselect.qsvt_circuit import (
    PLUS,
    QsvtRun,
    alternating_sequence,
    apply_exact,
    pi_phi,
    pi_phi_gadget,
    run_with_flags,
    sequence_block,
)
from postselect.svtfun import OddPolynomial, ideal_sign

CUBE = OddPolynomial.from_monomial([0, 0, 0, 1])


@pytest.fixture
def random_block(rng):
    dims = (2, 2, 2)
    unitary = Operator.square(haar_random_unitary(8, rng), dims)
    return BlockEncoding(unitary, Projector.computational(dims, {0: 0}), Projector.computational(dims, {1: 0}))


@pytest.fixture
def random_projector(rng):
    basis = haar_random_unitary(4, rng)[:, :2]
    return Projector(basis, (4,))


class TestPhaseGates:
    def test_zero_phase_is_identity(self, random_projector):
        assert np.allclose(pi_phi(random_projector, 0.0).entries, np.eye(4))

    def test_quarter_turn_is_reflection(self, random_projector):
        pi = random_projector.operator.entries
        assert np.allclose(pi_phi(random_projector, math.pi / 2).entries, 1j * (2 * pi - np.eye(4)))

    def test_matches_matrix_exponential(self, random_projector):
        pi = random_projector.operator.entries
        assert np.allclose(pi_phi(random_projector, 0.3).entries, expm(0.3j * (2 * pi - np.eye(4))))

    def test_gadget_sectors(self, random_projector):
        gadget = pi_phi_gadget(random_projector, 0.7).entries.reshape(4, 2, 4, 2)
        assert np.max(np.abs(gadget[:, 0, :, 0] - pi_phi(random_projector, 0.7).entries)) <= 1e-12
        assert np.max(np.abs(gadget[:, 1, :, 1] - pi_phi(random_projector, -0.7).entries)) <= 1e-12
        assert np.allclose(gadget[:, 0, :, 1], 0.0)

    def test_gadget_at_zero_phase(self, random_projector):
        assert np.allclose(pi_phi_gadget(random_projector, 0.0).entries, np.eye(8))


class TestAlternatingSequence:
    def test_single_query_is_the_block(self, random_block):
        sequence = PhaseSequence.from_phases([0.0])
        assert np.allclose(sequence_block(random_block, sequence), random_block.block())

    def test_unitary(self, random_block, rng):
        sequence = PhaseSequence.from_phases(rng.uniform(-np.pi, np.pi, 7))
        assert alternating_sequence(random_block, sequence).is_unitary(1e-10)

    def test_grover_matches_exact_chebyshev(self, rng):
        psi = random_state((2, 2, 2), rng)
        target = Projector.computational((2, 2, 2), {0: 1})
        encoding = postselect_encoding(state_preparation_unitary(psi), target)
        sequence = grover_phases(5)
        exact = apply_exact(encoding, sequence.realized_polynomial).entries
        left, right = encoding.left_projector.basis, encoding.right_projector.basis
        assert np.allclose(sequence_block(encoding, sequence), left.conj().T @ exact @ right, atol=1e-10)

    def test_cube_of_random_block(self, random_block):
        sequence = solve_phases(CUBE)
        m = random_block.block()
        assert np.max(np.abs(sequence_block(random_block, sequence, real_part=True) - m @ m.conj().T @ m)) <= 1e-8


class TestSolvedSequences:
    @pytest.mark.parametrize('degree', [3, 7, 15, 31])
    def test_circuit_matches_exact_transform(self, degree, rng):
        coefficients = np.zeros(degree + 1)
        coefficients[1] += 0.25
        coefficients[degree] += 0.25
        target = OddPolynomial(coefficients)
        sequence = solve_phases(target)
        dims = (2, 2, 2)
        for _ in range(20):
            unitary = Operator.square(haar_random_unitary(8, rng), dims)
            block = BlockEncoding(unitary, Projector.computational(dims, {0: 0}),
                                  Projector.computational(dims, {1: 0}))
            exact = apply_exact(block, target).entries
            expected = block.left_projector.basis.conj().T @ exact @ block.right_projector.basis
            circuit = sequence_block(block, sequence, real_part=True)
            assert np.max(np.abs(circuit - expected)) <= 1e-8


class TestApplyExact:
    def test_identity_function(self, random_block):
        assert np.allclose(apply_exact(random_block, lambda x: x).entries, random_block.encoded_matrix().entries)

    def test_cube(self, random_block):
        m = random_block.encoded_matrix().entries
        assert np.allclose(apply_exact(random_block, CUBE).entries, m @ m.conj().T @ m)

    def test_ideal_sign_on_rank_one_block(self, rng):
        target = Projector.computational((2, 2), {0: 0})
        encoding = postselect_encoding(haar_random_unitary(4, rng), target)
        values = np.linalg.svd(apply_exact(encoding, ideal_sign()).entries, compute_uv=False)
        assert np.isclose(values[0], 1.0)
        assert np.all(values[1:] < 1e-12)


class TestRunWithFlags:
    def test_identity_polynomial_is_naive_postselection(self, rng):
        unitary = haar_random_unitary(8, rng)
        target = Projector.computational((2, 2, 2), {0: 0})
        encoding = postselect_encoding(unitary, target)
        run = QsvtRun(encoding, PhaseSequence.from_phases([0.0]))
        state, probability = run_with_flags(run, encoding.right_projector.basis[:, 0])
        branch = target.apply(unitary[:, 0])
        assert np.isclose(probability, encoding.metadata['p_m'])
        assert np.isclose(abs(np.vdot(branch, state.amplitudes)) ** 2 / np.vdot(branch, branch).real, 1.0)

    def test_default_flags(self, random_block):
        run = QsvtRun(random_block, PhaseSequence.from_phases([0.0]))
        assert [name for name, _ in run.flag_projectors] == ['system', 'ancilla']
        plain = QsvtRun(random_block, PhaseSequence.from_phases([0.0]), use_real_part_gadget=False)
        assert [name for name, _ in plain.flag_projectors] == ['system']

    def test_flags_must_include_system(self, random_block):
        with pytest.raises(DomainError):
            QsvtRun(random_block, PhaseSequence.from_phases([0.0]), False,
                    [('ancilla', Projector(np.array([1.0, 0.0]), (2,)))])

    def test_input_outside_right_projector(self, random_block):
        run = QsvtRun(random_block, PhaseSequence.from_phases([0.0]))
        vector = np.zeros(8, dtype=complex)
        vector[7] = 1.0
        with pytest.raises(DomainError):
            run_with_flags(run, StateVector(vector, (2, 2, 2)))

    def test_unknown_flag_name(self, random_block):
        with pytest.raises(ConfigurationError):
            QsvtRun(random_block, PhaseSequence.from_phases([0.0]), False,
                    [('system', random_block.left_projector), ('counter', Projector(np.array([1.0, 0.0]), (2,)))])

    def test_ancilla_flag_needs_gadget(self, random_block):
        with pytest.raises(ConfigurationError):
            QsvtRun(random_block, PhaseSequence.from_phases([0.0]), False,
                    [('system', random_block.left_projector), ('ancilla', Projector(PLUS, (2,)))])
