import numpy as np
import pytest
from numpy.polynomial import chebyshev as cheb

from postselect.errors import DomainError
from postselect.phase_solver import (
    PhaseSequence,
    grover_phases,
    read_phases,
    realized_polynomial,
    realized_response,
    solve_phases,
    solver_nodes,
    write_phases,
)
from postselect.svtfun import OddPolynomial, fpaa_polynomial

T1 = OddPolynomial([0.0, 1.0])
T3 = OddPolynomial.from_odd_coefficients([0.0, 1.0])


class TestResponse:
    def test_grover_phases_give_chebyshev(self):
        x = np.linspace(-1, 1, 41)
        assert np.allclose(realized_response(grover_phases(5).phases, x), cheb.chebval(x, [0, 0, 0, 0, 0, 1]))
        assert np.allclose(realized_response(grover_phases(3).phases, x), -cheb.chebval(x, [0, 0, 0, 1]))

    def test_conjugate_phases_conjugate_response(self, rng):
        phases = rng.uniform(-np.pi, np.pi, 7)
        sequence = PhaseSequence.from_phases(phases)
        x = np.linspace(0, 1, 9)
        assert np.allclose(realized_response(sequence.conjugate().phases, x),
                           np.conj(realized_response(phases, x)))

    def test_realized_polynomial_is_odd(self, rng):
        poly = realized_polynomial(rng.uniform(-np.pi, np.pi, 5))
        assert poly.degree == 5
        assert np.all(poly.coefficients[0::2] == 0)

    def test_outside_unit_interval(self):
        with pytest.raises(DomainError):
            realized_response([0.0], 1.2)

    def test_nodes_positive_and_descending(self):
        nodes = solver_nodes(7)
        assert nodes.size == 4
        assert np.all(nodes > 0) and np.all(np.diff(nodes) < 0)


class TestSolvePhases:
    def test_identity_target(self):
        sequence = solve_phases(T1)
        assert sequence.residual <= 1e-12
        assert np.allclose(sequence.phases, [0.0])

    def test_t3_at_half(self):
        sequence = solve_phases(T3)
        assert sequence.residual <= 1e-9
        assert np.isclose(realized_response(sequence.phases, 0.5).real, -1.0, atol=1e-9)

    def test_fpaa_target(self):
        target = fpaa_polynomial(0.25, 0.1)
        sequence = solve_phases(target, tol=1e-8)
        assert sequence.degree == target.degree
        x = np.linspace(0, 1, 101)
        assert np.max(np.abs(realized_response(sequence.phases, x).real - target(x))) <= 1e-7

    def test_interior_phases_are_palindromic(self):
        sequence = solve_phases(fpaa_polynomial(0.25, 0.1))
        interior = sequence.phases[1:]
        assert np.allclose(interior, interior[::-1])

    def test_rejects_unbounded_target(self):
        with pytest.raises(DomainError):
            solve_phases(OddPolynomial.from_odd_coefficients([1.2]))


class TestPhaseSequence:
    def test_even_length_rejected(self):
        with pytest.raises(DomainError):
            PhaseSequence(np.zeros(2), T1)

    def test_degree_must_match_polynomial(self):
        with pytest.raises(DomainError):
            PhaseSequence(np.zeros(3), T1)

    def test_table_file(self, tmp_path):
        sequence = solve_phases(fpaa_polynomial(0.25, 0.1))
        path = tmp_path / 'phases.txt'
        write_phases(sequence, path)
        loaded = read_phases(path)
        assert np.array_equal(loaded.phases, sequence.phases)
        assert loaded.residual == sequence.residual
