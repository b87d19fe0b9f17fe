'''
Block encodings of post-selected state transformations and of circuits
with forced mid-circuit measurements
'''

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Sequence, Tuple, Union

import numpy as np

from .errors import DegenerateEncodingError, DimensionError, DomainError
from .linalg_core import (
    DEFAULT_POLICY,
    Operator,
    Projector,
    SeedLike,
    apply_local,
    as_rng,
    check_envelope,
    haar_random_unitary,
    qubit_dims,
)

logger = logging.getLogger(__name__)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    unitary: Operator
    right_projector: Projector
    left_projector: Projector
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        dims = self.unitary.dims
        if self.right_projector.dims != dims or self.left_projector.dims != dims:
            raise DimensionError(
                f"Projector dims {self.right_projector.dims}/{self.left_projector.dims} "
                f"do not match unitary dims {dims}")
        if not self.unitary.is_unitary(DEFAULT_POLICY.structural_tol):
            raise DomainError("Block-encoding unitary is not unitary within tolerance")

    @property
    def dims(self) -> Tuple[int, ...]:
        return self.unitary.dims

    def block(self) -> np.ndarray:
        '''Encoded matrix in the projector bases (rank_left x rank_right)'''
        left = self.left_projector.basis
        right = self.right_projector.basis
        return left.conj().T @ (self.unitary.entries @ right)

    def encoded_matrix(self) -> Operator:
        '''Full-size Pi~ U Pi'''
        left = self.left_projector.basis
        right = self.right_projector.basis
        return Operator.square(left @ self.block() @ right.conj().T, self.dims)


def _as_operator(unitary: Union[Operator, np.ndarray], dims: Sequence[int]) -> Operator:
    if isinstance(unitary, Operator):
        if unitary.shape[0] != math.prod(dims):
            raise DimensionError(f"Unitary of shape {unitary.shape} does not act on dims {tuple(dims)}")
        return Operator.square(unitary.entries, dims)
    return Operator.square(np.asarray(unitary, dtype=complex), dims)


def postselect_encoding(prep_unitary: Union[Operator, np.ndarray], target: Projector) -> BlockEncoding:
    '''M = Pi_m U |0...0><0...0|, whose only nonzero singular value is sqrt(p_m)'''
    unitary = _as_operator(prep_unitary, target.dims)
    right = Projector.from_indices([0], target.dims)
    psi = unitary.entries[:, 0]
    p_m = float(np.linalg.norm(target.apply(psi)) ** 2)
    if p_m < DEFAULT_POLICY.zero_probability:
        raise DegenerateEncodingError(f"Target overlap p_m={p_m:.3e} vanishes")
    return BlockEncoding(unitary, right, target, {'kind': 'postselect', 'p_m': p_m})


def mixed_postselect_encoding(prep_unitary: Union[Operator, np.ndarray], partition: Tuple[int, int],
                              target: Projector) -> BlockEncoding:
    '''M = Pi_m U (I_A x |0><0|_B) for a maximally mixed register A'''
    d_a, d_b = (int(d) for d in partition)
    if d_a * d_b != target.dim:
        raise DimensionError(f"Partition {d_a}x{d_b} does not match system dimension {target.dim}")
    unitary = _as_operator(prep_unitary, target.dims)
    right = Projector.from_indices(np.arange(d_a) * d_b, target.dims)
    return BlockEncoding(unitary, right, target,
                         {'kind': 'mixed_postselect', 'partition': (d_a, d_b)})


@dataclass(frozen=True, eq=False)
class Gate:
    matrix: np.ndarray
    qubits: Tuple[int, ...]


@dataclass(frozen=True)
class Measurement:
    time: int  # number of gates applied before the measurement
    qubit: int
    outcome: int


@dataclass(frozen=True, eq=False)
class HybridCircuit:
    n_qubits: int
    gates: Tuple[Gate, ...] = ()
    measurements: Tuple[Measurement, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'gates', tuple(self.gates))
        object.__setattr__(self, 'measurements', tuple(self.measurements))
        for gate in self.gates:
            if not 1 <= len(gate.qubits) <= 2 or len(set(gate.qubits)) != len(gate.qubits):
                raise DomainError(f"Gates act on one or two distinct qubits, got {gate.qubits}")
            if any(q < 0 or q >= self.n_qubits for q in gate.qubits):
                raise DimensionError(f"Gate qubits {gate.qubits} outside {self.n_qubits}-qubit register")
            size = 2 ** len(gate.qubits)
            if np.shape(gate.matrix) != (size, size):
                raise DimensionError(f"Gate on {gate.qubits} needs a {size}x{size} matrix")
            if not Operator.square(gate.matrix, qubit_dims(len(gate.qubits))).is_unitary():
                raise DomainError(f"Gate on {gate.qubits} is not unitary")
        for meas in self.measurements:
            if meas.outcome not in (0, 1):
                raise DomainError(f"Forced outcome must be 0 or 1, got {meas.outcome}")
            if not 0 <= meas.qubit < self.n_qubits:
                raise DimensionError(f"Measured qubit {meas.qubit} outside register")
            if not 0 <= meas.time <= len(self.gates):
                raise DomainError(f"Measurement time {meas.time} outside [0, {len(self.gates)}]")

    @property
    def n_meas(self) -> int:
        return len(self.measurements)

    @property
    def dims(self) -> Tuple[int, ...]:
        return qubit_dims(self.n_qubits)

    def timeline(self) -> Iterator[Union[Gate, Measurement]]:
        '''Gates and measurements in execution order'''
        pending = sorted(enumerate(self.measurements), key=lambda item: (item[1].time, item[0]))
        cursor = 0
        for t in range(len(self.gates) + 1):
            while cursor < len(pending) and pending[cursor][1].time == t:
                yield pending[cursor][1]
                cursor += 1
            if t < len(self.gates):
                yield self.gates[t]


def kraus_chain(circuit: HybridCircuit, flip: bool = False) -> np.ndarray:
    '''Unnormalized map of the circuit with every measurement forced in place.

    With flip=True every measurement is forced onto the complementary outcome.
    '''
    dims = circuit.dims
    check_envelope(2 ** circuit.n_qubits)
    chain = np.eye(2 ** circuit.n_qubits, dtype=complex)
    for item in circuit.timeline():
        if isinstance(item, Gate):
            chain = apply_local(item.matrix, item.qubits, dims, chain)
        else:
            outcome = 1 - item.outcome if flip else item.outcome
            chain = Projector.computational(dims, {item.qubit: outcome}).apply(chain)
    return chain


def swap_deferral_encoding(circuit: HybridCircuit) -> BlockEncoding:
    '''Defer each measurement by swapping the qubit with an ancilla prepared in |m_j>'''
    n, n_meas = circuit.n_qubits, circuit.n_meas
    dims = qubit_dims(n + n_meas)
    check_envelope(2 ** (n + n_meas))

    unitary = np.eye(2 ** (n + n_meas), dtype=complex)
    outcomes: Dict[int, int] = {}
    j = 0
    for item in circuit.timeline():
        if isinstance(item, Gate):
            unitary = apply_local(item.matrix, item.qubits, dims, unitary)
            continue
        ancilla = n + j
        if item.outcome == 1:
            unitary = apply_local(PAULI_X, [ancilla], dims, unitary)
        unitary = apply_local(SWAP, [item.qubit, ancilla], dims, unitary)
        outcomes[ancilla] = item.outcome
        j += 1

    right = Projector.computational(dims, {a: 0 for a in outcomes})
    left = Projector.computational(dims, outcomes)
    logger.debug(f"SWAP-deferral encoding: {n} system qubits, {n_meas} ancillas")
    return BlockEncoding(Operator.square(unitary, dims), right, left,
                         {'kind': 'swap_deferral', 'ancillas': n_meas, 'system_qubits': n})


def add_gate(dim: int) -> np.ndarray:
    '''Modular increment |i> -> |i+1 mod dim>'''
    return np.roll(np.eye(dim, dtype=complex), 1, axis=0)


def controlled_add(dim: int, fire_on: int) -> np.ndarray:
    '''ADD on the counter when the control qubit is |fire_on>, identity otherwise'''
    increment = add_gate(dim)
    gate = np.zeros((2 * dim, 2 * dim), dtype=complex)
    for b in (0, 1):
        selector = np.zeros((2, 2), dtype=complex)
        selector[b, b] = 1.0
        gate += np.kron(selector, increment if b == fire_on else np.eye(dim))
    return gate


def compression_gadget_encoding(circuit: HybridCircuit, exact: bool = True) -> BlockEncoding:
    '''Replace the deferred measurements by one coherent counter.

    exact=True counts failed measurements in a counter of dimension N_meas + 1,
    so the counter returns to |0> only when every outcome matched. exact=False
    is the literal construction: successes counted modulo N_meas, which also
    lets the all-failure path back into the counter-|0> block.

    The exact counter has to tell N_meas failures apart from none, so it needs
    N_meas + 1 levels and ceil(log2(N_meas + 1)) qubits, one more than the
    literal form when N_meas is a power of two.
    '''
    n, n_meas = circuit.n_qubits, circuit.n_meas
    if n_meas == 0:
        counter_dim = 1
    else:
        counter_dim = n_meas + 1 if exact else n_meas
    dims = qubit_dims(n) + (counter_dim,)
    check_envelope(2 ** n * counter_dim)

    unitary = np.eye(2 ** n * counter_dim, dtype=complex)
    for item in circuit.timeline():
        if isinstance(item, Gate):
            unitary = apply_local(item.matrix, item.qubits, dims, unitary)
            continue
        fire_on = 1 - item.outcome if exact else item.outcome
        unitary = apply_local(controlled_add(counter_dim, fire_on), [item.qubit, n], dims, unitary)

    counter_zero = Projector.computational(dims, {n: 0})
    counter_qubits = math.ceil(math.log2(counter_dim)) if counter_dim > 1 else 0
    logger.debug(f"Compression gadget: counter dimension {counter_dim} ({counter_qubits} qubits)")
    return BlockEncoding(Operator.square(unitary, dims), counter_zero, counter_zero,
                         {'kind': 'compression_gadget', 'counter_dim': counter_dim,
                          'counter_qubits': counter_qubits, 'exact': exact, 'system_qubits': n})


def random_hybrid_circuit(n_qubits: int, n_meas: int, depth: int = 4, seed: SeedLike = None) -> HybridCircuit:
    '''Brickwork of Haar two-qubit gates with forced measurements at random times'''
    rng = as_rng(seed)
    gates: List[Gate] = []
    for layer in range(depth):
        if n_qubits == 1:
            gates.append(Gate(haar_random_unitary(2, rng), (0,)))
            continue
        for first in range(layer % 2, n_qubits - 1, 2):
            gates.append(Gate(haar_random_unitary(4, rng), (first, first + 1)))
    times = np.sort(rng.integers(1, len(gates) + 1, size=n_meas))
    measurements = [Measurement(int(t), int(rng.integers(n_qubits)), int(rng.integers(2)))
                    for t in times]
    return HybridCircuit(n_qubits, tuple(gates), tuple(measurements))
